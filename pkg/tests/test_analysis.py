import numpy as np
import pytest

from conftest import quiet_model
from rmswitch.analysis import (
    BasinLabel,
    Direction,
    HittingSpec,
    classify_basin,
    dynkin_check,
    estimate_hitting_time,
    first_crossing_times,
    hitting_time_from_ensemble,
    label_from_ensemble,
    moment_curve,
    moment_from_ensemble,
    occupation_from_ensemble,
    occupation_measure,
)
from rmswitch.ctmc import GeneratorQ
from rmswitch.dynamics import TwoTypeGame, fixed_points
from rmswitch.errors import ValidationError, WrongSide
from rmswitch.hybrid import SimConfig, ensemble
from rmswitch.lyapunov import Family, LyapunovSpec

SHORT = SimConfig(horizon=20.0)


class TestHitting:
    def test_interpolated_crossing(self):
        grid = np.array([0.0, 1.0, 2.0])
        paths = np.array([[0.1, 0.3, 0.5], [0.1, 0.2, 0.25], [0.5, 0.4, 0.1]])
        t = first_crossing_times(grid, paths, 0.4, Direction.FROM_LEFT)
        assert t[0] == pytest.approx(1.5)
        assert np.isnan(t[1])
        assert t[2] == 0.0

    def test_start_on_threshold(self, fig1):
        spec = HittingSpec(0.5, "from-left", 5.0)
        est = estimate_hitting_time(fig1, SHORT, 0.5, 1, spec, 5, 0)
        assert est.mean == 0.0 and est.fraction_censored == 0.0

    def test_wrong_side(self, fig1):
        with pytest.raises(WrongSide):
            estimate_hitting_time(fig1, SHORT, 0.6, 1, HittingSpec(0.5, "from-left", 5.0), 5, 0)
        with pytest.raises(WrongSide):
            estimate_hitting_time(fig1, SHORT, 0.4, 1, HittingSpec(0.5, "from-right", 5.0), 5, 0)

    def test_censoring_is_reported(self, fig1, fig1_points):
        # from the upper basin under the bistable model a1 is essentially never reached
        spec = HittingSpec(fig1_points["a1"] + 0.01, "from-right", 10.0)
        est = estimate_hitting_time(fig1, SHORT, 0.7, 1, spec, 20, 0)
        assert est.fraction_censored == 1.0
        assert np.isnan(est.mean)
        assert est.to_dict()["n_censored"] == 20

    def test_reaches_lower_root_from_below(self, fig1, fig1_points):
        spec = HittingSpec(fig1_points["a1"], "from-left", 100.0)
        est = estimate_hitting_time(fig1, SHORT, 0.001, 1, spec, 50, 1)
        assert est.fraction_censored == 0.0
        assert 0 < est.mean < 100 and est.std_error > 0

    def test_max_horizon_overrides_config(self, fig1):
        ens = ensemble(fig1, SimConfig(horizon=3.0), 0.7, 1, 3, 0)
        est = hitting_time_from_ensemble(ens, HittingSpec(0.01, "from-right", 3.0))
        assert est.times.size == 3

    @pytest.mark.parametrize("thr,horizon", [(0.0, 1.0), (1.0, 1.0), (0.5, 0.0)])
    def test_spec_validation(self, thr, horizon):
        with pytest.raises(ValidationError):
            HittingSpec(thr, "from-left", horizon)


class TestOccupation:
    def test_mass_normalised(self, fig1):
        hist = occupation_measure(fig1, SHORT, 0.4, 1, 10, bins=25)
        assert hist.mass.sum() == pytest.approx(1.0, abs=1e-12)
        assert hist.bin_edges[0] == 0.0 and hist.bin_edges[-1] == 1.0

    def test_point_mass_at_fixed_point(self):
        # both regimes share the same root when the rate never switches
        g = TwoTypeGame(0.2, 0.2)
        m = quiet_model(g, 0.05, 0.05, GeneratorQ(1.0, 1.0))
        hist = occupation_measure(m, SHORT, 0.5, 1, 3, bins=10)
        assert hist.mass[hist.bin_of(0.5)] == 1.0

    def test_too_few_bins(self, fig1):
        with pytest.raises(ValidationError):
            occupation_measure(fig1, SHORT, 0.4, 1, 2, bins=5)

    def test_burn_in_drops_early_samples(self, fig1):
        ens = ensemble(fig1, SHORT, 0.4, 1, 4, 0)
        full = occupation_from_ensemble(ens, 10, 0.0)
        late = occupation_from_ensemble(ens, 10, 0.5)
        assert full.samples.size == ens.paths.size
        assert late.samples.size == 4 * np.count_nonzero(ens.grid >= 10.0)


class TestMoments:
    def test_matches_direct_mean(self, fig1):
        ens = ensemble(fig1, SHORT, 0.3, 2, 8, 4)
        curve = moment_from_ensemble(ens, 2.0)
        np.testing.assert_allclose(curve.estimate, (ens.paths**2).mean(axis=0))
        assert curve.estimate[0] == pytest.approx(0.09)
        assert np.all(np.diff(curve.running_max()) >= 0)

    def test_bounded_by_one(self, fig1):
        curve = moment_curve(fig1, SHORT, 0.9, 1, 4.0, 10, 0)
        assert np.all(curve.estimate <= 1.0)
        assert curve.late_increase() >= 0

    def test_rejects_bad_order(self, fig1):
        with pytest.raises(ValidationError):
            moment_curve(fig1, SHORT, 0.5, 1, 0.0, 2, 0)


class TestBasins:
    def test_bistable_model(self, fig1):
        res = classify_basin(fig1, SimConfig(horizon=50.0), [0.2, 0.7], 1, 100, 42)
        assert res[0.2].label is BasinLabel.LOWER
        assert res[0.7].label is BasinLabel.UPPER

    def test_transit_model(self, fig1_q12):
        res = classify_basin(fig1_q12, SimConfig(horizon=200.0), [0.7], 1, 100, 42)
        assert res[0.7].label in (BasinLabel.TRANSIT, BasinLabel.LOWER)
        assert res[0.7].fraction_final_below > 0.9

    def test_symmetric_game_splits_at_half(self):
        g = TwoTypeGame(0.2, 0.2)
        m = quiet_model(g, 0.05, 0.25, GeneratorQ(10.0, 10.0))
        res = classify_basin(m, SHORT, [0.25, 0.75], 1, 50, 0)
        assert res[0.25].separator == pytest.approx(0.5, abs=1e-12)
        assert res[0.25].label is BasinLabel.LOWER
        assert res[0.75].label is BasinLabel.UPPER

    def test_fraction_below_decreases_with_start(self, fig1):
        grid = [0.05, 0.3, 0.5, 0.6, 0.8, 0.95]
        res = classify_basin(fig1, SHORT, grid, 1, 40, 3)
        f = [res[x].fraction_below for x in grid]
        assert all(a >= b for a, b in zip(f, f[1:]))

    def test_transit_model_above_separator(self, fig1_q12, fig1_points):
        res = classify_basin(fig1_q12, SimConfig(horizon=500.0), [0.6, 0.8, 0.95], 1, 100, 42)
        for x0, r in res.items():
            assert x0 > fig1_points["a2"]
            assert r.label in (BasinLabel.TRANSIT, BasinLabel.LOWER), x0

    def test_lower_and_upper_do_not_interleave(self, fig1):
        grid = np.round(np.arange(0.02, 0.99, 0.02), 2)
        res = classify_basin(fig1, SHORT, grid, 1, 40, 3)
        labels = [res[x].label for x in grid]
        first_upper = labels.index(BasinLabel.UPPER)
        last_lower = len(labels) - 1 - labels[::-1].index(BasinLabel.LOWER)
        assert last_lower < first_upper

    def test_label_rules(self, fig1):
        ens = ensemble(fig1, SimConfig(horizon=2.0), 0.7, 1, 4, 0)
        ens.paths[:] = 0.6
        assert label_from_ensemble(ens, 0.5, 0.45).label is BasinLabel.UPPER
        ens.paths[0, -1] = 0.4  # crossing inside the window: confined on neither side
        res = label_from_ensemble(ens, 0.5, 0.45)
        assert res.fraction_below == 0.0 and res.fraction_above == 0.75
        assert res.label is BasinLabel.MIXED
        ens.paths[:2] = 0.1
        assert label_from_ensemble(ens, 0.5, 0.45).label is BasinLabel.MIXED
        ens.paths[:3] = 0.1
        ens.paths[3, :-1] = 0.1
        res = label_from_ensemble(ens, 0.5, 0.45, burn_in_fraction=0.0)
        assert res.label is BasinLabel.TRANSIT


class TestDynkin:
    @pytest.mark.parametrize("spec", [
        LyapunovSpec(Family.MONOMIAL, alpha=2.0, c1=1.0, c2=2.0),
        LyapunovSpec(Family.NEG_LOG_X, c1=1.01, c2=1.0),
    ], ids=["monomial", "neg-log"])
    def test_martingale_residual(self, fig1, spec):
        cfg = SimConfig(dt=1e-3, horizon=1.0, sample_every=1e-3)
        chk = dynkin_check(fig1, cfg, spec, 0.3, 1, 400, 11)
        assert abs(chk.residual_mean) <= 3 * chk.residual_se + 1e-9
        assert chk.residual_se > 0


class TestInstability:
    @pytest.mark.parametrize("root,offset", [("a1", 1e-4), ("a3", -1e-4)])
    def test_outer_roots_repel_nearby_starts(self, fig1, fig1_points, root, offset):
        x = fig1_points[root]
        ens = ensemble(fig1, SimConfig(horizon=50.0), x + offset, 1, 200, 7)
        assert np.mean(np.abs(ens.final_x - x) < 1e-3) <= 0.05


def test_symmetric_roots_are_mirrored():
    low = fixed_points(TwoTypeGame(0.2, 0.2), 0.05)
    assert low.a1 + low.a3 == pytest.approx(1.0, abs=1e-12)
