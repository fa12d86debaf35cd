import warnings

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from conftest import FIG1_GAME, figure1_model, quiet_model
from rmswitch.ctmc import GeneratorQ, RngStream, simulate_chain
from rmswitch.dynamics import TwoTypeGame, drift2, fixed_points
from rmswitch.errors import ValidationError
from rmswitch.hybrid import (
    RegimeOrderWarning,
    SimConfig,
    SwitchedModel,
    ensemble,
    integrate_segment,
    pure_ode,
    simulate_hybrid,
)


def richardson_order(xs):
    coarse, mid, fine = xs
    return np.log2(np.abs(coarse - mid).max() / np.abs(mid - fine).max())


class TestConfig:
    @pytest.mark.parametrize("kw", [
        {"dt": 0.0}, {"dt": -1e-3}, {"horizon": float("inf")},
        {"dt": 0.2, "sample_every": 0.1}, {"sample_every": 200.0}, {"boundary_guard": 0.5},
    ])
    def test_rejects(self, kw):
        with pytest.raises(ValidationError):
            SimConfig(**kw)

    def test_grid_includes_horizon(self):
        g = SimConfig(horizon=1.0, sample_every=0.1).grid()
        assert g.size == 11
        assert g[-1] == pytest.approx(1.0, abs=1e-15)


class TestModel:
    def test_reorders_rates(self):
        m = SwitchedModel(FIG1_GAME, 0.26, 0.01, GeneratorQ(10.0, 10.0))
        assert (m.mu1, m.mu2) == (0.01, 0.26)

    def test_warns_without_straddle(self):
        with pytest.warns(RegimeOrderWarning):
            SwitchedModel(FIG1_GAME, 0.01, 0.05, GeneratorQ(1.0, 1.0))

    def test_no_warning_for_figure_model(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            figure1_model()


class TestSegment:
    def test_zero_duration(self, fig1):
        assert integrate_segment(fig1, 0.37, 1, 0.0, 1e-3) == 0.37

    def test_fixed_point_stays(self, fig1):
        a2 = fixed_points(FIG1_GAME, 0.01).a2
        assert integrate_segment(fig1, a2, 1, 5.0, 1e-3) == pytest.approx(a2, abs=1e-12)

    def test_converges_to_stable_root(self, fig1, fig1_points):
        x = integrate_segment(fig1, 0.3, 1, 200.0, 1e-2)
        assert abs(x - fig1_points["a1"]) < 1e-6

    def test_step_halving(self, fig1):
        a = integrate_segment(fig1, 0.7, 2, 10.0, 1e-3)
        b = integrate_segment(fig1, 0.7, 2, 10.0, 5e-4)
        assert abs(a - b) <= 1e-8

    def test_fourth_order(self, fig1):
        xs = [np.array([integrate_segment(fig1, 0.7, 1, 8.0, dt)]) for dt in (0.2, 0.1, 0.05)]
        assert 3.7 <= richardson_order(xs) <= 4.3

    def test_non_multiple_duration(self, fig1):
        # a remainder step must land exactly on the requested time
        a = integrate_segment(fig1, 0.7, 1, 1.0005, 1e-3)
        b = integrate_segment(fig1, integrate_segment(fig1, 0.7, 1, 1.0, 1e-3), 1, 0.0005, 1e-3)
        assert a == pytest.approx(b, abs=1e-14)


class TestHybridPath:
    def test_matches_ode_without_switching(self):
        m = quiet_model(FIG1_GAME, 0.01, 0.26, GeneratorQ(1e-9, 1e-9))
        cfg = SimConfig(dt=1e-3, horizon=10.0, sample_every=0.5)
        traj = simulate_hybrid(m, cfg, 0.7, 1, RngStream(0))
        sol = solve_ivp(lambda t, y: drift2(FIG1_GAME, 0.01, y), (0.0, 10.0), [0.7],
                        t_eval=cfg.grid(), rtol=1e-12, atol=1e-14, method="DOP853")
        np.testing.assert_allclose(traj.x, sol.y[0], atol=1e-6)
        assert np.all(traj.regime == 1)

    def test_reproducible(self, fig1):
        cfg = SimConfig(horizon=5.0)
        a = simulate_hybrid(fig1, cfg, 0.5, 1, RngStream(3, 4))
        b = simulate_hybrid(fig1, cfg, 0.5, 1, RngStream(3, 4))
        np.testing.assert_array_equal(a.x, b.x)
        np.testing.assert_array_equal(a.regime, b.regime)
        assert a.seed == (3, 4)

    def test_regime_matches_chain(self, fig1):
        cfg = SimConfig(horizon=5.0, sample_every=0.01, dt=1e-3)
        traj = simulate_hybrid(fig1, cfg, 0.5, 2, RngStream(8, 1))
        chain = simulate_chain(fig1.Q, 2, 5.0, RngStream(8, 1))
        np.testing.assert_array_equal(traj.regime_path.jump_times, chain.jump_times)
        assert [chain.state_at(t) for t in traj.t] == traj.regime.tolist()

    def test_switches_at_exact_jump_times(self, fig1):
        # integrating piecewise between jumps by hand must reproduce the path
        cfg = SimConfig(horizon=1.0, sample_every=1.0, dt=1e-3)
        traj = simulate_hybrid(fig1, cfg, 0.5, 1, RngStream(21, 0))
        jumps = traj.regime_path.jump_times
        x, t, r = 0.5, 0.0, 1
        for tj in list(jumps) + [1.0]:
            x = integrate_segment(fig1, x, r, tj - t, 1e-3)
            t, r = tj, 3 - r
        assert traj.x[-1] == pytest.approx(x, abs=1e-13)

    def test_fourth_order_through_jumps(self):
        m = figure1_model(1.0, 1.0)
        xs = [simulate_hybrid(m, SimConfig(dt=dt, horizon=8.0, sample_every=0.4), 0.7, 1, RngStream(3)).x
              for dt in (0.1, 0.05, 0.025)]
        assert 3.7 <= richardson_order(xs) <= 4.3

    def test_stays_in_unit_interval(self, fig1):
        traj = simulate_hybrid(fig1, SimConfig(horizon=20.0), 0.999, 2, RngStream(0))
        assert np.all((traj.x > 0) & (traj.x < 1))

    @pytest.mark.parametrize("x0,i0", [(0.0, 1), (1.0, 1), (0.5, 0), (0.5, 3)])
    def test_rejects_bad_start(self, fig1, x0, i0):
        with pytest.raises(ValidationError):
            simulate_hybrid(fig1, SimConfig(horizon=1.0), x0, i0, RngStream(0))

    def test_pure_ode_grid(self, fig1):
        grid, xs = pure_ode(fig1, 1, 0.7, SimConfig(horizon=2.0))
        assert xs[0] == 0.7 and grid.size == xs.size == 21


class TestEnsemble:
    def test_worker_count_does_not_matter(self, fig1):
        cfg = SimConfig(horizon=5.0)
        runs = [ensemble(fig1, cfg, 0.7, 1, 24, 42, workers=w) for w in (1, 4, 8)]
        for other in runs[1:]:
            np.testing.assert_array_equal(runs[0].paths, other.paths)
            np.testing.assert_array_equal(runs[0].regimes, other.regimes)

    def test_single_path_is_stream_zero(self, fig1):
        cfg = SimConfig(horizon=5.0)
        ens = ensemble(fig1, cfg, 0.4, 2, 1, 9)
        traj = simulate_hybrid(fig1, cfg, 0.4, 2, RngStream(9, 0))
        np.testing.assert_array_equal(ens.paths[0], traj.x)
        np.testing.assert_array_equal(ens.var_x, 0.0)

    def test_summary_statistics(self, fig1):
        ens = ensemble(fig1, SimConfig(horizon=2.0), 0.6, 1, 10, 1, thresholds=(0.5,))
        np.testing.assert_allclose(ens.mean_x, ens.paths.mean(axis=0))
        np.testing.assert_allclose(ens.var_x, ens.paths.var(axis=0, ddof=1))
        cross = ens.crossings()
        assert len(cross) == 10
        for c in cross:
            row = ens.paths[c["path"]]
            assert c["crossed"] == bool((row <= 0.5).any())

    def test_rejects_empty(self, fig1):
        with pytest.raises(ValidationError):
            ensemble(fig1, SimConfig(horizon=1.0), 0.5, 1, 0, 0)

    def test_confinement_between_outer_roots(self, fig1, fig1_points):
        # started inside (a1, a3) the process never leaves it
        ens = ensemble(fig1, SimConfig(horizon=20.0), 0.7, 1, 50, 5)
        assert np.all(ens.paths > fig1_points["a1"])
        assert np.all(ens.paths < fig1_points["a3"])

    @pytest.mark.parametrize("x0", [1e-6, 0.5, 1 - 1e-6])
    def test_outer_band_after_burn_in(self, fig1, fig1_points, x0):
        ens = ensemble(fig1, SimConfig(horizon=30.0), x0, 2, 50, 1)
        late = ens.paths[:, ens.grid >= 10.0]
        assert np.all(late > fig1_points["a1"] - 0.05)
        assert np.all(late < fig1_points["a3"] + 0.05)

    def test_figure_seed_path_stays_upper(self, fig1, fig1_points):
        traj = simulate_hybrid(fig1, SimConfig(horizon=100.0), 0.7, 1, RngStream(42, 0))
        assert np.all(traj.x > fig1_points["a2"])


def test_game_symmetry():
    # swapping the types mirrors the drift
    g = TwoTypeGame(0.2, 0.45)
    x = np.linspace(0, 1, 11)
    np.testing.assert_allclose(drift2(g, 0.1, x), -drift2(g.swapped(), 0.1, 1 - x), atol=1e-15)
