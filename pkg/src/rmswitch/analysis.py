"""Monte Carlo estimators built on simulated ensembles.

Each estimator has a convenience form that runs the ensemble itself and a
``*_from_ensemble`` reduction for reuse of an existing
:class:`~rmswitch.hybrid.EnsembleSummary`.
"""

from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .ctmc import RngStream
from .dynamics import fixed_points
from .errors import ValidationError, WrongSide
from .hybrid import ensemble, simulate_hybrid
from .lyapunov import generator

DEFAULT_BURN_IN = 0.5
LOWER_FRACTION = 0.95
UPPER_FRACTION = 0.05


class Direction(str, Enum):
    FROM_LEFT = "from-left"
    FROM_RIGHT = "from-right"


@dataclass(frozen=True)
class HittingSpec:
    threshold: float
    direction: Direction
    max_horizon: float

    def __post_init__(self):
        object.__setattr__(self, "direction", Direction(self.direction))
        if not (0.0 < self.threshold < 1.0):
            raise ValidationError("threshold", f"must lie strictly inside (0, 1), got {self.threshold!r}")
        if not self.max_horizon > 0:
            raise ValidationError("max_horizon", "must be positive")


@dataclass
class HittingEstimate:
    mean: float
    std_error: float
    fraction_censored: float
    times: np.ndarray  # NaN marks a censored path

    def to_dict(self):
        return {
            "mean": self.mean,
            "std_error": self.std_error,
            "fraction_censored": self.fraction_censored,
            "n_paths": int(self.times.size),
            "n_censored": int(np.isnan(self.times).sum()),
        }


def first_crossing_times(grid, paths, threshold, direction):
    """First time each path reaches ``threshold``, linearly interpolated.

    Returns NaN for paths that never reach it on the grid.
    """
    if direction is Direction.FROM_LEFT:
        hit = paths >= threshold
    else:
        hit = paths <= threshold
    any_hit = hit.any(axis=1)
    k = np.argmax(hit, axis=1)
    times = np.full(paths.shape[0], np.nan)
    for p in np.flatnonzero(any_hit):
        j = k[p]
        if j == 0:
            times[p] = grid[0]
            continue
        x_prev, x_hit = paths[p, j - 1], paths[p, j]
        frac = (threshold - x_prev) / (x_hit - x_prev)
        times[p] = grid[j - 1] + frac * (grid[j] - grid[j - 1])
    return times


def hitting_time_from_ensemble(ens, spec):
    times = first_crossing_times(ens.grid, ens.paths, spec.threshold, spec.direction)
    hit = times[~np.isnan(times)]
    censored = 1.0 - hit.size / times.size
    if hit.size == 0:
        mean, se = float("nan"), float("nan")
    else:
        mean = float(hit.mean())
        se = float(hit.std(ddof=1) / np.sqrt(hit.size)) if hit.size > 1 else 0.0
    return HittingEstimate(mean, se, float(censored), times)


def estimate_hitting_time(model, config, x0, i0, spec, n_paths, master_seed, workers=None):
    """Mean first-passage time to ``spec.threshold``; censored paths are reported, not imputed."""
    if spec.direction is Direction.FROM_LEFT and x0 > spec.threshold:
        raise WrongSide(f"x0={x0} lies right of threshold {spec.threshold} for a from-left hitting time")
    if spec.direction is Direction.FROM_RIGHT and x0 < spec.threshold:
        raise WrongSide(f"x0={x0} lies left of threshold {spec.threshold} for a from-right hitting time")
    cfg = replace(config, horizon=spec.max_horizon, sample_every=min(config.sample_every, spec.max_horizon))
    ens = ensemble(model, cfg, x0, i0, n_paths, master_seed, workers)
    return hitting_time_from_ensemble(ens, spec)


def _post_burn_in(ens, burn_in_fraction):
    if not (0.0 <= burn_in_fraction < 1.0):
        raise ValidationError("burn_in_fraction", "must lie in [0, 1)")
    return ens.grid >= burn_in_fraction * ens.config.horizon


@dataclass
class OccupationHistogram:
    bin_edges: np.ndarray
    mass: np.ndarray
    burn_in_fraction: float
    samples: np.ndarray = field(repr=False)

    def fraction_in(self, lo, hi):
        """Pooled fraction of post-burn-in samples in the open interval (lo, hi)."""
        s = self.samples
        return float(np.count_nonzero((s > lo) & (s < hi)) / s.size)

    def bin_of(self, x):
        return int(min(np.searchsorted(self.bin_edges, x, side="right") - 1, self.mass.size - 1))


def occupation_from_ensemble(ens, bins=50, burn_in_fraction=DEFAULT_BURN_IN):
    if bins < 10:
        raise ValidationError("bins", f"need at least 10 bins, got {bins}")
    keep = _post_burn_in(ens, burn_in_fraction)
    samples = ens.paths[:, keep].ravel()
    counts, edges = np.histogram(samples, bins=int(bins), range=(0.0, 1.0))
    mass = counts / counts.sum()
    return OccupationHistogram(edges, mass, float(burn_in_fraction), samples)


def occupation_measure(model, config, x0, i0, n_paths, bins=50, burn_in_fraction=DEFAULT_BURN_IN,
                       master_seed=0, workers=None):
    """Histogram of pooled post-burn-in samples on [0, 1]."""
    if bins < 10:
        raise ValidationError("bins", f"need at least 10 bins, got {bins}")
    ens = ensemble(model, config, x0, i0, n_paths, master_seed, workers)
    return occupation_from_ensemble(ens, bins, burn_in_fraction)


@dataclass
class MomentCurve:
    grid: np.ndarray
    estimate: np.ndarray
    std_error: np.ndarray
    p: float

    def running_max(self):
        return np.maximum.accumulate(self.estimate)

    def late_increase(self, from_fraction=0.5):
        """Growth of the running maximum over the final part of the horizon."""
        rm = self.running_max()
        k = int(np.searchsorted(self.grid, from_fraction * self.grid[-1]))
        return float(rm[-1] - rm[k])


def moment_from_ensemble(ens, p):
    if not p > 0:
        raise ValidationError("p", f"moment order must be positive, got {p!r}")
    vals = ens.paths**p
    est = vals.mean(axis=0)
    if ens.n_paths > 1:
        se = vals.std(axis=0, ddof=1) / np.sqrt(ens.n_paths)
    else:
        se = np.zeros_like(est)
    return MomentCurve(ens.grid, est, se, float(p))


def moment_curve(model, config, x0, i0, p, n_paths, master_seed, workers=None):
    """Ensemble estimate of E[x(t)^p] on the output grid."""
    if not p > 0:
        raise ValidationError("p", f"moment order must be positive, got {p!r}")
    return moment_from_ensemble(ensemble(model, config, x0, i0, n_paths, master_seed, workers), p)


class BasinLabel(str, Enum):
    LOWER = "LowerBasin"
    UPPER = "UpperBasin"
    MIXED = "Mixed"
    TRANSIT = "Transit"


@dataclass
class BasinResult:
    label: BasinLabel
    fraction_below: float  # paths whose post-burn-in samples all sit below the separator
    fraction_above: float  # ... all sit above it
    fraction_final_below: float
    separator: float
    ahat: float
    lower_threshold: float = LOWER_FRACTION
    upper_threshold: float = UPPER_FRACTION

    def to_dict(self):
        return {
            "label": self.label.value,
            "fraction_below": self.fraction_below,
            "fraction_above": self.fraction_above,
            "fraction_final_below": self.fraction_final_below,
            "separator": self.separator,
            "ahat": self.ahat,
            "lower_threshold": self.lower_threshold,
            "upper_threshold": self.upper_threshold,
        }


def label_from_ensemble(ens, separator, ahat, burn_in_fraction=DEFAULT_BURN_IN):
    """Basin label from post-burn-in confinement relative to ``separator``.

    LowerBasin when at least 95% of paths stay below throughout, UpperBasin
    when at most 5% fail to stay above; a path still crossing inside the
    window counts as confined on neither side. Otherwise a start above the
    separator with most paths ending below is Transit, and anything else is
    Mixed.
    """
    keep = _post_burn_in(ens, burn_in_fraction)
    late = ens.paths[:, keep]
    f = float((late < separator).all(axis=1).mean())
    g = float((late > separator).all(axis=1).mean())
    final_below = float((ens.final_x < separator).mean())
    if f >= LOWER_FRACTION:
        label = BasinLabel.LOWER
    elif 1.0 - g <= UPPER_FRACTION:
        label = BasinLabel.UPPER
    elif ens.x0 > separator and final_below > 0.5:
        label = BasinLabel.TRANSIT
    else:
        label = BasinLabel.MIXED
    return BasinResult(label, f, g, final_below, separator, ahat)


def classify_basin(model, config, x0_grid, i0, n_paths, master_seed, burn_in_fraction=DEFAULT_BURN_IN,
                   workers=None):
    """Label each starting point by where its ensemble settles relative to a2.

    The separator is the unstable root a2 of the low-mutation cubic. Every x0
    reuses ``master_seed``, so neighbouring starting points share noise.
    """
    low = fixed_points(model.game, model.mu1)
    high = fixed_points(model.game, model.mu2)
    separator = low.a2
    ahat = high.locations[0] if len(high.points) == 1 else float("nan")
    out = {}
    for x0 in x0_grid:
        ens = ensemble(model, config, float(x0), i0, n_paths, master_seed, workers)
        out[float(x0)] = label_from_ensemble(ens, separator, ahat, burn_in_fraction)
    return out


@dataclass
class DynkinCheck:
    """Per-path martingale residual V(Y_T) - V(Y_0) - int_0^T LV(Y_s) ds."""

    lhs_mean: float  # E[V(Y_T)] - V(Y_0)
    rhs_mean: float  # E[int LV]
    residual_mean: float
    residual_se: float


def dynkin_check(model, config, spec, x0, i0, n_paths, master_seed):
    """Monte Carlo check of Dynkin's formula at the fixed time ``config.horizon``.

    The time integral is taken by the trapezoid rule on the output grid, except
    that each regime jump splits the interval it falls in exactly, since LV is
    discontinuous in time there.
    """
    residuals = np.empty(n_paths)
    lhs = np.empty(n_paths)
    rhs = np.empty(n_paths)
    V0 = float(spec.value(x0, i0))
    for k in range(n_paths):
        traj = simulate_hybrid(model, config, x0, i0, RngStream(master_seed, k))
        t, x, r = traj.t, traj.x, traj.regime
        lv = np.where(
            r == 1,
            generator(model, spec.value, spec.derivative, x, 1),
            generator(model, spec.value, spec.derivative, x, 2),
        )
        pieces = 0.5 * np.diff(t) * (lv[:-1] + lv[1:])
        jumps = traj.regime_path.jump_times
        jumps = jumps[jumps <= t[-1]]
        for s in np.unique(np.searchsorted(t, jumps, side="left")):
            h = t[s] - t[s - 1]
            inside = jumps[(jumps > t[s - 1]) & (jumps <= t[s])]
            # x is smooth across a jump: interpolate it, switch the regime only
            integral = 0.0
            ri = int(r[s - 1])
            prev_t, prev_x = t[s - 1], x[s - 1]
            for tj in inside:
                xj = x[s - 1] + (x[s] - x[s - 1]) * (tj - t[s - 1]) / h
                left = generator(model, spec.value, spec.derivative, prev_x, ri)
                right = generator(model, spec.value, spec.derivative, xj, ri)
                integral += 0.5 * (tj - prev_t) * (left + right)
                ri = 3 - ri
                prev_t, prev_x = tj, xj
            left = generator(model, spec.value, spec.derivative, prev_x, ri)
            integral += 0.5 * (t[s] - prev_t) * (left + lv[s])
            pieces[s - 1] = integral
        integral = float(pieces.sum())
        lhs[k] = float(spec.value(x[-1], int(r[-1]))) - V0
        rhs[k] = integral
        residuals[k] = lhs[k] - rhs[k]
    se = float(residuals.std(ddof=1) / np.sqrt(n_paths)) if n_paths > 1 else 0.0
    return DynkinCheck(float(lhs.mean()), float(rhs.mean()), float(residuals.mean()), se)
