"""Event-exact simulation of the regime-switched replicator-mutator process.

Between regime jumps the frequency follows the deterministic two-type drift
with the active regime's mutation rate; integration is classical RK4 with a
fixed step, cut short so that every segment ends exactly on a jump time or an
output grid time.
"""

import logging
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from numba import njit

from .ctmc import GeneratorQ, RngStream, simulate_chain
from .dynamics import TwoTypeGame, check_mu, critical_mu, drift2
from .errors import NonFiniteState, ValidationError

log = logging.getLogger(__name__)

DEFAULT_DT = 1e-3
DEFAULT_SAMPLE_EVERY = 0.1
DEFAULT_HORIZON = 100.0
DEFAULT_GUARD = 1e-12

# Statuses returned by the compiled kernels.
_OK, _NONFINITE = 0, 1


class BoundaryClampWarning(RuntimeWarning):
    """Rounding pushed the state outside [0, 1] and it was clamped back."""


class RegimeOrderWarning(RuntimeWarning):
    """The mutation rates do not straddle the critical rate."""


@dataclass(frozen=True)
class SimConfig:
    dt: float = DEFAULT_DT
    horizon: float = DEFAULT_HORIZON
    sample_every: float = DEFAULT_SAMPLE_EVERY
    boundary_guard: float = DEFAULT_GUARD

    def __post_init__(self):
        for name in ("dt", "horizon", "sample_every"):
            v = float(getattr(self, name))
            if not (v > 0.0 and np.isfinite(v)):
                raise ValidationError(name, f"must be positive and finite, got {v!r}")
            object.__setattr__(self, name, v)
        if not (self.dt <= self.sample_every <= self.horizon):
            raise ValidationError("sample_every", "require dt <= sample_every <= horizon")
        if not (0.0 <= self.boundary_guard < 0.5):
            raise ValidationError("boundary_guard", "must lie in [0, 0.5)")

    def grid(self):
        n = int(np.floor(self.horizon / self.sample_every * (1.0 + 1e-12)))
        return np.arange(n + 1) * self.sample_every

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class SwitchedModel:
    """Two-type game whose mutation rate is switched by a two-state chain.

    Regime 1 always carries the smaller rate; reversed inputs are reordered.
    Rates that fail to straddle the critical rate only trigger a warning.
    """

    game: TwoTypeGame
    mu1: float
    mu2: float
    Q: GeneratorQ

    def __post_init__(self):
        mu1 = check_mu(self.mu1, "mu1")
        mu2 = check_mu(self.mu2, "mu2")
        if mu1 > mu2:
            mu1, mu2 = mu2, mu1
        object.__setattr__(self, "mu1", mu1)
        object.__setattr__(self, "mu2", mu2)
        mc = critical_mu(self.game)
        if not (mu1 < mc < mu2):
            warnings.warn(
                f"mu1={mu1} and mu2={mu2} do not straddle the critical rate {mc:.6g}",
                RegimeOrderWarning,
                stacklevel=3,
            )

    def mu(self, regime):
        if regime == 1:
            return self.mu1
        if regime == 2:
            return self.mu2
        raise ValidationError("regime", f"must be 1 or 2, got {regime!r}")

    def to_dict(self):
        return {
            "b1": self.game.b1,
            "b2": self.game.b2,
            "mu1": self.mu1,
            "mu2": self.mu2,
            "q12": self.Q.q12,
            "q21": self.Q.q21,
        }


@njit(cache=True, nogil=True)
def _f(x, b1, b2, mu):
    y = 1.0 - x
    return x * (1.0 - y * (1.0 - b1)) * (y - mu) + y * (1.0 + x * (b2 - 1.0)) * (mu - x)


@njit(cache=True, nogil=True)
def _rk4_step(x, h, b1, b2, mu):
    k1 = _f(x, b1, b2, mu)
    k2 = _f(x + 0.5 * h * k1, b1, b2, mu)
    k3 = _f(x + 0.5 * h * k2, b1, b2, mu)
    k4 = _f(x + h * k3, b1, b2, mu)
    return x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@njit(cache=True, nogil=True)
def _segment(x, duration, dt, b1, b2, mu, guard):
    """Returns (x_end, status, clamps)."""
    clamps = 0
    if duration <= 0.0:
        return x, _OK, clamps
    n_full = int(np.floor(duration / dt))
    rem = duration - n_full * dt
    # a remainder at rounding level is dropped rather than taken as a tiny step
    if rem < 1e-9 * dt:
        rem = 0.0
    for k in range(n_full + 1):
        h = dt if k < n_full else rem
        if h <= 0.0:
            break
        x = _rk4_step(x, h, b1, b2, mu)
        if not np.isfinite(x):
            return x, _NONFINITE, clamps
        if x < 0.0:
            x = guard
            clamps += 1
        elif x > 1.0:
            x = 1.0 - guard
            clamps += 1
    return x, _OK, clamps


@njit(cache=True, nogil=True)
def _path(x0, i0, jumps, grid, dt, b1, b2, mu1, mu2, guard, xs, regimes):
    """Fill ``xs``/``regimes`` on ``grid``; returns (status, clamps)."""
    x = x0
    regime = i0
    t = 0.0
    j = 0
    n_jumps = jumps.shape[0]
    clamps = 0
    xs[0] = x
    regimes[0] = regime
    for k in range(1, grid.shape[0]):
        target = grid[k]
        while j < n_jumps and jumps[j] <= target:
            mu = mu1 if regime == 1 else mu2
            x, status, c = _segment(x, jumps[j] - t, dt, b1, b2, mu, guard)
            clamps += c
            if status != _OK:
                return status, clamps
            t = jumps[j]
            regime = 3 - regime
            j += 1
        mu = mu1 if regime == 1 else mu2
        x, status, c = _segment(x, target - t, dt, b1, b2, mu, guard)
        clamps += c
        if status != _OK:
            return status, clamps
        t = target
        xs[k] = x
        regimes[k] = regime
    return _OK, clamps


def _warn_clamps(clamps):
    if clamps:
        warnings.warn(f"state clamped into [0, 1] {clamps} time(s)", BoundaryClampWarning, stacklevel=3)


def integrate_segment(model, x0, regime, duration, dt, boundary_guard=DEFAULT_GUARD):
    """Integrate the fixed-regime drift for ``duration`` with RK4 step ``dt``."""
    if not (0.0 <= x0 <= 1.0):
        raise ValidationError("x0", f"must lie in [0, 1], got {x0!r}")
    if duration < 0:
        raise ValidationError("duration", "must be non-negative")
    if not dt > 0:
        raise ValidationError("dt", "must be positive")
    g = model.game
    x, status, clamps = _segment(
        float(x0), float(duration), float(dt), g.b1, g.b2, model.mu(regime), boundary_guard
    )
    if status != _OK:
        raise NonFiniteState(f"non-finite state while integrating from x0={x0!r}")
    _warn_clamps(clamps)
    return float(x)


@dataclass
class HybridTrajectory:
    t: np.ndarray
    x: np.ndarray
    regime: np.ndarray
    config: SimConfig
    seed: tuple
    regime_path: object = None

    @property
    def samples(self):
        return list(zip(self.t.tolist(), self.x.tolist(), self.regime.tolist()))


def _check_start(x0, i0):
    if not (0.0 < x0 < 1.0):
        raise ValidationError("x0", f"initial frequency must lie in (0, 1), got {x0!r}")
    if i0 not in (1, 2):
        raise ValidationError("i0", f"initial regime must be 1 or 2, got {i0!r}")


def _run(model, config, x0, i0, rng, grid):
    path = simulate_chain(model.Q, i0, config.horizon, rng)
    xs = np.empty(grid.shape[0])
    regimes = np.empty(grid.shape[0], dtype=np.int8)
    g = model.game
    status, clamps = _path(
        float(x0), int(i0), path.jump_times, grid, config.dt,
        g.b1, g.b2, model.mu1, model.mu2, config.boundary_guard, xs, regimes,
    )
    return path, xs, regimes, status, clamps


def simulate_hybrid(model, config, x0, i0, rng):
    """Simulate one path of the switched process on the output grid."""
    _check_start(x0, i0)
    grid = config.grid()
    path, xs, regimes, status, clamps = _run(model, config, x0, i0, rng, grid)
    if status != _OK:
        raise NonFiniteState("non-finite state during hybrid simulation", rng.stream_index)
    _warn_clamps(clamps)
    return HybridTrajectory(grid, xs, regimes, config, (rng.master_seed, rng.stream_index), path)


@dataclass
class EnsembleSummary:
    """Ensemble of paths sharing model, config and start, indexed by stream."""

    model: SwitchedModel
    config: SimConfig
    x0: float
    i0: int
    master_seed: int
    grid: np.ndarray
    paths: np.ndarray  # (n_paths, n_grid)
    regimes: np.ndarray  # (n_paths, n_grid), int8
    thresholds: tuple = ()
    mean_x: np.ndarray = field(init=False)
    var_x: np.ndarray = field(init=False)

    def __post_init__(self):
        self.mean_x = self.paths.mean(axis=0)
        ddof = 1 if self.n_paths > 1 else 0
        self.var_x = self.paths.var(axis=0, ddof=ddof)

    @property
    def n_paths(self):
        return self.paths.shape[0]

    @property
    def final_x(self):
        return self.paths[:, -1]

    @property
    def final_regime(self):
        return self.regimes[:, -1]

    def crossings(self):
        """Per path and threshold: whether the path ever sits on the far side.

        "Far side" is judged relative to the start: a path from below the
        threshold crosses when a sample reaches or exceeds it, and vice versa.
        """
        out = []
        for thr in self.thresholds:
            above = self.x0 > thr
            hit = self.paths <= thr if above else self.paths >= thr
            any_hit = hit.any(axis=1)
            first = np.argmax(hit, axis=1)
            for k in range(self.n_paths):
                out.append({
                    "path": k,
                    "threshold": float(thr),
                    "crossed": bool(any_hit[k]),
                    "first_time": float(self.grid[first[k]]) if any_hit[k] else None,
                })
        return out


def default_workers():
    return os.cpu_count() or 1


def ensemble(model, config, x0, i0, n_paths, master_seed, workers=None, thresholds=()):
    """Simulate ``n_paths`` independent paths; path ``k`` uses stream ``k``.

    Work is spread over a thread pool (the compiled kernel releases the GIL);
    results are written into preallocated rows by path index, so the output
    does not depend on ``workers`` or scheduling.
    """
    _check_start(x0, i0)
    n_paths = int(n_paths)
    if n_paths < 1:
        raise ValidationError("paths", f"need at least one path, got {n_paths}")
    grid = config.grid()
    paths = np.empty((n_paths, grid.shape[0]))
    regimes = np.empty((n_paths, grid.shape[0]), dtype=np.int8)
    clamp_total = 0

    def one(k):
        _, xs, rs, status, clamps = _run(model, config, x0, i0, RngStream(master_seed, k), grid)
        if status != _OK:
            raise NonFiniteState("non-finite state during hybrid simulation", k)
        paths[k] = xs
        regimes[k] = rs
        return clamps

    workers = default_workers() if workers is None else max(1, int(workers))
    if workers == 1:
        clamp_total = sum(one(k) for k in range(n_paths))
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            clamp_total = sum(pool.map(one, range(n_paths)))
    _warn_clamps(clamp_total)
    log.debug("ensemble of %d paths on %d grid points", n_paths, grid.shape[0])
    return EnsembleSummary(model, config, float(x0), int(i0), int(master_seed), grid, paths, regimes,
                           tuple(float(t) for t in thresholds))


def pure_ode(model, regime, x0, config):
    """Fixed-regime trajectory on the output grid (no switching)."""
    grid = config.grid()
    xs = np.empty(grid.shape[0])
    xs[0] = x0
    x = float(x0)
    for k in range(1, grid.shape[0]):
        x = integrate_segment(model, x, regime, grid[k] - grid[k - 1], config.dt, config.boundary_guard)
        xs[k] = x
    return grid, xs


__all__ = [
    "SimConfig", "SwitchedModel", "HybridTrajectory", "EnsembleSummary",
    "integrate_segment", "simulate_hybrid", "ensemble", "pure_ode", "drift2",
]
