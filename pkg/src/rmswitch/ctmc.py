"""Two-state continuous-time Markov chain driving the regime switches."""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

_TINY = np.nextafter(0.0, 1.0)
_BELOW_ONE = np.nextafter(1.0, 0.0)


@dataclass(frozen=True)
class GeneratorQ:
    """Rates ``q12`` (leave state 1) and ``q21`` (leave state 2)."""

    q12: float
    q21: float

    def __post_init__(self):
        for name in ("q12", "q21"):
            v = float(getattr(self, name))
            if not (v > 0.0 and math.isfinite(v)):
                raise ValidationError(name, f"transition rate must be positive and finite, got {v!r}")
            object.__setattr__(self, name, v)

    def exit_rate(self, state):
        if state == 1:
            return self.q12
        if state == 2:
            return self.q21
        raise ValidationError("state", f"regime must be 1 or 2, got {state!r}")

    def matrix(self):
        return np.array([[-self.q12, self.q12], [self.q21, -self.q21]])


class RngStream:
    """Reproducible random stream keyed by ``(master_seed, stream_index)``.

    Streams are derived with :class:`numpy.random.SeedSequence` spawn keys, so
    distinct indices give statistically independent PCG64 generators and the
    same pair always replays the same sequence.
    """

    def __init__(self, master_seed, stream_index=0):
        if stream_index < 0:
            raise ValidationError("stream_index", "must be non-negative")
        self.master_seed = int(master_seed) & 0xFFFFFFFFFFFFFFFF
        self.stream_index = int(stream_index)
        seq = np.random.SeedSequence(self.master_seed, spawn_key=(self.stream_index,))
        self._gen = np.random.Generator(np.random.PCG64(seq))

    def open_uniform(self, size=None):
        """Uniform draws on the open interval (0, 1)."""
        u = self._gen.random(size)
        if size is None:
            if u == 0.0:
                return _TINY
            return min(u, _BELOW_ONE)
        u[u == 0.0] = _TINY
        return np.minimum(u, _BELOW_ONE)


def stationary(Q):
    s = Q.q12 + Q.q21
    return Q.q21 / s, Q.q12 / s


def sample_holding_time(state, Q, rng):
    """Exponential holding time in ``state`` by inverse transform."""
    return -math.log(rng.open_uniform()) / Q.exit_rate(state)


@dataclass(frozen=True)
class RegimePath:
    initial_state: int
    jump_times: np.ndarray
    horizon: float

    def state_at(self, t):
        """Regime at time ``t``; the path is right-continuous at jumps."""
        k = int(np.searchsorted(self.jump_times, t, side="right"))
        return self.initial_state if k % 2 == 0 else 3 - self.initial_state

    def occupation(self, state=1):
        """Fraction of ``[0, horizon]`` spent in ``state``."""
        edges = np.concatenate(([0.0], self.jump_times, [self.horizon]))
        durations = np.diff(edges)
        in_state = durations[0::2] if state == self.initial_state else durations[1::2]
        return float(in_state.sum() / self.horizon)


def simulate_chain(Q, i0, horizon, rng):
    """Jump times of the chain on ``(0, horizon]`` started from regime ``i0``.

    Holding times are drawn in blocks of open-interval uniforms; consumption
    order is one uniform per holding time, so results depend only on the
    stream.
    """
    if i0 not in (1, 2):
        raise ValidationError("i0", f"regime must be 1 or 2, got {i0!r}")
    if not horizon > 0:
        raise ValidationError("horizon", f"must be positive, got {horizon!r}")
    rate_first = Q.exit_rate(i0)
    rate_second = Q.exit_rate(3 - i0)
    mean_rate = 2.0 / (1.0 / rate_first + 1.0 / rate_second)
    block = max(16, int(horizon * mean_rate * 1.1) + 16)

    times = []
    t = 0.0
    k = 0
    while True:
        u = rng.open_uniform(block)
        rates = np.where((np.arange(k, k + block) % 2) == 0, rate_first, rate_second)
        steps = -np.log(u) / rates
        cum = t + np.cumsum(steps)
        inside = cum[cum <= horizon]
        times.append(inside)
        if inside.size < block:
            break
        t = cum[-1]
        k += block
    jumps = np.concatenate(times) if times else np.empty(0)
    return RegimePath(i0, jumps, float(horizon))
