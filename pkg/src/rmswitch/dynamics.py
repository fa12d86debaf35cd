"""Deterministic replicator-mutator vector fields and their fixed-point structure.

The n-type field is provided for completeness; everything else in the package
works with the two-type reduction, whose drift is a cubic in the frequency of
type 1:

    x [b1 + x (1 - b1)] (1 - mu - x) + (1 - x) [1 + x (b2 - 1)] (mu - x)
"""

import math
import warnings
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numpy as np

from .errors import BisectionBracketFailure, DegenerateBifurcation, NumericalError, ValidationError

SIMPLEX_TOL = 1e-12
DERIVATIVE_TOL = 1e-9
ROOT_INCLUSION_TOL = 1e-9
CRITICAL_MU_TOL = 1e-10
NEWTON_STEPS = 10


class ZeroAttractionWarning(RuntimeWarning):
    """A type has no off-diagonal payoff, so it cannot mutate."""


def check_mu(mu, field="mu"):
    mu = float(mu)
    if not (0.0 <= mu <= 1.0) or math.isnan(mu):
        raise ValidationError(field, f"mutation rate must lie in [0, 1], got {mu!r}")
    return mu


@dataclass(frozen=True)
class PayoffMatrix:
    """Square payoff matrix with unit diagonal and off-diagonal entries in [0, 1)."""

    entries: np.ndarray

    def __post_init__(self):
        b = np.array(self.entries, dtype=float)
        if b.ndim != 2 or b.shape[0] != b.shape[1] or b.shape[0] < 1:
            raise ValidationError("B", f"payoff matrix must be square, got shape {b.shape}")
        if not np.all(np.diag(b) == 1.0):
            raise ValidationError("B", "diagonal entries must equal 1")
        off = b[~np.eye(b.shape[0], dtype=bool)]
        if np.any(off < 0.0) or np.any(off >= 1.0) or np.any(np.isnan(off)):
            raise ValidationError("B", "off-diagonal entries must lie in [0, 1)")
        b.setflags(write=False)
        object.__setattr__(self, "entries", b)

    @property
    def n(self):
        return self.entries.shape[0]

    @classmethod
    def from_game(cls, game):
        return cls(np.array([[1.0, game.b1], [game.b2, 1.0]]))


@dataclass(frozen=True)
class TwoTypeGame:
    """Two-type coordination game; ``b1`` is b12 and ``b2`` is b21."""

    b1: float
    b2: float

    def __post_init__(self):
        for name in ("b1", "b2"):
            v = float(getattr(self, name))
            if not (0.0 <= v < 1.0):
                raise ValidationError(name, f"payoff must lie in [0, 1), got {v!r}")
            object.__setattr__(self, name, v)

    def swapped(self):
        return TwoTypeGame(self.b2, self.b1)


def check_simplex(x, n=None):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or (n is not None and x.shape[0] != n):
        raise ValidationError("x", f"expected a length-{n} vector, got shape {x.shape}")
    if np.any(x < 0.0) or np.any(x > 1.0) or abs(x.sum() - 1.0) > SIMPLEX_TOL:
        raise ValidationError("x", "state must be a probability vector")
    return x


def mutation_matrix(B, mu, return_flags=False):
    """Payoff-weighted mutation matrix.

    Row i moves mass ``mu`` off the diagonal, split in proportion to the
    payoffs b_ij. A row with no positive off-diagonal payoff splits ``mu``
    evenly, the limit of equal payoffs shrinking to zero; for two types this
    keeps the closed-form drift valid at b = 0. Such rows raise a
    :class:`ZeroAttractionWarning` and, with ``return_flags``, are returned
    alongside the matrix.
    """
    mu = check_mu(mu)
    b = B.entries
    n = B.n
    off = b.copy()
    np.fill_diagonal(off, 0.0)
    denom = off.sum(axis=1)
    zero = denom == 0.0
    P = np.zeros((n, n))
    safe = np.where(zero, 1.0, denom)
    P[:] = mu * (off / safe[:, None])
    np.fill_diagonal(P, 1.0 - mu)
    if np.any(zero):
        even = np.full((n, n), mu / (n - 1) if n > 1 else 0.0)
        np.fill_diagonal(even, 1.0 - mu if n > 1 else 1.0)
        P[zero] = even[zero]
        warnings.warn(
            f"rows {np.flatnonzero(zero).tolist()} have no attraction; splitting mu evenly",
            ZeroAttractionWarning,
            stacklevel=2,
        )
    if return_flags:
        return P, np.flatnonzero(zero)
    return P


def drift_n(B, mu, x):
    """Replicator-mutator velocity for n types at simplex point ``x``."""
    x = check_simplex(x, B.n)
    P = mutation_matrix(B, mu)
    f = B.entries @ x
    weighted = x * f
    return P.T @ weighted - x * weighted.sum()


def drift2(game, mu, x):
    """Two-type drift of the type-1 frequency; works elementwise on arrays.

    Grouped so the boundary values are exact: ``mu`` at 0 and ``-mu`` at 1.
    """
    b1, b2 = game.b1, game.b2
    y = 1.0 - x
    return x * (1.0 - y * (1.0 - b1)) * (y - mu) + y * (1.0 + x * (b2 - 1.0)) * (mu - x)


def drift_poly(game, mu):
    """Coefficients ``(c0, c1, c2, c3)`` of the drift cubic in ascending powers."""
    b1, b2 = game.b1, game.b2
    c0 = mu
    c1 = b1 * (1.0 - mu) + mu * (b2 - 2.0) - 1.0
    c2 = (1.0 - b1) * (1.0 - mu) - b1 + mu * (1.0 - b2) + 2.0 - b2
    c3 = b1 + b2 - 2.0
    return c0, c1, c2, c3


def drift_derivative(game, mu, x):
    _, c1, c2, c3 = drift_poly(game, mu)
    return c1 + x * (2.0 * c2 + 3.0 * c3 * x)


def _exact_discriminant(game, mu):
    b1, b2, mu = Fraction(game.b1), Fraction(game.b2), Fraction(mu)
    d = mu
    c = b1 * (1 - mu) + mu * (b2 - 2) - 1
    b = (1 - b1) * (1 - mu) - b1 + mu * (1 - b2) + 2 - b2
    a = b1 + b2 - 2
    return 18 * a * b * c * d - 4 * b**3 * d + b * b * c * c - 4 * a * c**3 - 27 * a * a * d * d


def discriminant(game, mu):
    """Discriminant of the drift cubic; positive means three distinct real roots.

    Evaluated in exact rational arithmetic from the float parameters: near the
    pitchfork it scales like the cube of the distance to the critical rate
    and is lost to cancellation in floating point.
    """
    return float(_exact_discriminant(game, mu))


def _cubic_roots(coeffs, disc):
    c0, c1, c2, c3 = coeffs
    A, B, C = c2 / c3, c1 / c3, c0 / c3
    shift = A / 3.0
    p = B - A * A / 3.0
    q = 2.0 * A**3 / 27.0 - A * B / 3.0 + C
    if disc > 0.0 and p < 0.0:
        m = 2.0 * math.sqrt(-p / 3.0)
        arg = 3.0 * q / (p * m)
        theta = math.acos(min(1.0, max(-1.0, arg))) / 3.0
        roots = [m * math.cos(theta - 2.0 * math.pi * k / 3.0) - shift for k in range(3)]
    else:
        s = math.sqrt(max(0.0, (q / 2.0) ** 2 + (p / 3.0) ** 3))
        roots = [float(np.cbrt(-q / 2.0 + s) + np.cbrt(-q / 2.0 - s)) - shift]
    return sorted(roots)


def _polish(game, mu, x):
    for _ in range(NEWTON_STEPS):
        f = drift2(game, mu, x)
        if abs(f) < 1e-15:
            break
        fp = drift_derivative(game, mu, x)
        if fp == 0.0:
            break
        x = x - f / fp
    return x


def _unit_roots(game, mu):
    exact = _exact_discriminant(game, mu)
    disc = float(exact) if exact == 0 or float(exact) != 0 else math.copysign(5e-324, exact)
    roots = []
    for r in _cubic_roots(drift_poly(game, mu), disc):
        r = _polish(game, mu, r)
        if -ROOT_INCLUSION_TOL <= r <= 1.0 + ROOT_INCLUSION_TOL:
            roots.append(min(1.0, max(0.0, r)))
    return disc, sorted(roots)


class Stability(str, Enum):
    STABLE = "Stable"
    UNSTABLE = "Unstable"


class RootKind(str, Enum):
    THREE_REAL = "ThreeReal"
    ONE_REAL = "OneReal"


@dataclass(frozen=True)
class FixedPoint:
    location: float
    stability: Stability


@dataclass(frozen=True)
class FixedPointSet:
    """Fixed points of the two-type drift in [0, 1], in increasing order."""

    kind: RootKind
    points: tuple

    @property
    def locations(self):
        return tuple(p.location for p in self.points)

    @property
    def a1(self):
        return self._three()[0]

    @property
    def a2(self):
        return self._three()[1]

    @property
    def a3(self):
        return self._three()[2]

    @property
    def ahat(self):
        if self.kind is not RootKind.ONE_REAL:
            raise AttributeError("ahat is only defined when there is a single fixed point")
        return self.points[0].location

    def _three(self):
        if self.kind is not RootKind.THREE_REAL:
            raise AttributeError("a1, a2, a3 are only defined when there are three fixed points")
        return self.locations

    def to_dict(self):
        return {
            "kind": self.kind.value,
            "points": [{"location": p.location, "stability": p.stability.value} for p in self.points],
        }


def fixed_points(game, mu):
    """Real roots of the drift cubic in [0, 1] with stability labels.

    Raises
    ------
    DegenerateBifurcation
        If ``mu`` is within ``CRITICAL_MU_TOL`` of the critical rate, the
        discriminant vanishes, or a root has a vanishing derivative.
    NumericalError
        If the root count is neither 1 nor 3 (impossible analytically since the
        drift is ``mu`` at 0 and ``-mu`` at 1).
    """
    mu = check_mu(mu)
    disc, roots = _unit_roots(game, mu)
    mc = critical_mu(game)
    if disc == 0.0 or abs(mu - mc) <= CRITICAL_MU_TOL:
        raise DegenerateBifurcation(f"mu={mu!r} is at the critical rate {mc!r} (discriminant {disc:.3e})")
    points = []
    for r in roots:
        residual = drift2(game, mu, r)
        if abs(residual) > 1e-9:
            raise NumericalError(f"root {r!r} failed to polish (residual {residual:.3e})")
        slope = drift_derivative(game, mu, r)
        if abs(slope) < DERIVATIVE_TOL:
            raise DegenerateBifurcation(f"zero drift derivative at x={r!r}")
        points.append(FixedPoint(r, Stability.STABLE if slope < 0 else Stability.UNSTABLE))
    if len(points) == 3:
        kind = RootKind.THREE_REAL
    elif len(points) == 1:
        kind = RootKind.ONE_REAL
    else:
        raise NumericalError(f"found {len(points)} roots in [0, 1] at mu={mu!r}")
    return FixedPointSet(kind, tuple(points))


def unit_root_count(game, mu):
    """Number of distinct real drift roots in [0, 1]; never raises on degeneracy."""
    return len(_unit_roots(game, mu)[1])


def critical_mu(game):
    """Mutation rate at which the fixed-point count drops from three to one.

    Closed form ``(1 - b1) / 4`` in the symmetric game; otherwise bisection on
    the root count (driven by the discriminant sign) to ``CRITICAL_MU_TOL``.
    """
    if game.b1 == game.b2:
        return (1.0 - game.b1) / 4.0

    def three(mu):
        return discriminant(game, mu) > 0.0 and unit_root_count(game, mu) == 3

    lo, hi = 0.0, 1.0
    if three(lo) == three(hi):
        raise BisectionBracketFailure(
            f"root count is the same at mu=0 and mu=1 for b1={game.b1}, b2={game.b2}"
        )
    while hi - lo > CRITICAL_MU_TOL:
        mid = 0.5 * (lo + hi)
        if three(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
