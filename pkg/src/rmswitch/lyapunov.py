"""Generator of the switched process applied to Lyapunov-type test functions.

For a function V(x, i) the generator is

    LV(x, i) = V'(x, i) * drift(x, mu_i) + q_i * (V(x, j) - V(x, i)),   j = 3 - i

where q_i is the exit rate of regime i. Families below cover the functions
used to certify hitting-time finiteness, instability of the stable points and
transience near the separatrix; weights c1, c2 and the exponent alpha are
free parameters, searched over when the defaults do not give a negative
region.
"""

import itertools
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .dynamics import drift2
from .errors import DomainError, ValidationError

DEFAULT_C1 = 1.01
DEFAULT_C2 = 1.0
DEFAULT_ALPHA = 0.5


class Family(str, Enum):
    NEG_LOG_X = "NegLogX"  # -c_i log(x - a), a defaults to 0
    NEG_LOG_ONE_MINUS_X = "NegLogOneMinusX"  # -c_i log(a - x), a defaults to 1
    POWER_LOWER_BLOWUP = "PowerLowerBlowup"  # w_i (x - a)^-alpha
    POWER_UPPER_BLOWUP = "PowerUpperBlowup"  # w_i (a - x)^-alpha
    POWER_CONTACT = "PowerContact"  # w_i (x - a)^alpha or w_i (a - x)^alpha
    MONOMIAL = "Monomial"  # c_i x^alpha, the moment test function
    CONSTANT = "Constant"  # c_i


_DEFAULT_ANCHOR = {Family.NEG_LOG_X: 0.0, Family.NEG_LOG_ONE_MINUS_X: 1.0}
_POWER = (Family.POWER_LOWER_BLOWUP, Family.POWER_UPPER_BLOWUP, Family.POWER_CONTACT)


@dataclass(frozen=True)
class LyapunovSpec:
    """A test function V(x, i) from one of the supported families.

    Power families carry the weight ``w_i = 1 + sign * alpha * c_i``; both
    sign conventions appear in the literature, so ``sign`` is a parameter.
    ``side`` picks ``(x - a)`` ("above") or ``(a - x)`` ("below") for the
    contact family and is implied by the other families.
    """

    family: Family
    anchor: float = None
    alpha: float = DEFAULT_ALPHA
    c1: float = DEFAULT_C1
    c2: float = DEFAULT_C2
    sign: int = 1
    side: str = "above"

    def __post_init__(self):
        family = Family(self.family)
        object.__setattr__(self, "family", family)
        if self.anchor is None:
            object.__setattr__(self, "anchor", _DEFAULT_ANCHOR.get(family, 0.0))
        if not (self.alpha > 0 and np.isfinite(self.alpha)):
            raise ValidationError("alpha", f"must be positive, got {self.alpha!r}")
        if self.sign not in (1, -1):
            raise ValidationError("sign", "must be +1 or -1")
        if family is Family.POWER_LOWER_BLOWUP:
            object.__setattr__(self, "side", "above")
        elif family is Family.POWER_UPPER_BLOWUP:
            object.__setattr__(self, "side", "below")
        if self.side not in ("above", "below"):
            raise ValidationError("side", "must be 'above' or 'below'")
        if family in _POWER and min(self.weight(1), self.weight(2)) <= 0:
            raise ValidationError("c", "power-family weights 1 + sign*alpha*c_i must be positive")

    def c(self, i):
        return self.c1 if i == 1 else self.c2

    def weight(self, i):
        if self.family in _POWER:
            return 1.0 + self.sign * self.alpha * self.c(i)
        return self.c(i)

    def _distance(self, x):
        """Signed-away distance to the anchor and its derivative sign."""
        if self.family is Family.NEG_LOG_X or self.side == "above":
            return x - self.anchor, 1.0
        return self.anchor - x, -1.0

    def _check(self, x):
        if self.family in (Family.CONSTANT, Family.MONOMIAL):
            if self.family is Family.MONOMIAL and np.any(np.asarray(x) < 0):
                raise DomainError("monomial test function needs x >= 0")
            return
        if self.family is Family.NEG_LOG_ONE_MINUS_X:
            d = self.anchor - np.asarray(x)
        else:
            d, _ = self._distance(np.asarray(x))
        if np.any(d < 0) or (self.family is not Family.POWER_CONTACT and np.any(d == 0)):
            raise DomainError(f"{self.family.value} is singular or undefined at the anchor {self.anchor!r}")
        if self.family is Family.POWER_CONTACT and self.alpha < 1 and np.any(d == 0):
            raise DomainError("contact function has an infinite derivative at its anchor")

    def value(self, x, i):
        self._check(x)
        w = self.weight(i)
        f = self.family
        if f is Family.CONSTANT:
            return w * np.ones_like(np.asarray(x, dtype=float))
        if f is Family.MONOMIAL:
            return w * np.asarray(x, dtype=float) ** self.alpha
        if f is Family.NEG_LOG_X:
            return -w * np.log(x - self.anchor)
        if f is Family.NEG_LOG_ONE_MINUS_X:
            return -w * np.log(self.anchor - x)
        d, _ = self._distance(x)
        exponent = self.alpha if f is Family.POWER_CONTACT else -self.alpha
        return w * d**exponent

    def derivative(self, x, i):
        self._check(x)
        w = self.weight(i)
        f = self.family
        x = np.asarray(x, dtype=float)
        if f is Family.CONSTANT:
            return np.zeros_like(x)
        if f is Family.MONOMIAL:
            return w * self.alpha * x ** (self.alpha - 1)
        if f is Family.NEG_LOG_X:
            return -w / (x - self.anchor)
        if f is Family.NEG_LOG_ONE_MINUS_X:
            return w / (self.anchor - x)
        d, s = self._distance(x)
        exponent = self.alpha if f is Family.POWER_CONTACT else -self.alpha
        return s * w * exponent * d ** (exponent - 1)


def generator(model, V, dV, x, i):
    """Apply the generator to arbitrary callables ``V(x, i)`` and ``dV(x, i)``."""
    j = 3 - i
    rate = model.Q.exit_rate(i)
    return dV(x, i) * drift2(model.game, model.mu(i), x) + rate * (V(x, j) - V(x, i))


def generator_LV(model, spec, x, i):
    """Generator of the switched process applied to ``spec`` at ``(x, i)``."""
    return generator(model, spec.value, spec.derivative, x, i)


@dataclass(frozen=True)
class NegativeDriftRegion:
    """Largest grid run with max_i LV < 0; ``lo``/``hi`` are None when empty."""

    lo: float
    hi: float
    kappa: float
    n_points: int
    spec: LyapunovSpec

    @property
    def empty(self):
        return self.n_points == 0

    def to_dict(self):
        return {
            "lo": self.lo,
            "hi": self.hi,
            "kappa": self.kappa,
            "n_points": self.n_points,
            "family": self.spec.family.value,
            "anchor": self.spec.anchor,
            "alpha": self.spec.alpha,
            "c1": self.spec.c1,
            "c2": self.spec.c2,
            "sign": self.spec.sign,
            "side": self.spec.side,
        }


def max_generator(model, spec, x):
    """Pointwise max over regimes of LV on an array of points."""
    return np.maximum(generator_LV(model, spec, x, 1), generator_LV(model, spec, x, 2))


def find_negative_drift_region(model, spec, search_interval, grid_n=10_000):
    """Largest contiguous run of a uniform grid on which max_i LV(x, i) < 0.

    The grid includes both ends of ``search_interval``; keep them off any
    singular anchor. ``kappa`` is minus the largest LV on the run.
    """
    if grid_n < 100:
        raise ValidationError("grid_n", f"need at least 100 grid points, got {grid_n}")
    lo, hi = map(float, search_interval)
    if not lo < hi:
        raise ValidationError("search_interval", "must be an increasing pair")
    xs = np.linspace(lo, hi, int(grid_n))
    with np.errstate(all="ignore"):
        m = max_generator(model, spec, xs)
    neg = np.isfinite(m) & (m < 0)

    best_start, best_len, start = 0, 0, None
    for k, flag in enumerate(np.append(neg, False)):
        if flag and start is None:
            start = k
        elif not flag and start is not None:
            if k - start > best_len:
                best_start, best_len = start, k - start
            start = None
    if best_len == 0:
        return NegativeDriftRegion(None, None, None, 0, spec)
    run = slice(best_start, best_start + best_len)
    return NegativeDriftRegion(
        float(xs[run][0]), float(xs[run][-1]), float(-m[run].max()), best_len, spec
    )


def search_weights(model, spec, search_interval, grid_n=10_000, anchored="lo"):
    """Find weights for ``spec``'s family giving the widest negative region.

    The spec as given is tried first; if its region is empty (or, with
    ``anchored`` set to "lo"/"hi", does not touch that end of the search
    interval) a log grid over ``alpha``, ``c1``, ``c2`` and both weight sign
    conventions is scanned. Returns the best region; its ``spec`` records the
    weights used.
    """
    lo, hi = map(float, search_interval)

    def acceptable(region):
        if region.empty:
            return False
        if anchored == "lo":
            return region.lo == lo
        if anchored == "hi":
            return region.hi == hi
        return True

    first = find_negative_drift_region(model, spec, search_interval, grid_n)
    if acceptable(first):
        return first

    alphas = np.geomspace(0.05, 2.0, 8)
    cs = np.geomspace(0.01, 10.0, 13)
    signs = (1, -1) if spec.family in _POWER else (spec.sign,)
    best = first if acceptable(first) else None
    for alpha, c1, c2, sign in itertools.product(alphas, cs, cs, signs):
        if c1 == c2:
            continue
        try:
            cand = replace(spec, alpha=float(alpha), c1=float(c1), c2=float(c2), sign=sign)
        except ValidationError:
            continue
        region = find_negative_drift_region(model, cand, search_interval, grid_n)
        if acceptable(region) and (best is None or region.n_points > best.n_points):
            best = region
    return best if best is not None else first
