"""Claim, inter-arrival and delay distributions.

Every family is supported on ``[0, inf)``.  Tails are evaluated through
their logarithm so that thresholds up to ~1e12 neither underflow nor lose
the relative precision needed by local increments ``F(x, x+h]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class DistributionError(ValueError):
    """Invalid parameters or an operation outside a law's domain."""


def _as_array(x):
    return np.asarray(x, dtype=float)


def _unwrap(value, like):
    # Return python floats for scalar input, arrays otherwise.
    if np.ndim(like) == 0:
        return float(value)
    return value


@dataclass(frozen=True)
class ClaimDistribution:
    """Base class.  Subclasses implement ``_log_tail`` on ``x >= 0``."""

    family = "abstract"
    atom_at_zero = 0.0

    # -- family specific hooks -------------------------------------------
    def _log_tail(self, x: np.ndarray) -> np.ndarray:  # pragma: no cover
        raise NotImplementedError

    def _density(self, x: np.ndarray) -> np.ndarray:  # pragma: no cover
        raise NotImplementedError

    def _ppf(self, u: np.ndarray) -> np.ndarray:  # pragma: no cover
        raise NotImplementedError

    # -- public surface --------------------------------------------------
    def log_tail(self, x):
        xa = _as_array(x)
        out = np.zeros_like(xa)
        pos = xa >= 0
        if np.any(pos):
            out[pos] = self._log_tail(xa[pos])
        return _unwrap(out, x)

    def tail(self, x):
        """``P(X > x)``; equals 1 for ``x < 0``."""
        return _unwrap(np.exp(_as_array(self.log_tail(x))), x)

    def cdf(self, x):
        return _unwrap(-np.expm1(_as_array(self.log_tail(x))), x)

    def local_increment(self, x, h=1.0):
        """``F(x, x+h] = tail(x) - tail(x+h)`` without cancellation."""
        xa, ha = np.broadcast_arrays(_as_array(x), _as_array(h))
        if np.any(ha < 0):
            raise DistributionError("interval length h must be nonnegative")
        lo = _as_array(self.log_tail(xa))
        hi = _as_array(self.log_tail(xa + ha))
        with np.errstate(invalid="ignore"):
            out = np.exp(lo) * -np.expm1(hi - lo)
        out = np.where(np.isfinite(lo), out, 0.0)
        out = np.where(ha == 0, 0.0, out)
        out = np.maximum(out, 0.0)
        if np.ndim(x) == 0 and np.ndim(h) == 0:
            return float(out)
        return out

    def tail_diff(self, a, b):
        """Signed ``tail(a) - tail(b)`` computed as a local increment."""
        a, b = np.broadcast_arrays(_as_array(a), _as_array(b))
        lo = np.minimum(a, b)
        inc = _as_array(self.local_increment(lo, np.abs(b - a)))
        return np.where(a <= b, inc, -inc)

    def density(self, x):
        xa = _as_array(x)
        out = np.zeros_like(xa)
        pos = xa >= 0
        if np.any(pos):
            out[pos] = self._density(xa[pos])
        return _unwrap(out, x)

    def ppf(self, u):
        """Vectorized inverse CDF on ``[0, 1)``; used by the simulators."""
        return _unwrap(self._ppf(_as_array(u)), u)

    def sample(self, u: float) -> float:
        """Inverse-CDF draw from a single uniform ``u`` in ``(0, 1)``."""
        if not 0.0 < u < 1.0:
            raise DistributionError(f"uniform variate must lie in (0, 1), got {u!r}")
        return float(self._ppf(np.array([u]))[0])

    def rvs(self, rng: np.random.Generator, size) -> np.ndarray:
        return self._ppf(rng.random(size))

    @property
    def mean(self) -> float:  # pragma: no cover
        raise NotImplementedError

    @property
    def literal(self) -> str:  # pragma: no cover
        raise NotImplementedError


@dataclass(frozen=True)
class Pareto(ClaimDistribution):
    """Lomax form ``tail(x) = (kappa / (x + kappa)) ** alpha``."""

    kappa: float
    alpha: float
    family = "pareto"

    def __post_init__(self):
        if not (self.kappa > 0 and self.alpha > 0):
            raise DistributionError(f"pareto needs kappa > 0 and alpha > 0, got {self}")

    def _log_tail(self, x):
        return -self.alpha * np.log1p(x / self.kappa)

    def _density(self, x):
        return self.alpha / self.kappa * np.exp(-(self.alpha + 1.0) * np.log1p(x / self.kappa))

    def _ppf(self, u):
        return self.kappa * np.expm1(-np.log1p(-u) / self.alpha)

    @property
    def mean(self) -> float:
        if self.alpha <= 1:
            raise DistributionError(f"pareto mean is infinite for alpha={self.alpha} <= 1")
        return self.kappa / (self.alpha - 1.0)

    @property
    def literal(self) -> str:
        return f"pareto({self.kappa!r}, {self.alpha!r})"


@dataclass(frozen=True)
class Weibull(ClaimDistribution):
    """``tail(x) = exp(-(x / kappa) ** alpha)``."""

    kappa: float
    alpha: float
    family = "weibull"

    def __post_init__(self):
        if not (self.kappa > 0 and self.alpha > 0):
            raise DistributionError(f"weibull needs kappa > 0 and alpha > 0, got {self}")

    def _log_tail(self, x):
        return -np.power(x / self.kappa, self.alpha)

    def _density(self, x):
        if self.alpha < 1 and np.any(x == 0):
            raise DistributionError("weibull density is infinite at x=0 for alpha < 1")
        z = x / self.kappa
        return self.alpha / self.kappa * np.power(z, self.alpha - 1.0) * np.exp(-np.power(z, self.alpha))

    def _ppf(self, u):
        return self.kappa * np.power(-np.log1p(-u), 1.0 / self.alpha)

    @property
    def mean(self) -> float:
        return self.kappa * math.gamma(1.0 + 1.0 / self.alpha)

    @property
    def literal(self) -> str:
        return f"weibull({self.kappa!r}, {self.alpha!r})"


@dataclass(frozen=True)
class Exponential(ClaimDistribution):
    rate: float
    family = "exp"

    def __post_init__(self):
        if not self.rate > 0:
            raise DistributionError(f"exponential needs rate > 0, got {self.rate!r}")

    def _log_tail(self, x):
        return -self.rate * x

    def _density(self, x):
        return self.rate * np.exp(-self.rate * x)

    def _ppf(self, u):
        return -np.log1p(-u) / self.rate

    @property
    def mean(self) -> float:
        return 1.0 / self.rate

    @property
    def literal(self) -> str:
        return f"exp({self.rate!r})"


@dataclass(frozen=True)
class PointMass(ClaimDistribution):
    """Unit mass at the origin: instantaneous delays, or by-claims that vanish."""

    family = "zero"
    atom_at_zero = 1.0

    def _log_tail(self, x):
        return np.full_like(x, -np.inf)

    def _density(self, x):
        return np.zeros_like(x)

    def _ppf(self, u):
        return np.zeros_like(u)

    @property
    def mean(self) -> float:
        return 0.0

    @property
    def literal(self) -> str:
        return "zero()"


@dataclass(frozen=True)
class Tabulated(ClaimDistribution):
    """User-supplied tail on a grid, log-linear between nodes.

    ``grid`` must start at 0 with ``tail[0] == 1``; beyond the last node the
    final log-slope is continued, i.e. the tail decays exponentially.
    """

    grid: tuple
    tail_values: tuple
    family = "tabulated"
    _logs: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        v = np.asarray(self.tail_values, dtype=float)
        if g.ndim != 1 or g.size < 2 or g.shape != v.shape:
            raise DistributionError("tabulated law needs matching 1-d grid and tail arrays")
        if g[0] != 0.0 or np.any(np.diff(g) <= 0):
            raise DistributionError("tabulated grid must start at 0 and increase strictly")
        if v[0] != 1.0 or np.any(np.diff(v) >= 0) or v[-1] <= 0:
            raise DistributionError("tabulated tail must start at 1 and decrease strictly to a positive value")
        object.__setattr__(self, "grid", tuple(g))
        object.__setattr__(self, "tail_values", tuple(v))
        object.__setattr__(self, "_logs", tuple(np.log(v)))

    def _slopes(self):
        g, lv = np.asarray(self.grid), np.asarray(self._logs)
        return g, lv, np.diff(lv) / np.diff(g)

    def _log_tail(self, x):
        g, lv, sl = self._slopes()
        idx = np.clip(np.searchsorted(g, x, side="right") - 1, 0, g.size - 2)
        return lv[idx] + sl[idx] * (x - g[idx])

    def _density(self, x):
        g, lv, sl = self._slopes()
        idx = np.clip(np.searchsorted(g, x, side="right") - 1, 0, g.size - 2)
        return -sl[idx] * np.exp(lv[idx] + sl[idx] * (x - g[idx]))

    def _ppf(self, u):
        g, lv, sl = self._slopes()
        target = np.log1p(-u)
        # lv is decreasing; search on its negation
        idx = np.clip(np.searchsorted(-lv, -target, side="right") - 1, 0, g.size - 2)
        return g[idx] + (target - lv[idx]) / sl[idx]

    @property
    def mean(self) -> float:
        g, lv, sl = self._slopes()
        v = np.exp(lv)
        pieces = (v[1:] - v[:-1]) / sl
        return float(pieces.sum() + v[-1] / -sl[-1])

    @property
    def literal(self) -> str:
        return "tabulated(...)"


def is_regularly_varying(d: ClaimDistribution) -> bool:
    return isinstance(d, Pareto)
