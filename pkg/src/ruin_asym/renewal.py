"""Claim-arrival renewal process: renewal function, delayed measure, paths."""

from __future__ import annotations

import math
import threading
import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels, quad
from .dist import ClaimDistribution, DistributionError, Exponential

BASE_STEPS = 2048
MAX_STEPS = 1 << 15
GRID_TOL = 1e-6

_tables: dict = {}
_tables_lock = threading.Lock()


@dataclass(frozen=True)
class RenewalTable:
    """Renewal function (or a delayed version of it) on a uniform grid."""

    grid: np.ndarray
    values: np.ndarray

    def __call__(self, t):
        return np.interp(t, self.grid, self.values)

    def density(self, t):
        # nodal central differences, linear in between: a continuous density
        slope = np.gradient(self.values, self.grid)
        return np.interp(t, self.grid, slope)


def _refine(build, horizon: float) -> RenewalTable:
    """Halve the grid step until successive solutions agree to ``GRID_TOL``."""
    steps = BASE_STEPS
    grid = np.linspace(0.0, horizon, steps + 1)
    values = build(grid)
    while steps < MAX_STEPS:
        fine_grid = np.linspace(0.0, horizon, 2 * steps + 1)
        fine = build(fine_grid)
        gap = np.max(np.abs(fine[::2] - values))
        grid, values, steps = fine_grid, fine, 2 * steps
        if gap < GRID_TOL:
            break
    else:
        warnings.warn(f"renewal grid did not reach {GRID_TOL:g} at {steps} steps", RuntimeWarning)
    return RenewalTable(grid, values)


def _cached(key, build):
    with _tables_lock:
        hit = _tables.get(key)
    if hit is None:
        hit = build()
        with _tables_lock:
            _tables[key] = hit
    return hit


@dataclass(frozen=True)
class RenewalSpec:
    """Ordinary renewal process driven by i.i.d. inter-arrival times."""

    interarrival: ClaimDistribution

    def __post_init__(self):
        if self.interarrival.atom_at_zero > 0:
            raise DistributionError("inter-arrival law must not be degenerate at zero")

    @property
    def is_poisson(self) -> bool:
        return isinstance(self.interarrival, Exponential)

    @property
    def rate(self) -> float:
        """Poisson intensity; only defined for exponential inter-arrivals."""
        if not self.is_poisson:
            raise DistributionError("intensity is only defined for a Poisson arrival process")
        return self.interarrival.rate

    def table(self, horizon: float) -> RenewalTable:
        def build():
            return _refine(lambda g: kernels.solve_renewal(self.interarrival.cdf(g)), horizon)
        return _cached(("renewal", self, float(horizon)), build)

    def renewal_function(self, t, *, general: bool = False):
        """``lambda(t) = E N(t)``; exact ``rate * t`` on the Poisson fast path."""
        if np.any(np.asarray(t) < 0):
            raise ValueError("t must be nonnegative")
        if self.is_poisson and not general:
            return self.rate * np.asarray(t, dtype=float) if np.ndim(t) else self.rate * float(t)
        tmax = float(np.max(t))
        if tmax == 0:
            return 0.0 if np.ndim(t) == 0 else np.zeros_like(np.asarray(t, dtype=float))
        out = self.table(tmax)(t)
        return float(out) if np.ndim(t) == 0 else out

    def measure(self, horizon: float, *, general: bool = False) -> quad.Measure:
        """``lambda(du)`` on ``[0, horizon]`` as a quadrature measure."""
        if self.is_poisson and not general:
            return quad.Measure.uniform_rate(self.rate, name="renewal")
        return quad.Measure(density=self.table(horizon).density, name="renewal")

    def expected_count_bound(self, t: float) -> int:
        """A generous arrival-slot count for path matrices (overflow is handled)."""
        m = float(self.renewal_function(t))
        return int(math.ceil(m + 8.0 * math.sqrt(m + 1.0) + 8.0))


@dataclass(frozen=True)
class DelayedMeasure:
    """``(lambda * H)(t) = int_{0-}^t H(t - s) lambda(ds)``: expected by-claims landed by ``t``."""

    base: RenewalSpec
    delay: ClaimDistribution

    def _integrated_cdf(self, t: float) -> float:
        d = self.delay
        if isinstance(d, Exponential):
            return t - (-math.expm1(-d.rate * t)) / d.rate
        if d.atom_at_zero >= 1.0:
            return t
        return quad.integrate_1d(lambda w: d.cdf(w), quad.Measure.lebesgue(), t)

    def table(self, horizon: float) -> RenewalTable:
        def build():
            def conv(grid):
                lam = kernels.solve_renewal(self.base.interarrival.cdf(grid))
                return kernels.stieltjes_convolve(lam, self.delay.cdf(grid))
            return _refine(conv, horizon)
        return _cached(("delayed", self, float(horizon)), build)

    def __call__(self, t: float, *, general: bool = False) -> float:
        if t < 0:
            raise ValueError("t must be nonnegative")
        if t == 0:
            return 0.0
        if self.base.is_poisson and not general:
            return self.base.rate * self._integrated_cdf(float(t))
        return float(self.table(float(t))(t))

    def measure(self, horizon: float, *, general: bool = False) -> quad.Measure:
        """``(lambda * H)(du)``; on the Poisson path its density is ``rate * H(u)``."""
        if self.base.is_poisson and not general:
            rate, cdf = self.base.rate, self.delay.cdf
            return quad.Measure(density=lambda u: rate * np.asarray(cdf(u)), name="delayed")
        return quad.Measure(density=self.table(horizon).density, name="delayed")


@dataclass(frozen=True)
class ArrivalPath:
    times: np.ndarray
    delays: np.ndarray

    def __len__(self) -> int:
        return self.times.size


def sample_path(spec: RenewalSpec, delay: ClaimDistribution, t: float, rng: np.random.Generator) -> ArrivalPath:
    """Arrival times ``tau_1 < ... < tau_N(t) <= t`` plus one delay per arrival."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    block = max(8, spec.expected_count_bound(t) if t > 0 else 8)
    times = np.empty(0)
    last = 0.0
    while True:
        steps = last + np.cumsum(spec.interarrival.rvs(rng, block))
        inside = steps[steps <= t]
        times = np.concatenate((times, inside))
        if inside.size < block:
            break
        last = steps[-1]
    delays = delay.rvs(rng, times.size)
    return ArrivalPath(times, delays)


def sample_arrival_matrix(spec: RenewalSpec, t: float, m: int, rng: np.random.Generator, slots: int):
    """Arrival times for ``m`` paths as an ``(m, K)`` matrix plus ``N(t)`` per row.

    Rows are filled from ``rng`` one ``(m, slots)`` block at a time; a new
    block is appended only while some row has not yet passed ``t``.
    """
    tau = np.cumsum(spec.interarrival.ppf(rng.random((m, slots))), axis=1)
    while m and tau[:, -1].min() <= t:
        more = tau[:, -1:] + np.cumsum(spec.interarrival.ppf(rng.random((m, slots))), axis=1)
        tau = np.concatenate((tau, more), axis=1)
    counts = (tau <= t).sum(axis=1)
    return tau, counts
