"""Crude Monte-Carlo for discounted aggregate claims.

Random streams: worker ``w`` of a run seeded with ``seed`` owns four
Philox generators keyed ``(seed, w, role)``, one each for arrivals, main
claims, delays and by-claims.  Separate roles keep the two models
path-for-path comparable (by-claim draws never shift the main-claim
stream), and per-worker keys make a run reproducible for a fixed
``(seed, workers)`` whatever the thread scheduling.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .asym import Scenario
from .dist import ClaimDistribution
from .renewal import sample_arrival_matrix, sample_path

Z95 = 1.959963984540054
CHUNK = 1 << 16

ARRIVALS, CLAIMS, DELAYS, BYCLAIMS = range(4)


@dataclass(frozen=True)
class TailEstimate:
    x: float
    p_hat: float
    ci_low: float
    ci_high: float
    n: int
    seed: int
    workers: int

    @property
    def count(self) -> int:
        return int(round(self.p_hat * self.n))

    @property
    def std_error(self) -> float:
        return math.sqrt(self.p_hat * (1.0 - self.p_hat) / self.n)


def wilson_interval(k: int, n: int, z: float = Z95) -> tuple:
    """Wilson score interval for ``k`` successes in ``n`` trials."""
    if n <= 0:
        raise ValueError("n must be positive")
    if not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n, got k={k}, n={n}")
    p = k / n
    z2 = z * z
    denom = 1.0 + z2 / n
    centre = (p + z2 / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / denom
    # clamp so that lo <= p <= hi survives rounding at k = 0 and k = n
    return max(0.0, min(centre - half, p)), min(1.0, max(centre + half, p))


def resolve_workers(workers: Optional[int] = None) -> int:
    """``RUIN_ASYM_THREADS`` wins over the argument; default 1."""
    env = os.environ.get("RUIN_ASYM_THREADS")
    if env:
        workers = int(env)
    workers = 1 if workers is None else int(workers)
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    return workers


def streams(seed: int, worker: int = 0) -> list:
    """The four role generators of one worker."""
    return [np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(worker, role))))
            for role in range(4)]


# ---------------------------------------------------------------------------
# single paths
# ---------------------------------------------------------------------------

def simulate_no_byclaims(s: Scenario, rng: np.random.Generator) -> float:
    """One draw of ``sum_{k <= N(t)} X_k e^{-r tau_k}``."""
    path = _arrivals(s, rng)
    claims = s.main_claim.rvs(rng, path.size)
    return float(np.sum(claims * np.exp(-s.r * path)))


def simulate_with_byclaims(s: Scenario, rng: np.random.Generator) -> float:
    """One draw of the by-claims model, by-claims landing after ``t`` dropped."""
    if not s.byclaims:
        raise ValueError("scenario has no by-claims")
    path = _arrivals(s, rng)
    claims = s.main_claim.rvs(rng, path.size)
    delays = s.delay.rvs(rng, path.size)
    extra = s.by_claim.rvs(rng, path.size)
    landed = path + delays
    total = np.sum(claims * np.exp(-s.r * path))
    total += np.sum(np.where(landed <= s.t, extra * np.exp(-s.r * landed), 0.0))
    return float(total)


def _arrivals(s: Scenario, rng) -> np.ndarray:
    steps = []
    clock = 0.0
    while True:
        clock += float(s.renewal.interarrival.rvs(rng, 1)[0])
        if clock > s.t:
            return np.asarray(steps)
        steps.append(clock)


# ---------------------------------------------------------------------------
# batched paths
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PathBatch:
    """Flat per-arrival arrays for ``m`` paths, arrivals in row-major order."""

    tau: np.ndarray
    counts: np.ndarray
    times: np.ndarray
    claims: np.ndarray
    delays: Optional[np.ndarray]
    byclaims: Optional[np.ndarray]

    @property
    def owner(self) -> np.ndarray:
        return np.repeat(np.arange(self.counts.size), self.counts)


def draw_batch(s: Scenario, m: int, gens: Sequence[np.random.Generator], *, with_claims: bool = True) -> PathBatch:
    slots = s.renewal.expected_count_bound(s.t) if s.t > 0 else 1
    tau, counts = sample_arrival_matrix(s.renewal, s.t, m, gens[ARRIVALS], slots)
    live = np.arange(tau.shape[1])[None, :] < counts[:, None]
    times = tau[live]
    total = times.size
    claims = s.main_claim.rvs(gens[CLAIMS], total) if with_claims else None
    delays = byclaims = None
    if s.byclaims:
        delays = s.delay.rvs(gens[DELAYS], total)
        byclaims = s.by_claim.rvs(gens[BYCLAIMS], total) if with_claims else None
    return PathBatch(tau, counts, times, claims, delays, byclaims)


def simulate_paths(s: Scenario, n: int, gens: Sequence[np.random.Generator], *, backend=None) -> np.ndarray:
    """``n`` path values of ``D_r(t)`` or ``L_r(t)`` drawn from one worker's streams."""
    out = np.empty(n)
    for lo in range(0, n, CHUNK):
        m = min(CHUNK, n - lo)
        b = draw_batch(s, m, gens)
        out[lo:lo + m] = kernels.path_sums(b.tau, b.counts, b.claims, b.delays, b.byclaims,
                                           r=s.r, t=s.t, with_byclaims=s.byclaims, backend=backend)
    return out


def _split(n: int, workers: int) -> list:
    base, extra = divmod(n, workers)
    return [base + (w < extra) for w in range(workers)]


def run_workers(job, n: int, seed: int, workers: int) -> list:
    """Run ``job(n_w, gens_w)`` for every worker; results come back in worker order."""
    sizes = _split(n, workers)
    tasks = [(sizes[w], streams(seed, w)) for w in range(workers)]
    if workers == 1:
        return [job(*tasks[0])]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda a: job(*a), tasks))


def sample_pool(s: Scenario, n: int, seed: int, workers: Optional[int] = None, *, backend=None) -> np.ndarray:
    """The shared pool of ``n`` path values used for every threshold."""
    if n < 1:
        raise ValueError("sample count n must be >= 1")
    workers = resolve_workers(workers)
    parts = run_workers(lambda k, g: simulate_paths(s, k, g, backend=backend), n, seed, workers)
    return np.concatenate(parts)


def tail_counts(pool: np.ndarray, x_grid) -> np.ndarray:
    """``#{S > x}`` per threshold, from one sort of the pool."""
    ordered = np.sort(pool)
    return ordered.size - np.searchsorted(ordered, np.asarray(x_grid, dtype=float), side="right")


def estimates_from_pool(pool: np.ndarray, x_grid, seed: int, workers: int) -> list:
    n = pool.size
    out = []
    for x, k in zip(np.asarray(x_grid, dtype=float), tail_counts(pool, x_grid)):
        lo, hi = wilson_interval(int(k), n)
        out.append(TailEstimate(float(x), int(k) / n, lo, hi, n, seed, workers))
    return out


def estimate_tail(s: Scenario, x_grid, n: int, seed: int, workers: Optional[int] = None, *, backend=None) -> list:
    """``P(S > x)`` with Wilson 95% bounds for every ``x`` in the grid."""
    if len(np.atleast_1d(x_grid)) == 0:
        raise ValueError("x_grid must not be empty")
    workers = resolve_workers(workers)
    pool = sample_pool(s, n, seed, workers, backend=backend)
    return estimates_from_pool(pool, np.atleast_1d(x_grid), seed, workers)


# ---------------------------------------------------------------------------
# weighted sums with deterministic weights
# ---------------------------------------------------------------------------

def _check_weights(weights, dists, box) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size != len(dists):
        raise ValueError(f"{w.size} weights for {len(dists)} distributions")
    a, b = box if box is not None else (w.min(), w.max())
    if not 0 < a <= b < math.inf:
        raise ValueError(f"weight box must satisfy 0 < a <= b < inf, got [{a}, {b}]")
    if np.any((w < a) | (w > b)):
        raise ValueError(f"weights must lie in [{a}, {b}]")
    return w


def simulate_weighted_sum(weights, dists: Sequence[ClaimDistribution], rng: np.random.Generator,
                          box: Optional[tuple] = None) -> float:
    """One draw of ``sum_i c_i Z_i`` with independent ``Z_i ~ dists[i]``."""
    w = _check_weights(weights, dists, box)
    return float(sum(c * float(d.rvs(rng, 1)[0]) for c, d in zip(w, dists)))


def weighted_sum_samples(weights, dists: Sequence[ClaimDistribution], n: int, rng: np.random.Generator,
                         box: Optional[tuple] = None) -> np.ndarray:
    """``n`` draws as an ``(n, len(dists))`` matrix of the scaled summands ``c_i Z_i``."""
    w = _check_weights(weights, dists, box)
    return np.column_stack([c * d.rvs(rng, n) for c, d in zip(w, dists)])


__all__ = [
    "TailEstimate", "wilson_interval", "resolve_workers", "streams",
    "simulate_no_byclaims", "simulate_with_byclaims", "simulate_paths", "draw_batch",
    "sample_pool", "tail_counts", "estimate_tail", "estimates_from_pool",
    "simulate_weighted_sum", "weighted_sum_samples", "sample_path",
]
