"""Definition- and lemma-level checks.

Tail events of sums at large thresholds are far too rare for indicator
averages, so the sum checks use the conditional estimator on the largest
summand::

    P(S > x) = sum_k E[ F_k-tail( max(M_-k, x - S_-k) / c_k ) ]

where ``S_-k`` and ``M_-k`` are the sum and the maximum of the other scaled
summands.  It is unbiased for every finite sum and its excess over
``sum_k P(c_k X_k > x)`` is accumulated term by term as a tail difference,
so nothing cancels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import asym, kernels, mc, quad
from .dist import ClaimDistribution, DistributionError

CONV_RTOL = 1e-8
VERDICT_BAND = (0.9, 1.1)
KESTEN_EPS = 0.5
KESTEN_MARGIN = 0.2
NOISE_FACTOR = 10.0
CHUNK = 1 << 16


class InconclusiveError(RuntimeError):
    """Monte-Carlo noise is too large for the check to decide anything."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


# ---------------------------------------------------------------------------
# two-fold convolution
# ---------------------------------------------------------------------------

def convolution_excess(d: ClaimDistribution, x: float, *, rtol: float = CONV_RTOL) -> float:
    """``F^{2*}-tail(x) - 2 F-tail(x)`` from the symmetric split at ``x/2``.

    Writes the excess as ``2 int_0^{x/2} (F(x-y) - F(x)) dF(y)`` (tails) plus
    boundary terms.  Below the median the integral runs in probability scale
    ``w = F(y)``, above it in ``log y``; both are smooth even when the density
    blows up at 0.
    """
    if x < 0:
        raise ValueError("x must be nonnegative")
    if x == 0:
        a = d.atom_at_zero
        return (1.0 - a * a) - 2.0 * (1.0 - a)
    half = 0.5 * x
    y0 = min(float(d.ppf(0.5)), half)
    total = 0.0
    w0 = d.cdf(y0) - d.atom_at_zero
    if w0 > 0:
        def in_prob(w, _k):
            y = d.ppf(w + d.atom_at_zero)
            return d.local_increment(x - y, y)
        total += quad.adaptive_simpson(in_prob, [0.0], [w0], rtol=rtol, atol=0.0)[0]
    if y0 < half:
        def in_log(z, _k):
            y = np.exp(z)
            return d.local_increment(x - y, y) * d.density(y) * y
        total += quad.adaptive_simpson(in_log, [math.log(y0)], [math.log(half)], rtol=rtol, atol=0.0)[0]
    th, tx = d.tail(half), d.tail(x)
    return 2.0 * total + th * th - 2.0 * tx * th


def convolution_tail(d: ClaimDistribution, x: float, *, rtol: float = CONV_RTOL) -> float:
    """``P(X_1 + X_2 > x)`` for two independent copies of ``d``."""
    if x < 0:
        raise ValueError("x must be nonnegative")
    if x == 0:
        return 1.0 - d.atom_at_zero ** 2
    return 2.0 * d.tail(x) + convolution_excess(d, x, rtol=rtol)


@dataclass(frozen=True)
class S2Diagnostic:
    x_grid: tuple
    ratios: tuple
    approaching_one: bool


def s2_verdict(ratios: Sequence[float]) -> bool:
    """Last three ratios inside the band and ``|ratio - 1|`` strictly decreasing."""
    r = np.asarray(ratios, dtype=float)
    if r.size < 3 or not np.all(np.isfinite(r)):
        return False
    lo, hi = VERDICT_BAND
    gaps = np.abs(r - 1.0)
    return bool(np.all((r[-3:] > lo) & (r[-3:] < hi)) and np.all(np.diff(gaps) < 0))


def s2_defining_ratio(d: ClaimDistribution, x_grid) -> S2Diagnostic:
    """``(F^{2*}-tail - 2 F-tail) / (2 mu_F F(x, x+1])`` along a grid."""
    mu = d.mean
    if not math.isfinite(mu):
        raise DistributionError("second-order ratio needs a finite mean")
    xs = tuple(float(x) for x in x_grid)
    ratios = tuple(float(convolution_excess(d, x) / (2.0 * mu * d.local_increment(x, 1.0))) for x in xs)
    return S2Diagnostic(xs, ratios, s2_verdict(ratios))


# ---------------------------------------------------------------------------
# conditional estimator for weighted sums
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExcessEstimate:
    """MC estimate of ``P(sum c_i X_i > x) - sum P(c_i X_i > x)``."""

    value: float
    stderr: float
    n: int


def _excess_terms(scaled: np.ndarray, weights: np.ndarray, dists, x: float) -> np.ndarray:
    total = scaled.sum(axis=1)
    order = np.argsort(scaled, axis=1)
    rows = np.arange(scaled.shape[0])
    top = scaled[rows, order[:, -1]]
    second = scaled[rows, order[:, -2]]
    out = np.zeros(scaled.shape[0])
    for k, (c, d) in enumerate(zip(weights, dists)):
        others_max = np.where(order[:, -1] == k, second, top)
        level = np.maximum(others_max, x - (total - scaled[:, k]))
        out += d.tail_diff(level / c, x / c)
    return out


def weighted_excess(dists: Sequence[ClaimDistribution], weights, x: float, mc_n: int,
                    seed: int = 0, workers: Optional[int] = None) -> ExcessEstimate:
    """Conditional-MC estimate of the gap between the sum's tail and the sum of tails."""
    w = np.asarray(weights, dtype=float)
    if w.size < 2:
        return ExcessEstimate(0.0, 0.0, mc_n)

    def job(k, gens):
        acc = np.zeros(2)
        rng = gens[mc.CLAIMS]
        for lo in range(0, k, CHUNK):
            m = min(CHUNK, k - lo)
            vals = _excess_terms(mc.weighted_sum_samples(w, dists, m, rng), w, dists, x)
            acc += (vals.sum(), np.square(vals).sum())
        return acc

    s1, s2 = np.sum(mc.run_workers(job, mc_n, seed, mc.resolve_workers(workers)), axis=0)
    mean = s1 / mc_n
    var = max(s2 / mc_n - mean * mean, 0.0)
    return ExcessEstimate(float(mean), math.sqrt(var / mc_n), mc_n)


# ---------------------------------------------------------------------------
# weighted Kesten ratio
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KestenEstimate:
    n: int
    weights: tuple
    ratio: float
    stderr: float
    numerator: float
    denominator: float


def _increment_sum(dists, weights, x):
    return float(sum(d.local_increment(x / c, 1.0 / c) for c, d in zip(weights, dists)))


def kesten_estimate(dists: Sequence[ClaimDistribution], box: tuple, n: int, x: float, mc_n: int,
                    seed: int = 0, workers: Optional[int] = None) -> KestenEstimate:
    """Weighted Kesten ratio with weights drawn uniformly from ``box`` and then frozen.

    ``dists`` lists the summand laws; a single law is repeated ``n`` times.
    Raises :class:`InconclusiveError` when the numerator's standard error
    exceeds a tenth of the denominator.
    """
    a, b = box
    if not 0 < a <= b < math.inf:
        raise ValueError(f"weight box must satisfy 0 < a <= b < inf, got {box}")
    if n < 1:
        raise ValueError("n must be >= 1")
    dists = list(dists) * n if len(dists) == 1 else list(dists)
    if len(dists) != n:
        raise ValueError(f"{len(dists)} distributions for n={n}")
    for d in dists:
        if not math.isfinite(d.mean):
            raise DistributionError("Kesten ratio needs finite means")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(1 << 20, n))))
    w = rng.uniform(a, b, size=n)
    denom = _increment_sum(dists, w, x)
    if n == 1:
        return KestenEstimate(1, tuple(w), 0.0, 0.0, 0.0, denom)
    ex = weighted_excess(dists, w, x, mc_n, seed=seed, workers=workers)
    est = KestenEstimate(n, tuple(w), abs(ex.value) / denom, ex.stderr / denom, ex.value, denom)
    if NOISE_FACTOR * ex.stderr > denom:
        raise InconclusiveError(f"Kesten numerator noise {ex.stderr:.3g} swamps denominator {denom:.3g}", est)
    return est


def kesten_ratio(dists, box, n, x, mc_n, seed: int = 0, workers: Optional[int] = None) -> float:
    return kesten_estimate(dists, box, n, x, mc_n, seed=seed, workers=workers).ratio


@dataclass(frozen=True)
class KestenGrowth:
    estimates: tuple
    slope: float
    bound: float
    status: str  # pass, fail or inconclusive

    @property
    def passed(self) -> bool:
        return self.status == "pass"


def kesten_growth(d: ClaimDistribution, box: tuple, ns, x: float, mc_n: int, seed: int = 0,
                  workers: Optional[int] = None, eps: float = KESTEN_EPS,
                  margin: float = KESTEN_MARGIN) -> KestenGrowth:
    """Least-squares slope of ``log ratio`` against ``n``, tested against ``log(1 + eps) + margin``."""
    bound = math.log1p(eps) + margin
    ests = []
    try:
        for n in ns:
            ests.append(kesten_estimate([d], box, n, x, mc_n, seed=seed, workers=workers))
    except InconclusiveError as err:
        ests.append(err.report)
        return KestenGrowth(tuple(ests), float("nan"), bound, "inconclusive")
    ratios = np.array([e.ratio for e in ests])
    if np.any(ratios <= 0):
        return KestenGrowth(tuple(ests), float("nan"), bound, "inconclusive")
    slope = float(np.polyfit(np.array([e.n for e in ests], dtype=float), np.log(ratios), 1)[0])
    return KestenGrowth(tuple(ests), slope, bound, "pass" if slope <= bound else "fail")


# ---------------------------------------------------------------------------
# weighted-sum expansion with deterministic weights
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExpansionReport:
    lhs: float
    lhs_stderr: float
    first_sum: float
    second_sum: float

    @property
    def rhs(self) -> float:
        return self.first_sum + self.second_sum

    @property
    def ratio(self) -> float:
        """``(lhs - first_sum) / second_sum``; 1 when the expansion is sharp."""
        if self.second_sum == 0:
            return 0.0 if self.lhs == self.first_sum else math.inf
        return (self.lhs - self.first_sum) / self.second_sum

    @property
    def ratio_stderr(self) -> float:
        return self.lhs_stderr / self.second_sum if self.second_sum else 0.0


def weighted_sum_expansion_check(dists: Sequence[ClaimDistribution], weights, x: float, mc_n: int,
                                 seed: int = 0, workers: Optional[int] = None) -> ExpansionReport:
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size != len(dists):
        raise ValueError("weights and distributions must have equal lengths")
    if w.size > 4:
        raise ValueError("expansion check supports at most 4 summands")
    if np.any(w <= 0):
        raise ValueError("weights must be positive")
    first = float(sum(d.tail(x / c) for c, d in zip(w, dists)))
    incs = [d.local_increment(x / c, 1.0 / c) for c, d in zip(w, dists)]
    means = [d.mean for d in dists]
    second = float(sum(means[i] * w[i] * incs[k]
                       for k in range(w.size) for i in range(w.size) if i != k))
    ex = weighted_excess(dists, w, x, mc_n, seed=seed, workers=workers)
    report = ExpansionReport(first + ex.value, ex.stderr, first, second)
    if second > 0 and NOISE_FACTOR * ex.stderr > second:
        raise InconclusiveError(f"expansion check noise {ex.stderr:.3g} swamps second sum {second:.3g}", report)
    return report


# ---------------------------------------------------------------------------
# by-claim identities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IdentityReport:
    name: str
    lhs: float
    lhs_stderr: float
    rhs: float
    n: int

    @property
    def rel_gap(self) -> float:
        if self.rhs == 0:
            return 0.0 if self.lhs == 0 else math.inf
        return abs(self.lhs - self.rhs) / abs(self.rhs)


def _identity_sums(s: asym.Scenario, x: float, k: int, gens, estimator: str, backend=None):
    """Sum and sum of squares of the per-path products for both identities."""
    r, t = s.r, s.t
    f, g = s.main_claim, s.by_claim
    acc = np.zeros(4)
    for lo in range(0, k, CHUNK):
        m = min(CHUNK, k - lo)
        b = mc.draw_batch(s, m, gens)
        landed = b.times + b.delays
        lands = landed <= t
        grow_main = np.exp(r * b.times)
        grow_by = np.exp(r * landed)
        if estimator == "conditional":
            hit_main = f.local_increment(x * grow_main, grow_main)
            hit_by = np.where(lands, g.local_increment(x * grow_by, grow_by), 0.0)
        else:
            z = b.claims / grow_main
            hit_main = ((z > x) & (z <= x + 1)).astype(float)
            zy = b.byclaims / grow_by
            hit_by = (lands & (zy > x) & (zy <= x + 1)).astype(float)
        by_weight = np.where(lands, 1.0 / grow_by, 0.0)
        p63 = kernels.pair_products(b.counts, hit_main, by_weight, backend=backend)
        p64 = kernels.pair_products(b.counts, hit_by, 1.0 / grow_main, backend=backend)
        acc += (p63.sum(), np.square(p63).sum(), p64.sum(), np.square(p64).sum())
    return acc


def byclaim_identity_check(s: asym.Scenario, x: float, mc_n: int, seed: int = 0,
                           workers: Optional[int] = None, estimator: str = "conditional",
                           backend=None) -> tuple:
    """Both by-claim identities: path-sum MC against the quadrature of ``phi~_F`` and ``phi~_G``.

    ``estimator="conditional"`` replaces each claim-size indicator by its
    probability given the arrival and delay times (same expectation, far
    less noise); ``"crude"`` uses the raw indicators.  Raises
    :class:`InconclusiveError` when a standard error exceeds a tenth of its
    right-hand side.
    """
    if not s.byclaims:
        raise ValueError("scenario has no by-claims")
    if estimator not in ("conditional", "crude"):
        raise ValueError(f"unknown estimator {estimator!r}")
    if mc_n < 1:
        raise ValueError("mc_n must be >= 1")
    sums = np.sum(mc.run_workers(lambda k, g: _identity_sums(s, x, k, g, estimator, backend),
                                 mc_n, seed, mc.resolve_workers(workers)), axis=0)
    reports = []
    for name, (s1, s2), rhs in (("lemma63", sums[:2], asym.phi_tilde_F(s, x)),
                                ("lemma64", sums[2:], asym.phi_tilde_G(s, x))):
        mean = s1 / mc_n
        se = math.sqrt(max(s2 / mc_n - mean * mean, 0.0) / mc_n)
        reports.append(IdentityReport(name, float(mean), se, float(rhs), mc_n))
    for rep in reports:
        # no hits at all carries no information either
        if rep.rhs > 0 and (rep.lhs == 0 or NOISE_FACTOR * rep.lhs_stderr > rep.rhs):
            raise InconclusiveError(f"{rep.name}: MC noise {rep.lhs_stderr:.3g} swamps {rep.rhs:.3g}",
                                    tuple(reports))
    return tuple(reports)
