"""First- and second-order tail expansions of discounted aggregate claims.

Two models are covered: main claims only, and main claims each followed by
a delayed by-claim.  The quadrature evaluators work for any renewal
arrival process and any claim law with a finite mean; the closed forms
need Poisson arrivals, Pareto claims and (with by-claims) exponential
delays.

Each correction integrand carries a local increment ``F(x e^{rw}, (x+1) e^{rw}]``
that is tiny at large ``x``, so integrands are divided by ``F(x, x+1]`` (or
``F(x)`` for tail integrands) before quadrature and the scale is restored
afterwards; the quadrature tolerances then act on O(1) quantities.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import quad
from .dist import ClaimDistribution, DistributionError, Exponential, Pareto
from .renewal import DelayedMeasure, RenewalSpec

REGIME_RATIO = 0.1

CSV_COLUMNS = ("corr_F", "corr_G_tilde", "corr_G", "corr_F_tilde")


@dataclass(frozen=True)
class Scenario:
    main_claim: ClaimDistribution
    renewal: RenewalSpec
    r: float
    t: float
    T: Optional[float] = None
    by_claim: Optional[ClaimDistribution] = None
    delay: Optional[ClaimDistribution] = None

    def __post_init__(self):
        if self.T is None:
            object.__setattr__(self, "T", self.t)
        if self.r < 0:
            raise ValueError(f"interest force r must be nonnegative, got {self.r}")
        if not 0 <= self.t <= self.T:
            raise ValueError(f"need 0 <= t <= T, got t={self.t}, T={self.T}")
        if (self.by_claim is None) != (self.delay is None):
            raise ValueError("by-claim law and delay law must be given together")

    @property
    def byclaims(self) -> bool:
        return self.by_claim is not None

    @property
    def delayed(self) -> DelayedMeasure:
        if not self.byclaims:
            raise ValueError("scenario has no by-claims")
        return DelayedMeasure(self.renewal, self.delay)

    def at(self, t: float) -> "Scenario":
        """Same model at another horizon ``t <= T``."""
        return Scenario(self.main_claim, self.renewal, self.r, t, self.T, self.by_claim, self.delay)


@dataclass(frozen=True)
class Correction:
    name: str
    column: str
    weight: float
    integral: float

    @property
    def contribution(self) -> float:
        return self.weight * self.integral


@dataclass(frozen=True)
class AsymptoticBreakdown:
    first_order: float
    corrections: tuple = field(default_factory=tuple)
    remainder_scale: float = 0.0
    method: str = "quadrature"

    @property
    def total_second_order(self) -> float:
        return self.first_order + sum(c.contribution for c in self.corrections)

    @property
    def regime_flag(self) -> bool:
        """True while the remainder is still large next to the first-order term."""
        return self.remainder_scale > REGIME_RATIO * self.first_order

    def column(self, name: str) -> float:
        return sum(c.contribution for c in self.corrections if c.column == name)

    def as_row(self, x: float) -> dict:
        row = {"x": x, "first_order": self.first_order}
        row.update({c: self.column(c) for c in CSV_COLUMNS})
        row.update(remainder_scale=self.remainder_scale,
                   total_second_order=self.total_second_order,
                   regime_flag=int(self.regime_flag))
        return row


# ---------------------------------------------------------------------------
# integrand helpers
# ---------------------------------------------------------------------------

def _check_x(x: float) -> None:
    if not x > 0:
        raise ValueError(f"threshold x must be positive, got {x}")


class _Increment:
    """``w -> F(x e^{rw}, (x+1) e^{rw}] / F(x, x+1]`` with its scale kept aside."""

    def __init__(self, law: ClaimDistribution, x: float, r: float):
        self.law, self.x, self.r = law, x, r
        self.scale = law.local_increment(x, 1.0)

    def __call__(self, w):
        g = np.exp(self.r * np.asarray(w))
        return self.law.local_increment(self.x * g, g) / self.scale

    @property
    def vanishes(self) -> bool:
        return self.scale == 0.0


class _Tail:
    def __init__(self, law: ClaimDistribution, x: float, r: float):
        self.law, self.x, self.r = law, x, r
        self.scale = law.tail(x)

    def __call__(self, u):
        return np.asarray(self.law.tail(self.x * np.exp(self.r * np.asarray(u)))) / self.scale

    @property
    def vanishes(self) -> bool:
        return self.scale == 0.0


def _tail_integral(law, x, r, measure, t) -> float:
    fn = _Tail(law, x, r)
    if fn.vanishes or t == 0:
        return 0.0
    return fn.scale * quad.integrate_1d(fn, measure, t)


def _increment_integral(law, x, r, measure, t) -> float:
    fn = _Increment(law, x, r)
    if fn.vanishes or t == 0:
        return 0.0
    return fn.scale * quad.integrate_1d(fn, measure, t)


def _measures(s: Scenario):
    lam = s.renewal.measure(s.t)
    if not s.byclaims:
        return lam, None, None
    return lam, s.delayed.measure(s.t), quad.Measure.of_law(s.delay)


# ---------------------------------------------------------------------------
# model without by-claims
# ---------------------------------------------------------------------------

def first_order_no_byclaims(s: Scenario, x: float) -> float:
    """``int_{0-}^t F(x e^{ru}) lambda(du)`` (tail of ``F``)."""
    _check_x(x)
    return _tail_integral(s.main_claim, x, s.r, s.renewal.measure(s.t), s.t)


def phi_F_lambda_lambda(s: Scenario, x: float) -> float:
    _check_x(x)
    inc = _Increment(s.main_claim, x, s.r)
    if inc.vanishes or s.t == 0:
        return 0.0
    r = s.r
    lam = s.renewal.measure(s.t)

    def f(u, v):
        return np.exp(-r * v) * inc(u + v) + np.exp(-r * (u + v)) * inc(v)

    return inc.scale * quad.integrate_triangular_2d(f, lam, lam, s.t)


def remainder_no_byclaims(s: Scenario, x: float) -> float:
    _check_x(x)
    return _increment_integral(s.main_claim, x, s.r, s.renewal.measure(s.t), s.t)


def second_order_no_byclaims(s: Scenario, x: float) -> AsymptoticBreakdown:
    mu = s.main_claim.mean
    return AsymptoticBreakdown(
        first_order=first_order_no_byclaims(s, x),
        corrections=(Correction("phi_F_lambda_lambda", "corr_F", mu, phi_F_lambda_lambda(s, x)),),
        remainder_scale=remainder_no_byclaims(s, x),
    )


# ---------------------------------------------------------------------------
# model with by-claims
# ---------------------------------------------------------------------------

def phi0(s: Scenario, x: float) -> float:
    _check_x(x)
    lam, lam_h, _ = _measures(s)
    return (_tail_integral(s.main_claim, x, s.r, lam, s.t)
            + _tail_integral(s.by_claim, x, s.r, lam_h, s.t))


def phi_tilde_G(s: Scenario, x: float) -> float:
    _check_x(x)
    inc = _Increment(s.by_claim, x, s.r)
    if inc.vanishes or s.t == 0:
        return 0.0
    r, t = s.r, s.t
    lam, lam_h, h = _measures(s)
    first = quad.integrate_triangular_2d(lambda u, v: np.exp(-r * v) * inc(u + v), lam_h, lam, t)
    second = quad.integrate_triangular_2d(lambda sd, v: np.exp(-r * v) * inc(v + sd), h, lam, t)
    third = quad.integrate_triangular_3d(
        lambda u, sd, v: np.exp(-r * (u + v)) * inc(v + sd), lam, h, lam, t)
    return inc.scale * (first + second + third)


def phi_tilde_F(s: Scenario, x: float) -> float:
    _check_x(x)
    inc = _Increment(s.main_claim, x, s.r)
    if inc.vanishes or s.t == 0:
        return 0.0
    r, t = s.r, s.t
    lam, lam_h, h = _measures(s)
    # outer variable carries lambda(du), inner the delayed measure up to t - u
    first = quad.integrate_triangular_2d(lambda v, u: np.exp(-r * (u + v)) * inc(u), lam_h, lam, t)
    second = quad.integrate_triangular_2d(lambda sd, v: np.exp(-r * (v + sd)) * inc(v), h, lam, t)
    third = quad.integrate_triangular_3d(
        lambda u, sd, v: np.exp(-r * (v + sd)) * inc(u + v), lam, h, lam, t)
    return inc.scale * (first + second + third)


def phi_G_lambdaH_lambda(s: Scenario, x: float) -> float:
    _check_x(x)
    inc = _Increment(s.by_claim, x, s.r)
    if inc.vanishes or s.t == 0:
        return 0.0
    r = s.r
    lam, lam_h, _ = _measures(s)

    def f(u, v):
        return np.exp(-r * v) * inc(u + v) + np.exp(-r * (u + v)) * inc(u)

    return inc.scale * quad.integrate_triangular_2d(f, lam_h, lam, s.t)


def remainder_with_byclaims(s: Scenario, x: float) -> float:
    """``Delta(x; t)``: main-claim and by-claim local increments against their measures."""
    _check_x(x)
    lam, lam_h, _ = _measures(s)
    return (_increment_integral(s.main_claim, x, s.r, lam, s.t)
            + _increment_integral(s.by_claim, x, s.r, lam_h, s.t))


def second_order_with_byclaims(s: Scenario, x: float) -> AsymptoticBreakdown:
    if not s.byclaims:
        raise ValueError("scenario has no by-claims")
    mu_f, mu_g = s.main_claim.mean, s.by_claim.mean
    return AsymptoticBreakdown(
        first_order=phi0(s, x),
        corrections=(
            Correction("phi_F_lambda_lambda", "corr_F", mu_f, phi_F_lambda_lambda(s, x)),
            Correction("phi_tilde_G", "corr_G_tilde", mu_f, phi_tilde_G(s, x)),
            Correction("phi_G_lambdaH_lambda", "corr_G", mu_g, phi_G_lambdaH_lambda(s, x)),
            Correction("phi_tilde_F", "corr_F_tilde", mu_g, phi_tilde_F(s, x)),
        ),
        remainder_scale=remainder_with_byclaims(s, x),
    )


def second_order(s: Scenario, x: float) -> AsymptoticBreakdown:
    """Dispatch on the scenario's model."""
    if s.byclaims:
        return second_order_with_byclaims(s, x)
    return second_order_no_byclaims(s, x)


def regime_flag(s: Scenario, x: float) -> bool:
    """The breakdown's regime flag from the two 1-d integrals alone."""
    if s.byclaims:
        return remainder_with_byclaims(s, x) > REGIME_RATIO * phi0(s, x)
    return remainder_no_byclaims(s, x) > REGIME_RATIO * first_order_no_byclaims(s, x)


def regime_boundary(s: Scenario, lo: float, hi: float, rel: float = 1e-4) -> float:
    """Smallest ``x`` in ``[lo, hi]`` (to relative accuracy ``rel``) where the flag is off.

    Bisects in ``log x``; assumes the flag switches off once on the bracket.
    Returns ``lo`` if it is already off there and ``inf`` if it never is.
    """
    if not regime_flag(s, lo):
        return lo
    if regime_flag(s, hi):
        return math.inf
    while hi / lo > 1.0 + rel:
        mid = math.sqrt(lo * hi)
        if regime_flag(s, mid):
            lo = mid
        else:
            hi = mid
    return hi


def second_order_grid(s: Scenario, xs, workers: int = 1) -> list:
    """Breakdowns over a threshold grid; results come back in grid order."""
    xs = [float(x) for x in xs]
    if workers <= 1:
        return [second_order(s, x) for x in xs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda x: second_order(s, x), xs))


# ---------------------------------------------------------------------------
# closed forms (Poisson arrivals, regularly varying claims)
# ---------------------------------------------------------------------------

def _decay_integral(k: float, t: float) -> float:
    """``int_0^t e^{-k u} du`` with the ``k -> 0`` limit."""
    if k == 0:
        return t
    return -math.expm1(-k * t) / k


def _poisson_pareto(s: Scenario) -> tuple:
    if not s.renewal.is_poisson:
        raise DistributionError("closed form needs a Poisson arrival process")
    f = s.main_claim
    if not isinstance(f, Pareto) or f.alpha <= 1:
        raise DistributionError("closed form needs a Pareto main claim with alpha > 1")
    return s.renewal.rate, f.alpha


def zeta(lam: float, r: float, alpha: float, t: float) -> float:
    """Second-order coefficient of the model without by-claims."""
    if r == 0:
        return lam * lam * t * t
    return lam * lam * -math.expm1(-r * t) * -math.expm1(-alpha * r * t) / (alpha * r * r)


def closed_form_no_byclaims(s: Scenario, x: float) -> AsymptoticBreakdown:
    _check_x(x)
    lam, alpha = _poisson_pareto(s)
    f = s.main_claim
    first_coef = lam * _decay_integral(alpha * s.r, s.t)
    return AsymptoticBreakdown(
        first_order=first_coef * f.tail(x),
        corrections=(Correction("zeta", "corr_F", f.mean, zeta(lam, s.r, alpha, s.t) * f.density(x)),),
        remainder_scale=first_coef * f.density(x),
        method="closed_form",
    )


def _printed_coefficients(lam, lh, r, a, t) -> dict:
    e = math.exp
    chi = (lam * lh * ((a + 1) * lam + a * r) / (a * r ** 2 * (a * r + lh) * (a + 1))
           + lam * r * ((a + 1) * r + a * lh) * e(-(a + 1) * r * t) / (a * r ** 2 * (a + 1) * (r - lh))
           + lam * (lh - 2 * lam) * e(-(a * r + lh) * t) / ((a * r + lh) * (r - lh))
           - lam ** 2 * lh * e(-r * t) / (a * r ** 2 * (a * r + lh))
           - lam ** 2 * e(-a * r * t) / (a * r ** 2))
    # the second term's exponent carries no t, exactly as printed
    omega = (lam ** 2 * (1 - e(-r * t)) * (1 - e(-a * r * t)) / (a * r ** 2)
             + lam ** 2 * e(-(a * r + lh)) * (1 - e(-(r - lh) * t)) / ((r - lh) * (a * r + lh))
             + lam ** 2 * e(-r * t) * (1 - e(-(a * r + lh) * t)) / ((a * r + lh) * (r + a * r + lh))
             - lam ** 2 * (1 - e(-(a + 1) * r * t)) / ((a + 1) * r * (a * r + lh))
             - lam ** 2 * (1 - e(-r * t)) / (r * (r + a * r + lh)))
    pi = (lam * lh * (lam + a * lam + a * r) / (a * r ** 2 * (lh + r))
          + lam ** 2 * e(-r * t) / (a * r ** 2)
          - lam ** 2 * lh * e(-a * r * t) / (a * r ** 2 * (lh + r))
          + lam * (lam * (lh - a * r) + a * lh * r) * e(-(lh + r) * t) / (a * r * (lh + r) * (lh - a * r))
          + lam * lh * ((a + 1) * (lam * lh - a * r) + lam * r * (lh - a * r)) * e(-(a + 1) * r * t)
          / (a * (a + 1) * r ** 2 * (lh + r) * (lh - a * r))
          - lam ** 2 * e(-(lh + a * r + r) * t) / (a * r * (lh + r)))
    return {"zeta": zeta(lam, r, a, t), "chi": chi, "omega": omega, "pi": pi}


def _integral_coefficients(lam, lh, r, a, t) -> dict:
    """Coefficients from their defining integrals, increments replaced by ``e^{-alpha r w}``."""
    leb = quad.Measure.lebesgue()
    ex = np.exp

    def k(w):
        return ex(-a * r * w)

    def dens_h(sd):
        return lh * ex(-lh * sd)

    def delayed(u):
        return -np.expm1(-lh * u)

    two = quad.integrate_triangular_2d
    three = quad.integrate_triangular_3d
    z = lam * lam * two(lambda u, v: ex(-r * v) * k(u + v) + ex(-r * (u + v)) * k(v), leb, leb, t)
    chi = (lam * lam * two(lambda u, v: ex(-r * v) * k(u + v) * delayed(u), leb, leb, t)
           + lam * two(lambda sd, v: ex(-r * v) * k(v + sd) * dens_h(sd), leb, leb, t)
           + lam * lam * three(lambda u, sd, v: ex(-r * (u + v)) * k(v + sd) * dens_h(sd), leb, leb, leb, t))
    omega = lam * lam * two(
        lambda u, v: (ex(-r * v) * k(u + v) + ex(-r * (u + v)) * k(u)) * delayed(u), leb, leb, t)
    pi = (lam * lam * two(lambda v, u: ex(-r * (u + v)) * k(u) * delayed(v), leb, leb, t)
          + lam * two(lambda sd, v: ex(-r * (v + sd)) * k(v) * dens_h(sd), leb, leb, t)
          + lam * lam * three(lambda u, sd, v: ex(-r * (v + sd)) * k(u + v) * dens_h(sd), leb, leb, leb, t))
    return {"zeta": z, "chi": chi, "omega": omega, "pi": pi}


def byclaim_coefficients(lam: float, lam_hat: float, r: float, alpha: float, t: float,
                         method: str = "integral") -> dict:
    """``zeta, chi, omega, pi`` for Poisson arrivals and exponential delays.

    ``method="integral"`` integrates the defining kernels numerically and is
    the reference; ``method="printed"`` evaluates the published expressions
    term by term, which differ from it for ``chi``, ``omega`` and ``pi``.
    """
    if method == "integral":
        return _integral_coefficients(lam, lam_hat, r, alpha, t)
    if method == "printed":
        if r <= 0 or lam_hat in (r, alpha * r):
            raise DistributionError("printed coefficients need r > 0 and lam_hat not in {r, alpha r}")
        return _printed_coefficients(lam, lam_hat, r, alpha, t)
    raise ValueError(f"unknown coefficient method {method!r}")


def closed_form_with_byclaims(s: Scenario, x: float, coefficients: str = "integral") -> AsymptoticBreakdown:
    _check_x(x)
    if not s.byclaims:
        raise ValueError("scenario has no by-claims")
    lam, alpha = _poisson_pareto(s)
    f, g, h = s.main_claim, s.by_claim, s.delay
    if not isinstance(g, Pareto) or g.alpha != alpha:
        raise DistributionError("closed form needs Pareto by-claims sharing the main-claim alpha")
    if not isinstance(h, Exponential):
        raise DistributionError("closed form needs exponentially distributed delays")
    lh = h.rate
    if lh == s.r or lh == alpha * s.r:
        raise DistributionError("closed form needs lam_hat different from r and alpha * r")
    c = byclaim_coefficients(lam, lh, s.r, alpha, s.t, method=coefficients)
    main_coef = lam * _decay_integral(alpha * s.r, s.t)
    by_coef = main_coef - lam * _decay_integral(alpha * s.r + lh, s.t)
    fx, gx = f.density(x), g.density(x)
    return AsymptoticBreakdown(
        first_order=main_coef * f.tail(x) + by_coef * g.tail(x),
        corrections=(
            Correction("zeta", "corr_F", f.mean, c["zeta"] * fx),
            Correction("chi", "corr_G_tilde", f.mean, c["chi"] * gx),
            Correction("omega", "corr_G", g.mean, c["omega"] * gx),
            Correction("pi", "corr_F_tilde", g.mean, c["pi"] * fx),
        ),
        remainder_scale=main_coef * fx + by_coef * gx,
        method=f"closed_form:{coefficients}",
    )


def closed_form(s: Scenario, x: float) -> AsymptoticBreakdown:
    if s.byclaims:
        return closed_form_with_byclaims(s, x)
    return closed_form_no_byclaims(s, x)
