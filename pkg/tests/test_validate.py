import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ruin_asym import asym, validate as V
from ruin_asym.dist import DistributionError, Exponential, Pareto, Weibull
from ruin_asym.renewal import RenewalSpec

F = Pareto(2.0, 2.3)
MU = 2.0 / 1.3

# Frozen oracles: mpmath quadrature at 40 digits of the same defining ratio.
PARETO_RATIOS = (1.139488775262998, 1.01947963430271, 1.0021653611682013)
WEIBULL_RATIOS = (0.4556889105452252, 1.1801066157803395, 1.1040529296599213)
PARETO_CONV_TAIL_1E3 = 1.238686484138979e-06


def test_convolution_tail_basics():
    assert V.convolution_tail(F, 0.0) == 1.0
    assert V.convolution_tail(Exponential(1.0), 2.0) == pytest.approx(3 * math.exp(-2), rel=1e-10)
    assert 3 * math.exp(-2) == pytest.approx(0.40601, abs=1e-5)
    assert V.convolution_tail(F, 1e3) == pytest.approx(PARETO_CONV_TAIL_1E3, rel=1e-9)
    with pytest.raises(ValueError):
        V.convolution_tail(F, -1.0)


def test_convolution_tail_against_simulation():
    rng = np.random.default_rng(21)
    hits = 0
    for _ in range(10):
        z = F.rvs(rng, 1_000_000) + F.rvs(rng, 1_000_000)
        hits += int((z > 1e3).sum())
    p = hits / 1e7
    assert abs(p - PARETO_CONV_TAIL_1E3) < 3 * math.sqrt(PARETO_CONV_TAIL_1E3 / 1e7)


@settings(max_examples=30, deadline=None)
@given(x=st.floats(0.01, 1e5), dx=st.floats(0.0, 1e3), which=st.integers(0, 2))
def test_convolution_tail_properties(x, dx, which):
    d = (F, Weibull(1.0, 0.3), Exponential(0.5))[which]
    a = V.convolution_tail(d, x)
    assert a >= d.tail(x)
    assert V.convolution_tail(d, x + dx) <= a * (1 + 1e-9)


def test_s2_pareto_ratios():
    diag = V.s2_defining_ratio(F, [1e2, 1e3, 1e4])
    assert diag.ratios == pytest.approx(PARETO_RATIOS, rel=1e-9)
    gaps = [abs(r - 1) for r in diag.ratios]
    assert gaps[0] > gaps[1] > gaps[2] and 0.9 < diag.ratios[-1] < 1.1
    # 1.139 at x=100 sits outside the verdict band; one decade later it is inside
    assert not diag.approaching_one
    assert V.s2_defining_ratio(F, [1e3, 1e4, 1e5]).approaching_one


def test_s2_weibull_ratios():
    d = Weibull(1.0, 0.3)
    diag = V.s2_defining_ratio(d, [1e2, 1e3, 1e4])
    assert diag.ratios == pytest.approx(WEIBULL_RATIOS, rel=1e-9)
    assert not diag.approaching_one
    assert V.s2_defining_ratio(d, [1e5, 1e6, 1e7]).approaching_one


def test_s2_exponential_diverges():
    diag = V.s2_defining_ratio(Exponential(1.0), [5.0, 10.0, 20.0, 40.0])
    assert not diag.approaching_one
    assert all(b > a for a, b in zip(diag.ratios, diag.ratios[1:]))


def test_s2_needs_finite_mean():
    with pytest.raises(DistributionError):
        V.s2_defining_ratio(Pareto(2.0, 0.8), [1e2, 1e3, 1e4])


def test_s2_ratio_agrees_with_mc_convolution():
    x = 1e3
    quad_ratio = V.s2_defining_ratio(F, [x]).ratios[0]
    ex = V.weighted_excess([F, F], [1.0, 1.0], x, 400_000, seed=3)
    denom = 2 * MU * F.local_increment(x)
    assert abs(ex.value / denom - quad_ratio) < 3 * ex.stderr / denom + 1e-9


def test_kesten_single_summand_is_zero():
    assert V.kesten_ratio([F], (0.5, 2.0), 1, 1e3, 1000) == 0.0
    assert V.kesten_ratio([Weibull(1.0, 0.3)], (1.0, 1.0), 1, 50.0, 10) == 0.0


def test_kesten_two_unit_weights():
    est = V.kesten_estimate([F], (1.0, 1.0), 2, 1e3, 400_000, seed=4)
    # excess ~ 2 mu F(x, x+1] against a denominator of 2 F(x, x+1]
    assert est.ratio == pytest.approx(MU * PARETO_RATIOS[1], rel=0.03)
    assert est.weights == (1.0, 1.0)


def test_kesten_weights_frozen_by_seed():
    a = V.kesten_estimate([F], (0.5, 2.0), 3, 1e3, 20_000, seed=5)
    b = V.kesten_estimate([F], (0.5, 2.0), 3, 1e3, 20_000, seed=5)
    assert a == b and all(0.5 <= w <= 2.0 for w in a.weights)


def test_kesten_inconclusive(monkeypatch):
    monkeypatch.setattr(V, "NOISE_FACTOR", 1e12)
    with pytest.raises(V.InconclusiveError) as err:
        V.kesten_estimate([F], (0.5, 2.0), 3, 1e3, 1000, seed=6)
    assert isinstance(err.value.report, V.KestenEstimate)
    g = V.kesten_growth(F, (0.5, 2.0), range(2, 5), 1e3, 1000, seed=6)
    assert g.status == "inconclusive"


def test_kesten_argument_checks():
    with pytest.raises(ValueError):
        V.kesten_estimate([F], (0.0, 2.0), 2, 1e3, 100)
    with pytest.raises(ValueError):
        V.kesten_estimate([F, F, F], (0.5, 2.0), 2, 1e3, 100)


def test_expansion_single_summand():
    rep = V.weighted_sum_expansion_check([F], [1.0], 1e3, 1000)
    assert rep.lhs == rep.first_sum and rep.second_sum == 0.0


def test_expansion_two_pareto_summands():
    rep = V.weighted_sum_expansion_check([F, F], [1.0, 1.0], 1e3, 1_000_000, seed=7)
    assert rep.first_sum == pytest.approx(2 * F.tail(1e3))
    assert rep.second_sum == pytest.approx(2 * MU * F.local_increment(1e3))
    assert 0.8 < rep.ratio < 1.2


def test_expansion_unequal_weights():
    rep = V.weighted_sum_expansion_check([F, F], [0.5, 2.0], 1e3, 400_000, seed=8)
    assert rep.lhs == pytest.approx(F.tail(2e3) + F.tail(5e2), rel=0.02)
    assert 0.8 < rep.ratio < 1.2


def test_expansion_scaling():
    a = V.weighted_sum_expansion_check([F, F], [0.5, 2.0], 1e3, 400_000, seed=9)
    b = V.weighted_sum_expansion_check([F, F], [1.0, 4.0], 2e3, 400_000, seed=9)
    # P(2cX > 2x) = P(cX > x): the first sums agree exactly, the ratios to MC error
    assert a.first_sum == pytest.approx(b.first_sum, rel=1e-12)
    assert a.ratio == pytest.approx(b.ratio, abs=3 * math.hypot(a.ratio_stderr, b.ratio_stderr) + 0.02)


def test_expansion_limits():
    with pytest.raises(ValueError):
        V.weighted_sum_expansion_check([F] * 5, [1.0] * 5, 1e3, 10)
    with pytest.raises(ValueError):
        V.weighted_sum_expansion_check([F, F], [1.0], 1e3, 10)


def _by_scenario(t=10.0):
    return asym.Scenario(F, RenewalSpec(Exponential(0.2)), 0.1, t, by_claim=F, delay=Exponential(0.2))


def test_identities_zero_horizon():
    r63, r64 = V.byclaim_identity_check(_by_scenario(t=0.0), 50.0, 1000)
    assert r63.lhs == r63.rhs == 0.0 and r64.lhs == r64.rhs == 0.0
    assert r63.rel_gap == 0.0


def test_identities_conditional_estimator():
    r63, r64 = V.byclaim_identity_check(_by_scenario(), 50.0, 200_000, seed=10, workers=2)
    for rep in (r63, r64):
        assert abs(rep.lhs - rep.rhs) < 4 * rep.lhs_stderr
        assert rep.rel_gap < 0.05


def test_identities_crude_estimator_is_noisy():
    with pytest.raises(V.InconclusiveError):
        V.byclaim_identity_check(_by_scenario(), 50.0, 2000, seed=11, estimator="crude")


def test_identities_need_byclaims():
    s = asym.Scenario(F, RenewalSpec(Exponential(0.2)), 0.1, 10.0)
    with pytest.raises(ValueError):
        V.byclaim_identity_check(s, 50.0, 100)
