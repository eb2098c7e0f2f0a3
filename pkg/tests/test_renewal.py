import math
import warnings

import numpy as np
import pytest

from ruin_asym.dist import DistributionError, Exponential, Pareto, PointMass, Weibull
from ruin_asym.renewal import DelayedMeasure, RenewalSpec, sample_arrival_matrix, sample_path


def test_poisson_fast_path_and_general_solver_agree():
    spec = RenewalSpec(Exponential(0.2))
    assert spec.renewal_function(10.0) == pytest.approx(2.0)
    assert spec.renewal_function(10.0, general=True) == pytest.approx(2.0, rel=1e-6)
    assert spec.renewal_function(0.0, general=True) == 0.0


def test_general_renewal_function_against_simulation():
    # Weibull(1, 2) inter-arrivals: mean count over 10 time units by brute force
    spec = RenewalSpec(Weibull(1.0, 2.0))
    rng = np.random.default_rng(11)
    m = 200_000
    steps = np.cumsum(spec.interarrival.rvs(rng, (m, 40)), axis=1)
    counts = (steps <= 10.0).sum(axis=1)
    se = counts.std() / math.sqrt(m)
    assert abs(spec.renewal_function(10.0) - counts.mean()) < 4 * se


def test_renewal_density_integrates_back():
    spec = RenewalSpec(Weibull(1.0, 2.0))
    tab = spec.table(10.0)
    g = np.linspace(0, 10, 4001)
    dens = tab.density(g)
    area = np.sum(0.5 * (dens[1:] + dens[:-1]) * np.diff(g))
    assert area == pytest.approx(float(tab(10.0)), rel=1e-4)


def test_degenerate_interarrival_rejected():
    with pytest.raises(DistributionError):
        RenewalSpec(PointMass())


def test_rate_only_for_poisson():
    with pytest.raises(DistributionError):
        RenewalSpec(Weibull(1.0, 2.0)).rate


def test_delayed_measure_exponential_closed_form():
    dm = DelayedMeasure(RenewalSpec(Exponential(0.2)), Exponential(0.2))
    want = 0.2 * (10 - (1 - math.exp(-2.0)) / 0.2)
    assert dm(10.0) == pytest.approx(want, rel=1e-12)
    assert dm(10.0, general=True) == pytest.approx(want, rel=1e-6)
    assert dm(0.0) == 0.0


def test_instantaneous_delay_gives_renewal_function():
    base = RenewalSpec(Exponential(0.2))
    dm = DelayedMeasure(base, PointMass())
    assert dm(7.0) == pytest.approx(1.4)
    assert dm(7.0, general=True) == pytest.approx(1.4, rel=1e-6)


def test_delayed_measure_general_delay_law():
    # Weibull(1,1) delays are Exp(1): compare the quadrature path with the closed form
    dm = DelayedMeasure(RenewalSpec(Exponential(0.5)), Weibull(2.0, 1.0))
    want = 0.5 * (6 - 2 * (1 - math.exp(-3.0)))
    assert dm(6.0) == pytest.approx(want, rel=1e-8)


def test_singular_interarrival_warns_but_returns():
    spec = RenewalSpec(Weibull(1.0, 0.5))
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        val = spec.renewal_function(3.0)
    assert val > 0
    assert all(issubclass(w.category, RuntimeWarning) for w in rec)


def test_sample_path_properties():
    rng = np.random.default_rng(3)
    spec = RenewalSpec(Exponential(2.0))
    p = sample_path(spec, Exponential(1.0), 10.0, rng)
    assert np.all(np.diff(p.times) > 0) and np.all(p.times <= 10.0)
    assert len(p) == p.delays.size
    assert len(sample_path(spec, Exponential(1.0), 0.0, rng)) == 0


def test_arrival_matrix_extends_when_slots_overflow():
    rng = np.random.default_rng(5)
    tau, counts = sample_arrival_matrix(RenewalSpec(Exponential(5.0)), 10.0, 200, rng, slots=3)
    assert tau.shape[1] > 3
    assert np.all(tau[:, -1] > 10.0)
    assert counts.mean() == pytest.approx(50.0, rel=0.05)
