import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from supplynet.demand import (
    DemandModel,
    DemandPmf,
    FixedDemand,
    NormalDemand,
    convolve,
    demand_from_spec,
    discretize_normal,
    pmf_from_counts,
    pmf_from_samples,
    point_mass,
    sample,
    uniform,
)
from supplynet.errors import DegenerateSupport, EmptySamples, SchemaError


def test_normal_32_4():
    p = discretize_normal(32, 4, 4)
    assert p.support_bounds() == (16, 48)
    assert int(np.argmax(p.probs)) + p.support_min == 32
    assert np.allclose(p.probs, p.probs[::-1], atol=1e-9)
    assert abs(p.mean() - 32) <= 0.01


def test_normal_clipped_at_zero():
    p = discretize_normal(0, 1, 4)
    assert p.support_bounds() == (0, 4)
    assert int(np.argmax(p.probs)) == 0


def test_normal_two_sigma_support():
    assert discretize_normal(32, 4, 2).support_bounds() == (24, 40)


def test_pmf_validation():
    with pytest.raises(ValueError):
        DemandPmf(0, [0.5, 0.4])
    with pytest.raises(ValueError):
        DemandPmf(0, [0.0, 1.0])
    with pytest.raises(ValueError):
        DemandPmf(-1, [1.0])
    with pytest.raises(DegenerateSupport):
        DemandPmf(0, [])
    with pytest.raises(DegenerateSupport):
        DemandPmf.from_weights(0, [0, 0])
    p = point_mass(3)
    with pytest.raises(AttributeError):
        p.support_min = 4


def test_from_samples():
    p = pmf_from_samples([5, 5, 7])
    assert p.support_bounds() == (5, 7)
    assert np.allclose(p.probs, [2 / 3, 0, 1 / 3])
    assert pmf_from_samples([0]) == point_mass(0)
    with pytest.raises(EmptySamples):
        pmf_from_samples([])
    with pytest.raises(EmptySamples):
        pmf_from_counts({})


def test_samples_converge_to_source():
    src = discretize_normal(32, 4, 4)
    rng = np.random.default_rng(11)
    est = pmf_from_samples(src.quantile(rng.random(100_000)))
    lo = min(src.support_min, est.support_min)
    hi = max(src.support_max, est.support_max)
    tv = 0.5 * sum(abs(src.pmf(v) - est.pmf(v)) for v in range(lo, hi + 1))
    assert tv < 0.02


def test_convolve():
    assert convolve(point_mass(2), point_mass(3)) == point_mass(5)
    c = convolve(uniform(0, 1), uniform(0, 1))
    assert c.support_min == 0 and np.allclose(c.probs, [0.25, 0.5, 0.25])
    p = discretize_normal(10, 2)
    assert convolve(p, point_mass(0)) == p


def test_sampling():
    rng = np.random.default_rng(0)
    assert all(sample(point_mass(7), rng) == 7 for _ in range(20))
    u = uniform(0, 9)
    draws = u.quantile(np.random.default_rng(5).random(100_000))
    freq = np.bincount(draws, minlength=10) / draws.size
    assert np.all(np.abs(freq - 0.1) <= 0.01)
    a = [sample(u, np.random.default_rng(3)) for _ in range(3)]
    b = [sample(u, np.random.default_rng(3)) for _ in range(3)]
    assert a == b


def test_cdf_and_quantile_edges():
    p = DemandPmf(2, [0.25, 0.0, 0.75])
    assert p.cdf(1) == 0.0 and p.cdf(2) == 0.25 and p.cdf(3) == 0.25 and p.cdf(4) == 1.0
    assert p.quantile(0.0) == 2 and p.quantile(0.2499) == 2 and p.quantile(0.25) == 4
    assert p.quantile(0.999999) == 4


def test_shifted():
    p = DemandPmf(2, [0.5, 0.5])
    assert p.shifted(3) == DemandPmf(5, [0.5, 0.5])
    assert p.shifted(-3) == DemandPmf(0, [1.0])
    assert p.shifted(-2) == p.shifted(-2)


def test_demand_model():
    m = DemandModel.per_stage([point_mass(1), point_mass(4)])
    assert m.at(1).support_max == 4 and m.max_support(2) == 4
    with pytest.raises(ValueError):
        m.check_horizon(3)
    c = DemandModel.constant(point_mass(2))
    c.check_horizon(9)
    assert c.at(7) == point_mass(2)


def test_sources():
    n = NormalDemand(32, 4, 2)
    assert n.pmf(10).support_bounds() == (34, 50)
    assert n.pmf(10) is n.pmf(10)
    f = FixedDemand(uniform(3, 5))
    assert f.pmf(2).support_bounds() == (5, 7)
    assert demand_from_spec({"kind": "point", "value": 4}).pmf() == point_mass(4)
    emp = demand_from_spec({"kind": "empirical", "counts": {1: 1, 3: 3}})
    assert np.allclose(emp.pmf().probs, [0.25, 0, 0.75])
    assert demand_from_spec(emp.to_dict()).pmf() == emp.pmf()
    with pytest.raises(SchemaError):
        demand_from_spec({"kind": "poisson"})


@given(st.lists(st.integers(0, 60), min_size=1, max_size=200))
def test_from_samples_matches_counts(samples):
    p = pmf_from_samples(samples)
    assert p.support_bounds() == (min(samples), max(samples))
    for v in set(samples):
        assert p.pmf(v) == pytest.approx(samples.count(v) / len(samples))
    assert abs(p.probs.sum() - 1) <= 1e-12


@given(st.lists(st.floats(0.01, 1.0), min_size=1, max_size=15), st.integers(0, 20), st.floats(0, 0.999999))
def test_quantile_inverts_cdf(weights, lo, u):
    p = DemandPmf.from_weights(lo, weights)
    v = p.quantile(u)
    assert p.cdf(v) > u or v == p.support_max
    assert v == p.support_min or p.cdf(v - 1) <= u
