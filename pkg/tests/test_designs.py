import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from riesz_lab.designs import (
    BernoulliDesign,
    CompleteRandomization,
    EnumeratedDesign,
    IndependentContinuousDesign,
    MCMoment,
    MomentProvider,
    Semicircle,
    Uniform,
    product_descriptor,
)
from riesz_lab.errors import DimensionTooLarge, InexactMoments, UnsupportedDesign
from riesz_lab.model_spaces import BasisFunction, coordinate, polynomial_basis, sutva_space


def test_sample_degenerate_bernoulli_is_all_ones():
    for seed in (0, 1, 2**63 + 5):
        assert np.all(BernoulliDesign.uniform(5, 1.0).sample(seed) == 1.0)


def test_complete_randomization_sample_has_exactly_m_treated():
    d = CompleteRandomization(4, 2)
    Z = d.sample_many(7, 200)
    assert np.all(Z.sum(axis=1) == 2)


def test_semicircle_sample_in_support():
    Z = IndependentContinuousDesign.semicircle(6).sample_many(3, 1000)
    assert Z.min() >= -1.0 and Z.max() <= 1.0


def test_sample_is_seed_deterministic():
    d = BernoulliDesign.uniform(8, 0.3)
    assert np.array_equal(d.sample(11), d.sample(11))


def test_enumerate_bernoulli_product_law():
    points, probs = BernoulliDesign.uniform(2, 0.5).enumerate_support()
    assert points.shape == (4, 2)
    assert np.allclose(probs, 0.25)


def test_enumerate_complete_randomization_uniform():
    points, probs = CompleteRandomization(3, 1).enumerate_support()
    assert len(probs) == 3
    assert np.allclose(probs, 1 / 3)
    assert np.all(points.sum(axis=1) == 1)


def test_enumerated_design_echoed():
    d = EnumeratedDesign.from_pairs([([1.0], 0.3), ([0.0], 0.7)])
    points, probs = d.enumerate_support()
    got = sorted(zip(points[:, 0].tolist(), probs.tolist()))
    assert got == pytest.approx([(0.0, 0.7), (1.0, 0.3)])


def test_enumerate_errors():
    with pytest.raises(UnsupportedDesign):
        IndependentContinuousDesign.semicircle(2).enumerate_support()
    with pytest.raises(DimensionTooLarge):
        BernoulliDesign.uniform(17, 0.5).enumerate_support()
    points, _ = BernoulliDesign.uniform(17, 0.5).enumerate_support(max_points=2**17)
    assert len(points) == 2**17


def test_probabilities_sum_to_one():
    for d in (BernoulliDesign((0.1, 0.5, 0.9)), CompleteRandomization(6, 2)):
        _, probs = d.enumerate_support()
        assert math.fsum(probs) == pytest.approx(1.0, abs=1e-12)


def test_moment_examples():
    prov = MomentProvider(BernoulliDesign.uniform(1, 0.5))
    t, c = sutva_space(0).basis
    assert prov.moment([t]) == pytest.approx(0.5, abs=1e-15)
    root2 = BasisFunction("s_t", lambda z: math.sqrt(2) * (z[:, 0] == 1), {0})
    root2c = BasisFunction("s_c", lambda z: math.sqrt(2) * (z[:, 0] == 0), {0})
    assert prov.moment([root2, root2c]) == 0.0


def test_semicircle_chebyshev_orthonormal():
    prov = MomentProvider(IndependentContinuousDesign.semicircle(1))
    u = [polynomial_basis(0, k, "chebyshev") for k in range(0, 8)]
    G = prov.gram(u)
    assert np.allclose(G, np.eye(8), atol=1e-12)
    assert prov.moment([u[1], u[1]]) == pytest.approx(1.0, abs=1e-12)


def test_uniform_quadrature_moments():
    law = Uniform(-1.0, 3.0)
    x, w = law.quadrature()
    assert w.sum() == pytest.approx(1.0, abs=1e-14)
    assert w @ x == pytest.approx(1.0, abs=1e-13)
    assert w @ x**2 == pytest.approx((27 + 1) / 12, abs=1e-12)


def test_semicircle_even_moments():
    x, w = Semicircle(2.0).quadrature()
    assert w @ x**2 == pytest.approx(1.0, abs=1e-12)  # R^2 / 4
    assert w @ x**4 == pytest.approx(2.0, abs=1e-12)  # 2 (R/2)^4


def test_complete_randomization_pair_moment():
    prov = MomentProvider(CompleteRandomization(5, 2))
    m = prov.moment([coordinate(0), coordinate(3)])
    assert m == pytest.approx(2 * 1 / (5 * 4), abs=1e-15)


def test_exact_moment_matches_enumeration():
    d = BernoulliDesign((0.2, 0.6, 0.7))
    prov = MomentProvider(d)
    rng = np.random.default_rng(0)
    points, probs = d.enumerate_support()
    for trial in range(20):
        coefs = rng.normal(size=3)
        f = BasisFunction(f"lin{trial}", lambda z, c=coefs: np.exp(z @ c), {0, 1, 2})
        g = coordinate(int(rng.integers(3)))
        expect = math.fsum(probs * np.exp(points @ coefs) * points[:, next(iter(g.support))])
        assert prov.moment([f, g]) == pytest.approx(expect, abs=1e-12)


def test_product_descriptor_is_order_free():
    assert product_descriptor(["b", "a", "b"]) == product_descriptor(["b", "b", "a"]) == (("a", 1), ("b", 2))


def test_monte_carlo_moment_within_error():
    d = BernoulliDesign.uniform(3, 0.3)
    exact = MomentProvider(d)
    misses = 0
    for seed in range(100):
        mc = MomentProvider(d, "monte_carlo", samples=2000, seed=seed)
        m = mc.moment([coordinate(0), coordinate(1)])
        assert isinstance(m, MCMoment)
        misses += abs(m.value - exact.moment([coordinate(0), coordinate(1)])) > 5 * m.standard_error
    assert misses <= 1


def test_monte_carlo_provider_refused_for_orthogonalisation():
    from riesz_lab.orthogonalization import gram_schmidt

    mc = MomentProvider(BernoulliDesign.uniform(1, 0.5), "monte_carlo", samples=100)
    with pytest.raises(InexactMoments):
        gram_schmidt(sutva_space(0), mc)


def test_sample_frequencies_match_probabilities():
    p = np.array([0.1, 0.5, 0.85])
    d = BernoulliDesign(tuple(p))
    freq = d.sample_many(123, 100_000).mean(axis=0)
    assert np.all(np.abs(freq - p) <= 4 * np.sqrt(p * (1 - p) / 100_000))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=6))
def test_bernoulli_marginals_are_consistent(ps):
    d = BernoulliDesign(tuple(ps))
    points, probs = d.enumerate_support()
    assert math.fsum(probs) == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(probs @ points, ps, atol=1e-12)
