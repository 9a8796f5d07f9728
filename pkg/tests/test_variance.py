import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from riesz_lab.designs import BernoulliDesign, CompleteRandomization, MomentProvider
from riesz_lab.errors import InexactMoments, InvalidAlpha, LengthMismatch
from riesz_lab.functionals import Contrast, global_contrast
from riesz_lab.model_spaces import cycle_graph, linear_in_means_spaces, sutva_spaces
from riesz_lab.oracle import oracle_run
from riesz_lab.pipeline import Pipeline
from riesz_lab.positivity import test_second_order_positivity as check_second_order
from riesz_lab.scenarios import scenario, scenario_names
from riesz_lab.harness import build_pipeline
from riesz_lab.variance import (
    confidence_interval,
    normal_quantile,
    second_order_neighbor_skip,
    variance_estimate,
    variance_functional_value,
)


def reference(p=0.5):
    design = BernoulliDesign.uniform(1, p)
    return Pipeline.build(design, sutva_spaces(1), [Contrast([1.0], [0.0])])


def test_variance_functional_values_reference():
    pipe = reference()
    rep = pipe.reps[0]
    assert variance_functional_value(rep, rep, [[0.0, 1.0], [0.0, 0.0]], pipe.provider) == pytest.approx(1.0)
    assert variance_functional_value(rep, rep, np.ones((2, 2)), pipe.provider) == pytest.approx(4.0)


def test_variance_functional_independent_units_vanish():
    design = BernoulliDesign.uniform(2, 0.3)
    pipe = Pipeline.build(design, sutva_spaces(2), [global_contrast(2)] * 2, with_variance=False)
    rng = np.random.default_rng(1)
    for _ in range(5):
        t = rng.normal(size=(2, 2))
        assert variance_functional_value(pipe.reps[0], pipe.reps[1], t, pipe.provider) == pytest.approx(0.0, abs=1e-14)


def test_variance_functional_needs_exact_moments():
    pipe = reference()
    mc = MomentProvider(pipe.design, "monte_carlo", samples=10)
    with pytest.raises(InexactMoments):
        variance_functional_value(pipe.reps[0], pipe.reps[0], np.eye(2), mc)


def test_reference_positive_set_and_counts():
    pipe = reference()
    spec = pipe.bound
    assert spec.positive_set(0, 0).tolist() == [[True, False], [False, True]]
    assert spec.q_counts[0].tolist() == [1, 1]
    assert spec.diagonal_positive[0].tolist() == [True, True]
    assert sorted(spec.terms[(0, 0)]) == sorted([("V", 0, 0, 1.0), ("V", 1, 1, 1.0), ("V", 0, 0, 1.0), ("V", 1, 1, 1.0)])


@pytest.mark.parametrize("a, c, bound, var", [(1.0, 0.0, 2.0, 1.0), (1.0, 1.0, 4.0, 4.0), (2.0, -1.0, 10.0, 1.0)])
def test_reference_bound_values(a, c, bound, var):
    spec = reference().bound
    assert spec.bound_value([np.array([a, c])]) == pytest.approx(bound)
    assert spec.variance_value([np.array([a, c])]) == pytest.approx(var)


def test_disjoint_pair_fully_positive():
    pipe = Pipeline.build(
        BernoulliDesign.uniform(2, 0.5), sutva_spaces(2), [global_contrast(2)] * 2, skip_independent=False
    )
    assert pipe.bound.positive_set(0, 1).all()
    assert pipe.bound.positive_set(1, 0).all()
    assert np.allclose(pipe.so_reps[(0, 1)].coefficients, 0.0, atol=1e-12)


def test_skipped_pair_positive_set_is_full():
    pipe = Pipeline.build(BernoulliDesign.uniform(2, 0.5), sutva_spaces(2), [global_contrast(2)] * 2)
    assert (0, 1) in pipe.skipped
    assert pipe.bound.positive_set(1, 0).shape == (2, 2) and pipe.bound.positive_set(1, 0).all()


def test_zero_representor_row_is_positive():
    # theta(const) = 0 so every elementary functional in the first row is identically zero
    pipe = build_pipeline(scenario("sutva_linear", n=1, design={"kind": "bernoulli", "p": 0.4}))
    a = pipe.bound.analyses[(0, 0)]
    assert pipe.reps[0].ortho_weights[0] == 0.0
    assert a.positive[0].all() and a.positive[:, 0].all()


def test_fully_positive_bound_equals_variance():
    # constant outcome model: no null tensors, so no mass is transferred
    from riesz_lab.model_spaces import ModelSpace, constant

    design = BernoulliDesign.uniform(1, 0.5)
    pipe = Pipeline.build(design, [ModelSpace(0, (constant(),))], [Contrast([1.0], [0.0])])
    assert pipe.bound.sum_q == 0
    assert np.allclose(pipe.bound.bound_values[(0, 0)], pipe.bound.analyses[(0, 0)].variance_values)


def test_reference_second_order_representor():
    pipe = reference()
    assert np.allclose(pipe.so_reps[(0, 0)].coefficients, np.diag([4.0, 4.0]), atol=1e-12)
    assert pipe.variance([1.0], [3.0]).value == pytest.approx(36.0)
    assert pipe.variance([1.0], [0.0]).value == 0.0


def test_disjoint_units_variance_estimate():
    design = BernoulliDesign.uniform(2, 0.5)
    pipe = Pipeline.build(design, sutva_spaces(2), [global_contrast(2)] * 2)
    z, y = np.array([1.0, 0.0]), np.array([3.0, 5.0])
    v = pipe.variance(z, y)
    assert set(v.terms) == {(0, 0), (1, 1)}
    assert v.value == pytest.approx((4 * 9 + 4 * 25) / 4)
    with pytest.raises(LengthMismatch):
        variance_estimate(pipe.so_reps, z, y[:1])


def test_confidence_interval_examples():
    ci = confidence_interval(6.0, 36.0, 0.05)
    assert ci.lower == pytest.approx(-5.7598, abs=1e-4) and ci.upper == pytest.approx(17.7598, abs=1e-4)
    ci = confidence_interval(1.5, 0.0)
    assert ci.lower == ci.upper == 1.5 and not ci.clamped
    ci = confidence_interval(1.5, -0.1)
    assert ci.radius == 0.0 and ci.clamped
    for bad in (0.0, 1.0, -0.2, 1.5):
        with pytest.raises(InvalidAlpha):
            normal_quantile(bad)


def test_neighbor_skip_rules():
    assert second_order_neighbor_skip(sutva_spaces(3), BernoulliDesign.uniform(3, 0.5)) == {(0, 1), (0, 2), (1, 2)}
    assert second_order_neighbor_skip(sutva_spaces(3), CompleteRandomization(3, 1)) == frozenset()
    skip = second_order_neighbor_skip(linear_in_means_spaces(cycle_graph(10)), BernoulliDesign.uniform(10, 0.5))
    for i in range(10):
        for j in range(i, 10):
            dist = min(j - i, 10 - (j - i))
            assert ((i, j) in skip) == (dist > 2)


def _oracle(pipe, truth):
    return oracle_run(
        pipe.design, pipe.spaces, pipe.functionals, truth, pipe.representor_matrix, pipe.variance_estimates,
        pipe.bound.bound_value(truth),
    )


@pytest.mark.parametrize("name", scenario_names())
def test_bound_valid_and_estimator_unbiased_for_bound(name):
    pipe = build_pipeline(scenario(name))
    rng = np.random.default_rng(sum(map(ord, name)))
    for _ in range(10):
        truth = [rng.normal(size=s.dimension) for s in pipe.spaces]
        res = _oracle(pipe, truth)
        assert res.bound >= res.variance - 1e-9
        assert res.mean_variance_estimate == pytest.approx(res.bound, abs=1e-9 * (1 + abs(res.bound)))


@pytest.mark.parametrize("name", scenario_names())
def test_bound_terms_pass_second_order_positivity(name):
    pipe = build_pipeline(scenario(name))
    for pair, F in pipe.bound.bound_values.items():
        assert check_second_order(pipe.bound.analyses[pair].tortho, F).holds


@pytest.mark.parametrize("name", ["sutva_bernoulli", "linear_in_means_global", "own_any_cycle"])
def test_second_order_representation_identity(name):
    pipe = build_pipeline(scenario(name))
    points, probs = pipe.design.enumerate_support()
    for pair, rep in pipe.so_reps.items():
        t = pipe.bound.analyses[pair].tortho
        implied = probs @ (rep(points)[:, None] * t.product_values(points))
        F = pipe.bound.bound_values[pair].reshape(-1)
        assert np.allclose(implied, F, atol=1e-9)


@settings(max_examples=20, deadline=None)
@given(st.permutations(range(4)), st.integers(0, 2**32 - 1))
def test_relabelling_units_leaves_variance_estimate_unchanged(perm, seed):
    rng = np.random.default_rng(seed)
    p = (0.2, 0.4, 0.6, 0.8)
    design = BernoulliDesign(p)
    pipe = Pipeline.build(design, sutva_spaces(4), [global_contrast(4)] * 4, skip_independent=False)
    perm = list(perm)
    pdesign = BernoulliDesign(tuple(p[k] for k in perm))
    ppipe = Pipeline.build(pdesign, sutva_spaces(4), [global_contrast(4)] * 4, skip_independent=False)
    z = (rng.random(4) < 0.5).astype(float)
    y = rng.normal(size=4)
    assert pipe.variance(z, y).value == pytest.approx(ppipe.variance(z[perm], y[perm]).value, rel=1e-10, abs=1e-12)


def test_threaded_bound_matches_serial(monkeypatch):
    cfg = scenario("linear_in_means_global")
    serial = build_pipeline(cfg).bound
    monkeypatch.setenv("RIESZ_LAB_THREADS", "3")
    threaded = build_pipeline(cfg).bound
    for pair in serial.bound_values:
        assert np.array_equal(serial.bound_values[pair], threaded.bound_values[pair])
