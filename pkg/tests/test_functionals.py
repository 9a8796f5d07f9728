import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from riesz_lab.designs import BernoulliDesign
from riesz_lab.errors import IndexOutOfRange, LengthMismatch, NonDifferentiable
from riesz_lab.functionals import (
    Coefficient,
    Contrast,
    Derivative,
    DesignDerivative,
    Integration,
    apply,
    apply_to_basis,
    global_contrast,
    indirect_contrast,
)
from riesz_lab.model_spaces import (
    BasisFunction,
    ModelSpace,
    cycle_graph,
    linear_in_means_spaces,
    polynomial_space,
    sutva_linear_space,
    sutva_space,
)


def test_contrast_on_sutva():
    assert apply(Contrast([1.0], [0.0]), sutva_space(0), [3.0, 5.0]) == -2.0


def test_coefficient_picks_slope():
    assert apply(Coefficient([0.0, 1.0]), sutva_linear_space(0), [5.0, -2.0]) == -2.0


@pytest.mark.parametrize("k, expected", [(2, 2.0), (4, -4.0)])
def test_chebyshev_derivative_values(k, expected):
    # one-based basis index k is U_{k-1}
    space = polynomial_space(0, 6)
    assert apply_to_basis(Derivative([0.0], [1.0]), space, k - 1) == pytest.approx(expected, abs=1e-12)


def test_chebyshev_derivative_closed_form():
    space = polynomial_space(0, 12)
    vals = Derivative([0.0], [1.0]).basis_values(space)
    for m in range(13):
        k = m + 1
        assert vals[m] == pytest.approx(-k * math.cos(math.pi * k / 2), abs=1e-9)


def test_integration_reduces_to_contrast():
    measure = Integration([[1.0], [0.0]], [1.0, -1.0])
    assert apply_to_basis(measure, sutva_space(0), 0) == 1.0


def test_design_derivative_of_treatment_probability():
    fn = DesignDerivative(lambda p: BernoulliDesign.uniform(1, p), 0.5, 1e-4)
    assert apply_to_basis(fn, sutva_space(0), 0) == pytest.approx(1.0, abs=1e-8)


def test_direct_effect_measure():
    pts = [[1.0, 1.0], [1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]
    measure = Integration(pts, [0.5, 0.5, -0.5, -0.5])
    space = ModelSpace(0, (sutva_space(0).basis[0],))
    assert apply_to_basis(measure, space, 0) == pytest.approx(1.0, abs=1e-15)


def test_length_and_index_errors():
    with pytest.raises(LengthMismatch):
        apply(Contrast([1.0], [0.0]), sutva_space(0), [1.0])
    with pytest.raises(LengthMismatch):
        Coefficient([1.0]).basis_values(sutva_space(0))
    with pytest.raises(IndexOutOfRange):
        apply_to_basis(Contrast([1.0], [0.0]), sutva_space(0), 5)
    with pytest.raises(LengthMismatch):
        Integration([[1.0], [0.0]], [1.0])


def test_nondifferentiable_without_fallback():
    step = BasisFunction("step", lambda z: (z[:, 0] > 0).astype(float), {0})
    space = ModelSpace(0, (step,))
    with pytest.raises(NonDifferentiable):
        Derivative([0.5], [1.0], finite_difference=False).basis_values(space)
    assert Derivative([0.5], [1.0]).basis_values(space)[0] == 0.0


def test_indirect_contrast_on_linear_in_means():
    spaces = linear_in_means_spaces(cycle_graph(5))
    theta = indirect_contrast(0, 5)
    # constant, own treatment, neighbour share
    assert np.allclose(theta.basis_values(spaces[0]), [0.0, 0.0, 1.0])
    assert np.allclose(global_contrast(5).basis_values(spaces[0]), [0.0, 1.0, 1.0])


def test_evaluation_functional():
    f = Integration.evaluation([0.5])
    assert np.allclose(f.basis_values(polynomial_space(0, 2)), [1.0, 1.0, 0.0])


def test_finite_difference_matches_analytic():
    space = polynomial_space(0, 12, "monomial")
    for x in (0.0, 0.35, -0.8):
        analytic = Derivative([x], [1.0]).basis_values(space)
        stripped = ModelSpace(0, tuple(BasisFunction(b.identity, b.fn, b.support) for b in space.basis))
        numeric = Derivative([x], [1.0]).basis_values(stripped)
        assert np.allclose(numeric, analytic, rtol=1e-6, atol=1e-6)


coef = st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3)


@settings(max_examples=60, deadline=None)
@given(coef, coef, st.floats(-100, 100))
def test_linearity(a, b, lam):
    space = linear_in_means_spaces(cycle_graph(4))[1]
    a, b = np.array(a), np.array(b)
    for theta in (global_contrast(4), Coefficient([0.0, 1.0, -1.0]), Derivative(np.zeros(4), np.ones(4))):
        scale = 1.0 + np.abs(a).sum() + np.abs(b).sum()
        assert apply(theta, space, a + b) == pytest.approx(apply(theta, space, a) + apply(theta, space, b), abs=1e-12 * scale)
        assert apply(theta, space, lam * a) == pytest.approx(lam * apply(theta, space, a), abs=1e-12 * scale * (1 + abs(lam)))
