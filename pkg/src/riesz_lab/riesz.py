"""First-order Riesz representors and the point estimator."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import numpy.typing as npt

from .errors import LengthMismatch, PositivityViolated
from .functionals import EffectFunctional
from .model_spaces import ModelSpace
from .orthogonalization import OrthoBasis
from .positivity import test_positivity

FloatArray = npt.NDArray[np.float64]


@dataclass(frozen=True, eq=False)
class RieszRepresentor:
    """``psi_i = sum_l coefficients[l] * phi_{i,l}``.

    ``ortho_weights[k]`` is ``theta(rho_k)`` for orthonormal rows and zero on
    null rows; ``coefficients = A' ortho_weights``.
    """

    unit: int
    space: ModelSpace
    coefficients: FloatArray
    ortho_weights: FloatArray
    functional_values: FloatArray

    def __call__(self, z: npt.ArrayLike) -> FloatArray:
        return self.space.evaluate(z) @ self.coefficients


@dataclass(frozen=True)
class Estimate:
    value: float
    terms: FloatArray
    assignment: FloatArray
    outcomes: FloatArray

    def to_dict(self) -> dict:
        return {
            "estimate": self.value,
            "n": int(self.terms.size),
            "terms": self.terms.tolist(),
        }


def build_representor(
    ortho: OrthoBasis, functional: EffectFunctional | FloatArray, force: bool = False
) -> RieszRepresentor:
    """``psi = sum_{k in ortho} theta(rho_k) rho_k``, folded into basis coefficients.

    Raises :class:`PositivityViolated` unless positivity holds or ``force``.
    """
    values = (
        functional.basis_values(ortho.space)
        if isinstance(functional, EffectFunctional)
        else np.asarray(functional, dtype=np.float64)
    )
    report = test_positivity(ortho, values)
    if not report.holds and not force:
        raise PositivityViolated(
            f"unit {ortho.space.unit}: functional is nonzero on a design-null direction",
            report=report,
            unit=ortho.space.unit,
        )
    weights = np.zeros(ortho.dimension)
    idx = list(ortho.ortho_index)
    weights[idx] = ortho.coefficients[idx] @ values
    nz = np.flatnonzero(weights)
    beta = ortho.coefficients[nz].T @ weights[nz]
    return RieszRepresentor(ortho.space.unit, ortho.space, beta, weights, values)


def evaluate_representor(rep: RieszRepresentor, assignment: npt.ArrayLike) -> float:
    return float(rep(np.asarray(assignment, dtype=np.float64)))


def representor_matrix(reps: Sequence[RieszRepresentor], Z: npt.ArrayLike) -> FloatArray:
    """``(N, n)`` array of ``psi_i(Z_r)`` for a batch of assignments."""
    Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
    return np.column_stack([rep(Z) for rep in reps])


def point_estimate(
    reps: Sequence[RieszRepresentor], assignment: npt.ArrayLike, outcomes: npt.ArrayLike
) -> Estimate:
    z = np.asarray(assignment, dtype=np.float64)
    y = np.asarray(outcomes, dtype=np.float64)
    if y.shape != (len(reps),):
        raise LengthMismatch(f"{len(reps)} representors but outcomes of shape {y.shape}")
    terms = representor_matrix(reps, z)[0] * y
    return Estimate(float(terms.mean()), terms, z, y)


def plugin_outcome_estimate(
    ortho: OrthoBasis, functional: EffectFunctional | FloatArray, assignment: npt.ArrayLike, outcome: float
) -> tuple[FloatArray, float]:
    """Plug-in view: ``alpha_k = Y rho_k(Z)`` on orthonormal rows, effect ``sum alpha_k theta(rho_k)``."""
    values = (
        functional.basis_values(ortho.space)
        if isinstance(functional, EffectFunctional)
        else np.asarray(functional, dtype=np.float64)
    )
    idx = list(ortho.ortho_index)
    rho = ortho.evaluate(np.asarray(assignment, dtype=np.float64))[idx]
    alpha = float(outcome) * rho
    return alpha, float(alpha @ (ortho.coefficients[idx] @ values))
