"""Effect functionals: linear maps from a unit's model space to the reals.

Every functional is fully described by its values on the basis functions,
``basis_values(space)``; applying it to a function given by basis
coefficients is then a dot product.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import numpy.typing as npt

from .designs import Design, MomentProvider
from .errors import IndexOutOfRange, LengthMismatch, NonDifferentiable
from .model_spaces import ModelSpace

FloatArray = npt.NDArray[np.float64]

STATE_STEP = 1e-5
DESIGN_STEP = 1e-4


class EffectFunctional:
    """Base class; subclasses implement :meth:`basis_values`."""

    def basis_values(self, space: ModelSpace) -> FloatArray:
        raise NotImplementedError

    def apply(self, space: ModelSpace, coefficients: npt.ArrayLike) -> float:
        return apply(self, space, coefficients)


@dataclass(frozen=True, eq=False)
class Contrast(EffectFunctional):
    """``f(treated) - f(control)``."""

    treated: FloatArray
    control: FloatArray

    def basis_values(self, space):
        pts = np.vstack([np.asarray(self.treated, float), np.asarray(self.control, float)])
        vals = space.evaluate(pts)
        return vals[0] - vals[1]


@dataclass(frozen=True, eq=False)
class Integration(EffectFunctional):
    """Integral against a finitely supported signed measure ``sum_s w_s delta_{z_s}``."""

    points: FloatArray
    weights: FloatArray

    def __post_init__(self) -> None:
        pts = np.atleast_2d(np.asarray(self.points, dtype=np.float64))
        w = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if pts.shape[0] != w.shape[0]:
            raise LengthMismatch("one weight per measure point is required")
        if not np.all(np.isfinite(w)):
            raise ValueError("measure weights must be finite")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @classmethod
    def evaluation(cls, point: npt.ArrayLike) -> "Integration":
        """Point evaluation ``f(point)``."""
        return cls(np.atleast_2d(point), np.ones(1))

    def basis_values(self, space):
        return self.weights @ space.evaluate(self.points)


@dataclass(frozen=True, eq=False)
class Coefficient(EffectFunctional):
    """Picks a weighted combination of basis coefficients: ``theta(phi_k) = weights[k]``."""

    weights: FloatArray

    def basis_values(self, space):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.shape != (space.dimension,):
            raise LengthMismatch(f"coefficient functional has {w.size} weights, space has {space.dimension}")
        return w.copy()


@dataclass(frozen=True, eq=False)
class Derivative(EffectFunctional):
    """Directional derivative ``sum_c direction[c] * d f / d z_c`` at ``point``.

    Uses each basis function's analytic ``derivative`` when available, and a
    central difference with ``step`` otherwise (unless ``finite_difference``
    is False, in which case :class:`NonDifferentiable` is raised).
    """

    point: FloatArray
    direction: FloatArray
    step: float = STATE_STEP
    finite_difference: bool = True

    def basis_values(self, space):
        point = np.asarray(self.point, dtype=np.float64)
        direction = np.asarray(self.direction, dtype=np.float64)
        out = np.zeros(space.dimension)
        for k, b in enumerate(space.basis):
            coords = [c for c in sorted(b.support) if direction[c] != 0.0]
            if b.derivative is not None:
                z = point[None, :]
                out[k] = sum(direction[c] * float(b.derivative(z, c)[0]) for c in coords)
            elif self.finite_difference:
                out[k] = sum(direction[c] * central_difference(b, point, c, self.step) for c in coords)
            else:
                raise NonDifferentiable(f"{b.identity} has no derivative and finite differences are disabled")
        return out


def central_difference(fn: Callable, point: FloatArray, coord: int, step: float = STATE_STEP) -> float:
    up, down = point.copy(), point.copy()
    up[coord] += step
    down[coord] -= step
    return (float(fn(up)) - float(fn(down))) / (2.0 * step)


@dataclass(frozen=True, eq=False)
class DesignDerivative(EffectFunctional):
    """Derivative of ``E_pi[f(Z)]`` along a one-parameter family of designs.

    ``(E_{at+h}[f] - E_{at-h}[f]) / (2h)`` with exact moments on both sides.
    """

    path: Callable[[float], Design]
    at: float
    step: float = DESIGN_STEP

    def basis_values(self, space):
        hi = MomentProvider(self.path(self.at + self.step)).means(space.basis)
        lo = MomentProvider(self.path(self.at - self.step)).means(space.basis)
        return (hi - lo) / (2.0 * self.step)


def apply_to_basis(functional: EffectFunctional, space: ModelSpace, k: int) -> float:
    if not 0 <= k < space.dimension:
        raise IndexOutOfRange(f"basis index {k} outside [0, {space.dimension})")
    return float(functional.basis_values(space)[k])


def apply(functional: EffectFunctional, space: ModelSpace, coefficients: npt.ArrayLike) -> float:
    a = np.asarray(coefficients, dtype=np.float64)
    if a.shape != (space.dimension,):
        raise LengthMismatch(f"expected {space.dimension} coefficients, got shape {a.shape}")
    return float(functional.basis_values(space) @ a)


# ---------------------------------------------------------------------------
# Common estimands
# ---------------------------------------------------------------------------


def global_contrast(dimension: int) -> Contrast:
    """All units treated versus none treated."""
    return Contrast(np.ones(dimension), np.zeros(dimension))


def indirect_contrast(i: int, dimension: int) -> Contrast:
    """Everyone but unit ``i`` treated versus none treated."""
    treated = np.ones(dimension)
    treated[i] = 0.0
    return Contrast(treated, np.zeros(dimension))


def gradient_sum(dimension: int, step: float = STATE_STEP) -> Derivative:
    """``1' grad f(0)``."""
    return Derivative(np.zeros(dimension), np.ones(dimension), step)
