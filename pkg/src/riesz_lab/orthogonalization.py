"""Modified Gram-Schmidt under the design inner product ``<f, g> = E[f(Z) g(Z)]``.

Functions are carried as coefficient vectors over a fixed generating family
(a unit's basis, or the products of two units' bases), so the whole procedure
runs on the Gram matrix of that family. Directions whose residual norm
vanishes are kept, unnormalised, as a spanning set of the design-null space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from .designs import MomentProvider
from .errors import InexactMoments
from .model_spaces import ModelSpace

FloatArray = npt.NDArray[np.float64]

DEFAULT_TOL = 1e-10


def modified_gram_schmidt(gram: FloatArray, tol: float = DEFAULT_TOL):
    """Orthonormalise the generating family described by ``gram``.

    Returns ``(A, ortho, null)``: row ``t`` of ``A`` holds the coefficients of
    the ``t``-th output function; ``ortho`` lists rows with unit norm and
    ``null`` rows whose residual norm fell below ``tol * max(1, E[g_t^2])``.
    """
    gram = np.asarray(gram, dtype=np.float64)
    d = gram.shape[0]
    A = np.zeros((d, d))
    ortho: list[int] = []
    null: list[int] = []
    for t in range(d):
        eta = np.zeros(d)
        eta[t] = 1.0
        # two projection passes; one pass drifts on nearly dependent families
        for _ in range(2):
            if ortho:
                Q = A[ortho]
                eta = eta - (Q @ (gram @ eta)) @ Q
        norm2 = float(eta @ gram @ eta)
        if norm2 > tol * max(1.0, gram[t, t]):
            A[t] = eta / np.sqrt(norm2)
            ortho.append(t)
        else:
            A[t] = eta
            null.append(t)
    return A, tuple(ortho), tuple(null)


@dataclass(frozen=True, eq=False)
class OrthoBasis:
    """Output of first-order orthogonalisation for one unit.

    ``coefficients[k]`` expresses ``rho_k = sum_s coefficients[k, s] * phi_s``;
    the matrix is lower triangular.
    """

    space: ModelSpace
    coefficients: FloatArray
    ortho_index: tuple[int, ...]
    null_index: tuple[int, ...]
    gram: FloatArray
    tol: float

    @property
    def dimension(self) -> int:
        return self.space.dimension

    def evaluate(self, z: npt.ArrayLike) -> FloatArray:
        """Values of every ``rho_k`` (rows of ``coefficients``) at ``z``."""
        return self.space.evaluate(z) @ self.coefficients.T

    def orthonormal_coordinates(self, basis_coefficients: npt.ArrayLike) -> FloatArray:
        """Coordinates ``<f, rho_k>`` of ``f = sum a_s phi_s``; zero on null rows."""
        a = np.asarray(basis_coefficients, dtype=np.float64)
        coords = self.coefficients @ (self.gram @ a)
        coords[list(self.null_index)] = 0.0
        return coords


@dataclass(frozen=True, eq=False)
class TensorOrthoBasis:
    """Output of second-order orthogonalisation for a pair of units.

    Product index ``r = l * d_j + k`` refers to ``phi_{i,l} * phi_{j,k}``;
    ``moments[a, b, c, e] = E[phi_ia phi_jb phi_ic phi_je]``.
    """

    pair: tuple[int, int]
    space_i: ModelSpace
    space_j: ModelSpace
    coefficients: FloatArray
    ortho_index: tuple[int, ...]
    null_index: tuple[int, ...]
    moments: FloatArray
    tol: float

    @property
    def shape(self) -> tuple[int, int]:
        return (self.space_i.dimension, self.space_j.dimension)

    @property
    def gram(self) -> FloatArray:
        d = self.shape[0] * self.shape[1]
        return self.moments.reshape(d, d)

    def product_values(self, z: npt.ArrayLike) -> FloatArray:
        vi = np.atleast_2d(self.space_i.evaluate(z))
        vj = np.atleast_2d(self.space_j.evaluate(z))
        return (vi[:, :, None] * vj[:, None, :]).reshape(vi.shape[0], -1)


def _require_exact(provider: MomentProvider) -> None:
    if not provider.exact:
        raise InexactMoments("orthogonalisation requires an exact moment provider")


def gram_schmidt(space: ModelSpace, provider: MomentProvider, tol: float = DEFAULT_TOL) -> OrthoBasis:
    _require_exact(provider)
    gram = provider.gram(space.basis)
    A, ortho, null = modified_gram_schmidt(gram, tol)
    return OrthoBasis(space, A, ortho, null, gram, tol)


def second_order_gram_schmidt(
    space_i: ModelSpace, space_j: ModelSpace, provider: MomentProvider, tol: float = DEFAULT_TOL
) -> TensorOrthoBasis:
    _require_exact(provider)
    moments = provider.product_gram(space_i.basis, space_j.basis)
    d = space_i.dimension * space_j.dimension
    A, ortho, null = modified_gram_schmidt(moments.reshape(d, d), tol)
    return TensorOrthoBasis((space_i.unit, space_j.unit), space_i, space_j, A, ortho, null, moments, tol)
