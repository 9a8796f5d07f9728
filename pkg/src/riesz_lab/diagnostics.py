"""Precision diagnostics for the Riesz estimator.

The variance-characterising matrix ``H`` is indexed by ``(unit, orthonormal
row)`` pairs, flattened unit-major over each unit's orthonormal rows in
ascending order (null rows carry no variance and are left out). With outcome
coordinates ``a_il = <y_i, rho_il>`` and ``alpha = a / sqrt(n)``,
``alpha' H alpha = n Var(tau_hat)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import numpy.typing as npt

from .designs import MomentProvider
from .errors import InexactMoments, InvalidConjugatePair, LengthMismatch, NoExactRoute
from .orthogonalization import OrthoBasis
from .riesz import RieszRepresentor

FloatArray = npt.NDArray[np.float64]


@dataclass(frozen=True, eq=False)
class VarianceMatrix:
    H: FloatArray
    index: tuple[tuple[int, int], ...]
    eigenvalues: FloatArray
    eigenvectors: FloatArray
    factor: FloatArray
    n: int

    @property
    def top_eigenvector(self) -> FloatArray:
        return self.eigenvectors[:, -1]


def variance_matrix(
    orthos: Sequence[OrthoBasis],
    reps: Sequence[RieszRepresentor],
    provider: MomentProvider,
    independent: set[tuple[int, int]] | frozenset = frozenset(),
) -> VarianceMatrix:
    """``H[(i,l),(j,k)] = Cov(rho_il psi_i, rho_jk psi_j)``.

    Blocks for pairs listed in ``independent`` are zero and not computed.
    """
    if not provider.exact:
        raise InexactMoments("the variance matrix needs exact moments")
    n = len(orthos)
    rows = [list(o.ortho_index) for o in orthos]
    offsets = np.cumsum([0] + [len(r) for r in rows])
    H = np.zeros((offsets[-1], offsets[-1]))
    # E[rho_il psi_i] for every unit
    means = [o.coefficients[r] @ (o.gram @ rep.coefficients) for o, rep, r in zip(orthos, reps, rows)]
    for i in range(n):
        for j in range(i, n):
            if (i, j) in independent or not rows[i] or not rows[j]:
                continue
            M = provider.product_gram(orthos[i].space.basis, orthos[j].space.basis)
            Ai = orthos[i].coefficients[rows[i]]
            Aj = orthos[j].coefficients[rows[j]]
            second = np.einsum("lr,kq,p,s,rqps->lk", Ai, Aj, reps[i].coefficients, reps[j].coefficients, M)
            block = second - np.outer(means[i], means[j])
            H[offsets[i] : offsets[i + 1], offsets[j] : offsets[j + 1]] = block
            H[offsets[j] : offsets[j + 1], offsets[i] : offsets[i + 1]] = block.T
    if not np.all(np.isfinite(H)):
        raise NoExactRoute("non-finite variance-matrix entries; variance may be unbounded")
    H = 0.5 * (H + H.T)
    eigvals, eigvecs = np.linalg.eigh(H)
    factor = np.sqrt(np.clip(eigvals, 0.0, None))[:, None] * eigvecs.T
    index = tuple((i, k) for i, r in enumerate(rows) for k in r)
    return VarianceMatrix(H, index, eigvals, eigvecs, factor, n)


def outcome_coordinates(orthos: Sequence[OrthoBasis], truth: Sequence[npt.ArrayLike]) -> FloatArray:
    """Flattened orthonormal coordinates ``a_il`` of outcomes given in basis coefficients."""
    if len(truth) != len(orthos):
        raise LengthMismatch("one coefficient vector per unit is required")
    return np.concatenate(
        [o.orthonormal_coordinates(t)[list(o.ortho_index)] for o, t in zip(orthos, truth)]
    )


def exact_variance_quadratic(vm: VarianceMatrix | FloatArray, coordinates: npt.ArrayLike, n: int | None = None) -> float:
    """``Var(tau_hat) = alpha' H alpha / n`` with ``alpha = coordinates / sqrt(n)``."""
    H = vm.H if isinstance(vm, VarianceMatrix) else np.asarray(vm, dtype=np.float64)
    n = vm.n if isinstance(vm, VarianceMatrix) else n
    a = np.asarray(coordinates, dtype=np.float64)
    if a.shape != (H.shape[0],):
        raise LengthMismatch(f"expected {H.shape[0]} coordinates, got shape {a.shape}")
    alpha = a / math.sqrt(n)
    return float(alpha @ H @ alpha) / n


def operator_norm(H: VarianceMatrix | FloatArray) -> float:
    if isinstance(H, VarianceMatrix):
        top = float(H.eigenvalues[-1]) if H.eigenvalues.size else 0.0
    else:
        H = np.asarray(H, dtype=np.float64)
        top = float(np.linalg.eigvalsh(H)[-1]) if H.size else 0.0
    return math.sqrt(max(top, 0.0))


def worst_case_rmse(opnorm: float, C: float, n: int) -> float:
    """Worst-case RMSE over outcomes with mean-square norm at most ``C``."""
    return C * opnorm / math.sqrt(n)


def max_p_norm(functions: Sequence, provider: MomentProvider, p: float) -> float:
    """``max_i E[|f_i(Z)|^p]^(1/p)``; ``functions`` are ``(callable, support)`` pairs."""
    vals = []
    for fn, support in functions:
        m = provider.expect(lambda z, fn=fn: np.abs(fn(z)) ** p, support)
        m = m.value if hasattr(m, "value") else m
        vals.append(max(m, 0.0) ** (1.0 / p))
    return max(vals) if vals else 0.0


def consistency_bound(
    davg: float, maxp_outcome: float, maxq_rep: float, n: int, p: float, q: float, variance_variant: bool = False
) -> float:
    """``n^-1/2 davg^1/2 ||y||_{max,p} ||psi||_{max,q}`` for ``1/p + 1/q = 1/2``.

    With ``variance_variant`` the pair must instead satisfy ``p >= 4``,
    ``q >= 2`` and ``1/p + 1/(2q) = 1/4`` (the conditions used for the
    variance estimator); the returned quantity is unchanged.
    """
    if variance_variant:
        ok = p >= 4 and q >= 2 and abs(1.0 / p + 1.0 / (2.0 * q) - 0.25) <= 1e-12
    else:
        ok = abs(1.0 / p + 1.0 / q - 0.5) <= 1e-12
    if not ok:
        raise InvalidConjugatePair(f"(p, q) = ({p}, {q}) violates the exponent condition")
    return math.sqrt(davg) * maxp_outcome * maxq_rep / math.sqrt(n)


@dataclass
class DiagnosticsReport:
    n: int
    operator_norm: float
    davg: float
    dmax: int
    savg: float
    outcome_max_p: float | None = None
    representor_max_q: float | None = None
    p: float = 4.0
    q: float = 4.0
    consistency_rmse_bound: float | None = None
    worst_case_rmse: float | None = None
    mean_square_norm: float | None = None
    exact_rmse: float | None = None
    nondegenerate: bool | None = None
    asymptotic_ratios: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}
