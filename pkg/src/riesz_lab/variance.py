"""Conservative variance estimation for the Riesz estimator.

Tensors on ``M_i (x) M_j`` are handled through their values on the product
basis ``phi_ip (x) phi_jq``, i.e. as ``(d_i, d_j)`` arrays; a simple tensor
``u (x) v`` with basis coefficients ``a`` and ``b`` is ``outer(a, b)``.

Work is done once per unordered pair ``i <= j``. Bound functionals and
second-order representors are symmetric (``B_ji(v (x) u) = B_ij(u (x) v)``),
so off-diagonal pairs enter every sum twice.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Sequence

import numpy as np
import numpy.typing as npt

from .designs import Design, MomentProvider
from .errors import DependenceUnknown, InexactMoments, InvalidAlpha, LengthMismatch, PositivityViolated
from .model_spaces import ModelSpace, independent_pairs
from .orthogonalization import DEFAULT_TOL, OrthoBasis, TensorOrthoBasis, second_order_gram_schmidt
from .positivity import FUNCTIONAL_RTOL, PositivityReport, test_second_order_positivity
from .riesz import RieszRepresentor

FloatArray = npt.NDArray[np.float64]
Pair = tuple[int, int]


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("RIESZ_LAB_THREADS", "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# Functional values on the product basis
# ---------------------------------------------------------------------------


def variance_functional_values(
    rep_i: RieszRepresentor,
    rep_j: RieszRepresentor,
    moments: FloatArray,
    gram_i: FloatArray,
    gram_j: FloatArray,
) -> FloatArray:
    """``theta_ij(phi_ip (x) phi_jq) = Cov(psi_i phi_ip, psi_j phi_jq)``.

    ``moments[a, b, c, e] = E[phi_ia phi_jb phi_ic phi_je]``; ``gram_*`` are
    the unit Gram matrices.
    """
    bi, bj = rep_i.coefficients, rep_j.coefficients
    second = np.einsum("r,s,rspq->pq", bi, bj, moments)
    return second - np.outer(bi @ gram_i, bj @ gram_j)


def variance_functional_value(
    rep_i: RieszRepresentor,
    rep_j: RieszRepresentor,
    tensor: npt.ArrayLike,
    provider: MomentProvider,
) -> float:
    """``theta_ij`` on a tensor given by product-basis coefficients ``(d_i, d_j)``."""
    if not provider.exact:
        raise InexactMoments("variance functionals need exact moments")
    moments = provider.product_gram(rep_i.space.basis, rep_j.space.basis)
    values = variance_functional_values(
        rep_i, rep_j, moments, provider.gram(rep_i.space.basis), provider.gram(rep_j.space.basis)
    )
    return float(np.sum(values * np.asarray(tensor, dtype=np.float64)))


def elementary_values(
    ortho_i: OrthoBasis,
    ortho_j: OrthoBasis,
    rep_i: RieszRepresentor,
    rep_j: RieszRepresentor,
    moments: FloatArray,
) -> FloatArray:
    """``V[k, l, p, q] = b_ik b_jl Cov(rho_ik phi_ip, rho_jl phi_jq)``.

    ``b`` are the representors' orthonormal weights ``theta(rho_k)``;
    summing over ``(k, l)`` gives :func:`variance_functional_values`.
    """
    Ai, Aj = ortho_i.coefficients, ortho_j.coefficients
    cross = np.einsum("kr,ls,rspq->klpq", Ai, Aj, moments)
    mi = Ai @ ortho_i.gram
    mj = Aj @ ortho_j.gram
    cov = cross - mi[:, None, :, None] * mj[None, :, None, :]
    return rep_i.ortho_weights[:, None, None, None] * rep_j.ortho_weights[None, :, None, None] * cov


def diagonal_raw_values(ortho: OrthoBasis, moments: FloatArray) -> FloatArray:
    """``D[k, p, q] = E[rho_k^2 phi_p phi_q]`` (pair ``(i, i)`` moments)."""
    A = ortho.coefficients
    return np.einsum("kr,ks,rspq->kpq", A, A, moments)


def _null_values(tortho: TensorOrthoBasis, values: FloatArray) -> FloatArray:
    """Values of a stack of tensor functionals ``(..., d_i, d_j)`` on the null rows."""
    null = tortho.coefficients[list(tortho.null_index)]
    flat = values.reshape(*values.shape[:-2], -1)
    return flat @ null.T


def _positive_mask(tortho: TensorOrthoBasis, values: FloatArray) -> npt.NDArray[np.bool_]:
    """Second-order positivity for each functional in a stack ``(..., d_i, d_j)``."""
    lead = values.shape[:-2]
    if not tortho.null_index:
        return np.ones(lead, dtype=bool)
    on_null = _null_values(tortho, values)
    scale = np.abs(values.reshape(*lead, -1)).max(axis=-1)
    tol = FUNCTIONAL_RTOL * (1.0 + scale)
    return np.all(np.abs(on_null) <= tol[..., None], axis=-1)


# ---------------------------------------------------------------------------
# Pair analysis and bound assembly
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PairAnalysis:
    pair: Pair
    tortho: TensorOrthoBasis
    variance_values: FloatArray
    elementary: FloatArray
    positive: npt.NDArray[np.bool_]
    diagonal_raw: FloatArray | None = None
    diagonal_raw_positive: npt.NDArray[np.bool_] | None = None
    # b_ik^2: V_iikk(u (x) u) = b_ik^2 Var(rho_ik u) <= b_ik^2 D_ik(u (x) u)
    raw_scale: FloatArray | None = None


def analyse_pair(
    i: int,
    j: int,
    orthos: Sequence[OrthoBasis],
    reps: Sequence[RieszRepresentor],
    provider: MomentProvider,
    tol: float = DEFAULT_TOL,
) -> PairAnalysis:
    tortho = second_order_gram_schmidt(orthos[i].space, orthos[j].space, provider, tol)
    M = tortho.moments
    theta = variance_functional_values(reps[i], reps[j], M, orthos[i].gram, orthos[j].gram)
    V = elementary_values(orthos[i], orthos[j], reps[i], reps[j], M)
    pos = classify_elementary(tortho, V)
    D = Dpos = scale = None
    if i == j:
        D = diagonal_raw_values(orthos[i], M)
        Dpos = _positive_mask(tortho, D)
        scale = reps[i].ortho_weights**2
    return PairAnalysis((i, j), tortho, theta, V, pos, D, Dpos, scale)


def classify_elementary(tortho: TensorOrthoBasis, elementary: FloatArray) -> npt.NDArray[np.bool_]:
    """``Pos[k, l]``: whether ``V_{i,j,k,l}`` satisfies second-order positivity."""
    return _positive_mask(tortho, elementary)


@dataclass(frozen=True, eq=False)
class VarianceBoundSpec:
    """Assembled variance bound.

    ``bound_values[(i, j)]`` (``i <= j``) is ``B_ij`` on the product basis;
    ``terms[(i, j)]`` lists its pieces as ``("V", k, l, weight)`` or
    ``("D", k, k, weight)``.
    """

    n: int
    analyses: dict[Pair, PairAnalysis]
    skipped: frozenset[Pair]
    q_counts: list[npt.NDArray[np.int64]]
    diagonal_positive: list[npt.NDArray[np.bool_]]
    bound_values: dict[Pair, FloatArray]
    terms: dict[Pair, list[tuple[str, int, int, float]]]

    @property
    def sum_q(self) -> int:
        return int(sum(int(q.sum()) for q in self.q_counts))

    def positive_set(self, i: int, j: int) -> npt.NDArray[np.bool_]:
        """``Pos_ij`` for an ordered pair (all True for skipped pairs)."""
        if i <= j:
            key, flip = (i, j), False
        else:
            key, flip = (j, i), True
        if key in self.analyses:
            pos = self.analyses[key].positive
            return pos.T if flip else pos
        if key in self.skipped:
            return np.ones((len(self.q_counts[i]), len(self.q_counts[j])), dtype=bool)
        raise KeyError((i, j))

    def bound_value(self, truth: Sequence[npt.ArrayLike]) -> float:
        """``n^-2 sum_ij B_ij(y_i (x) y_j)`` for outcomes with basis coefficients ``truth``."""
        parts = []
        for (i, j), F in self.bound_values.items():
            val = float(np.asarray(truth[i], float) @ F @ np.asarray(truth[j], float))
            parts.append(val if i == j else 2.0 * val)
        return math.fsum(parts) / self.n**2

    def variance_value(self, truth: Sequence[npt.ArrayLike]) -> float:
        """``n^-2 sum_ij theta_ij(y_i (x) y_j)`` over the analysed pairs."""
        parts = []
        for (i, j), a in self.analyses.items():
            val = float(np.asarray(truth[i], float) @ a.variance_values @ np.asarray(truth[j], float))
            parts.append(val if i == j else 2.0 * val)
        return math.fsum(parts) / self.n**2


def assemble_bound(analyses: dict[Pair, PairAnalysis], n: int, skipped: frozenset[Pair] = frozenset()) -> VarianceBoundSpec:
    """Collect positive elementary functionals and transfer the rest onto diagonals.

    ``Q_ik`` counts ordered ``(j, l)`` with ``(k, l)`` outside ``Pos_ij``;
    skipped pairs have identically zero covariance and count as positive.
    """
    dims: dict[int, int] = {}
    for (i, j), a in analyses.items():
        dims[i], dims[j] = a.positive.shape
    for i in range(n):
        if i not in dims:
            raise ValueError(f"unit {i} has no analysed diagonal pair")
    q = [np.zeros(dims[i], dtype=np.int64) for i in range(n)]
    for (i, j), a in analyses.items():
        missing = ~a.positive
        q[i] += missing.sum(axis=1)
        if i != j:
            q[j] += missing.sum(axis=0)
    dpos = []
    for i in range(n):
        pos = analyses[(i, i)].positive
        dpos.append(np.diag(pos).copy())

    bounds: dict[Pair, FloatArray] = {}
    terms: dict[Pair, list[tuple[str, int, int, float]]] = {}
    for (i, j), a in analyses.items():
        F = np.einsum("kl,klpq->pq", a.positive.astype(float), a.elementary)
        pieces = [("V", int(k), int(l), 1.0) for k, l in zip(*np.nonzero(a.positive))]
        if i == j:
            for k in range(dims[i]):
                if q[i][k] == 0:
                    continue
                if dpos[i][k]:
                    F = F + q[i][k] * a.elementary[k, k]
                    pieces.append(("V", k, k, float(q[i][k])))
                else:
                    w = float(q[i][k] * a.raw_scale[k])
                    F = F + w * a.diagonal_raw[k]
                    pieces.append(("D", k, k, w))
        bounds[(i, j)] = F
        terms[(i, j)] = pieces
    return VarianceBoundSpec(n, analyses, frozenset(skipped), q, dpos, bounds, terms)


def second_order_neighbor_skip(spaces: Sequence[ModelSpace], design: Design) -> frozenset[Pair]:
    """Unordered pairs ``i <= j`` whose spaces are design-independent.

    For such pairs ``psi_i u`` and ``psi_j v`` are independent, so the
    covariance functional vanishes identically. Designs without declared
    independence structure skip nothing.
    """
    try:
        indep = independent_pairs(spaces, design)
    except DependenceUnknown:
        return frozenset()
    return frozenset((i, j) for i, j in indep if i <= j)


def build_variance_bound(
    orthos: Sequence[OrthoBasis],
    reps: Sequence[RieszRepresentor],
    provider: MomentProvider,
    skipped: frozenset[Pair] = frozenset(),
    tol: float = DEFAULT_TOL,
    workers: int | None = None,
) -> VarianceBoundSpec:
    if not provider.exact:
        raise InexactMoments("variance bound construction needs exact moments")
    n = len(orthos)
    pairs = [(i, j) for i in range(n) for j in range(i, n) if (i, j) not in skipped or i == j]
    workers = workers or worker_count()

    def run(pair: Pair) -> PairAnalysis:
        return analyse_pair(pair[0], pair[1], orthos, reps, provider, tol)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(run, pairs))
    else:
        results = [run(p) for p in pairs]
    analyses = dict(zip(pairs, results))
    return assemble_bound(analyses, n, frozenset(p for p in skipped if p[0] != p[1]))


# ---------------------------------------------------------------------------
# Second-order representors and the estimator
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SecondOrderRepresentor:
    """``psi_ij(z) = sum_pq coefficients[p, q] phi_ip(z) phi_jq(z)``."""

    pair: Pair
    space_i: ModelSpace
    space_j: ModelSpace
    coefficients: FloatArray

    def __call__(self, z: npt.ArrayLike) -> FloatArray:
        z = np.asarray(z, dtype=np.float64)
        vi = np.atleast_2d(self.space_i.evaluate(z))
        vj = np.atleast_2d(self.space_j.evaluate(z))
        out = np.einsum("np,pq,nq->n", vi, self.coefficients, vj)
        return out[0] if z.ndim == 1 else out


def build_second_order_representor(
    bound_values: npt.ArrayLike, tortho: TensorOrthoBasis, force: bool = False
) -> SecondOrderRepresentor:
    """``psi = sum_{r in ortho} B(sigma_r) sigma_r`` over the tensor basis."""
    F = np.asarray(bound_values, dtype=np.float64)
    report = test_second_order_positivity(tortho, F)
    if not report.holds and not force:
        raise PositivityViolated(f"bound functional for pair {tortho.pair} fails second-order positivity", report)
    rows = tortho.coefficients[list(tortho.ortho_index)]
    weights = rows @ F.reshape(-1)
    coef = (rows.T @ weights).reshape(tortho.shape)
    return SecondOrderRepresentor(tortho.pair, tortho.space_i, tortho.space_j, coef)


def second_order_representors(spec: VarianceBoundSpec) -> dict[Pair, SecondOrderRepresentor]:
    return {
        pair: build_second_order_representor(spec.bound_values[pair], a.tortho)
        for pair, a in spec.analyses.items()
    }


@dataclass(frozen=True)
class VarianceEstimate:
    """``value = n^-2 * sum(terms)``; off-diagonal terms already carry weight 2."""

    value: float
    terms: dict[Pair, float]
    skipped: frozenset[Pair] = field(default_factory=frozenset)

    def to_dict(self) -> dict:
        return {"variance_estimate": self.value, "pairs": len(self.terms), "skipped_pairs": len(self.skipped)}


def variance_estimate(
    so_reps: dict[Pair, SecondOrderRepresentor],
    assignment: npt.ArrayLike,
    outcomes: npt.ArrayLike,
    skipped: frozenset[Pair] = frozenset(),
) -> VarianceEstimate:
    z = np.asarray(assignment, dtype=np.float64)
    y = np.asarray(outcomes, dtype=np.float64)
    n = y.size
    units = {u for pair in so_reps for u in pair}
    if units and max(units) >= n:
        raise LengthMismatch(f"representors reference unit {max(units)} but only {n} outcomes given")
    terms = {}
    for (i, j), rep in so_reps.items():
        mult = 1.0 if i == j else 2.0
        terms[(i, j)] = mult * float(rep(z)) * y[i] * y[j]
    return VarianceEstimate(math.fsum(terms.values()) / n**2, terms, frozenset(skipped))


def variance_estimates(
    so_reps: dict[Pair, SecondOrderRepresentor], Z: npt.ArrayLike, Y: npt.ArrayLike
) -> FloatArray:
    """Batch version: ``V_hat`` for each row of ``Z`` with outcomes ``Y`` (both ``(N, .)``)."""
    Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    n = Y.shape[1]
    total = np.zeros(Z.shape[0])
    for (i, j), rep in so_reps.items():
        mult = 1.0 if i == j else 2.0
        total += mult * rep(Z) * Y[:, i] * Y[:, j]
    return total / n**2


@dataclass(frozen=True)
class ConfidenceInterval:
    center: float
    radius: float
    alpha: float
    clamped: bool

    @property
    def lower(self) -> float:
        return self.center - self.radius

    @property
    def upper(self) -> float:
        return self.center + self.radius

    def to_dict(self) -> dict:
        return {
            "center": self.center,
            "radius": self.radius,
            "lower": self.lower,
            "upper": self.upper,
            "alpha": self.alpha,
            "clamped": self.clamped,
        }


def normal_quantile(alpha: float) -> float:
    if not 0.0 < alpha < 1.0:
        raise InvalidAlpha(f"alpha must lie in (0, 1), got {alpha}")
    return NormalDist().inv_cdf(1.0 - alpha / 2.0)


def confidence_interval(estimate: float, variance: float, alpha: float = 0.05) -> ConfidenceInterval:
    """Wald interval ``estimate +- z_{1-alpha/2} sqrt(max(variance, 0))``."""
    z = normal_quantile(alpha)
    clamped = variance < 0.0
    return ConfidenceInterval(float(estimate), z * math.sqrt(max(variance, 0.0)), alpha, clamped)
