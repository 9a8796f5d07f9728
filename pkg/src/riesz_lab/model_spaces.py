"""Per-unit model spaces and dependency neighbourhoods.

Basis functions are vectorised: they take an ``(N, m)`` array of assignments
and return ``N`` values. Each one declares the coordinates it may read
(``support``), which is what neighbourhood computations and the exact moment
route rely on. Basis indices are zero-based throughout.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import numpy.typing as npt

from .designs import Design
from .errors import DependenceUnknown, IndexOutOfRange

FloatArray = npt.NDArray[np.float64]


@dataclass(frozen=True, eq=False)
class BasisFunction:
    """A named function of the assignment that only reads ``support``.

    ``derivative(Z, c)``, when given, returns the partial derivative with
    respect to coordinate ``c`` at each row of ``Z``.
    """

    identity: str
    fn: Callable[[FloatArray], FloatArray]
    support: frozenset[int]
    derivative: Callable[[FloatArray, int], FloatArray] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "support", frozenset(int(c) for c in self.support))

    def __call__(self, z: npt.ArrayLike) -> FloatArray:
        z = np.asarray(z, dtype=np.float64)
        if z.ndim == 1:
            return np.asarray(self.fn(z[None, :]), dtype=np.float64).reshape(-1)[0]
        out = np.asarray(self.fn(z), dtype=np.float64)
        return np.broadcast_to(out, (z.shape[0],)).copy() if out.ndim == 0 else out

    def __repr__(self) -> str:
        return f"BasisFunction({self.identity!r}, support={sorted(self.support)})"


@dataclass(frozen=True, eq=False)
class ModelSpace:
    unit: int
    basis: tuple[BasisFunction, ...]

    def __post_init__(self) -> None:
        basis = tuple(self.basis)
        if not basis:
            raise ValueError("a model space needs at least one basis function")
        ids = [b.identity for b in basis]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate basis identities in space for unit {self.unit}: {ids}")
        object.__setattr__(self, "basis", basis)

    @property
    def dimension(self) -> int:
        return len(self.basis)

    @property
    def support(self) -> frozenset[int]:
        return frozenset().union(*(b.support for b in self.basis))

    def evaluate(self, z: npt.ArrayLike) -> FloatArray:
        """Basis values; ``(d,)`` for one assignment, ``(N, d)`` for a batch."""
        z = np.asarray(z, dtype=np.float64)
        batch = np.atleast_2d(z)
        values = np.column_stack([b(batch) for b in self.basis])
        return values[0] if z.ndim == 1 else values

    def combine(self, coefficients: npt.ArrayLike, z: npt.ArrayLike) -> FloatArray:
        """Value of ``sum_k coefficients[k] * phi_k`` at ``z``."""
        return self.evaluate(z) @ np.asarray(coefficients, dtype=np.float64)


def evaluate_basis(space: ModelSpace, k: int, assignment: npt.ArrayLike) -> float:
    if not 0 <= k < space.dimension:
        raise IndexOutOfRange(f"basis index {k} outside [0, {space.dimension})")
    return float(space.basis[k](np.asarray(assignment, dtype=np.float64)))


# ---------------------------------------------------------------------------
# Built-in constructors
# ---------------------------------------------------------------------------


def constant() -> BasisFunction:
    return BasisFunction("const", lambda z: np.ones(z.shape[0]), frozenset(), lambda z, c: np.zeros(z.shape[0]))


def coordinate(i: int) -> BasisFunction:
    return BasisFunction(
        f"z[{i}]",
        lambda z: z[:, i],
        {i},
        lambda z, c: np.full(z.shape[0], 1.0 if c == i else 0.0),
    )


def sutva_space(i: int) -> ModelSpace:
    """Indicators of treatment and control for unit ``i``."""
    treated = BasisFunction(f"treated[{i}]", lambda z: (z[:, i] == 1.0).astype(float), {i})
    control = BasisFunction(f"control[{i}]", lambda z: (z[:, i] == 0.0).astype(float), {i})
    return ModelSpace(i, (treated, control))


def sutva_spaces(n: int) -> list[ModelSpace]:
    return [sutva_space(i) for i in range(n)]


def sutva_linear_space(i: int) -> ModelSpace:
    """The equivalent ``{1, z_i}`` parametrisation of the no-interference model."""
    return ModelSpace(i, (constant(), coordinate(i)))


def neighbour_mean(i: int, neighbours: Sequence[int]) -> BasisFunction:
    nb = sorted(int(j) for j in neighbours)
    if not nb:
        raise ValueError(f"unit {i} has no neighbours")
    weight = 1.0 / len(nb)

    def fn(z: FloatArray) -> FloatArray:
        return z[:, nb].mean(axis=1)

    def deriv(z: FloatArray, c: int) -> FloatArray:
        return np.full(z.shape[0], weight if c in nb else 0.0)

    return BasisFunction(f"nbmean[{i}:{','.join(map(str, nb))}]", fn, set(nb), deriv)


def linear_in_means_space(i: int, neighbours: Sequence[int]) -> ModelSpace:
    """Constant, own treatment, and share of treated neighbours."""
    return ModelSpace(i, (constant(), coordinate(i), neighbour_mean(i, neighbours)))


def linear_in_means_spaces(graph: Sequence[Sequence[int]]) -> list[ModelSpace]:
    return [linear_in_means_space(i, nb) for i, nb in enumerate(graph)]


def exposure_space(
    i: int,
    exposure: Callable[[FloatArray], FloatArray],
    levels: Sequence[int],
    support: Sequence[int],
    name: str = "exposure",
) -> ModelSpace:
    """Indicators ``1{e_i(z) = level}`` for each level of an exposure mapping."""

    def indicator(level: int) -> BasisFunction:
        return BasisFunction(
            f"{name}[{i}]={level}",
            lambda z: (exposure(z) == level).astype(float),
            set(support),
        )

    return ModelSpace(i, tuple(indicator(level) for level in levels))


def own_any_exposure_spaces(graph: Sequence[Sequence[int]]) -> list[ModelSpace]:
    """Exposure ``2 * z_i + 1{any neighbour treated}``, levels 0..3."""
    spaces = []
    for i, nb in enumerate(graph):
        nb = sorted(int(j) for j in nb)

        def exposure(z: FloatArray, i=i, nb=nb) -> FloatArray:
            anyn = (z[:, nb].sum(axis=1) > 0).astype(int) if nb else np.zeros(z.shape[0], int)
            return 2 * z[:, i].astype(int) + anyn

        spaces.append(exposure_space(i, exposure, range(4), [i, *nb], name="own_any"))
    return spaces


def own_count_exposure_spaces(graph: Sequence[Sequence[int]]) -> list[ModelSpace]:
    """Exposure ``(z_i, number of treated neighbours)`` encoded as ``z_i * (|N_i|+1) + count``."""
    spaces = []
    for i, nb in enumerate(graph):
        nb = sorted(int(j) for j in nb)
        width = len(nb) + 1

        def exposure(z: FloatArray, i=i, nb=nb, width=width) -> FloatArray:
            count = z[:, nb].sum(axis=1).astype(int) if nb else np.zeros(z.shape[0], int)
            return z[:, i].astype(int) * width + count

        spaces.append(exposure_space(i, exposure, range(2 * width), [i, *nb], name="own_count"))
    return spaces


def _chebyshev_u(k: int) -> np.polynomial.Polynomial:
    """Chebyshev polynomial of the second kind ``U_k`` in the power basis."""
    prev, cur = np.polynomial.Polynomial([1.0]), np.polynomial.Polynomial([0.0, 2.0])
    if k == 0:
        return prev
    for _ in range(k - 1):
        prev, cur = cur, np.polynomial.Polynomial([0.0, 2.0]) * cur - prev
    return cur


def polynomial_basis(i: int, k: int, family: str = "chebyshev") -> BasisFunction:
    if family == "chebyshev":
        poly, tag = _chebyshev_u(k), "chebU"
    elif family == "monomial":
        poly, tag = np.polynomial.Polynomial([0.0] * k + [1.0]), "mono"
    else:
        raise ValueError(f"unknown polynomial family {family!r}")
    dpoly = poly.deriv()

    def deriv(z: FloatArray, c: int) -> FloatArray:
        return dpoly(z[:, i]) if c == i else np.zeros(z.shape[0])

    return BasisFunction(f"{tag}{k}[{i}]", lambda z: poly(z[:, i]), {i}, deriv)


def polynomial_space(i: int, degree: int, family: str = "chebyshev") -> ModelSpace:
    """Polynomials of ``z_i`` up to ``degree`` (``U_0..U_degree`` for Chebyshev)."""
    return ModelSpace(i, tuple(polynomial_basis(i, k, family) for k in range(degree + 1)))


def cycle_graph(n: int) -> list[list[int]]:
    if n < 3:
        raise ValueError("a cycle needs at least three units")
    return [[(i - 1) % n, (i + 1) % n] for i in range(n)]


# ---------------------------------------------------------------------------
# Dependency neighbourhoods
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NeighborhoodSummary:
    neighborhoods: tuple[frozenset[int], ...]
    pair_sizes: npt.NDArray[np.int64]
    davg: float
    dmax: int
    savg: float
    conservative: bool = False


def _block_footprints(spaces: Sequence[ModelSpace], design: Design, conservative: bool) -> list[frozenset[int]]:
    blocks = design.independence_blocks()
    if blocks is None:
        if not conservative:
            raise DependenceUnknown(
                f"{type(design).__name__} declares no independence structure; "
                "pass conservative=True to treat every unit as dependent"
            )
        return [frozenset([0]) if s.support else frozenset() for s in spaces]
    owner = {c: b for b, block in enumerate(blocks) for c in block}
    return [frozenset(owner[c] for c in s.support) for s in spaces]


def dependency_neighborhoods(
    spaces: Sequence[ModelSpace], design: Design, conservative: bool = False
) -> NeighborhoodSummary:
    """Support-intersection neighbourhoods under the design's independence blocks.

    Two units are dependent when their spaces read coordinates from a common
    independence block. With ``conservative=True`` a design without declared
    structure makes every non-constant unit depend on every other one.
    """
    foot = _block_footprints(spaces, design, conservative)
    n = len(spaces)
    hoods = tuple(frozenset(j for j in range(n) if foot[i] & foot[j]) for i in range(n))
    adj = np.zeros((n, n), dtype=np.int64)
    for i, h in enumerate(hoods):
        adj[i, list(h)] = 1
    d = adj.sum(axis=1)
    # (r, s) misses S_ij iff neither r nor s is in D_i ∪ D_j
    union = d[:, None] + d[None, :] - adj @ adj.T
    sizes = n * n - (n - union) ** 2
    return NeighborhoodSummary(
        neighborhoods=hoods,
        pair_sizes=sizes,
        davg=float(d.mean()),
        dmax=int(d.max()),
        savg=float(sizes.mean()),
        conservative=design.independence_blocks() is None,
    )


def independent_pairs(spaces: Sequence[ModelSpace], design: Design) -> set[tuple[int, int]]:
    """Ordered pairs whose spaces are design-independent (empty block overlap)."""
    foot = _block_footprints(spaces, design, conservative=False)
    n = len(spaces)
    return {(i, j) for i, j in itertools.product(range(n), repeat=2) if not foot[i] & foot[j]}
