"""Experimental designs and the moment providers built on top of them.

A design is the known law of the assignment vector ``Z``. Every design can be
sampled; the finite ones can also be enumerated, and all of them can expose the
exact joint law of a *subset* of coordinates (``marginal``), which is what lets
moments of basis functions with small supports be computed exactly even when
the full support is astronomically large.

Assignments are plain float arrays of length ``design.dimension``.
"""

from __future__ import annotations

import itertools
import math
import threading
from abc import ABC, abstractmethod
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np
import numpy.typing as npt

from .errors import DimensionTooLarge, NoExactRoute, UnsupportedDesign

FloatArray = npt.NDArray[np.float64]

DEFAULT_MAX_SUPPORT = 2**16
DEFAULT_MAX_GRID = 2**18
QUADRATURE_NODES = 64


def _binary_patterns(width: int) -> FloatArray:
    """All 0/1 rows of the given width in lexicographic order."""
    codes = np.arange(2**width, dtype=np.int64)[:, None]
    shifts = np.arange(width - 1, -1, -1, dtype=np.int64)
    return ((codes >> shifts) & 1).astype(np.float64)


# ---------------------------------------------------------------------------
# Per-coordinate continuous laws
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Semicircle:
    """Wigner semicircle law on ``[-radius, radius]``."""

    radius: float = 1.0

    def sample(self, rng: np.random.Generator, size: int) -> FloatArray:
        return self.radius * (2.0 * rng.beta(1.5, 1.5, size=size) - 1.0)

    def quadrature(self, nodes: int = QUADRATURE_NODES) -> tuple[FloatArray, FloatArray]:
        # Gauss quadrature for the weight sqrt(1 - x^2), normalised to a probability law.
        k = np.arange(1, nodes + 1)
        angle = k * np.pi / (nodes + 1)
        x = np.cos(angle)
        w = 2.0 / (nodes + 1) * np.sin(angle) ** 2
        return self.radius * x, w

    @property
    def bounds(self) -> tuple[float, float]:
        return (-self.radius, self.radius)


@dataclass(frozen=True)
class Uniform:
    low: float = 0.0
    high: float = 1.0

    def __post_init__(self) -> None:
        if not self.high > self.low:
            raise ValueError("uniform law needs high > low")

    def sample(self, rng: np.random.Generator, size: int) -> FloatArray:
        return rng.uniform(self.low, self.high, size=size)

    def quadrature(self, nodes: int = QUADRATURE_NODES) -> tuple[FloatArray, FloatArray]:
        x, w = np.polynomial.legendre.leggauss(nodes)
        half = 0.5 * (self.high - self.low)
        return self.low + half * (x + 1.0), w / 2.0

    @property
    def bounds(self) -> tuple[float, float]:
        return (self.low, self.high)


ContinuousLaw = Semicircle | Uniform


# ---------------------------------------------------------------------------
# Designs
# ---------------------------------------------------------------------------


class Design(ABC):
    """Base class for experimental designs."""

    dimension: int
    binary: bool = True
    enumerable: bool = True

    @abstractmethod
    def sample_many(self, seed: int, count: int) -> FloatArray:
        """Draw ``count`` assignments from one generator seeded with ``seed``."""

    def sample(self, seed: int) -> FloatArray:
        return self.sample_many(seed, 1)[0]

    @abstractmethod
    def marginal(
        self, coords: Sequence[int], max_points: int = DEFAULT_MAX_SUPPORT
    ) -> tuple[FloatArray, FloatArray]:
        """Exact joint law of ``Z[coords]`` as ``(points, probabilities)``."""

    def enumerate_support(
        self, max_points: int = DEFAULT_MAX_SUPPORT
    ) -> tuple[FloatArray, FloatArray]:
        """Full support with exact probabilities."""
        if not self.enumerable:
            raise UnsupportedDesign(f"{type(self).__name__} has no finite support")
        return self.marginal(range(self.dimension), max_points=max_points)

    def independence_blocks(self) -> list[frozenset[int]] | None:
        """Partition of coordinates into mutually independent groups, if known."""
        return None

    def validate_assignment(self, z: npt.ArrayLike) -> FloatArray:
        z = np.asarray(z, dtype=np.float64)
        if z.shape != (self.dimension,):
            raise ValueError(f"assignment must have length {self.dimension}, got shape {z.shape}")
        if self.binary and not np.all((z == 0.0) | (z == 1.0)):
            raise ValueError("binary design assignments must be 0/1")
        return z


@dataclass(frozen=True, eq=False)
class BernoulliDesign(Design):
    """Independent coordinates with ``P(Z_i = 1) = probabilities[i]``."""

    probabilities: tuple[float, ...]

    def __post_init__(self) -> None:
        probs = tuple(float(p) for p in self.probabilities)
        if not probs:
            raise ValueError("design needs at least one coordinate")
        if any(not 0.0 <= p <= 1.0 for p in probs):
            raise ValueError("bernoulli probabilities must lie in [0, 1]")
        object.__setattr__(self, "probabilities", probs)

    @classmethod
    def uniform(cls, n: int, p: float) -> "BernoulliDesign":
        return cls((p,) * n)

    @property
    def dimension(self) -> int:  # type: ignore[override]
        return len(self.probabilities)

    def sample_many(self, seed: int, count: int) -> FloatArray:
        rng = np.random.default_rng(seed)
        p = np.asarray(self.probabilities)
        return (rng.random((count, self.dimension)) < p).astype(np.float64)

    def marginal(self, coords, max_points=DEFAULT_MAX_SUPPORT):
        coords = list(coords)
        if 2 ** len(coords) > max_points:
            raise DimensionTooLarge(f"2^{len(coords)} support points exceeds cap {max_points}")
        points = _binary_patterns(len(coords))
        p = np.asarray([self.probabilities[c] for c in coords])
        probs = np.prod(np.where(points == 1.0, p, 1.0 - p), axis=1) if coords else np.ones(1)
        return points, probs

    def independence_blocks(self):
        return [frozenset([c]) for c in range(self.dimension)]


@dataclass(frozen=True, eq=False)
class CompleteRandomization(Design):
    """Exactly ``treated`` of ``n`` coordinates set to one, uniformly at random."""

    n: int
    treated: int

    def __post_init__(self) -> None:
        if self.n < 1 or not 0 <= self.treated <= self.n:
            raise ValueError("complete randomization needs 0 <= treated <= n, n >= 1")

    @property
    def dimension(self) -> int:  # type: ignore[override]
        return self.n

    def sample_many(self, seed: int, count: int) -> FloatArray:
        rng = np.random.default_rng(seed)
        order = rng.random((count, self.n)).argsort(axis=1)
        out = np.zeros((count, self.n))
        np.put_along_axis(out, order[:, : self.treated], 1.0, axis=1)
        return out

    def marginal(self, coords, max_points=DEFAULT_MAX_SUPPORT):
        coords = list(coords)
        s = len(coords)
        if s == self.n:
            count = math.comb(self.n, self.treated)
            if count > max_points:
                raise DimensionTooLarge(f"{count} support points exceeds cap {max_points}")
            points = np.zeros((count, self.n))
            for row, chosen in enumerate(itertools.combinations(range(self.n), self.treated)):
                points[row, list(chosen)] = 1.0
            return points[:, coords], np.full(count, 1.0 / count)
        if 2**s > max_points:
            raise DimensionTooLarge(f"2^{s} marginal points exceeds cap {max_points}")
        points = _binary_patterns(s)
        total = math.comb(self.n, self.treated)
        ones = points.sum(axis=1).astype(int)
        probs = np.array(
            [float(Fraction(math.comb(self.n - s, self.treated - t), total)) if 0 <= self.treated - t else 0.0
             for t in ones]
        )
        return points, probs


@dataclass(frozen=True, eq=False)
class EnumeratedDesign(Design):
    """Arbitrary finite law given as explicit ``(assignment, probability)`` pairs.

    ``blocks`` optionally declares a partition of coordinates into mutually
    independent groups; without it, dependency neighbourhoods are unknown.
    """

    points: FloatArray
    probabilities: FloatArray
    blocks: tuple[frozenset[int], ...] | None = None

    def __post_init__(self) -> None:
        points = np.atleast_2d(np.asarray(self.points, dtype=np.float64))
        probs = np.asarray(self.probabilities, dtype=np.float64).reshape(-1)
        if points.shape[0] != probs.shape[0]:
            raise ValueError("one probability per support point is required")
        if np.any(probs < 0.0):
            raise ValueError("probabilities must be nonnegative")
        if abs(math.fsum(probs) - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {math.fsum(probs)!r}, not 1")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "probabilities", probs)
        if self.blocks is not None:
            blocks = tuple(frozenset(int(c) for c in b) for b in self.blocks)
            covered = sorted(c for b in blocks for c in b)
            if covered != list(range(points.shape[1])):
                raise ValueError("independence blocks must partition the coordinates")
            object.__setattr__(self, "blocks", blocks)

    @classmethod
    def from_pairs(
        cls, pairs: Iterable[tuple[Sequence[float], float]], blocks=None
    ) -> "EnumeratedDesign":
        pairs = list(pairs)
        return cls(np.array([p[0] for p in pairs], dtype=float), np.array([p[1] for p in pairs]), blocks)

    @property
    def dimension(self) -> int:  # type: ignore[override]
        return self.points.shape[1]

    @property
    def binary(self) -> bool:  # type: ignore[override]
        return bool(np.all((self.points == 0.0) | (self.points == 1.0)))

    def sample_many(self, seed: int, count: int) -> FloatArray:
        rng = np.random.default_rng(seed)
        idx = rng.choice(len(self.probabilities), size=count, p=self.probabilities)
        return self.points[idx].copy()

    def marginal(self, coords, max_points=DEFAULT_MAX_SUPPORT):
        coords = list(coords)
        if len(self.probabilities) > max_points:
            raise DimensionTooLarge(f"{len(self.probabilities)} support points exceeds cap {max_points}")
        if coords == list(range(self.dimension)):
            return self.points.copy(), self.probabilities.copy()
        groups: dict[tuple[float, ...], list[float]] = {}
        for row, prob in zip(self.points[:, coords], self.probabilities):
            groups.setdefault(tuple(row), []).append(prob)
        keys = sorted(groups)
        points = np.array(keys, dtype=np.float64).reshape(len(keys), len(coords))
        return points, np.array([math.fsum(groups[k]) for k in keys])

    def independence_blocks(self):
        return list(self.blocks) if self.blocks is not None else None


@dataclass(frozen=True, eq=False)
class IndependentContinuousDesign(Design):
    """Independent coordinates, each with its own continuous law."""

    laws: tuple[ContinuousLaw, ...]
    nodes: int = QUADRATURE_NODES

    binary = False
    enumerable = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "laws", tuple(self.laws))
        if not self.laws:
            raise ValueError("design needs at least one coordinate")

    @classmethod
    def semicircle(cls, n: int, radius: float = 1.0) -> "IndependentContinuousDesign":
        return cls((Semicircle(radius),) * n)

    @property
    def dimension(self) -> int:  # type: ignore[override]
        return len(self.laws)

    def sample_many(self, seed: int, count: int) -> FloatArray:
        rng = np.random.default_rng(seed)
        return np.column_stack([law.sample(rng, count) for law in self.laws])

    def marginal(self, coords, max_points=DEFAULT_MAX_GRID):
        """Tensor-product Gauss rule over the requested coordinates."""
        coords = list(coords)
        if self.nodes ** len(coords) > max(max_points, DEFAULT_MAX_GRID):
            raise NoExactRoute(
                f"quadrature grid {self.nodes}^{len(coords)} exceeds cap; use monte_carlo moments"
            )
        if not coords:
            return np.zeros((1, 0)), np.ones(1)
        rules = [self.laws[c].quadrature(self.nodes) for c in coords]
        grids = np.meshgrid(*[r[0] for r in rules], indexing="ij")
        wgrids = np.meshgrid(*[r[1] for r in rules], indexing="ij")
        points = np.column_stack([g.reshape(-1) for g in grids])
        weights = np.prod(np.column_stack([g.reshape(-1) for g in wgrids]), axis=1)
        return points, weights

    def independence_blocks(self):
        return [frozenset([c]) for c in range(self.dimension)]


# ---------------------------------------------------------------------------
# Moment providers
# ---------------------------------------------------------------------------


class MCMoment(NamedTuple):
    value: float
    standard_error: float


def product_descriptor(identities: Iterable[str]) -> tuple[tuple[str, int], ...]:
    """Canonical cache key for a product of factors: sorted (identity, multiplicity)."""
    return tuple(sorted(Counter(identities).items()))


class MomentProvider:
    """Expectations of products of functions under a design.

    Factors are objects with ``identity``, ``support`` (coordinate indices) and
    a vectorised ``__call__`` mapping an ``(N, m)`` array to ``(N,)`` values,
    i.e. :class:`~riesz_lab.model_spaces.BasisFunction`.

    In ``"exact"`` mode the joint law of the union of the factors' supports is
    taken from ``design.marginal`` (enumeration, per-coordinate factorisation,
    or Gauss quadrature for continuous laws). In ``"monte_carlo"`` mode a single
    seeded sample of ``samples`` assignments is reused for every query.
    """

    def __init__(
        self,
        design: Design,
        mode: str = "exact",
        samples: int = 100_000,
        seed: int = 0,
        max_support: int = DEFAULT_MAX_SUPPORT,
    ) -> None:
        if mode not in ("exact", "monte_carlo"):
            raise ValueError(f"unknown moment mode {mode!r}")
        self.design = design
        self.mode = mode
        self.samples = samples
        self.seed = seed
        self.max_support = max_support
        self._lock = threading.Lock()
        self._cache: dict[tuple, float | MCMoment] = {}
        self._laws: dict[frozenset[int], tuple[FloatArray, FloatArray]] = {}
        self._mc_draws: FloatArray | None = None

    @property
    def exact(self) -> bool:
        return self.mode == "exact"

    def law(self, support: Iterable[int]) -> tuple[FloatArray, FloatArray]:
        """Points lifted to full dimension plus weights, covering ``support``."""
        key = frozenset(int(c) for c in support)
        with self._lock:
            hit = self._laws.get(key)
        if hit is not None:
            return hit
        if self.exact:
            coords = sorted(key)
            points, weights = self.design.marginal(coords, max_points=self.max_support)
            full = np.zeros((points.shape[0], self.design.dimension))
            full[:, coords] = points
            result = (full, weights)
        else:
            if self._mc_draws is None:
                self._mc_draws = self.design.sample_many(self.seed, self.samples)
            draws = self._mc_draws
            result = (draws, np.full(draws.shape[0], 1.0 / draws.shape[0]))
        with self._lock:
            self._laws.setdefault(key, result)
        return result

    def expect(self, fn: Callable[[FloatArray], FloatArray], support: Iterable[int]):
        """``E[fn(Z)]`` for an arbitrary vectorised function of ``Z[support]``."""
        points, weights = self.law(support)
        values = np.asarray(fn(points), dtype=np.float64)
        if self.exact:
            return math.fsum(weights * values)
        n = values.shape[0]
        mean = math.fsum(values) / n
        se = float(np.std(values, ddof=1) / math.sqrt(n)) if n > 1 else math.inf
        return MCMoment(mean, se)

    def moment(self, factors: Sequence):
        """``E[prod f(Z)]`` over the given factors, cached by canonical descriptor."""
        key = product_descriptor(f.identity for f in factors)
        with self._lock:
            if key in self._cache:
                return self._cache[key]
        support = frozenset().union(*(f.support for f in factors)) if factors else frozenset()

        def product(points: FloatArray) -> FloatArray:
            out = np.ones(points.shape[0])
            for f in factors:
                out = out * f(points)
            return out

        value = self.expect(product, support)
        with self._lock:
            return self._cache.setdefault(key, value)

    def gram(self, functions: Sequence) -> FloatArray:
        """Matrix of ``E[f_a(Z) f_b(Z)]``."""
        support = frozenset().union(*(f.support for f in functions)) if functions else frozenset()
        points, weights = self.law(support)
        values = np.column_stack([f(points) for f in functions]) if functions else np.zeros((len(weights), 0))
        g = values.T @ (weights[:, None] * values)
        return 0.5 * (g + g.T)

    def means(self, functions: Sequence) -> FloatArray:
        support = frozenset().union(*(f.support for f in functions)) if functions else frozenset()
        points, weights = self.law(support)
        return np.array([weights @ f(points) for f in functions])

    def product_gram(self, left: Sequence, right: Sequence) -> FloatArray:
        """Four-way moments ``M[a, b, c, e] = E[l_a r_b l_c r_e]``.

        Reshaped to ``(len(left) * len(right),) * 2`` this is the Gram matrix of
        the product functions ``l_a r_b`` in row-major ``(a, b)`` order.
        """
        support = frozenset().union(*(f.support for f in left), *(f.support for f in right))
        points, weights = self.law(support)
        lv = np.column_stack([f(points) for f in left])
        rv = np.column_stack([f(points) for f in right])
        prod = (lv[:, :, None] * rv[:, None, :]).reshape(len(weights), -1)
        g = prod.T @ (weights[:, None] * prod)
        g = 0.5 * (g + g.T)
        dl, dr = len(left), len(right)
        return g.reshape(dl, dr, dl, dr)
