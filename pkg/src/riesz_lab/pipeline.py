"""End-to-end estimator assembly for one scenario."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import numpy.typing as npt

from .designs import Design, MomentProvider
from .functionals import EffectFunctional
from .model_spaces import ModelSpace
from .orthogonalization import DEFAULT_TOL, OrthoBasis, gram_schmidt
from .positivity import PositivityReport, test_positivity
from .riesz import Estimate, RieszRepresentor, build_representor, point_estimate, representor_matrix
from .variance import (
    Pair,
    SecondOrderRepresentor,
    VarianceBoundSpec,
    VarianceEstimate,
    build_variance_bound,
    second_order_neighbor_skip,
    second_order_representors,
    variance_estimate,
    variance_estimates,
)

FloatArray = npt.NDArray[np.float64]


@dataclass(eq=False)
class Pipeline:
    design: Design
    spaces: list[ModelSpace]
    functionals: list[EffectFunctional]
    provider: MomentProvider
    orthos: list[OrthoBasis]
    reps: list[RieszRepresentor]
    bound: VarianceBoundSpec | None = None
    so_reps: dict[Pair, SecondOrderRepresentor] | None = None
    skipped: frozenset[Pair] = frozenset()

    @classmethod
    def build(
        cls,
        design: Design,
        spaces: Sequence[ModelSpace],
        functionals: Sequence[EffectFunctional],
        provider: MomentProvider | None = None,
        tol: float = DEFAULT_TOL,
        with_variance: bool = True,
        force: bool = False,
        skip_independent: bool = True,
    ) -> "Pipeline":
        if len(spaces) != len(functionals):
            raise ValueError("one functional per unit is required")
        provider = provider or MomentProvider(design)
        orthos = [gram_schmidt(s, provider, tol) for s in spaces]
        reps = [build_representor(o, f, force=force) for o, f in zip(orthos, functionals)]
        pipe = cls(design, list(spaces), list(functionals), provider, orthos, reps)
        if with_variance:
            pipe.skipped = second_order_neighbor_skip(spaces, design) if skip_independent else frozenset()
            pipe.bound = build_variance_bound(orthos, reps, provider, pipe.skipped, tol)
            pipe.so_reps = second_order_representors(pipe.bound)
        return pipe

    @property
    def n(self) -> int:
        return len(self.spaces)

    @property
    def skipped_offdiagonal(self) -> int:
        """Number of unordered pairs ``i < j`` whose work was skipped."""
        return sum(1 for i, j in self.skipped if i != j)

    def positivity_reports(self) -> list[PositivityReport]:
        return [test_positivity(o, f) for o, f in zip(self.orthos, self.functionals)]

    def estimand(self, truth: Sequence[npt.ArrayLike]) -> float:
        return math.fsum(f.apply(s, t) for f, s, t in zip(self.functionals, self.spaces, truth)) / self.n

    def outcomes(self, truth: Sequence[npt.ArrayLike], Z: npt.ArrayLike) -> FloatArray:
        Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
        return np.column_stack([s.evaluate(Z) @ np.asarray(t, float) for s, t in zip(self.spaces, truth)])

    def representor_matrix(self, Z: npt.ArrayLike) -> FloatArray:
        return representor_matrix(self.reps, Z)

    def estimates(self, Z: npt.ArrayLike, Y: npt.ArrayLike) -> FloatArray:
        return (self.representor_matrix(Z) * np.atleast_2d(Y)).mean(axis=1)

    def variance_estimates(self, Z: npt.ArrayLike, Y: npt.ArrayLike) -> FloatArray:
        if self.so_reps is None:
            raise RuntimeError("pipeline was built without variance estimation")
        return variance_estimates(self.so_reps, Z, Y)

    def estimate(self, z: npt.ArrayLike, y: npt.ArrayLike) -> Estimate:
        return point_estimate(self.reps, z, y)

    def variance(self, z: npt.ArrayLike, y: npt.ArrayLike) -> VarianceEstimate:
        if self.so_reps is None:
            raise RuntimeError("pipeline was built without variance estimation")
        return variance_estimate(self.so_reps, z, y, self.skipped)
