"""Brute-force reference by exhaustive enumeration of a finite design.

Deliberately independent of the orthogonalisation and variance code: the
estimator under test is passed in as plain callables, and every expectation
is a compensated sum over the full support.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Callable, Sequence

import numpy as np
import numpy.typing as npt

from .designs import DEFAULT_MAX_SUPPORT, Design
from .functionals import EffectFunctional
from .model_spaces import ModelSpace

FloatArray = npt.NDArray[np.float64]


@dataclass
class OracleResult:
    estimand: float
    mean_estimate: float
    variance: float
    bound: float | None
    mean_variance_estimate: float | None
    coverage: float | None
    alpha: float
    distribution: list[tuple[float, float]] = field(default_factory=list)

    def to_dict(self, include_distribution: bool = False) -> dict:
        out = {
            "estimand": self.estimand,
            "mean_estimate": self.mean_estimate,
            "bias": self.mean_estimate - self.estimand,
            "variance": self.variance,
            "bound": self.bound,
            "mean_variance_estimate": self.mean_variance_estimate,
            "coverage": self.coverage,
            "alpha": self.alpha,
            "support_size": len(self.distribution),
        }
        if include_distribution:
            out["distribution"] = [{"estimate": v, "probability": p} for v, p in self.distribution]
        return out


def expectation(probs: FloatArray, values: FloatArray) -> float:
    return math.fsum(np.asarray(probs) * np.asarray(values))


def oracle_moment(design: Design, factors: Sequence[Callable[[FloatArray], FloatArray]]) -> float:
    """``E[prod f(Z)]`` by full enumeration."""
    points, probs = design.enumerate_support()
    prod = np.ones(len(probs))
    for f in factors:
        prod = prod * np.asarray(f(points), dtype=np.float64)
    return expectation(probs, prod)


def oracle_run(
    design: Design,
    spaces: Sequence[ModelSpace],
    functionals: Sequence[EffectFunctional],
    truth: Sequence[npt.ArrayLike],
    representors: Callable[[FloatArray], FloatArray],
    variance_estimator: Callable[[FloatArray, FloatArray], FloatArray] | None = None,
    bound: float | None = None,
    alpha: float = 0.05,
    max_points: int = DEFAULT_MAX_SUPPORT,
) -> OracleResult:
    """Exact law of the estimator for fixed outcome functions.

    ``representors(Z)`` returns the ``(N, n)`` weights ``psi_i(Z)``;
    ``variance_estimator(Z, Y)`` returns ``N`` variance estimates. ``bound``
    is only echoed into the result so that callers can compare it with the
    enumerated ``E[V_hat]``.
    """
    points, probs = design.enumerate_support(max_points)
    n = len(spaces)
    Y = np.column_stack([s.evaluate(points) @ np.asarray(t, dtype=np.float64) for s, t in zip(spaces, truth)])
    estimand = math.fsum(f.apply(s, t) for f, s, t in zip(functionals, spaces, truth)) / n
    psi = np.asarray(representors(points), dtype=np.float64)
    est = (psi * Y).mean(axis=1)
    mean = expectation(probs, est)
    var = expectation(probs, (est - mean) ** 2)
    mean_v = coverage = None
    if variance_estimator is not None:
        vhat = np.asarray(variance_estimator(points, Y), dtype=np.float64)
        mean_v = expectation(probs, vhat)
        z = NormalDist().inv_cdf(1.0 - alpha / 2.0)
        radius = z * np.sqrt(np.clip(vhat, 0.0, None))
        covered = (np.abs(est - estimand) <= radius).astype(float)
        coverage = expectation(probs, covered)
    return OracleResult(
        estimand=estimand,
        mean_estimate=mean,
        variance=var,
        bound=bound,
        mean_variance_estimate=mean_v,
        coverage=coverage,
        alpha=alpha,
        distribution=[(float(v), float(p)) for v, p in zip(est, probs)],
    )
