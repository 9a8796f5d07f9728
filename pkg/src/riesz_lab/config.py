"""Scenario configuration: one JSON document describing a whole experiment.

See README.md for the field-by-field schema.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import functionals as fx
from . import model_spaces as ms
from .designs import (
    BernoulliDesign,
    CompleteRandomization,
    Design,
    EnumeratedDesign,
    IndependentContinuousDesign,
    MomentProvider,
    Semicircle,
    Uniform,
)
from .errors import ConfigInvalid
from .orthogonalization import DEFAULT_TOL

FORMATS = ("json", "csv", "text")


@dataclass
class ScenarioConfig:
    n: int
    design: dict[str, Any]
    model: dict[str, Any]
    functional: dict[str, Any]
    truth: dict[str, Any] | None = None
    data: str | None = None
    moments: dict[str, Any] = field(default_factory=lambda: {"mode": "exact"})
    seed: int = 0
    replications: int = 1000
    alpha: float = 0.05
    tolerance: float = DEFAULT_TOL
    with_variance: bool = True
    positivity_override: bool = False
    format: str = "json"

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "ScenarioConfig":
        if not isinstance(raw, dict):
            raise ConfigInvalid("scenario config must be a JSON object")
        known = set(cls.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise ConfigInvalid(f"unknown config fields: {sorted(unknown)}")
        for key in ("n", "design", "model", "functional"):
            if key not in raw:
                raise ConfigInvalid(f"missing required field {key!r}")
        cfg = cls(**raw)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if not isinstance(self.n, int) or self.n < 1:
            raise ConfigInvalid("n must be a positive integer")
        for key in ("design", "model", "functional", "moments"):
            section = getattr(self, key)
            if not isinstance(section, dict) or "kind" not in section and key != "moments":
                raise ConfigInvalid(f"{key} must be an object with a 'kind'")
        if not isinstance(self.replications, int) or self.replications < 0:
            raise ConfigInvalid("replications must be a nonnegative integer")
        if not 0.0 < float(self.alpha) < 1.0:
            raise ConfigInvalid("alpha must lie in (0, 1)")
        if not float(self.tolerance) > 0.0:
            raise ConfigInvalid("tolerance must be positive")
        if self.format not in FORMATS:
            raise ConfigInvalid(f"format must be one of {FORMATS}")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigInvalid("seed must be a 64-bit nonnegative integer")
        # building each section checks n-consistency and parameters
        design = build_design(self)
        if design.dimension != self.n and self.model.get("kind") != "custom":
            raise ConfigInvalid(f"design dimension {design.dimension} does not match n = {self.n}")
        build_spaces(self)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def load_config(path: str | Path) -> ScenarioConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigInvalid(f"cannot read config {path}: {exc}") from exc
    return ScenarioConfig.from_dict(raw)


def _require(section: dict, key: str, where: str):
    if key not in section:
        raise ConfigInvalid(f"{where}: missing {key!r}")
    return section[key]


def build_design(cfg: ScenarioConfig) -> Design:
    d = cfg.design
    kind = d["kind"]
    try:
        if kind == "bernoulli":
            if "probabilities" in d:
                return BernoulliDesign(tuple(d["probabilities"]))
            return BernoulliDesign.uniform(cfg.n, float(_require(d, "p", "design")))
        if kind == "complete_randomization":
            return CompleteRandomization(cfg.n, int(_require(d, "treated", "design")))
        if kind == "enumerated":
            support = _require(d, "support", "design")
            blocks = d.get("blocks")
            return EnumeratedDesign.from_pairs([(s[0], s[1]) for s in support], blocks)
        if kind == "independent_continuous":
            law = d.get("law", "semicircle")
            if law == "semicircle":
                laws = (Semicircle(float(d.get("radius", 1.0))),) * cfg.n
            elif isinstance(law, dict) and "uniform" in law:
                lo, hi = law["uniform"]
                laws = (Uniform(float(lo), float(hi)),) * cfg.n
            else:
                raise ConfigInvalid(f"unknown continuous law {law!r}")
            return IndependentContinuousDesign(laws)
    except (ValueError, TypeError, IndexError) as exc:
        raise ConfigInvalid(f"design: {exc}") from exc
    raise ConfigInvalid(f"unknown design kind {kind!r}")


def build_graph(spec: dict | None, n: int) -> list[list[int]]:
    if spec is None:
        raise ConfigInvalid("model needs a 'graph'")
    if spec.get("kind") == "cycle":
        return ms.cycle_graph(n)
    if "adjacency" in spec:
        adj = [[int(j) for j in row] for row in spec["adjacency"]]
        if len(adj) != n or any(not 0 <= j < n for row in adj for j in row):
            raise ConfigInvalid("graph adjacency must list neighbours in [0, n) for each of the n units")
        return adj
    raise ConfigInvalid(f"unknown graph spec {spec!r}")


def build_spaces(cfg: ScenarioConfig) -> list[ms.ModelSpace]:
    m = cfg.model
    kind = m["kind"]
    n = cfg.n
    if kind == "sutva":
        return ms.sutva_spaces(n)
    if kind == "sutva_linear":
        return [ms.sutva_linear_space(i) for i in range(n)]
    if kind == "linear_in_means":
        return ms.linear_in_means_spaces(build_graph(m.get("graph"), n))
    if kind == "exposure":
        graph = build_graph(m.get("graph"), n)
        mapping = m.get("mapping", "own_any")
        if mapping == "own_any":
            return ms.own_any_exposure_spaces(graph)
        if mapping == "own_count":
            return ms.own_count_exposure_spaces(graph)
        raise ConfigInvalid(f"unknown exposure mapping {mapping!r}")
    if kind == "polynomial":
        family = m.get("family", "chebyshev")
        if family not in ("chebyshev", "monomial"):
            raise ConfigInvalid(f"unknown polynomial family {family!r}")
        degree = int(_require(m, "degree", "model"))
        return [ms.polynomial_space(i, degree, family) for i in range(n)]
    raise ConfigInvalid(f"unknown model kind {kind!r}")


def build_functionals(cfg: ScenarioConfig, spaces: list[ms.ModelSpace]) -> list[fx.EffectFunctional]:
    f = cfg.functional
    kind = f["kind"]
    n = cfg.n
    if kind == "ate":
        return [fx.global_contrast(n)] * n
    if kind == "indirect":
        return [fx.indirect_contrast(i, n) for i in range(n)]
    if kind == "contrast":
        return [fx.Contrast(np.asarray(f["treated"], float), np.asarray(f["control"], float))] * n
    if kind == "evaluation":
        return [fx.Integration.evaluation(np.asarray(_require(f, "point", "functional"), float))] * n
    if kind == "integration":
        measure = _require(f, "measure", "functional")
        return [fx.Integration(np.array([m[0] for m in measure], float), np.array([m[1] for m in measure]))] * n
    if kind == "coefficient":
        return [fx.Coefficient(np.asarray(_require(f, "weights", "functional"), float))] * n
    if kind == "exposure_contrast":
        out = []
        for s in spaces:
            w = np.zeros(s.dimension)
            w[int(f["a"])] += 1.0
            w[int(f["b"])] -= 1.0
            out.append(fx.Coefficient(w))
        return out
    if kind == "gradient":
        return [fx.gradient_sum(n)] * n
    if kind == "derivative":
        return [fx.Derivative(np.asarray(f["point"], float), np.asarray(f["direction"], float))] * n
    if kind == "design_derivative":
        if f.get("family", "bernoulli") != "bernoulli":
            raise ConfigInvalid("design_derivative supports the bernoulli family only")
        path = lambda p: BernoulliDesign.uniform(n, p)  # noqa: E731
        return [fx.DesignDerivative(path, float(f["at"]), float(f.get("step", fx.DESIGN_STEP)))] * n
    raise ConfigInvalid(f"unknown functional kind {kind!r}")


def build_truth(cfg: ScenarioConfig, spaces: list[ms.ModelSpace]) -> list[np.ndarray]:
    t = cfg.truth
    if t is None:
        raise ConfigInvalid("this command needs a 'truth' section")
    if "coefficients" in t:
        coef = t["coefficients"]
        if coef and not isinstance(coef[0], list):
            coef = [coef] * cfg.n
        if len(coef) != cfg.n or any(len(c) != s.dimension for c, s in zip(coef, spaces)):
            raise ConfigInvalid("truth coefficients must give one vector of length d_i per unit")
        return [np.asarray(c, dtype=float) for c in coef]
    if "random" in t:
        r = t["random"]
        rng = np.random.default_rng(int(r.get("seed", 0)))
        scale = float(r.get("scale", 1.0))
        out = []
        for s in spaces:
            mean = np.asarray(r.get("mean", [0.0] * s.dimension), dtype=float)
            if mean.shape != (s.dimension,):
                raise ConfigInvalid("truth.random.mean must have length d_i")
            out.append(mean + scale * rng.standard_normal(s.dimension))
        return out
    raise ConfigInvalid("truth needs 'coefficients' or 'random'")


def build_provider(cfg: ScenarioConfig, design: Design) -> MomentProvider:
    m = cfg.moments or {"mode": "exact"}
    mode = m.get("mode", "exact")
    if mode == "exact":
        return MomentProvider(design)
    if mode == "monte_carlo":
        return MomentProvider(design, "monte_carlo", int(m.get("samples", 100_000)), int(m.get("seed", cfg.seed)))
    raise ConfigInvalid(f"unknown moment mode {mode!r}")
