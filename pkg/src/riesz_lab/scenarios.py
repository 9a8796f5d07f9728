"""Built-in enumerable scenarios used by the tests, scripts and examples."""

from __future__ import annotations

import copy

from .config import ScenarioConfig

_CATALOG: dict[str, dict] = {
    "sutva_bernoulli": {
        "n": 4,
        "design": {"kind": "bernoulli", "p": 0.3},
        "model": {"kind": "sutva"},
        "functional": {"kind": "ate"},
    },
    "sutva_heterogeneous": {
        "n": 3,
        "design": {"kind": "bernoulli", "probabilities": [0.2, 0.5, 0.7]},
        "model": {"kind": "sutva"},
        "functional": {"kind": "ate"},
    },
    "sutva_complete": {
        "n": 5,
        "design": {"kind": "complete_randomization", "treated": 2},
        "model": {"kind": "sutva"},
        "functional": {"kind": "ate"},
    },
    "sutva_linear": {
        "n": 3,
        "design": {"kind": "bernoulli", "p": 0.4},
        "model": {"kind": "sutva_linear"},
        "functional": {"kind": "ate"},
    },
    "enumerated_pairs": {
        "n": 4,
        "design": {
            "kind": "enumerated",
            "support": [[[1, 0, 1, 0], 0.25], [[1, 0, 0, 1], 0.25], [[0, 1, 1, 0], 0.25], [[0, 1, 0, 1], 0.25]],
            "blocks": [[0, 1], [2, 3]],
        },
        "model": {"kind": "sutva"},
        "functional": {"kind": "ate"},
    },
    "own_any_cycle": {
        "n": 5,
        "design": {"kind": "bernoulli", "p": 0.5},
        "model": {"kind": "exposure", "mapping": "own_any", "graph": {"kind": "cycle"}},
        "functional": {"kind": "exposure_contrast", "a": 3, "b": 0},
    },
    "own_count_cycle": {
        "n": 4,
        "design": {"kind": "bernoulli", "p": 0.5},
        "model": {"kind": "exposure", "mapping": "own_count", "graph": {"kind": "cycle"}},
        "functional": {"kind": "exposure_contrast", "a": 1, "b": 0},
    },
    "linear_in_means_global": {
        "n": 6,
        "design": {"kind": "bernoulli", "p": 0.5},
        "model": {"kind": "linear_in_means", "graph": {"kind": "cycle"}},
        "functional": {"kind": "ate"},
    },
    "linear_in_means_indirect": {
        "n": 6,
        "design": {"kind": "bernoulli", "p": 0.3},
        "model": {"kind": "linear_in_means", "graph": {"kind": "cycle"}},
        "functional": {"kind": "indirect"},
    },
    "linear_in_means_complete": {
        "n": 6,
        "design": {"kind": "complete_randomization", "treated": 3},
        "model": {"kind": "linear_in_means", "graph": {"kind": "cycle"}},
        "functional": {"kind": "ate"},
    },
}


def scenario_names() -> list[str]:
    return list(_CATALOG)


def scenario_dict(name: str, **overrides) -> dict:
    raw = copy.deepcopy(_CATALOG[name])
    raw.update(overrides)
    return raw


def scenario(name: str, **overrides) -> ScenarioConfig:
    return ScenarioConfig.from_dict(scenario_dict(name, **overrides))


def reference_scenario(a: float = 1.0, c: float = 1.0, **overrides) -> ScenarioConfig:
    """One unit, SUTVA, fair coin, outcome ``a`` if treated and ``c`` if not."""
    raw = {
        "n": 1,
        "design": {"kind": "bernoulli", "p": 0.5},
        "model": {"kind": "sutva"},
        "functional": {"kind": "ate"},
        "truth": {"coefficients": [a, c]},
    }
    raw.update(overrides)
    return ScenarioConfig.from_dict(raw)
