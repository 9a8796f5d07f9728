"""Monte Carlo replication engine, diagnostics runs and report emission.

Seed rule: replicate ``r`` draws its assignment from a fresh generator seeded
with ``SeedSequence(master_seed, spawn_key=(r,)).generate_state(1, uint64)[0]``.
The stream for ``r`` therefore depends only on ``(master_seed, r)``, so the
aggregate is the same however replicates are scheduled. Aggregation runs over
replicate index order with compensated sums.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from statistics import NormalDist
from typing import Any, Sequence

import numpy as np
import numpy.typing as npt

from .config import ScenarioConfig, build_design, build_functionals, build_provider, build_spaces, build_truth
from .designs import Design
from .diagnostics import (
    DiagnosticsReport,
    consistency_bound,
    exact_variance_quadratic,
    max_p_norm,
    operator_norm,
    outcome_coordinates,
    variance_matrix,
    worst_case_rmse,
)
from .errors import ConfigInvalid, DependenceUnknown, LengthMismatch
from .model_spaces import dependency_neighborhoods, independent_pairs
from .oracle import OracleResult, oracle_run
from .pipeline import Pipeline
from .variance import confidence_interval, worker_count

FloatArray = npt.NDArray[np.float64]

SEED_RULE = "SeedSequence(master_seed, spawn_key=(r,)).generate_state(1, uint64)[0]"
CHUNK = 2048


def replicate_seed(master: int, r: int) -> int:
    return int(np.random.SeedSequence(master, spawn_key=(r,)).generate_state(1, np.uint64)[0])


def replicate_assignments(design: Design, master: int, indices: Sequence[int]) -> FloatArray:
    if len(indices) == 0:
        return np.zeros((0, design.dimension))
    return np.vstack([design.sample(replicate_seed(master, r)) for r in indices])


@dataclass
class ReplicationReport:
    """Aggregates of ``R`` seeded replicates. Fields are ``None`` when ``R = 0``."""

    n: int
    replications: int
    alpha: float
    estimand: float | None = None
    mean_estimate: float | None = None
    bias: float | None = None
    bias_se: float | None = None
    empirical_variance: float | None = None
    rmse: float | None = None
    mean_variance_estimate: float | None = None
    mean_variance_estimate_se: float | None = None
    variance_bound: float | None = None
    conservativeness_ratio: float | None = None
    conservativeness_ratio_se: float | None = None
    coverage: float | None = None
    clamped: int | None = None
    sum_q: int | None = None
    skipped_pairs: int | None = None
    master_seed: int = 0
    seed_rule: str = SEED_RULE
    runtime_seconds: float | None = None
    config: dict[str, Any] = field(default_factory=dict)

    def to_dict(self, include_runtime: bool = False) -> dict[str, Any]:
        out = {k: getattr(self, k) for k in self.__dataclass_fields__}
        if not include_runtime:
            out.pop("runtime_seconds")
        return out


def _fsum_mean(x: FloatArray) -> float:
    return math.fsum(x.tolist()) / len(x)


def build_pipeline(cfg: ScenarioConfig, with_variance: bool | None = None) -> Pipeline:
    design = build_design(cfg)
    spaces = build_spaces(cfg)
    funcs = build_functionals(cfg, spaces)
    provider = build_provider(cfg, design)
    wv = cfg.with_variance if with_variance is None else with_variance
    return Pipeline.build(
        design, spaces, funcs, provider, tol=cfg.tolerance, with_variance=wv, force=cfg.positivity_override
    )


def run_scenario(cfg: ScenarioConfig, pipeline: Pipeline | None = None, workers: int | None = None) -> ReplicationReport:
    """Build the estimator once and replay ``cfg.replications`` seeded assignments."""
    start = time.perf_counter()
    R = cfg.replications
    report = ReplicationReport(n=cfg.n, replications=R, alpha=cfg.alpha, master_seed=cfg.seed, config=cfg.to_dict())
    if R == 0:
        return report
    pipe = pipeline or build_pipeline(cfg)
    truth = build_truth(cfg, pipe.spaces)
    tau = pipe.estimand(truth)
    with_var = pipe.so_reps is not None

    chunks = [range(s, min(s + CHUNK, R)) for s in range(0, R, CHUNK)]

    def run(idx: range) -> tuple[FloatArray, FloatArray | None]:
        Z = replicate_assignments(pipe.design, cfg.seed, idx)
        Y = pipe.outcomes(truth, Z)
        est = pipe.estimates(Z, Y)
        return est, (pipe.variance_estimates(Z, Y) if with_var else None)

    workers = workers or worker_count()
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(run, chunks))
    else:
        results = [run(c) for c in chunks]
    est = np.concatenate([r[0] for r in results])

    mean = _fsum_mean(est)
    dev = est - mean
    var = math.fsum((dev**2).tolist()) / (R - 1) if R > 1 else 0.0
    report.estimand = tau
    report.mean_estimate = mean
    report.bias = mean - tau
    report.bias_se = math.sqrt(var / R)
    report.empirical_variance = var
    report.rmse = math.sqrt(_fsum_mean((est - tau) ** 2))
    if with_var:
        vhat = np.concatenate([r[1] for r in results])
        mv = _fsum_mean(vhat)
        mv_var = math.fsum(((vhat - mv) ** 2).tolist()) / (R - 1) if R > 1 else 0.0
        report.mean_variance_estimate = mv
        report.mean_variance_estimate_se = math.sqrt(mv_var / R)
        report.variance_bound = pipe.bound.bound_value(truth) if pipe.bound is not None else None
        z = NormalDist().inv_cdf(1.0 - cfg.alpha / 2.0)
        radius = z * np.sqrt(np.clip(vhat, 0.0, None))
        report.coverage = _fsum_mean((np.abs(est - tau) <= radius).astype(float))
        report.clamped = int((vhat < 0).sum())
        report.sum_q = pipe.bound.sum_q
        report.skipped_pairs = pipe.skipped_offdiagonal
        if var > 0:
            ratio = mv / var
            # delta method: relative errors of the two means add in quadrature
            m4 = _fsum_mean(dev**4)
            var_se = math.sqrt(max(m4 - var**2, 0.0) / R)
            rel = math.hypot(report.mean_variance_estimate_se / mv if mv else 0.0, var_se / var)
            report.conservativeness_ratio = ratio
            report.conservativeness_ratio_se = abs(ratio) * rel
    report.runtime_seconds = time.perf_counter() - start
    return report


# ---------------------------------------------------------------------------
# Observed data and single-sample estimation
# ---------------------------------------------------------------------------


def read_observed(path: str | Path, n: int) -> tuple[FloatArray, FloatArray]:
    """Read ``assignment,z_0,...`` then a ``unit,outcome`` table (zero-based units)."""
    try:
        rows = [r for r in csv.reader(Path(path).read_text().splitlines()) if r]
    except OSError as exc:
        raise ConfigInvalid(f"cannot read data file {path}: {exc}") from exc
    if not rows or rows[0][0].strip() != "assignment":
        raise ConfigInvalid("data file must start with an 'assignment,...' row")
    z = np.array([float(v) for v in rows[0][1:]])
    body = rows[1:]
    if body and body[0][0].strip() == "unit":
        body = body[1:]
    y = np.full(n, np.nan)
    for row in body:
        unit, value = int(row[0]), float(row[1])
        if not 0 <= unit < n:
            raise ConfigInvalid(f"unit index {unit} out of range")
        y[unit] = value
    if np.isnan(y).any():
        raise LengthMismatch(f"data file gives outcomes for {int((~np.isnan(y)).sum())} of {n} units")
    return z, y


def write_observed(path: str | Path, z: npt.ArrayLike, y: npt.ArrayLike) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["assignment", *[repr(float(v)) for v in np.asarray(z)]])
    w.writerow(["unit", "outcome"])
    for i, v in enumerate(np.asarray(y)):
        w.writerow([i, repr(float(v))])
    Path(path).write_text(buf.getvalue())


def estimate_from_data(cfg: ScenarioConfig, z: npt.ArrayLike, y: npt.ArrayLike, pipeline: Pipeline | None = None) -> dict:
    pipe = pipeline or build_pipeline(cfg)
    z = pipe.design.validate_assignment(z)
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (pipe.n,):
        raise LengthMismatch(f"expected {pipe.n} outcomes, got shape {y.shape}")
    est = pipe.estimate(z, y)
    out: dict[str, Any] = {"n": pipe.n, "estimate": est.value}
    if pipe.so_reps is not None:
        v = pipe.variance(z, y)
        ci = confidence_interval(est.value, v.value, cfg.alpha)
        out.update(
            variance_estimate=v.value,
            ci_lower=ci.lower,
            ci_upper=ci.upper,
            alpha=cfg.alpha,
            clamped=ci.clamped,
            sum_q=pipe.bound.sum_q,
            skipped_pairs=pipe.skipped_offdiagonal,
        )
    return out


def positivity_summary(pipe: Pipeline) -> dict:
    reports = pipe.positivity_reports()
    units = []
    for i, r in enumerate(reports):
        d = r.to_dict()
        d["unit"] = i
        units.append(d)
    return {"holds": all(r.holds for r in reports), "n": pipe.n, "units": units}


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------


def _independent_blocks(pipe: Pipeline) -> frozenset:
    try:
        return frozenset((i, j) for i, j in independent_pairs(pipe.spaces, pipe.design) if i < j)
    except DependenceUnknown:
        return frozenset()


def diagnose(
    cfg: ScenarioConfig,
    p: float = 4.0,
    q: float = 4.0,
    c: float = 1e-6,
    n_sequence: Sequence[int] = (),
    conservative: bool = False,
) -> DiagnosticsReport:
    pipe = build_pipeline(cfg, with_variance=False)
    nb = dependency_neighborhoods(pipe.spaces, pipe.design, conservative=conservative)
    vm = variance_matrix(pipe.orthos, pipe.reps, pipe.provider, _independent_blocks(pipe))
    opn = operator_norm(vm)
    rep_q = max_p_norm([(r, r.space.support) for r in pipe.reps], pipe.provider, q)
    rep = DiagnosticsReport(n=pipe.n, operator_norm=opn, davg=nb.davg, dmax=nb.dmax, savg=nb.savg, p=p, q=q)
    rep.representor_max_q = rep_q
    if cfg.truth is not None:
        truth = build_truth(cfg, pipe.spaces)
        fns = [(lambda z, s=s, t=t: s.evaluate(z) @ t, s.support) for s, t in zip(pipe.spaces, truth)]
        rep.outcome_max_p = max_p_norm(fns, pipe.provider, p)
        rep.consistency_rmse_bound = consistency_bound(nb.davg, rep.outcome_max_p, rep_q, pipe.n, p, q)
        ms_norm = math.sqrt(math.fsum(float(t @ o.gram @ t) for t, o in zip(truth, pipe.orthos)) / pipe.n)
        rep.mean_square_norm = ms_norm
        rep.worst_case_rmse = worst_case_rmse(opn, ms_norm, pipe.n)
        var = exact_variance_quadratic(vm, outcome_coordinates(pipe.orthos, truth))
        rep.exact_rmse = math.sqrt(max(var, 0.0))
        rep.nondegenerate = pipe.n * var >= c
    rows = []
    for m in n_sequence:
        sub = replace(cfg, n=int(m), design=_rescale_design(cfg.design, cfg.n, int(m)))
        sp = build_spaces(sub)
        summary = dependency_neighborhoods(sp, build_design(sub), conservative=conservative)
        rows.append(
            {
                "n": int(m),
                "davg": summary.davg,
                "dmax": summary.dmax,
                "savg": summary.savg,
                "dmax_over_n_quarter": summary.dmax / m**0.25,
                "savg_over_n2": summary.savg / m**2,
            }
        )
    if len(rows) >= 2:
        for key in ("dmax_over_n_quarter", "savg_over_n2"):
            verdict = rows[-1][key] < rows[0][key] or rows[-1][key] == 0.0
            for r in rows:
                r[key + "_decreasing"] = verdict
    rep.asymptotic_ratios = rows
    return rep


def _rescale_design(design: dict, old_n: int, n: int) -> dict:
    kind = design.get("kind")
    if kind == "bernoulli" and "probabilities" in design:
        raise ConfigInvalid("an n-sequence needs a bernoulli design with a common 'p'")
    if kind == "enumerated":
        raise ConfigInvalid("an n-sequence cannot rescale an enumerated design")
    if kind == "complete_randomization":
        frac = design["treated"] / old_n
        return {**design, "treated": max(0, min(n, round(frac * n)))}
    return dict(design)


def oracle_scenario(cfg: ScenarioConfig, pipeline: Pipeline | None = None) -> OracleResult:
    pipe = pipeline or build_pipeline(cfg)
    truth = build_truth(cfg, pipe.spaces)
    vfun = pipe.variance_estimates if pipe.so_reps is not None else None
    bound = pipe.bound.bound_value(truth) if pipe.bound is not None else None
    return oracle_run(
        pipe.design, pipe.spaces, pipe.functionals, truth, pipe.representor_matrix, vfun, bound, cfg.alpha
    )


# ---------------------------------------------------------------------------
# Report emission
# ---------------------------------------------------------------------------


def _as_dict(report: Any, include_runtime: bool) -> dict:
    if isinstance(report, ReplicationReport):
        return report.to_dict(include_runtime)
    if hasattr(report, "to_dict"):
        return report.to_dict()
    if isinstance(report, dict):
        return report
    raise TypeError(f"cannot emit {type(report).__name__}")


def _scalar(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (dict, list, tuple)):
        return json.dumps(v, sort_keys=True, separators=(",", ":"))
    return str(v)


def render_report(report: Any, fmt: str = "json", include_runtime: bool = False) -> str:
    """Render to text. JSON keys are sorted; CSV columns follow field order."""
    data = _as_dict(report, include_runtime)
    if fmt == "json":
        return json.dumps(data, sort_keys=True, indent=2) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(list(data))
        w.writerow([_scalar(v) for v in data.values()])
        return buf.getvalue()
    if fmt == "text":
        lines = [f"{k}: {_scalar(v)}" for k, v in data.items() if k != "config"]
        if "sum_q" in data:
            lines.append(f"sum Q (diagonal mass transfers, conservativeness): {_scalar(data.get('sum_q'))}")
        return "\n".join(lines) + "\n"
    raise ConfigInvalid(f"unknown output format {fmt!r}")


def emit_report(report: Any, fmt: str = "json", path: str | Path | None = None, include_runtime: bool = False) -> str:
    text = render_report(report, fmt, include_runtime)
    if path is not None:
        Path(path).write_text(text)
    return text
