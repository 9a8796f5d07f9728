"""Command-line entry point: ``riesz-lab <command> CONFIG [flags]``.

Exit codes: 0 success, 2 positivity failure, 3 configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

from .config import ScenarioConfig, load_config
from .errors import ConfigInvalid, DependenceUnknown, InexactMoments, PositivityViolated, RieszLabError
from .harness import (
    build_pipeline,
    diagnose,
    emit_report,
    estimate_from_data,
    oracle_scenario,
    positivity_summary,
    read_observed,
    run_scenario,
)

EXIT_OK = 0
EXIT_POSITIVITY = 2
EXIT_CONFIG = 3


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("config", help="scenario config (JSON)")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--reps", type=int, help="replication count")
    common.add_argument("--alpha", type=float, help="CI level alpha")
    common.add_argument("--tol", type=float, help="rank/positivity tolerance")
    common.add_argument("--format", choices=("json", "csv", "text"), help="report format")
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--force", action="store_true", help="proceed despite positivity failures")

    p = argparse.ArgumentParser(prog="riesz-lab", description="Riesz-representor estimation for randomized designs.")
    sub = p.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", parents=[common], help="point estimate and CI from observed data")
    est.add_argument("--data", help="observed-data CSV (overrides config 'data')")
    est.add_argument("--with-variance", action=argparse.BooleanOptionalAction, default=None)

    sim = sub.add_parser("simulate", parents=[common], help="seeded Monte Carlo replication")
    sim.add_argument("--runtime", action="store_true", help="include wall-clock runtime in the report")

    sub.add_parser("positivity", parents=[common], help="first-order positivity report")

    diag = sub.add_parser("diagnose", parents=[common], help="operator norm and consistency diagnostics")
    diag.add_argument("--n-sequence", help="comma-separated n values for the asymptotic-ratio table")
    diag.add_argument("-p", type=float, default=4.0)
    diag.add_argument("-q", type=float, default=4.0)
    diag.add_argument("--c", type=float, default=1e-6, help="nondegeneracy threshold for n*Var")
    diag.add_argument("--conservative", action="store_true", help="treat undeclared dependence as full")

    orc = sub.add_parser("oracle", parents=[common], help="exact enumeration of the estimator law")
    orc.add_argument("--with-variance", action=argparse.BooleanOptionalAction, default=None)
    orc.add_argument("--distribution", action="store_true", help="include the full estimator distribution")
    return p


def _apply_overrides(cfg: ScenarioConfig, args: argparse.Namespace) -> ScenarioConfig:
    changes = {}
    for flag, key in (("seed", "seed"), ("reps", "replications"), ("alpha", "alpha"), ("tol", "tolerance"), ("format", "format")):
        value = getattr(args, flag, None)
        if value is not None:
            changes[key] = value
    if getattr(args, "with_variance", None) is not None:
        changes["with_variance"] = args.with_variance
    if args.force:
        changes["positivity_override"] = True
    if getattr(args, "data", None):
        changes["data"] = args.data
    cfg = replace(cfg, **changes)
    cfg.validate()
    return cfg


def run(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        fmt = cfg.format
        if args.command == "simulate":
            _write(emit_report(run_scenario(cfg), fmt, args.out, include_runtime=args.runtime), args.out)
            return EXIT_OK
        elif args.command == "estimate":
            if not cfg.data:
                raise ConfigInvalid("estimate needs observed data (--data or config 'data')")
            z, y = read_observed(cfg.data, cfg.n)
            _write(emit_report(estimate_from_data(cfg, z, y), fmt, args.out), args.out)
            return EXIT_OK
        elif args.command == "positivity":
            summary = positivity_summary(build_pipeline(replace(cfg, positivity_override=True), with_variance=False))
            _write(emit_report(summary, "json" if fmt == "csv" else fmt, args.out), args.out)
            return EXIT_OK if summary["holds"] else EXIT_POSITIVITY
        elif args.command == "diagnose":
            seq = [int(v) for v in args.n_sequence.split(",")] if args.n_sequence else []
            rep = diagnose(cfg, args.p, args.q, args.c, seq, args.conservative)
            _write(emit_report(rep, fmt, args.out), args.out)
            return EXIT_OK
        elif args.command == "oracle":
            res = oracle_scenario(cfg)
            _write(emit_report(res.to_dict(args.distribution), fmt, args.out), args.out)
            return EXIT_OK
    except PositivityViolated as exc:
        detail = exc.report.to_dict() if getattr(exc, "report", None) is not None else None
        print(f"positivity failure: {exc}", file=sys.stderr)
        if detail is not None:
            print(json.dumps(detail, sort_keys=True), file=sys.stderr)
        return EXIT_POSITIVITY
    except (ConfigInvalid, InexactMoments, DependenceUnknown) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RieszLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def _write(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)


def main(argv: list[str] | None = None) -> None:
    sys.exit(run(argv))
