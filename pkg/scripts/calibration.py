"""Monte Carlo calibration of the point estimate, variance estimate and Wald CI.

    python3 scripts/calibration.py --n 200 --p 0.3 --reps 10000
"""

import argparse
import json

from riesz_lab.harness import run_scenario
from riesz_lab.scenarios import scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--p", type=float, default=0.3)
    ap.add_argument("--reps", type=int, default=10_000)
    ap.add_argument("--alpha", type=float, default=0.05)
    ap.add_argument("--seed", type=int, default=8)
    ap.add_argument("--model", default="sutva", choices=("sutva", "linear_in_means"))
    args = ap.parse_args()

    name = "sutva_bernoulli" if args.model == "sutva" else "linear_in_means_global"
    mean = [1.0, 0.0] if args.model == "sutva" else [0.0, 1.0, 0.5]
    cfg = scenario(
        name,
        n=args.n,
        design={"kind": "bernoulli", "p": args.p},
        truth={"random": {"seed": 1, "mean": mean, "scale": 0.5}},
        replications=args.reps,
        alpha=args.alpha,
        seed=args.seed,
    )
    rep = run_scenario(cfg)
    keys = ("estimand", "mean_estimate", "bias", "bias_se", "empirical_variance", "mean_variance_estimate",
            "variance_bound", "conservativeness_ratio", "conservativeness_ratio_se", "coverage", "clamped")
    print(json.dumps({k: getattr(rep, k) for k in keys}, indent=2))


if __name__ == "__main__":
    main()
