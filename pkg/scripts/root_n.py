"""RMSE * sqrt(n) across a doubling sequence of sample sizes; should stay flat."""

import argparse
import math

from riesz_lab.harness import run_scenario
from riesz_lab.scenarios import scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", default="32,64,128,256,512,1024")
    ap.add_argument("--p", type=float, default=0.3)
    ap.add_argument("--reps", type=int, default=2000)
    args = ap.parse_args()

    truth = {"random": {"seed": 1, "mean": [1.0, 0.0], "scale": 0.5}}
    rows = []
    for n in map(int, args.sizes.split(",")):
        cfg = scenario("sutva_bernoulli", n=n, design={"kind": "bernoulli", "p": args.p}, truth=truth,
                       replications=args.reps, seed=n, with_variance=False)
        rmse = run_scenario(cfg).rmse
        rows.append((n, rmse, rmse * math.sqrt(n)))
    print(f"{'n':>6} {'rmse':>10} {'rmse*sqrt(n)':>14}")
    for n, rmse, scaled in rows:
        print(f"{n:>6} {rmse:>10.5f} {scaled:>14.5f}")
    scaled = [r[2] for r in rows]
    print(f"band max/min = {max(scaled) / min(scaled):.3f}")


if __name__ == "__main__":
    main()
