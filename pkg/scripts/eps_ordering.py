#!/usr/bin/env python3
"""Matched-seed comparison of optimizer invocations across eps values.

Each seed fixes the random circuit, so instance i sees the same circuit at
every eps; only the measurement budget and the rank tolerance change.
"""

import argparse

import numpy as np

from reducechop.harness import ExperimentConfig, run_experiment


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=6)
    ap.add_argument("--eps", type=float, nargs="+", default=[0.02, 0.08])
    ap.add_argument("--instances", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    print(f"{'eps':>6} {'M':>7} {'median':>7} {'success':>8}  invocations")
    for eps in args.eps:
        rec = run_experiment(ExperimentConfig(n=args.n, eps=eps, instances=args.instances, seed=args.seed))
        inv = [r.invocations for r in rec.instances]
        print(f"{eps:>6g} {rec.config.shots:>7d} {np.median(inv):>7g} {rec.success_rate:>8.2f}  {inv}")


if __name__ == "__main__":
    main()
