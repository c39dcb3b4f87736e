#!/usr/bin/env python3
"""Batch of activation runs over an (n, eps) grid.

Writes one output directory per grid point (trajectory.csv, histogram.csv,
summary.json) and prints a one-line summary for each.

    python3 scripts/run_protocol.py --n 8 --eps 0.02 0.03 0.05 0.08 0.13 --out results/
"""

import argparse
import json
import os
from pathlib import Path

from reducechop.harness import PROTOCOL_EPS, ExperimentConfig, run_experiment


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--n", type=int, nargs="+", default=[8])
    ap.add_argument("--eps", type=float, nargs="+", default=list(PROTOCOL_EPS))
    ap.add_argument("--L-U", dest="L_U", type=int, default=10)
    ap.add_argument("--L-R", dest="L_R", type=int, default=2)
    ap.add_argument("--schedule", choices=["soft", "parametric"], default="soft")
    ap.add_argument("--instances", type=int, default=10, help="40 matches the full protocol")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    ap.add_argument("--out", default="results")
    args = ap.parse_args()

    for n in args.n:
        for eps in args.eps:
            cfg = ExperimentConfig(
                n=n,
                L_U=args.L_U,
                L_R=args.L_R,
                eps=eps,
                schedule=args.schedule,
                instances=args.instances,
                seed=args.seed,
            )
            out = Path(args.out) / f"{args.schedule}_n{n}_eps{eps:g}"
            rec = run_experiment(cfg, out, workers=args.workers)
            ok = [r for r in rec.instances if r.success]
            line = {
                "n": n,
                "eps": eps,
                "M": cfg.shots,
                "CB_M": cfg.threshold,
                "success_rate": rec.success_rate,
                "median_invocations": sorted(r.invocations for r in rec.instances)[len(rec.instances) // 2],
                "fidelity_above_bound": all(r.fidelity >= r.bound for r in ok),
                "depth": rec.instances[0].depth_report["original"],
                "max_stage": rec.instances[0].depth_report["max_stage"],
                "seconds": round(rec.wall_clock, 1),
                "out": str(out),
            }
            print(json.dumps(line), flush=True)


if __name__ == "__main__":
    main()
