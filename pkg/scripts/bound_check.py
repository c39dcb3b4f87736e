#!/usr/bin/env python3
"""Monte Carlo violation rates for both failure bounds, plus the end-to-end
L1 error of the estimated output distribution against its implied bound."""

import argparse
import json

import numpy as np

from reducechop.amplitudes import ShotBudget
from reducechop.harness import chop_pipeline, tfim_plan, verify_bounds
from reducechop.optimize import protocol_shots


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=1000)
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--n", type=int, default=6)
    ap.add_argument("--eps", type=float, default=0.08)
    args = ap.parse_args()

    for which in ("lemma2", "lemma3"):
        print(json.dumps(verify_bounds(which, args.trials).to_dict()))

    M = protocol_shots(args.n, args.eps)
    hits = 0
    for seed in range(args.seeds):
        rng = np.random.default_rng(seed)
        plan = tfim_plan(args.n, 10, 5, rng)
        rep = chop_pipeline(plan, ShotBudget(M, M), args.eps, 1e-4, rng)
        hits += rep.l1 <= rep.trace_bound
        print(f"seed {seed:3d}  K={rep.estimate.K:3d} F={rep.estimate.F!s:5}  l1={rep.l1:.4f}  bound={rep.trace_bound:.4f}")
    print(f"within bound: {hits}/{args.seeds}")


if __name__ == "__main__":
    main()
