"""Command-line entry point: ``reducechop <subcommand> ...``."""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .amplitudes import ShotBudget
from .cbrank import estimate_cb_rank
from .chop import ChopPlan, chop_distribution, chop_probability_exact
from .config import EXACT_REFERENCE_MAX_QUBITS, FULL_SUM_MAX_QUBITS
from .harness import BoundConfig, ExperimentConfig, chop_pipeline, run_experiment, verify_bounds
from .optimize import protocol_shots
from .sim import Circuit, SimulationError, Statevector, all_bitstrings, run_circuit
from .sparse import SparseState


class CliError(Exception):
    pass


def _load_json(path: str, what: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise CliError(f"cannot read {what} file {path}: {e.strerror}") from e
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise CliError(f"{what} file {path}: malformed JSON at line {e.lineno} column {e.colno}: {e.msg}") from e


def _load_circuit(path: str, what: str = "circuit") -> Circuit:
    d = _load_json(path, what)
    try:
        return Circuit.from_dict(d)
    except (SimulationError, TypeError, ValueError) as e:
        raise CliError(f"{what} file {path}: {e}") from e


def _load_state(path: str) -> Statevector:
    d = _load_json(path, "state")
    try:
        if isinstance(d, dict) and "layers" in d:
            return run_circuit(Circuit.from_dict(d))
        return Statevector.from_dict(d)
    except (SimulationError, KeyError, TypeError, ValueError) as e:
        raise CliError(f"state file {path}: {e}") from e


def _args_hash(args: argparse.Namespace) -> str:
    d = {k: v for k, v in vars(args).items() if k != "func"}
    return hashlib.sha256(json.dumps(d, sort_keys=True, default=str).encode()).hexdigest()


def _emit(obj: dict, args: argparse.Namespace) -> None:
    obj = {"version": __version__, "seed": args.seed, "config_hash": _args_hash(args), **obj}
    print(json.dumps(obj, indent=2))


# --------------------------------------------------------------------------- #
# subcommands
# --------------------------------------------------------------------------- #
def cmd_run_experiment(args) -> int:
    try:
        config = ExperimentConfig.from_json(Path(args.config).read_text())
    except OSError as e:
        raise CliError(f"cannot read config file {args.config}: {e.strerror}") from e
    overrides = {}
    if args.instances is not None:
        overrides["instances"] = args.instances
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        config = dataclasses.replace(config, **overrides)
    workers = args.workers if args.workers is not None else (os.cpu_count() or 1)
    record = run_experiment(config, args.out, workers=workers)
    print(
        json.dumps(
            {
                "version": __version__,
                "seed": config.seed,
                "config_hash": record.config_hash,
                "out": str(args.out),
                "instances": len(record.instances),
                "success_rate": record.success_rate,
                "final_K_histogram": {str(k): v for k, v in record.histogram.items()},
                "wall_clock_s": record.wall_clock,
            },
            indent=2,
        )
    )
    return 0


def cmd_estimate_cb(args) -> int:
    state = _load_state(args.state)
    rng = np.random.default_rng(args.seed)
    est = estimate_cb_rank(state, args.M, args.eps, args.pm, rng)
    out = est.to_dict()
    if not args.full_support:
        out["support"] = [list(e) for e in est.retained]
    _emit({"estimate": out}, args)
    return 0 if est.F else 3


def _requested_x(spec: str, n: int) -> list[str]:
    if spec == "all":
        if n > FULL_SUM_MAX_QUBITS:
            raise CliError(f"--x all needs n <= {FULL_SUM_MAX_QUBITS}")
        return all_bitstrings(n)
    xs = [x.strip() for x in spec.split(",") if x.strip()]
    for x in xs:
        if len(x) != n or set(x) - {"0", "1"}:
            raise CliError(f"bitstring {x!r} is not a length-{n} 0/1 string")
    return xs


def cmd_chop(args) -> int:
    circuit = _load_circuit(args.circuit)
    if not 0 <= args.cut <= len(circuit.layers):
        raise CliError(f"cut index {args.cut} outside [0, {len(circuit.layers)}]")
    U1 = Circuit(circuit.n, circuit.layers[: args.cut])
    U2 = Circuit(circuit.n, circuit.layers[args.cut :])
    R = None if args.reducer == "identity" else _load_circuit(args.reducer, "reducer")
    try:
        plan = ChopPlan.single(U1, U2, R)
    except ValueError as e:
        raise CliError(str(e)) from e
    xs = _requested_x(args.x, plan.n)
    rng = np.random.default_rng(args.seed)
    out: dict = {"n": plan.n, "cut": args.cut, "depth": plan.depth_report()}

    if args.exact:
        p = {x: chop_probability_exact(plan, x) for x in xs}
        out.update({"mode": "exact", "P_hat": p})
        _emit(out, args)
        return 0

    if args.sparse is not None:
        try:
            sparse = SparseState.from_dict(_load_json(args.sparse, "sparse state"))
        except (SimulationError, KeyError, TypeError, ValueError) as e:
            raise CliError(f"sparse state file {args.sparse}: {e}") from e
        dist = chop_distribution(plan, sparse)
        out.update({"mode": "sparse", "bound": None})
    else:
        M = args.M if args.M is not None else protocol_shots(plan.n, args.eps)
        M_phi = args.M_phi if args.M_phi is not None else M
        report = chop_pipeline(plan, ShotBudget(M, M_phi), args.eps, args.pm, rng, exact_reference=False)
        dist = report.p_hat
        est = report.estimate
        out.update(
            {
                "mode": "estimate",
                "M": M,
                "M_phi": M_phi,
                "eps": args.eps,
                "K": est.K,
                "p": est.p,
                "F": est.F,
                "m": est.m,
                "bound": report.bound,
                "bound_confidence": report.confidence,
                "l1_bound": report.trace_bound,
            }
        )
    out["P_hat"] = {x: float(dist[int(x, 2)]) for x in xs}
    if plan.n <= EXACT_REFERENCE_MAX_QUBITS:
        full = run_circuit(circuit).probabilities()
        out["exact"] = {x: float(full[int(x, 2)]) for x in xs}
        out["l1"] = float(np.sum(np.abs(dist - full)))
    _emit(out, args)
    return 0


def cmd_verify_bounds(args) -> int:
    cfg = BoundConfig(seed=args.seed if args.seed is not None else 0)
    report = verify_bounds(args.which, args.trials, cfg)
    _emit({"report": report.to_dict()}, args)
    return 0 if report.passed else 4


# --------------------------------------------------------------------------- #
def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="random seed")
    common.add_argument("--workers", type=int, default=None, help="process pool size (default: logical cores)")
    common.add_argument("--error-json", action="store_true", help="report failures as JSON on stderr")

    p = argparse.ArgumentParser(prog="reducechop", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run-experiment", parents=[common], help="seeded batch of activation runs")
    r.add_argument("--config", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--instances", type=int, default=None, help="override the instance count (e.g. 40)")
    r.set_defaults(func=cmd_run_experiment)

    e = sub.add_parser("estimate-cb", parents=[common], help="estimate the CB rank of a state")
    e.add_argument("--state", required=True, help="statevector JSON or circuit JSON (run on |0>)")
    e.add_argument("--M", type=int, required=True)
    e.add_argument("--eps", type=float, required=True)
    e.add_argument("--pm", type=float, default=1e-4)
    e.add_argument("--full-support", action="store_true", help="list every observed outcome")
    e.set_defaults(func=cmd_estimate_cb)

    c = sub.add_parser("chop", parents=[common], help="estimate output probabilities through one chop")
    c.add_argument("--circuit", required=True)
    c.add_argument("--cut", type=int, required=True, help="number of layers before the chop")
    c.add_argument("--reducer", default="identity", help="reducer circuit JSON or 'identity'")
    c.add_argument("--x", default="all", help="comma-separated bitstrings or 'all'")
    c.add_argument("--sparse", default=None, help="use this sparse chop state instead of estimating one")
    c.add_argument("--exact", action="store_true", help="full sum over all intermediate bitstrings")
    c.add_argument("--eps", type=float, default=0.08)
    c.add_argument("--pm", type=float, default=1e-4)
    c.add_argument("--M", type=int, default=None)
    c.add_argument("--M-phi", dest="M_phi", type=int, default=None)
    c.set_defaults(func=cmd_chop)

    v = sub.add_parser("verify-bounds", parents=[common], help="Monte Carlo check of the failure bounds")
    v.add_argument("--which", choices=["lemma2", "lemma3"], required=True)
    v.add_argument("--trials", type=int, default=1000)
    v.set_defaults(func=cmd_verify_bounds)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, ValueError, OSError) as e:
        if args.error_json:
            print(json.dumps({"error": type(e).__name__, "message": str(e)}), file=sys.stderr)
        else:
            print(f"reducechop: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
