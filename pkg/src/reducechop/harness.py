"""Seeded batch experiments, Monte Carlo bound checks, and the end-to-end
estimate pipeline shared with the command line."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
import os
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import binom

from . import __version__
from .amplitudes import ShotBudget, estimate_chop_state
from .ansatz import build_tfim, random_params, tfim_num_params
from .cbrank import budget_gate, estimate_cb_rank, min_budget
from .chop import ChopPlan, chop_distribution, first_half_state
from .config import EXACT_REFERENCE_MAX_QUBITS, max_qubits
from .optimize import (
    InstanceRecord,
    ReducerProblem,
    Settings,
    protocol_shots,
    protocol_threshold,
    run_activation,
)
from .sim import Circuit, Statevector, run_circuit

SCHEMA_VERSION = 1
PROTOCOL_EPS = (0.02, 0.03, 0.05, 0.08, 0.13)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    n: int
    L_U: int = 10
    L_R: int = 2
    eps: float = 0.08
    p_m: float = 1e-4
    schedule: str = "soft"
    instances: int = 10
    seed: int = 0
    chop_fraction: float = 0.5
    M: int | None = None
    M_phi: int | None = None
    CB_M: int | None = None
    budget: int = 3000
    dt: float = 0.01
    stall_window: int = 20
    resume_frac: float = 0.8
    periodic_generations: int = 10
    max_total_evals: int = 200_000
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        positive_ints = ("n", "L_U", "instances", "budget", "stall_window", "periodic_generations", "max_total_evals")
        for name in positive_ints:
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        if not isinstance(self.L_R, int) or self.L_R < 0:
            raise ConfigError(f"L_R must be a non-negative integer, got {self.L_R!r}")
        if self.n < 2:
            raise ConfigError("n must be >= 2")
        if self.n > max_qubits():
            raise ConfigError(f"n={self.n} above the qubit cap {max_qubits()} (set REDUCECHOP_MAX_QUBITS)")
        if not 0.0 < self.eps < 1.0:
            raise ConfigError(f"eps must lie in (0, 1), got {self.eps}")
        if not 0.0 < self.p_m < 1.0:
            raise ConfigError(f"p_m must lie in (0, 1), got {self.p_m}")
        if self.schedule not in ("soft", "parametric"):
            raise ConfigError(f"schedule must be 'soft' or 'parametric', got {self.schedule!r}")
        if not 0.0 <= self.chop_fraction <= 1.0:
            raise ConfigError("chop_fraction must lie in [0, 1]")
        for name in ("M", "M_phi", "CB_M"):
            v = getattr(self, name)
            if v is not None and (not isinstance(v, int) or v < 1):
                raise ConfigError(f"{name} must be a positive integer or null, got {v!r}")
        if not 0.0 < self.dt <= 1.0:
            raise ConfigError("dt must lie in (0, 1]")
        if not 0.0 < self.resume_frac <= 1.0:
            raise ConfigError("resume_frac must lie in (0, 1]")
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {self.schema_version}")

    # derived protocol values
    @property
    def shots(self) -> int:
        return protocol_shots(self.n, self.eps) if self.M is None else self.M

    @property
    def threshold(self) -> int:
        return protocol_threshold(self.n) if self.CB_M is None else self.CB_M

    @property
    def cut(self) -> int:
        return int(math.floor(self.L_U * self.chop_fraction))

    def settings(self) -> Settings:
        return Settings(
            dt=self.dt,
            dt_min=self.dt / 16,
            resume_frac=self.resume_frac,
            stall_window=self.stall_window,
            budget=self.budget,
            periodic_generations=self.periodic_generations,
            max_total_evals=self.max_total_evals,
        )

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        if "n" not in d:
            raise ConfigError("config is missing required key 'n'")
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"malformed config JSON at line {e.lineno} column {e.colno}: {e.msg}") from e
        return cls.from_dict(d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def check_gate(config: ExperimentConfig) -> None:
    if not budget_gate(config.shots, config.eps, config.p_m):
        raise ConfigError(
            f"measurement budget M={config.shots} cannot reach p_m={config.p_m} at eps={config.eps}; "
            f"minimum M is {min_budget(config.eps, config.p_m)}"
        )


def instance_seeds(base_seed: int, count: int) -> list[int]:
    children = np.random.SeedSequence(base_seed).spawn(count)
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in children]


def build_problem(config: ExperimentConfig, rng: np.random.Generator) -> ReducerProblem:
    """Draw TFIM angles for the whole circuit and split it at the cut."""
    n = config.n
    phi = random_params(tfim_num_params(n, config.L_U), rng)
    split = tfim_num_params(n, config.cut)
    return ReducerProblem.tfim_hea(
        n,
        config.cut,
        config.L_R,
        phi[:split],
        config.eps,
        p_m=config.p_m,
        M=config.shots,
        CB_M=config.threshold,
        schedule=config.schedule,
        phi_u2=phi[split:],
        M_phi=config.M_phi,
    )


def run_instance(config: ExperimentConfig, instance_id: int, seed: int) -> InstanceRecord:
    rng = np.random.default_rng(seed)
    problem = build_problem(config, rng)
    if problem.U2 is None or config.cut == config.L_U:
        problem.U2 = Circuit.identity(config.n)
    return run_activation(problem, rng, config.settings(), instance_id=instance_id, seed=seed)


def _run_instance_args(args):
    return run_instance(*args)


@dataclass
class ExperimentRecord:
    config: ExperimentConfig
    config_hash: str
    instances: list[InstanceRecord]
    wall_clock: float
    version: str = __version__
    histogram: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.histogram:
            ks = [r.final.K for r in self.instances if r.final is not None]
            self.histogram = dict(sorted(Counter(ks).items()))

    @property
    def success_rate(self) -> float:
        return sum(r.success for r in self.instances) / len(self.instances)

    @property
    def fidelities(self) -> list[float | None]:
        return [r.fidelity for r in self.instances]

    @property
    def bounds(self) -> list[float | None]:
        return [r.bound for r in self.instances]

    def summary(self) -> dict:
        return {
            "version": self.version,
            "config_hash": self.config_hash,
            "config": self.config.to_dict(),
            "M": self.config.shots,
            "CB_M": self.config.threshold,
            "success_rate": self.success_rate,
            "final_K_histogram": {str(k): v for k, v in self.histogram.items()},
            "wall_clock_s": self.wall_clock,
            "instances": [r.summary() for r in self.instances],
        }


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def trajectory_csv(record: ExperimentRecord) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["instance_id", "phase", "t", "generation", "K", "p", "loss", "estimable"])
    for r in record.instances:
        for row in r.trajectory:
            w.writerow([r.instance_id, row.phase] + [_fmt(v) for v in row[1:]])
    return buf.getvalue()


def histogram_csv(record: ExperimentRecord) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["K", "count"])
    for k, c in record.histogram.items():
        w.writerow([k, c])
    return buf.getvalue()


def run_experiment(config: ExperimentConfig, out: str | os.PathLike | None = None, workers: int = 1) -> ExperimentRecord:
    """Run every instance and, when ``out`` is given, write
    ``trajectory.csv``, ``histogram.csv`` and ``summary.json`` there.

    Each instance gets its own seed spawned from ``config.seed``, so results
    do not depend on ``workers`` or on scheduling order.
    """
    check_gate(config)
    out_dir = None
    if out is not None:
        out_dir = Path(out)
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise OSError(f"cannot create output directory {out_dir}: {e}") from e
        if not os.access(out_dir, os.W_OK):
            raise OSError(f"output directory {out_dir} is not writable")

    seeds = instance_seeds(config.seed, config.instances)
    jobs = [(config, i, s) for i, s in enumerate(seeds)]
    start = time.perf_counter()
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_instance_args, jobs))
    else:
        records = [run_instance(*j) for j in jobs]
    record = ExperimentRecord(config, config.hash(), records, time.perf_counter() - start)

    if out_dir is not None:
        (out_dir / "trajectory.csv").write_text(trajectory_csv(record))
        (out_dir / "histogram.csv").write_text(histogram_csv(record))
        (out_dir / "summary.json").write_text(json.dumps(record.summary(), indent=2))
    return record


# --------------------------------------------------------------------------- #
# end-to-end estimate of the output distribution
# --------------------------------------------------------------------------- #
@dataclass
class PipelineReport:
    estimate: object
    sparse: object
    p_hat: np.ndarray
    exact: np.ndarray | None
    bound: float
    confidence: float

    @property
    def l1(self) -> float | None:
        if self.exact is None:
            return None
        return float(np.sum(np.abs(self.p_hat - self.exact)))

    @property
    def trace_bound(self) -> float:
        """``2 sqrt(1 - F_lb)``: what the fidelity bound implies for the L1 error."""
        return 2.0 * math.sqrt(max(0.0, 1.0 - self.bound))


def chop_pipeline(
    plan: ChopPlan,
    budget: ShotBudget,
    eps: float,
    p_m: float,
    rng: np.random.Generator,
    exact_reference: bool | None = None,
    max_rank: int | None | str = "budget",
) -> PipelineReport:
    """Rank estimate at the chop, Hadamard tests on the kept support, then
    recombination with the exact second half."""
    psi = first_half_state(plan)
    chop = estimate_chop_state(psi, budget, eps, p_m, rng, max_rank=max_rank)
    p_hat = chop_distribution(plan, chop.state)
    if exact_reference is None:
        exact_reference = plan.n <= EXACT_REFERENCE_MAX_QUBITS
    exact = None
    if exact_reference:
        full = Circuit.identity(plan.n)
        for U in plan.pieces:
            full = full.then(U)
        exact = run_circuit(full).probabilities()
    return PipelineReport(chop.estimate, chop.state, p_hat, exact, chop.bound, chop.confidence)


def tfim_plan(n: int, L_U: int, cut: int, rng: np.random.Generator) -> ChopPlan:
    phi = random_params(tfim_num_params(n, L_U), rng)
    split = tfim_num_params(n, cut)
    return ChopPlan.single(build_tfim(n, cut, phi[:split]), build_tfim(n, L_U - cut, phi[split:]))


# --------------------------------------------------------------------------- #
# Monte Carlo bound verification
# --------------------------------------------------------------------------- #
@dataclass
class BoundReport:
    which: str
    trials: int
    counted: int
    violations: int
    bound: float
    passed: bool
    p_value: float
    details: dict = field(default_factory=dict)

    @property
    def rate(self) -> float:
        return self.violations / self.counted if self.counted else 0.0

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["rate"] = self.rate
        return d


def _one_sided(violations: int, counted: int, bound: float, alpha: float = 0.01) -> tuple[bool, float]:
    # P(X >= violations) under X ~ Bin(counted, bound); fail only when significant
    if violations == 0 or counted == 0:
        return True, 1.0
    pv = float(binom.sf(violations - 1, counted, min(1.0, bound)))
    return pv >= alpha, pv


def tail_state(n: int, K: int, eps: float, excess: float) -> np.ndarray:
    """Probability vector with ``K`` equal heavy outcomes and tail mass ``eps + excess``."""
    N = 2**n
    if not 0 < K < N:
        raise ValueError("need 0 < K < 2^n")
    tail = eps + excess
    probs = np.full(N, tail / (N - K))
    probs[:K] = (1.0 - tail) / K
    return probs


@dataclass(frozen=True)
class BoundConfig:
    n: int = 6
    eps: float = 0.05
    p_m: float = 1e-4
    M: int = 4000
    M_phi: int | None = None
    K: int = 8
    excess: float = 0.005
    target: float = 0.05
    L_U1: int = 5
    seed: int = 0
    recon_eps: float = 0.08
    probs: np.ndarray | None = field(default=None, compare=False)


def verify_bounds(which: str, trials: int, config: BoundConfig | None = None) -> BoundReport:
    """Empirical violation rate against the analytic failure probability.

    ``lemma2``: states whose ``K`` heaviest outcomes miss ``eps + excess`` of
    the mass, so every ``K' <= K`` is a wrong answer. Two checks run on the
    same trials: a fixed-``K`` one where the acceptance threshold ``m0`` is
    chosen so that the bound equals ``target``, and the full estimator,
    whose wrong acceptances must stay below ``p_m``.

    ``lemma3``: random TFIM input states at the protocol budget; a violation
    is an accepted estimate whose reconstruction fidelity falls under the
    reported lower bound. The allowed rate is the bound's failure probability.
    """
    if trials < 100:
        raise ValueError("trials must be >= 100")
    cfg = config or BoundConfig()
    rng = np.random.default_rng(cfg.seed)
    if which == "lemma2":
        return _verify_tail_bound(trials, cfg, rng)
    if which == "lemma3":
        return _verify_reconstruction_bound(trials, cfg, rng)
    raise ValueError(f"unknown bound {which!r}; use lemma2 or lemma3")


def _verify_tail_bound(trials: int, cfg: BoundConfig, rng: np.random.Generator) -> BoundReport:
    probs = cfg.probs if cfg.probs is not None else tail_state(cfg.n, cfg.K, cfg.eps, cfg.excess)
    probs = np.asarray(probs, dtype=float)
    M, eps = cfg.M, cfg.eps
    # largest m0 with exp(-2M(eps - m0/M)^2) <= target
    m0 = int(math.floor(M * (eps - math.sqrt(math.log(1 / cfg.target) / (2 * M)))))
    fixed_bound = math.exp(-2 * M * (eps - m0 / M) ** 2) if m0 >= 0 else 0.0

    def tail(entries) -> float:
        return 1.0 - float(sum(probs[int(e.bitstring, 2)] for e in entries))

    fixed_viol = alg_viol = accepted = 0
    for _ in range(trials):
        est = estimate_cb_rank(probs, M, eps, cfg.p_m, rng)
        top = est.support[: cfg.K]
        outside = M - sum(e.second_count for e in top)
        # fixed K: small second-set residual although the kept set misses > eps
        if m0 >= 0 and outside <= m0 and tail(top) > eps:
            fixed_viol += 1
        if est.F:
            accepted += 1
            if tail(est.retained) > eps:
                alg_viol += 1
    ok_fixed, pv_fixed = _one_sided(fixed_viol, trials, fixed_bound)
    ok_alg, pv_alg = _one_sided(alg_viol, trials, cfg.p_m)
    return BoundReport(
        "lemma2",
        trials,
        trials,
        fixed_viol + alg_viol,
        fixed_bound,
        ok_fixed and ok_alg,
        min(pv_fixed, pv_alg),
        {
            "fixed_K": cfg.K,
            "m0": m0,
            "fixed_violations": fixed_viol,
            "fixed_bound": fixed_bound,
            "estimator_accepted": accepted,
            "estimator_violations": alg_viol,
            "estimator_bound": cfg.p_m,
        },
    )


def _verify_reconstruction_bound(trials: int, cfg: BoundConfig, rng: np.random.Generator) -> BoundReport:
    n, eps = cfg.n, cfg.recon_eps
    M = protocol_shots(n, eps)
    budget = ShotBudget(M, cfg.M_phi if cfg.M_phi is not None else M)
    counted = 0
    viol = 0
    worst_gap = math.inf
    max_fail = 0.0
    for _ in range(trials):
        phi = random_params(tfim_num_params(n, cfg.L_U1), rng)
        psi = run_circuit(build_tfim(n, cfg.L_U1, phi))
        chop = estimate_chop_state(psi, budget, eps, cfg.p_m, rng)
        if not chop.estimate.F:
            continue
        counted += 1
        fid = chop.state.fidelity(psi)
        worst_gap = min(worst_gap, fid - chop.bound)
        max_fail = max(max_fail, 1.0 - chop.confidence)
        if fid < chop.bound:
            viol += 1
    ok, pv = _one_sided(viol, counted, cfg.p_m)
    return BoundReport(
        "lemma3",
        trials,
        counted,
        viol,
        cfg.p_m,
        ok and counted > 0,
        pv,
        {
            "eps": eps,
            "M_p": budget.M_p,
            "M_phi": budget.M_phi,
            "min_fidelity_minus_bound": None if counted == 0 else worst_gap,
            "max_failure_probability": max_fail,
        },
    )


def state_from_json(text: str) -> Statevector:
    d = json.loads(text)
    return Statevector.from_dict(d)
