"""Gradually activated reducer optimization.

The input circuit ``U1`` is switched on along an activation path while the
estimated rank of ``R(theta) U1(t)|0>`` stays below the stopping threshold
``CB_M``; whenever it breaches, an evolution strategy re-optimizes the reducer
parameters ``theta`` on the rank-plus-confidence loss.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .amplitudes import ShotBudget, estimate_chop_state
from .ansatz import (
    build_hea,
    build_tfim,
    hea_num_params,
    parametric_activation,
    soft_activated_amplitudes,
    tfim_num_params,
)
from .cbrank import CBEstimate, budget_gate, estimate_cb_rank, loss_value, min_budget
from .chop import ChopPlan
from .es import Candidate, EsState, es_step
from .sim import Circuit, Statevector, run_amplitudes


def protocol_shots(n: int, eps: float) -> int:
    """``ceil(eps^-2 n^3 / 4)``"""
    return math.ceil(n**3 / (4 * eps * eps) - 1e-9)


def protocol_threshold(n: int) -> int:
    """``floor(n^3 / 5)``"""
    return n**3 // 5


@dataclass(frozen=True)
class LossValue:
    K: int
    p: float
    value: float
    estimable: bool
    estimate: CBEstimate = field(repr=False, compare=False)

    @classmethod
    def from_estimate(cls, est: CBEstimate) -> "LossValue":
        return cls(est.K, est.p, loss_value(est.K, est.p), est.F, est)


class TrajectoryRow(NamedTuple):
    phase: str
    t: float
    generation: int
    K: int
    p: float
    loss: float
    estimable: bool


@dataclass
class ReducerProblem:
    """One instance: the circuit to activate, the reducer family, and the
    measurement settings used for every rank estimate."""

    n: int
    u1_builder: Callable[[np.ndarray], Circuit]
    phi: np.ndarray
    reducer_builder: Callable[[np.ndarray], Circuit]
    reducer_dim: int
    eps: float
    p_m: float
    M: int
    CB_M: int
    M_phi: int | None = None
    schedule: str = "soft"
    max_rank: int | None | str = "budget"
    U2: Circuit | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=float)
        if self.schedule not in ("soft", "parametric"):
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if self.M_phi is None:
            self.M_phi = self.M

    @classmethod
    def tfim_hea(
        cls,
        n: int,
        L_U1: int,
        L_R: int,
        phi: np.ndarray,
        eps: float,
        p_m: float = 1e-4,
        M: int | None = None,
        CB_M: int | None = None,
        schedule: str = "soft",
        phi_u2: np.ndarray | None = None,
        **kw,
    ) -> "ReducerProblem":
        """TFIM input half with ``L_U1`` layers and an ``L_R``-layer HEA reducer."""
        U2 = build_tfim(n, len(phi_u2) // (2 * n), phi_u2) if phi_u2 is not None else None
        return cls(
            n=n,
            u1_builder=lambda p: build_tfim(n, L_U1, p),
            phi=phi,
            reducer_builder=lambda th: build_hea(n, L_R, th),
            reducer_dim=hea_num_params(n, L_R),
            eps=eps,
            p_m=p_m,
            M=protocol_shots(n, eps) if M is None else M,
            CB_M=protocol_threshold(n) if CB_M is None else CB_M,
            schedule=schedule,
            U2=U2,
            **kw,
        )

    @property
    def num_phi(self) -> int:
        return self.phi.shape[0]

    @property
    def u1(self) -> Circuit:
        return self.u1_builder(self.phi)

    def activated(self, t: float) -> np.ndarray:
        """Amplitudes of the activated input state at ``t``."""
        key = (self.schedule, round(t, 12))
        if key in self._cache:
            return self._cache[key]
        zero = np.zeros(2**self.n, dtype=np.complex128)
        zero[0] = 1.0
        if self.schedule == "soft":
            if "u1" not in self._cache:
                self._cache["u1"] = run_amplitudes(self.u1, zero)
            amps = soft_activated_amplitudes(self._cache["u1"], t)
        else:
            k = int(round(t * self.num_phi))
            amps = run_amplitudes(self.u1_builder(parametric_activation(self.phi, k)), zero)
        if len(self._cache) > 64:
            self._cache = {k: v for k, v in self._cache.items() if k == "u1"}
        self._cache[key] = amps
        return amps

    def chop_state(self, theta: np.ndarray, t: float) -> np.ndarray:
        return run_amplitudes(self.reducer_builder(theta), self.activated(t))


def loss(theta: np.ndarray, t: float, problem: ReducerProblem, rng: np.random.Generator) -> LossValue:
    """``K - log(1 - p)`` from a fresh rank estimate of ``R(theta) U1(t)|0>``.

    Non-estimable states fall back to the distinct-outcome count with the
    last computed ``p``, which penalises them (``+inf`` when ``p == 1``).
    """
    probs = np.abs(problem.chop_state(theta, t)) ** 2
    est = estimate_cb_rank(probs, problem.M, problem.eps, problem.p_m, rng, problem.max_rank)
    return LossValue.from_estimate(est)


# --------------------------------------------------------------------------- #
# optimizer driver
# --------------------------------------------------------------------------- #
@dataclass
class Settings:
    dt: float = 0.01
    dt_min: float = 0.01 / 16
    resume_frac: float = 0.8
    stall_window: int = 20
    budget: int = 3000
    periodic_generations: int = 10
    max_total_evals: int = 200_000
    sigma0: float | None = None
    popsize: int | None = None


@dataclass
class OptimizeResult:
    theta: np.ndarray
    best: LossValue | None
    trajectory: list[TrajectoryRow]
    success: bool
    stop: str
    evaluations: int


def optimize_reducer(
    problem: ReducerProblem,
    t: float,
    es_state: EsState,
    budget: int,
    rng: np.random.Generator,
    resume_threshold: float | None = None,
    stall_window: int = 20,
    max_generations: int | None = None,
) -> OptimizeResult:
    """Run ES generations on ``theta`` at fixed activation ``t``.

    Stops when the best estimate is estimable with ``K <= resume_threshold``
    (``"resume"``), after ``stall_window`` generations without a better best
    value (``"stall"``), when the next generation would exceed ``budget`` loss
    evaluations (``"budget"``), or after ``max_generations`` (``"generations"``).
    The starting mean is evaluated first and competes for best.
    """
    theta0 = np.array(es_state.mean)
    if budget < 1:
        return OptimizeResult(theta0, None, [], False, "budget", 0)

    def fn(theta, r):
        return loss(theta, t, problem, r)

    start = fn(theta0, rng)
    best = Candidate(theta0, start.value, start)
    evals = 1
    rows: list[TrajectoryRow] = [TrajectoryRow("optimize", t, 0, start.K, start.p, start.value, start.estimable)]

    def done(c: Candidate) -> bool:
        lv = c.info
        return resume_threshold is not None and lv.estimable and lv.K <= resume_threshold

    stop = "resume" if done(best) else None
    since_improved = 0
    state = es_state
    while stop is None:
        if evals + state.lam > budget:
            stop = "budget"
            break
        if max_generations is not None and state.generation >= max_generations:
            stop = "generations"
            break
        state, gen_best, _ = es_step(state, fn, rng)
        evals += state.lam
        lv = gen_best.info
        rows.append(TrajectoryRow("optimize", t, state.generation, lv.K, lv.p, lv.value, lv.estimable))
        if gen_best.value < best.value:
            best = gen_best
            since_improved = 0
        else:
            since_improved += 1
        if done(best):
            stop = "resume"
        elif since_improved >= stall_window:
            stop = "stall"

    info: LossValue = best.info
    success = info.estimable and info.K <= problem.CB_M
    return OptimizeResult(np.array(best.theta), info, rows, success, stop, evals)


# --------------------------------------------------------------------------- #
# activation
# --------------------------------------------------------------------------- #
@dataclass
class ActivationController:
    schedule: str
    CB_M: int
    dt: float = 0.01
    t: float = 0.0
    history: list[TrajectoryRow] = field(default_factory=list)
    invocations: int = 0
    periodic_passes: int = 0
    evaluations: int = 0
    stops: list[str] = field(default_factory=list)

    def record(self, phase: str, t: float, lv: LossValue, generation: int = 0) -> None:
        self.history.append(TrajectoryRow(phase, t, generation, lv.K, lv.p, lv.value, lv.estimable))

    def breach(self, lv: LossValue) -> bool:
        return (not lv.estimable) or lv.K > self.CB_M


@dataclass
class InstanceRecord:
    instance_id: int
    seed: int | None
    schedule: str
    success: bool
    failure: str | None
    t_final: float
    final: CBEstimate | None
    theta: np.ndarray
    fidelity: float | None
    bound: float | None
    bound_confidence: float | None
    invocations: int
    periodic_passes: int
    evaluations: int
    trajectory: list[TrajectoryRow]
    depth_report: dict | None = None
    stop_reasons: list[str] = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "seed": self.seed,
            "schedule": self.schedule,
            "success": self.success,
            "failure": self.failure,
            "t_final": self.t_final,
            "final_K": None if self.final is None else self.final.K,
            "final_p": None if self.final is None else self.final.p,
            "final_F": None if self.final is None else self.final.F,
            "final_m": None if self.final is None else self.final.m,
            "theta": [float(v) for v in self.theta],
            "fidelity": self.fidelity,
            "bound": self.bound,
            "bound_confidence": self.bound_confidence,
            "optimizer_invocations": self.invocations,
            "periodic_passes": self.periodic_passes,
            "evaluations": self.evaluations,
            "stop_reasons": self.stop_reasons,
            "depth_report": self.depth_report,
        }


def _new_es(theta: np.ndarray, problem: ReducerProblem, settings: Settings) -> EsState:
    sigma = problem.eps if settings.sigma0 is None else settings.sigma0
    return EsState.initial(theta, sigma, settings.popsize)


def run_activation(
    problem: ReducerProblem,
    rng: np.random.Generator,
    settings: Settings | None = None,
    theta0: np.ndarray | None = None,
    instance_id: int = 0,
    seed: int | None = None,
) -> InstanceRecord:
    """Activate ``U1`` fully, optimizing the reducer on every threshold breach,
    then reconstruct the chop state and compare it with the exact one."""
    settings = settings or Settings()
    if not budget_gate(problem.M, problem.eps, problem.p_m):
        raise ValueError(
            f"measurement budget too small: M={problem.M}, need M >= "
            f"{min_budget(problem.eps, problem.p_m)} for eps={problem.eps}, p_m={problem.p_m}"
        )
    theta = np.zeros(problem.reducer_dim) if theta0 is None else np.array(theta0, dtype=float)
    ctl = ActivationController(problem.schedule, problem.CB_M, settings.dt)
    resume = settings.resume_frac * problem.CB_M
    failure = None

    def evaluate(t: float) -> LossValue:
        ctl.evaluations += 1
        return loss(theta, t, problem, rng)

    def optimize(t: float, full: bool) -> OptimizeResult:
        if full:
            res = optimize_reducer(
                problem,
                t,
                _new_es(theta, problem, settings),
                min(settings.budget, max(0, settings.max_total_evals - ctl.evaluations)),
                rng,
                resume_threshold=resume,
                stall_window=settings.stall_window,
            )
            ctl.invocations += 1
            ctl.stops.append(res.stop)
        else:
            es = _new_es(theta, problem, settings)
            res = optimize_reducer(
                problem,
                t,
                es,
                1 + settings.periodic_generations * es.lam,
                rng,
                stall_window=settings.stall_window,
                max_generations=settings.periodic_generations,
            )
            ctl.periodic_passes += 1
        ctl.evaluations += res.evaluations
        ctl.history.extend(res.trajectory)
        return res

    lv = evaluate(0.0)
    ctl.record("activate", 0.0, lv)
    if problem.schedule == "soft":
        dt = settings.dt
        prev_K = lv.K
        while ctl.t < 1.0:
            if ctl.evaluations >= settings.max_total_evals:
                failure = "evaluation budget exhausted"
                break
            t_next = min(1.0, ctl.t + dt)
            lv = evaluate(t_next)
            ctl.record("activate", t_next, lv)
            if ctl.breach(lv) and lv.K > 2 * prev_K and dt / 2 >= settings.dt_min:
                # rank jumped: retry with a finer step
                dt /= 2
                continue
            ctl.t = t_next
            if not ctl.breach(lv):
                prev_K = lv.K
                dt = min(settings.dt, dt * 2)
                continue
            res = optimize(ctl.t, full=True)
            theta = res.theta
            if res.best is None or not res.best.estimable:
                failure = "rank not estimable after optimization"
                break
            prev_K = res.best.K
        if failure is None:
            lv = evaluate(1.0)
            ctl.record("activate", 1.0, lv)
            if not lv.estimable or (lv.K > resume and resume >= 1):
                res = optimize(1.0, full=True)
                theta = res.theta
    else:
        N = problem.num_phi
        for k in range(1, N + 1):
            if ctl.evaluations >= settings.max_total_evals:
                failure = "evaluation budget exhausted"
                break
            t = k / N
            lv = evaluate(t)
            ctl.record("activate", t, lv)
            ctl.t = t
            res = optimize(t, full=ctl.breach(lv))
            # periodic passes only move theta when they found something better
            if res.best is not None and (ctl.breach(lv) or res.best.value <= lv.value):
                theta = res.theta
            if ctl.breach(lv) and (res.best is None or not res.best.estimable):
                failure = "rank not estimable after optimization"
                break

    # final reconstruction with fresh shots
    exact = problem.chop_state(theta, ctl.t)
    exact_state = Statevector(problem.n, exact / np.linalg.norm(exact))
    chop = estimate_chop_state(
        exact_state,
        ShotBudget(problem.M, problem.M_phi),
        problem.eps,
        problem.p_m,
        rng,
        max_rank=problem.max_rank,
    )
    ctl.history.append(
        TrajectoryRow("final", ctl.t, 0, chop.estimate.K, chop.estimate.p, chop.estimate.loss, chop.estimate.F)
    )
    fid = chop.state.fidelity(exact_state)
    success = (
        failure is None
        and ctl.t >= 1.0
        and chop.estimate.F
        and chop.estimate.K <= problem.CB_M
    )
    if failure is None and not success:
        failure = "final rank above the stopping threshold or not estimable"

    depth = None
    if problem.U2 is not None:
        R = problem.reducer_builder(theta)
        depth = ChopPlan.single(problem.u1, problem.U2, R).depth_report()

    return InstanceRecord(
        instance_id=instance_id,
        seed=seed,
        schedule=problem.schedule,
        success=success,
        failure=failure,
        t_final=ctl.t,
        final=chop.estimate,
        theta=theta,
        fidelity=fid,
        bound=chop.bound,
        bound_confidence=chop.confidence,
        invocations=ctl.invocations,
        periodic_passes=ctl.periodic_passes,
        evaluations=ctl.evaluations,
        trajectory=ctl.history,
        depth_report=depth,
        stop_reasons=ctl.stops,
    )
