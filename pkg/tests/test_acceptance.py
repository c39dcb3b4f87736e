"""Acceptance criteria AC-1 .. AC-9, one PASS/FAIL line each."""

import time

import numpy as np

from reducechop.amplitudes import ShotBudget
from reducechop.ansatz import build_hea, build_tfim, hea_num_params, random_params, tfim_num_params
from reducechop.cbrank import best_rank_k_approx, estimate_cb_rank, estimate_from_counts, top_k_mass
from reducechop.chop import ChopPlan, chop_probability_exact, metropolis_sample, multi_cut_probability
from reducechop.harness import ExperimentConfig, chop_pipeline, run_experiment, tfim_plan, verify_bounds
from reducechop.optimize import protocol_shots
from reducechop.sim import Circuit, Statevector, all_bitstrings, ghz_circuit, random_circuit, run_circuit

from conftest import AC_RESULTS


def report(ac: str, ok: bool, detail: str) -> None:
    line = f"{ac} {'PASS' if ok else 'FAIL'}: {detail}"
    AC_RESULTS.append(line)
    print(line)
    assert ok, line


def direct(plan: ChopPlan) -> np.ndarray:
    full = Circuit.identity(plan.n)
    for U in plan.pieces:
        full = full.then(U)
    return run_circuit(full).probabilities()


def test_ac1_resolution_of_identity():
    start = time.perf_counter()
    n, worst = 6, 0.0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        U1 = build_tfim(n, 5, random_params(tfim_num_params(n, 5), rng))
        U2 = build_tfim(n, 5, random_params(tfim_num_params(n, 5), rng))
        R = build_hea(n, 2, random_params(hea_num_params(n, 2), rng))
        plan = ChopPlan.single(U1, U2, R)
        P = direct(plan)
        worst = max(worst, max(abs(chop_probability_exact(plan, x) - P[int(x, 2)]) for x in all_bitstrings(n)))
    dt = time.perf_counter() - start
    report("AC-1", worst <= 1e-10 and dt < 30, f"max |P_chop - P| = {worst:.2e} over 20 triples (n=6), {dt:.1f}s")


def test_ac2_best_rank_k_optimality():
    start = time.perf_counter()
    n, worst_eq, losses = 5, 0.0, 0
    for seed in range(50):
        rng = np.random.default_rng(seed)
        psi = Statevector.from_amplitudes(rng.normal(size=2**n) + 1j * rng.normal(size=2**n))
        for K in (1, 2, 4, 8):
            best = best_rank_k_approx(psi, K).fidelity(psi)
            worst_eq = max(worst_eq, abs(best - top_k_mass(psi, K)))
            # 1000 random K-sparse competitors: random supports, random complex amplitudes
            supports = np.argsort(rng.random((1000, 2**n)), axis=1)[:, :K]
            coeffs = rng.normal(size=(1000, K)) + 1j * rng.normal(size=(1000, K))
            coeffs /= np.linalg.norm(coeffs, axis=1, keepdims=True)
            fids = np.abs(np.sum(coeffs.conj() * psi.amplitudes[supports], axis=1)) ** 2
            losses += int(np.sum(fids > best + 1e-12))
    dt = time.perf_counter() - start
    ok = worst_eq <= 1e-12 and losses == 0 and dt < 60
    report("AC-2", ok, f"|F_best - top-K mass| <= {worst_eq:.1e}, competitors beating best: {losses}/200000, {dt:.1f}s")


def test_ac3_known_sparse_states():
    start = time.perf_counter()
    ghz = run_circuit(ghz_circuit(8)).probabilities()
    flat = np.full(256, 1 / 256)
    good = sum(
        (e.K == 2 and e.F) for e in (estimate_cb_rank(ghz, 4000, 0.05, 1e-4, np.random.default_rng(s)) for s in range(100))
    )
    rejected = sum(
        not estimate_cb_rank(flat, 4000, 0.05, 1e-4, np.random.default_rng(s)).F for s in range(100)
    )
    dt = time.perf_counter() - start
    ok = good >= 99 and rejected == 100 and dt < 60
    report("AC-3", ok, f"GHZ_8 K=2,F=true in {good}/100; H^8 F=false in {rejected}/100; {dt:.1f}s")


def test_ac4_bound_soundness():
    start = time.perf_counter()
    l2 = verify_bounds("lemma2", 1000)
    l3 = verify_bounds("lemma3", 500)
    dt = time.perf_counter() - start
    ok = l2.passed and l3.passed and dt < 600
    report(
        "AC-4",
        ok,
        f"lemma2 violations {l2.violations}/{l2.counted} (bound {l2.bound:.3g}), "
        f"lemma3 violations {l3.violations}/{l3.counted} (bound {l3.bound:.3g}), {dt:.1f}s",
    )


def test_ac5_end_to_end_quality():
    start = time.perf_counter()
    n, eps = 6, 0.08
    M = protocol_shots(n, eps)
    hits, gaps = 0, []
    for seed in range(20):
        rng = np.random.default_rng(seed)
        rep = chop_pipeline(tfim_plan(n, 10, 5, rng), ShotBudget(M, M), eps, 1e-4, rng)
        hits += rep.l1 <= rep.trace_bound
        gaps.append(rep.trace_bound - rep.l1)
    dt = time.perf_counter() - start
    report("AC-5", hits >= 18 and dt < 600, f"{hits}/20 seeds within 2 sqrt(1 - F_lb), min slack {min(gaps):.3f}, {dt:.1f}s")


def _ac6(n: int, limit: float, label: str):
    start = time.perf_counter()
    cfg = ExperimentConfig(n=n, L_U=10, L_R=2, eps=0.08, schedule="soft", instances=10, seed=0)
    rec = run_experiment(cfg)
    dt = time.perf_counter() - start
    ok_inst = [r for r in rec.instances if r.success]
    depth = rec.instances[0].depth_report
    fid_ok = all(r.fidelity >= r.bound for r in ok_inst)
    ok = len(ok_inst) >= 5 and depth["original"] == 40 and depth["max_stage"] == 24 and fid_ok and dt < limit
    report(
        label,
        ok,
        f"n={n}, CB_M={cfg.threshold}, M={cfg.shots}: {len(ok_inst)}/10 reach t=1 with K <= CB_M, "
        f"depth {depth['original']} -> {depth['max_stage']}, fidelity >= bound on all successes: {fid_ok}, {dt:.1f}s",
    )


def test_ac6_experiment_shape_n8():
    assert ExperimentConfig(n=8).threshold == 102 and ExperimentConfig(n=8, eps=0.08).shots == 20000
    _ac6(8, 7200, "AC-6")


def test_ac6_experiment_shape_n6_variant():
    _ac6(6, 900, "AC-6 (n=6 variant)")


def test_ac7_multi_cut():
    start = time.perf_counter()
    worst = 0.0
    for n in (3, 4):
        for seed in range(10):
            rng = np.random.default_rng(seed)
            pieces = tuple(random_circuit(n, 3, rng) for _ in range(3))
            plan = ChopPlan(pieces, (Circuit.identity(n), Circuit.identity(n)))
            P = direct(plan)
            worst = max(worst, max(abs(multi_cut_probability(plan, x) - P[int(x, 2)]) for x in all_bitstrings(n)))
    dt = time.perf_counter() - start
    report("AC-7", worst <= 1e-8 and dt < 60, f"2 cuts, n=3,4, 10 seeds: max error {worst:.2e}, {dt:.1f}s")


def test_ac8_eps_ordering():
    meds = {}
    for eps in (0.02, 0.08):
        rec = run_experiment(ExperimentConfig(n=6, eps=eps, instances=10, seed=0))
        meds[eps] = float(np.median([r.invocations for r in rec.instances]))
    ok = meds[0.02] > meds[0.08]
    report("AC-8", ok, f"median optimizer invocations: eps=0.02 -> {meds[0.02]}, eps=0.08 -> {meds[0.08]}")


def test_ac9_metropolis_ghz4():
    rng = np.random.default_rng(0)
    P = run_circuit(ghz_circuit(4)).probabilities()
    # proposal support from the rank estimate, as a run would have it after the chop
    est = estimate_cb_rank(P, 2000, 0.05, 1e-4, rng)
    support = [e.bitstring for e in est.retained]
    samples = metropolis_sample(lambda x: P[int(x, 2)], 4, 10_000, 500, init_support=support, rng=rng)
    emp = np.bincount([int(s, 2) for s in samples], minlength=16) / len(samples)
    tv = 0.5 * float(np.abs(emp - P).sum())
    report("AC-9", tv <= 0.1, f"GHZ_4, 10^4 steps: TV distance {tv:.4f}")
