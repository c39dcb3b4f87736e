"""Hadamard-test amplitude estimates, sparse reconstruction of the state at
the chop, and the fidelity lower bound for that reconstruction."""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from .cbrank import CBEstimate, estimate_cb_rank
from .config import TOL
from .sim import (
    Circuit,
    Gate,
    SimulationError,
    Statevector,
    apply_gate,
    bits_to_index,
    run_amplitudes,
    run_circuit,
)
from .sparse import SparseState

# shot count meaning "return the exact amplitude"
EXACT = None
CIRCUIT_MODE_MAX_QUBITS = 4


@dataclass(frozen=True)
class ShotBudget:
    M_p: int
    M_phi: int | None

    def __post_init__(self):
        if self.M_p < 1:
            raise ValueError("M_p must be >= 1")
        if self.M_phi is not None and self.M_phi < 1:
            raise ValueError("M_phi must be >= 1 (or None for exact amplitudes)")


def wald_estimate(a: complex, M_phi: int, rng: np.random.Generator) -> complex:
    """Real and imaginary parts from independent ancilla-0 counts of
    ``M_phi`` shots each, mapped back by ``2 k / M_phi - 1``."""
    p_re = min(1.0, max(0.0, (1.0 + a.real) / 2))
    p_im = min(1.0, max(0.0, (1.0 + a.imag) / 2))
    k_re = rng.binomial(M_phi, p_re)
    k_im = rng.binomial(M_phi, p_im)
    return complex(2.0 * k_re / M_phi - 1.0, 2.0 * k_im / M_phi - 1.0)


def _basis_prep(x: str) -> Circuit:
    return Circuit.from_gates(len(x), [Gate("X", (q,)) for q, c in enumerate(x) if c == "1"])


def ancilla_zero_probability(U: Circuit, b: str, imaginary: bool, init: str | None = None) -> float:
    """P(ancilla = 0) of the one-ancilla Hadamard test for ``<b|U|init>``.

    Simulated on ``n + 1`` qubits with the ancilla as the most significant
    qubit; the controlled unitary acts on the ancilla-1 half of the vector.
    """
    n = U.n
    if n > CIRCUIT_MODE_MAX_QUBITS:
        raise SimulationError(f"circuit-level Hadamard test limited to n <= {CIRCUIT_MODE_MAX_QUBITS}")
    init = init or "0" * n
    # V = X_b U X_init so that <0|V|0> = <b|U|init>
    V = _basis_prep(init).then(U).then(_basis_prep(b))
    state = Statevector.zero(n + 1)
    state = apply_gate(state, Gate("H", (0,)))
    if imaginary:
        state = apply_gate(state, Gate("PHASE", (0,), (-np.pi / 2,)))
    half = 2**n
    amps = np.array(state.amplitudes)
    amps[half:] = run_amplitudes(V, amps[half:])
    state = apply_gate(Statevector(n + 1, amps), Gate("H", (0,)))
    return float(np.sum(state.probabilities()[:half]))


def hadamard_test_amplitude(
    U1: Circuit,
    b: str,
    M_phi: int | None,
    rng: np.random.Generator | None = None,
    init: str | None = None,
    method: str = "fast",
) -> complex:
    """Estimate ``<b|U1|init>`` (``init`` defaults to all zeros).

    ``M_phi=None`` returns the exact amplitude. ``method="fast"`` draws the
    ancilla counts from the known acceptance probability; ``"circuit"`` runs
    the ancilla circuit itself and samples its ancilla marginal (n <= 4).
    """
    if len(b) != U1.n:
        raise SimulationError(f"bitstring {b!r} does not match n={U1.n}")
    start = Statevector.zero(U1.n) if init is None else Statevector.basis(init)
    a = complex(run_circuit(U1, start).amplitudes[bits_to_index(b)])
    if M_phi is EXACT:
        return a
    if rng is None:
        raise ValueError("sampling mode needs an rng")
    if method == "fast":
        return wald_estimate(a, M_phi, rng)
    if method == "circuit":
        p_re = ancilla_zero_probability(U1, b, imaginary=False, init=init)
        p_im = ancilla_zero_probability(U1, b, imaginary=True, init=init)
        k_re = rng.binomial(M_phi, min(1.0, p_re))
        k_im = rng.binomial(M_phi, min(1.0, p_im))
        return complex(2.0 * k_re / M_phi - 1.0, 2.0 * k_im / M_phi - 1.0)
    raise ValueError(f"unknown Hadamard-test method {method!r}")


def estimate_amplitudes(
    state: Statevector,
    bitstrings: Sequence[str],
    M_phi: int | None,
    rng: np.random.Generator | None = None,
) -> dict[str, complex]:
    """Hadamard-test estimates of ``<b|state>`` for many ``b`` of a known state."""
    out = {}
    for b in bitstrings:
        a = complex(state.amplitudes[bits_to_index(b)])
        out[b] = a if M_phi is EXACT else wald_estimate(a, M_phi, rng)
    return out


def reconstruct_state(
    estimate: CBEstimate,
    amplitudes: Mapping[str, complex],
    relative_phase: bool = False,
) -> SparseState:
    """Sparse chop state on the retained support, globally renormalised."""
    support = [e.bitstring for e in estimate.retained]
    if set(amplitudes) != set(support):
        raise ValueError("amplitudes must cover exactly the retained support")
    vals = np.array([complex(amplitudes[x]) for x in support])
    norm = float(np.linalg.norm(vals))
    if norm < TOL.degenerate_norm:
        raise ValueError("all amplitude estimates are zero")
    vals = vals / norm
    if relative_phase:
        top = vals[0]
        if abs(top) > 0:
            vals = vals * (abs(top) / top)
    renorm = 1.0 / (1.0 - estimate.m / estimate.M)
    return SparseState(len(support[0]), dict(zip(support, vals)), renorm)


def fidelity_lower_bound(eps: float, K: int, M_phi: float | None, m: int, M_p: int) -> float:
    """``1 - eps - K / (2 M_phi (1 - m/M_p))`` clipped at 0."""
    if m >= M_p:
        raise ValueError(f"need m < M_p, got m={m}, M_p={M_p}")
    if M_phi is None or math.isinf(M_phi):
        return max(0.0, 1.0 - eps)
    return max(0.0, 1.0 - eps - K / (2.0 * M_phi * (1.0 - m / M_p)))


def bound_confidence(eps: float, m: int, M_p: int) -> float:
    """Probability with which :func:`fidelity_lower_bound` holds."""
    if m >= M_p * eps:
        return 0.0
    return 1.0 - math.exp(-2.0 * M_p * (eps - m / M_p) ** 2)


@dataclass(frozen=True)
class ChopStateEstimate:
    estimate: CBEstimate
    state: SparseState
    bound: float
    confidence: float


def estimate_chop_state(
    state: Statevector,
    budget: ShotBudget,
    eps: float,
    p_m: float,
    rng: np.random.Generator,
    max_rank: int | None | str = "budget",
) -> ChopStateEstimate:
    """Rank estimate, Hadamard tests on the retained support, reconstruction."""
    est = estimate_cb_rank(state, budget.M_p, eps, p_m, rng, max_rank=max_rank)
    support = [e.bitstring for e in est.retained]
    amps = estimate_amplitudes(state, support, budget.M_phi, rng)
    sparse = reconstruct_state(est, amps)
    bound = fidelity_lower_bound(eps, est.K, budget.M_phi, est.m, est.M)
    return ChopStateEstimate(est, sparse, bound, bound_confidence(eps, est.m, est.M))
