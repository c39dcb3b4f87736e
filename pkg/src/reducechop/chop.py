"""Feynman recombination of output probabilities across one or more chops,
and a Metropolis sampler driven by those probabilities."""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from .amplitudes import wald_estimate
from .config import DEFAULT_PATH_CAP, FULL_SUM_MAX_QUBITS
from .sim import (
    Circuit,
    SimulationError,
    Statevector,
    bits_to_index,
    index_to_bits,
    run_amplitudes,
)
from .sparse import SparseState


class ChopError(ValueError):
    pass


def _basis_vector(n: int, i: int) -> np.ndarray:
    v = np.zeros(2**n, dtype=np.complex128)
    v[i] = 1.0
    return v


@dataclass(frozen=True)
class ChopPlan:
    """``U = U_{m+1} ... U_1`` with reducer ``R_i`` applied before chop ``i``
    and undone right after it."""

    pieces: tuple[Circuit, ...]
    reducers: tuple[Circuit, ...]

    def __post_init__(self):
        pieces = tuple(self.pieces)
        reducers = tuple(self.reducers)
        if len(pieces) < 2:
            raise ChopError("a chop plan needs at least two pieces")
        if len(reducers) != len(pieces) - 1:
            raise ChopError(f"{len(pieces)} pieces need {len(pieces) - 1} reducers, got {len(reducers)}")
        n = pieces[0].n
        for c in pieces + reducers:
            if c.n != n:
                raise ChopError("all pieces and reducers must share n")
        object.__setattr__(self, "pieces", pieces)
        object.__setattr__(self, "reducers", reducers)

    @classmethod
    def single(cls, U1: Circuit, U2: Circuit, R: Circuit | None = None) -> "ChopPlan":
        return cls((U1, U2), (R if R is not None else Circuit.identity(U1.n),))

    @property
    def n(self) -> int:
        return self.pieces[0].n

    @property
    def cuts(self) -> int:
        return len(self.reducers)

    def stage_circuits(self) -> list[Circuit]:
        """``R_1 U_1``, ``R_i U_i R_{i-1}^dag`` ..., ``U_{m+1} R_m^dag``."""
        stages = []
        for i, U in enumerate(self.pieces):
            c = Circuit.identity(self.n)
            if i > 0:
                c = c.then(self.reducers[i - 1].dagger())
            c = c.then(U)
            if i < self.cuts:
                c = c.then(self.reducers[i])
            stages.append(c)
        return stages

    def depth_report(self) -> dict:
        """Entangling depth per stage. The measurement overhead ``c`` is kept
        symbolic; both Hadamard-test variants are listed."""
        d = [U.depth for U in self.pieces]
        r = [R.depth for R in self.reducers]
        stages = []
        for i in range(len(d)):
            s = d[i]
            if i > 0:
                s += r[i - 1]
            if i < self.cuts:
                s += r[i]
            stages.append(s)
        variants = {"ghz_swap": 1, "single_ancilla": self.n}
        return {
            "original": sum(d),
            "stages": stages,
            "max_stage": max(stages),
            "overhead": "c",
            "c_variants": variants,
            "max_stage_with_c": {k: max(stages) + c for k, c in variants.items()},
        }


def first_half_state(plan: ChopPlan) -> Statevector:
    """``R_1 U_1 |0>``, the state measured at the (first) chop."""
    stage = plan.stage_circuits()[0]
    return Statevector(plan.n, run_amplitudes(stage, _basis_vector(plan.n, 0)))


def second_half_amplitudes(plan: ChopPlan, x: str) -> np.ndarray:
    """``<x| U_2 R^dag |b>`` for every ``b`` (single cut)."""
    if plan.cuts != 1:
        raise ChopError("second_half_amplitudes needs a single-cut plan")
    if len(x) != plan.n:
        raise SimulationError(f"bitstring {x!r} does not match n={plan.n}")
    W = plan.stage_circuits()[1]
    # one adjoint run gives the whole row: W^dag |x> has entries conj(<x|W|b>)
    row = run_amplitudes(W.dagger(), _basis_vector(plan.n, bits_to_index(x)))
    return np.conj(row)


def chop_probability_exact(plan: ChopPlan, x: str) -> float:
    """``|sum_b <x|U_2 R^dag|b><b|R U_1|0>|^2`` over all ``2^n`` values of ``b``."""
    if plan.cuts != 1:
        raise ChopError("use multi_cut_probability for more than one cut")
    if plan.n > FULL_SUM_MAX_QUBITS:
        raise ChopError(f"full sum limited to n <= {FULL_SUM_MAX_QUBITS}")
    left = first_half_state(plan).amplitudes
    right = second_half_amplitudes(plan, x)
    amp = np.sum(right * left)
    return float(abs(amp) ** 2)


def chop_probability(
    plan: ChopPlan,
    reconstructed: SparseState,
    x: str,
    second_half_shots: int | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """Recombination restricted to the reconstructed support.

    Second-half amplitudes are exact unless ``second_half_shots`` is given,
    in which case each is replaced by a Hadamard-test estimate.
    """
    if len(reconstructed) == 0:
        raise ChopError("empty support")
    if reconstructed.n != plan.n:
        raise ChopError("reconstructed state does not match the plan")
    right = second_half_amplitudes(plan, x)
    idx, amps = reconstructed.arrays()
    coeffs = right[idx]
    if second_half_shots is not None:
        if rng is None:
            raise ValueError("shot-noise mode needs an rng")
        coeffs = np.array([wald_estimate(complex(c), second_half_shots, rng) for c in coeffs])
    return float(abs(np.sum(coeffs * amps)) ** 2)


def chop_distribution(plan: ChopPlan, reconstructed: SparseState) -> np.ndarray:
    """``P_hat(x)`` for every ``x`` at once (exact second half)."""
    n = plan.n
    vec = np.zeros(2**n, dtype=np.complex128)
    idx, amps = reconstructed.arrays()
    vec[idx] = amps
    out = run_amplitudes(plan.stage_circuits()[1], vec)
    return np.abs(out) ** 2


def multi_cut_probability(plan: ChopPlan, x: str, path_cap: int = DEFAULT_PATH_CAP) -> float:
    """Path sum over all intermediate bitstrings ``b_1 ... b_m``.

    Partial sums over ``b_1 .. b_{i-1}`` are carried forward as a vector, so
    each stage costs one circuit run per basis state with non-zero weight.
    """
    n, m = plan.n, plan.cuts
    if len(x) != n:
        raise SimulationError(f"bitstring {x!r} does not match n={n}")
    paths = (2**n) ** m
    if paths > path_cap:
        raise ChopError(f"{paths} paths exceed the cap {path_cap}")
    stages = plan.stage_circuits()
    weights = run_amplitudes(stages[0], _basis_vector(n, 0))
    for W in stages[1:-1]:
        nxt = np.zeros(2**n, dtype=np.complex128)
        for b in np.flatnonzero(weights):
            nxt += weights[b] * run_amplitudes(W, _basis_vector(n, int(b)))
        weights = nxt
    xi = bits_to_index(x)
    amp = 0j
    for b in np.flatnonzero(weights):
        amp += run_amplitudes(stages[-1], _basis_vector(n, int(b)))[xi] * weights[b]
    return float(abs(amp) ** 2)


# --------------------------------------------------------------------------- #
# sampling heuristic
# --------------------------------------------------------------------------- #
def _flip(x: str, q: int) -> str:
    return x[:q] + ("1" if x[q] == "0" else "0") + x[q + 1 :]


def _hamming1(a: str, b: str) -> bool:
    return sum(c1 != c2 for c1, c2 in zip(a, b)) == 1


def metropolis_sample(
    prob_fn: Callable[[str], float],
    n: int,
    steps: int,
    burn_in: int,
    init_support: Sequence[str] | None = None,
    rng: np.random.Generator | None = None,
    jump_prob: float = 0.5,
) -> list[str]:
    """Metropolis chain over bitstrings targeting ``prob_fn``.

    Moves are single-bit flips, mixed with probability ``jump_prob`` with
    independent jumps: uniform over ``init_support`` when one is given
    (Hastings-corrected), else uniform over all bitstrings (symmetric, plain
    ``min(1, P(x')/P(x))`` acceptance). ``jump_prob=0`` gives pure flips.
    Returns the ``steps - burn_in`` states after burn-in.
    """
    if not steps > burn_in >= 0:
        raise ValueError("need steps > burn_in >= 0")
    if not 0.0 <= jump_prob <= 1.0:
        raise ValueError("jump_prob outside [0, 1]")
    rng = rng if rng is not None else np.random.default_rng()
    support = list(dict.fromkeys(init_support)) if init_support else None
    support_set = set(support) if support else None

    cache: dict[str, float] = {}

    def P(x: str) -> float:
        if x not in cache:
            cache[x] = float(prob_fn(x))
        return cache[x]

    def random_bits() -> str:
        return index_to_bits(int(rng.integers(2**n)), n)

    def jump_density(y: str) -> float:
        if support_set is None:
            return 1.0 / 2**n
        return 1.0 / len(support) if y in support_set else 0.0

    def q(y: str, x: str) -> float:
        # proposal density of y given x
        flip = (1.0 - jump_prob) / n if _hamming1(x, y) else 0.0
        return flip + jump_prob * jump_density(y)

    x = None
    for _ in range(100):
        cand = support[int(rng.integers(len(support)))] if support else random_bits()
        if P(cand) > 0:
            x = cand
            break
    if x is None:
        raise ChopError("cold start: no initial bitstring with non-zero probability in 100 tries")

    samples = []
    for step in range(steps):
        if rng.random() < jump_prob:
            y = support[int(rng.integers(len(support)))] if support else random_bits()
        else:
            y = _flip(x, int(rng.integers(n)))
        if y != x:
            py = P(y)
            if py > 0:
                ratio = py / P(x)
                if support_set is not None:
                    ratio *= q(x, y) / q(y, x)
                if ratio >= 1.0 or rng.random() < ratio:
                    x = y
        if step >= burn_in:
            samples.append(x)
    return samples
