"""The two circuit families (TFIM-style input circuit, hardware-efficient
reducer) and the gradual-activation paths for the input circuit."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import TOL
from .sim import Circuit, Gate, SimulationError, Statevector, run_circuit


class ActivationError(ValueError):
    pass


def tfim_num_params(n: int, L_U: int) -> int:
    return L_U * 2 * n


def hea_num_params(n: int, L_R: int) -> int:
    return 3 * n * (L_R + 1)


def random_params(num: int, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(0.0, 2 * np.pi, size=num)


def _pack(pairs: list[tuple[int, int]]) -> list[list[tuple[int, int]]]:
    # greedy split of an edge list into qubit-disjoint sublayers, order kept
    sublayers: list[list[tuple[int, int]]] = []
    used: list[set[int]] = []
    for a, b in pairs:
        for layer, qubits in zip(sublayers, used):
            if a not in qubits and b not in qubits:
                layer.append((a, b))
                qubits.update((a, b))
                break
        else:
            sublayers.append([(a, b)])
            used.append({a, b})
    return sublayers


def ring_edges(n: int) -> list[tuple[int, int]]:
    return [(i, (i + 1) % n) for i in range(n)]


def _zz_sublayers(n: int) -> list[list[int]]:
    """Ring edge indices grouped into disjoint sublayers (even edges, odd edges,
    plus the wrap edge on its own for odd n)."""
    edges = ring_edges(n)
    groups: list[list[int]] = [[], []]
    busy: list[set[int]] = [set(), set()]
    for e, (a, b) in enumerate(edges):
        slot = e % 2
        if a in busy[slot] or b in busy[slot]:
            groups.append([e])
            busy.append({a, b})
            continue
        groups[slot].append(e)
        busy[slot].update((a, b))
    return [g for g in groups if g]


def hea_cz_layers(n: int) -> list[list[tuple[int, int]]]:
    """CZ pairings of one reducer layer: ``(0,1),(2,3),...`` then
    ``(1,2),(3,4),...`` closing the cycle, e.g. ``(3,0)`` for n=4."""
    first = [(q, q + 1) for q in range(0, n - 1, 2)]
    taken = {frozenset(p) for p in first}
    second = []
    for q in range(1, n, 2):
        pair = (q, (q + 1) % n)
        if pair[0] != pair[1] and frozenset(pair) not in taken:
            second.append(pair)
            taken.add(frozenset(pair))
    if n % 2 == 1 and n > 2 and frozenset((n - 1, 0)) not in taken:
        second.append((n - 1, 0))
    layers = [first]
    layers.extend(_pack(second))
    return [layer for layer in layers if layer]


@dataclass(frozen=True, eq=False)
class TfimAnsatz:
    """RX layer followed by ZZ couplings on a ring, repeated ``L_U`` times.

    ``phi`` is layer-major: for each layer ``n`` RX angles then ``n`` ZZ
    angles, edge ``i`` coupling qubits ``i`` and ``(i+1) % n``.
    """

    n: int
    L_U: int
    phi: np.ndarray

    def __post_init__(self):
        if self.n < 2:
            raise SimulationError("TFIM ansatz needs n >= 2 for the ring")
        phi = np.asarray(self.phi, dtype=float).reshape(-1)
        expected = tfim_num_params(self.n, self.L_U)
        if phi.shape[0] != expected:
            raise SimulationError(
                f"TFIM(n={self.n}, L_U={self.L_U}) needs {expected} angles, got {phi.shape[0]}"
            )
        object.__setattr__(self, "phi", phi)

    @property
    def depth(self) -> int:
        # each ZZ costs two CNOT layers
        return 4 * self.L_U

    def circuit(self) -> Circuit:
        n = self.n
        edges = ring_edges(n)
        sub = _zz_sublayers(n)
        layers: list[tuple[Gate, ...]] = []
        for layer in range(self.L_U):
            block = self.phi[layer * 2 * n : (layer + 1) * 2 * n]
            layers.append(tuple(Gate("RX", (q,), (block[q],)) for q in range(n)))
            for group in sub:
                layers.append(tuple(Gate("ZZ", edges[e], (block[n + e],)) for e in group))
        return Circuit(n, tuple(layers), reported_depth=self.depth)


@dataclass(frozen=True, eq=False)
class HeaAnsatz:
    """U3 layer + alternating CZ pairings, ``L_R`` times, then a final U3 layer.

    ``theta`` holds 3 angles per qubit per U3 layer, qubit-major within a layer.
    """

    n: int
    L_R: int
    theta: np.ndarray

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float).reshape(-1)
        expected = hea_num_params(self.n, self.L_R)
        if theta.shape[0] != expected:
            raise SimulationError(
                f"HEA(n={self.n}, L_R={self.L_R}) needs {expected} angles, got {theta.shape[0]}"
            )
        object.__setattr__(self, "theta", theta)

    @property
    def depth(self) -> int:
        return 2 * self.L_R

    def circuit(self) -> Circuit:
        n = self.n
        angles = self.theta.reshape(self.L_R + 1, n, 3)
        cz = hea_cz_layers(n)
        layers: list[tuple[Gate, ...]] = []
        for layer in range(self.L_R + 1):
            layers.append(tuple(Gate("U3", (q,), tuple(angles[layer, q])) for q in range(n)))
            if layer < self.L_R:
                for pairs in cz:
                    layers.append(tuple(Gate("CZ", p) for p in pairs))
        return Circuit(n, tuple(layers), reported_depth=self.depth)


def build_tfim(n: int, L_U: int, phi) -> Circuit:
    return TfimAnsatz(n, L_U, phi).circuit()


def build_hea(n: int, L_R: int, theta) -> Circuit:
    return HeaAnsatz(n, L_R, theta).circuit()


# --------------------------------------------------------------------------- #
# gradual activation
# --------------------------------------------------------------------------- #
def soft_activated_amplitudes(u1_state: np.ndarray, t: float) -> np.ndarray:
    """Normalised ``cos(pi t/2)|0> + sin(pi t/2) U1|0>`` from precomputed ``U1|0>``."""
    if not 0.0 <= t <= 1.0:
        raise ActivationError(f"activation t={t} outside [0, 1]")
    vec = np.sin(np.pi * t / 2) * np.asarray(u1_state, dtype=np.complex128)
    vec[0] += np.cos(np.pi * t / 2)
    norm = np.linalg.norm(vec)
    if norm < TOL.degenerate_norm:
        raise ActivationError(f"soft activation degenerate at t={t} (U1|0> ~ -|0>)")
    return vec / norm


def soft_activated_state(U1: Circuit, t: float) -> Statevector:
    u1_state = run_circuit(U1).amplitudes
    return Statevector(U1.n, soft_activated_amplitudes(u1_state, t))


def parametric_activation(phi_full, k: int) -> np.ndarray:
    """Keep the first ``k`` angles (parameter-vector order), zero the rest."""
    phi_full = np.asarray(phi_full, dtype=float)
    if not 0 <= k <= phi_full.shape[0]:
        raise ActivationError(f"active count {k} outside [0, {phi_full.shape[0]}]")
    out = np.zeros_like(phi_full)
    out[:k] = phi_full[:k]
    return out


@dataclass(frozen=True)
class ActivationPath:
    mode: str
    t: float = 0.0

    def __post_init__(self):
        if self.mode not in ("soft", "parametric"):
            raise ActivationError(f"unknown activation mode {self.mode!r}")
        if not 0.0 <= self.t <= 1.0:
            raise ActivationError(f"activation t={self.t} outside [0, 1]")

    def active_count(self, num_params: int) -> int:
        return int(round(self.t * num_params))
