"""Dense statevector simulation.

Basis ordering: index ``i`` encodes the bitstring with qubit 0 as the most
significant bit, so ``"011"`` is index 3 and qubit 0 is the leftmost char.
"""

from __future__ import annotations

import json
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np

from .config import TOL, max_qubits


class SimulationError(ValueError):
    """Invalid gate, circuit or state (bad targets, sizes, norms)."""


GATE_ARITY = {
    "H": 1,
    "X": 1,
    "RX": 1,
    "RZ": 1,
    "PHASE": 1,
    "U3": 1,
    "CNOT": 2,
    "CZ": 2,
    "ZZ": 2,
}
GATE_NPARAMS = {
    "H": 0,
    "X": 0,
    "RX": 1,
    "RZ": 1,
    "PHASE": 1,
    "U3": 3,
    "CNOT": 0,
    "CZ": 0,
    "ZZ": 1,
}
_DIAGONAL = {"RZ", "PHASE", "CZ", "ZZ"}
_SELF_INVERSE = {"H", "X", "CNOT", "CZ"}

_SQRT1_2 = 1 / np.sqrt(2.0)


# --------------------------------------------------------------------------- #
# bitstrings
# --------------------------------------------------------------------------- #
def bits_to_index(x: str) -> int:
    if not x or any(c not in "01" for c in x):
        raise SimulationError(f"not a bitstring: {x!r}")
    return int(x, 2)


def index_to_bits(i: int, n: int) -> str:
    return format(i, f"0{n}b")


def all_bitstrings(n: int) -> list[str]:
    return [index_to_bits(i, n) for i in range(2**n)]


# --------------------------------------------------------------------------- #
# gates
# --------------------------------------------------------------------------- #
@dataclass(frozen=True)
class Gate:
    """One gate from the closed gate set.

    ``targets`` is ``(control, target)`` for CNOT. U3 takes ``(theta, phi, lam)``
    with the usual ``[[c, -e^{i lam} s], [e^{i phi} s, e^{i(phi+lam)} c]]`` form.
    """

    kind: str
    targets: tuple[int, ...]
    params: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in GATE_ARITY:
            raise SimulationError(f"unknown gate kind {self.kind!r}")
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if len(self.targets) != GATE_ARITY[self.kind]:
            raise SimulationError(
                f"{self.kind} acts on {GATE_ARITY[self.kind]} qubit(s), got targets {self.targets}"
            )
        if len(self.params) != GATE_NPARAMS[self.kind]:
            raise SimulationError(
                f"{self.kind} takes {GATE_NPARAMS[self.kind]} parameter(s), got {len(self.params)}"
            )
        if any(t < 0 for t in self.targets):
            raise SimulationError(f"negative target in {self.targets}")
        if len(set(self.targets)) != len(self.targets):
            raise SimulationError(f"two-qubit gate with repeated target {self.targets}")

    @property
    def arity(self) -> int:
        return GATE_ARITY[self.kind]

    @property
    def is_entangling(self) -> bool:
        return self.arity == 2

    def matrix(self) -> np.ndarray:
        k, p = self.kind, self.params
        if k == "H":
            return np.array([[1, 1], [1, -1]], dtype=complex) * _SQRT1_2
        if k == "X":
            return np.array([[0, 1], [1, 0]], dtype=complex)
        if k == "RX":
            c, s = np.cos(p[0] / 2), np.sin(p[0] / 2)
            return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
        if k == "U3":
            theta, phi, lam = p
            c, s = np.cos(theta / 2), np.sin(theta / 2)
            return np.array(
                [
                    [c, -np.exp(1j * lam) * s],
                    [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c],
                ],
                dtype=complex,
            )
        if k == "CNOT":
            return np.array(
                [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
            )
        return np.diag(self.diagonal())

    def diagonal(self) -> np.ndarray:
        k, p = self.kind, self.params
        if k == "RZ":
            return np.exp(np.array([-0.5j, 0.5j]) * p[0])
        if k == "PHASE":
            return np.array([1.0, np.exp(1j * p[0])], dtype=complex)
        if k == "CZ":
            return np.array([1, 1, 1, -1], dtype=complex)
        if k == "ZZ":
            return np.exp(np.array([-0.5j, 0.5j, 0.5j, -0.5j]) * p[0])
        raise SimulationError(f"{k} is not diagonal")

    def dagger(self) -> "Gate":
        if self.kind in _SELF_INVERSE:
            return self
        if self.kind == "U3":
            theta, phi, lam = self.params
            return Gate("U3", self.targets, (-theta, -lam, -phi))
        return Gate(self.kind, self.targets, (-self.params[0],))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "targets": list(self.targets), "params": list(self.params)}


# --------------------------------------------------------------------------- #
# circuits
# --------------------------------------------------------------------------- #
@dataclass(frozen=True)
class Circuit:
    """Ordered gate layers on ``n`` qubits.

    ``reported_depth`` carries depth bookkeeping that differs from the
    structural count (e.g. a native ZZ gate costing two CNOT layers); when it
    is ``None`` the structural ``entangling_depth`` is reported.
    """

    n: int
    layers: tuple[tuple[Gate, ...], ...] = ()
    reported_depth: int | None = None

    def __post_init__(self):
        if self.n < 1:
            raise SimulationError("circuit needs at least one qubit")
        layers = tuple(tuple(layer) for layer in self.layers)
        object.__setattr__(self, "layers", layers)
        for li, layer in enumerate(layers):
            seen: set[int] = set()
            for g in layer:
                for t in g.targets:
                    if t >= self.n:
                        raise SimulationError(
                            f"layer {li}: target {t} out of range for n={self.n}"
                        )
                    if t in seen:
                        raise SimulationError(f"layer {li}: qubit {t} used twice")
                    seen.add(t)

    @classmethod
    def identity(cls, n: int) -> "Circuit":
        return cls(n, (), reported_depth=0)

    @classmethod
    def from_gates(cls, n: int, gates: Iterable[Gate], reported_depth: int | None = None):
        """Pack gates into layers as early as their qubits allow."""
        layers: list[list[Gate]] = []
        frontier = [0] * n
        for g in gates:
            for t in g.targets:
                if t >= n:
                    raise SimulationError(f"target {t} out of range for n={n}")
            li = max(frontier[t] for t in g.targets)
            if li == len(layers):
                layers.append([])
            layers[li].append(g)
            for t in g.targets:
                frontier[t] = li + 1
        return cls(n, tuple(tuple(layer) for layer in layers), reported_depth)

    @property
    def entangling_depth(self) -> int:
        return sum(1 for layer in self.layers if any(g.is_entangling for g in layer))

    @property
    def depth(self) -> int:
        return self.entangling_depth if self.reported_depth is None else self.reported_depth

    @property
    def gates(self) -> list[Gate]:
        return [g for layer in self.layers for g in layer]

    def dagger(self) -> "Circuit":
        layers = tuple(tuple(g.dagger() for g in reversed(layer)) for layer in reversed(self.layers))
        return Circuit(self.n, layers, self.reported_depth)

    def then(self, other: "Circuit") -> "Circuit":
        """This circuit followed by ``other``."""
        if other.n != self.n:
            raise SimulationError(f"cannot compose n={self.n} with n={other.n}")
        if self.reported_depth is None and other.reported_depth is None:
            depth = None
        else:
            depth = self.depth + other.depth
        return Circuit(self.n, self.layers + other.layers, depth)

    def to_dict(self) -> dict:
        d = {"n": self.n, "layers": [[g.to_dict() for g in layer] for layer in self.layers]}
        if self.reported_depth is not None:
            d["reported_depth"] = self.reported_depth
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Circuit":
        unknown = set(d) - {"n", "layers", "reported_depth"}
        if unknown:
            raise SimulationError(f"unknown circuit keys: {sorted(unknown)}")
        if "n" not in d or "layers" not in d:
            raise SimulationError("circuit JSON needs 'n' and 'layers'")
        layers = []
        for li, layer in enumerate(d["layers"]):
            gates = []
            for gi, g in enumerate(layer):
                try:
                    gates.append(Gate(g["kind"], tuple(g["targets"]), tuple(g.get("params", ()))))
                except (KeyError, TypeError) as exc:
                    raise SimulationError(f"layers[{li}][{gi}]: malformed gate {g!r}") from exc
                except SimulationError as exc:
                    raise SimulationError(f"layers[{li}][{gi}]: {exc}") from exc
            layers.append(tuple(gates))
        return cls(int(d["n"]), tuple(layers), d.get("reported_depth"))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "Circuit":
        return cls.from_dict(json.loads(text))


# --------------------------------------------------------------------------- #
# states
# --------------------------------------------------------------------------- #
@dataclass(frozen=True, eq=False)
class Statevector:
    n: int
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.n < 1:
            raise SimulationError("state needs at least one qubit")
        cap = max_qubits()
        if self.n > cap:
            raise SimulationError(f"n={self.n} exceeds the qubit cap {cap}")
        amps = np.array(self.amplitudes, dtype=np.complex128).reshape(-1)
        if amps.shape[0] != 2**self.n:
            raise SimulationError(f"expected {2**self.n} amplitudes, got {amps.shape[0]}")
        norm2 = float(np.vdot(amps, amps).real)
        if abs(norm2 - 1.0) > 1e-10:
            raise SimulationError(f"state is not normalised (norm^2 = {norm2})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def zero(cls, n: int) -> "Statevector":
        amps = np.zeros(2**n, dtype=np.complex128)
        amps[0] = 1.0
        return cls(n, amps)

    @classmethod
    def basis(cls, x: str) -> "Statevector":
        amps = np.zeros(2 ** len(x), dtype=np.complex128)
        amps[bits_to_index(x)] = 1.0
        return cls(len(x), amps)

    @classmethod
    def from_amplitudes(cls, amps: Sequence[complex] | np.ndarray) -> "Statevector":
        amps = np.asarray(amps, dtype=np.complex128).reshape(-1)
        n = int(round(np.log2(amps.shape[0])))
        norm = np.linalg.norm(amps)
        if norm < TOL.degenerate_norm:
            raise SimulationError("cannot normalise a zero vector")
        return cls(n, amps / norm)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def to_dict(self) -> dict:
        return {"n": self.n, "amplitudes": [[a.real, a.imag] for a in self.amplitudes.tolist()]}

    @classmethod
    def from_dict(cls, d: dict) -> "Statevector":
        amps = np.array([complex(re, im) for re, im in d["amplitudes"]])
        return cls(int(d["n"]), amps)


def _check_targets(n: int, gate: Gate) -> None:
    for t in gate.targets:
        if t >= n:
            raise SimulationError(f"{gate.kind} target {t} out of range for n={n}")


def _apply_raw(amps: np.ndarray, n: int, gate: Gate) -> np.ndarray:
    psi = amps.reshape((2,) * n)
    if gate.kind in _DIAGONAL:
        shape = [1] * n
        d = gate.diagonal()
        if gate.arity == 1:
            shape[gate.targets[0]] = 2
            return (psi * d.reshape(shape)).reshape(-1)
        q0, q1 = gate.targets
        d = d.reshape(2, 2)
        if q0 > q1:
            d = d.T
        shape[q0] = shape[q1] = 2
        return (psi * d.reshape(shape)).reshape(-1)
    k = gate.arity
    mat = gate.matrix().reshape((2,) * (2 * k))
    out = np.tensordot(mat, psi, axes=(list(range(k, 2 * k)), list(gate.targets)))
    out = np.moveaxis(out, list(range(k)), list(gate.targets))
    return np.ascontiguousarray(out).reshape(-1)


def apply_gate(state: Statevector, gate: Gate) -> Statevector:
    _check_targets(state.n, gate)
    return Statevector(state.n, _apply_raw(state.amplitudes, state.n, gate))


def run_amplitudes(circuit: Circuit, amps: np.ndarray) -> np.ndarray:
    """Run ``circuit`` on a raw amplitude vector (no validation of the norm)."""
    out = np.asarray(amps, dtype=np.complex128)
    for layer in circuit.layers:
        for g in layer:
            out = _apply_raw(out, circuit.n, g)
    return out


def run_circuit(circuit: Circuit, initial: Statevector | None = None) -> Statevector:
    if initial is None:
        initial = Statevector.zero(circuit.n)
    if initial.n != circuit.n:
        raise SimulationError(f"circuit on {circuit.n} qubits, state on {initial.n}")
    return Statevector(circuit.n, run_amplitudes(circuit, initial.amplitudes))


def probability(state: Statevector, x: str) -> float:
    if len(x) != state.n:
        raise SimulationError(f"bitstring {x!r} has length {len(x)}, state has n={state.n}")
    a = state.amplitudes[bits_to_index(x)]
    return float(a.real**2 + a.imag**2)


def _normalised_probs(probs: np.ndarray) -> np.ndarray:
    p = np.clip(np.asarray(probs, dtype=float), 0.0, None)
    return p / p.sum()


def sample_counts(probs: np.ndarray, M: int, rng: np.random.Generator) -> np.ndarray:
    """Outcome histogram of ``M`` i.i.d. shots from a probability vector."""
    if M < 1:
        raise SimulationError("shot count must be >= 1")
    return rng.multinomial(M, _normalised_probs(probs))


def sample(state: Statevector, M: int, rng: np.random.Generator) -> list[str]:
    """``M`` i.i.d. measurement outcomes in the computational basis."""
    if M < 1:
        raise SimulationError("shot count must be >= 1")
    idx = rng.choice(2**state.n, size=M, p=_normalised_probs(state.probabilities()))
    return [index_to_bits(int(i), state.n) for i in idx]


def fidelity(a: Statevector, b: Statevector) -> float:
    if a.n != b.n:
        raise SimulationError(f"fidelity between n={a.n} and n={b.n}")
    return float(min(1.0, abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2))


# --------------------------------------------------------------------------- #
# small circuit families used in tests and fixtures
# --------------------------------------------------------------------------- #
def ghz_circuit(n: int) -> Circuit:
    gates = [Gate("H", (0,))] + [Gate("CNOT", (q, q + 1)) for q in range(n - 1)]
    return Circuit.from_gates(n, gates)


def random_circuit(n: int, depth: int, rng: np.random.Generator) -> Circuit:
    """Brickwork of random U3 layers and CNOT/CZ/ZZ pairs."""
    gates: list[Gate] = []
    for d in range(depth):
        for q in range(n):
            gates.append(Gate("U3", (q,), tuple(rng.uniform(0, 2 * np.pi, 3))))
        for q in range(d % 2, n - 1, 2):
            kind = ("CNOT", "CZ", "ZZ")[int(rng.integers(3))]
            params = (rng.uniform(0, 2 * np.pi),) if kind == "ZZ" else ()
            gates.append(Gate(kind, (q, q + 1), params))
    return Circuit.from_gates(n, gates)
