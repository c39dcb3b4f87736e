from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .sim import SimulationError, Statevector, bits_to_index


@dataclass(frozen=True, eq=False)
class SparseState:
    """Unit-norm state stored as ``bitstring -> amplitude`` on its support.

    ``renorm`` is the ``1/(1 - m/M)`` factor implied by the residual count of
    the rank estimate that selected the support (1.0 when exact).
    """

    n: int
    entries: dict[str, complex] = field(repr=False)
    renorm: float = 1.0

    def __post_init__(self):
        if not self.entries:
            raise SimulationError("sparse state with empty support")
        entries = {}
        for x, a in self.entries.items():
            if len(x) != self.n:
                raise SimulationError(f"bitstring {x!r} does not have length {self.n}")
            bits_to_index(x)
            entries[x] = complex(a)
        norm2 = sum(abs(a) ** 2 for a in entries.values())
        if abs(norm2 - 1.0) > 1e-10:
            raise SimulationError(f"sparse state is not normalised (norm^2 = {norm2})")
        object.__setattr__(self, "entries", entries)

    def __len__(self) -> int:
        return len(self.entries)

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Basis indices and amplitudes, in insertion order."""
        idx = np.array([bits_to_index(x) for x in self.entries], dtype=np.int64)
        amps = np.array(list(self.entries.values()), dtype=np.complex128)
        return idx, amps

    def to_statevector(self) -> Statevector:
        vec = np.zeros(2**self.n, dtype=np.complex128)
        idx, amps = self.arrays()
        vec[idx] = amps
        return Statevector(self.n, vec)

    def overlap(self, state: Statevector) -> complex:
        """``<state|self>``"""
        idx, amps = self.arrays()
        return complex(np.vdot(state.amplitudes[idx], amps))

    def fidelity(self, state: Statevector) -> float:
        return min(1.0, abs(self.overlap(state)) ** 2)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "entries": {x: [a.real, a.imag] for x, a in self.entries.items()},
            "renorm": self.renorm,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SparseState":
        unknown = set(d) - {"n", "entries", "renorm"}
        if unknown:
            raise SimulationError(f"unknown sparse-state keys: {sorted(unknown)}")
        entries = {x: complex(v[0], v[1]) for x, v in d["entries"].items()}
        return cls(int(d["n"]), entries, float(d.get("renorm", 1.0)))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "SparseState":
        return cls.from_dict(json.loads(text))
