"""Numerical tolerances and size caps shared by every module."""

from __future__ import annotations

import os
from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    norm: float = 1e-12
    unitary: float = 1e-12
    # amplitudes below this modulus squared count as zero for the exact CB rank
    zero_probability: float = 1e-14
    degenerate_norm: float = 1e-12
    # floor for covariance eigenvalues in the evolution strategy
    eig_floor: float = 1e-12


TOL = Tolerances()

DEFAULT_MAX_QUBITS = 14
# full 2^n recombination sums are only allowed up to this size
FULL_SUM_MAX_QUBITS = 12
# cap on (2^n)^m intermediate paths for multi-cut recombination
DEFAULT_PATH_CAP = 2**20
# exact reference probabilities are printed by the chop CLI up to this size
EXACT_REFERENCE_MAX_QUBITS = 10


def max_qubits() -> int:
    """Hard qubit cap; ``REDUCECHOP_MAX_QUBITS`` overrides the default."""
    raw = os.environ.get("REDUCECHOP_MAX_QUBITS")
    if raw is None:
        return DEFAULT_MAX_QUBITS
    try:
        value = int(raw)
    except ValueError as exc:
        raise ValueError(f"REDUCECHOP_MAX_QUBITS must be an integer, got {raw!r}") from exc
    if value < 1:
        raise ValueError("REDUCECHOP_MAX_QUBITS must be >= 1")
    return value
