"""Reducer-assisted circuit chopping: sparse-state estimation at a cut,
Feynman recombination, and gradually activated reducer optimization."""

__version__ = "0.1.0"

from .sim import Circuit, Gate, Statevector, run_circuit, sample  # noqa: E402
from .sparse import SparseState  # noqa: E402
from .cbrank import CBEstimate, estimate_cb_rank, exact_cb_rank, best_rank_k_approx  # noqa: E402
from .chop import ChopPlan, chop_probability, chop_probability_exact, multi_cut_probability  # noqa: E402

__all__ = [
    "Circuit",
    "Gate",
    "Statevector",
    "run_circuit",
    "sample",
    "SparseState",
    "CBEstimate",
    "estimate_cb_rank",
    "exact_cb_rank",
    "best_rank_k_approx",
    "ChopPlan",
    "chop_probability",
    "chop_probability_exact",
    "multi_cut_probability",
]
