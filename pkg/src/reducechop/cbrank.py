"""Computational-basis rank: exact value, best sparse approximation, and the
two-sample estimator with its Hoeffding failure bound."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .config import TOL
from .sim import Statevector, index_to_bits, sample_counts
from .sparse import SparseState


def _sorted_order(weights: np.ndarray, idx: np.ndarray) -> np.ndarray:
    # descending weight, ties by ascending basis index (= lexicographic bitstring)
    return np.lexsort((idx, -weights))


def exact_cb_rank(state: Statevector, eps: float) -> int:
    """Smallest K whose K largest probabilities sum to at least ``1 - eps``."""
    if not 0.0 <= eps < 1.0:
        raise ValueError(f"eps={eps} outside [0, 1)")
    probs = state.probabilities()
    if eps == 0.0:
        return max(1, int(np.count_nonzero(probs > TOL.zero_probability)))
    cum = np.cumsum(np.sort(probs)[::-1])
    return int(np.searchsorted(cum, 1.0 - eps - 1e-12) + 1)


def best_rank_k_approx(state: Statevector, K: int) -> SparseState:
    """Keep the ``K`` largest-modulus amplitudes and renormalise.

    The squared overlap with ``state`` equals the retained probability mass,
    which is the best any ``K``-sparse state can reach.
    """
    N = 2**state.n
    if not 1 <= K <= N:
        raise ValueError(f"K={K} outside [1, {N}]")
    probs = state.probabilities()
    order = _sorted_order(probs, np.arange(N))[:K]
    kept = state.amplitudes[order]
    mass = float(np.sum(np.abs(kept) ** 2))
    if mass < TOL.degenerate_norm:
        raise ValueError("top-K support carries no weight")
    kept = kept / np.sqrt(mass)
    return SparseState(state.n, {index_to_bits(int(i), state.n): a for i, a in zip(order, kept)})


def top_k_mass(state: Statevector, K: int) -> float:
    return float(np.sum(np.sort(state.probabilities())[::-1][:K]))


# --------------------------------------------------------------------------- #
# sampled estimate
# --------------------------------------------------------------------------- #
class SupportEntry(NamedTuple):
    bitstring: str
    first_count: int
    second_count: int


@dataclass(frozen=True)
class CBEstimate:
    """Result of the two-sample rank estimate.

    ``support`` lists every outcome of the first sample set, most frequent
    first; the first ``K`` entries are the retained support. ``m`` is the
    number of second-set shots falling outside the retained entries.
    """

    K: int
    p: float
    F: bool
    support: tuple[SupportEntry, ...]
    m: int
    M: int
    eps: float
    p_m: float
    reason: str | None = None

    @property
    def retained(self) -> tuple[SupportEntry, ...]:
        return self.support[: self.K]

    @property
    def distinct(self) -> int:
        return len(self.support)

    @property
    def loss(self) -> float:
        return loss_value(self.K, self.p)

    def to_dict(self) -> dict:
        return {
            "K": self.K,
            "p": self.p,
            "F": self.F,
            "m": self.m,
            "M": self.M,
            "eps": self.eps,
            "p_m": self.p_m,
            "reason": self.reason,
            "support": [list(e) for e in self.support],
        }

    def csv_row(self) -> tuple[int, float, bool, int, int]:
        return (self.K, self.p, self.F, self.m, self.M)


def loss_value(K: int, p: float) -> float:
    """``K - log(1 - p)``; infinite when ``p == 1``."""
    if p >= 1.0:
        return math.inf
    return K - math.log1p(-p)


def hoeffding_bound(M: int, eps: float, m: int) -> float:
    """``exp(-2 M (eps - m/M)^2)``, defined only for ``m < M eps``."""
    if M < 1:
        raise ValueError("M must be >= 1")
    if not m < M * eps:
        raise ValueError(f"bound needs m < M*eps, got m={m}, M*eps={M * eps}")
    return math.exp(-2.0 * M * (eps - m / M) ** 2)


def budget_gate(M: int, eps: float, p_m: float) -> bool:
    """Whether the best case (``m = 0``) can beat ``p_m`` at all."""
    return math.exp(-2.0 * M * eps * eps) < p_m


def min_budget(eps: float, p_m: float) -> int:
    """Smallest M passing :func:`budget_gate`."""
    M = max(1, math.ceil(math.log(1.0 / p_m) / (2 * eps * eps)))
    while not budget_gate(M, eps, p_m):
        M += 1
    return M


def budget_rank_cap(M: int, eps: float) -> int:
    """Largest rank the budget resolves, ``floor(M eps^2)``."""
    return int(math.floor(M * eps * eps + 1e-9))


def _probabilities(source) -> tuple[int, np.ndarray]:
    if isinstance(source, Statevector):
        return source.n, source.probabilities()
    probs = np.asarray(source, dtype=float).reshape(-1)
    n = int(round(math.log2(probs.shape[0])))
    if 2**n != probs.shape[0]:
        raise ValueError("probability vector length must be a power of two")
    return n, probs


def estimate_from_counts(
    first: np.ndarray,
    second: np.ndarray,
    n: int,
    eps: float,
    p_m: float,
    max_rank: int | None | str = "budget",
) -> CBEstimate:
    """Rank estimate from two outcome histograms of equal shot count."""
    first = np.asarray(first, dtype=np.int64)
    second = np.asarray(second, dtype=np.int64)
    M = int(first.sum())
    if int(second.sum()) != M:
        raise ValueError("both sample sets must have the same shot count")
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps={eps} outside (0, 1)")
    if not 0.0 < p_m < 1.0:
        raise ValueError(f"p_m={p_m} outside (0, 1)")
    cap = budget_rank_cap(M, eps) if max_rank == "budget" else max_rank

    idx = np.flatnonzero(first)
    order = _sorted_order(first[idx], idx)
    idx = idx[order]
    n_i = first[idx]
    m_i = second[idx]
    support = tuple(
        SupportEntry(index_to_bits(int(i), n), int(a), int(b)) for i, a, b in zip(idx, n_i, m_i)
    )
    C = len(support)

    residual = M - np.cumsum(m_i)
    below = residual < M * eps
    p_arr = np.ones(C)
    p_arr[below] = np.exp(-2.0 * M * (eps - residual[below] / M) ** 2)
    ok = below & (p_arr < p_m)
    gate = budget_gate(M, eps, p_m)
    if cap is not None:
        ok &= np.arange(1, C + 1) <= cap
    if gate and ok.any():
        k = int(np.argmax(ok))
        return CBEstimate(k + 1, float(p_arr[k]), True, support, int(residual[k]), M, eps, p_m)

    if not gate:
        reason = f"budget: exp(-2 M eps^2) >= p_m; need M >= {min_budget(eps, p_m)}"
    elif cap is not None and (below & (p_arr < p_m)).any():
        reason = f"rank above the budget cap {cap}"
    else:
        reason = "residual mass not resolved"
    # fallback: K = distinct outcomes, p as last computed
    p_last = float(p_arr[below][-1]) if below.any() else 1.0
    return CBEstimate(C, p_last, False, support, int(residual[-1]), M, eps, p_m, reason)


def estimate_cb_rank(
    source,
    M: int,
    eps: float,
    p_m: float,
    rng: np.random.Generator,
    max_rank: int | None | str = "budget",
) -> CBEstimate:
    """Estimate the eps-approximate CB rank from two independent ``M``-shot sets.

    ``source`` is a :class:`Statevector` or an outcome probability vector.
    ``max_rank`` bounds the ranks that may be accepted: ``"budget"`` uses
    ``floor(M eps^2)``, an int is explicit, ``None`` disables the cap.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    n, probs = _probabilities(source)
    first = sample_counts(probs, M, rng)
    second = sample_counts(probs, M, rng)
    return estimate_from_counts(first, second, n, eps, p_m, max_rank)
