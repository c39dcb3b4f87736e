"""Covariance-matrix-adapting evolution strategy.

Defaults follow the standard CMA-ES settings: population
``4 + floor(3 ln d)``, ``mu = lambda // 2`` parents with log-rank weights,
cumulative step-size adaptation and rank-one plus rank-mu covariance updates.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from .config import TOL

log = logging.getLogger(__name__)


def default_popsize(dim: int) -> int:
    return 4 + int(math.floor(3 * math.log(dim)))


@dataclass(frozen=True)
class EsParams:
    """Strategy constants derived from the dimension and population size."""

    dim: int
    lam: int
    mu: int
    weights: np.ndarray
    mu_eff: float
    c_sigma: float
    d_sigma: float
    c_c: float
    c_1: float
    c_mu: float
    chi_n: float

    @classmethod
    def default(cls, dim: int, lam: int | None = None) -> "EsParams":
        lam = default_popsize(dim) if lam is None else lam
        if lam < 2:
            raise ValueError("population size must be >= 2")
        mu = lam // 2
        w = math.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
        w = w / w.sum()
        mu_eff = 1.0 / float(np.sum(w**2))
        c_sigma = (mu_eff + 2) / (dim + mu_eff + 5)
        d_sigma = 1 + 2 * max(0.0, math.sqrt((mu_eff - 1) / (dim + 1)) - 1) + c_sigma
        c_c = (4 + mu_eff / dim) / (dim + 4 + 2 * mu_eff / dim)
        c_1 = 2 / ((dim + 1.3) ** 2 + mu_eff)
        c_mu = min(1 - c_1, 2 * (mu_eff - 2 + 1 / mu_eff) / ((dim + 2) ** 2 + mu_eff))
        chi_n = math.sqrt(dim) * (1 - 1 / (4 * dim) + 1 / (21 * dim**2))
        return cls(dim, lam, mu, w, mu_eff, c_sigma, d_sigma, c_c, c_1, c_mu, chi_n)


@dataclass(frozen=True, eq=False)
class EsState:
    mean: np.ndarray
    sigma: float
    cov: np.ndarray
    params: EsParams
    p_sigma: np.ndarray
    p_c: np.ndarray
    generation: int = 0
    evaluations: int = 0

    @classmethod
    def initial(cls, mean, sigma: float, lam: int | None = None) -> "EsState":
        mean = np.array(mean, dtype=float).reshape(-1)
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        dim = mean.shape[0]
        params = EsParams.default(dim, lam)
        zeros = np.zeros(dim)
        return cls(mean, float(sigma), np.eye(dim), params, zeros, zeros.copy())

    @property
    def lam(self) -> int:
        return self.params.lam

    @property
    def mu(self) -> int:
        return self.params.mu


@dataclass
class Candidate:
    theta: np.ndarray
    value: float
    info: Any = field(default=None, repr=False)


def _value(result) -> float:
    return float(getattr(result, "value", result))


def _eig(cov: np.ndarray) -> tuple[np.ndarray, np.ndarray, bool]:
    cov = (cov + cov.T) / 2
    evals, evecs = np.linalg.eigh(cov)
    repaired = bool(np.any(evals < TOL.eig_floor))
    if repaired:
        evals = np.maximum(evals, TOL.eig_floor)
    return evals, evecs, repaired


def es_step(
    state: EsState,
    loss_fn: Callable[[np.ndarray, np.random.Generator], Any],
    rng: np.random.Generator,
) -> tuple[EsState, Candidate, list[Candidate]]:
    """One generation: sample, evaluate, recombine, adapt.

    ``loss_fn(theta, rng)`` returns a float or an object with a ``value``
    attribute (kept as ``Candidate.info``). Returns the new state, the best
    candidate of this generation, and all candidates in evaluation order.
    """
    P = state.params
    dim, lam, mu = P.dim, P.lam, P.mu
    evals, evecs, _ = _eig(state.cov)
    sqrt_d = np.sqrt(evals)

    z = rng.standard_normal((lam, dim))
    y = (z * sqrt_d) @ evecs.T
    xs = state.mean + state.sigma * y

    cands = []
    for k in range(lam):
        res = loss_fn(xs[k], rng)
        cands.append(Candidate(xs[k].copy(), _value(res), res))
    values = np.array([c.value for c in cands])
    # stable sort keeps evaluation order among ties (including +inf)
    order = np.argsort(values, kind="stable")
    sel = order[:mu]

    y_w = P.weights @ y[sel]
    mean = state.mean + state.sigma * y_w

    inv_sqrt = evecs @ np.diag(1.0 / sqrt_d) @ evecs.T
    p_sigma = (1 - P.c_sigma) * state.p_sigma + math.sqrt(
        P.c_sigma * (2 - P.c_sigma) * P.mu_eff
    ) * (inv_sqrt @ y_w)
    gen = state.generation + 1
    norm_ps = float(np.linalg.norm(p_sigma))
    h_sigma = norm_ps / math.sqrt(1 - (1 - P.c_sigma) ** (2 * gen)) < (1.4 + 2 / (dim + 1)) * P.chi_n
    p_c = (1 - P.c_c) * state.p_c + h_sigma * math.sqrt(P.c_c * (2 - P.c_c) * P.mu_eff) * y_w

    rank_mu = (y[sel].T * P.weights) @ y[sel]
    delta = (1 - h_sigma) * P.c_c * (2 - P.c_c)
    cov = (
        (1 - P.c_1 - P.c_mu + P.c_1 * delta) * state.cov
        + P.c_1 * np.outer(p_c, p_c)
        + P.c_mu * rank_mu
    )
    cov = (cov + cov.T) / 2
    ev, vecs, repaired = _eig(cov)
    if repaired:
        log.warning("covariance repaired: eigenvalues floored at %g", TOL.eig_floor)
        cov = (vecs * ev) @ vecs.T
    sigma = state.sigma * math.exp((P.c_sigma / P.d_sigma) * (norm_ps / P.chi_n - 1))
    if not np.isfinite(sigma) or sigma <= 0:
        sigma = state.sigma

    new = replace(
        state,
        mean=mean,
        sigma=sigma,
        cov=cov,
        p_sigma=p_sigma,
        p_c=p_c,
        generation=gen,
        evaluations=state.evaluations + lam,
    )
    return new, cands[int(order[0])], cands
