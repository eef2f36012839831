"""Running-consensus estimation and the arm-selection rules.

Every agent keeps, per arm, a consensus estimate of the per-agent pull count
(``n_hat``) and of the per-agent reward total (``s_hat``). Each step adds the
agent's own observation and mixes with neighbours through ``P``:

    n_hat <- P (n_hat + xi),   s_hat <- P (s_hat + r)

Arrays are laid out ``[agent, arm]``, so column ``i`` is the vector over agents.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "EstimateUnavailable",
    "NetworkState",
    "CentralizedTracker",
    "PolicyParams",
    "consensus_step",
    "mu_hat",
    "ucb_bonus",
    "bonus_value",
    "bonus_matrix",
    "q_values",
    "pick_max",
    "select_arm",
    "single_agent_ucb_select",
]


class EstimateUnavailable(ValueError):
    """Raised when an estimate is requested for an arm with ``n_hat == 0``."""


@dataclass
class NetworkState:
    n_hat: np.ndarray
    s_hat: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, M: int, N: int) -> "NetworkState":
        return cls(np.zeros((M, N)), np.zeros((M, N)), 0)

    @property
    def M(self) -> int:
        return self.n_hat.shape[0]

    @property
    def N(self) -> int:
        return self.n_hat.shape[1]


@dataclass
class CentralizedTracker:
    """What a fusion center would know: per-agent pull counts and reward totals."""

    M: int
    n_cent: np.ndarray
    s_cent: np.ndarray

    @classmethod
    def zeros(cls, M: int, N: int) -> "CentralizedTracker":
        return cls(M, np.zeros(N), np.zeros(N))

    def update(self, xi: np.ndarray, rewards: np.ndarray) -> None:
        self.n_cent = self.n_cent + xi.sum(axis=0) / self.M
        self.s_cent = self.s_cent + rewards.sum(axis=0) / self.M


@dataclass(frozen=True)
class PolicyParams:
    gamma: float
    eps_c: np.ndarray = field(default_factory=lambda: np.zeros(1))
    sigma_s: float = 1.0

    def __post_init__(self):
        if not self.gamma > 1:
            raise ValueError(f"gamma must be > 1, got {self.gamma}")
        if not self.sigma_s > 0:
            raise ValueError("sigma_s must be positive")
        object.__setattr__(self, "eps_c", np.atleast_1d(np.asarray(self.eps_c, dtype=float)))


def consensus_step(P, state: NetworkState, xi, rewards) -> NetworkState:
    P = np.asarray(P.P if hasattr(P, "P") else P, dtype=float)
    xi = np.asarray(xi)
    rewards = np.asarray(rewards, dtype=float)
    shape = state.n_hat.shape
    if P.shape != (shape[0], shape[0]) or xi.shape != shape or rewards.shape != shape:
        raise ValueError(
            f"dimension mismatch: P {P.shape}, state {shape}, xi {xi.shape}, rewards {rewards.shape}"
        )
    if not (np.isin(xi, (0, 1)).all() and np.all(xi.sum(axis=1) == 1)):
        raise ValueError("each row of xi must contain exactly one 1")
    if np.any((xi == 0) & (rewards != 0)):
        raise ValueError("rewards must be zero outside the pulled arm")
    return NetworkState(
        P @ (state.n_hat + xi),
        P @ (state.s_hat + rewards),
        state.t + 1,
    )


def mu_hat(state: NetworkState, k: int, i: int) -> float:
    n = state.n_hat[k, i]
    if n <= 0:
        raise EstimateUnavailable(f"estimate unavailable: n_hat[{k}, {i}] = {n}")
    return float(state.s_hat[k, i] / n)


def bonus_value(n_hat, eps_c, M: int, log_t, sigma_s: float, gamma: float):
    """The exploration bonus; works elementwise on arrays.

    ``sigma_s * sqrt(2 gamma * ((n_hat + eps_c) / (M n_hat)) * (ln t / n_hat))``.
    The operation order here is mirrored exactly by the compiled kernel.
    """
    return sigma_s * np.sqrt(2.0 * gamma * ((n_hat + eps_c) / (M * n_hat)) * (log_t / n_hat))


def _decision_time(state: NetworkState, t: int | None) -> int:
    # the decision at step t sees the state left by steps 1..t-1
    t = state.t + 1 if t is None else t
    if t < 1:
        raise ValueError("decision time must be >= 1")
    return t


def ucb_bonus(
    state: NetworkState, k: int, i: int, params: PolicyParams, M: int, t: int | None = None
) -> float:
    n = state.n_hat[k, i]
    if n <= 0:
        raise EstimateUnavailable(f"estimate unavailable: n_hat[{k}, {i}] = {n}")
    t = _decision_time(state, t)
    eps = params.eps_c[k] if params.eps_c.size > 1 else params.eps_c[0]
    return float(bonus_value(n, eps, M, math.log(t), params.sigma_s, params.gamma))


def bonus_matrix(n_hat, eps_c, log_t, sigma_s, gamma) -> np.ndarray:
    M = n_hat.shape[0]
    return bonus_value(n_hat, np.asarray(eps_c)[:, None], M, log_t, sigma_s, gamma)


def q_values(n_hat, s_hat, eps_c, log_t, sigma_s, gamma) -> np.ndarray:
    if np.any(n_hat <= 0):
        raise EstimateUnavailable("estimate unavailable: some n_hat <= 0")
    return s_hat / n_hat + bonus_matrix(n_hat, eps_c, log_t, sigma_s, gamma)


def pick_max(q: np.ndarray, u: float) -> int:
    """Index of the maximum of ``q``; among exact ties take the ``floor(u*c)``-th of ``c``."""
    best = q.max()
    winners = np.flatnonzero(q == best)
    if winners.size == 1:
        return int(winners[0])
    return int(winners[min(int(u * winners.size), winners.size - 1)])


def select_arm(
    state: NetworkState, k: int, params: PolicyParams, rng: np.random.Generator, t: int | None = None
) -> int:
    """``argmax_i mu_hat + bonus`` for agent ``k``, ties broken uniformly at random.

    ``t`` is the decision time; by default the step after the last one applied.
    """
    if np.any(state.n_hat[k] <= 0):
        raise EstimateUnavailable(f"estimate unavailable for agent {k}")
    t = _decision_time(state, t)
    eps = params.eps_c[k] if params.eps_c.size > 1 else params.eps_c[0]
    q = state.s_hat[k] / state.n_hat[k] + bonus_value(
        state.n_hat[k], eps, state.M, math.log(t), params.sigma_s, params.gamma
    )
    return pick_max(q, rng.random())


def single_agent_ucb_select(counts, sums, t: int, sigma_s: float, gamma: float, u: float = 0.0) -> int:
    """Gaussian UCB for one agent: ``argmax mean_i + sigma_s sqrt(2 gamma ln t / n_i)``.

    ``counts``/``sums`` are the per-arm pull counts and reward totals; ``u`` is
    the uniform draw used for tie-breaking.
    """
    counts = np.asarray(counts, dtype=float)
    sums = np.asarray(sums, dtype=float)
    if counts.size == 1:
        return 0
    if np.any(counts <= 0):
        raise EstimateUnavailable("every arm must be sampled once before UCB selection")
    q = sums / counts + bonus_value(counts, 0.0, 1, math.log(t), sigma_s, gamma)
    return pick_max(q, u)
