"""Gaussian N-armed bandit environment and regret accounting."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "TABLE1_MEANS",
    "TABLE1_SIGMA",
    "BanditModel",
    "RegretTrace",
    "sample_reward",
    "expected_group_regret",
    "fusion_center_lower_bound",
    "table1_model",
]

# arm means and common reward standard deviation used throughout the experiments
TABLE1_MEANS = (40.0, 50.0, 50.0, 60.0, 70.0, 70.0, 80.0, 90.0, 92.0, 95.0)
TABLE1_SIGMA = 30.0


@dataclass(frozen=True)
class BanditModel:
    means: tuple[float, ...]
    sigma_s: float

    def __post_init__(self):
        object.__setattr__(self, "means", tuple(float(m) for m in self.means))
        if len(self.means) < 1:
            raise ValueError("bandit needs at least one arm")
        if not self.sigma_s > 0:
            raise ValueError("sigma_s must be positive")

    @property
    def N(self) -> int:
        return len(self.means)

    @property
    def best_mean(self) -> float:
        return max(self.means)

    @property
    def best_arm(self) -> int:
        """Lowest-index maximizer (0-based)."""
        return self.means.index(self.best_mean)

    @property
    def gaps(self) -> np.ndarray:
        return self.best_mean - np.asarray(self.means)

    def suboptimal_arms(self) -> list[int]:
        return [i for i, d in enumerate(self.gaps) if d > 0]


def table1_model() -> BanditModel:
    return BanditModel(TABLE1_MEANS, TABLE1_SIGMA)


@dataclass
class RegretTrace:
    """One simulation run.

    ``choices[t, k]`` is the 0-based arm agent ``k`` pulled at step ``t + 1``;
    ``rewards[t, k]`` the reward it received.
    """

    choices: np.ndarray
    rewards: np.ndarray
    n_arms: int
    max_sandwich_excess: float = -np.inf
    checkpoints: tuple[int, ...] = ()
    n_hat_snapshots: np.ndarray | None = None
    s_hat_snapshots: np.ndarray | None = None

    @property
    def T(self) -> int:
        return self.choices.shape[0]

    @property
    def M(self) -> int:
        return self.choices.shape[1]

    def pull_counts(self, t: int | None = None) -> np.ndarray:
        """``n_i^k(t)`` as an ``(M, N)`` array; ``t`` defaults to the horizon."""
        c = self.choices if t is None else self.choices[:t]
        counts = np.zeros((self.M, self.n_arms), dtype=np.int64)
        for k in range(self.M):
            counts[k] = np.bincount(c[:, k], minlength=self.n_arms)
        return counts

    def instant_regret(self, model: BanditModel) -> np.ndarray:
        """``Delta_{i^k(t)}`` for every step and agent, shape ``(T, M)``."""
        return model.gaps[self.choices]

    def cumulative_regret(self, model: BanditModel) -> np.ndarray:
        return np.cumsum(self.instant_regret(model), axis=0)

    def realized_regret(self, model: BanditModel) -> np.ndarray:
        """Cumulative ``m_{i*} - r^k(t)``; diagnostic only."""
        return np.cumsum(model.best_mean - self.rewards, axis=0)


def sample_reward(model: BanditModel, arm: int, rng: np.random.Generator) -> float:
    if not 0 <= arm < model.N:
        raise IndexError(f"arm {arm} out of range for N={model.N}")
    return model.means[arm] + model.sigma_s * rng.standard_normal()


def expected_group_regret(trace: RegretTrace, model: BanditModel) -> float:
    """``sum_k sum_i Delta_i n_i^k(T)`` from the realized pull counts."""
    return float(np.sum(trace.pull_counts() * model.gaps[None, :]))


def fusion_center_lower_bound(model: BanditModel, arm: int, T: int) -> float:
    """Leading term ``(2 sigma_s^2 / Delta_i^2) ln T`` of the centralized lower bound.

    The ``o(1)`` correction is dropped. ``T = 1`` gives 0.
    """
    if not 0 <= arm < model.N:
        raise IndexError(f"arm {arm} out of range for N={model.N}")
    gap = float(model.gaps[arm])
    if gap <= 0:
        raise ValueError(f"arm {arm} is optimal (gap 0); no lower bound")
    if T < 1:
        raise ValueError("T must be >= 1")
    return 2.0 * model.sigma_s**2 / gap**2 * math.log(T)
