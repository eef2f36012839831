"""Simulation runs, Monte Carlo ensembles, and checks against the analytic bounds."""

from __future__ import annotations

import math
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from . import _kernels
from .bandit import BanditModel, RegretTrace, fusion_center_lower_bound
from .graph import ConsensusMatrix, Graph, build_consensus_matrix
from .spectral import SpectralMetrics, spectral_metrics

__all__ = [
    "SANDWICH_TOL",
    "InvariantViolation",
    "SandwichViolation",
    "ExperimentConfig",
    "EnsembleResult",
    "draw_streams",
    "run_once",
    "run_ensemble",
    "theorem1_bound",
    "exact_estimate_variance",
    "round_robin_schedule",
    "Proposition1Report",
    "verify_proposition1",
    "ArmBoundCheck",
    "Theorem1Report",
    "verify_theorem1",
    "sandwich_log",
]

SANDWICH_TOL = 1e-9
SCHEDULES = {"policy": _kernels.SCHEDULE_POLICY, "round-robin": _kernels.SCHEDULE_ROUND_ROBIN}
INIT_MODES = {"synchronized": _kernels.INIT_SYNCHRONIZED, "staggered": _kernels.INIT_STAGGERED}


class InvariantViolation(AssertionError):
    """A property the analysis guarantees failed during a run; indicates a defect."""


class SandwichViolation(InvariantViolation):
    pass


class _SandwichLog:
    """Process-wide record of every sandwich check performed by ``run_once``."""

    def __init__(self):
        self._lock = threading.Lock()
        self.reset()

    def reset(self):
        with self._lock:
            self.runs = 0
            self.agent_arm_steps = 0
            self.violations = 0
            self.max_excess = -math.inf

    def record(self, excess: float, cells: int):
        with self._lock:
            self.runs += 1
            self.agent_arm_steps += cells
            self.max_excess = max(self.max_excess, excess)
            if excess > SANDWICH_TOL:
                self.violations += 1


sandwich_log = _SandwichLog()


@dataclass(frozen=True)
class ExperimentConfig:
    model: BanditModel
    graph: Graph
    kappa: float | str | None = None
    gamma: float = 1.1
    T: int = 1000
    runs: int = 500
    base_seed: int = 0
    schedule: str = "policy"
    init: str = "synchronized"
    reading: str = "dd"
    checkpoints: tuple[int, ...] = ()

    def __post_init__(self):
        if self.T < self.model.N:
            raise ValueError(f"T={self.T} too short for {self.model.N} initialization steps")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if not self.gamma > 1:
            raise ValueError(f"gamma must be > 1, got {self.gamma}")
        if self.schedule not in SCHEDULES:
            raise ValueError(f"schedule must be one of {sorted(SCHEDULES)}")
        if self.init not in INIT_MODES:
            raise ValueError(f"init must be one of {sorted(INIT_MODES)}")
        bad = [c for c in self.checkpoints if not 1 <= c <= self.T]
        if bad:
            raise ValueError(f"checkpoints outside 1..T: {bad}")

    @property
    def M(self) -> int:
        return self.graph.M

    @cached_property
    def consensus(self) -> ConsensusMatrix:
        return build_consensus_matrix(self.graph, self.kappa)

    @cached_property
    def spectral(self) -> SpectralMetrics:
        return spectral_metrics(self.consensus, self.reading)


def draw_streams(rng: np.random.Generator, T: int, M: int) -> tuple[np.ndarray, np.ndarray]:
    """Reward noise ``z`` then tie-break uniforms ``u``, both ``(T, M)``, in that order."""
    z = rng.standard_normal((T, M))
    u = rng.random((T, M))
    return z, u


def run_once(cfg: ExperimentConfig, seed, backend: str | None = None) -> RegretTrace:
    rng = np.random.default_rng(seed)
    z, u = draw_streams(rng, cfg.T, cfg.M)
    sm = cfg.spectral
    choices, rewards, n_snap, s_snap, max_dev, status = _kernels.simulate(
        cfg.consensus.P,
        cfg.model.means,
        cfg.model.sigma_s,
        sm.eps_c,
        cfg.gamma,
        z,
        u,
        schedule=SCHEDULES[cfg.schedule],
        init_mode=INIT_MODES[cfg.init],
        checkpoints=cfg.checkpoints,
        backend=backend,
    )
    if status == _kernels.STATUS_NONPOSITIVE_NHAT:
        raise InvariantViolation(
            f"n_hat became nonpositive at step {choices.shape[0] + 1} (seed {seed}); "
            "P likely has negative entries for this kappa"
        )
    excess = max_dev - sm.eps_n
    sandwich_log.record(excess, cfg.T * cfg.M * cfg.model.N)
    if excess > SANDWICH_TOL:
        raise SandwichViolation(
            f"|n_hat - n_cent| reached {max_dev:.12g} > eps_n = {sm.eps_n:.12g} (seed {seed})"
        )
    return RegretTrace(
        choices=choices,
        rewards=rewards,
        n_arms=cfg.model.N,
        max_sandwich_excess=excess,
        checkpoints=tuple(sorted(set(cfg.checkpoints))),
        n_hat_snapshots=n_snap,
        s_hat_snapshots=s_snap,
    )


@dataclass
class EnsembleResult:
    """Aggregate of ``runs`` independent simulations.

    ``mean_regret[t, k]`` is agent ``k``'s mean cumulative expected regret after
    step ``t + 1``; ``final_regret[r, k]`` is run ``r``'s value at the horizon.
    """

    mean_regret: np.ndarray
    stderr: np.ndarray
    final_regret: np.ndarray
    mean_pulls: np.ndarray
    group_pulls: np.ndarray
    spectral: SpectralMetrics
    seeds: list[int] = field(default_factory=list)

    @property
    def runs(self) -> int:
        return self.final_regret.shape[0]

    @property
    def group_mean_regret(self) -> np.ndarray:
        return self.mean_regret.sum(axis=1)

    @property
    def final_mean(self) -> np.ndarray:
        return self.mean_regret[-1]

    @property
    def final_stderr(self) -> np.ndarray:
        return self.stderr[-1]


def _resolve_threads(threads: int | None) -> int:
    if threads is None:
        threads = int(os.environ.get("COOPUCB_THREADS", 0)) or os.cpu_count() or 1
    return max(1, int(threads))


def _map_runs(fn, seeds, threads):
    threads = _resolve_threads(threads)
    if threads == 1 or len(seeds) == 1:
        return map(fn, seeds)
    pool = ThreadPoolExecutor(max_workers=threads)
    # map preserves submission order, so aggregation never depends on completion order
    return _closing_map(pool, fn, seeds)


def _closing_map(pool, fn, seeds):
    with pool:
        yield from pool.map(fn, seeds)


def run_ensemble(cfg: ExperimentConfig, threads: int | None = None, backend: str | None = None) -> EnsembleResult:
    """Run ``cfg.runs`` simulations seeded ``base_seed + r`` and aggregate them in run order."""
    seeds = [cfg.base_seed + r for r in range(cfg.runs)]
    cfg.spectral  # build before worker threads share cfg
    gaps = cfg.model.gaps
    total = np.zeros((cfg.T, cfg.M))
    total_sq = np.zeros((cfg.T, cfg.M))
    final = np.zeros((cfg.runs, cfg.M))
    pulls = np.zeros((cfg.runs, cfg.M, cfg.model.N))

    def one(seed):
        trace = run_once(cfg, seed, backend=backend)
        return np.cumsum(gaps[trace.choices], axis=0), trace.pull_counts()

    for r, (cum, counts) in enumerate(_map_runs(one, seeds, threads)):
        total += cum
        total_sq += cum * cum
        final[r] = cum[-1]
        pulls[r] = counts
    n = cfg.runs
    mean = total / n
    if n > 1:
        var = np.maximum(total_sq - n * mean * mean, 0.0) / (n - 1)
        stderr = np.sqrt(var / n)
    else:
        stderr = np.zeros_like(mean)
    return EnsembleResult(
        mean_regret=mean,
        stderr=stderr,
        final_regret=final,
        mean_pulls=pulls.mean(axis=0),
        group_pulls=pulls.sum(axis=1),
        spectral=cfg.spectral,
        seeds=seeds,
    )


def theorem1_bound(model: BanditModel, spectral: SpectralMetrics, M: int, arm: int, T: int, gamma: float) -> float:
    """Upper bound on the expected total pulls of suboptimal ``arm`` by all agents up to ``T``.

    ``ceil(M eps_n + sum_k 8 sigma^2 gamma (1 + eps_c^k) ln T / (M Delta^2)) + M gamma/(gamma - 1)``
    """
    gap = float(model.gaps[arm])
    if gap <= 0:
        raise ValueError(f"arm {arm} is optimal (gap 0); bound undefined")
    if not gamma > 1:
        raise ValueError(f"gamma must be > 1, got {gamma}")
    if T < 2:
        raise ValueError("T must be >= 2")
    eps_c = np.broadcast_to(np.asarray(spectral.eps_c, dtype=float), (M,))
    log_term = np.sum(8.0 * model.sigma_s**2 * gamma * (1.0 + eps_c) / (M * gap**2)) * math.log(T)
    return math.ceil(M * spectral.eps_n + log_term) + M * gamma / (gamma - 1.0)


def round_robin_schedule(T: int, M: int, N: int) -> np.ndarray:
    """``choices[t, k] = (t + k) mod N``: the deterministic estimation-test schedule."""
    return (np.arange(T)[:, None] + np.arange(M)[None, :]) % N


def exact_estimate_variance(P, choices: np.ndarray, N: int, sigma_s: float, checkpoints) -> tuple[np.ndarray, np.ndarray]:
    """Exact ``n_hat`` and ``Var[s_hat]`` under a fixed schedule.

    Propagates ``C <- P (C + sigma^2 diag(xi)) P^T`` per arm, so ``Var[mu_hat] =
    var / n_hat**2``. Returns arrays of shape ``(len(checkpoints), M, N)``.
    """
    P = np.asarray(P, dtype=float)
    M = P.shape[0]
    checkpoints = sorted(set(int(c) for c in checkpoints))
    n = np.zeros((M, N))
    cov = np.zeros((N, M, M))
    n_out = np.zeros((len(checkpoints), M, N))
    v_out = np.zeros((len(checkpoints), M, N))
    c_idx = 0
    for s in range(choices.shape[0]):
        xi = np.zeros((M, N))
        xi[np.arange(M), choices[s]] = 1.0
        n = P @ (n + xi)
        for i in range(N):
            cov[i] = P @ (cov[i] + sigma_s**2 * np.diag(xi[:, i])) @ P.T
        if c_idx < len(checkpoints) and checkpoints[c_idx] == s + 1:
            n_out[c_idx] = n
            v_out[c_idx] = np.stack([np.diag(cov[i]) for i in range(N)], axis=1)
            c_idx += 1
    return n_out, v_out


@dataclass
class Proposition1Report:
    checkpoints: tuple[int, ...]
    eps_n: float
    eps_c: np.ndarray
    max_sandwich_excess: float
    n_hat: np.ndarray
    mc_mean: np.ndarray
    mc_stderr: np.ndarray
    mc_var: np.ndarray
    var_bound: np.ndarray
    means: np.ndarray
    se_multiple: float = 3.0
    var_slack: float = 0.10

    @property
    def sandwich_ok(self) -> bool:
        return self.max_sandwich_excess <= SANDWICH_TOL

    @property
    def bias_z(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.abs(self.mc_mean - self.means[None, None, :]) / self.mc_stderr
        return np.where(self.mc_stderr == 0, 0.0, z)

    @property
    def unbiased_ok(self) -> bool:
        return bool(np.all(self.bias_z <= self.se_multiple))

    @property
    def variance_ratio(self) -> np.ndarray:
        return self.mc_var / self.var_bound

    @property
    def variance_ok(self) -> bool:
        return bool(np.all(self.mc_var <= (1.0 + self.var_slack) * self.var_bound))

    @property
    def passed(self) -> bool:
        return self.sandwich_ok and self.unbiased_ok and self.variance_ok

    def summary(self) -> str:
        return (
            f"statement 1 (sandwich): {'PASS' if self.sandwich_ok else 'FAIL'} "
            f"max excess {self.max_sandwich_excess:.3g}\n"
            f"statement 2 (unbiased): {'PASS' if self.unbiased_ok else 'FAIL'} "
            f"max |bias|/SE {self.bias_z.max():.3f} (limit {self.se_multiple})\n"
            f"statement 3 (variance): {'PASS' if self.variance_ok else 'FAIL'} "
            f"max Var/bound {self.variance_ratio.max():.3f} (limit {1 + self.var_slack:.2f})"
        )


def verify_proposition1(cfg: ExperimentConfig, threads: int | None = None, backend: str | None = None) -> Proposition1Report:
    """Monte Carlo check of the three estimation statements under round-robin sampling."""
    if cfg.schedule != "round-robin":
        raise ValueError("verify_proposition1 needs schedule='round-robin'")
    checkpoints = tuple(sorted(set(cfg.checkpoints))) or (cfg.T,)
    if checkpoints != cfg.checkpoints:
        cfg = replace(cfg, checkpoints=checkpoints)
    C, M, N = len(checkpoints), cfg.M, cfg.model.N
    cfg.spectral  # build before worker threads share cfg
    total = np.zeros((C, M, N))
    total_sq = np.zeros((C, M, N))
    n_ref = None
    worst = -math.inf

    def one(seed):
        return run_once(cfg, seed, backend=backend)

    for trace in _map_runs(one, [cfg.base_seed + r for r in range(cfg.runs)], threads):
        if n_ref is None:
            n_ref = trace.n_hat_snapshots
        mu = trace.s_hat_snapshots / trace.n_hat_snapshots
        total += mu
        total_sq += mu * mu
        worst = max(worst, trace.max_sandwich_excess)
    n = cfg.runs
    mean = total / n
    var = np.maximum(total_sq - n * mean * mean, 0.0) / max(n - 1, 1)
    eps_c = cfg.spectral.eps_c
    bound = (cfg.model.sigma_s**2 / M) * (n_ref + eps_c[None, :, None]) / n_ref**2
    return Proposition1Report(
        checkpoints=checkpoints,
        eps_n=cfg.spectral.eps_n,
        eps_c=eps_c,
        max_sandwich_excess=worst,
        n_hat=n_ref,
        mc_mean=mean,
        mc_stderr=np.sqrt(var / n),
        mc_var=var,
        var_bound=bound,
        means=np.asarray(cfg.model.means),
    )


@dataclass
class ArmBoundCheck:
    arm: int
    gap: float
    empirical: float
    empirical_stderr: float
    bound: float
    fusion_leading: float

    @property
    def margin(self) -> float:
        return self.bound - self.empirical

    @property
    def ok(self) -> bool:
        return self.empirical <= self.bound


@dataclass
class Theorem1Report:
    arms: list[ArmBoundCheck]
    result: EnsembleResult

    @property
    def passed(self) -> bool:
        return all(a.ok for a in self.arms)

    def summary(self) -> str:
        lines = ["arm  gap    empirical   bound      margin"]
        for a in self.arms:
            lines.append(
                f"{a.arm + 1:>3}  {a.gap:<5g}  {a.empirical:>9.2f}  {a.bound:>9.2f}  {a.margin:>9.2f}"
                + ("" if a.ok else "  VIOLATED")
            )
        return "\n".join(lines)


def verify_theorem1(cfg: ExperimentConfig, threads: int | None = None, backend: str | None = None) -> Theorem1Report:
    """Compare Monte Carlo mean total pulls of each suboptimal arm with the regret bound."""
    if cfg.schedule != "policy":
        raise ValueError("verify_theorem1 needs schedule='policy'")
    res = run_ensemble(cfg, threads=threads, backend=backend)
    checks = []
    for arm in cfg.model.suboptimal_arms():
        g = res.group_pulls[:, arm]
        se = float(g.std(ddof=1) / np.sqrt(len(g))) if len(g) > 1 else 0.0
        checks.append(
            ArmBoundCheck(
                arm=arm,
                gap=float(cfg.model.gaps[arm]),
                empirical=float(g.mean()),
                empirical_stderr=se,
                bound=theorem1_bound(cfg.model, cfg.spectral, cfg.M, arm, cfg.T, cfg.gamma),
                fusion_leading=fusion_center_lower_bound(cfg.model, arm, cfg.T),
            )
        )
    return Theorem1Report(checks, res)
