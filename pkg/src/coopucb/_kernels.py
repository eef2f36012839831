"""Simulation inner loop: a numba kernel and a pure-numpy fallback.

The backend is picked by the ``COOPUCB_BACKEND`` environment variable
(``numba`` or ``numpy``). ``numba`` is the default when it imports.

Both backends consume the same pre-drawn noise ``z`` and tie-break uniforms
``u`` and evaluate the arm index with the same floating-point operation order.
The only difference is the summation order inside ``P @ X``, so estimates
agree to rounding and decisions agree except on near-exact ties.
"""

from __future__ import annotations

import logging
import os

import numpy as np

from .agents import bonus_value

log = logging.getLogger(__name__)

SCHEDULE_POLICY = 0
SCHEDULE_ROUND_ROBIN = 1
INIT_SYNCHRONIZED = 0
INIT_STAGGERED = 1

STATUS_OK = 0
STATUS_NONPOSITIVE_NHAT = 1

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False


def _simulate_loops(P, means, sigma, eps_c, gamma, log_t, z, u, schedule, init_mode, checkpoints):
    T, M = z.shape
    N = means.shape[0]
    n_hat = np.zeros((M, N))
    s_hat = np.zeros((M, N))
    xn = np.empty((M, N))
    xs = np.empty((M, N))
    counts = np.zeros(N)
    choices = np.empty((T, M), dtype=np.int64)
    rewards = np.empty((T, M))
    C = checkpoints.shape[0]
    n_snap = np.zeros((C, M, N))
    s_snap = np.zeros((C, M, N))
    q = np.empty(N)
    max_dev = 0.0
    c_idx = 0
    for s in range(T):
        t = s + 1
        for k in range(M):
            if schedule == SCHEDULE_ROUND_ROBIN:
                arm = (s + k) % N
            elif s < N:
                arm = s if init_mode == INIT_SYNCHRONIZED else (s + k) % N
            else:
                lt = log_t[s]
                best = -np.inf
                for i in range(N):
                    nh = n_hat[k, i]
                    if nh <= 0.0:
                        return choices[:s], rewards[:s], n_snap, s_snap, max_dev, STATUS_NONPOSITIVE_NHAT
                    q[i] = s_hat[k, i] / nh + sigma * np.sqrt(
                        2.0 * gamma * ((nh + eps_c[k]) / (M * nh)) * (lt / nh)
                    )
                    if q[i] > best:
                        best = q[i]
                n_win = 0
                for i in range(N):
                    if q[i] == best:
                        n_win += 1
                pick = min(int(u[s, k] * n_win), n_win - 1)
                arm = -1
                for i in range(N):
                    if q[i] == best:
                        if pick == 0:
                            arm = i
                            break
                        pick -= 1
            choices[s, k] = arm
            rewards[s, k] = means[arm] + sigma * z[s, k]
        xn[:, :] = n_hat
        xs[:, :] = s_hat
        for k in range(M):
            arm = choices[s, k]
            xn[k, arm] += 1.0
            xs[k, arm] += rewards[s, k]
            counts[arm] += 1.0
        for a in range(M):
            for i in range(N):
                acc_n = 0.0
                acc_s = 0.0
                for d in range(M):
                    acc_n += P[a, d] * xn[d, i]
                    acc_s += P[a, d] * xs[d, i]
                n_hat[a, i] = acc_n
                s_hat[a, i] = acc_s
        for i in range(N):
            cent = counts[i] / M
            for a in range(M):
                dev = abs(n_hat[a, i] - cent)
                if dev > max_dev:
                    max_dev = dev
        if c_idx < C and checkpoints[c_idx] == t:
            n_snap[c_idx] = n_hat
            s_snap[c_idx] = s_hat
            c_idx += 1
    return choices, rewards, n_snap, s_snap, max_dev, STATUS_OK


if HAVE_NUMBA:
    _simulate_numba = numba.njit(cache=True, nogil=True)(_simulate_loops)
else:  # pragma: no cover
    _simulate_numba = None


def _pick_rows(Q: np.ndarray, u_row: np.ndarray) -> np.ndarray:
    best = Q.max(axis=1)
    winners = Q == best[:, None]
    n_win = winners.sum(axis=1)
    arms = winners.argmax(axis=1)
    for k in np.flatnonzero(n_win > 1):
        idx = np.flatnonzero(winners[k])
        arms[k] = idx[min(int(u_row[k] * idx.size), idx.size - 1)]
    return arms


def _simulate_numpy(P, means, sigma, eps_c, gamma, log_t, z, u, schedule, init_mode, checkpoints):
    T, M = z.shape
    N = means.shape[0]
    n_hat = np.zeros((M, N))
    s_hat = np.zeros((M, N))
    counts = np.zeros(N)
    choices = np.empty((T, M), dtype=np.int64)
    rewards = np.empty((T, M))
    C = checkpoints.shape[0]
    n_snap = np.zeros((C, M, N))
    s_snap = np.zeros((C, M, N))
    agents = np.arange(M)
    eps_col = eps_c[:, None]
    max_dev = 0.0
    c_idx = 0
    for s in range(T):
        t = s + 1
        if schedule == SCHEDULE_ROUND_ROBIN:
            arms = (s + agents) % N
        elif s < N:
            arms = np.full(M, s) if init_mode == INIT_SYNCHRONIZED else (s + agents) % N
        else:
            if np.any(n_hat <= 0.0):
                return choices[:s], rewards[:s], n_snap, s_snap, max_dev, STATUS_NONPOSITIVE_NHAT
            Q = s_hat / n_hat + bonus_value(n_hat, eps_col, M, log_t[s], sigma, gamma)
            arms = _pick_rows(Q, u[s])
        r = means[arms] + sigma * z[s]
        choices[s] = arms
        rewards[s] = r
        xn = n_hat.copy()
        xs = s_hat.copy()
        xn[agents, arms] += 1.0
        xs[agents, arms] += r
        counts += np.bincount(arms, minlength=N)
        n_hat = P @ xn
        s_hat = P @ xs
        max_dev = max(max_dev, float(np.abs(n_hat - counts / M).max()))
        if c_idx < C and checkpoints[c_idx] == t:
            n_snap[c_idx] = n_hat
            s_snap[c_idx] = s_hat
            c_idx += 1
    return choices, rewards, n_snap, s_snap, max_dev, STATUS_OK


def default_backend() -> str:
    name = os.environ.get("COOPUCB_BACKEND", "numba").strip().lower()
    if name not in ("numba", "numpy"):
        raise ValueError(f"COOPUCB_BACKEND must be 'numba' or 'numpy', got {name!r}")
    if name == "numba" and not HAVE_NUMBA:  # pragma: no cover
        log.warning("numba unavailable; falling back to the numpy backend")
        return "numpy"
    return name


def simulate(
    P,
    means,
    sigma,
    eps_c,
    gamma,
    z,
    u,
    schedule=SCHEDULE_POLICY,
    init_mode=INIT_SYNCHRONIZED,
    checkpoints=(),
    backend: str | None = None,
):
    """Run one simulation over the pre-drawn streams ``z`` and ``u`` (both ``(T, M)``).

    Returns ``(choices, rewards, n_snap, s_snap, max_dev, status)`` where
    ``max_dev`` is the largest ``|n_hat - n_cent|`` seen over all steps.
    """
    backend = backend or default_backend()
    T = z.shape[0]
    log_t = np.log(np.arange(1, T + 1, dtype=np.float64))
    args = (
        np.ascontiguousarray(P, dtype=np.float64),
        np.ascontiguousarray(means, dtype=np.float64),
        float(sigma),
        np.ascontiguousarray(eps_c, dtype=np.float64),
        float(gamma),
        log_t,
        np.ascontiguousarray(z, dtype=np.float64),
        np.ascontiguousarray(u, dtype=np.float64),
        int(schedule),
        int(init_mode),
        np.ascontiguousarray(sorted(set(int(c) for c in checkpoints)), dtype=np.int64),
    )
    if backend == "numba":
        return _simulate_numba(*args)
    if backend == "numpy":
        return _simulate_numpy(*args)
    raise ValueError(f"unknown backend {backend!r}")
