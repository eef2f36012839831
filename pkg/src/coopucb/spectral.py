"""Graph-spectral explore/exploit measures derived from a consensus matrix.

``eps_n`` bounds how far any agent's pull-count estimate can drift from the
centralized per-agent count. ``eps_c[k]`` is agent ``k``'s variance inflation
from imperfect mixing, and ``varsigma[k] = 1/eps_c[k]`` is its node certainty.

Indices in the public functions are 0-based (``p = 0`` is the unit eigenvalue).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import ConsensusMatrix

__all__ = [
    "ZERO_TOL",
    "READINGS",
    "PairTerms",
    "SpectralMetrics",
    "epsilon_n",
    "pair_terms",
    "a_pj",
    "a_matrix",
    "epsilon_c",
    "epsilon_c_all",
    "node_certainty",
    "spectral_metrics",
    "geometric_series_oracle",
]

# eigenvalues and metric values below this magnitude are treated as exact zeros
ZERO_TOL = 1e-12

# "dd": indicator on the sign of each summand u_p^d u_j^d (default)
# "kk": indicator on the sign of (u_p u_j^T)_kk, constant over d (literal typesetting)
READINGS = ("dd", "kk")


@dataclass(frozen=True)
class PairTerms:
    nu_plus: float
    nu_minus: float

    @property
    def nu_max(self) -> float:
        return max(abs(self.nu_minus), self.nu_plus)


@dataclass(frozen=True)
class SpectralMetrics:
    eps_n: float
    eps_c: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    reading: str = "dd"

    @property
    def varsigma(self) -> np.ndarray:
        return node_certainty(self.eps_c)

    @property
    def centralized_equivalent(self) -> np.ndarray:
        return self.eps_c == 0.0


def _clean(values: np.ndarray) -> np.ndarray:
    out = np.array(values, dtype=float)
    out[np.abs(out) < ZERO_TOL] = 0.0
    return out


def _check_index(idx: int, M: int, name: str) -> None:
    if not 0 <= idx < M:
        raise IndexError(f"{name}={idx} out of range for M={M}")


def epsilon_n(cm: ConsensusMatrix) -> float:
    lam = np.abs(_clean(cm.eigenvalues[1:]))
    return float(np.sqrt(cm.M) * np.sum(lam / (1.0 - lam)))


def pair_terms(cm: ConsensusMatrix, p: int, j: int, k: int = 0, reading: str = "dd") -> PairTerms:
    """Positive/negative parts of the Hadamard product ``u_p * u_j``.

    ``k`` only matters for the literal ``"kk"`` reading.
    """
    M = cm.M
    for idx, name in ((p, "p"), (j, "j"), (k, "k")):
        _check_index(idx, M, name)
    h = cm.eigenvectors[:, p] * cm.eigenvectors[:, j]
    if reading == "dd":
        return PairTerms(float(h[h > 0].sum()), float(h[h < 0].sum()))
    if reading == "kk":
        total = float(h.sum())
        return PairTerms(total if h[k] >= 0 else 0.0, total if h[k] <= 0 else 0.0)
    raise ValueError(f"unknown reading {reading!r}")


def a_pj(cm: ConsensusMatrix, p: int, j: int, k: int, reading: str = "dd") -> float:
    lam = _clean(cm.eigenvalues)
    terms = pair_terms(cm, p, j, k, reading)
    kk = cm.eigenvectors[k, p] * cm.eigenvectors[k, j]
    if lam[p] * lam[j] >= 0:
        return terms.nu_plus * kk if kk >= 0 else terms.nu_minus * kk
    return terms.nu_max * abs(kk)


def a_matrix(cm: ConsensusMatrix, reading: str = "dd") -> np.ndarray:
    """All ``a_pj(k)`` at once, shape ``(M, M, M)`` indexed ``[p, j, k]``."""
    if reading not in READINGS:
        raise ValueError(f"unknown reading {reading!r}")
    U = cm.eigenvectors
    lam = _clean(cm.eigenvalues)
    H = U[:, :, None] * U[:, None, :]  # H[d, p, j]
    diag = np.transpose(H, (1, 2, 0))  # diag[p, j, k] = u_p^k u_j^k
    if reading == "dd":
        nu_plus = np.where(H > 0, H, 0.0).sum(axis=0)[:, :, None]
        nu_minus = np.where(H < 0, H, 0.0).sum(axis=0)[:, :, None]
    else:
        total = H.sum(axis=0)[:, :, None]
        nu_plus = np.where(diag >= 0, total, 0.0)
        nu_minus = np.where(diag <= 0, total, 0.0)
    nu_max = np.maximum(np.abs(nu_minus), nu_plus)
    same_sign = (np.outer(lam, lam) >= 0)[:, :, None]
    return np.where(
        same_sign,
        np.where(diag >= 0, nu_plus * diag, nu_minus * diag),
        nu_max * np.abs(diag),
    )


def _mixing_weights(cm: ConsensusMatrix) -> np.ndarray:
    lam = _clean(cm.eigenvalues)
    prod = np.abs(np.outer(lam, lam[1:]))  # j runs from the second eigenvalue
    W = np.zeros((cm.M, cm.M))
    W[:, 1:] = prod / (1.0 - prod)
    return W


def epsilon_c_all(cm: ConsensusMatrix, reading: str = "dd") -> np.ndarray:
    if cm.M == 1:
        return np.zeros(1)
    A = a_matrix(cm, reading)
    W = _mixing_weights(cm)
    return _clean(cm.M * np.einsum("pj,pjk->k", W, A))


def epsilon_c(cm: ConsensusMatrix, k: int, reading: str = "dd") -> float:
    _check_index(k, cm.M, "k")
    return float(epsilon_c_all(cm, reading)[k])


def node_certainty(eps_c) -> np.ndarray:
    """``1/eps_c`` with zeros mapped to ``+inf`` (centralized-equivalent agents)."""
    eps_c = np.asarray(eps_c, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(eps_c == 0.0, np.inf, 1.0 / eps_c)


def spectral_metrics(cm: ConsensusMatrix, reading: str = "dd") -> SpectralMetrics:
    return SpectralMetrics(
        eps_n=epsilon_n(cm),
        eps_c=epsilon_c_all(cm, reading),
        eigenvalues=cm.eigenvalues,
        eigenvectors=cm.eigenvectors,
        reading=reading,
    )


def geometric_series_oracle(cm: ConsensusMatrix, horizon: int, reading: str = "dd"):
    """Truncated-sum versions of ``eps_n`` and ``eps_c``.

    Replaces each ``x/(1-x)`` by ``sum_{t=1}^{horizon} x**t`` and evaluates the
    ``a_pj(k)`` case split by direct enumeration, one index triple at a time.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    M = cm.M
    lam = [0.0 if abs(x) < ZERO_TOL else float(x) for x in cm.eigenvalues]
    U = cm.eigenvectors
    powers = np.arange(1, horizon + 1)

    def partial(x):
        return float(np.sum(np.power(x, powers)))

    pair_sums = {(p, j): partial(abs(lam[p] * lam[j])) for p in range(M) for j in range(1, M)}

    eps_n = np.sqrt(M) * sum(partial(abs(lam[p])) for p in range(1, M))
    eps_c = np.zeros(M)
    for k in range(M):
        acc = 0.0
        for p in range(M):
            for j in range(1, M):
                prod = lam[p] * lam[j]
                if prod == 0.0:
                    continue
                kk = U[k, p] * U[k, j]
                plus = minus = 0.0
                for d in range(M):
                    h = U[d, p] * U[d, j]
                    sign_src = h if reading == "dd" else kk
                    if sign_src >= 0:
                        plus += h
                    if sign_src <= 0:
                        minus += h
                if prod >= 0 and kk >= 0:
                    a = plus * kk
                elif prod >= 0:
                    a = minus * kk
                else:
                    a = max(abs(minus), plus) * abs(kk)
                acc += pair_sums[p, j] * a
        eps_c[k] = M * acc
    return float(eps_n), eps_c
