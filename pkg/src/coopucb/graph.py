"""Communication graphs and the consensus matrix ``P = I - (kappa/d_max) L``."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse.csgraph import connected_components

__all__ = [
    "GraphError",
    "NotSymmetricError",
    "SelfLoopError",
    "DisconnectedError",
    "SpectrumError",
    "ConnectivityCapExceeded",
    "Graph",
    "ConsensusMatrix",
    "build_graph",
    "erdos_renyi",
    "sample_er_adjacency",
    "laplacian",
    "default_kappa",
    "resolve_kappa",
    "build_consensus_matrix",
    "read_edge_list",
    "parse_edge_list",
    "complete_graph",
    "path_graph",
    "star_graph",
    "FIG2_EDGES",
    "fig2_graph",
]


class GraphError(ValueError):
    """Base class for invalid graph or consensus-matrix input."""


class NotSymmetricError(GraphError):
    pass


class SelfLoopError(GraphError):
    pass


class DisconnectedError(GraphError):
    pass


class SpectrumError(GraphError):
    pass


class ConnectivityCapExceeded(GraphError, RuntimeError):
    pass


@dataclass(frozen=True)
class Graph:
    """Undirected, connected, unweighted graph on ``M`` agents."""

    adjacency: np.ndarray

    @property
    def M(self) -> int:
        return self.adjacency.shape[0]

    @property
    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1).astype(int)

    @property
    def dmax(self) -> int:
        return int(self.degrees.max()) if self.M > 0 else 0

    @property
    def n_edges(self) -> int:
        return int(self.adjacency.sum()) // 2

    def edges(self) -> list[tuple[int, int]]:
        """0-indexed edge list with ``u < v``."""
        iu, iv = np.nonzero(np.triu(self.adjacency, k=1))
        return list(zip(iu.tolist(), iv.tolist()))


@dataclass(frozen=True)
class ConsensusMatrix:
    """``P`` with its eigendecomposition, eigenpairs sorted by descending eigenvalue.

    ``eigenvectors[:, p]`` is the unit eigenvector for ``eigenvalues[p]``.
    """

    P: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    kappa: float
    dmax: int
    graph: Graph = field(repr=False)

    @property
    def M(self) -> int:
        return self.P.shape[0]


def build_graph(adjacency) -> Graph:
    A = np.asarray(adjacency)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise GraphError(f"adjacency must be square, got shape {A.shape}")
    if not np.isin(A, (0, 1)).all():
        raise GraphError("adjacency entries must be 0 or 1")
    A = A.astype(np.int64)
    if not np.array_equal(A, A.T):
        raise NotSymmetricError("adjacency is not symmetric")
    if np.any(np.diag(A) != 0):
        raise SelfLoopError("adjacency has self-loops (nonzero diagonal)")
    if A.shape[0] == 0:
        raise GraphError("graph must have at least one node")
    n_comp, _ = connected_components(A, directed=False)
    if n_comp != 1:
        raise DisconnectedError(f"graph is disconnected ({n_comp} components)")
    A.setflags(write=False)
    return Graph(A)


def sample_er_adjacency(M: int, rho: float, rng: np.random.Generator) -> np.ndarray:
    """One unconditioned G(M, rho) draw; may be disconnected."""
    iu = np.triu_indices(M, k=1)
    A = np.zeros((M, M), dtype=np.int64)
    A[iu] = rng.random(len(iu[0])) < rho
    return A + A.T


def erdos_renyi(M: int, rho: float, seed=None, max_attempts: int = 10000) -> Graph:
    """Connected Erdos-Renyi graph, by rejection: resample the whole graph until connected."""
    if M < 2:
        raise ValueError("erdos_renyi needs M >= 2")
    if not 0.0 < rho <= 1.0:
        raise ValueError("rho must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    for _ in range(max_attempts):
        A = sample_er_adjacency(M, rho, rng)
        if connected_components(A, directed=False)[0] == 1:
            return build_graph(A)
    raise ConnectivityCapExceeded(
        f"connectivity cap exceeded: no connected graph in {max_attempts} attempts"
    )


def laplacian(g: Graph) -> np.ndarray:
    A = g.adjacency.astype(float)
    return np.diag(A.sum(axis=1)) - A


def default_kappa(g: Graph) -> float:
    """``d_max / (d_max + 1)``; gives ``P = I - L/(d_max + 1)``, always admissible."""
    return resolve_kappa("dmax/(dmax+1)", g)


def resolve_kappa(kappa, g: Graph) -> float:
    """Turn a number or one of the named rules into a concrete step size."""
    if kappa is None:
        kappa = "dmax/(dmax+1)"
    if isinstance(kappa, str):
        rule = kappa.replace(" ", "").lower()
        d = g.dmax
        if rule == "dmax/(dmax+1)":
            return d / (d + 1) if d >= 1 else 1.0
        if rule == "dmax/(dmax-1)":
            return d / (d - 1) if d >= 2 else 1.0
        try:
            return float(rule)
        except ValueError:
            raise ValueError(f"unknown kappa rule {kappa!r}") from None
    return float(kappa)


def _sorted_eigh(P: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    w, V = np.linalg.eigh(P)
    order = np.argsort(-w, kind="stable")
    w, V = w[order], V[:, order]
    # first nonzero component of each eigenvector positive
    for p in range(V.shape[1]):
        nz = np.flatnonzero(np.abs(V[:, p]) > 1e-12)
        if nz.size and V[nz[0], p] < 0:
            V[:, p] = -V[:, p]
    return w, V


def build_consensus_matrix(g: Graph, kappa=None) -> ConsensusMatrix:
    kappa = resolve_kappa(kappa, g)
    if not kappa > 0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    M = g.M
    if M == 1:
        P = np.ones((1, 1))
        w, V = np.ones(1), np.ones((1, 1))
        dmax = 0
    else:
        dmax = g.dmax
        P = np.eye(M) - (kappa / dmax) * laplacian(g)
        w, V = _sorted_eigh(P)
        if w[-1] <= -1 + 1e-12:
            raise SpectrumError(
                f"spectrum violation: lambda_M <= -1 (lambda_M = {w[-1]:.6g}, kappa = {kappa:.6g})"
            )
        if w[1] >= 1 - 1e-12:
            raise SpectrumError("spectrum violation: lambda_2 >= 1")
    for arr in (P, w, V):
        arr.setflags(write=False)
    return ConsensusMatrix(P=P, eigenvalues=w, eigenvectors=V, kappa=kappa, dmax=dmax, graph=g)


def parse_edge_list(text: str, M: int | None = None) -> Graph:
    """Parse "u v" lines (1-indexed); blank lines and ``#`` comments are ignored.

    The node count is the largest id seen unless ``M`` is given. An empty list is
    the 1-node graph.
    """
    edges = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise GraphError(f"line {lineno}: expected 'u v', got {raw!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphError(f"line {lineno}: node ids must be integers") from None
        if u < 1 or v < 1:
            raise GraphError(f"line {lineno}: node ids are 1-indexed")
        edges.append((u - 1, v - 1))
    n = max((max(e) + 1 for e in edges), default=1)
    if M is not None:
        if n > M:
            raise GraphError(f"edge list references node {n} but M = {M}")
        n = M
    A = np.zeros((n, n), dtype=np.int64)
    for u, v in edges:
        if u == v:
            raise SelfLoopError(f"self-loop on node {u + 1}")
        A[u, v] = A[v, u] = 1
    return build_graph(A)


def read_edge_list(path, M: int | None = None) -> Graph:
    return parse_edge_list(Path(path).read_text(), M=M)


def complete_graph(M: int) -> Graph:
    return build_graph(np.ones((M, M), dtype=np.int64) - np.eye(M, dtype=np.int64))


def path_graph(M: int) -> Graph:
    A = np.zeros((M, M), dtype=np.int64)
    idx = np.arange(M - 1)
    A[idx, idx + 1] = A[idx + 1, idx] = 1
    return build_graph(A)


def star_graph(M: int) -> Graph:
    """Node 0 is the hub."""
    A = np.zeros((M, M), dtype=np.int64)
    A[0, 1:] = A[1:, 0] = 1
    return build_graph(A)


# 4-agent network of the fixed-graph example (1-indexed): triangle 1-2-3, pendant 4 on 3.
FIG2_EDGES = ((1, 2), (1, 3), (2, 3), (3, 4))


def fig2_graph() -> Graph:
    return parse_edge_list("\n".join(f"{u} {v}" for u, v in FIG2_EDGES))
