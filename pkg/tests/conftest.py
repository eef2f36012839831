import numpy as np
import pytest
from hypothesis import strategies as st

from coopucb.bandit import table1_model
from coopucb.graph import build_consensus_matrix, build_graph, fig2_graph, path_graph


def random_connected_adjacency(M, rng, p=0.5):
    """Random spanning tree plus extra edges; always connected."""
    A = np.zeros((M, M), dtype=np.int64)
    order = rng.permutation(M)
    for idx in range(1, M):
        u, v = order[idx], order[rng.integers(idx)]
        A[u, v] = A[v, u] = 1
    extra = np.triu(rng.random((M, M)) < p, k=1)
    A = np.maximum(A, (extra | extra.T).astype(np.int64))
    return A


@st.composite
def connected_graphs(draw, min_nodes=2, max_nodes=8):
    M = draw(st.integers(min_nodes, max_nodes))
    seed = draw(st.integers(0, 2**32 - 1))
    p = draw(st.floats(0.0, 1.0))
    return build_graph(random_connected_adjacency(M, np.random.default_rng(seed), p))


@pytest.fixture
def model():
    return table1_model()


@pytest.fixture
def fig2():
    return build_consensus_matrix(fig2_graph())


@pytest.fixture
def path3_k1():
    return build_consensus_matrix(path_graph(3), kappa=1.0)


ACCEPTANCE_LINES = {}


def pytest_addoption(parser):
    parser.addoption("--full", action="store_true", help="run CLI recipes at their full run counts")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
