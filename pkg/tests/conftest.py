import itertools

import networkx as nx
import numpy as np
import pytest

from bgcn.data import synthetic_citation
from bgcn.graph import build_graph


def random_graph(rng, n, p=0.4, min_degree=0):
    """Erdos-Renyi graph; with ``min_degree=1`` isolated nodes get one random edge."""
    edges = [(i, j) for i, j in itertools.combinations(range(n), 2) if rng.random() < p]
    if min_degree:
        deg = np.zeros(n, int)
        for i, j in edges:
            deg[i] += 1
            deg[j] += 1
        for i in np.flatnonzero(deg == 0):
            j = int(rng.choice([k for k in range(n) if k != i]))
            edges.append((int(i), j))
    return build_graph(edges, n)


def connected_graph(rng, n, p=0.3):
    """Random spanning tree plus extra edges."""
    order = rng.permutation(n)
    edges = [(int(order[k]), int(order[rng.integers(k)])) for k in range(1, n)]
    edges += [(i, j) for i, j in itertools.combinations(range(n), 2) if rng.random() < p]
    return build_graph(edges, n)


@pytest.fixture
def karate():
    g = nx.karate_club_graph()
    return build_graph(list(g.edges()), g.number_of_nodes())


@pytest.fixture
def path3():
    return build_graph([(0, 1), (1, 2)], 3)


@pytest.fixture
def small_dataset():
    return synthetic_citation(3, 60, 30, p_in=0.1, p_out=0.01, seed=3)


def numeric_grad(f, x, h=1e-6):
    """Central differences of scalar ``f()`` w.r.t. array ``x`` (perturbed in place)."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + h
        fp = f()
        x[i] = old - h
        fm = f()
        x[i] = old
        g[i] = (fp - fm) / (2 * h)
    return g


def rel_error(a, b):
    """Largest absolute difference relative to the larger gradient's scale."""
    scale = max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-12)
    return float(np.max(np.abs(a - b)) / scale)
