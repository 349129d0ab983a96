"""Metropolis-Hastings neighborhood random walk sampling.

The walk proposes a uniform neighbor ``j`` of the current node ``i`` and
accepts it with probability ``min(1, d_i / d_j)``; its stationary
distribution over nodes is uniform. A copy vector ``xi`` records, for each
node, where a walk started there came to rest, and :func:`sample_graph`
rewires nodes onto the neighborhoods named by ``xi``.

Degrees here are raw graph degrees (no self-loops).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from ._rng import derive_seed
from .graph import GraphError, SparseGraph, _rewrite, degree, from_adjacency_lists

DEFAULT_WALK_STEPS = 10


@dataclass(frozen=True)
class SamplerConfig:
    walk_steps: int = DEFAULT_WALK_STEPS
    seed: int = 0

    def __post_init__(self):
        if self.walk_steps < 1:
            raise ValueError("walk_steps must be >= 1")


def acceptance_prob(d_i: int, d_j: int) -> float:
    """``min(1, d_i / d_j)`` for a move from a node of degree ``d_i``."""
    if d_i < 1 or d_j < 1:
        raise ValueError(f"acceptance needs positive degrees, got {d_i} and {d_j}")
    return min(1.0, d_i / d_j)


def mh_step(g: SparseGraph, current: int, rng) -> int:
    """One MH move from ``current``.

    ``rng`` needs ``integers(bound)`` and ``random()``; a
    ``numpy.random.Generator`` or a :class:`bgcn._rng.Stream` both work.
    """
    d = degree(g, current)
    if d == 0:
        return current
    start = g.row_offsets[current]
    j = int(g.col_indices[start + int(rng.integers(d))])
    u = rng.random()
    ratio = min(1.0, d / (g.row_offsets[j + 1] - g.row_offsets[j]))
    return j if u <= ratio else current


def walk(g: SparseGraph, start: int, steps: int, rng) -> int:
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if degree(g, start) == 0:
        return start
    cur = start
    for _ in range(steps):
        cur = mh_step(g, cur, rng)
    return cur


def walk_many(g: SparseGraph, starts, steps: int, seed: int, streams=None,
              backend: str | None = None) -> np.ndarray:
    """Batched :func:`walk`; walker ``w`` uses ``Stream(seed, streams[w])``."""
    return kernels.mh_walks(g.row_offsets, g.col_indices, starts, steps, seed,
                            streams, backend=backend)


def transition_matrix(g: SparseGraph) -> np.ndarray:
    """Exact MH transition matrix ``P[i, j] = (1/d_i) min(1, d_i/d_j)``."""
    deg = g.degrees
    p = np.zeros((g.n, g.n))
    for i in range(g.n):
        if deg[i] == 0:
            p[i, i] = 1.0
            continue
        for j in g.col_indices[g.row_offsets[i]:g.row_offsets[i + 1]]:
            p[i, j] = (1.0 / deg[i]) * min(1.0, deg[i] / deg[j])
        p[i, i] += 1.0 - p[i].sum()
    return p


def sample_xi(g: SparseGraph, cfg: SamplerConfig, backend: str | None = None) -> np.ndarray:
    """Draw the copy vector.

    Node ``j`` runs ``cfg.walk_steps`` MH moves from itself, then proposes a
    uniform neighbor of the terminal node under the same acceptance rule;
    ``xi[j]`` is the accepted candidate, or the terminal node on rejection.
    That last proposal is exactly one more MH move, so the whole thing is a
    ``walk_steps + 1`` walk on stream ``j``. Isolated nodes map to
    themselves.
    """
    starts = np.arange(g.n, dtype=np.int64)
    return walk_many(g, starts, cfg.walk_steps + 1, cfg.seed, starts, backend=backend)


def xi_distribution(g: SparseGraph, walk_steps: int) -> np.ndarray:
    """Exact law of ``xi``: row ``j`` is ``e_j P^(walk_steps + 1)``."""
    return np.linalg.matrix_power(transition_matrix(g), walk_steps + 1)


def copy_probabilities(g_obs: SparseGraph, xi: np.ndarray) -> np.ndarray:
    """``gamma_j = min(1, d_j / d_xi[j])``; nodes with ``xi[j] == j`` get 1."""
    xi = np.asarray(xi, dtype=np.int64)
    deg = g_obs.degrees.astype(np.float64)
    gamma = np.ones(g_obs.n)
    moved = xi != np.arange(g_obs.n)
    gamma[moved] = np.minimum(1.0, deg[moved] / deg[xi[moved]])
    return gamma


def check_xi(g: SparseGraph, xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=np.int64)
    if xi.shape != (g.n,):
        raise GraphError(f"copy vector has shape {xi.shape}, expected ({g.n},)")
    if g.n and (xi.min() < 0 or xi.max() >= g.n):
        raise GraphError("copy vector entry out of range")
    isolated = g.degrees == 0
    if np.any(xi[isolated] != np.flatnonzero(isolated)):
        raise GraphError("isolated nodes must map to themselves")
    if np.any(g.degrees[xi[~isolated]] == 0):
        raise GraphError("copy source for a connected node is isolated")
    return xi


def apply_copies(g_obs: SparseGraph, xi: np.ndarray, copied: np.ndarray) -> SparseGraph:
    """Rewire every node with ``copied[j]`` onto ``N_obs(xi[j])``.

    Copies are applied in ascending node order on the evolving graph; the
    source neighborhoods are always read from ``g_obs``.
    """
    idx = np.flatnonzero(copied)
    if idx.size == 0:
        return g_obs
    adj = [set(a) for a in g_obs.adjacency_lists()]
    ro, ci = g_obs.row_offsets, g_obs.col_indices
    for j in idx.tolist():
        s = int(xi[j])
        _rewrite(adj, j, ci[ro[s]:ro[s + 1]].tolist())
    return from_adjacency_lists([sorted(a) for a in adj])


def sample_copy_mask(g_obs: SparseGraph, xi, rng: np.random.Generator) -> np.ndarray:
    """Which nodes take their copy source: ``u_j >= gamma_j``."""
    gamma = copy_probabilities(g_obs, xi)
    u = rng.random(g_obs.n)
    return u >= gamma


def sample_graph(g_obs: SparseGraph, xi, rng: np.random.Generator) -> SparseGraph:
    """Draw a graph from the neighborhood-copying model given ``xi``.

    Node ``j`` keeps its observed neighborhood with probability
    ``gamma_j`` and otherwise copies ``xi[j]``'s.
    """
    xi = check_xi(g_obs, xi)
    return apply_copies(g_obs, xi, sample_copy_mask(g_obs, xi, rng))


class NeighborhoodRandomWalkSampler:
    """Default graph sampler used by the BGCN training loop."""

    name = "nrws"

    def __init__(self, walk_steps: int = DEFAULT_WALK_STEPS, backend: str | None = None):
        self.walk_steps = walk_steps
        self.backend = backend

    def sample_xi(self, g: SparseGraph, seed: int) -> np.ndarray:
        return sample_xi(g, SamplerConfig(self.walk_steps, seed), backend=self.backend)

    def sample_graph(self, g_obs: SparseGraph, xi, seed: int) -> SparseGraph:
        return sample_graph(g_obs, xi, np.random.default_rng(derive_seed(seed, 1)))


class IdentitySampler:
    """Maps every node to itself, so every sampled graph is ``G_obs``."""

    name = "identity"

    def sample_xi(self, g: SparseGraph, seed: int) -> np.ndarray:
        return np.arange(g.n, dtype=np.int64)

    def sample_graph(self, g_obs: SparseGraph, xi, seed: int) -> SparseGraph:
        return g_obs
