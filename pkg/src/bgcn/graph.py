"""Undirected graphs in CSR form and the GCN propagation matrix."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import kernels


class GraphError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SparseGraph:
    """Unweighted undirected graph.

    Rows of ``col_indices`` are strictly increasing. Base graphs carry no
    self-loops; :func:`add_self_loops` produces the augmented graph used by
    the GCN.
    """

    n: int
    row_offsets: np.ndarray
    col_indices: np.ndarray

    def __post_init__(self):
        self.row_offsets.setflags(write=False)
        self.col_indices.setflags(write=False)

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.row_offsets)

    @property
    def num_edges(self) -> int:
        """Undirected edge count (a self-loop counts once)."""
        loops = self.num_self_loops
        return (self.col_indices.shape[0] - loops) // 2 + loops

    @property
    def num_self_loops(self) -> int:
        rows = np.repeat(np.arange(self.n), self.degrees)
        return int(np.count_nonzero(rows == self.col_indices))

    def __eq__(self, other):
        if not isinstance(other, SparseGraph):
            return NotImplemented
        return (self.n == other.n
                and np.array_equal(self.row_offsets, other.row_offsets)
                and np.array_equal(self.col_indices, other.col_indices))

    def __hash__(self):
        return hash((self.n, self.row_offsets.tobytes(), self.col_indices.tobytes()))

    def edge_set(self) -> set[tuple[int, int]]:
        """Undirected edges as ``(u, v)`` pairs with ``u <= v``."""
        rows = np.repeat(np.arange(self.n), self.degrees)
        keep = rows <= self.col_indices
        return set(zip(rows[keep].tolist(), self.col_indices[keep].tolist()))

    def to_dense(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        rows = np.repeat(np.arange(self.n), self.degrees)
        a[rows, self.col_indices] = 1.0
        return a

    def adjacency_lists(self) -> list[list[int]]:
        cols = self.col_indices.tolist()
        offs = self.row_offsets.tolist()
        return [cols[offs[i]:offs[i + 1]] for i in range(self.n)]


@dataclass(frozen=True, eq=False)
class NormalizedAdjacency:
    """CSR matrix holding ``D^-1/2 (A + I) D^-1/2``."""

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray

    def to_dense(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        rows = np.repeat(np.arange(self.n), np.diff(self.indptr))
        a[rows, self.indices] = self.data
        return a

    def matmul(self, h: np.ndarray) -> np.ndarray:
        return spmm(self, h)


def _check_node(g: SparseGraph, i: int) -> None:
    if not 0 <= i < g.n:
        raise GraphError(f"node index {i} out of range for graph with {g.n} nodes")


def _from_pairs(n: int, rows: np.ndarray, cols: np.ndarray) -> SparseGraph:
    """CSR from directed pairs that are already symmetric; dedups and sorts."""
    if rows.size:
        key = np.unique(rows.astype(np.int64) * n + cols.astype(np.int64))
        rows, cols = key // n, key % n
    counts = np.bincount(rows, minlength=n) if rows.size else np.zeros(n, np.int64)
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    return SparseGraph(n, offsets, np.asarray(cols, dtype=np.int64))


def build_graph(edges: Iterable[tuple[int, int]], n: int) -> SparseGraph:
    """Symmetrize, deduplicate and drop self-loops from an edge list."""
    arr = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges,
                     dtype=np.int64).reshape(-1, 2)
    bad = np.flatnonzero((arr < 0).any(axis=1) | (arr >= n).any(axis=1))
    if bad.size:
        u, v = arr[bad[0]]
        raise GraphError(f"edge #{bad[0]} ({u}, {v}) has an index outside [0, {n})")
    arr = arr[arr[:, 0] != arr[:, 1]]
    rows = np.concatenate([arr[:, 0], arr[:, 1]])
    cols = np.concatenate([arr[:, 1], arr[:, 0]])
    return _from_pairs(n, rows, cols)


def from_adjacency_lists(adj: list[Iterable[int]]) -> SparseGraph:
    n = len(adj)
    rows = np.repeat(np.arange(n), [len(a) for a in adj]).astype(np.int64)
    cols = np.fromiter((j for a in adj for j in a), dtype=np.int64, count=rows.size)
    return _from_pairs(n, rows, cols)


def validate(g: SparseGraph, allow_self_loops: bool = False) -> None:
    """Raise :class:`GraphError` unless ``g`` satisfies every CSR invariant."""
    ro, ci = g.row_offsets, g.col_indices
    if ro.shape != (g.n + 1,) or ro[0] != 0 or ro[-1] != ci.shape[0]:
        raise GraphError("row_offsets inconsistent with col_indices")
    if np.any(np.diff(ro) < 0):
        raise GraphError("negative degree")
    if ci.size and (ci.min() < 0 or ci.max() >= g.n):
        raise GraphError("column index out of range")
    rows = np.repeat(np.arange(g.n), np.diff(ro))
    same_row = rows[1:] == rows[:-1]
    if np.any(same_row & (ci[1:] <= ci[:-1])):
        raise GraphError("row not strictly increasing")
    if not allow_self_loops and np.any(rows == ci):
        raise GraphError("self-loop in base graph")
    fwd = rows * g.n + ci
    rev = ci * g.n + rows
    if not np.array_equal(np.sort(fwd), np.sort(rev)):
        raise GraphError("graph is not symmetric")


def degree(g: SparseGraph, i: int) -> int:
    _check_node(g, i)
    return int(g.row_offsets[i + 1] - g.row_offsets[i])


def neighbors(g: SparseGraph, i: int) -> list[int]:
    _check_node(g, i)
    return g.col_indices[g.row_offsets[i]:g.row_offsets[i + 1]].tolist()


def add_self_loops(g: SparseGraph) -> SparseGraph:
    """Return A + I. Raises if ``g`` already has a self-loop."""
    if g.num_self_loops:
        raise GraphError("graph already contains self-loops")
    rows = np.repeat(np.arange(g.n), g.degrees)
    diag = np.arange(g.n)
    return _from_pairs(g.n, np.concatenate([rows, diag]),
                       np.concatenate([g.col_indices, diag]))


def normalize_adjacency(g_tilde: SparseGraph) -> NormalizedAdjacency:
    deg = g_tilde.degrees
    if np.any(deg == 0):
        i = int(np.flatnonzero(deg == 0)[0])
        raise GraphError(f"node {i} has degree 0; add self-loops before normalizing")
    # 1/sqrt(d_i * d_j) in one rounding; the product is symmetric, so (i, j) == (j, i)
    deg = deg.astype(np.float64)
    rows = np.repeat(np.arange(g_tilde.n), g_tilde.degrees)
    data = 1.0 / np.sqrt(deg[rows] * deg[g_tilde.col_indices])
    return NormalizedAdjacency(g_tilde.n, g_tilde.row_offsets.copy(),
                               g_tilde.col_indices.copy(), data)


def gcn_adjacency(g: SparseGraph) -> NormalizedAdjacency:
    """Shortcut for ``normalize_adjacency(add_self_loops(g))``."""
    return normalize_adjacency(add_self_loops(g))


def spmm(a: NormalizedAdjacency, h: np.ndarray, backend: str | None = None) -> np.ndarray:
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 2 or h.shape[0] != a.n:
        raise GraphError(f"spmm: matrix with {a.n} rows cannot multiply shape {h.shape}")
    return kernels.spmm(a.indptr, a.indices, a.data, h, backend=backend)


def replace_neighborhood(g: SparseGraph, target: int, source: int,
                         source_graph: SparseGraph | None = None) -> SparseGraph:
    """Give ``target`` the neighborhood of ``source``.

    The new neighbor set is ``N(source)`` taken from ``source_graph`` (``g``
    by default), minus ``target`` itself. Reverse edges are updated so the
    result stays symmetric.
    """
    _check_node(g, target)
    _check_node(g, source)
    if target == source and source_graph is None:
        return g
    adj = [set(a) for a in g.adjacency_lists()]
    src = source_graph if source_graph is not None else g
    _rewrite(adj, target, neighbors(src, source))
    return from_adjacency_lists([sorted(a) for a in adj])


def _rewrite(adj: list[set[int]], target: int, new_nbrs: Iterable[int]) -> None:
    for k in adj[target]:
        adj[k].discard(target)
    new = set(new_nbrs)
    new.discard(target)
    adj[target] = new
    for k in new:
        adj[k].add(target)


def write_edge_list(g: SparseGraph, path) -> None:
    """Debug export: one ``u<TAB>v`` line per undirected edge, ``u < v``."""
    with open(path, "w") as fh:
        for u, v in sorted(g.edge_set()):
            if u < v:
                fh.write(f"{u}\t{v}\n")
