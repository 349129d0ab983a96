import numpy as np
import pytest

from bgcn import kernels
from bgcn._rng import Stream, derive_seed, draw, draw_array, stream_key, stream_keys, to_index
from bgcn.graph import gcn_adjacency
from bgcn.sampler import walk

from conftest import random_graph

needs_compiled = pytest.mark.skipif(kernels.BACKEND != "compiled",
                                    reason="compiled extension not built")


def test_scalar_and_vector_rng_agree():
    keys = stream_keys(12345, np.arange(20))
    assert keys.tolist() == [stream_key(12345, s) for s in range(20)]
    for c in (0, 1, 7, 1000):
        assert draw_array(keys, c).tolist() == [draw(int(k), c) for k in keys]


def test_to_index_in_range():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        x = int(rng.integers(0, 2**63)) * 2 + int(rng.integers(0, 2))
        b = int(rng.integers(1, 500))
        assert 0 <= to_index(x, b) < b


def test_derive_seed_is_stable_and_distinct():
    assert derive_seed(3, 1, 2) == derive_seed(3, 1, 2)
    assert len({derive_seed(3, *p) for p in [(0,), (1,), (1, 0), (0, 1), (2,)]}) == 5


@needs_compiled
def test_spmm_backends_bitwise_equal():
    rng = np.random.default_rng(1)
    for n in (1, 5, 40, 200):
        a = gcn_adjacency(random_graph(rng, n, min(0.5, 6 / n)))
        h = rng.standard_normal((n, 7))
        c = kernels.spmm(a.indptr, a.indices, a.data, h, backend="compiled")
        p = kernels.spmm(a.indptr, a.indices, a.data, h, backend="python")
        assert np.array_equal(c, p)


@needs_compiled
def test_walk_backends_bitwise_equal(karate):
    starts = np.tile(np.arange(karate.n), 50)
    c = kernels.mh_walks(karate.row_offsets, karate.col_indices, starts, 25, 9, backend="compiled")
    p = kernels.mh_walks(karate.row_offsets, karate.col_indices, starts, 25, 9, backend="python")
    assert np.array_equal(c, p)


def test_batched_walks_match_sequential_walks(karate):
    starts = np.arange(karate.n)
    batch = kernels.mh_walks(karate.row_offsets, karate.col_indices, starts, 12, 4)
    seq = [walk(karate, int(s), 12, Stream(4, int(s))) for s in starts]
    assert batch.tolist() == seq


def test_isolated_walkers_stay_put():
    g = random_graph(np.random.default_rng(0), 6, 0.0)
    out = kernels.mh_walks(g.row_offsets, g.col_indices, np.arange(6), 10, 0)
    assert out.tolist() == list(range(6))


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")
