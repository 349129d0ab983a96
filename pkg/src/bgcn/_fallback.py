"""NumPy/SciPy implementations of the hot kernels.

Used when the compiled extension is unavailable or ``BGCN_FORCE_PYTHON`` is
set. Results match ``_kernels`` exactly; see tests/test_kernels.py.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from ._rng import draw_array, stream_keys, to_index_array, to_unit_array


def spmm(indptr, indices, data, h):
    n = indptr.shape[0] - 1
    a = sp.csr_matrix((data, indices, indptr), shape=(n, n))
    return np.ascontiguousarray(a @ h)


def mh_walks(indptr, indices, starts, steps, seed, streams):
    deg = np.diff(indptr)
    cur = np.array(starts, dtype=np.int64, copy=True)
    keys = stream_keys(seed, streams)
    for t in range(steps):
        x_prop = draw_array(keys, 2 * t)
        x_acc = draw_array(keys, 2 * t + 1)
        d = deg[cur]
        act = np.flatnonzero(d > 0)
        if act.size == 0:
            break
        c = cur[act]
        dc = d[act]
        k = to_index_array(x_prop[act], dc)
        prop = indices[indptr[c] + k]
        ratio = dc.astype(np.float64) / deg[prop].astype(np.float64)
        accept = to_unit_array(x_acc[act]) <= np.minimum(1.0, ratio)
        cur[act] = np.where(accept, prop, c)
    return cur
