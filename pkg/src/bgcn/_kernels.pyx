# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: CSR x dense products and batched MH random walks.

The random-stream arithmetic mirrors bgcn._rng exactly.
"""
import numpy as np
cimport numpy as cnp
from libc.stdint cimport int64_t, uint64_t

cnp.import_array()

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef double INV_2_53 = 1.0 / 9007199254740992.0


cdef inline uint64_t mix64(uint64_t z) nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline uint64_t draw(uint64_t key, uint64_t counter) nogil:
    return mix64(key + (counter + 1) * GOLDEN)


def spmm(const int64_t[::1] indptr, const int64_t[::1] indices,
         const double[::1] data, h):
    cdef const double[:, ::1] hv = np.ascontiguousarray(h, dtype=np.float64)
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t m = hv.shape[1]
    out = np.zeros((n, m), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t i, p, c
    cdef int64_t j
    cdef double a
    with nogil:
        for i in range(n):
            for p in range(indptr[i], indptr[i + 1]):
                j = indices[p]
                a = data[p]
                for c in range(m):
                    ov[i, c] += a * hv[j, c]
    return out


def mh_walks(const int64_t[::1] indptr, const int64_t[::1] indices,
             starts, Py_ssize_t steps, seed, streams):
    cdef const int64_t[::1] sv = np.ascontiguousarray(starts, dtype=np.int64)
    cdef const int64_t[::1] stv = np.ascontiguousarray(streams, dtype=np.int64)
    cdef Py_ssize_t w = sv.shape[0]
    out = np.empty(w, dtype=np.int64)
    cdef int64_t[::1] ov = out
    cdef uint64_t base = mix64(<uint64_t>(int(seed) & 0xFFFFFFFFFFFFFFFF))
    cdef uint64_t key, x
    cdef Py_ssize_t i, t
    cdef int64_t cur, prop, dc, dp
    cdef double ratio, u
    with nogil:
        for i in range(w):
            key = mix64(base + (<uint64_t>stv[i] + 1) * GOLDEN)
            cur = sv[i]
            for t in range(steps):
                dc = indptr[cur + 1] - indptr[cur]
                if dc == 0:
                    break
                x = draw(key, 2 * t)
                prop = indices[indptr[cur] + <int64_t>(((x >> 32) * <uint64_t>dc) >> 32)]
                dp = indptr[prop + 1] - indptr[prop]
                ratio = <double>dc / <double>dp
                if ratio > 1.0:
                    ratio = 1.0
                u = <double>(draw(key, 2 * t + 1) >> 11) * INV_2_53
                if u <= ratio:
                    cur = prop
            ov[i] = cur
    return out
