"""Backend selection for the hot kernels.

The compiled extension ``bgcn._kernels`` is used when importable; otherwise
(or when ``BGCN_FORCE_PYTHON=1``) the NumPy fallback is used. Both expose
``spmm`` and ``mh_walks`` with identical results.
"""
from __future__ import annotations

import os

import numpy as np

from . import _fallback

if os.environ.get("BGCN_FORCE_PYTHON", "") not in ("", "0"):
    _compiled = None
else:
    try:
        from . import _kernels as _compiled
    except ImportError:
        _compiled = None

BACKEND = "compiled" if _compiled is not None else "python"
_impl = _compiled if _compiled is not None else _fallback


def get_backend(name: str | None = None):
    """Return the kernel module for ``name`` ('compiled', 'python' or None)."""
    if name is None:
        return _impl
    if name == "python":
        return _fallback
    if name == "compiled":
        if _compiled is None:
            raise ImportError("compiled kernels are not built")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def spmm(indptr, indices, data, h, backend: str | None = None) -> np.ndarray:
    h = np.ascontiguousarray(h, dtype=np.float64)
    return get_backend(backend).spmm(indptr, indices, data, h)


def mh_walks(indptr, indices, starts, steps: int, seed: int, streams=None,
             backend: str | None = None) -> np.ndarray:
    """Terminal nodes of independent MH random walks.

    Walker ``w`` starts at ``starts[w]`` and draws from stream
    ``streams[w]`` (default ``w``) of ``seed``.
    """
    starts = np.ascontiguousarray(starts, dtype=np.int64)
    if streams is None:
        streams = np.arange(starts.shape[0], dtype=np.int64)
    streams = np.ascontiguousarray(streams, dtype=np.int64)
    return get_backend(backend).mh_walks(indptr, indices, starts, int(steps),
                                         int(seed), streams)
