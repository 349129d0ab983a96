"""Counter-based random streams.

Every random walk draws from its own stream, keyed by ``(seed, stream id)``.
A draw is ``mix64(key + (counter + 1) * GOLDEN)``, the SplitMix64 output
function, so any draw can be computed independently of all others. The
compiled kernels implement the exact same arithmetic, which is what makes
the two backends agree bit for bit.
"""
from __future__ import annotations

import numpy as np

MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_INV_2_53 = 1.0 / (1 << 53)


def mix64(z: int) -> int:
    z &= MASK
    z = ((z ^ (z >> 30)) * _M1) & MASK
    z = ((z ^ (z >> 27)) * _M2) & MASK
    return z ^ (z >> 31)


def stream_key(seed: int, stream: int) -> int:
    return mix64(mix64(seed) + (stream + 1) * GOLDEN)


def draw(key: int, counter: int) -> int:
    return mix64(key + (counter + 1) * GOLDEN)


def to_unit(x: int) -> float:
    return (x >> 11) * _INV_2_53


def to_index(x: int, bound: int) -> int:
    """Multiply-shift reduction of a 64-bit draw into ``[0, bound)``."""
    return ((x >> 32) * bound) >> 32


class Stream:
    """Sequential view of one counter-based stream.

    Exposes ``random()`` and ``integers(bound)`` so it can stand in for a
    ``numpy.random.Generator`` in :func:`bgcn.sampler.mh_step`.
    """

    def __init__(self, seed: int, stream: int = 0):
        self.key = stream_key(seed, stream)
        self.counter = 0

    def _next(self) -> int:
        x = draw(self.key, self.counter)
        self.counter += 1
        return x

    def random(self) -> float:
        return to_unit(self._next())

    def integers(self, bound: int) -> int:
        return to_index(self._next(), bound)


# vectorized versions; uint64 array arithmetic wraps modulo 2**64

def mix64_array(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.uint64)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def stream_keys(seed: int, streams: np.ndarray) -> np.ndarray:
    base = np.uint64(mix64(seed))
    s = np.asarray(streams, dtype=np.uint64) + np.uint64(1)
    return mix64_array(base + s * np.uint64(GOLDEN))


def draw_array(keys: np.ndarray, counter: int) -> np.ndarray:
    step = np.uint64(((counter + 1) * GOLDEN) & MASK)
    return mix64_array(keys + step)


def to_unit_array(x: np.ndarray) -> np.ndarray:
    return (x >> np.uint64(11)).astype(np.float64) * _INV_2_53


def to_index_array(x: np.ndarray, bound: np.ndarray) -> np.ndarray:
    b = np.asarray(bound).astype(np.uint64)
    return (((x >> np.uint64(32)) * b) >> np.uint64(32)).astype(np.int64)


def derive_seed(seed: int, *path: int) -> int:
    """64-bit child seed for a named purpose (``path``) under ``seed``."""
    # the path length goes first: SeedSequence ignores trailing zero words,
    # which would otherwise make (1,) and (1, 0) collide
    ss = np.random.SeedSequence([seed & MASK, len(path), *path])
    return int(ss.generate_state(1, dtype=np.uint64)[0])
