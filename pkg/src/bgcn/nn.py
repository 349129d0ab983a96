"""Dense kernels with hand-written backward passes, plus Adam.

Everything is float64. Layers return ``(output, cache)`` from the forward
pass; the matching ``*_backward`` consumes the cache.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import NormalizedAdjacency, spmm


class ShapeError(ValueError):
    pass


def xavier_init(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """Glorot uniform: U(-b, b) with ``b = sqrt(6 / (rows + cols))``."""
    if rows < 1 or cols < 1:
        raise ValueError("xavier_init needs positive dimensions")
    bound = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-bound, bound, size=(rows, cols))


@dataclass
class GcnLayerCache:
    a: NormalizedAdjacency
    h: np.ndarray
    w: np.ndarray
    pre: np.ndarray
    activation: str


@dataclass
class GcnLayerGrad:
    grad_w: np.ndarray
    grad_input: np.ndarray | None


def _relu(x):
    return np.maximum(x, 0.0)


def gcn_layer_forward(a: NormalizedAdjacency, h: np.ndarray, w: np.ndarray,
                      activation: str = "relu"):
    """``act(A_norm @ h @ w)``; returns ``(output, cache)``."""
    if activation not in ("relu", "none"):
        raise ValueError(f"unknown activation {activation!r}")
    if h.shape[0] != a.n or h.shape[1] != w.shape[0]:
        raise ShapeError(f"gcn layer: A is {a.n}x{a.n}, h is {h.shape}, w is {w.shape}")
    pre = spmm(a, h @ w)
    out = _relu(pre) if activation == "relu" else pre
    return out, GcnLayerCache(a, h, w, pre, activation)


def gcn_layer_backward(cache: GcnLayerCache, grad_output: np.ndarray,
                       need_input_grad: bool = True) -> GcnLayerGrad:
    # A_norm is symmetric, so A^T g == A g
    if grad_output.shape != cache.pre.shape:
        raise ShapeError(f"grad_output {grad_output.shape} != output {cache.pre.shape}")
    g = grad_output * (cache.pre > 0) if cache.activation == "relu" else grad_output
    ag = spmm(cache.a, g)
    grad_w = cache.h.T @ ag
    grad_in = ag @ cache.w.T if need_input_grad else None
    return GcnLayerGrad(grad_w, grad_in)


def dropout(h: np.ndarray, keep_prob: float, training: bool, rng: np.random.Generator):
    """Inverted dropout. Returns ``(output, mask)``; ``mask`` is None when inactive."""
    if not 0.0 < keep_prob <= 1.0:
        raise ValueError("keep_prob must be in (0, 1]")
    if not training:
        return h, None
    if keep_prob == 1.0:
        return h, np.ones_like(h)
    mask = (rng.random(h.shape) < keep_prob).astype(np.float64)
    return h * mask / keep_prob, mask


def dropout_backward(grad_output: np.ndarray, mask, keep_prob: float) -> np.ndarray:
    if mask is None:
        return grad_output
    return grad_output * mask / keep_prob


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray, mask):
    """Mean negative log-likelihood over the nodes in ``mask``.

    Returns ``(loss, grad_logits)``; rows outside the mask get zero gradient.
    """
    mask = np.asarray(mask, dtype=np.int64)
    if mask.size == 0:
        raise ValueError("softmax_cross_entropy needs a non-empty mask")
    y = np.asarray(labels)[mask]
    k = logits.shape[1]
    if y.min() < 0 or y.max() >= k:
        raise ValueError("label index out of range")
    sub = logits[mask]
    logp = log_softmax(sub)
    loss = -logp[np.arange(mask.size), y].mean()
    p = np.exp(logp)
    p[np.arange(mask.size), y] -= 1.0
    grad = np.zeros_like(logits)
    np.add.at(grad, mask, p / mask.size)
    return float(loss), grad


@dataclass
class AdamState:
    m: list
    v: list
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params, **kw) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], **kw)


def adam_step(params: list, grads: list, state: AdamState, lr: float):
    """Bias-corrected Adam update, applied to ``params`` in place."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeError("params, grads and Adam state disagree in length")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ShapeError(f"param {p.shape} vs grad {g.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state
