"""Bayes-by-Backprop linear layer.

Each weight and bias has a Gaussian posterior ``N(mu, softplus(rho)^2)``
and a zero-mean Gaussian prior with variance ``prior_var``. A forward pass
draws ``w = mu + softplus(rho) * eps`` and records ``log q(w)`` and
``log p(w)``; with ``eps`` fixed the whole layer is a smooth function of
``(mu, rho)`` and :func:`vi_backward` gives its exact gradient.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .nn import ShapeError, xavier_init

DEFAULT_PRIOR_VAR = 0.1
DEFAULT_RHO_INIT = -3.0
_LOG_2PI = np.log(2.0 * np.pi)
_TINY = np.finfo(np.float64).tiny


def softplus(rho):
    return np.maximum(np.logaddexp(0.0, rho), _TINY)


def log_softplus(rho):
    # log(log1p(e^rho)) -> rho as rho -> -inf
    rho = np.asarray(rho, dtype=np.float64)
    return np.where(rho < -30.0, rho, np.log(softplus(np.maximum(rho, -30.0))))


def gaussian_logpdf(x, mean, var):
    return -0.5 * (_LOG_2PI + np.log(var)) - (x - mean) ** 2 / (2.0 * var)


@dataclass
class VariationalParams:
    mu: np.ndarray
    rho: np.ndarray
    mu_b: np.ndarray
    rho_b: np.ndarray
    prior_var: float = DEFAULT_PRIOR_VAR

    def __post_init__(self):
        if self.mu.shape != self.rho.shape or self.mu_b.shape != self.rho_b.shape:
            raise ShapeError("mu and rho must have identical shapes")
        if self.mu_b.shape != (self.mu.shape[1],):
            raise ShapeError("bias length must equal the weight column count")
        if not self.prior_var > 0:
            raise ValueError("prior_var must be positive")

    @classmethod
    def init(cls, rows: int, cols: int, rng: np.random.Generator,
             rho_init: float = DEFAULT_RHO_INIT,
             prior_var: float = DEFAULT_PRIOR_VAR) -> "VariationalParams":
        return cls(xavier_init(rows, cols, rng), np.full((rows, cols), float(rho_init)),
                   np.zeros(cols), np.full(cols, float(rho_init)), prior_var)

    @property
    def shape(self):
        return self.mu.shape

    def arrays(self) -> list[np.ndarray]:
        return [self.mu, self.rho, self.mu_b, self.rho_b]

    def copy(self) -> "VariationalParams":
        return VariationalParams(*(a.copy() for a in self.arrays()), self.prior_var)


@dataclass
class VariationalSample:
    weights: np.ndarray
    bias: np.ndarray
    eps: np.ndarray
    eps_b: np.ndarray
    log_q: float
    log_p: float


def sample_from_noise(vp: VariationalParams, eps: np.ndarray, eps_b: np.ndarray) -> VariationalSample:
    """Reparameterized sample for given standard-normal noise."""
    sig, sig_b = softplus(vp.rho), softplus(vp.rho_b)
    w = vp.mu + sig * eps
    b = vp.mu_b + sig_b * eps_b
    # (w - mu) / sigma is eps by construction; use it directly so tiny sigma stays finite
    log_q = (np.sum(-0.5 * _LOG_2PI - log_softplus(vp.rho) - 0.5 * eps ** 2)
             + np.sum(-0.5 * _LOG_2PI - log_softplus(vp.rho_b) - 0.5 * eps_b ** 2))
    log_p = (np.sum(gaussian_logpdf(w, 0.0, vp.prior_var))
             + np.sum(gaussian_logpdf(b, 0.0, vp.prior_var)))
    return VariationalSample(w, b, eps, eps_b, float(log_q), float(log_p))


def sample_weights(vp: VariationalParams, rng: np.random.Generator) -> VariationalSample:
    eps = rng.standard_normal(vp.mu.shape)
    eps_b = rng.standard_normal(vp.mu_b.shape)
    return sample_from_noise(vp, eps, eps_b)


def mean_sample(vp: VariationalParams) -> VariationalSample:
    """The posterior mean as a zero-noise sample (frozen mode)."""
    return sample_from_noise(vp, np.zeros_like(vp.mu), np.zeros_like(vp.mu_b))


@dataclass
class ViCache:
    x: np.ndarray
    sample: VariationalSample


def vi_forward(vp: VariationalParams, x: np.ndarray, rng: np.random.Generator | None,
               training: bool = True, mode: str = "sample"):
    """Linear map ``x @ W + b`` with ``W, b`` from the posterior.

    In training a fresh sample is always drawn. Outside training ``mode``
    picks ``"sample"`` (draw) or ``"mean"`` (``W = mu``). Returns
    ``(output, sample, cache)``.
    """
    if x.shape[1] != vp.mu.shape[0]:
        raise ShapeError(f"vi layer expects {vp.mu.shape[0]} input columns, got {x.shape[1]}")
    if training or mode == "sample":
        s = sample_weights(vp, rng)
    elif mode == "mean":
        s = mean_sample(vp)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    out = x @ s.weights + s.bias
    return out, s, ViCache(x, s)


def kl_loss_mc(samples: list[VariationalSample]) -> float:
    """Mean of ``log q - log p`` over the samples."""
    if not samples:
        raise ValueError("kl_loss_mc needs at least one sample")
    return float(np.mean([s.log_q - s.log_p for s in samples]))


def kl_closed_form(vp: VariationalParams) -> float:
    """KL(q || p) for the diagonal Gaussians, summed over weights and biases."""
    total = 0.0
    for mu, rho in ((vp.mu, vp.rho), (vp.mu_b, vp.rho_b)):
        var = softplus(rho) ** 2
        total += np.sum(0.5 * np.log(vp.prior_var) - log_softplus(rho)
                        + (var + mu ** 2) / (2.0 * vp.prior_var) - 0.5)
    return float(total)


def combined_loss(kl: float, nll: float, kl_weight: float) -> float:
    return kl_weight * kl + nll


@dataclass
class VariationalGrad:
    mu: np.ndarray
    rho: np.ndarray
    mu_b: np.ndarray
    rho_b: np.ndarray
    grad_input: np.ndarray | None

    def arrays(self) -> list[np.ndarray]:
        return [self.mu, self.rho, self.mu_b, self.rho_b]


def vi_backward(vp: VariationalParams, cache: ViCache, grad_output: np.ndarray,
                kl_weight: float, need_input_grad: bool = True) -> VariationalGrad:
    """Reparameterization gradients of ``kl_weight * (log q - log p) + L``.

    ``L`` is whatever loss produced ``grad_output``. With ``w = mu + s*eps``
    and ``s = softplus(rho)``, holding ``eps`` fixed::

        d(log q)/d mu = 0              d(log q)/d rho = -s'/s
        d(log p)/d mu = -w/prior_var   d(log p)/d rho = -w*eps*s'/prior_var
    """
    s = cache.sample
    x = cache.x
    if grad_output.shape != (x.shape[0], vp.mu.shape[1]):
        raise ShapeError(f"grad_output shape {grad_output.shape} does not match layer output")
    g_w = x.T @ grad_output
    g_b = grad_output.sum(axis=0)
    grads = []
    for gl, w, eps, rho in ((g_w, s.weights, s.eps, vp.rho), (g_b, s.bias, s.eps_b, vp.rho_b)):
        dsig = expit(rho)
        sig = softplus(rho)
        d_mu = gl + kl_weight * w / vp.prior_var
        d_rho = gl * eps * dsig + kl_weight * (-dsig / sig + w * eps * dsig / vp.prior_var)
        grads.extend([d_mu, d_rho])
    grad_in = grad_output @ s.weights.T if need_input_grad else None
    return VariationalGrad(grads[0], grads[1], grads[2], grads[3], grad_in)
