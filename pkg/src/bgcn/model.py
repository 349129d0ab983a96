"""BGCN-NRWS training and Monte-Carlo prediction, plus the plain GCN baseline.

Network (``vi_layer=True``)::

    GCN conv (d -> hidden1, ReLU) -> VI linear (hidden1 -> hidden2, ReLU)
      -> dropout -> GCN conv (hidden2 -> K)

With ``vi_layer=False`` it is the two-layer GCN: conv (d -> hidden2, ReLU)
-> dropout -> conv (hidden2 -> K).
"""
from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field

import numpy as np

from . import nn
from ._container import read_container, write_container
from ._rng import derive_seed
from .graph import NormalizedAdjacency, SparseGraph, gcn_adjacency
from .sampler import NeighborhoodRandomWalkSampler
from .variational import (VariationalParams, combined_loss, vi_backward, vi_forward)

log = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"BGCK"
CHECKPOINT_VERSION = 1

# purpose codes for derive_seed
_MODEL, _XI, _GRAPH, _PREDICT = 0, 1, 2, 3


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    hidden1: int = 32
    hidden2: int = 16
    dropout_keep: float = 0.5
    lr: float = 0.01
    weight_decay: float = 5e-4
    total_epochs: int = 300
    pretrain_epochs: int = 200
    V: int = 2
    num_graphs: int = 5
    S: int = 5
    walk_steps: int = 10
    vi_layer: bool = True
    prior_var: float = 0.1
    rho_init: float = -3.0
    kl_weight: float | None = None
    mc_dropout: bool = True
    vi_predict: str = "sample"
    predict_on_sampled_graphs: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.pretrain_epochs >= self.total_epochs:
            raise ValueError("pretrain_epochs must be smaller than total_epochs")
        if min(self.V, self.num_graphs, self.S) < 1:
            raise ValueError("V, num_graphs and S must all be >= 1")
        if not 0.0 < self.dropout_keep <= 1.0:
            raise ValueError("dropout_keep must be in (0, 1]")
        if self.vi_predict not in ("sample", "mean"):
            raise ValueError("vi_predict must be 'sample' or 'mean'")

    def replace(self, **kw) -> "ModelConfig":
        return dataclasses.replace(self, **kw)

    def effective_kl_weight(self, num_nodes: int) -> float:
        # default 1/n: KL per graph node, next to a per-labelled-node NLL
        return self.kl_weight if self.kl_weight is not None else 1.0 / num_nodes


@dataclass
class ModelWeights:
    w1: np.ndarray
    w2: np.ndarray
    vi: VariationalParams | None = None

    @classmethod
    def init(cls, d: int, k: int, cfg: ModelConfig, rng: np.random.Generator) -> "ModelWeights":
        if cfg.vi_layer:
            w1 = nn.xavier_init(d, cfg.hidden1, rng)
            vi = VariationalParams.init(cfg.hidden1, cfg.hidden2, rng, cfg.rho_init, cfg.prior_var)
        else:
            w1 = nn.xavier_init(d, cfg.hidden2, rng)
            vi = None
        w2 = nn.xavier_init(cfg.hidden2, k, rng)
        return cls(w1, w2, vi)

    def params(self) -> list[np.ndarray]:
        """Trainable arrays in optimizer order."""
        return [self.w1, *(self.vi.arrays() if self.vi else []), self.w2]

    def copy(self) -> "ModelWeights":
        return ModelWeights(self.w1.copy(), self.w2.copy(), self.vi.copy() if self.vi else None)

    def zero_like(self) -> "ModelWeights":
        w = self.copy()
        for p in w.params():
            p[...] = 0.0
        return w


@dataclass
class ForwardCache:
    conv1: nn.GcnLayerCache
    vi: object
    vi_sample: object
    vi_pre: np.ndarray | None
    drop_mask: np.ndarray | None
    keep_prob: float
    conv2: nn.GcnLayerCache


def forward(weights: ModelWeights, a: NormalizedAdjacency, x: np.ndarray, training: bool,
            rng: np.random.Generator | None, keep_prob: float = 0.5, *,
            mc_dropout: bool = False, vi_mode: str = "mean"):
    """Logits for every node; returns ``(logits, cache)``.

    Dropout is active when ``training`` or ``mc_dropout``; the VI layer
    samples when ``training`` or ``vi_mode == 'sample'`` and otherwise uses
    its posterior mean.
    """
    h, c1 = nn.gcn_layer_forward(a, x, weights.w1, "relu")
    vi_cache = vi_sample = vi_pre = None
    if weights.vi is not None:
        vi_pre, vi_sample, vi_cache = vi_forward(weights.vi, h, rng, training, vi_mode)
        h = np.maximum(vi_pre, 0.0)
    h, mask = nn.dropout(h, keep_prob, training or mc_dropout, rng)
    logits, c2 = nn.gcn_layer_forward(a, h, weights.w2, "none")
    return logits, ForwardCache(c1, vi_cache, vi_sample, vi_pre, mask, keep_prob, c2)


def backward(weights: ModelWeights, cache: ForwardCache, grad_logits: np.ndarray,
             kl_weight: float, weight_decay: float = 0.0) -> list[np.ndarray]:
    """Gradients of ``nll + kl_weight*KL + weight_decay/2*|w1|^2`` in ``params()`` order."""
    g2 = nn.gcn_layer_backward(cache.conv2, grad_logits)
    g = nn.dropout_backward(g2.grad_input, cache.drop_mask, cache.keep_prob)
    vi_grads = []
    if weights.vi is not None:
        g = g * (cache.vi_pre > 0)
        vg = vi_backward(weights.vi, cache.vi, g, kl_weight)
        vi_grads = vg.arrays()
        g = vg.grad_input
    g1 = nn.gcn_layer_backward(cache.conv1, g, need_input_grad=False)
    return [g1.grad_w + weight_decay * weights.w1, *vi_grads, g2.grad_w]


def training_loss(weights: ModelWeights, cache: ForwardCache, nll: float, kl_weight: float,
                  weight_decay: float) -> float:
    kl = 0.0
    if cache.vi_sample is not None:
        kl = cache.vi_sample.log_q - cache.vi_sample.log_p
    l2 = 0.5 * weight_decay * float(np.sum(weights.w1 ** 2))
    return combined_loss(kl, nll, kl_weight) + l2


@dataclass
class Trainer:
    """Full-batch Adam on one weight set; the RNG drives init, dropout and VI noise."""

    weights: ModelWeights
    adam: nn.AdamState
    rng: np.random.Generator
    cfg: ModelConfig
    history: list[float] = field(default_factory=list)

    @classmethod
    def create(cls, d: int, k: int, cfg: ModelConfig) -> "Trainer":
        rng = np.random.default_rng(derive_seed(cfg.seed, _MODEL))
        weights = ModelWeights.init(d, k, cfg, rng)
        return cls(weights, nn.AdamState.zeros_like(weights.params()), rng, cfg)

    def run(self, a: NormalizedAdjacency, x: np.ndarray, labels: np.ndarray,
            train_idx: np.ndarray, epochs: int) -> None:
        cfg = self.cfg
        kl_w = cfg.effective_kl_weight(a.n)
        for _ in range(epochs):
            logits, cache = forward(self.weights, a, x, True, self.rng, cfg.dropout_keep)
            nll, grad = nn.softmax_cross_entropy(logits, labels, train_idx)
            loss = training_loss(self.weights, cache, nll, kl_w, cfg.weight_decay)
            if not np.isfinite(loss):
                raise TrainingError(
                    f"non-finite loss at epoch {len(self.history) + 1}: nll={nll}, "
                    f"max|logit|={np.abs(logits).max()}")
            grads = backward(self.weights, cache, grad, kl_w, cfg.weight_decay)
            nn.adam_step(self.weights.params(), grads, self.adam, cfg.lr)
            self.history.append(loss)


def predict_deterministic(weights: ModelWeights, a: NormalizedAdjacency, x: np.ndarray) -> np.ndarray:
    """Softmax of one forward pass with dropout off and the VI layer at its mean."""
    logits, _ = forward(weights, a, x, False, None, 1.0)
    return nn.softmax(logits)


@dataclass
class PretrainResult:
    trainer: Trainer
    predicted_labels: np.ndarray


def pretrain(x: np.ndarray, labels: np.ndarray, num_classes: int, train_idx: np.ndarray,
             a_obs: NormalizedAdjacency, cfg: ModelConfig) -> PretrainResult:
    tr = Trainer.create(x.shape[1], num_classes, cfg)
    tr.run(a_obs, x, labels, train_idx, cfg.pretrain_epochs)
    pred = predict_deterministic(tr.weights, a_obs, x).argmax(axis=1)
    return PretrainResult(tr, pred)


@dataclass
class Ensemble:
    """Weight snapshots, one per (xi sample, sampled graph) training segment."""

    snapshots: list[ModelWeights]
    cfg: ModelConfig
    pretrain_labels: np.ndarray | None = None
    graph_adjs: list[NormalizedAdjacency] | None = None
    history: list[float] = field(default_factory=list)


def _split_evenly(total: int, parts: int) -> list[int]:
    q, r = divmod(total, parts)
    return [q + (1 if i < r else 0) for i in range(parts)]


def train_bgcn(g_obs: SparseGraph, x: np.ndarray, labels: np.ndarray, num_classes: int,
               train_idx: np.ndarray, cfg: ModelConfig, sampler=None) -> Ensemble:
    """Pretrain on ``G_obs``, then train through ``V`` rounds of graph sampling.

    Round ``v`` draws one copy vector and ``num_graphs`` graphs from it; the
    post-pretraining epochs are split evenly over rounds, then over the
    graphs of a round, and weights carry over from segment to segment. A
    snapshot is kept at the end of each segment.
    """
    sampler = sampler or NeighborhoodRandomWalkSampler(cfg.walk_steps)
    a_obs = gcn_adjacency(g_obs)
    pre = pretrain(x, labels, num_classes, train_idx, a_obs, cfg)
    tr = pre.trainer
    log.info("pretrained %d epochs, final loss %.4f", cfg.pretrain_epochs, tr.history[-1])
    snapshots, adjs = [], []
    for v, ev in enumerate(_split_evenly(cfg.total_epochs - cfg.pretrain_epochs, cfg.V)):
        xi = sampler.sample_xi(g_obs, derive_seed(cfg.seed, _XI, v))
        for i, eg in enumerate(_split_evenly(ev, cfg.num_graphs)):
            g = sampler.sample_graph(g_obs, xi, derive_seed(cfg.seed, _GRAPH, v, i))
            a = a_obs if g is g_obs else gcn_adjacency(g)
            tr.run(a, x, labels, train_idx, eg)
            snapshots.append(tr.weights.copy())
            adjs.append(a)
    return Ensemble(snapshots, cfg, pre.predicted_labels,
                    adjs if cfg.predict_on_sampled_graphs else None, tr.history)


def train_gcn(g_obs: SparseGraph, x: np.ndarray, labels: np.ndarray, num_classes: int,
              train_idx: np.ndarray, cfg: ModelConfig) -> Ensemble:
    """Train the network on ``G_obs`` alone for ``total_epochs``."""
    a_obs = gcn_adjacency(g_obs)
    tr = Trainer.create(x.shape[1], num_classes, cfg)
    tr.run(a_obs, x, labels, train_idx, cfg.total_epochs)
    return Ensemble([tr.weights], cfg, history=tr.history)


def predict_mc(ens: Ensemble, g_obs_adj: NormalizedAdjacency, x: np.ndarray,
               S: int | None = None, seed: int | None = None) -> np.ndarray:
    """Average class probabilities over snapshots x ``S`` stochastic passes.

    Passes condition on the observed graph unless the ensemble was trained
    with ``predict_on_sampled_graphs``. Stochasticity comes from MC dropout
    and VI weight sampling as configured.
    """
    cfg = ens.cfg
    S = cfg.S if S is None else S
    rng = np.random.default_rng(derive_seed(cfg.seed if seed is None else seed, _PREDICT))
    stochastic = cfg.mc_dropout or (cfg.vi_predict == "sample" and cfg.vi_layer)
    reps = S if stochastic else 1
    total = None
    count = 0
    for idx, w in enumerate(ens.snapshots):
        a = ens.graph_adjs[idx] if ens.graph_adjs is not None else g_obs_adj
        for _ in range(reps):
            logits, _ = forward(w, a, x, False, rng, cfg.dropout_keep,
                                mc_dropout=cfg.mc_dropout, vi_mode=cfg.vi_predict)
            p = nn.softmax(logits)
            total = p if total is None else total + p
            count += 1
    return total / count


def accuracy(probs: np.ndarray, labels: np.ndarray, mask) -> float:
    """Fraction of ``mask`` whose argmax (lowest index on ties) hits the label."""
    mask = np.asarray(mask, dtype=np.int64)
    if mask.size == 0:
        raise ValueError("accuracy needs a non-empty mask")
    return float(np.mean(probs[mask].argmax(axis=1) == np.asarray(labels)[mask]))


def save_checkpoint(ens: Ensemble, path) -> None:
    arrays = {}
    for i, w in enumerate(ens.snapshots):
        arrays[f"{i}/w1"] = w.w1
        arrays[f"{i}/w2"] = w.w2
        if w.vi is not None:
            for name, arr in zip(("mu", "rho", "mu_b", "rho_b"), w.vi.arrays()):
                arrays[f"{i}/vi_{name}"] = arr
    if ens.pretrain_labels is not None:
        arrays["pretrain_labels"] = ens.pretrain_labels.astype(np.int64)
    meta = {"config": dataclasses.asdict(ens.cfg), "num_snapshots": len(ens.snapshots),
            "history": ens.history}
    write_container(path, CHECKPOINT_MAGIC, CHECKPOINT_VERSION, meta, arrays)


def load_checkpoint(path) -> Ensemble:
    meta, arrays = read_container(path, CHECKPOINT_MAGIC, CHECKPOINT_VERSION)
    cfg = ModelConfig(**meta["config"])
    snaps = []
    for i in range(meta["num_snapshots"]):
        vi = None
        if f"{i}/vi_mu" in arrays:
            vi = VariationalParams(*(arrays[f"{i}/vi_{k}"] for k in ("mu", "rho", "mu_b", "rho_b")),
                                   prior_var=cfg.prior_var)
        snaps.append(ModelWeights(arrays[f"{i}/w1"], arrays[f"{i}/w2"], vi))
    return Ensemble(snaps, cfg, arrays.get("pretrain_labels"), None, meta["history"])
