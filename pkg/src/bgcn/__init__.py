"""Bayesian graph convolutional networks with neighborhood random-walk graph sampling."""
from .data import Dataset, Split, load_dataset, make_random_split, row_normalize
from .graph import SparseGraph, build_graph, gcn_adjacency
from .kernels import BACKEND
from .model import (ModelConfig, accuracy, predict_deterministic, predict_mc, train_bgcn,
                    train_gcn)
from .sampler import NeighborhoodRandomWalkSampler, SamplerConfig, sample_graph, sample_xi

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "Dataset", "ModelConfig", "NeighborhoodRandomWalkSampler", "SamplerConfig",
    "SparseGraph", "Split", "accuracy", "build_graph", "gcn_adjacency", "load_dataset",
    "make_random_split", "predict_deterministic", "predict_mc", "row_normalize",
    "sample_graph", "sample_xi", "train_bgcn", "train_gcn",
]
