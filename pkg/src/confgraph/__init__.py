"""Confidence-weighted graph convolution for semi-supervised node
classification, with a degree-normalized GCN baseline, a from-scratch
reverse-mode autodiff engine, a training CLI and an analysis harness."""

from .autodiff import Tape, Node, gradient_check
from .estimators import ConfGCNClassifier, KipfGCNClassifier
from .graph import (Dataset, Graph, load_dataset, save_dataset,
                    neighborhood_label_entropy, normalized_adjacency,
                    quartile_bins)
from .model import (ConfGcnParams, ModelConfig, confgcn_forward, kipf_forward,
                    mahalanobis_distance, predict_labels, xavier_init)
from .objective import ObjectiveWeights
from .sparse import SparseMatrix
from .training import (RunReport, TrainConfig, load_checkpoint,
                       save_checkpoint, seed_sweep, train)

__version__ = "0.1.0"

__all__ = [
    "ConfGCNClassifier", "ConfGcnParams", "Dataset", "Graph",
    "KipfGCNClassifier", "ModelConfig", "Node", "ObjectiveWeights",
    "RunReport", "SparseMatrix", "Tape", "TrainConfig", "confgcn_forward",
    "gradient_check", "kipf_forward", "load_checkpoint", "load_dataset",
    "mahalanobis_distance", "neighborhood_label_entropy",
    "normalized_adjacency", "predict_labels", "quartile_bins",
    "save_checkpoint", "save_dataset", "seed_sweep", "train", "xavier_init",
]
