"""Forward computation of the baseline GCN and its confidence-weighted variant.

Both forwards are recorded on a fresh tape so that gradients reach every
trainable tensor, including the per-node label distributions (`mu`) and
diagonal precisions (`prec`) that feed the influence weights of the
confidence-weighted model.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .autodiff import Tape
from .errors import ContractError, ShapeError
from .graph import self_loop_pattern

KIPF = "kipf"
CONFGCN = "confgcn"


@dataclass
class ModelConfig:
    model_kind: str = CONFGCN
    num_layers: int = 2
    hidden_dim: int = 16
    dropout_rate: float = 0.5
    epsilon_dm: float = 1.0        # additive floor in 1 / (d_M + eps)
    normalize_influence: bool = False

    def __post_init__(self):
        if self.model_kind not in (KIPF, CONFGCN):
            raise ContractError(f"unknown model kind {self.model_kind!r}")
        if self.num_layers < 1:
            raise ContractError("num_layers must be >= 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ContractError("dropout_rate must be in [0, 1)")
        if self.epsilon_dm <= 0:
            raise ContractError("epsilon_dm must be positive")


@dataclass
class ConfGcnParams:
    """Trainable tensors.  `mu`/`prec` are None for the baseline model."""

    weights: list                  # one d_in x d_out matrix per layer
    biases: list                   # matching 1 x d_out row vectors
    mu: Optional[np.ndarray] = None    # n x m label distributions
    prec: Optional[np.ndarray] = None  # n x m diagonal precisions

    def tensors(self):
        """(name, array) pairs in the canonical checkpoint order."""
        out = []
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            out.append((f"W{k}", w))
            out.append((f"b{k}", b))
        if self.mu is not None:
            out.append(("mu", self.mu))
            out.append(("prec", self.prec))
        return out

    def copy(self):
        return ConfGcnParams(
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            mu=None if self.mu is None else self.mu.copy(),
            prec=None if self.prec is None else self.prec.copy(),
        )

    @classmethod
    def from_tensors(cls, named):
        named = dict(named)
        weights, biases = [], []
        k = 0
        while f"W{k}" in named:
            weights.append(named[f"W{k}"])
            biases.append(named[f"b{k}"])
            k += 1
        return cls(weights=weights, biases=biases,
                   mu=named.get("mu"), prec=named.get("prec"))


def xavier_init(rows, cols, rng):
    """Uniform in +/- sqrt(6 / (rows + cols))."""
    bound = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-bound, bound, size=(rows, cols))


def layer_dims(cfg, num_features, num_classes):
    """Per-layer (in, out) dims, including the readout for the conf model.

    Baseline: num_layers aggregating layers ending in the class dimension.
    Confidence model: num_layers aggregating layers staying in the hidden
    dimension, plus a non-aggregating readout projection to the classes.
    """
    d, h, m = num_features, cfg.hidden_dim, num_classes
    if cfg.model_kind == KIPF:
        if cfg.num_layers == 1:
            return [(d, m)]
        dims = [(d, h)] + [(h, h)] * (cfg.num_layers - 2) + [(h, m)]
        return dims
    dims = [(d, h)] + [(h, h)] * (cfg.num_layers - 1)
    dims.append((h, m))  # readout
    return dims


def init_params(cfg, dataset, rng):
    """Xavier weights and mu, zero biases, all-ones precisions."""
    dims = layer_dims(cfg, dataset.num_features, dataset.num_classes)
    weights = [xavier_init(i, o, rng) for i, o in dims]
    biases = [np.zeros((1, o)) for _, o in dims]
    if cfg.model_kind == KIPF:
        return ConfGcnParams(weights=weights, biases=biases)
    n, m = dataset.num_nodes, dataset.num_classes
    return ConfGcnParams(weights=weights, biases=biases,
                         mu=xavier_init(n, m, rng),
                         prec=np.ones((n, m)))


def mahalanobis_distance(mu_u, mu_v, prec_u, prec_v):
    """Precision-weighted squared distance between two label distributions."""
    mu_u, mu_v = np.asarray(mu_u, float), np.asarray(mu_v, float)
    prec_u, prec_v = np.asarray(prec_u, float), np.asarray(prec_v, float)
    if not mu_u.shape == mu_v.shape == prec_u.shape == prec_v.shape:
        raise ShapeError("mahalanobis operands must share one shape")
    diff = mu_u - mu_v
    return float(((prec_u + prec_v) * diff * diff).sum())


def edge_mahalanobis(tape, mu, prec, src, dst):
    """Tape-recorded d_M for ordered node pairs; returns an nnz x 1 node."""
    mu_u = tape.gather_rows(mu, src)
    mu_v = tape.gather_rows(mu, dst)
    p_u = tape.gather_rows(prec, src)
    p_v = tape.gather_rows(prec, dst)
    diff = mu_u - mu_v
    return tape.row_sum((p_u + p_v) * diff * diff)


def influence_values(tape, cfg, graph, pattern, mu, prec):
    """Influence weight r_uv = 1 / (d_M(u, v) + eps) for every stored entry
    of the self-loop-augmented pattern, as a tape node (nnz x 1).

    Optionally row-normalized over each neighborhood (off by default; the
    raw reciprocal is the literal update rule)."""
    src = pattern.indices          # u: the aggregated neighbor
    dst = pattern.row_ids()        # v: the row being updated
    d2 = edge_mahalanobis(tape, mu, prec, src, dst)
    r = tape.reciprocal(tape.add_scalar(d2, cfg.epsilon_dm))
    if cfg.normalize_influence:
        ones = tape.constant(np.ones((graph.num_nodes, 1)))
        row_sums = tape.weighted_sparse_matmul(pattern, r, ones)
        r = r * tape.reciprocal(tape.gather_rows(row_sums, dst))
    return r


def influence_scores(graph, params, epsilon=1.0, normalize=False):
    """Convenience inspection view: the influence matrix as plain numbers."""
    cfg = ModelConfig(model_kind=CONFGCN, epsilon_dm=epsilon,
                      normalize_influence=normalize)
    pattern = self_loop_pattern(graph)
    tape = Tape()
    mu = tape.leaf(params.mu)
    prec = tape.leaf(params.prec)
    r = influence_values(tape, cfg, graph, pattern, mu, prec)
    return pattern.with_data(r.value[:, 0])


def _dropout(tape, x, rate, rng):
    if rate <= 0.0 or rng is None:
        return x
    mask = (rng.random(x.value.shape) >= rate) / (1.0 - rate)
    return tape.mul_constant(x, mask)


def kipf_forward(cfg, params, a_hat, features, tape=None, training=False,
                 rng=None):
    """Baseline forward: H <- ReLU(A_hat (H W) + b) per layer, softmax out.

    The final layer skips the ReLU and feeds the row softmax directly.
    Dropout (training only) is applied to each layer's input.
    Returns (prediction node, tape, leaf node map).
    """
    if cfg.model_kind != KIPF:
        raise ContractError("kipf_forward needs a baseline config")
    tape = tape or Tape()
    leaves = {name: tape.leaf(arr) for name, arr in params.tensors()}
    h = tape.constant(features)
    drop = cfg.dropout_rate if training else 0.0
    num = len(params.weights)
    for k in range(num):
        h = _dropout(tape, h, drop, rng)
        z = tape.matmul(h, leaves[f"W{k}"])
        z = tape.sparse_matmul(a_hat, z)
        z = tape.add_row_vector(z, leaves[f"b{k}"])
        h = tape.relu(z) if k < num - 1 else z
    y_hat = tape.softmax_rows(h)
    return y_hat, tape, leaves


def confgcn_forward(cfg, params, graph, features, tape=None, training=False,
                    rng=None, pattern=None):
    """Confidence-weighted forward pass.

    Aggregation uses the influence weights in place of degree normalization;
    they are recomputed from the current mu/prec on every pass.  The last
    aggregating layer is linear, and the readout projection is applied
    per node with no further aggregation.
    Returns (prediction node, tape, leaf node map).
    """
    if cfg.model_kind != CONFGCN:
        raise ContractError("confgcn_forward needs a confgcn config")
    tape = tape or Tape()
    leaves = {name: tape.leaf(arr) for name, arr in params.tensors()}
    if pattern is None:
        pattern = self_loop_pattern(graph)
    r = influence_values(tape, cfg, graph, pattern, leaves["mu"],
                         leaves["prec"])
    h = tape.constant(features)
    drop = cfg.dropout_rate if training else 0.0
    for k in range(cfg.num_layers):
        h = _dropout(tape, h, drop, rng)
        z = tape.matmul(h, leaves[f"W{k}"])
        z = tape.add_row_vector(z, leaves[f"b{k}"])
        z = tape.weighted_sparse_matmul(pattern, r, z)
        h = tape.relu(z) if k < cfg.num_layers - 1 else z
    k_out = cfg.num_layers
    h = _dropout(tape, h, drop, rng)
    logits = tape.add_row_vector(tape.matmul(h, leaves[f"W{k_out}"]),
                                 leaves[f"b{k_out}"])
    y_hat = tape.softmax_rows(logits)
    return y_hat, tape, leaves


def forward(cfg, params, dataset, operator, tape=None, training=False,
            rng=None):
    """Dispatch on model kind.  `operator` is the normalized adjacency for
    the baseline and the raw self-loop pattern for the confidence model."""
    if cfg.model_kind == KIPF:
        return kipf_forward(cfg, params, operator, dataset.features,
                            tape=tape, training=training, rng=rng)
    return confgcn_forward(cfg, params, dataset.graph, dataset.features,
                           tape=tape, training=training, rng=rng,
                           pattern=operator)


def predict_labels(y_hat):
    """Row argmax; ties resolve to the lowest class index."""
    y_hat = np.asarray(y_hat)
    return np.argmax(y_hat, axis=1)
