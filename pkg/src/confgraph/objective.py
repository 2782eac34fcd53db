"""The five training-loss terms and their weighted combination.

Each term is a tape-recorded scalar so that gradients flow to every tensor
it touches; losses are raw sums (no per-node averaging), with the combination
weights absorbing scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError

LOG_FLOOR = 1e-15


@dataclass
class ObjectiveWeights:
    """Weights of the four auxiliary terms plus the seed-label uncertainty."""

    lambda1: float = 1.0   # smoothness over edges
    lambda2: float = 1.0   # labeled-node anchoring
    lambda3: float = 1.0   # consistency with model predictions
    lambda4: float = 1.0   # soft positivity of the confidence parameters
    gamma: float = 1.0     # fixed uncertainty assigned to seed labels

    def __post_init__(self):
        if self.gamma <= 0:
            raise ContractError("gamma must be positive")
        for name in ("lambda1", "lambda2", "lambda3", "lambda4"):
            if getattr(self, name) < 0:
                raise ContractError(f"{name} must be non-negative")


def l_cross(tape, y_hat, y_onehot, train_ids):
    """Cross-entropy over the labeled training nodes."""
    train_ids = np.asarray(train_ids, dtype=np.int64)
    if train_ids.size == 0:
        raise ContractError("cross-entropy needs a non-empty training set")
    picked = tape.gather_rows(y_hat, train_ids)
    target = tape.constant(np.asarray(y_onehot)[train_ids])
    logs = tape.log(picked, floor=LOG_FLOOR)
    return tape.scale(tape.total_sum(target * logs), -1.0)


def l_smooth(tape, mu, prec, edges):
    """Precision-weighted squared difference summed over each edge once."""
    if len(edges) == 0:
        return tape.constant(0.0)
    edges = np.asarray(edges, dtype=np.int64)
    mu_u = tape.gather_rows(mu, edges[:, 0])
    mu_v = tape.gather_rows(mu, edges[:, 1])
    p_u = tape.gather_rows(prec, edges[:, 0])
    p_v = tape.gather_rows(prec, edges[:, 1])
    diff = mu_u - mu_v
    return tape.total_sum((p_u + p_v) * diff * diff)


def l_label(tape, mu, prec, y_onehot, labeled_ids, gamma):
    """Anchor labeled nodes' distributions to their seed labels."""
    if gamma <= 0:
        raise ContractError("gamma must be positive")
    labeled_ids = np.asarray(labeled_ids, dtype=np.int64)
    if labeled_ids.size == 0:
        return tape.constant(0.0)
    mu_v = tape.gather_rows(mu, labeled_ids)
    p_v = tape.gather_rows(prec, labeled_ids)
    target = tape.constant(np.asarray(y_onehot)[labeled_ids])
    diff = mu_v - target
    weight = tape.add_scalar(p_v, 1.0 / gamma)
    return tape.total_sum(weight * diff * diff)


def l_reg(tape, prec):
    """Soft positivity penalty on the trained precision entries."""
    return tape.total_sum(tape.relu(tape.scale(prec, -1.0)))


def l_const(tape, mu, y_hat):
    """Squared distance between label distributions and model predictions."""
    diff = mu - y_hat
    return tape.total_sum(diff * diff)


def total_objective(components, weights):
    """cross + l1*smooth + l2*label + l3*const + l4*reg, as a tape node.

    `components` maps term names to scalar nodes; absent terms contribute
    nothing (used by the ablation variants).
    """
    total = components["cross"]
    for name, lam in (("smooth", weights.lambda1), ("label", weights.lambda2),
                      ("const", weights.lambda3), ("reg", weights.lambda4)):
        if name in components and lam != 0.0:
            total = total + components[name] * lam
    return total
