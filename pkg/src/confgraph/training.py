"""Full-batch Adam training loop with early stopping and checkpointing."""

from __future__ import annotations

import json
import struct
import time
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np

from .errors import ContractError, NumericError, ValidationError
from .graph import normalized_adjacency, self_loop_pattern
from .model import (CONFGCN, KIPF, ConfGcnParams, ModelConfig, forward,
                    init_params, predict_labels)
from .objective import (ObjectiveWeights, l_const, l_cross, l_label, l_reg,
                        l_smooth, total_objective)

ALL_TERMS = ("smooth", "label", "const", "reg")


@dataclass
class TrainConfig:
    learning_rate: float = 0.01
    max_epochs: int = 300
    early_stop_patience: int = 30
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    weight_decay: float = 5e-4     # applied to the first-layer weights only
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ContractError("learning_rate must be positive")
        if self.early_stop_patience > self.max_epochs and self.max_epochs > 0:
            raise ContractError("patience must not exceed max_epochs")


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


@dataclass
class RunReport:
    seed: int
    model_kind: str
    config: dict
    history: list = field(default_factory=list)  # per-epoch loss/val records
    test_accuracy: Optional[float] = None
    best_epoch: int = -1
    best_val_accuracy: float = -1.0
    wall_clock: float = 0.0
    completed: bool = False
    error: str = ""

    def to_dict(self):
        return asdict(self)

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")


def adam_step(params, grads, state, t, cfg):
    """Bias-corrected Adam update, applied in place to every tensor.

    `t` is 1-based.  Raises on non-finite gradients so the caller can report
    the failing epoch.
    """
    for name, p in params.items():
        g = grads[name]
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for {name}")
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        state.m[name] = cfg.beta1 * state.m[name] + (1 - cfg.beta1) * g
        state.v[name] = cfg.beta2 * state.v[name] + (1 - cfg.beta2) * g * g
        m_hat = state.m[name] / (1 - cfg.beta1 ** t)
        v_hat = state.v[name] / (1 - cfg.beta2 ** t)
        p -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)


def build_loss(model_cfg, params, dataset, operator, weights, terms=ALL_TERMS,
               training=False, rng=None):
    """One forward pass plus the (possibly ablated) objective.

    Returns (tape, total loss node, component value dict, leaf node map,
    prediction node).  The baseline model only has the cross-entropy term.
    """
    y_onehot = dataset.onehot_labels()
    train_ids = dataset.split["train"]
    y_hat, tape, leaves = forward(model_cfg, params, dataset, operator,
                                  training=training, rng=rng)
    components = {"cross": l_cross(tape, y_hat, y_onehot, train_ids)}
    if model_cfg.model_kind == CONFGCN:
        mu, prec = leaves["mu"], leaves["prec"]
        if "smooth" in terms:
            components["smooth"] = l_smooth(tape, mu, prec,
                                            dataset.graph.edges)
        if "label" in terms:
            components["label"] = l_label(tape, mu, prec, y_onehot, train_ids,
                                          weights.gamma)
        if "const" in terms:
            components["const"] = l_const(tape, mu, y_hat)
        if "reg" in terms:
            components["reg"] = l_reg(tape, prec)
    total = total_objective(components, weights)
    values = {name: node.scalar() for name, node in components.items()}
    return tape, total, values, leaves, y_hat


def _accuracy_on(y_hat, dataset, ids):
    preds = predict_labels(y_hat)
    ids = np.asarray(ids, dtype=np.int64)
    return float(np.mean(preds[ids] == dataset.labels[ids]))


def build_operator(model_cfg, dataset):
    if model_cfg.model_kind == KIPF:
        return normalized_adjacency(dataset.graph)
    return self_loop_pattern(dataset.graph)


def train(dataset, model_cfg, obj_weights=None, train_cfg=None,
          terms=ALL_TERMS, init=None):
    """Train one model; returns (best-validation params, RunReport).

    Full-batch gradient descent over the combined objective, tracking the
    best validation accuracy; test accuracy is computed exactly once on the
    checkpoint of the best epoch.  On numeric divergence the report carries
    the history up to the failure.
    """
    obj_weights = obj_weights or ObjectiveWeights()
    train_cfg = train_cfg or TrainConfig()
    rng = np.random.default_rng(train_cfg.seed)
    params = init.copy() if init is not None else init_params(model_cfg,
                                                              dataset, rng)
    operator = build_operator(model_cfg, dataset)
    report = RunReport(seed=train_cfg.seed, model_kind=model_cfg.model_kind,
                       config={"model": asdict(model_cfg),
                               "objective": asdict(obj_weights),
                               "train": asdict(train_cfg),
                               "terms": list(terms)})
    start = time.perf_counter()
    state = AdamState()
    tensors = dict(params.tensors())
    best = params.copy()
    best_val, best_epoch, since_best = -1.0, -1, 0

    for epoch in range(train_cfg.max_epochs):
        try:
            tape, total, values, leaves, _ = build_loss(
                model_cfg, params, dataset, operator, obj_weights,
                terms=terms, training=True, rng=rng)
            grads_by_id = tape.backward(total)
            grads = {name: grads_by_id.get(node.id, np.zeros_like(tensors[name]))
                     for name, node in leaves.items()}
            if train_cfg.weight_decay and "W0" in grads:
                grads["W0"] = grads["W0"] + train_cfg.weight_decay * tensors["W0"]
            adam_step(tensors, grads, state, epoch + 1, train_cfg)
        except NumericError as exc:
            report.error = f"epoch {epoch}: {exc}"
            report.wall_clock = time.perf_counter() - start
            return best, report

        _, _, _, _, y_hat_eval = build_loss(model_cfg, params, dataset,
                                            operator, obj_weights,
                                            terms=terms, training=False)
        val_acc = _accuracy_on(y_hat_eval.value, dataset, dataset.split["val"])
        weighted = values["cross"] + sum(
            lam * values.get(nm, 0.0)
            for nm, lam in (("smooth", obj_weights.lambda1),
                            ("label", obj_weights.lambda2),
                            ("const", obj_weights.lambda3),
                            ("reg", obj_weights.lambda4)))
        report.history.append({"epoch": epoch, "total": total.scalar(),
                               "weighted_sum": weighted,
                               "components": values,
                               "val_accuracy": val_acc})
        if val_acc > best_val:
            best_val, best_epoch, since_best = val_acc, epoch, 0
            best = params.copy()
        else:
            since_best += 1
            if since_best > train_cfg.early_stop_patience:
                break

    _, _, _, _, y_hat_best = build_loss(model_cfg, best, dataset, operator,
                                        obj_weights, terms=terms,
                                        training=False)
    report.test_accuracy = _accuracy_on(y_hat_best.value, dataset,
                                        dataset.split["test"])
    report.best_epoch = best_epoch
    report.best_val_accuracy = best_val
    report.completed = True
    report.wall_clock = time.perf_counter() - start
    return best, report


@dataclass
class SweepResult:
    seeds: list
    accuracies: list
    mean: float
    std: float
    incomplete: bool = False
    reports: list = field(default_factory=list)


def seed_sweep(dataset, model_cfg, obj_weights=None, train_cfg=None,
               n_runs=10, terms=ALL_TERMS, keep_reports=False):
    """Repeat training over consecutive seeds; mean +/- sample std of test
    accuracy.  Partial results are flagged, not dropped."""
    if n_runs < 2:
        raise ContractError("seed_sweep needs at least 2 runs")
    train_cfg = train_cfg or TrainConfig()
    base = train_cfg.seed
    seeds, accs, reports, incomplete = [], [], [], False
    for i in range(n_runs):
        cfg_i = TrainConfig(**{**asdict(train_cfg), "seed": base + i})
        _, report = train(dataset, model_cfg, obj_weights, cfg_i, terms=terms)
        seeds.append(base + i)
        if report.completed:
            accs.append(report.test_accuracy)
        else:
            incomplete = True
        if keep_reports:
            reports.append(report)
    mean = float(np.mean(accs)) if accs else float("nan")
    std = float(np.std(accs, ddof=1)) if len(accs) > 1 else 0.0
    return SweepResult(seeds=seeds, accuracies=accs, mean=mean, std=std,
                       incomplete=incomplete, reports=reports)


# ----------------------------------------------------------------------
# checkpoint format: magic CFGC, version u16, model kind u8, layers u16,
# hidden u32, epsilon f64, tensor count u32, then per tensor u32 rows,
# u32 cols and row-major little-endian f64 data, in canonical order.

_MAGIC = b"CFGC"
_VERSION = 1
_KIND_CODES = {KIPF: 0, CONFGCN: 1}
_KIND_NAMES = {v: k for k, v in _KIND_CODES.items()}


def save_checkpoint(path, model_cfg, params):
    tensors = params.tensors()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<HBHId", _VERSION, _KIND_CODES[model_cfg.model_kind],
                             model_cfg.num_layers, model_cfg.hidden_dim,
                             model_cfg.epsilon_dm))
        fh.write(struct.pack("<I", len(tensors)))
        for _name, arr in tensors:
            arr = np.ascontiguousarray(arr, dtype=np.float64)
            fh.write(struct.pack("<II", arr.shape[0], arr.shape[1]))
            fh.write(arr.astype("<f8").tobytes())


def load_checkpoint(path):
    """Returns (ModelConfig, ConfGcnParams)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != _MAGIC:
        raise ValidationError("not a checkpoint file (bad magic)")
    off = 4
    version, kind_code, layers, hidden, epsilon = struct.unpack_from(
        "<HBHId", blob, off)
    off += struct.calcsize("<HBHId")
    if version != _VERSION:
        raise ValidationError(f"unsupported checkpoint version {version}")
    if kind_code not in _KIND_NAMES:
        raise ValidationError(f"unknown model kind code {kind_code}")
    (count,) = struct.unpack_from("<I", blob, off)
    off += 4
    cfg = ModelConfig(model_kind=_KIND_NAMES[kind_code], num_layers=layers,
                      hidden_dim=hidden, epsilon_dm=epsilon)
    arrays = []
    for _ in range(count):
        if off + 8 > len(blob):
            raise ValidationError("truncated checkpoint")
        rows, cols = struct.unpack_from("<II", blob, off)
        off += 8
        nbytes = rows * cols * 8
        if off + nbytes > len(blob):
            raise ValidationError("truncated checkpoint")
        arr = np.frombuffer(blob, dtype="<f8", count=rows * cols,
                            offset=off).reshape(rows, cols).copy()
        off += nbytes
        arrays.append(arr)
    if off != len(blob):
        raise ValidationError("trailing bytes after checkpoint payload")
    named = []
    layer_count = (len(arrays) - 2) // 2 if cfg.model_kind == CONFGCN \
        else len(arrays) // 2
    idx = 0
    for k in range(layer_count):
        named.append((f"W{k}", arrays[idx]))
        named.append((f"b{k}", arrays[idx + 1]))
        idx += 2
    if cfg.model_kind == CONFGCN:
        named.append(("mu", arrays[idx]))
        named.append(("prec", arrays[idx + 1]))
    return cfg, ConfGcnParams.from_tensors(named)
