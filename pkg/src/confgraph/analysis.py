"""Evaluation harness: accuracy tables, entropy/degree-binned accuracy,
layer-depth sweeps and cumulative loss-term ablations.

Reports are deterministic given seeds, and every figure-style output is also
emitted as a plot-ready CSV (x, y, series columns).
"""

from __future__ import annotations

import csv
import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict, replace

import numpy as np

from .errors import ContractError, DegenerateInputError
from .graph import neighborhood_label_entropy, quartile_bins
from .model import ModelConfig
from .training import ALL_TERMS, TrainConfig, seed_sweep

# Cumulative elimination order: auxiliary regularizers first, core terms last.
DEFAULT_ABLATION_ORDER = ("reg", "const", "label", "smooth")


def accuracy(predictions, labels, node_ids):
    """Fraction of node_ids whose prediction matches the label."""
    node_ids = np.asarray(node_ids, dtype=np.int64)
    if node_ids.size == 0:
        raise ContractError("accuracy over an empty node set is undefined")
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    return float(np.mean(predictions[node_ids] == labels[node_ids]))


@dataclass
class BinnedAccuracyReport:
    metric: str                    # "entropy" or "degree"
    bins: list                     # per bin: node_ids, count, accuracy/model
    excluded: list                 # zero-degree nodes left out
    models: list

    def to_dict(self):
        return asdict(self)


def binned_accuracy(dataset, predictions, metric):
    """Quartile-binned test accuracy by neighborhood label entropy or degree.

    `predictions` maps model name to a full-length prediction array (a bare
    array is treated as a single unnamed model).  Entropy is computed from
    the TRUE labels of each test node's neighbors; zero-degree test nodes
    are excluded and reported.
    """
    if metric not in ("entropy", "degree"):
        raise ContractError(f"unknown binning metric {metric!r}")
    if not isinstance(predictions, dict):
        predictions = {"model": predictions}
    test_ids = [int(v) for v in dataset.split["test"]]
    eligible, values, excluded = [], [], []
    for v in test_ids:
        if dataset.graph.degree(v) == 0:
            excluded.append(v)
            continue
        if metric == "degree":
            values.append(float(dataset.graph.degree(v)))
        else:
            try:
                values.append(neighborhood_label_entropy(
                    dataset.graph, v, dataset.labels))
            except DegenerateInputError:
                excluded.append(v)
                continue
        eligible.append(v)
    bins = quartile_bins(np.array(values), np.array(eligible))
    out_bins = []
    for ids in bins:
        accs = {name: accuracy(pred, dataset.labels, ids)
                for name, pred in predictions.items()}
        out_bins.append({"node_ids": ids, "count": len(ids),
                         "accuracy": accs})
    return BinnedAccuracyReport(metric=metric, bins=out_bins,
                                excluded=excluded,
                                models=sorted(predictions))


@dataclass
class Cell:
    """One experiment cell: a (model, variant) trained over several seeds."""

    experiment: str
    model: str
    dataset: str
    variant: str
    seeds: list
    mean: float
    std: float
    accuracies: list = field(default_factory=list)
    incomplete: bool = False


def _sweep_cell(job):
    dataset, model_cfg, obj_weights, train_cfg, n_seeds, terms = job
    return seed_sweep(dataset, model_cfg, obj_weights, train_cfg,
                      n_runs=n_seeds, terms=terms)


def _run_cells(jobs, jobs_n):
    if jobs_n <= 1:
        return [_sweep_cell(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=jobs_n) as pool:
        return list(pool.map(_sweep_cell, jobs))


def layer_sweep(dataset, model_kinds, layer_counts, base_model_cfg=None,
                obj_weights=None, train_cfg=None, n_seeds=3, jobs=1):
    """Mean test accuracy per (model kind, depth) over `n_seeds` seeds.

    Divergent runs are recorded in the cell (incomplete flag), never
    silently dropped.  `jobs` > 1 spreads cells over worker processes.
    """
    base_model_cfg = base_model_cfg or ModelConfig()
    train_cfg = train_cfg or TrainConfig()
    specs = [(kind, k) for kind in model_kinds for k in layer_counts]
    work = []
    for kind, k in specs:
        cfg = replace(base_model_cfg, model_kind=kind, num_layers=k)
        work.append((dataset, cfg, obj_weights, train_cfg, n_seeds,
                     ALL_TERMS))
    results = _run_cells(work, jobs)
    cells = []
    for (kind, k), res in zip(specs, results):
        cells.append(Cell(experiment="layers", model=kind,
                          dataset=dataset.name, variant=f"K={k}",
                          seeds=res.seeds, mean=res.mean, std=res.std,
                          accuracies=res.accuracies,
                          incomplete=res.incomplete))
    return cells


def ablation_variants(order=DEFAULT_ABLATION_ORDER):
    """Cumulative variants: full objective, then dropping one more term each
    step until only cross-entropy remains."""
    variants = [("full", tuple(ALL_TERMS))]
    removed = []
    for term in order:
        removed.append(term)
        name = "-" + "-".join(removed)
        kept = tuple(t for t in ALL_TERMS if t not in removed)
        variants.append((name, kept))
    return variants


def ablation_suite(dataset, model_cfg=None, obj_weights=None, train_cfg=None,
                   n_seeds=3, order=DEFAULT_ABLATION_ORDER, jobs=1):
    """Mean test accuracy for each cumulative-ablation variant.

    The elimination order is configurable and recorded in each cell name."""
    model_cfg = model_cfg or ModelConfig()
    if model_cfg.model_kind != "confgcn":
        raise ContractError("ablation applies to the confidence model")
    variants = ablation_variants(order)
    work = [(dataset, model_cfg, obj_weights, train_cfg, n_seeds, terms)
            for _name, terms in variants]
    results = _run_cells(work, jobs)
    cells = []
    for (name, _terms), res in zip(variants, results):
        cells.append(Cell(experiment="ablation", model=model_cfg.model_kind,
                          dataset=dataset.name, variant=name,
                          seeds=res.seeds, mean=res.mean, std=res.std,
                          accuracies=res.accuracies,
                          incomplete=res.incomplete))
    return cells


def hyperparameter_search(dataset, model_cfg, train_cfg=None,
                          lambda_grid=(0.5, 1.0, 2.0), gamma_grid=(0.5, 1.0, 2.0),
                          search_seeds=1):
    """Pick objective weights by validation accuracy, the way the headline
    numbers are tuned: grid over the term weights and the seed-label
    uncertainty, best mean validation accuracy wins.

    A shared weight is used for the two distribution-anchoring terms and the
    two regularizing terms to keep the grid tractable; returns
    (ObjectiveWeights, best validation accuracy)."""
    from .objective import ObjectiveWeights
    from .training import train as _train
    train_cfg = train_cfg or TrainConfig()
    best, best_val = None, -1.0
    for lam_a, lam_b, gamma in itertools.product(lambda_grid, lambda_grid,
                                                 gamma_grid):
        weights = ObjectiveWeights(lambda1=lam_a, lambda2=lam_a,
                                   lambda3=lam_b, lambda4=lam_b, gamma=gamma)
        vals = []
        for s in range(search_seeds):
            cfg_s = replace(train_cfg, seed=train_cfg.seed + s)
            _, report = _train(dataset, model_cfg, weights, cfg_s)
            if report.completed:
                vals.append(report.best_val_accuracy)
        if vals and np.mean(vals) > best_val:
            best_val = float(np.mean(vals))
            best = weights
    return best, best_val


def write_cells_report(cells, path):
    """One record per cell as structured text (key=value fields)."""
    with open(path, "w") as fh:
        for c in cells:
            fields = [f"experiment={c.experiment}", f"model={c.model}",
                      f"dataset={c.dataset}", f"variant={c.variant}",
                      f"seeds={','.join(str(s) for s in c.seeds)}",
                      f"mean={c.mean:.6f}", f"std={c.std:.6f}",
                      f"incomplete={str(c.incomplete).lower()}"]
            fh.write(" ".join(fields) + "\n")


def write_cells_csv(cells, path, x_from="variant"):
    """Plot-ready CSV with x, y, series columns."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "series"])
        for c in cells:
            writer.writerow([c.variant, f"{c.mean:.6f}", c.model])


def write_binned_csv(report, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "series"])
        for i, b in enumerate(report.bins, 1):
            for model in report.models:
                writer.writerow([f"bin{i}", f"{b['accuracy'][model]:.6f}",
                                 model])
