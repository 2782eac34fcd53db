"""Command-line entry point: train / eval / analyze / gradcheck.

Defaults can be supplied in an INI config file (sections [experiment],
[model], [objective], [train]); command-line flags override file values.
Every failure exits non-zero with a single `error: ...` line.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys

import numpy as np

from . import analysis
from .autodiff import Tape, gradient_check
from .errors import ContractError
from .graph import load_dataset
from .model import CONFGCN, KIPF, ModelConfig, init_params, predict_labels
from .objective import ObjectiveWeights
from .synthetic import make_citation_dataset
from .training import (TrainConfig, build_loss, build_operator,
                       load_checkpoint, save_checkpoint, seed_sweep, train)

# documented defaults for every tunable (config file and flags both optional)
DEFAULTS = {
    "model": "confgcn", "layers": 2, "hidden": 16, "dropout": 0.5,
    "epsilon": 1.0, "normalize_influence": False,
    "lambda1": 1.0, "lambda2": 1.0, "lambda3": 1.0, "lambda4": 1.0,
    "gamma": 1.0,
    "lr": 0.01, "epochs": 300, "patience": 30, "weight_decay": 5e-4,
    "seed": 0, "runs": 3, "jobs": 1,
}

_CONFIG_SECTIONS = {
    "model": ("model", "layers", "hidden", "dropout", "epsilon",
              "normalize_influence"),
    "objective": ("lambda1", "lambda2", "lambda3", "lambda4", "gamma"),
    "train": ("lr", "epochs", "patience", "weight_decay", "seed"),
    "experiment": ("dataset", "out", "runs", "jobs", "kind", "metric"),
}


def _load_config_file(path):
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise IOError(f"cannot read config file {path}")
    values = {}
    for section, keys in _CONFIG_SECTIONS.items():
        if not parser.has_section(section):
            continue
        for key in keys:
            if parser.has_option(section, key):
                values[key] = parser.get(section, key)
    return values


def _coerce(key, value):
    if value is None:
        return None
    default = DEFAULTS.get(key)
    if isinstance(default, bool):
        return str(value).lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float):
        return float(value)
    return value


def _setting(args, file_cfg, key):
    cli_val = getattr(args, key, None)
    if cli_val is not None:
        return cli_val
    if key in file_cfg:
        return _coerce(key, file_cfg[key])
    return DEFAULTS.get(key)


def _resolve_dataset_dir(path):
    if path is None:
        raise ContractError("--dataset is required")
    if os.path.isdir(path):
        return path
    root = os.environ.get("CONFGRAPH_DATA")
    if root:
        candidate = os.path.join(root, path)
        if os.path.isdir(candidate):
            return candidate
    raise IOError(f"dataset directory not found: {path}")


def _configs_from(args, file_cfg):
    model_cfg = ModelConfig(
        model_kind=_setting(args, file_cfg, "model"),
        num_layers=_setting(args, file_cfg, "layers"),
        hidden_dim=_setting(args, file_cfg, "hidden"),
        dropout_rate=_setting(args, file_cfg, "dropout"),
        epsilon_dm=_setting(args, file_cfg, "epsilon"),
        normalize_influence=_setting(args, file_cfg, "normalize_influence"))
    obj = ObjectiveWeights(
        lambda1=_setting(args, file_cfg, "lambda1"),
        lambda2=_setting(args, file_cfg, "lambda2"),
        lambda3=_setting(args, file_cfg, "lambda3"),
        lambda4=_setting(args, file_cfg, "lambda4"),
        gamma=_setting(args, file_cfg, "gamma"))
    train_cfg = TrainConfig(
        learning_rate=_setting(args, file_cfg, "lr"),
        max_epochs=_setting(args, file_cfg, "epochs"),
        early_stop_patience=_setting(args, file_cfg, "patience"),
        weight_decay=_setting(args, file_cfg, "weight_decay"),
        seed=_setting(args, file_cfg, "seed"))
    return model_cfg, obj, train_cfg


def _prepare_out(args, file_cfg, filenames):
    out = _setting(args, file_cfg, "out") or "out"
    os.makedirs(out, exist_ok=True)
    if not getattr(args, "overwrite", False):
        for name in filenames:
            path = os.path.join(out, name)
            if os.path.exists(path):
                raise IOError(
                    f"output file exists (use --overwrite): {path}")
    return out


def cmd_train(args, file_cfg):
    dataset = load_dataset(_resolve_dataset_dir(
        _setting(args, file_cfg, "dataset")))
    model_cfg, obj, train_cfg = _configs_from(args, file_cfg)
    out = _prepare_out(args, file_cfg, ["report.json", "model.ckpt"])
    params, report = train(dataset, model_cfg, obj, train_cfg)
    report.save(os.path.join(out, "report.json"))
    save_checkpoint(os.path.join(out, "model.ckpt"), model_cfg, params)
    if not report.completed:
        raise ContractError(f"training aborted: {report.error}")
    print(f"test_accuracy={report.test_accuracy}")
    return 0


def cmd_eval(args, file_cfg):
    dataset = load_dataset(_resolve_dataset_dir(
        _setting(args, file_cfg, "dataset")))
    model_cfg, params = load_checkpoint(args.checkpoint)
    # shape validation against the dataset before running the forward pass
    d, m = dataset.num_features, dataset.num_classes
    if params.weights[0].shape[0] != d:
        raise ContractError(
            f"checkpoint tensor W0 expects {params.weights[0].shape[0]} "
            f"features, dataset has {d}")
    if params.weights[-1].shape[1] != m:
        raise ContractError(
            f"checkpoint output tensor expects {params.weights[-1].shape[1]} "
            f"classes, dataset has {m}")
    if params.mu is not None and params.mu.shape != (dataset.num_nodes, m):
        raise ContractError(
            f"checkpoint tensor mu has shape {params.mu.shape}, dataset "
            f"needs {(dataset.num_nodes, m)}")
    operator = build_operator(model_cfg, dataset)
    _, _, _, _, y_hat = build_loss(model_cfg, params, dataset, operator,
                                   ObjectiveWeights(), training=False)
    preds = predict_labels(y_hat.value)
    acc = analysis.accuracy(preds, dataset.labels, dataset.split["test"])
    print(f"test_accuracy={acc}")
    return 0


def _trained_predictions(dataset, model_cfg, obj, train_cfg):
    params, report = train(dataset, model_cfg, obj, train_cfg)
    if not report.completed:
        raise ContractError(f"training aborted: {report.error}")
    operator = build_operator(model_cfg, dataset)
    _, _, _, _, y_hat = build_loss(model_cfg, params, dataset, operator, obj,
                                   training=False)
    return predict_labels(y_hat.value)


def cmd_analyze(args, file_cfg):
    kind = _setting(args, file_cfg, "kind")
    if kind not in ("sweep", "layers", "ablation", "bins"):
        raise ContractError(f"unknown experiment kind {kind!r}")
    dataset = load_dataset(_resolve_dataset_dir(
        _setting(args, file_cfg, "dataset")))
    model_cfg, obj, train_cfg = _configs_from(args, file_cfg)
    runs = _setting(args, file_cfg, "runs")
    report_name = f"{kind}_report.txt"
    csv_name = f"{kind}.csv"
    out = _prepare_out(args, file_cfg, [report_name, csv_name])

    if kind == "sweep":
        res = seed_sweep(dataset, model_cfg, obj, train_cfg, n_runs=runs)
        cell = analysis.Cell(experiment="sweep", model=model_cfg.model_kind,
                             dataset=dataset.name, variant="headline",
                             seeds=res.seeds, mean=res.mean, std=res.std,
                             accuracies=res.accuracies,
                             incomplete=res.incomplete)
        analysis.write_cells_report([cell], os.path.join(out, report_name))
        analysis.write_cells_csv([cell], os.path.join(out, csv_name))
        print(f"mean_test_accuracy={res.mean}")
    elif kind == "layers":
        ks = [int(k) for k in (args.layer_range or "1,2,3,4,5,6").split(",")]
        cells = analysis.layer_sweep(dataset, [KIPF, CONFGCN], ks,
                                     base_model_cfg=model_cfg,
                                     obj_weights=obj, train_cfg=train_cfg,
                                     n_seeds=runs,
                                     jobs=_setting(args, file_cfg, "jobs"))
        analysis.write_cells_report(cells, os.path.join(out, report_name))
        analysis.write_cells_csv(cells, os.path.join(out, csv_name))
    elif kind == "ablation":
        cfg = model_cfg
        if cfg.model_kind != CONFGCN:
            raise ContractError("ablation requires --model confgcn")
        cells = analysis.ablation_suite(dataset, cfg, obj, train_cfg,
                                        n_seeds=runs,
                                        jobs=_setting(args, file_cfg, "jobs"))
        analysis.write_cells_report(cells, os.path.join(out, report_name))
        analysis.write_cells_csv(cells, os.path.join(out, csv_name))
    else:  # bins
        metric = _setting(args, file_cfg, "metric") or "entropy"
        preds = {}
        for kind_name in (KIPF, CONFGCN):
            cfg = ModelConfig(model_kind=kind_name,
                              num_layers=model_cfg.num_layers,
                              hidden_dim=model_cfg.hidden_dim,
                              dropout_rate=model_cfg.dropout_rate,
                              epsilon_dm=model_cfg.epsilon_dm)
            preds[kind_name] = _trained_predictions(dataset, cfg, obj,
                                                    train_cfg)
        rep = analysis.binned_accuracy(dataset, preds, metric)
        analysis.write_binned_csv(rep, os.path.join(out, csv_name))
        with open(os.path.join(out, report_name), "w") as fh:
            json.dump(rep.to_dict(), fh, indent=2)
            fh.write("\n")
    return 0


def cmd_gradcheck(args, file_cfg):
    """Finite-difference check of the full objective on a small random graph."""
    model_cfg, obj, train_cfg = _configs_from(args, file_cfg)
    dataset = make_citation_dataset(num_nodes=10, num_classes=3,
                                    num_features=6, intra_p=0.5, inter_p=0.2,
                                    train_per_class=1, val_size=2,
                                    test_size=3, seed=train_cfg.seed)
    cfg = ModelConfig(model_kind=model_cfg.model_kind,
                      num_layers=model_cfg.num_layers, hidden_dim=4,
                      dropout_rate=0.0, epsilon_dm=model_cfg.epsilon_dm)
    rng = np.random.default_rng(train_cfg.seed)
    params = init_params(cfg, dataset, rng)
    names = [name for name, _ in params.tensors()]
    operator = build_operator(cfg, dataset)

    def build(arrays):
        from .model import ConfGcnParams
        p = ConfGcnParams.from_tensors(list(zip(names, arrays)))
        tape, total, _, leaves, _ = build_loss(cfg, p, dataset, operator, obj,
                                               training=False)
        return tape, total, [leaves[n] for n in names]

    err = gradient_check(build, [arr for _, arr in params.tensors()],
                         step=1e-5)
    print(f"max_relative_error={err}")
    if err >= 1e-4:
        raise ContractError(f"gradient check failed: {err} >= 1e-4")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="confgraph",
        description="Confidence-weighted graph convolution experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="INI config file with defaults")
        p.add_argument("--dataset", help="dataset directory (or name under "
                       "$CONFGRAPH_DATA)")
        p.add_argument("--model", choices=[KIPF, CONFGCN])
        p.add_argument("--layers", type=int, help="number of layers (K)")
        p.add_argument("--hidden", type=int, help="hidden dimension")
        p.add_argument("--dropout", type=float)
        p.add_argument("--lr", type=float, help="Adam learning rate")
        p.add_argument("--epochs", type=int)
        p.add_argument("--patience", type=int)
        p.add_argument("--weight-decay", dest="weight_decay", type=float)
        for i in (1, 2, 3, 4):
            p.add_argument(f"--lambda{i}", dest=f"lambda{i}", type=float)
        p.add_argument("--gamma", type=float)
        p.add_argument("--epsilon", type=float,
                       help="influence distance floor")
        p.add_argument("--seed", type=int)
        p.add_argument("--runs", type=int)
        p.add_argument("--out", help="output directory")
        p.add_argument("--jobs", type=int)
        p.add_argument("--overwrite", action="store_true")

    p_train = sub.add_parser("train", help="train one model")
    common(p_train)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint")
    common(p_eval)
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.set_defaults(func=cmd_eval)

    p_an = sub.add_parser("analyze", help="run an analysis experiment")
    common(p_an)
    p_an.add_argument("--kind", choices=["sweep", "layers", "ablation",
                                         "bins"])
    p_an.add_argument("--metric", choices=["entropy", "degree"])
    p_an.add_argument("--layer-range", dest="layer_range",
                      help="comma-separated K values for --kind layers")
    p_an.set_defaults(func=cmd_analyze)

    p_gc = sub.add_parser("gradcheck",
                          help="finite-difference gradient check")
    common(p_gc)
    p_gc.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        file_cfg = _load_config_file(args.config) if args.config else {}
        return args.func(args, file_cfg)
    except Exception as exc:  # single-line machine-parseable failure
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
