"""Conversion from the legacy serialized citation-dataset layout.

The legacy layout ships eight files per dataset, ``ind.<name>.<part>``:

========== =====================================================
x, y       features / one-hot labels of the labeled training rows
allx, ally features / labels of every non-test node
tx, ty     features / labels of the test rows
graph      adjacency map {node: [neighbor, ...]}
test.index one global node id per line for the test rows
========== =====================================================

Feature blocks are pickled scipy sparse matrices (label blocks are pickled
numpy arrays); ``test.index`` is plain text.  Node ids are remapped to one
contiguous space: the ``allx`` rows keep ids ``0..len(allx)-1`` and test rows
sit at their native global ids.  Gaps in the test-id range (isolated ids
missing from ``test.index``) become feature-zero, unlabeled nodes that join
no split.

Splits follow the standard transductive protocol: the first
``20 * num_classes`` nodes train, the following 500 validate, and the native
test ids are the test set.
"""

from __future__ import annotations

import json
import os
import pickle

import numpy as np
import scipy.sparse as sp

# Published per-dataset counts: nodes, unique undirected edges, classes,
# features.  Conversion of a known dataset fails loudly if the converted
# artifact disagrees.
EXPECTED_COUNTS = {
    "cora": (2708, 5429, 7, 1433),
    "citeseer": (3327, 4372, 6, 3703),
    "pubmed": (19717, 44338, 3, 500),
    "cora_ml": (2995, 8416, 7, 2879),
}

PLANETOID_PARTS = ("x", "y", "tx", "ty", "allx", "ally", "graph",
                   "test.index")


class ConversionError(ValueError):
    """Raised when the input files are malformed or the converted counts
    disagree with the published figures."""


# default for the expected_counts arguments: look the name up in
# EXPECTED_COUNTS (passing None disables the check entirely)
PUBLISHED = object()


def _load_pickled(path):
    with open(path, "rb") as fh:
        return pickle.load(fh, encoding="latin1")


def _read_bundle(input_dir, name):
    parts = {}
    for part in PLANETOID_PARTS:
        path = os.path.join(input_dir, f"ind.{name}.{part}")
        if not os.path.isfile(path):
            raise ConversionError(f"missing input file: {path}")
        if part == "test.index":
            with open(path) as fh:
                parts[part] = [int(line) for line in fh if line.strip()]
        else:
            parts[part] = _load_pickled(path)
    return parts


def _dense(block):
    if sp.issparse(block):
        return np.asarray(block.todense(), dtype=np.float64)
    return np.asarray(block, dtype=np.float64)


def _edges_from_adjacency(adjacency, num_nodes):
    edges = set()
    for u, neighbors in adjacency.items():
        u = int(u)
        for v in neighbors:
            v = int(v)
            if u == v:
                continue  # self-loops in the raw maps are dropped
            if not (0 <= u < num_nodes and 0 <= v < num_nodes):
                raise ConversionError(f"edge ({u},{v}) out of range")
            edges.add((u, v) if u < v else (v, u))
    return sorted(edges)


def _validate_counts(name, num_nodes, num_edges, num_classes, num_features,
                     expected=PUBLISHED):
    if expected is PUBLISHED:
        expected = EXPECTED_COUNTS.get(name)
    if expected is None:
        return
    actual = (num_nodes, num_edges, num_classes, num_features)
    labels = ("nodes", "edges", "classes", "features")
    for label, want, got in zip(labels, expected, actual):
        if want != got:
            raise ConversionError(
                f"{name}: {label} count mismatch, expected {want}, got {got}")


def _write_portable(output_dir, name, num_classes, edges, features, labels,
                    splits):
    """Emit the five portable files byte-deterministically."""
    os.makedirs(output_dir, exist_ok=True)
    num_nodes, num_features = features.shape
    meta = {"name": name, "num_classes": int(num_classes),
            "num_features": int(num_features), "num_nodes": int(num_nodes)}
    with open(os.path.join(output_dir, "meta.json"), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(output_dir, "edges.csv"), "w") as fh:
        for u, v in edges:
            fh.write(f"{u},{v}\n")
    features.astype("<f4").tofile(os.path.join(output_dir, "features.bin"))
    with open(os.path.join(output_dir, "labels.csv"), "w") as fh:
        for node in range(num_nodes):
            if labels[node] >= 0:
                fh.write(f"{node},{labels[node]}\n")
    with open(os.path.join(output_dir, "splits.json"), "w") as fh:
        json.dump({k: [int(i) for i in v] for k, v in splits.items()},
                  fh, sort_keys=True)
        fh.write("\n")


def _onehot_to_labels(block):
    """Row-wise argmax; all-zero rows (present for padded ids) map to -1."""
    block = np.asarray(block)
    labels = np.full(block.shape[0], -1, dtype=np.int64)
    nonzero = block.sum(axis=1) > 0
    labels[nonzero] = block[nonzero].argmax(axis=1)
    return labels


def convert(name, input_dir, output_dir, expected_counts=PUBLISHED):
    """Convert one legacy bundle into a portable dataset directory.

    `expected_counts` overrides the published (nodes, edges, classes,
    features) tuple used for validation; the default looks the name up in
    EXPECTED_COUNTS (unknown names skip the check) and None disables it.
    """
    bundle = _read_bundle(input_dir, name)
    allx, ally = _dense(bundle["allx"]), np.asarray(bundle["ally"])
    tx, ty = _dense(bundle["tx"]), np.asarray(bundle["ty"])
    y = np.asarray(bundle["y"])
    test_index = bundle["test.index"]

    if len(test_index) != tx.shape[0]:
        raise ConversionError(
            f"test.index lists {len(test_index)} ids but tx has "
            f"{tx.shape[0]} rows")
    if len(set(test_index)) != len(test_index):
        raise ConversionError("duplicate ids in test.index")
    n_known = allx.shape[0]
    if min(test_index) < n_known:
        raise ConversionError("test ids overlap the non-test id range")

    num_nodes = max(test_index) + 1
    num_classes = ally.shape[1]
    num_features = allx.shape[1]

    features = np.zeros((num_nodes, num_features))
    features[:n_known] = allx
    onehot = np.zeros((num_nodes, num_classes))
    onehot[:n_known] = ally
    # test rows are stored in test.index order, not sorted id order
    for row, node in enumerate(test_index):
        features[node] = tx[row]
        onehot[node] = ty[row]
    labels = _onehot_to_labels(onehot)

    edges = _edges_from_adjacency(bundle["graph"], num_nodes)

    n_train = y.shape[0]
    if n_train != 20 * num_classes:
        raise ConversionError(
            f"expected {20 * num_classes} training rows, found {n_train}")
    if n_known < n_train + 500:
        raise ConversionError(
            f"need {n_train + 500} non-test rows for train+validation, "
            f"found {n_known}")
    splits = {"train": list(range(n_train)),
              "val": list(range(n_train, n_train + 500)),
              "test": sorted(test_index)}

    _validate_counts(name, num_nodes, len(edges), num_classes, num_features,
                     expected_counts)
    _write_portable(output_dir, name, num_classes, edges, features, labels,
                    splits)
    return output_dir


LABELED_FRACTION = 0.166


def convert_cora_ml(input_path, output_dir, seed=0,
                    expected_counts=PUBLISHED):
    """Convert the Cora-ML npz archive, generating a seeded split.

    The source has no published split, so one is drawn with the given seed:
    a per-class training quota matching a 0.166 labeled fraction, then 500
    validation and 1000 test nodes from the remainder.  The seed is recorded
    in splits.json.
    """
    if not os.path.isfile(input_path):
        raise ConversionError(f"missing input file: {input_path}")
    with np.load(input_path, allow_pickle=True) as npz:
        data = dict(npz)
    try:
        adj = sp.csr_matrix((data["adj_data"], data["adj_indices"],
                             data["adj_indptr"]), shape=data["adj_shape"])
        attr = sp.csr_matrix((data["attr_data"], data["attr_indices"],
                              data["attr_indptr"]), shape=data["attr_shape"])
        labels = np.asarray(data["labels"], dtype=np.int64)
    except KeyError as exc:
        raise ConversionError(f"archive missing array {exc}")

    num_nodes = adj.shape[0]
    num_classes = int(labels.max()) + 1
    features = np.asarray(attr.todense(), dtype=np.float64)

    coo = adj.tocoo()
    edges = sorted({(int(u), int(v)) if u < v else (int(v), int(u))
                    for u, v in zip(coo.row, coo.col) if u != v})

    rng = np.random.default_rng(seed)
    per_class = int(round(LABELED_FRACTION * num_nodes / num_classes))
    train = []
    for c in range(num_classes):
        members = np.nonzero(labels == c)[0]
        rng.shuffle(members)
        if len(members) < per_class:
            raise ConversionError(
                f"class {c} has only {len(members)} nodes, "
                f"needs {per_class} for the training quota")
        train.extend(int(v) for v in members[:per_class])
    train.sort()
    rest = np.setdiff1d(np.arange(num_nodes), train)
    rng.shuffle(rest)
    if len(rest) < 1500:
        raise ConversionError("not enough nodes left for val/test splits")
    splits = {"train": train,
              "val": sorted(int(v) for v in rest[:500]),
              "test": sorted(int(v) for v in rest[500:1500]),
              "seed": [int(seed)]}

    _validate_counts("cora_ml", num_nodes, len(edges), num_classes,
                     features.shape[1], expected_counts)
    _write_portable(output_dir, "cora_ml", num_classes, edges, features,
                    labels, splits)
    return output_dir
