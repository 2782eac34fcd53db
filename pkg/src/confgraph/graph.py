"""Graph representation, portable dataset I/O and graph-operator construction."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInputError, ValidationError
from .sparse import SparseMatrix

DATASET_FILES = ("meta.json", "edges.csv", "features.bin", "labels.csv",
                 "splits.json")


class Graph:
    """Undirected graph over node ids [0, num_nodes).

    Edges are stored once as (u, v) with u < v; adjacency lists are sorted.
    Duplicate and reversed input edges are collapsed; self-loops are rejected.
    """

    def __init__(self, num_nodes, edges):
        self.num_nodes = int(num_nodes)
        seen = set()
        for u, v in edges:
            u, v = int(u), int(v)
            if u == v:
                raise ValidationError(f"self-loop on node {u}")
            if not (0 <= u < self.num_nodes and 0 <= v < self.num_nodes):
                raise ValidationError(f"edge ({u},{v}) out of range")
            seen.add((u, v) if u < v else (v, u))
        self.edges = sorted(seen)
        adj = [[] for _ in range(self.num_nodes)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        self.adjacency = [sorted(a) for a in adj]

    @property
    def num_edges(self):
        return len(self.edges)

    def degree(self, v):
        return len(self.adjacency[v])

    def neighborhood(self, v, include_self=False):
        """Sorted immediate neighbors of v, optionally with v itself."""
        if not 0 <= v < self.num_nodes:
            raise IndexError(f"node id {v} out of range")
        if not include_self:
            return list(self.adjacency[v])
        out = list(self.adjacency[v])
        out.append(v)
        out.sort()
        return out


@dataclass
class Dataset:
    """A graph plus features, labels and a transductive split."""

    graph: Graph
    features: np.ndarray          # n x d, float64
    labels: np.ndarray            # length n, int; -1 where unknown
    num_classes: int
    split: dict = field(default_factory=dict)  # train/val/test node-id arrays
    name: str = ""

    def __post_init__(self):
        n = self.graph.num_nodes
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.shape[0] != n:
            raise ValidationError(
                f"feature rows {self.features.shape[0]} != num_nodes {n}")
        if self.labels.shape != (n,):
            raise ValidationError("labels length != num_nodes")
        if self.labels.max(initial=-1) >= self.num_classes:
            raise ValidationError("label id >= num_classes")
        parts = [np.asarray(self.split.get(k, []), dtype=np.int64)
                 for k in ("train", "val", "test")]
        self.split = dict(zip(("train", "val", "test"), parts))
        combined = np.concatenate(parts) if parts else np.empty(0, np.int64)
        if len(np.unique(combined)) != len(combined):
            raise ValidationError("train/val/test splits overlap")
        if len(combined) and (combined.min() < 0 or combined.max() >= n):
            raise ValidationError("split node id out of range")
        for k, ids in self.split.items():
            if len(ids) and np.any(self.labels[ids] < 0):
                raise ValidationError(f"unlabeled node in {k} split")

    @property
    def num_nodes(self):
        return self.graph.num_nodes

    @property
    def num_features(self):
        return self.features.shape[1]

    def onehot_labels(self):
        """n x m one-hot matrix; all-zero rows for unlabeled nodes."""
        y = np.zeros((self.num_nodes, self.num_classes))
        known = self.labels >= 0
        y[np.nonzero(known)[0], self.labels[known]] = 1.0
        return y


def load_dataset(path):
    """Load a portable dataset directory (see the format notes in README)."""
    for fname in DATASET_FILES:
        if not os.path.isfile(os.path.join(path, fname)):
            raise IOError(f"missing dataset file: {os.path.join(path, fname)}")

    with open(os.path.join(path, "meta.json")) as fh:
        meta = json.load(fh)
    for key in ("num_nodes", "num_features", "num_classes", "name"):
        if key not in meta:
            raise ValidationError(f"meta.json missing field {key!r}")
    n, d, m = int(meta["num_nodes"]), int(meta["num_features"]), int(meta["num_classes"])

    edges = []
    with open(os.path.join(path, "edges.csv")) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                u, v = (int(x) for x in line.split(","))
            except ValueError:
                raise ValidationError(f"edges.csv line {lineno}: bad pair {line!r}")
            edges.append((u, v))
    graph = Graph(n, edges)

    features = np.fromfile(os.path.join(path, "features.bin"), dtype="<f4")
    if features.size != n * d:
        raise ValidationError(
            f"features.bin holds {features.size} values, expected {n * d}")
    features = features.reshape(n, d).astype(np.float64)

    labels = np.full(n, -1, dtype=np.int64)
    with open(os.path.join(path, "labels.csv")) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                node, lab = (int(x) for x in line.split(","))
            except ValueError:
                raise ValidationError(f"labels.csv line {lineno}: bad row {line!r}")
            if not 0 <= node < n:
                raise ValidationError(f"labels.csv line {lineno}: node {node} out of range")
            if not 0 <= lab < m:
                raise ValidationError(f"labels.csv line {lineno}: label {lab} out of range")
            labels[node] = lab

    with open(os.path.join(path, "splits.json")) as fh:
        split = json.load(fh)
    for key in ("train", "val", "test"):
        if key not in split:
            raise ValidationError(f"splits.json missing array {key!r}")

    return Dataset(graph=graph, features=features, labels=labels,
                   num_classes=m,
                   split={k: split[k] for k in ("train", "val", "test")},
                   name=str(meta["name"]))


def save_dataset(dataset, path):
    """Write a Dataset back out in the portable directory format."""
    os.makedirs(path, exist_ok=True)
    meta = {"num_nodes": dataset.num_nodes,
            "num_features": dataset.num_features,
            "num_classes": dataset.num_classes,
            "name": dataset.name or "unnamed"}
    with open(os.path.join(path, "meta.json"), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(path, "edges.csv"), "w") as fh:
        for u, v in dataset.graph.edges:
            fh.write(f"{u},{v}\n")
    dataset.features.astype("<f4").tofile(os.path.join(path, "features.bin"))
    with open(os.path.join(path, "labels.csv"), "w") as fh:
        for node in np.nonzero(dataset.labels >= 0)[0]:
            fh.write(f"{node},{dataset.labels[node]}\n")
    with open(os.path.join(path, "splits.json"), "w") as fh:
        json.dump({k: [int(i) for i in v] for k, v in dataset.split.items()},
                  fh, sort_keys=True)
        fh.write("\n")


def normalized_adjacency(graph):
    """Self-loop-augmented, symmetrically degree-normalized adjacency.

    Entry (u, v) is 1 / sqrt(deg_u * deg_v) where deg counts the self-loop,
    for v a neighbor of u or v == u.  Exactly symmetric by construction: the
    same expression is evaluated for both orientations of each pair.
    """
    n = graph.num_nodes
    deg = np.array([graph.degree(v) + 1 for v in range(n)], dtype=np.float64)
    inv_sqrt = 1.0 / np.sqrt(deg)
    rows, cols, vals = [], [], []
    for v in range(n):
        for u in graph.neighborhood(v, include_self=True):
            rows.append(v)
            cols.append(u)
            vals.append(inv_sqrt[v] * inv_sqrt[u])
    return SparseMatrix.from_coo(n, n, rows, cols, vals)


def self_loop_pattern(graph):
    """CSR pattern of A + I (values all ones), rows in sorted column order."""
    n = graph.num_nodes
    rows, cols = [], []
    for v in range(n):
        for u in graph.neighborhood(v, include_self=True):
            rows.append(v)
            cols.append(u)
    return SparseMatrix.from_coo(n, n, rows, cols, np.ones(len(rows)))


def neighborhood_label_entropy(graph, u, labels):
    """Entropy (nats) of the label histogram over u's neighbors.

    The node itself is excluded from the histogram.  Undefined for isolated
    nodes; all neighbor labels must be known.
    """
    neigh = graph.neighborhood(u, include_self=False)
    if not neigh:
        raise DegenerateInputError(f"node {u} has no neighbors")
    labs = np.asarray(labels)[neigh]
    if np.any(labs < 0):
        raise ValidationError(f"unlabeled neighbor of node {u}")
    _, counts = np.unique(labs, return_counts=True)
    p = counts / counts.sum()
    return float(-(p * np.log(p)).sum())


def quartile_bins(values, node_ids=None):
    """Split nodes into 4 contiguous bins of sorted values.

    Ties are broken by ascending node id; remainder nodes go to the earlier
    bins, so bin sizes differ by at most one.  Returns 4 lists of node ids.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("quartile_bins needs a non-empty input")
    if node_ids is None:
        node_ids = np.arange(values.size)
    node_ids = np.asarray(node_ids, dtype=np.int64)
    order = sorted(range(values.size), key=lambda i: (values[i], node_ids[i]))
    n = values.size
    base, rem = divmod(n, 4)
    sizes = [base + 1] * rem + [base] * (4 - rem)
    bins, start = [], 0
    for size in sizes:
        bins.append([int(node_ids[i]) for i in order[start:start + size]])
        start += size
    return bins


def label_mismatch_rate(graph, labels, train_ids):
    """Fraction of edges joining differently-labeled nodes, among edges with
    both endpoints in the training set."""
    train = set(int(i) for i in train_ids)
    total = mismatched = 0
    for u, v in graph.edges:
        if u in train and v in train:
            total += 1
            if labels[u] != labels[v]:
                mismatched += 1
    return mismatched / total if total else math.nan
