"""Shared fixtures: portable dataset directories and small synthetic graphs."""

import json
import os

import numpy as np
import pytest

from confgraph.graph import Dataset, Graph
from confgraph.synthetic import make_citation_dataset


def write_portable(path, *, num_nodes, num_features, num_classes, edges,
                   features, labels, splits, name="tiny"):
    """Write a dataset directory in the portable on-disk format."""
    os.makedirs(path, exist_ok=True)
    with open(os.path.join(path, "meta.json"), "w") as fh:
        json.dump({"num_nodes": num_nodes, "num_features": num_features,
                   "num_classes": num_classes, "name": name}, fh)
    with open(os.path.join(path, "edges.csv"), "w") as fh:
        for u, v in edges:
            fh.write(f"{u},{v}\n")
    np.asarray(features, dtype="<f4").tofile(os.path.join(path, "features.bin"))
    with open(os.path.join(path, "labels.csv"), "w") as fh:
        for node, lab in labels:
            fh.write(f"{node},{lab}\n")
    with open(os.path.join(path, "splits.json"), "w") as fh:
        json.dump(splits, fh)
    return path


@pytest.fixture
def tiny_dataset_dir(tmp_path):
    """A small valid dataset directory: 6 nodes, 2 classes, 3 features."""
    return write_portable(
        tmp_path / "tiny",
        num_nodes=6, num_features=3, num_classes=2,
        edges=[(0, 1), (1, 2), (3, 4), (4, 5), (2, 3)],
        features=np.arange(18, dtype=float).reshape(6, 3) / 18.0,
        labels=[(i, 0 if i < 3 else 1) for i in range(6)],
        splits={"train": [0, 3], "val": [1, 4], "test": [2, 5]},
    )


@pytest.fixture(scope="session")
def small_dataset():
    """Synthetic citation-style dataset used by the slower integration tests."""
    return make_citation_dataset(num_nodes=120, num_classes=3,
                                 num_features=24, intra_p=0.08, inter_p=0.008,
                                 train_per_class=5, val_size=25, test_size=60,
                                 seed=7)


def random_graph(rng, num_nodes, edge_prob=0.4):
    edges = [(u, v) for u in range(num_nodes) for v in range(u + 1, num_nodes)
             if rng.random() < edge_prob]
    return Graph(num_nodes, edges)


def random_dataset(rng, num_nodes=8, num_classes=3, num_features=5,
                   edge_prob=0.4):
    graph = random_graph(rng, num_nodes, edge_prob)
    labels = rng.integers(0, num_classes, size=num_nodes)
    ids = list(rng.permutation(num_nodes))
    k = max(1, num_nodes // 4)
    return Dataset(graph=graph,
                   features=rng.uniform(-1, 1, (num_nodes, num_features)),
                   labels=labels, num_classes=num_classes,
                   split={"train": ids[:k], "val": ids[k:2 * k],
                          "test": ids[2 * k:3 * k]},
                   name="random")
