"""Seeded synthetic citation-style datasets.

Planted-partition graphs with sparse bag-of-words-like features, used by the
test suite and handy for demos: homophily is controllable, so entropy- and
degree-binned analyses behave like they do on real citation networks.
"""

from __future__ import annotations

import numpy as np

from .graph import Dataset, Graph


def make_citation_dataset(num_nodes=200, num_classes=4, num_features=32,
                          intra_p=0.04, inter_p=0.004, train_per_class=5,
                          val_size=40, test_size=80, seed=0,
                          name="synthetic"):
    """Random graph with communities, class-correlated sparse features and a
    transductive split (per-class train, then val, then test)."""
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, num_classes, size=num_nodes)

    edges = []
    for u in range(num_nodes):
        for v in range(u + 1, num_nodes):
            p = intra_p if labels[u] == labels[v] else inter_p
            if rng.random() < p:
                edges.append((u, v))
    graph = Graph(num_nodes, edges)

    # each class activates a preferred feature block, plus background noise
    block = max(1, num_features // num_classes)
    features = np.zeros((num_nodes, num_features))
    for v in range(num_nodes):
        lo = (labels[v] * block) % num_features
        prefer = np.zeros(num_features)
        prefer[lo:lo + block] = 0.4
        features[v] = (rng.random(num_features) < (0.05 + prefer)).astype(float)

    order = rng.permutation(num_nodes)
    train = []
    for c in range(num_classes):
        members = [int(v) for v in order if labels[v] == c]
        train.extend(members[:train_per_class])
    remaining = [int(v) for v in order if v not in set(train)]
    val = remaining[:val_size]
    test = remaining[val_size:val_size + test_size]
    return Dataset(graph=graph, features=features, labels=labels,
                   num_classes=num_classes,
                   split={"train": train, "val": val, "test": test},
                   name=name)
