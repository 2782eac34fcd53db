"""Converter tests against synthetic legacy bundles.

The primary package's loader is used as the validation oracle for the
emitted portable directories; the converter itself never imports it.
"""

import os
import pickle

import numpy as np
import pytest
import scipy.sparse as sp

from confgraph.graph import load_dataset
from planetoid_converter import (ConversionError, convert, convert_cora_ml)
from planetoid_converter.cli import main

NUM_CLASSES = 2
N_TRAIN = 20 * NUM_CLASSES          # the fixed per-class training quota
N_KNOWN = N_TRAIN + 500 + 20       # train + val + some unlabeled padding
TEST_IDS = [i for i in range(N_KNOWN, N_KNOWN + 51) if i != N_KNOWN + 5]
NUM_NODES = N_KNOWN + 51           # one gap id inside the test range
NUM_FEATURES = 5


def write_bundle(path, name="toy", seed=0):
    """Write a small synthetic bundle in the legacy on-disk layout."""
    rng = np.random.default_rng(seed)
    os.makedirs(path, exist_ok=True)

    def dump(part, obj):
        with open(os.path.join(path, f"ind.{name}.{part}"), "wb") as fh:
            pickle.dump(obj, fh)

    allx = sp.csr_matrix(rng.random((N_KNOWN, NUM_FEATURES)) < 0.3,
                         dtype=np.float32)
    ally = np.zeros((N_KNOWN, NUM_CLASSES), dtype=np.int32)
    ally[np.arange(N_TRAIN + 500), rng.integers(0, NUM_CLASSES,
                                                N_TRAIN + 500)] = 1
    tx = sp.csr_matrix(rng.random((len(TEST_IDS), NUM_FEATURES)) < 0.3,
                       dtype=np.float32)
    ty = np.zeros((len(TEST_IDS), NUM_CLASSES), dtype=np.int32)
    ty[np.arange(len(TEST_IDS)), rng.integers(0, NUM_CLASSES,
                                              len(TEST_IDS))] = 1
    dump("x", allx[:N_TRAIN])
    dump("y", ally[:N_TRAIN])
    dump("allx", allx)
    dump("ally", ally)
    dump("tx", tx)
    dump("ty", ty)

    graph = {}
    for u in range(NUM_NODES):
        neigh = rng.choice(NUM_NODES, size=3, replace=False)
        graph[u] = [int(v) for v in neigh]
    graph[0].append(0)  # a raw self-loop, must be dropped
    dump("graph", graph)
    with open(os.path.join(path, f"ind.{name}.test.index"), "w") as fh:
        # deliberately unsorted, as in the real files
        for idx in reversed(TEST_IDS):
            fh.write(f"{idx}\n")
    return path, tx, graph


@pytest.fixture
def bundle_dir(tmp_path):
    path, _, _ = write_bundle(tmp_path / "raw")
    return str(path)


class TestConvert:
    def test_output_passes_loader_validation(self, bundle_dir, tmp_path):
        out = str(tmp_path / "out")
        convert("toy", bundle_dir, out)
        ds = load_dataset(out)
        assert ds.num_nodes == NUM_NODES
        assert ds.num_classes == NUM_CLASSES
        assert ds.num_features == NUM_FEATURES
        assert list(ds.split["train"]) == list(range(N_TRAIN))
        assert list(ds.split["val"]) == list(range(N_TRAIN, N_TRAIN + 500))
        assert list(ds.split["test"]) == sorted(TEST_IDS)

    def test_gap_node_is_unlabeled_and_featureless(self, bundle_dir,
                                                   tmp_path):
        out = str(tmp_path / "out")
        convert("toy", bundle_dir, out)
        ds = load_dataset(out)
        gap = N_KNOWN + 5
        assert gap not in set(ds.split["test"])
        assert ds.labels[gap] == -1
        assert np.all(ds.features[gap] == 0.0)

    def test_test_rows_follow_index_order(self, tmp_path):
        path, tx, _ = write_bundle(tmp_path / "raw")
        out = str(tmp_path / "out")
        convert("toy", str(path), out)
        ds = load_dataset(out)
        dense = np.asarray(tx.todense(), dtype=np.float64)
        # the fixture writes test.index in reverse, and rows follow the file
        for row, node in enumerate(reversed(TEST_IDS)):
            np.testing.assert_array_equal(ds.features[node], dense[row])

    def test_edges_unique_and_ordered(self, tmp_path):
        path, _, graph = write_bundle(tmp_path / "raw")
        out = str(tmp_path / "out")
        convert("toy", str(path), out)
        lines = open(os.path.join(out, "edges.csv")).read().split()
        pairs = [tuple(int(x) for x in line.split(",")) for line in lines]
        assert pairs == sorted(set(pairs))
        assert all(u < v for u, v in pairs)
        expected = {(min(u, v), max(u, v)) for u, vs in graph.items()
                    for v in vs if u != v}
        assert set(pairs) == expected

    def test_byte_deterministic(self, bundle_dir, tmp_path):
        out1, out2 = str(tmp_path / "o1"), str(tmp_path / "o2")
        convert("toy", bundle_dir, out1)
        convert("toy", bundle_dir, out2)
        for fname in ("meta.json", "edges.csv", "features.bin", "labels.csv",
                      "splits.json"):
            a = open(os.path.join(out1, fname), "rb").read()
            b = open(os.path.join(out2, fname), "rb").read()
            assert a == b, fname

    def test_count_mismatch_reports_expected_and_actual(self, bundle_dir,
                                                        tmp_path):
        with pytest.raises(ConversionError, match="expected 9999"):
            convert("toy", bundle_dir, str(tmp_path / "out"),
                    expected_counts=(9999, 1, NUM_CLASSES, NUM_FEATURES))

    def test_missing_file(self, bundle_dir, tmp_path):
        os.remove(os.path.join(bundle_dir, "ind.toy.graph"))
        with pytest.raises(ConversionError, match="missing input file"):
            convert("toy", bundle_dir, str(tmp_path / "out"))

    def test_duplicate_test_index(self, bundle_dir, tmp_path):
        with open(os.path.join(bundle_dir, "ind.toy.test.index")) as fh:
            lines = fh.read().split()
        lines[1] = lines[0]
        with open(os.path.join(bundle_dir, "ind.toy.test.index"), "w") as fh:
            fh.write("\n".join(lines) + "\n")
        with pytest.raises(ConversionError):
            convert("toy", bundle_dir, str(tmp_path / "out"))


def write_cora_ml_like(path, num_nodes=2000, num_classes=2, num_features=6,
                       seed=0, num_edges=None):
    rng = np.random.default_rng(seed)
    if num_edges is None:
        adj = sp.random(num_nodes, num_nodes, density=0.002, random_state=42,
                        dtype=np.float64)
        adj = ((adj + adj.T) > 0).astype(np.float64).tocsr()
    else:
        # an exact unique undirected edge count, laid out deterministically
        pairs = []
        u = 0
        while len(pairs) < num_edges:
            for v in range(u + 1, num_nodes):
                pairs.append((u, v))
                if len(pairs) == num_edges:
                    break
            u += 1
        rows = [p[0] for p in pairs] + [p[1] for p in pairs]
        cols = [p[1] for p in pairs] + [p[0] for p in pairs]
        adj = sp.csr_matrix((np.ones(len(rows)), (rows, cols)),
                            shape=(num_nodes, num_nodes))
    attr = sp.csr_matrix(rng.random((num_nodes, num_features)) < 0.4,
                         dtype=np.float32)
    labels = np.arange(num_nodes) % num_classes
    rng.shuffle(labels)
    np.savez(path, adj_data=adj.data, adj_indices=adj.indices,
             adj_indptr=adj.indptr, adj_shape=np.array(adj.shape),
             attr_data=attr.data, attr_indices=attr.indices,
             attr_indptr=attr.indptr, attr_shape=np.array(attr.shape),
             labels=labels)
    return str(path)


class TestConvertCoraMl:
    @pytest.fixture
    def npz_path(self, tmp_path):
        return write_cora_ml_like(tmp_path / "cora_ml.npz")

    def test_output_and_split_sizes(self, npz_path, tmp_path):
        out = str(tmp_path / "out")
        convert_cora_ml(npz_path, out, seed=3, expected_counts=None)
        ds = load_dataset(out)
        assert ds.num_nodes == 2000
        frac = len(ds.split["train"]) / ds.num_nodes
        # one node per class of rounding slack around the target fraction
        assert abs(frac - 0.166) <= ds.num_classes / ds.num_nodes
        assert len(ds.split["val"]) == 500
        assert len(ds.split["test"]) == 1000
        # the split is class-balanced by construction
        counts = np.bincount(ds.labels[ds.split["train"]])
        assert counts.min() == counts.max()

    def test_seed_changes_only_the_split(self, npz_path, tmp_path):
        out1, out2 = str(tmp_path / "s1"), str(tmp_path / "s2")
        convert_cora_ml(npz_path, out1, seed=1, expected_counts=None)
        convert_cora_ml(npz_path, out2, seed=2, expected_counts=None)
        for fname in ("meta.json", "edges.csv", "features.bin", "labels.csv"):
            assert open(os.path.join(out1, fname), "rb").read() == \
                open(os.path.join(out2, fname), "rb").read(), fname
        assert open(os.path.join(out1, "splits.json")).read() != \
            open(os.path.join(out2, "splits.json")).read()

    def test_same_seed_is_byte_deterministic(self, npz_path, tmp_path):
        out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
        convert_cora_ml(npz_path, out1, seed=5, expected_counts=None)
        convert_cora_ml(npz_path, out2, seed=5, expected_counts=None)
        for fname in ("meta.json", "edges.csv", "features.bin", "labels.csv",
                      "splits.json"):
            assert open(os.path.join(out1, fname), "rb").read() == \
                open(os.path.join(out2, fname), "rb").read(), fname

    def test_missing_archive(self, tmp_path):
        with pytest.raises(ConversionError, match="missing input file"):
            convert_cora_ml(str(tmp_path / "nope.npz"), str(tmp_path / "out"))


class TestCli:
    def test_convert_via_cli(self, bundle_dir, tmp_path, capsys):
        out = str(tmp_path / "out")
        assert main(["toy", bundle_dir, out]) == 0
        assert "converted toy" in capsys.readouterr().out
        load_dataset(out)

    def test_cora_ml_via_cli(self, tmp_path, capsys):
        # the command line path enforces the published counts, so this
        # archive is built to match them exactly
        raw = tmp_path / "raw"
        raw.mkdir()
        write_cora_ml_like(raw / "cora_ml.npz", num_nodes=2995,
                           num_classes=7, num_features=2879, num_edges=8416)
        out = str(tmp_path / "out")
        assert main(["cora_ml", str(raw), out, "--seed", "4"]) == 0
        ds = load_dataset(out)
        assert ds.num_nodes == 2995
        assert ds.graph.num_edges == 8416

    def test_error_exit_code(self, tmp_path, capsys):
        code = main(["toy", str(tmp_path / "empty"), str(tmp_path / "out")])
        assert code == 1
        assert capsys.readouterr().err.startswith("error:")
