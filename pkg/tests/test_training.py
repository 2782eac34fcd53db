"""Optimizer, training-loop and checkpoint tests."""

import copy
import json

import numpy as np
import pytest

from confgraph.errors import ContractError, ValidationError
from confgraph.model import CONFGCN, KIPF, ConfGcnParams, ModelConfig, init_params
from confgraph.objective import ObjectiveWeights
from confgraph.training import (AdamState, TrainConfig, adam_step, build_loss,
                                build_operator, load_checkpoint,
                                save_checkpoint, seed_sweep, train)
from confgraph.synthetic import make_citation_dataset

from conftest import random_dataset


@pytest.fixture
def toy_dataset():
    return make_citation_dataset(num_nodes=40, num_classes=2, num_features=8,
                                 intra_p=0.2, inter_p=0.02, train_per_class=3,
                                 val_size=8, test_size=16, seed=1)


def short_cfg(**kw):
    base = dict(max_epochs=8, early_stop_patience=8, seed=0)
    base.update(kw)
    return TrainConfig(**base)


class TestAdamStep:
    def test_first_step_is_signed_learning_rate(self):
        # with zero state, the bias-corrected first update is
        # lr * g / (|g| + eps) ~= lr * sign(g)
        cfg = TrainConfig(learning_rate=0.1)
        p = np.array([[1.0, 1.0]])
        params = {"w": p}
        adam_step(params, {"w": np.array([[3.0, -0.5]])}, AdamState(), 1, cfg)
        np.testing.assert_allclose(p, [[0.9, 1.1]], atol=1e-7)

    def test_zero_gradient_leaves_parameter_unchanged(self):
        cfg = TrainConfig()
        p = np.array([[2.0]])
        adam_step({"w": p}, {"w": np.zeros((1, 1))}, AdamState(), 1, cfg)
        assert p[0, 0] == 2.0

    def test_non_finite_gradient_raises(self):
        from confgraph.errors import NumericError
        with pytest.raises(NumericError):
            adam_step({"w": np.ones((1, 1))}, {"w": np.array([[np.nan]])},
                      AdamState(), 1, TrainConfig())

    def test_deterministic(self):
        runs = []
        for _ in range(2):
            cfg = TrainConfig()
            p = np.array([[0.5, -0.5]])
            state = AdamState()
            for t in range(1, 6):
                adam_step({"w": p}, {"w": p * 2.0}, state, t, cfg)
            runs.append(p.copy())
        np.testing.assert_array_equal(runs[0], runs[1])


class TestTrainLoop:
    def test_zero_epochs_returns_init(self, toy_dataset):
        cfg = ModelConfig(model_kind=KIPF, hidden_dim=4)
        rng = np.random.default_rng(0)
        init = init_params(cfg, toy_dataset, rng)
        params, report = train(toy_dataset, cfg,
                               train_cfg=short_cfg(max_epochs=0,
                                                   early_stop_patience=0),
                               init=init)
        assert report.history == []
        assert report.completed
        np.testing.assert_array_equal(params.weights[0], init.weights[0])

    def test_history_totals_match_weighted_sums(self, toy_dataset):
        cfg = ModelConfig(model_kind=CONFGCN, hidden_dim=4, dropout_rate=0.0)
        _, report = train(toy_dataset, cfg, train_cfg=short_cfg(max_epochs=4,
                                                                early_stop_patience=4))
        assert len(report.history) == 4
        for entry in report.history:
            assert entry["total"] == pytest.approx(entry["weighted_sum"],
                                                   abs=1e-12)

    def test_best_epoch_tracks_best_val_accuracy(self, toy_dataset):
        cfg = ModelConfig(model_kind=KIPF, hidden_dim=4, dropout_rate=0.0)
        _, report = train(toy_dataset, cfg, train_cfg=short_cfg())
        vals = [e["val_accuracy"] for e in report.history]
        assert report.best_val_accuracy == max(vals)
        assert vals[report.best_epoch] == report.best_val_accuracy
        # the first epoch hitting the maximum wins
        assert report.best_epoch == vals.index(max(vals))

    def test_deterministic_given_seed(self, toy_dataset):
        cfg = ModelConfig(model_kind=CONFGCN, hidden_dim=4)
        p1, r1 = train(toy_dataset, cfg, train_cfg=short_cfg(seed=3))
        p2, r2 = train(toy_dataset, cfg, train_cfg=short_cfg(seed=3))
        for (n1, a1), (n2, a2) in zip(p1.tensors(), p2.tensors()):
            assert n1 == n2
            np.testing.assert_array_equal(a1, a2)
        assert r1.test_accuracy == r2.test_accuracy
        h1 = [e["total"] for e in r1.history]
        h2 = [e["total"] for e in r2.history]
        assert h1 == h2

    def test_divergence_reported_not_raised(self, toy_dataset):
        cfg = ModelConfig(model_kind=KIPF, hidden_dim=4, dropout_rate=0.0)
        bad = init_params(cfg, toy_dataset, np.random.default_rng(0))
        bad.weights[0][0, 0] = np.inf
        _, report = train(toy_dataset, cfg, train_cfg=short_cfg(), init=bad)
        assert not report.completed
        assert "epoch 0" in report.error
        assert report.test_accuracy is None

    def test_report_round_trips_through_json(self, toy_dataset, tmp_path):
        cfg = ModelConfig(model_kind=KIPF, hidden_dim=4)
        _, report = train(toy_dataset, cfg, train_cfg=short_cfg(max_epochs=2,
                                                                early_stop_patience=2))
        path = tmp_path / "report.json"
        report.save(path)
        loaded = json.loads(path.read_text())
        assert loaded["test_accuracy"] == report.test_accuracy
        assert loaded["completed"] is True
        assert len(loaded["history"]) == 2

    def test_kipf_ignores_confidence_terms(self, toy_dataset):
        cfg = ModelConfig(model_kind=KIPF, hidden_dim=4, dropout_rate=0.0)
        params = init_params(cfg, toy_dataset, np.random.default_rng(0))
        operator = build_operator(cfg, toy_dataset)
        _, total, values, _, _ = build_loss(cfg, params, toy_dataset, operator,
                                            ObjectiveWeights())
        assert set(values) == {"cross"}
        assert total.scalar() == pytest.approx(values["cross"])

    def test_learns_on_separable_synthetic_data(self, toy_dataset):
        cfg = ModelConfig(model_kind=KIPF, hidden_dim=8, dropout_rate=0.0)
        _, report = train(toy_dataset, cfg,
                          train_cfg=TrainConfig(max_epochs=60,
                                                early_stop_patience=60))
        assert report.test_accuracy >= 0.75


class TestSeedSweep:
    def test_single_run_rejected(self, toy_dataset):
        with pytest.raises(ContractError):
            seed_sweep(toy_dataset, ModelConfig(model_kind=KIPF), n_runs=1)

    def test_consecutive_seeds_and_stats(self, toy_dataset):
        cfg = ModelConfig(model_kind=KIPF, hidden_dim=4, dropout_rate=0.0)
        result = seed_sweep(toy_dataset, cfg, train_cfg=short_cfg(seed=5,
                                                                  max_epochs=3,
                                                                  early_stop_patience=3),
                            n_runs=3)
        assert result.seeds == [5, 6, 7]
        assert len(result.accuracies) == 3
        assert result.mean == pytest.approx(np.mean(result.accuracies))
        assert result.std == pytest.approx(np.std(result.accuracies, ddof=1))
        assert not result.incomplete

    def test_incomplete_flag_on_divergent_member(self, toy_dataset,
                                                 monkeypatch):
        import confgraph.training as training_mod
        real_train = training_mod.train

        def flaky(dataset, model_cfg, obj_weights=None, train_cfg=None,
                  terms=training_mod.ALL_TERMS, init=None):
            params, report = real_train(dataset, model_cfg, obj_weights,
                                        train_cfg, terms=terms, init=init)
            if train_cfg.seed == 1:
                report.completed = False
                report.test_accuracy = None
            return params, report

        monkeypatch.setattr(training_mod, "train", flaky)
        cfg = ModelConfig(model_kind=KIPF, hidden_dim=4)
        result = training_mod.seed_sweep(
            toy_dataset, cfg, train_cfg=short_cfg(max_epochs=2,
                                                  early_stop_patience=2),
            n_runs=3)
        assert result.incomplete
        assert len(result.accuracies) == 2


class TestCheckpoints:
    def test_round_trip_exact(self, toy_dataset, tmp_path):
        cfg = ModelConfig(model_kind=CONFGCN, hidden_dim=5)
        params = init_params(cfg, toy_dataset, np.random.default_rng(2))
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, cfg, params)
        cfg2, params2 = load_checkpoint(path)
        assert cfg2 == cfg
        for (n1, a1), (n2, a2) in zip(params.tensors(), params2.tensors()):
            assert n1 == n2
            np.testing.assert_array_equal(a1, a2)

    def test_kipf_round_trip(self, toy_dataset, tmp_path):
        cfg = ModelConfig(model_kind=KIPF, hidden_dim=3, num_layers=3)
        params = init_params(cfg, toy_dataset, np.random.default_rng(3))
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, cfg, params)
        cfg2, params2 = load_checkpoint(path)
        assert cfg2.model_kind == KIPF
        assert cfg2.num_layers == 3
        assert len(params2.weights) == 3
        assert params2.mu is None

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk.ckpt"
        path.write_bytes(b"NOPE" + b"\x00" * 40)
        with pytest.raises(ValidationError):
            load_checkpoint(path)

    def test_truncated_payload(self, toy_dataset, tmp_path):
        cfg = ModelConfig(model_kind=KIPF, hidden_dim=3)
        params = init_params(cfg, toy_dataset, np.random.default_rng(4))
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, cfg, params)
        blob = path.read_bytes()
        path.write_bytes(blob[:-10])
        with pytest.raises(ValidationError):
            load_checkpoint(path)

    def test_trailing_bytes_rejected(self, toy_dataset, tmp_path):
        cfg = ModelConfig(model_kind=KIPF, hidden_dim=3)
        params = init_params(cfg, toy_dataset, np.random.default_rng(5))
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, cfg, params)
        path.write_bytes(path.read_bytes() + b"\x00")
        with pytest.raises(ValidationError):
            load_checkpoint(path)

    def test_byte_deterministic(self, toy_dataset, tmp_path):
        cfg = ModelConfig(model_kind=CONFGCN, hidden_dim=4)
        params = init_params(cfg, toy_dataset, np.random.default_rng(6))
        p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
        save_checkpoint(p1, cfg, params)
        save_checkpoint(p2, cfg, params)
        assert p1.read_bytes() == p2.read_bytes()


class TestTrainConfigValidation:
    def test_bad_learning_rate(self):
        with pytest.raises(ContractError):
            TrainConfig(learning_rate=0.0)

    def test_patience_beyond_epochs(self):
        with pytest.raises(ContractError):
            TrainConfig(max_epochs=10, early_stop_patience=20)
