"""Scikit-learn style estimator wrappers around the training loop.

The transductive setting does not fit the (X, y) matrix convention, so `fit`
takes a :class:`~confgraph.graph.Dataset`; parameter handling (`get_params`,
`set_params`, cloning) follows the sklearn contract so the estimators compose
with ecosystem tooling.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from .graph import Dataset
from .model import CONFGCN, KIPF, ModelConfig, predict_labels
from .objective import ObjectiveWeights
from .training import TrainConfig, build_loss, build_operator, train


class _GraphSSLClassifier(BaseEstimator, ClassifierMixin):
    """Shared fit/predict machinery; subclasses pin the model kind."""

    _model_kind = None

    def __init__(self, num_layers=2, hidden_dim=16, dropout_rate=0.5,
                 epsilon=1.0, normalize_influence=False,
                 lambda1=1.0, lambda2=1.0, lambda3=1.0, lambda4=1.0,
                 gamma=1.0, learning_rate=0.01, max_epochs=300,
                 early_stop_patience=30, weight_decay=5e-4, seed=0):
        self.num_layers = num_layers
        self.hidden_dim = hidden_dim
        self.dropout_rate = dropout_rate
        self.epsilon = epsilon
        self.normalize_influence = normalize_influence
        self.lambda1 = lambda1
        self.lambda2 = lambda2
        self.lambda3 = lambda3
        self.lambda4 = lambda4
        self.gamma = gamma
        self.learning_rate = learning_rate
        self.max_epochs = max_epochs
        self.early_stop_patience = early_stop_patience
        self.weight_decay = weight_decay
        self.seed = seed

    def _configs(self):
        model_cfg = ModelConfig(model_kind=self._model_kind,
                                num_layers=self.num_layers,
                                hidden_dim=self.hidden_dim,
                                dropout_rate=self.dropout_rate,
                                epsilon_dm=self.epsilon,
                                normalize_influence=self.normalize_influence)
        obj = ObjectiveWeights(lambda1=self.lambda1, lambda2=self.lambda2,
                               lambda3=self.lambda3, lambda4=self.lambda4,
                               gamma=self.gamma)
        train_cfg = TrainConfig(learning_rate=self.learning_rate,
                                max_epochs=self.max_epochs,
                                early_stop_patience=self.early_stop_patience,
                                weight_decay=self.weight_decay,
                                seed=self.seed)
        return model_cfg, obj, train_cfg

    def fit(self, dataset, y=None):
        if not isinstance(dataset, Dataset):
            raise TypeError("fit expects a confgraph Dataset")
        model_cfg, obj, train_cfg = self._configs()
        self.params_, self.report_ = train(dataset, model_cfg, obj, train_cfg)
        self.model_cfg_ = model_cfg
        self.dataset_ = dataset
        self.classes_ = np.arange(dataset.num_classes)
        return self

    def _check_fitted(self):
        if not hasattr(self, "params_"):
            raise NotFittedError("call fit before predicting")

    def predict_proba(self, node_ids=None):
        self._check_fitted()
        operator = build_operator(self.model_cfg_, self.dataset_)
        _, _, _, _, y_hat = build_loss(self.model_cfg_, self.params_,
                                       self.dataset_, operator,
                                       ObjectiveWeights(), training=False)
        probs = y_hat.value
        if node_ids is not None:
            probs = probs[np.asarray(node_ids, dtype=np.int64)]
        return probs

    def predict(self, node_ids=None):
        return predict_labels(self.predict_proba(node_ids))

    def score(self, node_ids=None, y=None):
        """Accuracy over the given nodes (default: the test split)."""
        self._check_fitted()
        if node_ids is None:
            node_ids = self.dataset_.split["test"]
        node_ids = np.asarray(node_ids, dtype=np.int64)
        preds = self.predict(node_ids)
        return float(np.mean(preds == self.dataset_.labels[node_ids]))


class KipfGCNClassifier(_GraphSSLClassifier):
    """Degree-normalized graph convolution baseline."""

    _model_kind = KIPF


class ConfGCNClassifier(_GraphSSLClassifier):
    """Confidence-weighted graph convolution."""

    _model_kind = CONFGCN
