"""Scikit-learn style estimators wrapping the spiking sequence model.

Both estimators take X of shape (n_samples, seq_len, n_channels); 2-d input
is treated as single-channel.  Fitting splits off a validation fraction for
best-epoch selection and is fully deterministic under ``seed``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin

from .errors import ParameterError
from .layers import Context
from .network import HeterogeneitySpec, ModelConfig, build_model
from .train import SplitData, TrainConfig, fit
from .validation import check_labels, check_sequence_array, check_targets


class _ShareSSMBase(BaseEstimator):
    def __init__(self, n_blocks=2, hidden=16, state=16, scheme="imex",
                 dropout=0.0, ssm_only=False, scan_mode="auto", lr=1e-3,
                 weight_decay=0.0, batch_size=32, epochs=20,
                 validation_fraction=0.15, seed=0):
        self.n_blocks = n_blocks
        self.hidden = hidden
        self.state = state
        self.scheme = scheme
        self.dropout = dropout
        self.ssm_only = ssm_only
        self.scan_mode = scan_mode
        self.lr = lr
        self.weight_decay = weight_decay
        self.batch_size = batch_size
        self.epochs = epochs
        self.validation_fraction = validation_fraction
        self.seed = seed

    def _model_config(self, **task_kwargs) -> ModelConfig:
        return ModelConfig(
            n_blocks=self.n_blocks, hidden=self.hidden, state=self.state,
            scheme=self.scheme, dropout=self.dropout, ssm_only=self.ssm_only,
            scan_mode=self.scan_mode, heterogeneity=HeterogeneitySpec(),
            **task_kwargs)

    def _train_config(self, loss: str) -> TrainConfig:
        return TrainConfig(lr=self.lr, weight_decay=self.weight_decay,
                           batch_size=self.batch_size, epochs=self.epochs,
                           seed=self.seed, loss=loss)

    def _split(self, x, y):
        if not 0.0 < self.validation_fraction < 1.0:
            raise ParameterError("validation_fraction must lie in (0, 1)")
        rng = np.random.default_rng(self.seed)
        perm = rng.permutation(x.shape[0])
        n_val = max(1, int(round(x.shape[0] * self.validation_fraction)))
        val, train = perm[:n_val], perm[n_val:]
        if train.size == 0:
            raise ParameterError("not enough samples to hold out validation data")
        return SplitData(x[train], y[train], x[val], y[val])


class ShareSSMClassifier(_ShareSSMBase, ClassifierMixin):
    """Sequence classifier: spike encoder, resonator blocks, mean-pool decoder."""

    def fit(self, X, y):
        X = check_sequence_array(X)
        y = check_labels(y, X.shape[0])
        self.classes_, encoded = np.unique(y, return_inverse=True)
        config = self._model_config(task="classification",
                                    num_classes=len(self.classes_))
        self.model_ = build_model(config, X.shape[2], seed=self.seed)
        self.history_ = fit(self.model_, self._split(X, encoded),
                            self._train_config("cross_entropy")).history
        self.n_features_in_ = X.shape[2]
        return self

    def decision_function(self, X):
        X = check_sequence_array(X, self.n_features_in_)
        return self.model_.forward(X, Context(training=False))

    def predict_proba(self, X):
        logits = self.decision_function(X)
        z = np.exp(logits - logits.max(axis=1, keepdims=True))
        return z / z.sum(axis=1, keepdims=True)

    def predict(self, X):
        return self.classes_[self.decision_function(X).argmax(axis=1)]


class ShareSSMRegressor(_ShareSSMBase, RegressorMixin):
    """Sequence-to-sequence regressor with a learnable convolution decoder."""

    def __init__(self, n_blocks=2, hidden=16, state=16, scheme="imex",
                 dropout=0.0, ssm_only=False, scan_mode="auto", lr=1e-3,
                 weight_decay=0.0, batch_size=32, epochs=20,
                 validation_fraction=0.15, seed=0, kernel_size=64, loss="mse"):
        super().__init__(n_blocks=n_blocks, hidden=hidden, state=state,
                         scheme=scheme, dropout=dropout, ssm_only=ssm_only,
                         scan_mode=scan_mode, lr=lr, weight_decay=weight_decay,
                         batch_size=batch_size, epochs=epochs,
                         validation_fraction=validation_fraction, seed=seed)
        self.kernel_size = kernel_size
        self.loss = loss

    def fit(self, X, y):
        X = check_sequence_array(X)
        y = check_targets(y, X.shape[0], X.shape[1])
        config = self._model_config(task="regression", out_dim=y.shape[2],
                                    kernel_size=self.kernel_size)
        self.model_ = build_model(config, X.shape[2], seed=self.seed)
        self.history_ = fit(self.model_, self._split(X, y),
                            self._train_config(self.loss)).history
        self.n_features_in_ = X.shape[2]
        self.out_dim_ = y.shape[2]
        return self

    def predict(self, X):
        X = check_sequence_array(X, self.n_features_in_)
        return self.model_.forward(X, Context(training=False))
