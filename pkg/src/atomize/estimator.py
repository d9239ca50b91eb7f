"""scikit-learn wrapper around the trainer."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .losses import Coefficients
from .model import embed, predict_logits
from .trainer import TrainConfig, fit_arrays
from .validation import check_labels, check_points


class AtomModelingClassifier(ClassifierMixin, BaseEstimator):
    """Point classifier trained with cross-entropy plus optional atom regularizers.

    ``X`` is (N, 5, 2), or (N, 10) flattened row-major. ``transform``
    returns the 2-D point embeddings.
    """

    def __init__(self, method="atom", epochs=100, batch_size=32, learning_rate=0.05, momentum=0.0,
                 clip_norm=1.0, c_f=1.0, c_charge=1.0, c_neutrons=1.0, c_p=0.01, p=2,
                 pooling="raw", random_state=0):
        self.method = method
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.clip_norm = clip_norm
        self.c_f = c_f
        self.c_charge = c_charge
        self.c_neutrons = c_neutrons
        self.c_p = c_p
        self.p = p
        self.pooling = pooling
        self.random_state = random_state

    def _config(self) -> TrainConfig:
        coef = Coefficients(self.c_f, self.c_charge, self.c_neutrons, self.c_p)
        return TrainConfig(method=self.method, epochs=self.epochs, batch_size=self.batch_size,
                           learning_rate=self.learning_rate, momentum=self.momentum,
                           clip_norm=self.clip_norm, coefficients=coef, seed=int(self.random_state),
                           p=self.p, pooling=self.pooling)

    def fit(self, X, y):
        X = check_points(X)
        y = check_labels(y, len(X))
        config = self._config()
        self.params_, self.loss_curve_ = fit_arrays(config, X, y)
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "params_")
        logits = predict_logits(self.params_, check_points(X, self.n_features_in_), self.pooling)
        return logits[:, 1] - logits[:, 0]

    def predict_proba(self, X):
        s = self.decision_function(X)
        p1 = 0.5 * (1.0 + np.tanh(0.5 * s))  # logistic, overflow-free
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X):
        return (self.decision_function(X) > 0).astype(np.int64)

    def transform(self, X):
        check_is_fitted(self, "params_")
        return embed(self.params_, check_points(X, self.n_features_in_), self.pooling)
