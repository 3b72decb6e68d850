"""Gaussian naive Bayes with frequency priors and variance smoothing."""

from __future__ import annotations

import numpy as np

from .._serde import decode_array, encode_array
from ..datasets import LabeledDataset

# Smoothing is 1e-9 times the largest per-feature variance of the full
# training matrix, so no class-conditional variance can reach zero.
VAR_SMOOTHING = 1e-9


class GaussianNBClassifier:

    def __init__(self):
        self._log_priors = None
        self._means = None
        self._vars = None
        self._n_classes = 0

    def fit(self, train: LabeledDataset) -> "GaussianNBClassifier":
        from . import check_training_data
        check_training_data(train)
        x, y = train.matrix.values, train.labels
        c = train.n_classes
        counts = train.class_counts().astype(np.float64)
        self._log_priors = np.log(counts / y.size)
        max_var = float(x.var(axis=0).max())
        eps = VAR_SMOOTHING * max_var if max_var > 0 else VAR_SMOOTHING
        means = np.empty((c, x.shape[1]))
        variances = np.empty((c, x.shape[1]))
        for k in range(c):
            rows = x[y == k]
            means[k] = rows.mean(axis=0)
            variances[k] = rows.var(axis=0) + eps
        self._means = means
        self._vars = variances
        self._n_classes = c
        return self

    def predict_scores(self, m) -> np.ndarray:
        from . import as_matrix, check_n_features, ClassifierError
        if self._means is None:
            raise ClassifierError("classifier is not fitted")
        x = as_matrix(m)
        check_n_features(self._means.shape[1], x)
        n = x.shape[0]
        log_joint = np.empty((n, self._n_classes))
        for k in range(self._n_classes):
            diff = x - self._means[k]
            ll = -0.5 * (np.log(2.0 * np.pi * self._vars[k]) + diff * diff / self._vars[k])
            log_joint[:, k] = self._log_priors[k] + ll.sum(axis=1)
        # normalize in the log domain, then renormalize in linear space
        # so rows sum to 1 up to float addition error
        log_joint -= log_joint.max(axis=1, keepdims=True)
        scores = np.exp(log_joint)
        scores /= scores.sum(axis=1, keepdims=True)
        return scores

    def predict(self, m) -> np.ndarray:
        return np.argmax(self.predict_scores(m), axis=1)

    def to_state(self) -> dict:
        return {
            "log_priors": encode_array(self._log_priors),
            "means": encode_array(self._means),
            "vars": encode_array(self._vars),
            "n_classes": self._n_classes,
        }

    @classmethod
    def from_state(cls, state: dict) -> "GaussianNBClassifier":
        clf = cls()
        clf._log_priors = decode_array(state["log_priors"])
        clf._means = decode_array(state["means"])
        clf._vars = decode_array(state["vars"])
        clf._n_classes = int(state["n_classes"])
        return clf


def nb_classify(train: LabeledDataset, test) -> tuple[np.ndarray, np.ndarray]:
    clf = GaussianNBClassifier().fit(train)
    scores = clf.predict_scores(test)
    return np.argmax(scores, axis=1), scores
