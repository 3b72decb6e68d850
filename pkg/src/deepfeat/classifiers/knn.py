"""k-nearest-neighbour classifier with Euclidean distance."""

from __future__ import annotations

import numpy as np

from .._serde import decode_array, encode_array
from ..datasets import LabeledDataset


class KNNClassifier:
    """Majority vote over the k nearest training rows.

    Distances are compared squared, which preserves the Euclidean
    ordering.  Neighbour ties at equal distance resolve to the lower
    training row index, vote ties to the lower class index.
    """

    def __init__(self, k: int = 5):
        from . import ClassifierError
        if int(k) < 1:
            raise ClassifierError(f"k must be >= 1, got {k}")
        self.k = int(k)
        self._x = None
        self._y = None
        self._n_classes = 0

    def fit(self, train: LabeledDataset) -> "KNNClassifier":
        from . import ClassifierError, check_training_data
        check_training_data(train)
        if self.k > train.matrix.n_rows:
            raise ClassifierError(f"k={self.k} exceeds {train.matrix.n_rows} training rows")
        self._x = train.matrix.values
        self._y = train.labels
        self._n_classes = train.n_classes
        return self

    def predict_scores(self, m) -> np.ndarray:
        from . import as_matrix, check_n_features, ClassifierError
        if self._x is None:
            raise ClassifierError("classifier is not fitted")
        x = as_matrix(m)
        check_n_features(self._x.shape[1], x)
        # squared distances via the expansion |a-b|^2 = a.a + b.b - 2 a.b
        d2 = (x * x).sum(axis=1)[:, None] + (self._x * self._x).sum(axis=1)[None, :]
        d2 -= 2.0 * (x @ self._x.T)
        order = np.argsort(d2, axis=1, kind="stable")[:, : self.k]
        votes = self._y[order]
        n = x.shape[0]
        scores = np.zeros((n, self._n_classes))
        np.add.at(scores, (np.repeat(np.arange(n), self.k), votes.ravel()), 1.0)
        scores /= self.k
        return scores

    def predict(self, m) -> np.ndarray:
        return np.argmax(self.predict_scores(m), axis=1)

    def to_state(self) -> dict:
        return {
            "k": self.k,
            "x": encode_array(self._x),
            "y": encode_array(self._y),
            "n_classes": self._n_classes,
        }

    @classmethod
    def from_state(cls, state: dict) -> "KNNClassifier":
        clf = cls(k=state["k"])
        clf._x = decode_array(state["x"])
        clf._y = decode_array(state["y"])
        clf._n_classes = int(state["n_classes"])
        return clf


def knn_classify(train: LabeledDataset, test, k: int = 5) -> tuple[np.ndarray, np.ndarray]:
    clf = KNNClassifier(k=k).fit(train)
    scores = clf.predict_scores(test)
    return np.argmax(scores, axis=1), scores
