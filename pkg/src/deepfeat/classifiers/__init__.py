"""Classical classifiers trained from scratch on numpy arrays.

All classifiers share one surface: ``fit(train)`` on a LabeledDataset,
``predict_scores(m)`` returning an n x C row-stochastic (or softmax)
score matrix, and ``predict(m)`` returning integer labels where the
argmax of each score row equals the predicted label and ties resolve
to the lowest class index.
"""

from __future__ import annotations

import numpy as np

from ..datasets import FeatureMatrix, LabeledDataset


class ClassifierError(ValueError):
    """Invalid training data or prediction input."""


class ConvergenceError(RuntimeError):
    """An iterative trainer hit its iteration cap before converging."""


def as_matrix(m) -> np.ndarray:
    """Accept a FeatureMatrix or array-like and return a 2-D float64 array."""
    if isinstance(m, FeatureMatrix):
        return m.values
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ClassifierError(f"prediction input must be 2-D, got shape {arr.shape}")
    return arr


def check_training_data(train: LabeledDataset) -> None:
    counts = train.class_counts()
    missing = np.flatnonzero(counts == 0)
    if missing.size:
        raise ClassifierError(f"training data has no samples for class(es) "
                              f"{[int(c) for c in missing]}")


def check_n_features(expected: int, arr: np.ndarray) -> None:
    if arr.shape[1] != expected:
        raise ClassifierError(f"classifier fitted on {expected} features, "
                              f"input has {arr.shape[1]}")


from .knn import KNNClassifier, knn_classify                      # noqa: E402
from .naive_bayes import GaussianNBClassifier, nb_classify        # noqa: E402
from .svm import (                                                # noqa: E402
    BinarySVM,
    KernelSpec,
    SVMClassifier,
    svm_classify,
    svm_train_binary,
)
from .forest import RandomForestClassifier, forest_classify       # noqa: E402

_CLASSIFIER_KINDS = {
    "knn": KNNClassifier,
    "naive_bayes": GaussianNBClassifier,
    "svm": SVMClassifier,
    "random_forest": RandomForestClassifier,
}

SERIALIZATION_VERSION = 1


def make_classifier(method: str, params: dict | None = None):
    if method not in _CLASSIFIER_KINDS:
        raise ClassifierError(f"unknown classifier '{method}', expected one of "
                              f"{sorted(_CLASSIFIER_KINDS)}")
    return _CLASSIFIER_KINDS[method](**(params or {}))


def classifier_to_dict(clf) -> dict:
    """Serialize a fitted classifier to a versioned JSON-safe document."""
    kind = next(k for k, cls in _CLASSIFIER_KINDS.items() if isinstance(clf, cls))
    return {"format_version": SERIALIZATION_VERSION, "kind": kind, "state": clf.to_state()}


def classifier_from_dict(doc: dict):
    version = doc.get("format_version")
    if version != SERIALIZATION_VERSION:
        raise ClassifierError(f"unsupported classifier document version {version!r}")
    kind = doc.get("kind")
    if kind not in _CLASSIFIER_KINDS:
        raise ClassifierError(f"unknown classifier kind '{kind}'")
    return _CLASSIFIER_KINDS[kind].from_state(doc["state"])

__all__ = [
    "BinarySVM",
    "ClassifierError",
    "ConvergenceError",
    "GaussianNBClassifier",
    "KNNClassifier",
    "KernelSpec",
    "RandomForestClassifier",
    "SVMClassifier",
    "as_matrix",
    "check_n_features",
    "check_training_data",
    "classifier_from_dict",
    "classifier_to_dict",
    "forest_classify",
    "knn_classify",
    "make_classifier",
    "nb_classify",
    "svm_classify",
    "svm_train_binary",
]
