"""Random forest of CART trees with Gini splits.

Each tree draws a bootstrap sample (n rows with replacement), considers
a fresh random subset of floor(sqrt(d)) features at every node, and is
grown until nodes are pure or hold fewer than 2 samples.  Per-tree
generators are seeded ``seed + tree_index`` so a forest is reproducible
tree by tree.  Feature importances are mean decrease in impurity,
normalized to sum to 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .._serde import decode_array, encode_array
from ..datasets import LabeledDataset

_MIN_GAIN = 1e-12


@dataclass
class _Tree:
    """Flat node arrays; children reference node indices, -1 marks leaves."""

    feature: list[int] = field(default_factory=list)
    threshold: list[float] = field(default_factory=list)
    left: list[int] = field(default_factory=list)
    right: list[int] = field(default_factory=list)
    counts: list[np.ndarray | None] = field(default_factory=list)

    def new_node(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.counts.append(None)
        return len(self.feature) - 1

    def leaf_scores(self, x: np.ndarray) -> np.ndarray:
        width = next(c for c in self.counts if c is not None).shape[0]
        out = np.empty((x.shape[0], width))
        for i in range(x.shape[0]):
            node = 0
            while self.feature[node] != -1:
                if x[i, self.feature[node]] < self.threshold[node]:
                    node = self.left[node]
                else:
                    node = self.right[node]
            c = self.counts[node]
            out[i] = c / c.sum()
        return out


def _gini(counts: np.ndarray, n: float) -> float:
    return 1.0 - float((counts * counts).sum()) / (n * n)


def _best_split(x: np.ndarray, y_onehot: np.ndarray, idx: np.ndarray,
                features: np.ndarray, base_gini: float):
    """Best (gain, feature, threshold) over candidate features, or None."""
    n = idx.size
    best_gain = _MIN_GAIN
    best = None
    sub_onehot = y_onehot[idx]
    total = sub_onehot.sum(axis=0)
    for f in features:
        v = x[idx, f]
        order = np.argsort(v, kind="stable")
        vs = v[order]
        cum = np.cumsum(sub_onehot[order], axis=0)
        thr = vs[:-1] + (vs[1:] - vs[:-1]) / 2.0
        valid = (thr > vs[:-1]) & (thr <= vs[1:])
        if not valid.any():
            continue
        nl = np.arange(1, n, dtype=np.float64)
        nr = n - nl
        lc = cum[:-1]
        rc = total - lc
        gl = 1.0 - (lc * lc).sum(axis=1) / (nl * nl)
        gr = 1.0 - (rc * rc).sum(axis=1) / (nr * nr)
        weighted = (nl * gl + nr * gr) / n
        weighted[~valid] = np.inf
        i = int(np.argmin(weighted))
        gain = base_gini - weighted[i]
        if gain > best_gain:
            best_gain = gain
            best = (gain, int(f), float(thr[i]))
    return best


def _grow_tree(x: np.ndarray, y: np.ndarray, n_classes: int, mtry: int,
               rng: np.random.Generator, importances: np.ndarray) -> _Tree:
    n, d = x.shape
    y_onehot = np.zeros((n, n_classes))
    y_onehot[np.arange(n), y] = 1.0
    tree = _Tree()
    root = tree.new_node()
    stack = [(root, np.arange(n))]
    while stack:
        node, idx = stack.pop()
        counts = y_onehot[idx].sum(axis=0)
        n_node = idx.size
        base = _gini(counts, float(n_node))
        if n_node < 2 or base == 0.0:
            tree.counts[node] = counts
            continue
        features = rng.choice(d, size=mtry, replace=False)
        best = _best_split(x, y_onehot, idx, features, base)
        if best is None and mtry < d:
            # candidate features were all constant on this node; fall back
            # to the full feature set so consistent data can be memorized
            best = _best_split(x, y_onehot, idx, np.arange(d), base)
        if best is None:
            tree.counts[node] = counts
            continue
        gain, f, thr = best
        importances[f] += n_node * gain / n
        mask = x[idx, f] < thr
        left_id = tree.new_node()
        right_id = tree.new_node()
        tree.feature[node] = f
        tree.threshold[node] = thr
        tree.left[node] = left_id
        tree.right[node] = right_id
        stack.append((right_id, idx[~mask]))
        stack.append((left_id, idx[mask]))
    return tree


class RandomForestClassifier:

    def __init__(self, n_trees: int = 100, bootstrap: bool = True, seed: int = 0):
        from . import ClassifierError
        if int(n_trees) < 1:
            raise ClassifierError(f"n_trees must be >= 1, got {n_trees}")
        self.n_trees = int(n_trees)
        self.bootstrap = bool(bootstrap)
        self.seed = int(seed)
        self._trees: list[_Tree] = []
        self._n_classes = 0
        self._n_features = 0
        self.feature_importances_: np.ndarray | None = None

    def fit(self, train: LabeledDataset) -> "RandomForestClassifier":
        from . import check_training_data
        check_training_data(train)
        x, y = train.matrix.values, train.labels
        n, d = x.shape
        mtry = max(1, int(math.sqrt(d)))
        self._trees = []
        tree_imps = []
        for t in range(self.n_trees):
            rng = np.random.default_rng(self.seed + t)
            idx = rng.integers(0, n, size=n) if self.bootstrap else np.arange(n)
            imps = np.zeros(d)
            self._trees.append(_grow_tree(x[idx], y[idx], train.n_classes, mtry,
                                          rng, imps))
            total = imps.sum()
            tree_imps.append(imps / total if total > 0 else imps)
        mean_imp = np.mean(tree_imps, axis=0)
        total = mean_imp.sum()
        self.feature_importances_ = (mean_imp / total if total > 0
                                     else np.full(d, 1.0 / d))
        self._n_classes = train.n_classes
        self._n_features = d
        return self

    def predict_scores(self, m) -> np.ndarray:
        from . import as_matrix, check_n_features, ClassifierError
        if not self._trees:
            raise ClassifierError("classifier is not fitted")
        x = as_matrix(m)
        check_n_features(self._n_features, x)
        scores = np.zeros((x.shape[0], self._n_classes))
        for tree in self._trees:
            scores += tree.leaf_scores(x)
        scores /= len(self._trees)
        return scores

    def predict(self, m) -> np.ndarray:
        return np.argmax(self.predict_scores(m), axis=1)

    def to_state(self) -> dict:
        trees = []
        for t in self._trees:
            trees.append({
                "feature": list(t.feature),
                "threshold": list(t.threshold),
                "left": list(t.left),
                "right": list(t.right),
                "counts": [None if c is None else encode_array(c) for c in t.counts],
            })
        return {
            "n_trees": self.n_trees,
            "bootstrap": self.bootstrap,
            "seed": self.seed,
            "n_classes": self._n_classes,
            "n_features": self._n_features,
            "importances": encode_array(self.feature_importances_),
            "trees": trees,
        }

    @classmethod
    def from_state(cls, state: dict) -> "RandomForestClassifier":
        clf = cls(n_trees=state["n_trees"], bootstrap=state["bootstrap"],
                  seed=state["seed"])
        clf._n_classes = int(state["n_classes"])
        clf._n_features = int(state["n_features"])
        clf.feature_importances_ = decode_array(state["importances"])
        clf._trees = []
        for t in state["trees"]:
            tree = _Tree(feature=list(t["feature"]), threshold=list(t["threshold"]),
                         left=list(t["left"]), right=list(t["right"]),
                         counts=[None if c is None else decode_array(c)
                                 for c in t["counts"]])
            clf._trees.append(tree)
        return clf


def forest_classify(train: LabeledDataset, test, n_trees: int = 100,
                    bootstrap: bool = True, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    clf = RandomForestClassifier(n_trees=n_trees, bootstrap=bootstrap, seed=seed).fit(train)
    scores = clf.predict_scores(test)
    return np.argmax(scores, axis=1), scores
