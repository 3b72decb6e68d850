"""Feature selection and dimensionality reduction.

Five strategies share one result type: one-way ANOVA F ranking,
recursive feature elimination backed by a linear SVM, random forest
importance thresholding, L1-regularized (lasso) selection via cyclic
coordinate descent, and PCA via thin SVD.  Index-based selectors fill
``selected``; PCA instead stores an orthonormal projection and the
column means used for centering.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field

import numpy as np

from ._serde import decode_array, encode_array
from .datasets import FeatureMatrix, LabeledDataset

ANOVA_EPS = 1e-12
LASSO_TOL = 1e-6
LASSO_MAX_SWEEPS = 10000

SELECTION_VERSION = 1


class SelectionError(ValueError):
    """Invalid selector parameters or inputs."""


class LassoConvergenceError(RuntimeError):
    """Coordinate descent hit the sweep cap before reaching tolerance."""


class SelectorKind(str, enum.Enum):
    ANOVA = "ANOVA"
    RFE = "RFE"
    RF_IMPORTANCE = "RF_IMPORTANCE"
    LASSO = "LASSO"
    PCA = "PCA"


@dataclass(frozen=True)
class SelectorResult:
    """Outcome of one selector fit.

    ``selected`` holds retained feature indices in rank order and is
    empty for PCA.  ``scores`` is one value per input feature for index
    selectors and the k component variances (descending) for PCA.
    """

    kind: SelectorKind
    selected: tuple[int, ...]
    scores: np.ndarray
    projection: np.ndarray | None = None
    center: np.ndarray | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        scores = np.array(self.scores, dtype=np.float64, copy=True)
        scores.setflags(write=False)
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "selected", tuple(int(i) for i in self.selected))
        if self.kind == SelectorKind.PCA:
            if self.selected:
                raise SelectionError("PCA results must not carry selected indices")
            if self.projection is None or self.center is None:
                raise SelectionError("PCA results need a projection and a center")
            proj = np.array(self.projection, dtype=np.float64, copy=True)
            gram = proj @ proj.T
            if not np.allclose(gram, np.eye(proj.shape[0]), atol=1e-9):
                raise SelectionError("PCA projection rows must be orthonormal within 1e-9")
            center = np.array(self.center, dtype=np.float64, copy=True)
            if center.shape != (proj.shape[1],):
                raise SelectionError("PCA center length must match projection columns")
            proj.setflags(write=False)
            center.setflags(write=False)
            object.__setattr__(self, "projection", proj)
            object.__setattr__(self, "center", center)
        else:
            if self.projection is not None or self.center is not None:
                raise SelectionError(f"{self.kind.value} results must not carry a projection")
            d = scores.shape[0]
            sel = self.selected
            if len(set(sel)) != len(sel):
                raise SelectionError("selected indices must be unique")
            if sel and (min(sel) < 0 or max(sel) >= d):
                raise SelectionError(f"selected indices must lie in [0, {d})")

    @property
    def n_features_in(self) -> int:
        if self.kind == SelectorKind.PCA:
            return int(self.projection.shape[1])
        return int(self.scores.shape[0])

    @property
    def n_features_out(self) -> int:
        if self.kind == SelectorKind.PCA:
            return int(self.projection.shape[0])
        return len(self.selected)


def _rank_descending(values: np.ndarray) -> np.ndarray:
    """Indices sorted by value descending, ties to the lower index."""
    return np.argsort(-values, kind="stable")


def anova_select(train: LabeledDataset, k: int = 500) -> SelectorResult:
    """Rank features by the one-way ANOVA F statistic and keep the top k.

    F = (SS_between / (C - 1)) / (SS_within / (n - C)) over the classes
    present in the labels.  A small epsilon guards the denominator;
    features constant across all samples get F = 0 outright.
    """
    x, y = train.matrix.values, train.labels
    n, d = x.shape
    if not (1 <= k <= d):
        raise SelectionError(f"k must lie in [1, {d}], got {k}")
    classes = np.unique(y)
    c = classes.size
    if c < 2:
        raise SelectionError("ANOVA needs samples from at least 2 classes")
    if n <= c:
        raise SelectionError(f"ANOVA needs more samples ({n}) than classes ({c})")
    grand = x.mean(axis=0)
    ss_between = np.zeros(d)
    ss_within = np.zeros(d)
    for cls in classes:
        rows = x[y == cls]
        mean_c = rows.mean(axis=0)
        ss_between += rows.shape[0] * (mean_c - grand) ** 2
        ss_within += ((rows - mean_c) ** 2).sum(axis=0)
    f_scores = (ss_between / (c - 1)) / (ss_within / (n - c) + ANOVA_EPS)
    constant = x.max(axis=0) == x.min(axis=0)
    f_scores[constant] = 0.0
    order = _rank_descending(f_scores)
    return SelectorResult(kind=SelectorKind.ANOVA, selected=tuple(order[:k]),
                          scores=f_scores, params={"k": int(k)})


def rfe_select(train: LabeledDataset, k: int = 200,
               step_fraction: float = 0.1) -> SelectorResult:
    """Recursive feature elimination with a linear one-vs-rest SVM (C=1).

    Each round drops the ceil(step_fraction * remaining) features whose
    aggregate weight (L2 norm of the per-class primal weights) is
    smallest, trimming the last round so exactly k features remain.
    Scores record the elimination round; survivors share the highest
    value.  Survivors are ordered by their final aggregate weight.
    """
    from .classifiers import SVMClassifier

    x = train.matrix.values
    d = x.shape[1]
    if not (1 <= k <= d):
        raise SelectionError(f"k must lie in [1, {d}], got {k}")
    if not (0.0 < step_fraction < 1.0):
        raise SelectionError(f"step_fraction must lie in (0, 1), got {step_fraction}")

    remaining = np.arange(d)
    scores = np.zeros(d)
    round_no = 0
    final_weights = np.ones(d)
    while remaining.size > k:
        round_no += 1
        sub = LabeledDataset(matrix=FeatureMatrix(x[:, remaining],
                                                  tuple(train.matrix.feature_ids[i]
                                                        for i in remaining)),
                             labels=train.labels, class_names=train.class_names,
                             ids=train.ids)
        try:
            clf = SVMClassifier(kernel="linear", C=1.0).fit(sub)
        except Exception as e:
            raise SelectionError(f"RFE round {round_no}: base estimator failed: {e}") from e
        weights = np.stack([m.w for m in clf.machines])
        agg = np.sqrt((weights * weights).sum(axis=0))
        final_weights[remaining] = agg
        n_drop = min(math.ceil(step_fraction * remaining.size), remaining.size - k)
        drop_local = np.argsort(agg, kind="stable")[:n_drop]
        scores[remaining[drop_local]] = round_no
        keep = np.ones(remaining.size, dtype=bool)
        keep[drop_local] = False
        remaining = remaining[keep]
    scores[remaining] = round_no + 1
    order = remaining[_rank_descending(final_weights[remaining])]
    return SelectorResult(kind=SelectorKind.RFE, selected=tuple(order), scores=scores,
                          params={"k": int(k), "step_fraction": float(step_fraction)})


def rf_importance_select(train: LabeledDataset, seed: int = 0,
                         n_trees: int = 100) -> SelectorResult:
    """Keep features whose forest importance is at least the mean (1/d).

    Importances are mean decrease in impurity normalized to sum to 1,
    so the threshold equals the mean importance.  A 1e-12 slack absorbs
    float rounding when all importances are identical.
    """
    from .classifiers import RandomForestClassifier

    d = train.matrix.n_features
    clf = RandomForestClassifier(n_trees=n_trees, seed=seed).fit(train)
    imp = clf.feature_importances_
    threshold = imp.mean() - 1e-12
    chosen = np.flatnonzero(imp >= threshold)
    order = chosen[_rank_descending(imp[chosen])]
    return SelectorResult(kind=SelectorKind.RF_IMPORTANCE, selected=tuple(order),
                          scores=imp, params={"seed": int(seed), "n_trees": int(n_trees),
                                              "threshold": 1.0 / d})


def _coordinate_descent(x: np.ndarray, y: np.ndarray, alpha: float,
                        tol: float, max_sweeps: int) -> np.ndarray:
    """Minimize (1/2n) ||y - x b||^2 + alpha ||b||_1 by cyclic updates."""
    n, d = x.shape
    col_sq = (x * x).sum(axis=0) / n
    beta = np.zeros(d)
    residual = y.copy()
    for _ in range(max_sweeps):
        max_delta = 0.0
        for j in range(d):
            if col_sq[j] == 0.0:
                continue
            rho = (x[:, j] @ residual) / n + col_sq[j] * beta[j]
            new = math.copysign(max(abs(rho) - alpha, 0.0), rho) / col_sq[j]
            if new != beta[j]:
                residual += x[:, j] * (beta[j] - new)
                max_delta = max(max_delta, abs(new - beta[j]))
                beta[j] = new
        if max_delta < tol:
            return beta
    raise LassoConvergenceError(
        f"coordinate descent did not converge within {max_sweeps} sweeps (tol={tol})")


def lasso_select(train: LabeledDataset, alpha: float = 0.01,
                 target_count: int | None = None, tol: float = LASSO_TOL,
                 max_sweeps: int = LASSO_MAX_SWEEPS) -> SelectorResult:
    """Select the union of nonzero lasso coefficients across classes.

    Each class is regressed one-vs-rest with a 0/1 response; inputs are
    expected pre-scaled.  With ``target_count`` set, alpha is found by
    bisection so the selected count lands on (or nearest to) the target.
    Scores are max |coefficient| across classes.
    """
    x, y = train.matrix.values, train.labels
    n, d = x.shape

    def fit_alpha(a: float) -> np.ndarray:
        betas = np.zeros((train.n_classes, d))
        for c in range(train.n_classes):
            betas[c] = _coordinate_descent(x, (y == c).astype(np.float64), a,
                                           tol, max_sweeps)
        return betas

    if target_count is None:
        if not (alpha > 0):
            raise SelectionError(f"alpha must be positive, got {alpha}")
        betas = fit_alpha(alpha)
        used_alpha = float(alpha)
    else:
        if not (1 <= target_count <= d):
            raise SelectionError(f"target_count must lie in [1, {d}], got {target_count}")
        used_alpha, betas = _bisect_alpha(x, y, train.n_classes, target_count, fit_alpha)

    scores = np.abs(betas).max(axis=0)
    chosen = np.flatnonzero(scores > 0)
    order = chosen[_rank_descending(scores[chosen])]
    return SelectorResult(kind=SelectorKind.LASSO, selected=tuple(order), scores=scores,
                          params={"alpha": used_alpha,
                                  **({"target_count": int(target_count)}
                                     if target_count is not None else {})})


def _bisect_alpha(x: np.ndarray, y: np.ndarray, n_classes: int, target: int,
                  fit_alpha, iters: int = 40) -> tuple[float, np.ndarray]:
    n = x.shape[0]
    # above alpha_max every one-vs-rest problem solves to beta = 0
    alpha_max = max(float(np.abs(x.T @ (y == c).astype(np.float64) / n).max())
                    for c in range(n_classes))
    if alpha_max <= 0:
        raise SelectionError("all features are uncorrelated with every class")
    lo, hi = alpha_max * 1e-6, alpha_max
    best = None
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        betas = fit_alpha(mid)
        count = int((np.abs(betas).max(axis=0) > 0).sum())
        if best is None or abs(count - target) < best[0] or \
                (abs(count - target) == best[0] and mid > best[1]):
            best = (abs(count - target), mid, betas)
        if count == target:
            break
        if count > target:
            lo = mid
        else:
            hi = mid
    return best[1], best[2]


def pca_reduce(train: FeatureMatrix, k: int = 512) -> SelectorResult:
    """Project onto the top k principal components via thin SVD.

    Components follow the sign convention that each row's largest
    magnitude entry is positive.  Scores are the component variances
    (singular value squared over n - 1), stored descending.
    """
    x = train.values
    n, d = x.shape
    bound = min(n - 1, d)
    if not (1 <= k <= bound):
        raise SelectionError(f"k must lie in [1, min(n - 1, d) = {bound}], got {k}")
    center = x.mean(axis=0)
    _, s, vt = np.linalg.svd(x - center, full_matrices=False)
    components = vt[:k].copy()
    for row in components:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    variances = (s[:k] ** 2) / (n - 1)
    return SelectorResult(kind=SelectorKind.PCA, selected=(), scores=variances,
                          projection=components, center=center, params={"k": int(k)})


def apply_selection(m: FeatureMatrix, result: SelectorResult) -> FeatureMatrix:
    """Transform a matrix with a fitted selector."""
    if m.n_features != result.n_features_in:
        raise SelectionError(f"selector was fitted on {result.n_features_in} features, "
                             f"matrix has {m.n_features}")
    if result.kind == SelectorKind.PCA:
        values = (m.values - result.center) @ result.projection.T
        return FeatureMatrix(values, tuple(f"pc{i}" for i in range(values.shape[1])))
    idx = list(result.selected)
    if not idx:
        raise SelectionError("selector retained no features")
    return FeatureMatrix(m.values[:, idx], tuple(m.feature_ids[i] for i in idx))


def selector_to_dict(result: SelectorResult) -> dict:
    doc = {
        "format_version": SELECTION_VERSION,
        "kind": result.kind.value,
        "params": result.params,
        "selected": list(result.selected),
        "scores": encode_array(result.scores),
    }
    if result.kind == SelectorKind.PCA:
        doc["projection"] = encode_array(result.projection)
        doc["center"] = encode_array(result.center)
    return doc


def selector_from_dict(doc: dict) -> SelectorResult:
    version = doc.get("format_version")
    if version != SELECTION_VERSION:
        raise SelectionError(f"unsupported selector document version {version!r}")
    kind = SelectorKind(doc["kind"])
    return SelectorResult(
        kind=kind,
        selected=tuple(doc["selected"]),
        scores=decode_array(doc["scores"]),
        projection=decode_array(doc["projection"]) if kind == SelectorKind.PCA else None,
        center=decode_array(doc["center"]) if kind == SelectorKind.PCA else None,
        params=dict(doc.get("params", {})),
    )


def selector_to_json(result: SelectorResult) -> str:
    return json.dumps(selector_to_dict(result), sort_keys=True)


def selector_from_json(text: str) -> SelectorResult:
    return selector_from_dict(json.loads(text))
