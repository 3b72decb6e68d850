"""Grid runner: scale, select, classify, and evaluate per cell.

For every dataset the runner splits once per seed, fits the scaler on
the training rows only, then evaluates each selector x classifier cell
independently: a failing cell records its error and never aborts the
grid.  All cell randomness derives from (seed, cell key), so results do
not depend on scheduling.  Fitted selectors are cached on disk keyed by
(model, selector, params, seed, data hash), and per-cell predictions
are persisted so ensembles can be recombined without re-running.
"""

from __future__ import annotations

import hashlib
import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from ..classifiers import classifier_from_dict, classifier_to_dict, make_classifier
from ..datasets import (
    DatasetError,
    LabeledDataset,
    SplitSpec,
    apply_scaler,
    load_feature_csv,
    minmax_scale,
    stratified_split_indices,
)
from ..ensemble import EnsembleError, VoteInput, VoteMember, hard_vote, soft_vote
from ..metrics import MetricRow, classification_report, confusion_matrix
from ..selection import (
    SelectorResult,
    anova_select,
    apply_selection,
    lasso_select,
    pca_reduce,
    rf_importance_select,
    rfe_select,
    selector_from_dict,
    selector_to_dict,
)
from .config import ClassifierConfig, EnsembleConfig, RunConfig, SelectorConfig, \
    config_fingerprint


class PipelineIOError(OSError):
    """Failed to read or write a pipeline artifact."""


class LeakageError(RuntimeError):
    """A fit routine was handed rows from the test split."""


def derive_seed(*parts) -> int:
    """Stable 64-bit seed from the run seed and a cell key."""
    text = ":".join(str(p) for p in parts)
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "big")


class LeakageGuard:
    """Checks that matrices handed to fit routines hold no test rows.

    Test-side matrices are registered per pipeline stage; before every
    fit the training matrix is checked by row count and row content.
    Row content comparison can flag datasets holding duplicate rows
    across the two splits, which is worth surfacing anyway; the check
    can be disabled in the run config.
    """

    def __init__(self, enabled: bool, n_train: int):
        self.enabled = enabled
        self.n_train = n_train
        self._stages: dict[str, frozenset] = {}

    @staticmethod
    def _row_digests(arr: np.ndarray) -> frozenset:
        a = np.ascontiguousarray(arr)
        return frozenset(hashlib.sha1(a[i].tobytes()).digest() for i in range(a.shape[0]))

    def register(self, stage: str, test_values: np.ndarray) -> None:
        if self.enabled:
            self._stages[stage] = self._row_digests(test_values)

    def check_fit(self, stage: str, train_values: np.ndarray, context: str) -> None:
        if not self.enabled:
            return
        if train_values.shape[0] != self.n_train:
            raise LeakageError(f"{context}: fit received {train_values.shape[0]} rows, "
                               f"train split has {self.n_train}")
        test_rows = self._stages.get(stage)
        if test_rows and not test_rows.isdisjoint(self._row_digests(train_values)):
            raise LeakageError(f"{context}: fit input contains test split rows")


@dataclass
class CellResult:
    model: str
    selector: SelectorConfig
    classifier: ClassifierConfig | None
    n_selected: int | None = None
    metrics: MetricRow | None = None
    error: str | None = None

    @property
    def cell_id(self) -> str:
        clf_key = self.classifier.key if self.classifier else "-"
        return f"{self.model}/{self.selector.key}/{clf_key}"

    @property
    def ok(self) -> bool:
        return self.error is None

    def selector_display(self) -> str:
        if self.n_selected is not None:
            return f"{self.selector.label}({self.n_selected})"
        return self.selector.label


@dataclass
class ModelSummary:
    model: str
    n_features: int
    n_train: int
    n_test: int
    best_cell: CellResult | None


@dataclass
class EnsembleOutcome:
    mode: str
    member_cell_ids: tuple[str, ...]
    weights: tuple[float, ...] | None
    tie_break: str
    metrics: MetricRow | None = None
    error: str | None = None


@dataclass
class EvaluationReport:
    rows: list[CellResult]
    summaries: list[ModelSummary]
    ensemble: EnsembleOutcome | None
    provenance: dict

    def to_dict(self) -> dict:
        def metrics_dict(m: MetricRow | None):
            if m is None:
                return None
            return {"accuracy": m.accuracy, "precision": m.precision,
                    "recall": m.recall, "f1": m.f1, "averaging": m.averaging,
                    "support": list(m.support)}

        return {
            "provenance": self.provenance,
            "rows": [{
                "model": r.model,
                "selector_method": r.selector.method,
                "selector_params": dict(r.selector.params),
                "selector_key": r.selector.key,
                "selector_label": r.selector_display(),
                "classifier_method": r.classifier.method if r.classifier else None,
                "classifier_params": dict(r.classifier.params) if r.classifier else None,
                "classifier_key": r.classifier.key if r.classifier else None,
                "classifier_label": r.classifier.label if r.classifier else None,
                "cell_id": r.cell_id,
                "n_selected": r.n_selected,
                "status": "ok" if r.ok else "error",
                "error": r.error,
                "metrics": metrics_dict(r.metrics),
            } for r in self.rows],
            "summaries": [{
                "model": s.model,
                "n_features": s.n_features,
                "n_train": s.n_train,
                "n_test": s.n_test,
                "best_cell": None if s.best_cell is None else s.best_cell.cell_id,
                "best_selector_label": None if s.best_cell is None
                else s.best_cell.selector_display(),
                "best_classifier_label": None if s.best_cell is None
                else s.best_cell.classifier.label,
                "metrics": metrics_dict(None if s.best_cell is None
                                        else s.best_cell.metrics),
            } for s in self.summaries],
            "ensemble": None if self.ensemble is None else {
                "mode": self.ensemble.mode,
                "members": list(self.ensemble.member_cell_ids),
                "weights": None if self.ensemble.weights is None
                else list(self.ensemble.weights),
                "tie_break": self.ensemble.tie_break,
                "status": "ok" if self.ensemble.error is None else "error",
                "error": self.ensemble.error,
                "metrics": metrics_dict(self.ensemble.metrics),
            },
        }


def _sanitize(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", name)


def _fit_selector(sel: SelectorConfig, train: LabeledDataset, seed: int) -> SelectorResult:
    p = sel.params
    if sel.method == "anova":
        return anova_select(train, k=p["k"])
    if sel.method == "rfe":
        return rfe_select(train, k=p["k"], step_fraction=p["step_fraction"])
    if sel.method == "rf_importance":
        return rf_importance_select(train, seed=seed, n_trees=p["n_trees"])
    if sel.method == "lasso":
        if p.get("target_count") is not None:
            return lasso_select(train, target_count=p["target_count"])
        return lasso_select(train, alpha=p["alpha"])
    if sel.method == "pca":
        return pca_reduce(train.matrix, k=p["k"])
    raise ValueError(f"unknown selector method '{sel.method}'")


def _selector_cache_path(cache_dir: Path, model: str, sel: SelectorConfig,
                         cache_key: str) -> Path:
    h = hashlib.sha256(cache_key.encode()).hexdigest()[:16]
    return cache_dir / "selectors" / f"{_sanitize(model)}__{_sanitize(sel.method)}__{h}.json"


def _load_or_fit_selector(cfg: RunConfig, model: str, sel: SelectorConfig,
                          train: LabeledDataset, seed: int,
                          data_hash: str) -> SelectorResult:
    sel_seed = derive_seed(seed, model, sel.key)
    cache_key = f"{model}|{sel.key}|{seed}|{data_hash}"
    path = _selector_cache_path(cfg.cache_dir, model, sel, cache_key)
    if cfg.cache_selectors and path.exists():
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
            if doc.get("cache_key") == cache_key:
                return selector_from_dict(doc["selector"])
        except (OSError, ValueError):
            pass  # unreadable or stale cache entries are refitted
    result = _fit_selector(sel, train, sel_seed)
    if cfg.cache_selectors:
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(json.dumps({"cache_key": cache_key,
                                        "selector": selector_to_dict(result)},
                                       sort_keys=True), encoding="utf-8")
        except OSError as e:
            raise PipelineIOError(f"cannot write selector cache {path}: {e}") from e
    return result


def predictions_path(cache_dir: Path, cell_id: str) -> Path:
    h = hashlib.sha256(cell_id.encode()).hexdigest()[:16]
    return cache_dir / "predictions" / f"{_sanitize(cell_id)[:80]}__{h}.json"


def _write_predictions(cfg: RunConfig, cell_id: str, test: LabeledDataset,
                       labels: np.ndarray, scores: np.ndarray) -> None:
    path = predictions_path(cfg.cache_dir, cell_id)
    doc = {
        "cell_id": cell_id,
        "ids": list(test.ids),
        "n_classes": test.n_classes,
        "class_names": list(test.class_names),
        "y_true": [int(v) for v in test.labels],
        "labels": [int(v) for v in labels],
        "scores": [[float(v) for v in row] for row in scores],
    }
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(doc, sort_keys=True), encoding="utf-8")
    except OSError as e:
        raise PipelineIOError(f"cannot write predictions {path}: {e}") from e


def _classifier_cache_path(cache_dir: Path, cell_id: str, cache_key: str) -> Path:
    h = hashlib.sha256(cache_key.encode()).hexdigest()[:16]
    return cache_dir / "classifiers" / f"{_sanitize(cell_id)[:80]}__{h}.json"


def _load_or_fit_classifier(cfg: RunConfig, cell_id: str, clf_cfg: ClassifierConfig,
                            train_sel: LabeledDataset, seed: int, data_hash: str):
    params = dict(clf_cfg.params)
    if clf_cfg.method == "random_forest":
        params["seed"] = seed
    cache_key = f"{cell_id}|{seed}|{data_hash}"
    path = _classifier_cache_path(cfg.cache_dir, cell_id, cache_key)
    if cfg.cache_classifiers and path.exists():
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
            if doc.get("cache_key") == cache_key:
                return classifier_from_dict(doc["classifier"])
        except (OSError, ValueError):
            pass
    clf = make_classifier(clf_cfg.method, params)
    clf.fit(train_sel)
    if cfg.cache_classifiers:
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(json.dumps({"cache_key": cache_key,
                                        "classifier": classifier_to_dict(clf)},
                                       sort_keys=True), encoding="utf-8")
        except OSError as e:
            raise PipelineIOError(f"cannot write classifier cache {path}: {e}") from e
    return clf


def _run_cell(cfg: RunConfig, model: str, sel: SelectorConfig, clf_cfg: ClassifierConfig,
              train_sel: LabeledDataset, test_sel: LabeledDataset, seed: int,
              guard: LeakageGuard, n_selected: int | None) -> CellResult:
    cell = CellResult(model=model, selector=sel, classifier=clf_cfg,
                      n_selected=n_selected)
    try:
        guard.check_fit(f"{model}/{sel.key}", train_sel.matrix.values,
                        f"cell {cell.cell_id}")
        cell_seed = derive_seed(seed, model, sel.key, clf_cfg.key)
        data_hash = hashlib.sha256(train_sel.matrix.values.tobytes()
                                   + train_sel.labels.tobytes()).hexdigest()[:16]
        clf = _load_or_fit_classifier(cfg, cell.cell_id, clf_cfg, train_sel,
                                      cell_seed, data_hash)
        scores = clf.predict_scores(test_sel.matrix)
        labels = np.argmax(scores, axis=1)
        cm = confusion_matrix(test_sel.labels, labels, test_sel.n_classes)
        cell.metrics = classification_report(cm, averaging=cfg.averaging)
        _write_predictions(cfg, cell.cell_id, test_sel, labels, scores)
    except (PipelineIOError, LeakageError):
        raise
    except Exception as e:
        cell.error = f"{type(e).__name__}: {e}"
    return cell


def _run_selector_block(cfg: RunConfig, model: str, sel: SelectorConfig,
                        train: LabeledDataset, test: LabeledDataset, seed: int,
                        guard: LeakageGuard, data_hash: str) -> list[CellResult]:
    try:
        guard.check_fit("scaled", train.matrix.values, f"selector {model}/{sel.key}")
        result = _load_or_fit_selector(cfg, model, sel, train, seed, data_hash)
        train_sel = LabeledDataset(apply_selection(train.matrix, result), train.labels,
                                   train.class_names, train.ids)
        test_sel = LabeledDataset(apply_selection(test.matrix, result), test.labels,
                                  test.class_names, test.ids)
    except (PipelineIOError, LeakageError):
        raise
    except Exception as e:
        msg = f"{type(e).__name__}: {e}"
        return [CellResult(model=model, selector=sel, classifier=c, error=msg)
                for c in cfg.classifiers]
    guard.register(f"{model}/{sel.key}", test_sel.matrix.values)
    n_selected = result.n_features_out
    return [_run_cell(cfg, model, sel, c, train_sel, test_sel, seed, guard, n_selected)
            for c in cfg.classifiers]


def run_grid(cfg: RunConfig, seed: int | None = None, jobs: int = 1) -> EvaluationReport:
    """Evaluate the full model x selector x classifier grid."""
    if seed is None:
        seed = cfg.seed if cfg.seed is not None else 0
    rows: list[CellResult] = []
    summaries: list[ModelSummary] = []
    predictions_ready: set[str] = set()

    for model, path in cfg.datasets.items():
        try:
            ds = load_feature_csv(path)
            train_idx, test_idx = stratified_split_indices(
                ds.labels, ds.n_classes, SplitSpec(cfg.test_fraction, seed))
            train, test = ds.take(train_idx), ds.take(test_idx)
            scaler, train_scaled = minmax_scale(train.matrix, train.matrix)
            test_scaled = apply_scaler(scaler, test.matrix)
        except (DatasetError, ValueError) as e:
            msg = f"{type(e).__name__}: {e}"
            rows.extend(CellResult(model=model, selector=s, classifier=c, error=msg)
                        for s in cfg.selectors for c in cfg.classifiers)
            summaries.append(ModelSummary(model=model, n_features=0, n_train=0,
                                          n_test=0, best_cell=None))
            continue

        guard = LeakageGuard(cfg.leakage_check, n_train=train.matrix.n_rows)
        guard.register("scaled", test_scaled.values)
        train_s = LabeledDataset(train_scaled, train.labels, train.class_names, train.ids)
        test_s = LabeledDataset(test_scaled, test.labels, test.class_names, test.ids)
        data_hash = hashlib.sha256(
            train_scaled.values.tobytes() + train.labels.tobytes()).hexdigest()[:16]

        blocks = [(sel,) for sel in cfg.selectors]
        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(
                    lambda b: _run_selector_block(cfg, model, b[0], train_s, test_s,
                                                  seed, guard, data_hash), blocks))
        else:
            results = [_run_selector_block(cfg, model, b[0], train_s, test_s, seed,
                                           guard, data_hash) for b in blocks]
        model_rows = [cell for block in results for cell in block]
        rows.extend(model_rows)
        predictions_ready.update(c.cell_id for c in model_rows if c.ok)

        best = None
        for cell in model_rows:
            if cell.ok and (best is None or cell.metrics.accuracy > best.metrics.accuracy):
                best = cell
        summaries.append(ModelSummary(model=model, n_features=ds.matrix.n_features,
                                      n_train=train.matrix.n_rows,
                                      n_test=test.matrix.n_rows, best_cell=best))

    ensemble = None
    if cfg.ensemble is not None:
        ensemble = evaluate_ensemble(cfg, rows, cfg.ensemble)

    provenance = {
        "seed": seed,
        "config_hash": config_fingerprint(cfg, seed),
        "package_version": __version__,
        "averaging": cfg.averaging,
        "n_cells": len(rows),
    }
    return EvaluationReport(rows=rows, summaries=summaries, ensemble=ensemble,
                            provenance=provenance)


def _resolve_members(spec: EnsembleConfig, rows: list[CellResult]) -> list[CellResult]:
    ok_rows = [r for r in rows if r.ok]
    if spec.members == "best_per_model":
        members = []
        seen = []
        for r in rows:
            if r.model not in seen:
                seen.append(r.model)
        for model in seen:
            candidates = [r for r in ok_rows if r.model == model]
            if not candidates:
                raise EnsembleError(f"model '{model}' has no successful cells")
            members.append(max(candidates, key=lambda r: r.metrics.accuracy))
        return members
    members = []
    for pattern in spec.members:
        parts = pattern.split("/")
        if len(parts) != 3:
            raise EnsembleError(f"member '{pattern}' is not model/selector/classifier")
        m, s, c = parts
        matches = [r for r in ok_rows
                   if r.model == m
                   and (r.selector.key == s or r.selector.method == s)
                   and (r.classifier.key == c or r.classifier.method == c)]
        if len(matches) != 1:
            raise EnsembleError(f"member '{pattern}' matches {len(matches)} cells, "
                                f"expected exactly 1")
        members.append(matches[0])
    return members


def evaluate_ensemble(cfg: RunConfig, rows: list[CellResult],
                      spec: EnsembleConfig) -> EnsembleOutcome:
    """Vote the configured members using their persisted predictions."""
    try:
        members = _resolve_members(spec, rows)
        docs = []
        for cell in members:
            path = predictions_path(cfg.cache_dir, cell.cell_id)
            if not path.exists():
                raise EnsembleError(f"no persisted predictions for {cell.cell_id}")
            docs.append(json.loads(path.read_text(encoding="utf-8")))
        base = docs[0]
        for doc in docs[1:]:
            if doc["ids"] != base["ids"] or doc["y_true"] != base["y_true"]:
                raise EnsembleError(
                    f"members disagree on the evaluation rows: {doc['cell_id']} "
                    f"vs {base['cell_id']}")
        if spec.weights is not None and len(spec.weights) != len(members):
            raise EnsembleError(f"{len(spec.weights)} weights for {len(members)} members")
        vote = VoteInput(
            members=tuple(VoteMember(member_id=d["cell_id"],
                                     labels=np.array(d["labels"]),
                                     scores=np.array(d["scores"])) for d in docs),
            weights=spec.weights,
            n_classes=base["n_classes"])
        if spec.mode == "hard":
            labels = hard_vote(vote, tie_break=spec.tie_break)
        else:
            labels = soft_vote(vote)
        cm = confusion_matrix(np.array(base["y_true"]), labels, base["n_classes"])
        metrics = classification_report(cm, averaging=cfg.averaging)
        return EnsembleOutcome(mode=spec.mode,
                               member_cell_ids=tuple(c.cell_id for c in members),
                               weights=spec.weights, tie_break=spec.tie_break,
                               metrics=metrics)
    except (EnsembleError, OSError, ValueError) as e:
        return EnsembleOutcome(mode=spec.mode, member_cell_ids=(),
                               weights=spec.weights, tie_break=spec.tie_break,
                               error=f"{type(e).__name__}: {e}")
