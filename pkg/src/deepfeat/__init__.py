"""Feature selection and classification toolkit for deep CNN features.

The package consumes feature CSVs (with JSON manifests) produced by an
upstream extractor, reduces them with one of five selection methods,
and evaluates four classifiers per selection, reporting accuracy,
precision, recall and F1 per cell of the grid.
"""

__version__ = "0.1.0"

from .datasets import (
    DatasetError,
    FeatureMatrix,
    LabeledDataset,
    ScalerParams,
    SplitSpec,
    apply_scaler,
    load_feature_csv,
    load_manifest,
    minmax_scale,
    save_feature_csv,
    stratified_split,
    stratified_split_indices,
)
from .metrics import (
    ConfusionMatrix,
    MetricRow,
    MetricsError,
    classification_report,
    confusion_matrix,
    format_metric,
    per_class_metrics,
)
from .selection import (
    LassoConvergenceError,
    SelectionError,
    SelectorResult,
    anova_select,
    apply_selection,
    lasso_select,
    pca_reduce,
    rf_importance_select,
    rfe_select,
)
from .classifiers import (
    ClassifierError,
    ConvergenceError,
    KNNClassifier,
    GaussianNBClassifier,
    RandomForestClassifier,
    SVMClassifier,
    make_classifier,
)
from .ensemble import (
    EnsembleError,
    VoteInput,
    VoteMember,
    hard_vote,
    soft_vote,
    soft_vote_scores,
)
from .pipeline import (
    ConfigError,
    EvaluationReport,
    LeakageError,
    RunConfig,
    emit_report,
    load_config,
    run_grid,
)

__all__ = [
    "__version__",
    "DatasetError", "FeatureMatrix", "LabeledDataset", "ScalerParams", "SplitSpec",
    "apply_scaler", "load_feature_csv", "load_manifest", "minmax_scale",
    "save_feature_csv", "stratified_split", "stratified_split_indices",
    "ConfusionMatrix", "MetricRow", "MetricsError", "classification_report",
    "confusion_matrix", "format_metric", "per_class_metrics",
    "LassoConvergenceError", "SelectionError", "SelectorResult", "anova_select",
    "apply_selection", "lasso_select", "pca_reduce", "rf_importance_select",
    "rfe_select",
    "ClassifierError", "ConvergenceError", "KNNClassifier", "GaussianNBClassifier",
    "RandomForestClassifier", "SVMClassifier", "make_classifier",
    "EnsembleError", "VoteInput", "VoteMember", "hard_vote", "soft_vote",
    "soft_vote_scores",
    "ConfigError", "EvaluationReport", "LeakageError", "RunConfig", "emit_report",
    "load_config", "run_grid",
]
