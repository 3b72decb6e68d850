"""Evaluation pipeline: configuration, grid runner, and report emission."""

from .config import (
    ConfigError,
    RunConfig,
    SelectorConfig,
    ClassifierConfig,
    EnsembleConfig,
    load_config,
    parse_config,
)
from .runner import (
    CellResult,
    EvaluationReport,
    LeakageError,
    LeakageGuard,
    PipelineIOError,
    derive_seed,
    run_grid,
)
from .reporting import emit_report, REPORT_FORMATS

__all__ = [
    "CellResult",
    "ClassifierConfig",
    "ConfigError",
    "EnsembleConfig",
    "EvaluationReport",
    "LeakageError",
    "LeakageGuard",
    "PipelineIOError",
    "REPORT_FORMATS",
    "RunConfig",
    "SelectorConfig",
    "derive_seed",
    "emit_report",
    "load_config",
    "parse_config",
    "run_grid",
]
