"""Run configuration: strict JSON parsing with defaults.

Unknown keys anywhere in the document are errors, as are malformed
values.  Dataset paths are resolved relative to the config file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from ..metrics import AVERAGING_MODES


class ConfigError(ValueError):
    """Invalid run configuration."""


_SELECTOR_SCHEMAS: dict[str, dict[str, tuple]] = {
    # param name -> (types, default); None default means optional-without-value
    "anova": {"k": ((int,), 500)},
    "rfe": {"k": ((int,), 200), "step_fraction": ((int, float), 0.1)},
    "rf_importance": {"n_trees": ((int,), 100)},
    "lasso": {"alpha": ((int, float), 0.01), "target_count": ((int, type(None)), None)},
    "pca": {"k": ((int,), 512)},
}

_CLASSIFIER_SCHEMAS: dict[str, dict[str, tuple]] = {
    "knn": {"k": ((int,), 5)},
    "svm": {"kernel": ((str,), "rbf"), "C": ((int, float), 1.0),
            "gamma": ((int, float, type(None)), None)},
    "random_forest": {"n_trees": ((int,), 100), "bootstrap": ((bool,), True)},
    "naive_bayes": {},
}

_CLASSIFIER_LABELS = {
    "knn": "K-NN",
    "svm": "SVM",
    "random_forest": "Random Forest",
    "naive_bayes": "Naive Bayes",
}

_SELECTOR_LABELS = {
    "anova": "ANOVA",
    "rfe": "RFE",
    "rf_importance": "Random Forest",
    "lasso": "Lasso",
    "pca": "PCA",
}


def _key_of(method: str, params: dict) -> str:
    shown = {k: v for k, v in params.items() if v is not None}
    inner = ",".join(f"{k}={shown[k]}" for k in sorted(shown))
    return f"{method}({inner})"


@dataclass(frozen=True)
class SelectorConfig:
    method: str
    params: dict = field(default_factory=dict)

    @property
    def key(self) -> str:
        return _key_of(self.method, self.params)

    @property
    def label(self) -> str:
        return _SELECTOR_LABELS[self.method]


@dataclass(frozen=True)
class ClassifierConfig:
    method: str
    params: dict = field(default_factory=dict)

    @property
    def key(self) -> str:
        return _key_of(self.method, self.params)

    @property
    def label(self) -> str:
        return _CLASSIFIER_LABELS[self.method]


@dataclass(frozen=True)
class EnsembleConfig:
    mode: str
    members: str | tuple[str, ...] = "best_per_model"
    weights: tuple[float, ...] | None = None
    tie_break: str = "lowest_index"


@dataclass(frozen=True)
class RunConfig:
    datasets: dict[str, Path]
    test_fraction: float
    seed: int | None
    selectors: tuple[SelectorConfig, ...]
    classifiers: tuple[ClassifierConfig, ...]
    ensemble: EnsembleConfig | None
    averaging: str
    output_dir: Path
    cache_dir: Path
    leakage_check: bool
    cache_selectors: bool
    cache_classifiers: bool


def _require_keys(obj: dict, allowed: set[str], required: set[str], where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {sorted(unknown)}")
    missing = required - set(obj)
    if missing:
        raise ConfigError(f"{where}: missing key(s) {sorted(missing)}")


def _parse_stage(entry, schemas: dict, where: str):
    if not isinstance(entry, dict):
        raise ConfigError(f"{where}: each entry must be an object")
    if "method" not in entry:
        raise ConfigError(f"{where}: missing 'method'")
    method = entry["method"]
    if method not in schemas:
        raise ConfigError(f"{where}: unknown method '{method}', expected one of "
                          f"{sorted(schemas)}")
    schema = schemas[method]
    params = {}
    for key, value in entry.items():
        if key == "method":
            continue
        if key not in schema:
            raise ConfigError(f"{where}: method '{method}' does not accept '{key}'")
        types, _ = schema[key]
        if isinstance(value, bool) and bool not in types:
            raise ConfigError(f"{where}: '{key}' has wrong type bool")
        if not isinstance(value, types):
            raise ConfigError(f"{where}: '{key}' must be of type "
                              f"{'/'.join(t.__name__ for t in types)}, got {type(value).__name__}")
        params[key] = value
    for key, (_, default) in schema.items():
        params.setdefault(key, default)
    # a lasso target count replaces the alpha default
    if method == "lasso" and params.get("target_count") is not None:
        params["alpha"] = None
    return method, params


def parse_config(doc: dict, base_dir: Path | None = None) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    base = Path(base_dir) if base_dir is not None else Path.cwd()
    allowed = {"datasets", "split", "selectors", "classifiers", "ensemble", "averaging",
               "output_dir", "cache_dir", "leakage_check", "cache_selectors",
               "cache_classifiers"}
    _require_keys(doc, allowed, {"datasets", "split", "selectors", "classifiers"}, "config")

    datasets_doc = doc["datasets"]
    if not isinstance(datasets_doc, dict) or not datasets_doc:
        raise ConfigError("config: 'datasets' must be a non-empty object of "
                          "model name -> csv path")
    datasets = {}
    for name, path in datasets_doc.items():
        if not isinstance(path, str):
            raise ConfigError(f"config: dataset '{name}' path must be a string")
        p = Path(path)
        datasets[str(name)] = p if p.is_absolute() else base / p

    split_doc = doc["split"]
    if not isinstance(split_doc, dict):
        raise ConfigError("config: 'split' must be an object")
    _require_keys(split_doc, {"test_fraction", "seed"}, {"test_fraction"}, "config split")
    test_fraction = split_doc["test_fraction"]
    if isinstance(test_fraction, bool) or not isinstance(test_fraction, (int, float)):
        raise ConfigError("config split: 'test_fraction' must be a number")
    if not (0.0 < float(test_fraction) < 1.0):
        raise ConfigError(f"config split: test_fraction must lie in (0, 1), "
                          f"got {test_fraction}")
    seed = split_doc.get("seed")
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int)
                             or not 0 <= seed < 2 ** 64):
        raise ConfigError(f"config split: seed must be an unsigned 64-bit integer, "
                          f"got {seed!r}")

    selectors_doc = doc["selectors"]
    if not isinstance(selectors_doc, list) or not selectors_doc:
        raise ConfigError("config: 'selectors' must be a non-empty list")
    selectors = tuple(SelectorConfig(*_parse_stage(e, _SELECTOR_SCHEMAS,
                                                   f"config selectors[{i}]"))
                      for i, e in enumerate(selectors_doc))
    if len({s.key for s in selectors}) != len(selectors):
        raise ConfigError("config: duplicate selector entries")

    classifiers_doc = doc["classifiers"]
    if not isinstance(classifiers_doc, list) or not classifiers_doc:
        raise ConfigError("config: 'classifiers' must be a non-empty list")
    classifiers = tuple(ClassifierConfig(*_parse_stage(e, _CLASSIFIER_SCHEMAS,
                                                       f"config classifiers[{i}]"))
                        for i, e in enumerate(classifiers_doc))
    if len({c.key for c in classifiers}) != len(classifiers):
        raise ConfigError("config: duplicate classifier entries")

    ensemble = None
    if doc.get("ensemble") is not None:
        e = doc["ensemble"]
        if not isinstance(e, dict):
            raise ConfigError("config: 'ensemble' must be an object or null")
        _require_keys(e, {"mode", "members", "weights", "tie_break"}, {"mode"},
                      "config ensemble")
        mode = e["mode"]
        if mode not in ("hard", "soft"):
            raise ConfigError(f"config ensemble: mode must be 'hard' or 'soft', "
                              f"got '{mode}'")
        members = e.get("members", "best_per_model")
        if isinstance(members, list):
            if not members or any(not isinstance(m, str) for m in members):
                raise ConfigError("config ensemble: members list must hold cell id strings")
            members = tuple(members)
        elif members != "best_per_model":
            raise ConfigError("config ensemble: members must be 'best_per_model' "
                              "or a list of cell ids")
        weights = e.get("weights")
        if weights is not None:
            if (not isinstance(weights, list)
                    or any(isinstance(w, bool) or not isinstance(w, (int, float))
                           or w <= 0 for w in weights)):
                raise ConfigError("config ensemble: weights must be positive numbers")
            weights = tuple(float(w) for w in weights)
        tie_break = e.get("tie_break", "lowest_index")
        if tie_break not in ("lowest_index", "score_sum"):
            raise ConfigError(f"config ensemble: unknown tie_break '{tie_break}'")
        ensemble = EnsembleConfig(mode=mode, members=members, weights=weights,
                                  tie_break=tie_break)

    averaging = doc.get("averaging", "weighted")
    if averaging not in AVERAGING_MODES:
        raise ConfigError(f"config: averaging must be one of {AVERAGING_MODES}, "
                          f"got '{averaging}'")

    out = doc.get("output_dir", "out")
    if not isinstance(out, str):
        raise ConfigError("config: 'output_dir' must be a string")
    output_dir = Path(out) if Path(out).is_absolute() else base / out
    cache = doc.get("cache_dir")
    if cache is not None and not isinstance(cache, str):
        raise ConfigError("config: 'cache_dir' must be a string")
    cache_dir = (Path(cache) if Path(cache).is_absolute() else base / cache) \
        if cache is not None else output_dir / "cache"

    flags = {}
    for name, default in (("leakage_check", True), ("cache_selectors", True),
                          ("cache_classifiers", False)):
        v = doc.get(name, default)
        if not isinstance(v, bool):
            raise ConfigError(f"config: '{name}' must be a boolean")
        flags[name] = v

    return RunConfig(datasets=datasets, test_fraction=float(test_fraction), seed=seed,
                     selectors=selectors, classifiers=classifiers, ensemble=ensemble,
                     averaging=averaging, output_dir=output_dir, cache_dir=cache_dir,
                     leakage_check=flags["leakage_check"],
                     cache_selectors=flags["cache_selectors"],
                     cache_classifiers=flags["cache_classifiers"])


def load_config(path) -> RunConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"no such config file {p}")
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{p}: invalid JSON: {e}") from e
    return parse_config(doc, base_dir=p.parent)


def config_fingerprint(cfg: RunConfig, seed: int) -> str:
    """Stable hash of the resolved configuration plus the effective seed."""
    import hashlib

    doc = {
        "datasets": {k: str(v) for k, v in cfg.datasets.items()},
        "test_fraction": cfg.test_fraction,
        "seed": seed,
        "selectors": [{"method": s.method, "params": {k: v for k, v in s.params.items()}}
                      for s in cfg.selectors],
        "classifiers": [{"method": c.method, "params": {k: v for k, v in c.params.items()}}
                        for c in cfg.classifiers],
        "ensemble": None if cfg.ensemble is None else {
            "mode": cfg.ensemble.mode,
            "members": list(cfg.ensemble.members) if isinstance(cfg.ensemble.members, tuple)
            else cfg.ensemble.members,
            "weights": None if cfg.ensemble.weights is None else list(cfg.ensemble.weights),
            "tie_break": cfg.ensemble.tie_break,
        },
        "averaging": cfg.averaging,
    }
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()
