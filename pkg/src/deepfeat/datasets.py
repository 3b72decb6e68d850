"""Feature matrix ingestion, MinMax scaling, and stratified splitting.

The on-disk interchange format is a UTF-8 CSV with LF line endings and
header ``id,label,f0,...,f{d-1}`` plus a JSON sidecar manifest named
``<basename>.manifest.json`` that carries the extractor model name, the
feature dimension, the ordered class list, the image size, and the
extractor version.  Label strings in the CSV are resolved to integer
labels through the manifest's ``class_names`` order.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

KNOWN_EXTRACTORS = ("resnet101", "vgg19", "inceptionv3", "densenet121", "mobilenetv2")

_MANIFEST_FIELDS = ("extractor_model", "feature_dim", "class_names", "image_size", "extractor_version")


class DatasetError(ValueError):
    """Malformed feature CSV, manifest, or inconsistent dataset contents."""


@dataclass(frozen=True)
class FeatureMatrix:
    """Immutable n x d matrix of finite float64 features with column ids.

    ``feature_ids`` defaults to the interchange header names f0..f{d-1}.
    """

    values: np.ndarray
    feature_ids: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        arr = np.array(self.values, dtype=np.float64, copy=True)
        if arr.ndim != 2:
            raise DatasetError(f"feature matrix must be 2-D, got shape {arr.shape}")
        n, d = arr.shape
        if n < 1 or d < 1:
            raise DatasetError(f"feature matrix must have n >= 1 and d >= 1, got {n}x{d}")
        if not np.isfinite(arr).all():
            r, c = np.argwhere(~np.isfinite(arr))[0]
            raise DatasetError(f"non-finite feature value at row {r}, column {c}")
        ids = tuple(f"f{j}" for j in range(d)) if self.feature_ids is None \
            else tuple(str(x) for x in self.feature_ids)
        if len(ids) != d:
            raise DatasetError(f"got {len(ids)} feature ids for {d} columns")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "feature_ids", ids)

    @property
    def n_rows(self) -> int:
        return int(self.values.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.values.shape[1])


@dataclass(frozen=True)
class LabeledDataset:
    """A feature matrix with integer labels and the ordered class names.

    ``ids`` are per-row identifiers carried from the CSV, used for
    aligning predictions across datasets extracted from the same images.
    """

    matrix: FeatureMatrix
    labels: np.ndarray
    class_names: tuple[str, ...]
    ids: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        labels = np.array(self.labels, dtype=np.int64, copy=True)
        n = self.matrix.n_rows
        if labels.shape != (n,):
            raise DatasetError(f"expected {n} labels, got shape {labels.shape}")
        names = tuple(str(c) for c in self.class_names)
        if len(names) < 2:
            raise DatasetError("need at least 2 classes")
        if len(set(names)) != len(names):
            raise DatasetError("class names must be unique")
        if labels.size and (labels.min() < 0 or labels.max() >= len(names)):
            raise DatasetError(f"labels must lie in [0, {len(names)}), got range "
                               f"[{labels.min()}, {labels.max()}]")
        ids = tuple(str(i) for i in self.ids) if self.ids else tuple(f"row{i}" for i in range(n))
        if len(ids) != n:
            raise DatasetError(f"expected {n} row ids, got {len(ids)}")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "class_names", names)
        object.__setattr__(self, "ids", ids)

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)

    def take(self, indices: np.ndarray) -> "LabeledDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(
            matrix=FeatureMatrix(self.matrix.values[idx], self.matrix.feature_ids),
            labels=self.labels[idx],
            class_names=self.class_names,
            ids=tuple(self.ids[i] for i in idx),
        )


@dataclass(frozen=True)
class ScalerParams:
    """Per-column minima and maxima fitted on training rows only."""

    mins: np.ndarray
    maxs: np.ndarray

    def __post_init__(self) -> None:
        mins = np.array(self.mins, dtype=np.float64, copy=True)
        maxs = np.array(self.maxs, dtype=np.float64, copy=True)
        if mins.ndim != 1 or mins.shape != maxs.shape:
            raise DatasetError("mins and maxs must be 1-D arrays of equal length")
        if not (np.isfinite(mins).all() and np.isfinite(maxs).all()):
            raise DatasetError("scaler bounds must be finite")
        if (mins > maxs).any():
            j = int(np.argmax(mins > maxs))
            raise DatasetError(f"min exceeds max for column {j}")
        mins.setflags(write=False)
        maxs.setflags(write=False)
        object.__setattr__(self, "mins", mins)
        object.__setattr__(self, "maxs", maxs)


@dataclass(frozen=True)
class SplitSpec:
    """Test fraction in (0, 1) and a 64-bit seed for the split shuffle."""

    test_fraction: float
    seed: int = 0

    def __post_init__(self) -> None:
        f = float(self.test_fraction)
        if not (0.0 < f < 1.0):
            raise DatasetError(f"test_fraction must lie in (0, 1), got {f}")
        s = int(self.seed)
        if not (0 <= s < 2 ** 64):
            raise DatasetError(f"seed must be an unsigned 64-bit integer, got {s}")
        object.__setattr__(self, "test_fraction", f)
        object.__setattr__(self, "seed", s)


def load_manifest(csv_path: str | os.PathLike) -> dict:
    """Read and validate the sidecar manifest for a feature CSV."""
    p = Path(csv_path)
    mpath = p.with_name(p.stem + ".manifest.json")
    if not mpath.exists():
        raise DatasetError(f"missing manifest {mpath}")
    try:
        manifest = json.loads(mpath.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise DatasetError(f"invalid JSON in {mpath}: {e}") from e
    if not isinstance(manifest, dict):
        raise DatasetError(f"manifest {mpath} must be a JSON object")
    for field_name in _MANIFEST_FIELDS:
        if field_name not in manifest:
            raise DatasetError(f"manifest {mpath} missing field '{field_name}'")
    model = manifest["extractor_model"]
    if model not in KNOWN_EXTRACTORS:
        raise DatasetError(f"manifest {mpath}: unknown extractor_model '{model}', "
                           f"expected one of {', '.join(KNOWN_EXTRACTORS)}")
    d = manifest["feature_dim"]
    if not isinstance(d, int) or d < 1:
        raise DatasetError(f"manifest {mpath}: feature_dim must be a positive integer, got {d!r}")
    names = manifest["class_names"]
    if (not isinstance(names, list) or len(names) < 2
            or any(not isinstance(c, str) for c in names) or len(set(names)) != len(names)):
        raise DatasetError(f"manifest {mpath}: class_names must list at least 2 unique strings")
    return manifest


def load_feature_csv(path: str | os.PathLike) -> LabeledDataset:
    """Load a feature CSV plus its manifest into a LabeledDataset.

    Row order follows file order.  Errors name the offending data row
    (1-based, header excluded) and column.
    """
    p = Path(path)
    if not p.exists():
        raise DatasetError(f"no such file {p}")
    manifest = load_manifest(p)
    d = manifest["feature_dim"]
    class_names = tuple(manifest["class_names"])
    label_of = {c: i for i, c in enumerate(class_names)}
    expected_header = ["id", "label"] + [f"f{j}" for j in range(d)]

    with open(p, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{p}: empty file") from None
        if len(set(header)) != len(header):
            dupes = sorted({h for h in header if header.count(h) > 1})
            raise DatasetError(f"{p}: duplicate header fields {dupes}")
        if header != expected_header:
            missing = [h for h in expected_header if h not in header]
            if missing:
                raise DatasetError(f"{p}: missing header fields {missing[:5]}")
            raise DatasetError(f"{p}: header does not match id,label,f0..f{d - 1}")

        ids: list[str] = []
        labels: list[int] = []
        rows: list[list[float]] = []
        for rownum, row in enumerate(reader, start=1):
            if len(row) != len(expected_header):
                raise DatasetError(f"{p}: data row {rownum} has {len(row)} fields, "
                                   f"expected {len(expected_header)}")
            label = row[1]
            if label not in label_of:
                raise DatasetError(f"{p}: data row {rownum}: label '{label}' not in "
                                   f"manifest class list")
            feats = []
            for j, cell in enumerate(row[2:]):
                try:
                    v = float(cell)
                except ValueError:
                    raise DatasetError(f"{p}: data row {rownum}, column 'f{j}': "
                                       f"non-numeric value '{cell}'") from None
                if not math.isfinite(v):
                    raise DatasetError(f"{p}: data row {rownum}, column 'f{j}': "
                                       f"non-finite value '{cell}'")
                feats.append(v)
            ids.append(row[0])
            labels.append(label_of[label])
            rows.append(feats)

    if not rows:
        raise DatasetError(f"{p}: no data rows")
    matrix = FeatureMatrix(np.array(rows, dtype=np.float64), tuple(f"f{j}" for j in range(d)))
    return LabeledDataset(matrix=matrix, labels=np.array(labels), class_names=class_names,
                          ids=tuple(ids))


def save_feature_csv(ds: LabeledDataset, path: str | os.PathLike, *,
                     extractor_model: str = "resnet101",
                     image_size: str = "320x240",
                     extractor_version: str = "0.1.0") -> Path:
    """Write a LabeledDataset back to the CSV + manifest interchange format.

    Floats are written with ``repr`` so a reload is bit-identical.
    """
    p = Path(path)
    d = ds.matrix.n_features
    with open(p, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(["id", "label"] + [f"f{j}" for j in range(d)]) + "\n")
        for i in range(ds.matrix.n_rows):
            vals = ",".join(repr(float(v)) for v in ds.matrix.values[i])
            fh.write(f"{ds.ids[i]},{ds.class_names[ds.labels[i]]},{vals}\n")
    manifest = {
        "extractor_model": extractor_model,
        "feature_dim": d,
        "class_names": list(ds.class_names),
        "image_size": image_size,
        "extractor_version": extractor_version,
    }
    mpath = p.with_name(p.stem + ".manifest.json")
    mpath.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return p


def minmax_scale(train: FeatureMatrix, apply_to: FeatureMatrix) -> tuple[ScalerParams, FeatureMatrix]:
    """Fit per-column min/max on ``train`` and rescale ``apply_to``.

    Columns constant in training map to 0.  Values outside the training
    range scale outside [0, 1] and are not clipped.
    """
    if train.n_features != apply_to.n_features:
        raise DatasetError(f"dimension mismatch: train has {train.n_features} features, "
                           f"apply_to has {apply_to.n_features}")
    params = ScalerParams(train.values.min(axis=0), train.values.max(axis=0))
    return params, apply_scaler(params, apply_to)


def apply_scaler(params: ScalerParams, m: FeatureMatrix) -> FeatureMatrix:
    if params.mins.shape[0] != m.n_features:
        raise DatasetError(f"scaler fitted on {params.mins.shape[0]} features, "
                           f"matrix has {m.n_features}")
    span = params.maxs - params.mins
    out = np.zeros_like(m.values)
    live = span > 0
    out[:, live] = (m.values[:, live] - params.mins[live]) / span[live]
    return FeatureMatrix(out, m.feature_ids)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def stratified_split_indices(labels: np.ndarray, n_classes: int,
                             spec: SplitSpec) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic per-class index split.

    Per-class test counts are ``round_half_up(count_c * f)`` clamped to
    [1, count_c - 1] so both sides keep at least one sample per class.
    When clamping shifts the total, the difference is rebalanced on the
    largest classes first, never moving any class more than one sample
    from ``count_c * f``.  Shuffling uses numpy's PCG64 generator seeded
    with ``spec.seed``.
    """
    labels = np.asarray(labels, dtype=np.int64)
    f = spec.test_fraction
    counts = np.bincount(labels, minlength=n_classes)
    present = np.flatnonzero(counts)
    for c in present:
        if counts[c] < 2:
            raise DatasetError(f"class {c} has {counts[c]} sample(s), need at least 2 to split")

    ideal = {int(c): _round_half_up(counts[c] * f) for c in present}
    test_counts = {c: min(max(t, 1), int(counts[c]) - 1) for c, t in ideal.items()}

    # Rebalance clamp spillover on the largest classes, keeping every
    # class within one sample of count_c * f.
    delta = sum(test_counts.values()) - sum(ideal.values())
    if delta != 0:
        order = sorted(present, key=lambda c: (-counts[c], c))
        for c in order:
            if delta == 0:
                break
            step = -1 if delta > 0 else 1
            while delta != 0:
                cand = test_counts[int(c)] + step
                if not (1 <= cand <= counts[c] - 1) or abs(cand - counts[c] * f) > 1:
                    break
                test_counts[int(c)] = cand
                delta += step

    if sum(test_counts.values()) >= labels.size:
        raise DatasetError(f"test_fraction {f} leaves an empty train split")

    rng = np.random.Generator(np.random.PCG64(spec.seed))
    test_idx: list[np.ndarray] = []
    train_idx: list[np.ndarray] = []
    for c in present:
        members = np.flatnonzero(labels == c)
        perm = rng.permutation(members.size)
        t = test_counts[int(c)]
        test_idx.append(members[perm[:t]])
        train_idx.append(members[perm[t:]])
    return np.sort(np.concatenate(train_idx)), np.sort(np.concatenate(test_idx))


def stratified_split(ds: LabeledDataset, spec: SplitSpec) -> tuple[LabeledDataset, LabeledDataset]:
    """Split into (train, test) preserving per-class proportions."""
    train_idx, test_idx = stratified_split_indices(ds.labels, ds.n_classes, spec)
    return ds.take(train_idx), ds.take(test_idx)
