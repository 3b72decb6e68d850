"""Directory ingestion and CSV + manifest export.

The output pair is the feature-table interchange format consumed by the
classification pipeline: a CSV with header ``id,label,f0,...`` and a
JSON sidecar ``<stem>.manifest.json`` naming the extractor model, the
feature width, and the class list that defines label order.
"""

import json
import os
from pathlib import Path

import numpy as np

from . import __version__
from .models import ExtractorSpec
from .preprocess import load_image
from .records import ImageRecord, PreprocessError

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff", ".webp")


def load_image_dir(data_dir: str | os.PathLike) -> list[ImageRecord]:
    """Read a one-subdirectory-per-class image tree.

    Class names are the subdirectory names in sorted order; files sort
    by name within each class so record order is stable.
    """
    root = Path(data_dir)
    if not root.is_dir():
        raise PreprocessError(f"no such data directory {root}")
    class_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if not class_dirs:
        raise PreprocessError(f"{root} has no class subdirectories")
    records = []
    for cdir in class_dirs:
        files = sorted(p for p in cdir.iterdir()
                       if p.suffix.lower() in IMAGE_SUFFIXES)
        if not files:
            raise PreprocessError(f"class directory {cdir} has no images")
        for f in files:
            records.append(load_image(f, class_name=cdir.name))
    return records


def export_features(matrix: np.ndarray, records, spec: ExtractorSpec,
                    out_path: str | os.PathLike) -> tuple[Path, Path]:
    """Write the feature CSV and its manifest; returns both paths.

    Floats carry 9 significant digits, enough for a reload to agree
    within 1e-6 relative.
    """
    records = list(records)
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != len(records):
        raise ValueError(f"matrix has {matrix.shape[0] if matrix.ndim == 2 else '?'} "
                         f"rows for {len(records)} records")
    if matrix.shape[1] != spec.expected_dim:
        raise ValueError(f"matrix width {matrix.shape[1]} != expected_dim "
                         f"{spec.expected_dim}")
    class_names = sorted({r.class_name for r in records})

    p = Path(out_path)
    p.parent.mkdir(parents=True, exist_ok=True)
    d = matrix.shape[1]
    with open(p, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(["id", "label"] + [f"f{j}" for j in range(d)]) + "\n")
        for r, row in zip(records, matrix):
            vals = ",".join(f"{v:.9g}" for v in row)
            fh.write(f"{r.id},{r.class_name},{vals}\n")
    manifest = {
        "extractor_model": spec.model_name,
        "feature_dim": d,
        "class_names": class_names,
        "image_size": "320x240",
        "extractor_version": __version__,
    }
    mpath = p.with_name(p.stem + ".manifest.json")
    with open(mpath, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return p, mpath
