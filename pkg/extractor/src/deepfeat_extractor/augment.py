"""Seeded augmentation that tops up one underrepresented class.

New records are flips and small rotations of the originals, appended
until the class reaches the target count. Originals are never touched
and the same seed always yields the same augmented set.
"""

from collections import Counter

import numpy as np
from PIL import Image

from .records import AugmentError, ImageRecord, require_preprocessed

MAX_ROTATION_DEG = 15.0


def _transform(pixels: np.ndarray, flip_h: bool, flip_v: bool,
               angle: float) -> np.ndarray:
    im = Image.fromarray(pixels)
    if flip_h:
        im = im.transpose(Image.FLIP_LEFT_RIGHT)
    if flip_v:
        im = im.transpose(Image.FLIP_TOP_BOTTOM)
    if angle != 0.0:
        # expand=False keeps 320x240; revealed corners are black
        im = im.rotate(angle, resample=Image.BILINEAR, expand=False)
    return np.asarray(im, dtype=np.uint8)


def augment_class(records, target_class: str = "Benign",
                  target_count: int | None = None,
                  seed: int = 0) -> list[ImageRecord]:
    """Return records plus augmented copies of ``target_class``.

    ``target_count`` defaults to the size of the largest class. Sources
    are cycled in order; the i-th copy of a source gets id
    ``{source_id}_aug{i}``.
    """
    records = list(records)
    counts = Counter(r.class_name for r in records)
    if target_class not in counts:
        raise AugmentError(f"class '{target_class}' has no records")
    sources = [r for r in records if r.class_name == target_class]
    require_preprocessed(sources, "augment_class")

    current = counts[target_class]
    if target_count is None:
        target_count = max(counts.values())
    if target_count < current:
        raise AugmentError(f"target_count {target_count} is below the current "
                           f"{target_class} count {current}")

    rng = np.random.default_rng(seed)
    out = list(records)
    for i in range(target_count - current):
        src = sources[i % len(sources)]
        n = i // len(sources) + 1
        flip_h = bool(rng.random() < 0.5)
        flip_v = bool(rng.random() < 0.5)
        angle = float(rng.uniform(-MAX_ROTATION_DEG, MAX_ROTATION_DEG))
        out.append(ImageRecord(
            id=f"{src.id}_aug{n}", class_name=target_class,
            pixels=_transform(src.pixels, flip_h, flip_v, angle)))
    return out
