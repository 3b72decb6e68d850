"""Image loading, resizing, and luminance histogram equalization.

Every image is brought to 320 x 240 and contrast-stretched by
equalizing the luminance channel only, so hue relationships survive.
"""

import os
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .records import TARGET_HEIGHT, TARGET_WIDTH, ImageRecord, PreprocessError

# ITU-R BT.601 full-range RGB <-> YCbCr
_RGB_TO_Y = np.array([0.299, 0.587, 0.114])
_RGB_TO_CB = np.array([-0.168736, -0.331264, 0.5])
_RGB_TO_CR = np.array([0.5, -0.418688, -0.081312])


def load_image(path: str | os.PathLike, *, class_name: str,
               record_id: str | None = None) -> ImageRecord:
    """Decode one image file into an RGB record."""
    p = Path(path)
    try:
        with Image.open(p) as im:
            rgb = np.asarray(im.convert("RGB"), dtype=np.uint8)
    except (UnidentifiedImageError, OSError, ValueError) as e:
        raise PreprocessError(f"cannot decode image {p}: {e}") from e
    rid = record_id if record_id is not None else f"{class_name}/{p.stem}"
    return ImageRecord(id=rid, class_name=class_name, pixels=rgb)


def resize_image(rgb: np.ndarray, width: int = TARGET_WIDTH,
                 height: int = TARGET_HEIGHT) -> np.ndarray:
    if rgb.shape[0] == height and rgb.shape[1] == width:
        return rgb
    im = Image.fromarray(rgb).resize((width, height), Image.BILINEAR)
    return np.asarray(im, dtype=np.uint8)


def equalize_luminance(rgb: np.ndarray) -> np.ndarray:
    """Histogram-equalize the Y channel of an RGB image.

    Uses the classic cumulative-histogram remap. An image with a single
    gray level has nothing to spread and is returned unchanged.
    """
    x = rgb.astype(np.float64)
    y = x @ _RGB_TO_Y
    y8 = np.clip(np.rint(y), 0, 255).astype(np.uint8)

    hist = np.bincount(y8.ravel(), minlength=256)
    cdf = np.cumsum(hist)
    nonzero = cdf[hist > 0]
    cdf_min = int(nonzero[0])
    total = int(cdf[-1])
    if total == cdf_min:  # single occupied bin, degenerate histogram
        return rgb.copy()
    lut = np.rint((cdf - cdf_min) / (total - cdf_min) * 255.0)
    y_eq = lut[y8]

    cb = x @ _RGB_TO_CB + 128.0
    cr = x @ _RGB_TO_CR + 128.0
    out = np.empty_like(x)
    out[..., 0] = y_eq + 1.402 * (cr - 128.0)
    out[..., 1] = y_eq - 0.344136 * (cb - 128.0) - 0.714136 * (cr - 128.0)
    out[..., 2] = y_eq + 1.772 * (cb - 128.0)
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def preprocess_image(record: ImageRecord) -> ImageRecord:
    """Resize to 320 x 240, then equalize luminance."""
    resized = resize_image(record.pixels)
    return ImageRecord(id=record.id, class_name=record.class_name,
                       pixels=equalize_luminance(resized))
