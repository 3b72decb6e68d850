"""Image records and the error types shared across the package."""

from dataclasses import dataclass

import numpy as np

TARGET_WIDTH = 320
TARGET_HEIGHT = 240


class PreprocessError(ValueError):
    """Undecodable or malformed image input."""


class AugmentError(ValueError):
    """Invalid augmentation request."""


class ExtractorError(RuntimeError):
    """Model construction or inference failure, including dimension
    mismatches against the declared feature width."""


@dataclass(frozen=True)
class ImageRecord:
    """One image with its identity and class label.

    ``pixels`` is an H x W x 3 uint8 array. Records fresh from disk may
    have any size; preprocessing brings them to 320 x 240 and the
    extractor refuses anything else.
    """

    id: str
    class_name: str
    pixels: np.ndarray

    def __post_init__(self) -> None:
        px = np.asarray(self.pixels)
        if px.dtype != np.uint8:
            raise PreprocessError(f"record '{self.id}': pixels must be uint8, "
                                  f"got {px.dtype}")
        if px.ndim != 3 or px.shape[2] != 3 or px.shape[0] < 1 or px.shape[1] < 1:
            raise PreprocessError(f"record '{self.id}': pixels must be H x W x 3, "
                                  f"got shape {px.shape}")
        px = px.copy()
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def is_preprocessed(self) -> bool:
        h, w, _ = self.pixels.shape
        return w == TARGET_WIDTH and h == TARGET_HEIGHT


def require_preprocessed(records, where: str) -> None:
    for r in records:
        if not r.is_preprocessed:
            h, w, _ = r.pixels.shape
            raise PreprocessError(
                f"{where}: record '{r.id}' is {w}x{h}, expected "
                f"{TARGET_WIDTH}x{TARGET_HEIGHT}; run preprocessing first")
