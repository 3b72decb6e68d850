"""Deep-feature extraction from blood smear images.

Loads a one-directory-per-class image tree, standardizes every image to
320 x 240 with luminance histogram equalization, optionally balances an
underrepresented class with seeded flip/rotate augmentation, runs the
images through a truncated pre-trained CNN, and exports the resulting
feature matrix as a CSV + manifest pair for the classification
pipeline.
"""

__version__ = "0.1.0"

from .records import (
    AugmentError,
    ExtractorError,
    ImageRecord,
    PreprocessError,
)
from .preprocess import equalize_luminance, load_image, preprocess_image, resize_image
from .augment import augment_class
from .models import (
    MODEL_DIMS,
    MODEL_INPUT,
    ExtractorSpec,
    build_feature_model,
    extract_features,
    letterbox,
)
from .export import export_features, load_image_dir

__all__ = [
    "AugmentError",
    "ExtractorError",
    "ImageRecord",
    "PreprocessError",
    "MODEL_DIMS",
    "MODEL_INPUT",
    "ExtractorSpec",
    "__version__",
    "augment_class",
    "build_feature_model",
    "equalize_luminance",
    "export_features",
    "extract_features",
    "letterbox",
    "load_image",
    "load_image_dir",
    "preprocess_image",
    "resize_image",
]
