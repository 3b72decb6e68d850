import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from deepfeat.datasets import FeatureMatrix, LabeledDataset


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def tiny_dataset():
    """Four points, two classes, two features; trivially separable."""
    x = np.array([[0.0, 0.0], [0.1, 0.0], [1.0, 1.0], [0.9, 1.0]])
    return LabeledDataset(
        matrix=FeatureMatrix(x),
        labels=np.array([0, 0, 1, 1], dtype=np.int64),
        class_names=("neg", "pos"),
    )
