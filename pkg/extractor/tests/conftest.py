import numpy as np
import pytest
from PIL import Image

from deepfeat_extractor import ImageRecord, build_feature_model


def make_rgb(width: int, height: int, seed: int = 0,
             base=(90, 140, 60)) -> np.ndarray:
    """Textured RGB test image around a base color."""
    rng = np.random.default_rng(seed)
    noise = rng.integers(-60, 61, size=(height, width, 3))
    return np.clip(np.asarray(base) + noise, 0, 255).astype(np.uint8)


def make_record(rid: str, class_name: str, width: int = 320, height: int = 240,
                seed: int = 0, base=(90, 140, 60)) -> ImageRecord:
    return ImageRecord(id=rid, class_name=class_name,
                       pixels=make_rgb(width, height, seed, base))


_CLASS_COLORS = {
    "Benign": (60, 150, 60),
    "Early": (170, 60, 60),
    "Pre": (60, 60, 170),
    "Pro": (160, 160, 40),
}


def write_tree(root, counts: dict, width: int = 320, height: int = 240) -> None:
    """Write a one-directory-per-class PNG tree under root."""
    seed = 0
    for cls, n in counts.items():
        d = root / cls
        d.mkdir(parents=True)
        for i in range(n):
            img = make_rgb(width, height, seed=seed,
                           base=_CLASS_COLORS.get(cls, (120, 120, 120)))
            Image.fromarray(img).save(d / f"img{i:03d}.png")
            seed += 1


@pytest.fixture(scope="session")
def model_cache():
    """Lazily built random-weight backbones, shared across the session."""
    cache = {}

    def get(name: str):
        if name not in cache:
            cache[name] = build_feature_model(name, weights="random", seed=11)
        return cache[name]

    return get
