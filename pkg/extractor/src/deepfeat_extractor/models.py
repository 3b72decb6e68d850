"""Truncated CNN backbones producing flat deep-feature vectors.

Each supported network is cut before its final fully-connected stage;
architectures whose trunk ends in a spatial map get a global average
pool so every model emits one flat vector per image. The resulting
widths are fixed per architecture and verified with a dummy forward at
build time, so a wrong truncation point fails loudly instead of
exporting garbage.
"""

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .records import ExtractorError, ImageRecord, require_preprocessed

MODEL_DIMS = {
    "resnet101": 2048,
    "vgg19": 512,
    "inceptionv3": 2048,
    "densenet121": 1024,
    "mobilenetv2": 1280,
}

# native square input per network; images are letterboxed into it
MODEL_INPUT = {name: 299 if name == "inceptionv3" else 224 for name in MODEL_DIMS}

_IMAGENET_MEAN = np.array([0.485, 0.456, 0.406], dtype=np.float32)
_IMAGENET_STD = np.array([0.229, 0.224, 0.225], dtype=np.float32)


@dataclass(frozen=True)
class ExtractorSpec:
    model_name: str
    expected_dim: int

    def __post_init__(self) -> None:
        if self.model_name not in MODEL_DIMS:
            raise ExtractorError(f"unknown model '{self.model_name}', expected one "
                                 f"of {sorted(MODEL_DIMS)}")
        if self.expected_dim != MODEL_DIMS[self.model_name]:
            raise ExtractorError(f"{self.model_name} emits {MODEL_DIMS[self.model_name]} "
                                 f"features, not {self.expected_dim}")

    @classmethod
    def of(cls, model_name: str) -> "ExtractorSpec":
        if model_name not in MODEL_DIMS:
            raise ExtractorError(f"unknown model '{model_name}', expected one "
                                 f"of {sorted(MODEL_DIMS)}")
        return cls(model_name=model_name, expected_dim=MODEL_DIMS[model_name])


def _gap_trunk(features: nn.Module, relu: bool = False) -> nn.Module:
    mods = [features]
    if relu:
        mods.append(nn.ReLU(inplace=False))
    mods.extend([nn.AdaptiveAvgPool2d(1), nn.Flatten(1)])
    return nn.Sequential(*mods)


def build_feature_model(name: str, weights: str = "pretrained",
                        seed: int = 0) -> nn.Module:
    """Build the truncated backbone in eval mode.

    ``weights="pretrained"`` loads the published ImageNet weights (they
    must be available locally or downloadable); ``weights="random"``
    gives a seeded random initialization for offline testing.
    """
    import torchvision.models as tvm

    if name not in MODEL_DIMS:
        raise ExtractorError(f"unknown model '{name}', expected one of "
                             f"{sorted(MODEL_DIMS)}")
    if weights not in ("pretrained", "random"):
        raise ExtractorError(f"weights must be 'pretrained' or 'random', "
                             f"got '{weights}'")
    pretrained = weights == "pretrained"
    if not pretrained:
        torch.manual_seed(seed)

    try:
        if name == "resnet101":
            net = tvm.resnet101(weights=tvm.ResNet101_Weights.IMAGENET1K_V1
                                if pretrained else None)
            net.fc = nn.Identity()
            model = net
        elif name == "vgg19":
            net = tvm.vgg19(weights=tvm.VGG19_Weights.IMAGENET1K_V1
                            if pretrained else None)
            model = _gap_trunk(net.features)
        elif name == "inceptionv3":
            if pretrained:
                net = tvm.inception_v3(weights=tvm.Inception_V3_Weights.IMAGENET1K_V1)
            else:
                net = tvm.inception_v3(weights=None, init_weights=True)
            net.fc = nn.Identity()
            model = net
        elif name == "densenet121":
            net = tvm.densenet121(weights=tvm.DenseNet121_Weights.IMAGENET1K_V1
                                  if pretrained else None)
            model = _gap_trunk(net.features, relu=True)
        else:  # mobilenetv2
            net = tvm.mobilenet_v2(weights=tvm.MobileNet_V2_Weights.IMAGENET1K_V1
                                   if pretrained else None)
            model = _gap_trunk(net.features)
    except ExtractorError:
        raise
    except Exception as e:  # weight download/load failures surface here
        raise ExtractorError(f"cannot build {name} with {weights} weights: {e}") from e

    model.eval()
    size = MODEL_INPUT[name]
    with torch.no_grad():
        width = model(torch.zeros(1, 3, size, size)).shape[1]
    if width != MODEL_DIMS[name]:
        raise ExtractorError(f"{name}: truncated network emits {width} features, "
                             f"expected {MODEL_DIMS[name]}; wrong truncation point")
    return model


def letterbox(pixels: np.ndarray, size: int) -> np.ndarray:
    """Fit an image into a size x size square, preserving aspect ratio
    and padding the rest with black."""
    from PIL import Image

    h, w, _ = pixels.shape
    scale = size / max(h, w)
    new_w = max(1, round(w * scale))
    new_h = max(1, round(h * scale))
    im = Image.fromarray(pixels).resize((new_w, new_h), Image.BILINEAR)
    canvas = np.zeros((size, size, 3), dtype=np.uint8)
    top = (size - new_h) // 2
    left = (size - new_w) // 2
    canvas[top:top + new_h, left:left + new_w] = np.asarray(im, dtype=np.uint8)
    return canvas


def _to_batch(records, size: int) -> torch.Tensor:
    arr = np.stack([letterbox(r.pixels, size) for r in records])
    x = arr.astype(np.float32) / 255.0
    x = (x - _IMAGENET_MEAN) / _IMAGENET_STD
    return torch.from_numpy(np.ascontiguousarray(x.transpose(0, 3, 1, 2)))


def extract_features(records, spec: ExtractorSpec, batch_size: int = 16,
                     model: nn.Module | None = None,
                     weights: str = "pretrained", seed: int = 0) -> np.ndarray:
    """Run every record through the truncated network.

    Returns an n x expected_dim float64 matrix with rows in record
    order. Pass a prebuilt ``model`` to reuse it across calls.
    """
    records = list(records)
    if not records:
        raise ExtractorError("no records to extract from")
    if batch_size < 1:
        raise ExtractorError(f"batch_size must be >= 1, got {batch_size}")
    require_preprocessed(records, "extract_features")
    if model is None:
        model = build_feature_model(spec.model_name, weights=weights, seed=seed)

    size = MODEL_INPUT[spec.model_name]
    rows = []
    with torch.no_grad():
        for start in range(0, len(records), batch_size):
            batch = records[start:start + batch_size]
            out = model(_to_batch(batch, size))
            if out.ndim != 2 or out.shape[1] != spec.expected_dim:
                raise ExtractorError(
                    f"{spec.model_name}: got feature shape {tuple(out.shape)}, "
                    f"expected (*, {spec.expected_dim})")
            rows.append(out.numpy().astype(np.float64))
    return np.concatenate(rows, axis=0)
