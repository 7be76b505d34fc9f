"""Image loading and letterbox preprocessing.

The letterbox transform is the contract between image space and model
space: aspect-preserving resize to the manifest input size, centered
gray padding (value 114 before normalization), and a recorded transform
so detections can be mapped back exactly.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import UnsupportedImageFormatError
from .manifest import ModelManifest

PAD_GRAY = 114  # uint8 pad value; conventional for single-stage exports

ImageSource = Union[str, Path, bytes, bytearray, Image.Image, np.ndarray]


@dataclass(frozen=True)
class PreprocessTransform:
    """Forward map image space -> model space: v' = v * scale + pad."""

    scale: float
    pad_left: float
    pad_top: float
    original_width: int
    original_height: int
    input_width: int
    input_height: int

    def to_model(self, x: float, y: float) -> tuple[float, float]:
        return x * self.scale + self.pad_left, y * self.scale + self.pad_top

    def to_image(self, x: float, y: float) -> tuple[float, float]:
        return (x - self.pad_left) / self.scale, (y - self.pad_top) / self.scale


def load_image(source: ImageSource) -> Image.Image:
    """Decode to an RGB raster; raises UnsupportedImageFormatError."""
    try:
        if isinstance(source, Image.Image):
            img = source
        elif isinstance(source, np.ndarray):
            if source.size == 0:
                raise UnsupportedImageFormatError("empty image array")
            img = Image.fromarray(source)
        elif isinstance(source, (bytes, bytearray)):
            img = Image.open(io.BytesIO(source))
        else:
            path = Path(source)
            if not path.exists():
                raise UnsupportedImageFormatError(f"image file not found: {path}")
            img = Image.open(path)
        img = img.convert("RGB")
    except UnsupportedImageFormatError:
        raise
    except (UnidentifiedImageError, OSError, ValueError, TypeError) as exc:
        raise UnsupportedImageFormatError(f"cannot decode image: {exc}") from exc
    if img.width == 0 or img.height == 0:
        raise UnsupportedImageFormatError("image has zero size")
    return img


def letterbox_transform(width: int, height: int, manifest: ModelManifest) -> PreprocessTransform:
    """Geometry of the letterbox for a given source size (no pixels touched)."""
    scale = min(manifest.input_width / width, manifest.input_height / height)
    resized_w = int(round(width * scale))
    resized_h = int(round(height * scale))
    pad_left = (manifest.input_width - resized_w) // 2
    pad_top = (manifest.input_height - resized_h) // 2
    return PreprocessTransform(
        scale=scale,
        pad_left=float(pad_left),
        pad_top=float(pad_top),
        original_width=width,
        original_height=height,
        input_width=manifest.input_width,
        input_height=manifest.input_height,
    )


def preprocess(image: Image.Image, manifest: ModelManifest) -> tuple[np.ndarray, PreprocessTransform]:
    """Letterbox + normalize into the model's input tensor (1, 3, H, W).

    Normalization is (pixel - mean) * scale per channel with pixels in
    0..255, applied after the optional RGB->BGR swap, so the default
    mean=0, scale=1/255 reproduces the common export convention and the
    pad lands at 114/255.
    """
    transform = letterbox_transform(image.width, image.height, manifest)
    resized_w = int(round(image.width * transform.scale))
    resized_h = int(round(image.height * transform.scale))
    if (resized_w, resized_h) != (image.width, image.height):
        resized = image.resize((resized_w, resized_h), Image.BILINEAR)
    else:
        resized = image

    canvas = np.full(
        (manifest.input_height, manifest.input_width, 3), PAD_GRAY, dtype=np.uint8
    )
    top, left = int(transform.pad_top), int(transform.pad_left)
    canvas[top:top + resized_h, left:left + resized_w, :] = np.asarray(resized)

    if manifest.channel_order == "bgr":
        canvas = canvas[:, :, ::-1]

    mean = np.asarray(manifest.mean, dtype=np.float32)
    scale = np.asarray(manifest.scale, dtype=np.float32)
    tensor = (canvas.astype(np.float32) - mean) * scale
    tensor = np.ascontiguousarray(tensor.transpose(2, 0, 1)[np.newaxis, ...])
    return tensor, transform
