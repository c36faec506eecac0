"""Core image/mask value types and mask-aware composition.

Conventions used throughout the package:

* images are channels-last ``(H, W, C)`` float arrays with ``C in {1, 3}``;
* model-facing tensors live in the signed range ``[-1, 1]``, metrics operate
  on the unit range ``[0, 1]`` after explicit conversion;
* a mask value of 1 marks a pixel preserved from the source image, 0 marks a
  pixel to synthesize (the "generated region");
* mask ratio is the fraction of pixels to synthesize, ``mean(1 - mask)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .errors import ShapeMismatchError

RANGE_TOL = 1e-6

_RANGES = {"unit": (0.0, 1.0), "signed": (-1.0, 1.0)}


@dataclass(frozen=True)
class ImageTensor:
    """An (H, W, C) float image tagged with its value range."""

    data: np.ndarray
    value_range: str = "signed"

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim == 2:
            data = data[:, :, None]
        if data.ndim != 3:
            raise ShapeMismatchError(f"image must be (H, W, C), got shape {data.shape}")
        if data.shape[2] not in (1, 3):
            raise ShapeMismatchError(f"channels must be 1 or 3, got {data.shape[2]}")
        if self.value_range not in _RANGES:
            raise ValueError(f"unknown value range tag {self.value_range!r}")
        lo, hi = _RANGES[self.value_range]
        if data.size and (data.min() < lo - RANGE_TOL or data.max() > hi + RANGE_TOL):
            raise ValueError(
                f"values [{data.min():.6g}, {data.max():.6g}] outside "
                f"{self.value_range} range [{lo}, {hi}]"
            )
        object.__setattr__(self, "data", np.ascontiguousarray(data, dtype=np.float32))

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def channels(self):
        return self.data.shape[2]

    def to_unit(self) -> "ImageTensor":
        if self.value_range == "unit":
            return self
        return ImageTensor((self.data + 1.0) / 2.0, "unit")

    def to_signed(self) -> "ImageTensor":
        if self.value_range == "signed":
            return self
        return ImageTensor(self.data * 2.0 - 1.0, "signed")


@dataclass(frozen=True)
class BinaryMask:
    """An (H, W) per-pixel preservation map: 1 = keep, 0 = synthesize."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 2:
            raise ShapeMismatchError(f"mask must be (H, W), got shape {data.shape}")
        values = np.unique(data)
        if not np.all(np.isin(values, (0, 1))):
            raise ValueError(f"mask must be strictly binary, found values {values[:8]}")
        object.__setattr__(self, "data", np.ascontiguousarray(data, dtype=np.float32))

    @property
    def shape(self):
        return self.data.shape


@dataclass(frozen=True)
class NoiseTensor:
    """An (H, W, C) array of (nominally) standard-normal samples."""

    data: np.ndarray = field()

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3:
            raise ShapeMismatchError(f"noise must be (H, W, C), got shape {data.shape}")
        object.__setattr__(self, "data", np.ascontiguousarray(data))


def normalize(raw: np.ndarray) -> ImageTensor:
    """Map an 8-bit (H, W, C) image to the signed range: raw / 127.5 - 1."""
    raw = np.asarray(raw)
    if raw.ndim == 2:
        raw = raw[:, :, None]
    if raw.ndim != 3 or raw.shape[2] not in (1, 3):
        raise ShapeMismatchError(f"expected (H, W, 1|3) 8-bit image, got shape {raw.shape}")
    if raw.min() < 0 or raw.max() > 255:
        raise ValueError("8-bit channel values must lie in [0, 255]")
    return ImageTensor(raw.astype(np.float32) / 127.5 - 1.0, "signed")


def denormalize(img: ImageTensor) -> np.ndarray:
    """Map a signed-range image back to uint8: round((x + 1) * 127.5), clamped.

    Round-trips `normalize` exactly for any 8-bit input.
    """
    if img.value_range != "signed":
        raise ValueError("denormalize expects a signed-range image")
    scaled = (img.data.astype(np.float64) + 1.0) * 127.5
    return np.clip(np.rint(scaled), 0, 255).astype(np.uint8)


def _mask_like(mask: BinaryMask | np.ndarray, data: np.ndarray) -> np.ndarray:
    raw = mask.data if isinstance(mask, BinaryMask) else np.asarray(mask)
    if raw.shape != data.shape[:2]:
        raise ShapeMismatchError(
            f"mask shape {raw.shape} does not match image spatial dims {data.shape[:2]}"
        )
    return raw[:, :, None] > 0.5


def compose(a: ImageTensor, b: ImageTensor, mask: BinaryMask) -> ImageTensor:
    """Pixelwise select: `a` where mask=1, `b` where mask=0."""
    if a.data.shape != b.data.shape:
        raise ShapeMismatchError(f"image shapes differ: {a.data.shape} vs {b.data.shape}")
    if a.value_range != b.value_range:
        raise ValueError("cannot compose images with different value ranges")
    keep = _mask_like(mask, a.data)
    return ImageTensor(np.where(keep, a.data, b.data), a.value_range)


def mask_ratio(mask: BinaryMask) -> float:
    """Fraction of pixels to synthesize: mean(1 - mask)."""
    return float(np.mean(1.0 - mask.data))


def save_image_png(img: ImageTensor, path) -> None:
    arr = denormalize(img.to_signed())
    if arr.shape[2] == 1:
        arr = arr[:, :, 0]
    Image.fromarray(arr).save(path, format="PNG")


def load_image_png(path) -> ImageTensor:
    with Image.open(path) as im:
        if im.mode not in ("L", "RGB"):
            im = im.convert("RGB")
        arr = np.asarray(im)
    return normalize(arr)


def save_mask_png(mask: BinaryMask, path) -> None:
    """Persist a mask as single-channel PNG: 255 where mask=1, 0 where mask=0."""
    arr = (mask.data > 0.5).astype(np.uint8) * 255
    Image.fromarray(arr, mode="L").save(path, format="PNG")


def load_mask_png(path) -> BinaryMask:
    with Image.open(path) as im:
        arr = np.asarray(im.convert("L"))
    return BinaryMask((arr > 127).astype(np.float32))
