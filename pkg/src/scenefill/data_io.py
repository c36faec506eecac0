"""Dataset ingestion: deterministic splits and resizing to working resolution."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ConfigError, IngestionError
from .image_core import ImageTensor

MANIFEST_SCHEMA = 1
IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")
SPLITS = ("train", "val", "test")


@dataclass
class DatasetManifest:
    root: str
    ids: list[str]
    assignment: dict[str, str]
    split_seed: int
    ratios: tuple[float, float, float]
    resolution: int
    schema_version: int = MANIFEST_SCHEMA

    def split_ids(self, split: str) -> list[str]:
        if split not in SPLITS:
            raise ConfigError(f"unknown split {split!r}, expected one of {SPLITS}")
        return [i for i in self.ids if self.assignment[i] == split]

    def to_json(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "root": self.root,
            "ids": list(self.ids),
            "assignment": dict(self.assignment),
            "split_seed": self.split_seed,
            "ratios": list(self.ratios),
            "resolution": self.resolution,
        }

    @classmethod
    def from_json(cls, payload: dict) -> "DatasetManifest":
        if payload.get("schema_version") != MANIFEST_SCHEMA:
            raise IngestionError(f"unsupported manifest schema {payload.get('schema_version')}")
        return cls(
            root=payload["root"],
            ids=list(payload["ids"]),
            assignment=dict(payload["assignment"]),
            split_seed=payload["split_seed"],
            ratios=tuple(payload["ratios"]),
            resolution=payload["resolution"],
        )

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_json(), f, indent=2, sort_keys=True)

    @classmethod
    def load(cls, path) -> "DatasetManifest":
        with open(path) as f:
            return cls.from_json(json.load(f))


def partition_sizes(n: int, ratios) -> list[int]:
    """Largest-remainder split sizes. Ties on fractional remainders go to the
    earlier split (train before val before test); ids left over by ratios
    summing below 1 go to train.
    """
    targets = [r * n for r in ratios]
    sizes = [math.floor(t) for t in targets]
    order = sorted(range(len(ratios)), key=lambda i: (-(targets[i] - sizes[i]), i))
    spare = n - sum(sizes)
    for i in order:
        if spare == 0:
            break
        if targets[i] - sizes[i] > 0:
            sizes[i] += 1
            spare -= 1
    sizes[0] += spare
    return sizes


def build_manifest(root, ratios=(0.70, 0.15, 0.15), seed: int = 0, resolution: int = 256) -> DatasetManifest:
    """Scan `root` for frames and assign a seeded, ratio-partitioned split."""
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 for r in ratios):
        raise ConfigError(f"need three non-negative ratios, got {ratios}")
    total = sum(ratios)
    if total > 1.0 + 1e-9:
        raise ConfigError(
            f"split ratios must sum to at most 1, got {total:.3f} "
            f"(a published 0.75/0.15/0.15 protocol sums to 1.05 and cannot be honored)"
        )
    if total <= 0:
        raise ConfigError("split ratios must not all be zero")
    root = Path(root)
    ids = sorted(p.name for p in root.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    if len(ids) < 3:
        raise IngestionError(f"need at least 3 images under {root}, found {len(ids)}")
    rng = np.random.default_rng(seed)
    shuffled = [ids[i] for i in rng.permutation(len(ids))]
    sizes = partition_sizes(len(ids), ratios)
    assignment = {}
    cursor = 0
    for split, size in zip(SPLITS, sizes):
        for image_id in shuffled[cursor : cursor + size]:
            assignment[image_id] = split
        cursor += size
    return DatasetManifest(
        root=str(root),
        ids=ids,
        assignment=assignment,
        split_seed=seed,
        ratios=ratios,
        resolution=resolution,
    )


def resize_bilinear(arr: np.ndarray, out_hw: tuple[int, int]) -> np.ndarray:
    """Separable bilinear resample with half-pixel-centered sampling.

    Source coordinate for output index i is (i + 0.5) * in/out - 0.5, clamped;
    no antialiasing prefilter, so constants are preserved exactly.
    """
    data = np.asarray(arr, dtype=np.float64)
    if data.ndim == 2:
        data = data[:, :, None]
    out_h, out_w = out_hw

    def axis_weights(in_size, out_size):
        src = (np.arange(out_size) + 0.5) * (in_size / out_size) - 0.5
        src = np.clip(src, 0.0, in_size - 1.0)
        lo = np.floor(src).astype(int)
        hi = np.minimum(lo + 1, in_size - 1)
        frac = src - lo
        return lo, hi, frac

    ylo, yhi, yfrac = axis_weights(data.shape[0], out_h)
    rows = data[ylo] * (1.0 - yfrac)[:, None, None] + data[yhi] * yfrac[:, None, None]
    xlo, xhi, xfrac = axis_weights(data.shape[1], out_w)
    return rows[:, xlo] * (1.0 - xfrac)[None, :, None] + rows[:, xhi] * xfrac[None, :, None]


def load_image(manifest: DatasetManifest, image_id: str) -> ImageTensor:
    """Decode, resize to the manifest resolution, and map to the signed range."""
    path = Path(manifest.root) / image_id
    if not path.exists():
        raise IngestionError(f"missing image {image_id} under {manifest.root}")
    try:
        with Image.open(path) as im:
            if im.mode not in ("L", "RGB"):
                im = im.convert("RGB")
            raw = np.asarray(im, dtype=np.float64)
    except (UnidentifiedImageError, OSError) as exc:
        raise IngestionError(f"cannot decode {image_id}: {exc}") from exc
    if raw.ndim == 2:
        raw = raw[:, :, None]
    res = manifest.resolution
    if raw.shape[:2] != (res, res):
        raw = resize_bilinear(raw, (res, res))
    return ImageTensor(np.clip(raw / 127.5 - 1.0, -1.0, 1.0).astype(np.float32), "signed")


def load_split(manifest: DatasetManifest, split: str) -> list[tuple[str, ImageTensor]]:
    ids = manifest.split_ids(split)
    missing = [i for i in ids if not (Path(manifest.root) / i).exists()]
    if missing:
        raise IngestionError(f"missing images: {', '.join(missing[:10])}")
    return [(image_id, load_image(manifest, image_id)) for image_id in ids]
