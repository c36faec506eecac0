"""Random polygonal masks with interior holes.

The preserved region (mask=1) is the interior of a randomly sampled simple
polygon; everything outside is synthesized, mimicking a partial view sitting
inside an unknown surround. Holes punched into the polygon add interior
regions to synthesize. Rejection sampling drives the achieved ratio of
to-synthesize pixels into a configured target interval.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, MaskGenerationError
from .image_core import BinaryMask, mask_ratio

_EDGE_TOL = 1e-9


@dataclass(frozen=True)
class MaskConfig:
    vertex_count_range: tuple[int, int] = (5, 12)
    polygon_scale_range: tuple[float, float] = (0.8, 1.5)
    hole_count_range: tuple[int, int] = (0, 3)
    hole_radius_range: tuple[float, float] = (0.04, 0.12)
    target_ratio_range: tuple[float, float] = (0.05, 0.6)
    max_attempts: int = 100

    def __post_init__(self):
        for name in (
            "vertex_count_range",
            "polygon_scale_range",
            "hole_count_range",
            "hole_radius_range",
            "target_ratio_range",
        ):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ConfigError(f"{name} is empty: ({lo}, {hi})")
        if self.vertex_count_range[0] < 3:
            raise ConfigError("polygons need at least 3 vertices")
        if self.hole_count_range[0] < 0:
            raise ConfigError("hole counts must be non-negative")
        lo, hi = self.target_ratio_range
        if lo < 0.0 or hi > 1.0:
            raise ConfigError(f"target_ratio_range must lie within [0, 1], got ({lo}, {hi})")
        if self.max_attempts < 1:
            raise ConfigError("max_attempts must be positive")


def rasterize_polygon(vertices: np.ndarray, hw: tuple[int, int]) -> BinaryMask:
    """Fill a simple polygon on an (H, W) grid with the even-odd rule.

    Pixel centers sit at integer coordinates (x, y). A center strictly inside
    the polygon by even-odd parity is interior; a center lying exactly on an
    edge counts as interior too.
    """
    h, w = hw
    verts = np.asarray(vertices, dtype=np.float64)
    if verts.ndim != 2 or verts.shape[1] != 2 or len(verts) < 3:
        raise ConfigError(f"vertices must be (N>=3, 2), got shape {verts.shape}")
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    inside = np.zeros((h, w), dtype=bool)
    on_edge = np.zeros((h, w), dtype=bool)
    n = len(verts)
    for i in range(n):
        x1, y1 = verts[i]
        x2, y2 = verts[(i + 1) % n]
        # parity toggles on edges crossed by a +x ray from the pixel center
        if y1 != y2:
            straddles = (y1 > ys) != (y2 > ys)
            x_cross = (x2 - x1) * (ys - y1) / (y2 - y1) + x1
            inside ^= straddles & (xs < x_cross)
        # tie-break: centers on the edge segment are interior
        ex, ey = x2 - x1, y2 - y1
        seg_len2 = ex * ex + ey * ey
        if seg_len2 == 0.0:
            continue
        px, py = xs - x1, ys - y1
        cross = ex * py - ey * px
        proj = px * ex + py * ey
        scale = max(1.0, np.sqrt(seg_len2))
        on_edge |= (np.abs(cross) <= _EDGE_TOL * scale) & (proj >= 0.0) & (proj <= seg_len2)
    return BinaryMask((inside | on_edge).astype(np.float32))


def _random_polygon_vertices(rng: np.random.Generator, config: MaskConfig, hw) -> np.ndarray:
    h, w = hw
    vmin, vmax = config.vertex_count_range
    n = int(rng.integers(vmin, vmax + 1))
    scale = rng.uniform(*config.polygon_scale_range)
    r_max = 0.5 * scale * min(h, w)
    cx = 0.5 * (w - 1) + rng.uniform(-0.15, 0.15) * w
    cy = 0.5 * (h - 1) + rng.uniform(-0.15, 0.15) * h
    angles = np.sort(rng.uniform(0.0, 2.0 * np.pi, size=n))
    radii = r_max * rng.uniform(0.55, 1.0, size=n)
    return np.stack([cx + radii * np.cos(angles), cy + radii * np.sin(angles)], axis=1)


def sample_polygon(rng: np.random.Generator, config: MaskConfig, hw: tuple[int, int]) -> BinaryMask:
    """Sample a random star-shaped polygon and rasterize its interior as mask=1."""
    h, w = hw
    if h < 8 or w < 8:
        raise ConfigError(f"mask grid must be at least 8x8, got {hw}")
    for _ in range(config.max_attempts):
        mask = rasterize_polygon(_random_polygon_vertices(rng, config, hw), hw)
        if mask.data.any():
            return mask
    raise MaskGenerationError(
        f"no non-degenerate polygon after {config.max_attempts} attempts on grid {hw}"
    )


def punch_holes(mask: BinaryMask, rng: np.random.Generator, config: MaskConfig) -> BinaryMask:
    """Flip random discs inside the preserved region to 0 (regions to inpaint)."""
    if not mask.data.any():
        raise MaskGenerationError("punch_holes needs a mask with preserved pixels")
    kmin, kmax = config.hole_count_range
    k = int(rng.integers(kmin, kmax + 1))
    if k == 0:
        return mask
    h, w = mask.shape
    data = mask.data.copy()
    ys_in, xs_in = np.nonzero(data > 0.5)
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    for _ in range(k):
        j = int(rng.integers(0, len(ys_in)))
        cy, cx = float(ys_in[j]), float(xs_in[j])
        radius = rng.uniform(*config.hole_radius_range) * min(h, w)
        data[(xs - cx) ** 2 + (ys - cy) ** 2 <= radius**2] = 0.0
    return BinaryMask(data)


def sample_mask(rng: np.random.Generator, config: MaskConfig, hw: tuple[int, int]) -> BinaryMask:
    """Polygon + holes, rejection-sampled until the ratio hits the target range."""
    lo, hi = config.target_ratio_range
    for _ in range(config.max_attempts):
        mask = punch_holes(sample_polygon(rng, config, hw), rng, config)
        if lo <= mask_ratio(mask) <= hi:
            return mask
    raise MaskGenerationError(
        f"no mask with ratio in [{lo}, {hi}] after {config.max_attempts} attempts"
    )
