"""Reference metrics (PSNR, SSIM, L1%) and mask-ratio-bucketed reporting.

Per-image masks are derived from a hash of the run seed and the image id, so
a report is reproducible from (checkpoint, seed) alone. Metrics are computed
on 8-bit-quantized unit-range frames, full-frame by default; the "generated"
region mode restricts them to to-synthesize pixels for diagnostics.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
import torch

from .diffusion import BetaSchedule, forward_diffuse, reconstruct_single_step
from .errors import ConfigError, MetricError, ShapeMismatchError
from .image_core import BinaryMask, ImageTensor, denormalize, mask_ratio
from .losses import ssim_value
from .masks import MaskConfig, sample_mask

PSNR_CAP_DB = 99.0


def _unit_array(x) -> np.ndarray:
    if isinstance(x, ImageTensor):
        if x.value_range != "unit":
            raise ValueError("metric inputs must be unit-range images")
        return x.data.astype(np.float64)
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return arr


def _region_selector(shape, mask):
    if mask is None:
        return np.ones(shape, dtype=bool)
    m = mask.data if isinstance(mask, BinaryMask) else np.asarray(mask)
    return np.broadcast_to((m <= 0.5)[:, :, None], shape)


def psnr(a, b, region_mask=None) -> float:
    """10 * log10(1 / MSE) on unit-range images; identical inputs cap at 99 dB."""
    x, y = _unit_array(a), _unit_array(b)
    if x.shape != y.shape:
        raise ShapeMismatchError(f"shapes differ: {x.shape} vs {y.shape}")
    sel = _region_selector(x.shape, region_mask)
    if not sel.any():
        raise MetricError("region selects no pixels")
    mse = float(np.mean((x[sel] - y[sel]) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(10.0 * np.log10(1.0 / mse), PSNR_CAP_DB)


def l1_percent(a, b, region_mask=None) -> float:
    """100 * mean absolute difference on unit-range images."""
    x, y = _unit_array(a), _unit_array(b)
    if x.shape != y.shape:
        raise ShapeMismatchError(f"shapes differ: {x.shape} vs {y.shape}")
    sel = _region_selector(x.shape, region_mask)
    if not sel.any():
        raise MetricError("region selects no pixels")
    return float(100.0 * np.mean(np.abs(x[sel] - y[sel])))


@dataclass(frozen=True)
class PerImageRecord:
    image_id: str
    mask_ratio: float
    psnr_db: float
    ssim: float
    l1_percent: float


@dataclass
class MetricsReport:
    records: list[PerImageRecord] = field(default_factory=list)
    seed: int = 0
    region: str = "full"
    t: int | None = None

    METRICS = ("psnr_db", "ssim", "l1_percent")

    def aggregates(self) -> dict:
        out = {}
        for name in self.METRICS:
            values = np.array([getattr(r, name) for r in self.records], dtype=np.float64)
            out[name] = {"mean": float(values.mean()), "std": float(values.std())}
        out["count"] = len(self.records)
        return out


def image_seed(run_seed: int, image_id: str) -> int:
    """Stable per-image seed so reports reproduce regardless of iteration order."""
    digest = hashlib.sha256(f"{run_seed}:{image_id}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def evaluate(
    model,
    images: list[tuple[str, ImageTensor]],
    mask_config: MaskConfig,
    sched: BetaSchedule,
    seed: int = 0,
    t: int | None = None,
    region: str = "full",
) -> MetricsReport:
    """Score `model` (a callable (x_t, mask, t) -> predicted noise, torch BCHW)
    over signed-range images with per-image reproducible masks and noise.
    """
    if not images:
        raise ConfigError("evaluation split is empty")
    if region not in ("full", "generated"):
        raise ConfigError(f"region must be 'full' or 'generated', got {region!r}")
    step = sched.T if t is None else t
    report = MetricsReport(seed=seed, region=region, t=step)
    for image_id, img in sorted(images, key=lambda pair: pair[0]):
        rng = np.random.default_rng(image_seed(seed, image_id))
        mask = sample_mask(rng, mask_config, (img.height, img.width))
        eps = rng.standard_normal((img.channels, img.height, img.width))
        x0_t = torch.from_numpy(img.data.transpose(2, 0, 1)[None].copy())
        mask_t = torch.from_numpy(mask.data[None, None])
        eps_t = torch.from_numpy(eps[None]).to(x0_t.dtype)
        with torch.no_grad():
            xt = forward_diffuse(x0_t, mask_t, step, eps_t, sched)
            eps_hat = model(xt, mask_t, step)
            x0_hat = reconstruct_single_step(xt, eps_hat, mask_t, step, sched)
        rebuilt = ImageTensor(x0_hat[0].numpy().transpose(1, 2, 0), "signed")
        truth_unit = denormalize(img).astype(np.float64) / 255.0
        rebuilt_unit = denormalize(rebuilt).astype(np.float64) / 255.0
        region_mask = mask if region == "generated" else None
        report.records.append(
            PerImageRecord(
                image_id=image_id,
                mask_ratio=mask_ratio(mask),
                psnr_db=psnr(truth_unit, rebuilt_unit, region_mask),
                ssim=float(
                    ssim_value(
                        truth_unit,
                        rebuilt_unit,
                        region=(1.0 - mask.data) if region == "generated" else None,
                    )
                ),
                l1_percent=l1_percent(truth_unit, rebuilt_unit, region_mask),
            )
        )
    return report


@dataclass(frozen=True)
class BucketRow:
    lo: float
    hi: float
    count: int
    means: dict


def bucket_report(report: MetricsReport, edges) -> list[BucketRow]:
    """Group records into half-open mask-ratio buckets [e_i, e_{i+1}).

    A ratio exactly on an interior edge lands in the right-hand bucket; the
    final bucket includes its top edge. Empty buckets carry count 0 and no means.
    """
    edges = [float(e) for e in edges]
    if len(edges) < 2 or any(b <= a for a, b in zip(edges, edges[1:])):
        raise ConfigError(f"bucket edges must be strictly increasing, got {edges}")
    if edges[0] < 0.0 or edges[-1] > 1.0:
        raise ConfigError("bucket edges must lie within [0, 1]")
    rows = []
    for i, (lo, hi) in enumerate(zip(edges, edges[1:])):
        last = i == len(edges) - 2
        members = [
            r
            for r in report.records
            if lo <= r.mask_ratio < hi or (last and r.mask_ratio == hi)
        ]
        means = {}
        if members:
            for name in MetricsReport.METRICS:
                means[name] = float(np.mean([getattr(r, name) for r in members]))
        rows.append(BucketRow(lo=lo, hi=hi, count=len(members), means=means))
    return rows


def write_report_csv(report: MetricsReport, path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["image_id", "mask_ratio", "psnr_db", "ssim", "l1_percent"])
        for r in report.records:
            writer.writerow(
                [r.image_id, f"{r.mask_ratio:.6f}", f"{r.psnr_db:.6f}", f"{r.ssim:.6f}", f"{r.l1_percent:.6f}"]
            )


def write_aggregate_json(report: MetricsReport, path) -> None:
    payload = {
        "seed": report.seed,
        "region": report.region,
        "t": report.t,
        "aggregates": report.aggregates(),
    }
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)


def write_bucket_csv(rows: list[BucketRow], path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["ratio_lo", "ratio_hi", "count", "psnr_db", "ssim", "l1_percent"])
        for row in rows:
            writer.writerow(
                [
                    f"{row.lo:.3f}",
                    f"{row.hi:.3f}",
                    row.count,
                    *(f"{row.means[m]:.6f}" if row.means else "" for m in MetricsReport.METRICS),
                ]
            )
