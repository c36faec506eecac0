"""Figure emission from the CSV artifacts; data-first so tests can skip rendering.

Every plot function returns the exact arrays it draws, letting callers assert
on the plotted values without decoding pixels.
"""

from __future__ import annotations

import csv

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .errors import ConfigError

METRIC_LABELS = {"psnr_db": "PSNR (dB)", "ssim": "SSIM", "l1_percent": "L1 (%)"}


def _read_csv(path) -> list[dict]:
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    if not rows:
        raise ConfigError(f"{path} holds no data rows")
    return rows


def plot_loss_curves(loss_csv, out_path) -> dict:
    rows = _read_csv(loss_csv)
    steps = [int(r["step"]) for r in rows]
    data = {"step": steps}
    fig, ax = plt.subplots(figsize=(7, 4))
    for column in ("mse_noise", "ssim_loss", "g_adv", "d_loss"):
        values = [float(r[column]) for r in rows if r.get(column) not in (None, "")]
        if len(values) != len(steps):
            continue
        data[column] = values
        ax.plot(steps, values, label=column)
    ax.set_xlabel("step")
    ax.set_ylabel("loss")
    ax.set_yscale("log")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return data


def plot_bucket_bars(bucket_csv, out_path, metric: str = "ssim") -> dict:
    if metric not in METRIC_LABELS:
        raise ConfigError(f"unknown metric {metric!r}")
    rows = _read_csv(bucket_csv)
    labels, heights = [], []
    for r in rows:
        if r[metric] == "":  # empty bucket: omit the bar
            continue
        labels.append(f"[{float(r['ratio_lo']):.2f},{float(r['ratio_hi']):.2f})")
        heights.append(float(r[metric]))
    data = {"labels": labels, "heights": heights, "metric": metric}
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(range(len(heights)), heights)
    ax.set_xticks(range(len(labels)), labels, rotation=30)
    ax.set_xlabel("mask ratio")
    ax.set_ylabel(METRIC_LABELS[metric])
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return data


def plot_sweep_lines(sweep_csv, out_path, metric: str = "ssim") -> dict:
    if metric not in METRIC_LABELS:
        raise ConfigError(f"unknown metric {metric!r}")
    rows = _read_csv(sweep_csv)
    ts = [int(r["T"]) for r in rows]
    values = [float(r[metric]) for r in rows]
    data = {"T": ts, "values": values, "metric": metric}
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(ts, values, marker="o")
    ax.set_xlabel("diffusion steps T")
    ax.set_ylabel(METRIC_LABELS[metric])
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return data
