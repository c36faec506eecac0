"""Training losses: masked noise regression, SSIM, and patch-adversarial BCE.

The structural similarity implementation is shared between the training loss
(float32, differentiable) and the evaluation metric (float64): an 11x11
Gaussian window (sigma 1.5), stability constants C1 = (0.01 L)^2 and
C2 = (0.03 L)^2 with L = 1 on the unit range, valid window placements only,
averaged over positions and channels.
"""

from __future__ import annotations

import warnings

import numpy as np
import torch
import torch.nn.functional as F

from .errors import MetricError, ShapeMismatchError
from .image_core import BinaryMask, ImageTensor, NoiseTensor

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2


def _raw(x):
    if isinstance(x, (ImageTensor, NoiseTensor, BinaryMask)):
        return x.data
    return x


def _as_bchw(x) -> torch.Tensor:
    """Accept ImageTensor / (H,W,C) numpy / (C,H,W) or (B,C,H,W) torch."""
    if isinstance(x, ImageTensor):
        x = x.data
    if isinstance(x, np.ndarray):
        if x.ndim != 3:
            raise ShapeMismatchError(f"expected (H, W, C) array, got shape {x.shape}")
        return torch.from_numpy(np.ascontiguousarray(x.transpose(2, 0, 1))[None].astype(np.float64))
    if isinstance(x, torch.Tensor):
        if x.ndim == 3:
            return x[None]
        if x.ndim == 4:
            return x
    raise ShapeMismatchError(f"unsupported image carrier {type(x).__name__}")


def noise_mse(eps_hat, eps, mask):
    """Mean squared noise-prediction error over the to-synthesize (mask=0) region.

    Returns a differentiable scalar tensor for torch inputs, a float otherwise.
    An empty mask=0 region yields 0 with a warning.
    """
    torch_mode = isinstance(eps_hat, torch.Tensor)
    if torch_mode:
        if eps_hat.shape != eps.shape:
            raise ShapeMismatchError(f"shapes differ: {tuple(eps_hat.shape)} vs {tuple(eps.shape)}")
        synth = (torch.as_tensor(_raw(mask), device=eps_hat.device) <= 0.5).to(eps_hat.dtype)
        synth = synth.expand_as(eps_hat)
        total = synth.sum()
        if total.item() == 0:
            warnings.warn("noise_mse: mask preserves every pixel; loss is 0")
            return eps_hat.sum() * 0.0
        return (((eps_hat - eps) ** 2) * synth).sum() / total
    a = np.asarray(_raw(eps_hat), dtype=np.float64)
    b = np.asarray(_raw(eps), dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeMismatchError(f"shapes differ: {a.shape} vs {b.shape}")
    m = np.asarray(_raw(mask))
    if m.ndim == a.ndim - 1:
        m = m[..., None]
    synth = np.broadcast_to(m <= 0.5, a.shape)
    if not synth.any():
        warnings.warn("noise_mse: mask preserves every pixel; loss is 0")
        return 0.0
    return float(np.mean(((a - b) ** 2)[synth]))


def _gaussian_window(channels: int, dtype, device) -> torch.Tensor:
    coords = torch.arange(SSIM_WINDOW, dtype=dtype, device=device) - (SSIM_WINDOW - 1) / 2.0
    g = torch.exp(-(coords**2) / (2.0 * SSIM_SIGMA**2))
    g = g / g.sum()
    kernel = torch.outer(g, g)
    return kernel.expand(channels, 1, SSIM_WINDOW, SSIM_WINDOW).contiguous()


def ssim_map(a, b) -> torch.Tensor:
    """Per-window SSIM values, shape (B, C, H-10, W-10). Inputs in unit range."""
    ta, tb = _as_bchw(a), _as_bchw(b)
    if ta.shape != tb.shape:
        raise ShapeMismatchError(f"shapes differ: {tuple(ta.shape)} vs {tuple(tb.shape)}")
    h, w = ta.shape[-2:]
    if h < SSIM_WINDOW or w < SSIM_WINDOW:
        raise MetricError(f"images {h}x{w} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")
    c = ta.shape[1]
    win = _gaussian_window(c, ta.dtype, ta.device)
    mu_a = F.conv2d(ta, win, groups=c)
    mu_b = F.conv2d(tb, win, groups=c)
    var_a = F.conv2d(ta * ta, win, groups=c) - mu_a**2
    var_b = F.conv2d(tb * tb, win, groups=c) - mu_b**2
    cov = F.conv2d(ta * tb, win, groups=c) - mu_a * mu_b
    lum = (2.0 * mu_a * mu_b + SSIM_C1) / (mu_a**2 + mu_b**2 + SSIM_C1)
    struct = (2.0 * cov + SSIM_C2) / (var_a + var_b + SSIM_C2)
    return lum * struct


def ssim_value(a, b, region=None):
    """Mean SSIM over window positions and channels; inputs in unit range.

    `region`, if given, is an (H, W) array weighting which windows count by
    their center pixel (nonzero = include). Returns a tensor for torch inputs,
    a float otherwise.
    """
    smap = ssim_map(a, b)
    if region is None:
        out = smap.mean()
    else:
        r = np.asarray(_raw(region), dtype=np.float64)
        half = SSIM_WINDOW // 2
        centers = r[half : r.shape[0] - half, half : r.shape[1] - half]
        weights = torch.as_tensor(centers != 0, dtype=smap.dtype, device=smap.device)
        if weights.sum().item() == 0:
            raise MetricError("region selects no SSIM windows")
        out = (smap * weights).sum() / (weights.sum() * smap.shape[0] * smap.shape[1])
    if isinstance(a, torch.Tensor):
        return out
    return float(out)


def ssim_loss(x0_hat: torch.Tensor, x0: torch.Tensor) -> torch.Tensor:
    """1 - SSIM between signed-range tensors, compared on the unit range."""
    return 1.0 - ssim_value((x0_hat + 1.0) / 2.0, (x0 + 1.0) / 2.0)


def restrict_to_generated(img: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """Zero the preserved (mask=1) pixels, keeping only generated content."""
    return img * (1.0 - mask.to(img.dtype))


def adversarial_losses(disc, real_region: torch.Tensor, fake_region: torch.Tensor):
    """Sigmoid-BCE patch losses: (generator term, discriminator term).

    d_loss = 0.5 * [BCE(D(real), 1) + BCE(D(fake detached), 0)];
    g_adv = BCE(D(fake), 1). Scores are raw logits.
    """
    real_scores = disc(real_region)
    fake_scores_d = disc(fake_region.detach())
    d_loss = 0.5 * (
        F.binary_cross_entropy_with_logits(real_scores, torch.ones_like(real_scores))
        + F.binary_cross_entropy_with_logits(fake_scores_d, torch.zeros_like(fake_scores_d))
    )
    fake_scores_g = disc(fake_region)
    g_adv = F.binary_cross_entropy_with_logits(fake_scores_g, torch.ones_like(fake_scores_g))
    return g_adv, d_loss
