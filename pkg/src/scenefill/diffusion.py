"""Region-selective forward diffusion and closed-form single-step reconstruction.

The forward process corrupts only the to-synthesize region (mask=0):

    x_t = (sqrt(abar_t) * x0 + sqrt(1 - abar_t) * eps) * (1 - mask) + mask * x0

and is inverted analytically in one step from a noise estimate:

    x0_hat = ((x_t - sqrt(1 - abar_t) * eps_hat) / sqrt(abar_t)) * (1 - mask)
             + mask * x_t

Preserved (mask=1) pixels are copied bit-identically; only generated pixels
are mixed with noise or inverted. Both operations accept numpy arrays (any
channels-last layout, computed in float64), torch tensors (e.g. BCHW batches,
computed in the input dtype, differentiable), or the package's value types.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch

from .errors import ConfigError, ScheduleError, ShapeMismatchError
from .image_core import BinaryMask, ImageTensor, NoiseTensor

ALPHA_BAR_FLOOR = 1e-12


@dataclass(frozen=True)
class BetaSchedule:
    """Variance schedule tables beta_t, alpha_t = 1 - beta_t, abar_t = prod(alpha)."""

    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=np.float64)
        if beta.ndim != 1 or len(beta) < 1:
            raise ConfigError("beta table must be a non-empty 1-D array")
        if beta.min() <= 0.0 or beta.max() >= 1.0:
            raise ConfigError(
                f"beta values must lie strictly in (0, 1), got range "
                f"[{beta.min():.3g}, {beta.max():.3g}]"
            )
        alpha = np.asarray(self.alpha, dtype=np.float64)
        alpha_bar = np.asarray(self.alpha_bar, dtype=np.float64)
        if alpha.shape != beta.shape or alpha_bar.shape != beta.shape:
            raise ConfigError("schedule tables must share one length")
        if np.any(np.diff(alpha_bar) >= 0.0):
            raise ConfigError("alpha_bar must be strictly decreasing")
        if alpha_bar.min() <= 0.0 or alpha_bar.max() >= 1.0:
            raise ConfigError("alpha_bar values must lie strictly in (0, 1)")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "alpha_bar", alpha_bar)

    @property
    def T(self) -> int:
        return len(self.beta)

    def alpha_bar_at(self, t: int) -> float:
        """abar_t for a 1-based step index."""
        self._check_step(t)
        return float(self.alpha_bar[t - 1])

    def _check_step(self, t) -> None:
        t_arr = np.asarray(t)
        if t_arr.min() < 1 or t_arr.max() > self.T:
            raise ScheduleError(f"step index {t} outside [1, {self.T}]")


def linear_beta_schedule(T: int, beta_start: float = 1e-4, beta_end: float = 0.02) -> BetaSchedule:
    """Linearly interpolated betas from beta_start to beta_end over T steps."""
    if T < 1:
        raise ConfigError(f"T must be a positive integer, got {T}")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ConfigError(
            f"need 0 < beta_start <= beta_end < 1, got ({beta_start}, {beta_end})"
        )
    if T == 1:
        beta = np.array([beta_start], dtype=np.float64)
    else:
        beta = np.linspace(beta_start, beta_end, T, dtype=np.float64)
    alpha = 1.0 - beta
    return BetaSchedule(beta=beta, alpha=alpha, alpha_bar=np.cumprod(alpha))


def sample_standard_noise(rng: np.random.Generator, shape: tuple[int, ...]) -> NoiseTensor:
    """I.i.d. standard-normal samples of the given (H, W, C) shape."""
    return NoiseTensor(rng.standard_normal(size=shape))


def _unwrap(x):
    if isinstance(x, (ImageTensor, NoiseTensor, BinaryMask)):
        return x.data
    return x


def _keep_region(mask, data):
    """Boolean 'preserved' selector broadcastable against `data`."""
    m = _unwrap(mask)
    if isinstance(data, torch.Tensor):
        m = torch.as_tensor(m, device=data.device)
        return m > 0.5
    m = np.asarray(m)
    if m.ndim == data.ndim - 1 and m.shape == data.shape[:-1]:
        m = m[..., None]
    if m.ndim != data.ndim:
        raise ShapeMismatchError(
            f"mask shape {m.shape} not broadcastable to image shape {data.shape}"
        )
    return m > 0.5


def _mix_coeffs(sched: BetaSchedule, t, like):
    """(sqrt(abar_t), sqrt(1 - abar_t)) as scalars or per-sample columns."""
    sched._check_step(t if not isinstance(t, torch.Tensor) else t.detach().cpu().numpy())
    if isinstance(t, torch.Tensor) and t.ndim > 0:
        if not isinstance(like, torch.Tensor):
            raise ShapeMismatchError("batched step indices require torch image tensors")
        abar = torch.as_tensor(sched.alpha_bar, dtype=like.dtype, device=like.device)[t - 1]
        abar = abar.reshape(-1, *([1] * (like.ndim - 1)))
        return torch.sqrt(abar), torch.sqrt(1.0 - abar)
    abar = sched.alpha_bar_at(int(t))
    return math.sqrt(abar), math.sqrt(1.0 - abar)


def forward_diffuse(x0, mask, t, eps, sched: BetaSchedule):
    """Noise the mask=0 region of x0 to step t; mask=1 pixels stay bit-identical.

    `t` is a 1-based step index, or a 1-D tensor of per-sample indices when x0
    is a batched torch tensor.
    """
    data = _unwrap(x0)
    eps_data = _unwrap(eps)
    is_torch = isinstance(data, torch.Tensor)
    if not is_torch:
        data = np.asarray(data, dtype=np.float64)
        eps_data = np.asarray(eps_data, dtype=np.float64)
    if data.shape != eps_data.shape:
        raise ShapeMismatchError(f"noise shape {eps_data.shape} != image shape {data.shape}")
    sqrt_ab, sqrt_1mab = _mix_coeffs(sched, t, data)
    noised = sqrt_ab * data + sqrt_1mab * eps_data
    keep = _keep_region(mask, data)
    return torch.where(keep, data, noised) if is_torch else np.where(keep, data, noised)


def reconstruct_single_step(xt, eps_hat, mask, t, sched: BetaSchedule):
    """Invert the forward mix analytically at step t using a noise estimate.

    mask=1 pixels are copied from x_t unchanged (they were never noised);
    mask=0 pixels are inverted and clamped to the signed range.
    """
    data = _unwrap(xt)
    eps_data = _unwrap(eps_hat)
    is_torch = isinstance(data, torch.Tensor)
    if not is_torch:
        data = np.asarray(data, dtype=np.float64)
        eps_data = np.asarray(eps_data, dtype=np.float64)
    if data.shape != eps_data.shape:
        raise ShapeMismatchError(f"noise shape {eps_data.shape} != image shape {data.shape}")
    sqrt_ab, sqrt_1mab = _mix_coeffs(sched, t, data)
    abar_min = (sqrt_ab**2).min() if isinstance(sqrt_ab, torch.Tensor) else sqrt_ab**2
    if float(abar_min) < ALPHA_BAR_FLOOR:
        raise ScheduleError(
            f"abar_t below {ALPHA_BAR_FLOOR:g}: single-step inversion is numerically degenerate"
        )
    inverted = (data - sqrt_1mab * eps_data) / sqrt_ab
    if is_torch:
        inverted = torch.clamp(inverted, -1.0, 1.0)
        return torch.where(_keep_region(mask, data), data, inverted)
    inverted = np.clip(inverted, -1.0, 1.0)
    return np.where(_keep_region(mask, data), data, inverted)
