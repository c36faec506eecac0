"""Time-conditioned noise-prediction generator and patch-level discriminator.

The generator is an encoder-decoder with skip connections: residual blocks
with group normalization and SiLU, a sinusoidal step embedding injected
additively into every block, stride-2 convolutions down and nearest-neighbor
upsampling back up. The mask rides along as an extra input channel so the
network knows which pixels are preserved.

The discriminator scores overlapping receptive fields with a purely
convolutional stack of 4x4 kernels and LeakyReLU (no norm layers, so the
score grid is exactly translation covariant) and emits raw logits, one per
patch. `patch_grid_shape` reproduces its output arithmetic exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn

from .errors import ConfigError, ShapeMismatchError


@dataclass(frozen=True)
class GeneratorConfig:
    base_channels: int = 64
    depth: int = 4
    time_embed_dim: int = 256
    image_channels: int = 3

    def __post_init__(self):
        if self.depth < 2:
            raise ConfigError("generator depth must be at least 2")
        if self.base_channels < 1 or self.time_embed_dim < 2:
            raise ConfigError("channel and embedding sizes must be positive")
        if self.time_embed_dim % 2 != 0:
            raise ConfigError("time_embed_dim must be even")

    @property
    def input_channels(self) -> int:
        return self.image_channels + 1  # mask channel

    def level_channels(self) -> list[int]:
        return [self.base_channels * min(2**i, 8) for i in range(self.depth)]


@dataclass(frozen=True)
class DiscriminatorConfig:
    base_channels: int = 64
    num_layers: int = 3
    image_channels: int = 3
    kernel: int = 4
    padding: int = 1

    def __post_init__(self):
        if self.num_layers < 1:
            raise ConfigError("discriminator needs at least one downsampling stage")
        if self.base_channels < 1:
            raise ConfigError("base_channels must be positive")

    def stages(self) -> list[tuple[int, int, int]]:
        """(kernel, stride, padding) per convolution, downsamplers first."""
        k, p = self.kernel, self.padding
        return [(k, 2, p)] * self.num_layers + [(k, 1, p), (k, 1, p)]


def time_embedding(t, dim: int):
    """Sinusoidal step embedding: component 2k = sin(t / 10000^(2k/dim)),
    component 2k+1 = cos of the same argument.

    `t` may be an int or a 1-D tensor of step indices; returns (dim,) or (B, dim).
    """
    if dim % 2 != 0:
        raise ConfigError(f"embedding dimension must be even, got {dim}")
    scalar = not isinstance(t, torch.Tensor)
    t_vec = torch.as_tensor([t] if scalar else t, dtype=torch.float64)
    k = torch.arange(dim // 2, dtype=torch.float64)
    args = t_vec[:, None] / torch.pow(10000.0, 2.0 * k / dim)[None, :]
    emb = torch.empty(len(t_vec), dim, dtype=torch.float64)
    emb[:, 0::2] = torch.sin(args)
    emb[:, 1::2] = torch.cos(args)
    emb = emb.to(torch.float32)
    return emb[0] if scalar else emb


class ResidualBlock(nn.Module):
    def __init__(self, in_ch, out_ch, time_dim):
        super().__init__()
        self.norm1 = nn.GroupNorm(_groups(in_ch), in_ch)
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, padding=1)
        self.time_proj = nn.Linear(time_dim, out_ch)
        self.norm2 = nn.GroupNorm(_groups(out_ch), out_ch)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, padding=1)
        self.skip = nn.Conv2d(in_ch, out_ch, 1) if in_ch != out_ch else nn.Identity()
        self.act = nn.SiLU()

    def forward(self, x, temb):
        h = self.conv1(self.act(self.norm1(x)))
        h = h + self.time_proj(temb)[:, :, None, None]
        h = self.conv2(self.act(self.norm2(h)))
        return h + self.skip(x)


def _groups(channels: int) -> int:
    g = 8
    while channels % g != 0:
        g -= 1
    return g


class Generator(nn.Module):
    """Noise predictor: (x_t, mask, t) -> eps_hat with the image's shape.

    The prediction is emitted as x_t plus a learned correction. At high t the
    optimal noise estimate is x_t minus a small multiple of the clean image,
    so the skip leaves the head a small, well-scaled residual to learn instead
    of a near-identity map whose output the closed-form inversion amplifies
    by 1/sqrt(abar_t).
    """

    def __init__(self, config: GeneratorConfig):
        super().__init__()
        self.config = config
        chans = config.level_channels()
        tdim = config.time_embed_dim
        self.time_mlp = nn.Sequential(nn.Linear(tdim, tdim), nn.SiLU(), nn.Linear(tdim, tdim))
        self.stem = nn.Conv2d(config.input_channels, chans[0], 3, padding=1)
        self.down_blocks = nn.ModuleList()
        self.downsamplers = nn.ModuleList()
        for i in range(config.depth):
            in_ch = chans[i - 1] if i > 0 else chans[0]
            self.down_blocks.append(ResidualBlock(in_ch, chans[i], tdim))
            self.downsamplers.append(nn.Conv2d(chans[i], chans[i], 3, stride=2, padding=1))
        self.mid = ResidualBlock(chans[-1], chans[-1], tdim)
        self.up_convs = nn.ModuleList()
        self.up_blocks = nn.ModuleList()
        for i in reversed(range(config.depth)):
            out_ch = chans[i - 1] if i > 0 else chans[0]
            self.up_convs.append(nn.Conv2d(chans[i], chans[i], 3, padding=1))
            self.up_blocks.append(ResidualBlock(chans[i] * 2, out_ch, tdim))
        self.head_norm = nn.GroupNorm(_groups(chans[0]), chans[0])
        self.head = nn.Conv2d(chans[0], config.image_channels, 3, padding=1)
        self.act = nn.SiLU()
        init_weights(self)

    def forward(self, xt: torch.Tensor, mask: torch.Tensor, t) -> torch.Tensor:
        depth = self.config.depth
        h_in, w_in = xt.shape[-2:]
        if h_in % (2**depth) != 0 or w_in % (2**depth) != 0:
            raise ShapeMismatchError(
                f"spatial dims {h_in}x{w_in} not divisible by 2^depth = {2**depth}"
            )
        if isinstance(t, int):
            t = torch.full((xt.shape[0],), t, dtype=torch.long, device=xt.device)
        temb = self.time_mlp(time_embedding(t, self.config.time_embed_dim).to(xt.dtype))
        h = self.stem(torch.cat([xt, mask.to(xt.dtype).expand(-1, 1, -1, -1)], dim=1))
        skips = []
        for block, down in zip(self.down_blocks, self.downsamplers):
            h = block(h, temb)
            skips.append(h)
            h = down(h)
        h = self.mid(h, temb)
        for conv, block in zip(self.up_convs, self.up_blocks):
            h = conv(nn.functional.interpolate(h, scale_factor=2, mode="nearest"))
            h = block(torch.cat([h, skips.pop()], dim=1), temb)
        return self.head(self.act(self.head_norm(h))) + xt


class PatchDiscriminator(nn.Module):
    """Grid of raw real/fake logits, one per overlapping receptive field."""

    def __init__(self, config: DiscriminatorConfig):
        super().__init__()
        self.config = config
        stages = config.stages()
        layers: list[nn.Module] = []
        in_ch = config.image_channels
        out_ch = config.base_channels
        for k, s, p in stages[:-1]:
            layers.append(nn.Conv2d(in_ch, out_ch, k, stride=s, padding=p))
            layers.append(nn.LeakyReLU(0.2))
            in_ch = out_ch
            out_ch = min(out_ch * 2, config.base_channels * 8)
        k, s, p = stages[-1]
        layers.append(nn.Conv2d(in_ch, 1, k, stride=s, padding=p))
        self.body = nn.Sequential(*layers)
        init_weights(self)

    def forward(self, region: torch.Tensor) -> torch.Tensor:
        expected = patch_grid_shape(region.shape[-2:], self.config)
        out = self.body(region)
        assert out.shape[-2:] == expected
        return out

    def zero_output_layer(self) -> None:
        """Zero the final convolution so every patch scores exactly 0."""
        final = self.body[-1]
        nn.init.zeros_(final.weight)
        nn.init.zeros_(final.bias)


def patch_grid_shape(hw: tuple[int, int], config: DiscriminatorConfig) -> tuple[int, int]:
    """Score-grid dims after the discriminator's convolution stack."""
    h, w = hw
    if h < 1 or w < 1:
        raise ShapeMismatchError(f"input dims must be positive, got {hw}")
    for k, s, p in config.stages():
        h = (h + 2 * p - k) // s + 1
        w = (w + 2 * p - k) // s + 1
        if h < 1 or w < 1:
            raise ShapeMismatchError(
                f"input {hw} too small for discriminator with {config.num_layers} stages"
            )
    return h, w


def init_weights(module: nn.Module) -> None:
    """Convolutions: normal(0, 0.02) weights, zero biases."""
    for m in module.modules():
        if isinstance(m, nn.Conv2d):
            nn.init.normal_(m.weight, 0.0, 0.02)
            if m.bias is not None:
                nn.init.zeros_(m.bias)


def _conv_params(k, cin, cout):
    return k * k * cin * cout + cout


def generator_param_count(config: GeneratorConfig) -> int:
    """Closed-form parameter total; mirrors the layer arithmetic exactly.

    stem conv3 + per-level [resblock + downsampler conv3] + mid resblock +
    per-level [upsample conv3 + resblock on concatenated skips] + head
    (groupnorm + conv3) + time MLP (two linears). A residual block (cin, cout)
    costs 2 groupnorms (2*cin + 2*cout), conv3 cin->cout, conv3 cout->cout,
    linear tdim->cout, and a 1x1 skip conv when cin != cout.
    """
    chans = config.level_channels()
    tdim = config.time_embed_dim

    def resblock(cin, cout):
        total = 2 * cin + _conv_params(3, cin, cout) + (tdim * cout + cout)
        total += 2 * cout + _conv_params(3, cout, cout)
        if cin != cout:
            total += _conv_params(1, cin, cout)
        return total

    total = 2 * (tdim * tdim + tdim)
    total += _conv_params(3, config.input_channels, chans[0])
    for i in range(config.depth):
        in_ch = chans[i - 1] if i > 0 else chans[0]
        total += resblock(in_ch, chans[i]) + _conv_params(3, chans[i], chans[i])
    total += resblock(chans[-1], chans[-1])
    for i in reversed(range(config.depth)):
        out_ch = chans[i - 1] if i > 0 else chans[0]
        total += _conv_params(3, chans[i], chans[i]) + resblock(chans[i] * 2, out_ch)
    total += 2 * chans[0] + _conv_params(3, chans[0], config.image_channels)
    return total


def discriminator_param_count(config: DiscriminatorConfig) -> int:
    """Closed-form parameter total for the convolution stack."""
    stages = config.stages()
    total = 0
    in_ch = config.image_channels
    out_ch = config.base_channels
    for k, _, _ in stages[:-1]:
        total += _conv_params(k, in_ch, out_ch)
        in_ch = out_ch
        out_ch = min(out_ch * 2, config.base_channels * 8)
    total += _conv_params(stages[-1][0], in_ch, 1)
    return total
