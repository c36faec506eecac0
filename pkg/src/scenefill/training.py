"""Alternating generator/discriminator training over masked diffusion batches.

One step: sample per-image masks and step indices, noise the generated region,
predict the noise, rebuild the image in closed form, update the generator on
weighted noise-MSE + SSIM + adversarial terms, then update the discriminator
on real/fake generated-region content. All randomness flows through the two
generators owned by the state (torch for noise/steps/shuffling, numpy for
masks), so a fixed seed fixes the run and checkpoints can resume it exactly.
"""

from __future__ import annotations

import hashlib
import io
import json
import pickle
from dataclasses import dataclass, field

import numpy as np
import torch

from .diffusion import BetaSchedule, forward_diffuse, linear_beta_schedule, reconstruct_single_step
from .errors import CheckpointError, ConfigError, ScenefillError
from .losses import adversarial_losses, noise_mse, restrict_to_generated, ssim_loss
from .masks import MaskConfig, sample_mask
from .networks import DiscriminatorConfig, Generator, GeneratorConfig, PatchDiscriminator

CHECKPOINT_FORMAT = 1


class TrainingDiverged(ScenefillError):
    """A loss went non-finite; carries the offending record."""

    def __init__(self, record):
        super().__init__(f"non-finite loss at step {record.step}: {record}")
        self.record = record


@dataclass(frozen=True)
class TrainingConfig:
    T: int = 800
    beta_start: float = 1e-4
    beta_end: float = 0.02
    lr_generator: float = 2e-4
    lr_discriminator: float = 2e-4
    adam_betas: tuple[float, float] = (0.5, 0.999)
    batch_size: int = 8
    epochs: int = 1
    max_steps: int | None = None
    lambda_mse: float = 1.0
    lambda_ssim: float = 1.0
    lambda_adv: float = 0.01
    seed: int = 0
    checkpoint_every: int = 500

    def __post_init__(self):
        if self.lr_generator <= 0 or self.lr_discriminator <= 0:
            raise ConfigError("learning rates must be positive")
        if min(self.lambda_mse, self.lambda_ssim, self.lambda_adv) < 0:
            raise ConfigError("loss weights must be non-negative")
        if self.batch_size < 1:
            raise ConfigError("batch size must be at least 1")
        if self.epochs < 0 or self.checkpoint_every < 1:
            raise ConfigError("epochs must be >= 0 and checkpoint cadence positive")


@dataclass(frozen=True)
class LossRecord:
    step: int
    mse_noise: float
    ssim_loss: float
    g_adv: float
    d_loss: float

    def is_finite(self) -> bool:
        return all(np.isfinite(v) for v in (self.mse_noise, self.ssim_loss, self.g_adv, self.d_loss))


@dataclass
class TrainState:
    generator: Generator
    discriminator: PatchDiscriminator
    g_opt: torch.optim.Optimizer
    d_opt: torch.optim.Optimizer
    sched: BetaSchedule
    config: TrainingConfig
    mask_config: MaskConfig
    config_payload: dict
    torch_gen: torch.Generator
    mask_rng: np.random.Generator
    epoch: int = 0
    step: int = 0
    history: list[LossRecord] = field(default_factory=list)


RUN_LENGTH_KEYS = ("epochs", "max_steps", "checkpoint_every")


def config_fingerprint(payload: dict) -> str:
    """Hash of everything that must match for a checkpoint to be resumable.

    Run-length settings (epochs, max_steps, checkpoint cadence) are excluded:
    extending a run is exactly what resume is for.
    """
    canon = {k: dict(v) if isinstance(v, dict) else v for k, v in payload.items()}
    for key in RUN_LENGTH_KEYS:
        canon.get("training", {}).pop(key, None)
    return hashlib.sha256(json.dumps(canon, sort_keys=True).encode()).hexdigest()


def build_train_state(
    config: TrainingConfig,
    gen_config: GeneratorConfig,
    disc_config: DiscriminatorConfig,
    mask_config: MaskConfig,
    config_payload: dict | None = None,
) -> TrainState:
    sched = linear_beta_schedule(config.T, config.beta_start, config.beta_end)
    torch_gen = torch.Generator().manual_seed(config.seed)
    # network init draws from global RNG; pin it so builds are reproducible
    torch.manual_seed(config.seed)
    generator = Generator(gen_config)
    discriminator = PatchDiscriminator(disc_config)
    g_opt = torch.optim.Adam(generator.parameters(), lr=config.lr_generator, betas=config.adam_betas)
    d_opt = torch.optim.Adam(
        discriminator.parameters(), lr=config.lr_discriminator, betas=config.adam_betas
    )
    return TrainState(
        generator=generator,
        discriminator=discriminator,
        g_opt=g_opt,
        d_opt=d_opt,
        sched=sched,
        config=config,
        mask_config=mask_config,
        config_payload=dict(config_payload or {}),
        torch_gen=torch_gen,
        mask_rng=np.random.default_rng(config.seed),
    )


def sample_batch_masks(state: TrainState, batch_shape) -> torch.Tensor:
    b, _, h, w = batch_shape
    masks = [sample_mask(state.mask_rng, state.mask_config, (h, w)).data for _ in range(b)]
    return torch.from_numpy(np.stack(masks)[:, None, :, :])


def train_step(state: TrainState, batch: torch.Tensor) -> LossRecord:
    """One generator + discriminator alternation on a signed-range BCHW batch."""
    cfg = state.config
    mask = sample_batch_masks(state, batch.shape)
    t = torch.randint(1, state.sched.T + 1, (batch.shape[0],), generator=state.torch_gen)
    eps = torch.empty_like(batch).normal_(generator=state.torch_gen)
    xt = forward_diffuse(batch, mask, t, eps, state.sched)

    eps_hat = state.generator(xt, mask, t)
    x0_hat = reconstruct_single_step(xt, eps_hat, mask, t, state.sched)
    mse = noise_mse(eps_hat, eps, mask)
    ssim_term = ssim_loss(x0_hat, batch)
    real_region = restrict_to_generated(batch, mask)
    fake_region = restrict_to_generated(x0_hat, mask)
    g_adv, d_loss = adversarial_losses(state.discriminator, real_region, fake_region)

    g_total = cfg.lambda_mse * mse + cfg.lambda_ssim * ssim_term + cfg.lambda_adv * g_adv
    state.g_opt.zero_grad()
    g_total.backward(retain_graph=False)
    state.g_opt.step()

    state.d_opt.zero_grad()
    d_loss.backward()
    state.d_opt.step()

    state.step += 1
    record = LossRecord(
        step=state.step,
        mse_noise=float(mse.detach()),
        ssim_loss=float(ssim_term.detach()),
        g_adv=float(g_adv.detach()),
        d_loss=float(d_loss.detach()),
    )
    state.history.append(record)
    if not record.is_finite():
        raise TrainingDiverged(record)
    return record


def train_loop(state: TrainState, data: torch.Tensor, on_step=None, on_epoch_end=None):
    """Epochs of shuffled batches over a signed-range (N, C, H, W) dataset."""
    cfg = state.config
    records = []
    while state.epoch < cfg.epochs:
        perm = torch.randperm(data.shape[0], generator=state.torch_gen)
        for start in range(0, data.shape[0], cfg.batch_size):
            if cfg.max_steps is not None and state.step >= cfg.max_steps:
                return records
            batch = data[perm[start : start + cfg.batch_size]]
            record = train_step(state, batch)
            records.append(record)
            if on_step is not None:
                on_step(state, record)
        state.epoch += 1
        if on_epoch_end is not None:
            on_epoch_end(state)
    return records


def _to_plain(obj):
    """Replace tensors with numpy leaves; pickled tensors embed storage
    addresses, which would break byte-for-byte save determinism."""
    if isinstance(obj, torch.Tensor):
        return {"__tensor__": obj.detach().cpu().numpy()}
    if isinstance(obj, dict):
        return {k: _to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        converted = [_to_plain(v) for v in obj]
        return converted if isinstance(obj, list) else tuple(converted)
    return obj


def _from_plain(obj):
    if isinstance(obj, dict):
        if set(obj.keys()) == {"__tensor__"}:
            return torch.from_numpy(obj["__tensor__"].copy())
        return {k: _from_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        converted = [_from_plain(v) for v in obj]
        return converted if isinstance(obj, list) else tuple(converted)
    return obj


def save_checkpoint(state: TrainState, path) -> None:
    """Serialize networks, optimizers, counters, and both RNG states."""
    blob = {
        "format": CHECKPOINT_FORMAT,
        "fingerprint": config_fingerprint(state.config_payload),
        "config_payload": state.config_payload,
        "generator": _to_plain(dict(state.generator.state_dict())),
        "discriminator": _to_plain(dict(state.discriminator.state_dict())),
        "g_opt": _to_plain(state.g_opt.state_dict()),
        "d_opt": _to_plain(state.d_opt.state_dict()),
        "epoch": state.epoch,
        "step": state.step,
        "torch_rng": state.torch_gen.get_state().numpy(),
        "mask_rng": state.mask_rng.bit_generator.state,
        "history": [
            (r.step, r.mse_noise, r.ssim_loss, r.g_adv, r.d_loss) for r in state.history
        ],
    }
    buf = io.BytesIO()
    pickler = pickle.Pickler(buf, protocol=4)
    # the blob is a tree: disable memoization so byte output depends only on
    # values, not on which strings happen to be interned/shared in memory
    pickler.fast = True
    pickler.dump(blob)
    with open(path, "wb") as f:
        f.write(buf.getvalue())


def read_checkpoint_blob(path) -> dict:
    try:
        with open(path, "rb") as f:
            blob = pickle.load(f)
    except (pickle.UnpicklingError, EOFError, OSError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if not isinstance(blob, dict) or blob.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path} is not a format-{CHECKPOINT_FORMAT} checkpoint")
    return blob


def load_checkpoint(path, expected_payload: dict | None = None) -> TrainState:
    """Rebuild a TrainState; verifies the config fingerprint when one is given.

    When `expected_payload` matches, the state is rebuilt from it, so the
    caller's run-length settings (a later epoch target, say) take effect.
    """
    blob = read_checkpoint_blob(path)
    if expected_payload is not None:
        expected = config_fingerprint(expected_payload)
        if expected != blob["fingerprint"]:
            raise CheckpointError(
                f"config fingerprint mismatch: checkpoint {blob['fingerprint'][:12]} "
                f"vs current {expected[:12]}"
            )
    payload = expected_payload if expected_payload is not None else blob["config_payload"]
    state = state_from_payload(payload)
    state.generator.load_state_dict(_from_plain(blob["generator"]))
    state.discriminator.load_state_dict(_from_plain(blob["discriminator"]))
    state.g_opt.load_state_dict(_from_plain(blob["g_opt"]))
    state.d_opt.load_state_dict(_from_plain(blob["d_opt"]))
    state.epoch = blob["epoch"]
    state.step = blob["step"]
    state.torch_gen.set_state(torch.from_numpy(blob["torch_rng"].copy()))
    state.mask_rng.bit_generator.state = blob["mask_rng"]
    state.history = [LossRecord(*row) for row in blob["history"]]
    return state


def _tuplify(section: dict) -> dict:
    return {k: tuple(v) if isinstance(v, list) else v for k, v in section.items()}


def state_from_payload(payload: dict) -> TrainState:
    """Build a fresh TrainState from the config sections echoed into checkpoints."""
    training = {**payload.get("schedule", {}), **payload.get("training", {})}
    return build_train_state(
        TrainingConfig(**_tuplify(training)),
        GeneratorConfig(**payload.get("generator", {})),
        DiscriminatorConfig(**payload.get("discriminator", {})),
        MaskConfig(**_tuplify(payload.get("masks", {}))),
        config_payload=payload,
    )


def write_loss_csv(records, path) -> None:
    with open(path, "w") as f:
        f.write("step,mse_noise,ssim_loss,g_adv,d_loss\n")
        for r in records:
            f.write(f"{r.step},{r.mse_noise:.8g},{r.ssim_loss:.8g},{r.g_adv:.8g},{r.d_loss:.8g}\n")
