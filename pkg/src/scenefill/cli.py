"""Command-line entry point: mask-gen, train, infer, eval, sweep-t, plot.

A run is fully determined by one JSON config (defaults < file < --set flag
overrides); the resolved config is echoed into every output directory. The
default config file path can be set via the SCENEFILL_CONFIG environment
variable.
"""

from __future__ import annotations

import argparse
import copy
import json
import os
import sys
from pathlib import Path

import numpy as np
import torch

from . import data_io, plots
from .diffusion import linear_beta_schedule
from .errors import ConfigError, ScenefillError
from .evaluation import (
    MetricsReport,
    bucket_report,
    evaluate,
    write_aggregate_json,
    write_bucket_csv,
    write_report_csv,
)
from .image_core import ImageTensor, load_image_png, load_mask_png, mask_ratio, save_image_png, save_mask_png
from .masks import MaskConfig, sample_mask
from .training import (
    TrainingDiverged,
    load_checkpoint,
    save_checkpoint,
    state_from_payload,
    write_loss_csv,
)

CONFIG_SCHEMA = 1

DEFAULT_CONFIG = {
    "schema_version": CONFIG_SCHEMA,
    "seed": 0,
    "data": {"root": None, "resolution": 256, "ratios": [0.70, 0.15, 0.15], "split_seed": 0},
    "masks": {
        "vertex_count_range": [5, 12],
        "polygon_scale_range": [0.8, 1.5],
        "hole_count_range": [0, 3],
        "hole_radius_range": [0.04, 0.12],
        "target_ratio_range": [0.05, 0.6],
        "max_attempts": 100,
    },
    "schedule": {"T": 800, "beta_start": 1e-4, "beta_end": 0.02},
    "generator": {"base_channels": 64, "depth": 4, "time_embed_dim": 256, "image_channels": 3},
    "discriminator": {"base_channels": 64, "num_layers": 3, "image_channels": 3},
    "training": {
        "lr_generator": 2e-4,
        "lr_discriminator": 2e-4,
        "batch_size": 8,
        "epochs": 1,
        "max_steps": None,
        "lambda_mse": 1.0,
        "lambda_ssim": 1.0,
        "lambda_adv": 0.01,
        "checkpoint_every": 500,
    },
    "eval": {"bucket_edges": [0.0, 0.2, 0.4, 0.6, 1.0], "region": "full", "t": None},
}


def deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def resolve_config(config_path: str | None, overrides: list[str] | None) -> dict:
    config = copy.deepcopy(DEFAULT_CONFIG)
    path = config_path or os.environ.get("SCENEFILL_CONFIG")
    if path:
        try:
            with open(path) as f:
                file_config = json.load(f)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if file_config.get("schema_version", CONFIG_SCHEMA) != CONFIG_SCHEMA:
            raise ConfigError(f"unsupported config schema {file_config.get('schema_version')}")
        config = deep_merge(config, file_config)
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        dotted, raw_value = item.split("=", 1)
        keys = dotted.split(".")
        try:
            value = json.loads(raw_value)
        except json.JSONDecodeError:
            value = raw_value
        node = config
        for key in keys[:-1]:
            node = node.setdefault(key, {})
        node[keys[-1]] = value
    return config


def echo_config(config: dict, out_dir: Path) -> None:
    with open(out_dir / "resolved_config.json", "w") as f:
        json.dump(config, f, indent=2, sort_keys=True)


def mask_config_from(config: dict) -> MaskConfig:
    section = {
        k: tuple(v) if isinstance(v, list) else v for k, v in config["masks"].items()
    }
    return MaskConfig(**section)


def training_payload(config: dict) -> dict:
    """Config sections that determine a training run; hashed into checkpoints."""
    return {
        "schedule": config["schedule"],
        "generator": config["generator"],
        "discriminator": config["discriminator"],
        "masks": config["masks"],
        "training": {**config["training"], "seed": config["seed"]},
        "resolution": config["data"]["resolution"],
    }


def predictor_from_state(state):
    generator = state.generator
    generator.eval()

    def predict(xt, mask, t):
        t_vec = torch.full((xt.shape[0],), int(t), dtype=torch.long)
        with torch.no_grad():
            return generator(xt, mask, t_vec)

    return predict


def _stack_split(images) -> torch.Tensor:
    return torch.stack(
        [torch.from_numpy(img.data.transpose(2, 0, 1).copy()) for _, img in images]
    )


def cmd_mask_gen(args) -> int:
    config = resolve_config(args.config, args.set)
    mask_config = mask_config_from(config)
    size = args.size or config["data"]["resolution"]
    seed = config["seed"] if args.seed is None else args.seed
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    echo_config(config, out_dir)
    for index in range(args.count):
        rng = np.random.default_rng([seed, index])
        mask = sample_mask(rng, mask_config, (size, size))
        stem = f"mask_{index:04d}"
        save_mask_png(mask, out_dir / f"{stem}.png")
        sidecar = {
            "seed": seed,
            "index": index,
            "size": size,
            "achieved_ratio": mask_ratio(mask),
            "config": config["masks"],
        }
        with open(out_dir / f"{stem}.json", "w") as f:
            json.dump(sidecar, f, indent=2, sort_keys=True)
    print(f"wrote {args.count} masks to {out_dir}")
    return 0


def cmd_train(args) -> int:
    config = resolve_config(args.config, args.set)
    if args.data_root:
        config["data"]["root"] = args.data_root
    if not config["data"]["root"]:
        raise ConfigError("train needs a dataset root (--data-root or data.root)")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    echo_config(config, out_dir)

    manifest = data_io.build_manifest(
        config["data"]["root"],
        ratios=config["data"]["ratios"],
        seed=config["data"]["split_seed"],
        resolution=config["data"]["resolution"],
    )
    manifest.save(out_dir / "manifest.json")
    images = data_io.load_split(manifest, "train")
    data = _stack_split(images)

    payload = training_payload(config)
    if args.resume:
        state = load_checkpoint(args.resume, payload)
        print(f"resumed from {args.resume} at epoch {state.epoch}, step {state.step}")
    else:
        state = state_from_payload(payload)

    def on_step(s, record):
        if s.step % s.config.checkpoint_every == 0:
            save_checkpoint(s, out_dir / f"ckpt_step{s.step:06d}.pt")
        if args.log_every and record.step % args.log_every == 0:
            print(
                f"step {record.step}: mse {record.mse_noise:.4f} "
                f"ssim_loss {record.ssim_loss:.4f} g_adv {record.g_adv:.4f} "
                f"d_loss {record.d_loss:.4f}"
            )

    try:
        from .training import train_loop

        train_loop(state, data, on_step=on_step)
    except KeyboardInterrupt:
        save_checkpoint(state, out_dir / "ckpt_interrupt.pt")
        write_loss_csv(state.history, out_dir / "loss.csv")
        print(f"interrupted; checkpoint saved at step {state.step}")
        return 130
    except TrainingDiverged as exc:
        write_loss_csv(state.history, out_dir / "loss.csv")
        with open(out_dir / "divergence.json", "w") as f:
            json.dump(
                {"step": exc.record.step, "record": exc.record.__dict__}, f, indent=2
            )
        print(f"training aborted: {exc}", file=sys.stderr)
        return 1
    save_checkpoint(state, out_dir / "ckpt_final.pt")
    write_loss_csv(state.history, out_dir / "loss.csv")
    print(f"finished epoch {state.epoch} at step {state.step}; outputs in {out_dir}")
    return 0


def cmd_infer(args) -> int:
    state = load_checkpoint(args.checkpoint)
    img = load_image_png(args.image)
    mask = load_mask_png(args.mask)
    if mask.shape != (img.height, img.width):
        raise ConfigError(
            f"mask {mask.shape} does not match image {(img.height, img.width)}"
        )
    t = args.t or state.sched.T
    rng = np.random.default_rng(args.seed)
    eps = rng.standard_normal((img.channels, img.height, img.width)).astype(np.float32)

    from .diffusion import forward_diffuse, reconstruct_single_step

    x0_t = torch.from_numpy(img.data.transpose(2, 0, 1)[None].copy())
    mask_t = torch.from_numpy(mask.data[None, None])
    eps_t = torch.from_numpy(eps[None])
    with torch.no_grad():
        xt = forward_diffuse(x0_t, mask_t, t, eps_t, state.sched)
        if args.oracle:
            eps_hat = eps_t  # bypass the network: sanity mode for the plumbing
        else:
            eps_hat = predictor_from_state(state)(xt, mask_t, t)
        x0_hat = reconstruct_single_step(xt, eps_hat, mask_t, t, state.sched)
    out = ImageTensor(x0_hat[0].numpy().transpose(1, 2, 0), "signed")
    save_image_png(out, args.out)
    print(f"wrote {args.out} (t={t}, mask ratio {mask_ratio(mask):.3f})")
    return 0


def _eval_report(state, config, manifest, split, t_override=None) -> MetricsReport:
    """Evaluate at step t; a t different from the checkpoint's T rebuilds a
    schedule of that length (same beta bounds), which is what a T-sweep means."""
    images = data_io.load_split(manifest, split)
    t = t_override if t_override is not None else config["eval"]["t"]
    if t is not None and t != state.sched.T:
        schedule_cfg = state.config_payload.get("schedule", config["schedule"])
        sched = linear_beta_schedule(
            t, schedule_cfg.get("beta_start", 1e-4), schedule_cfg.get("beta_end", 0.02)
        )
    else:
        sched = state.sched
        t = state.sched.T if t is None else t
    return evaluate(
        predictor_from_state(state),
        images,
        mask_config_from(config),
        sched,
        seed=config["seed"],
        t=t,
        region=config["eval"]["region"],
    )


def cmd_eval(args) -> int:
    config = resolve_config(args.config, args.set)
    if args.data_root:
        config["data"]["root"] = args.data_root
    if not config["data"]["root"]:
        raise ConfigError("eval needs a dataset root (--data-root or data.root)")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    echo_config(config, out_dir)
    state = load_checkpoint(args.checkpoint)
    manifest = data_io.build_manifest(
        config["data"]["root"],
        ratios=config["data"]["ratios"],
        seed=config["data"]["split_seed"],
        resolution=config["data"]["resolution"],
    )
    report = _eval_report(state, config, manifest, args.split)
    write_report_csv(report, out_dir / "per_image.csv")
    write_aggregate_json(report, out_dir / "aggregate.json")
    rows = bucket_report(report, config["eval"]["bucket_edges"])
    write_bucket_csv(rows, out_dir / "buckets.csv")
    agg = report.aggregates()
    print(
        f"{args.split}: n={agg['count']} psnr {agg['psnr_db']['mean']:.3f} dB "
        f"ssim {agg['ssim']['mean']:.4f} l1 {agg['l1_percent']['mean']:.3f}%"
    )
    return 0


def run_sweep(state, images, mask_config, t_values, seed, region="full"):
    """Evaluate one model across schedule lengths; returns [(T, MetricsReport)]."""
    if len(set(t_values)) != len(t_values):
        raise ConfigError(f"duplicate T values in sweep: {t_values}")
    schedule_cfg = state.config_payload.get("schedule", {})
    results = []
    for t_value in t_values:
        if t_value == state.sched.T:
            sched = state.sched
        else:
            sched = linear_beta_schedule(
                t_value,
                schedule_cfg.get("beta_start", 1e-4),
                schedule_cfg.get("beta_end", 0.02),
            )
        report = evaluate(
            predictor_from_state(state),
            images,
            mask_config,
            sched,
            seed=seed,
            t=t_value,
            region=region,
        )
        results.append((t_value, report))
    return results


def run_sweep_rows(state, images, mask_config, t_values, seed, region="full"):
    """(T, mean psnr, mean ssim, mean l1%) per swept schedule length."""
    rows = []
    for t_value, report in run_sweep(state, images, mask_config, t_values, seed, region):
        agg = report.aggregates()
        rows.append(
            (t_value, agg["psnr_db"]["mean"], agg["ssim"]["mean"], agg["l1_percent"]["mean"])
        )
    return rows


def cmd_sweep_t(args) -> int:
    config = resolve_config(args.config, args.set)
    if args.data_root:
        config["data"]["root"] = args.data_root
    if not config["data"]["root"]:
        raise ConfigError("sweep-t needs a dataset root (--data-root or data.root)")
    t_values = [int(v) for v in args.t_values.split(",") if v.strip()]
    if not t_values:
        raise ConfigError("sweep-t needs at least one T value")
    if len(set(t_values)) != len(t_values):
        raise ConfigError(f"duplicate T values in sweep: {t_values}")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    echo_config(config, out_dir)
    manifest = data_io.build_manifest(
        config["data"]["root"],
        ratios=config["data"]["ratios"],
        seed=config["data"]["split_seed"],
        resolution=config["data"]["resolution"],
    )
    images = data_io.load_split(manifest, args.split)
    combined = []
    for t_value in t_values:
        if args.mode == "train":
            payload = training_payload(config)
            payload["schedule"] = {**payload["schedule"], "T": t_value}
            state = state_from_payload(payload)
            from .training import train_loop

            train_loop(state, _stack_split(data_io.load_split(manifest, "train")))
            save_checkpoint(state, out_dir / f"ckpt_T{t_value}.pt")
        else:
            if not args.checkpoint:
                raise ConfigError("sweep-t in eval mode needs --checkpoint")
            state = load_checkpoint(args.checkpoint)
        ((_, report),) = run_sweep(
            state,
            images,
            mask_config_from(config),
            [t_value],
            seed=config["seed"],
            region=config["eval"]["region"],
        )
        write_report_csv(report, out_dir / f"per_image_T{t_value}.csv")
        write_aggregate_json(report, out_dir / f"aggregate_T{t_value}.json")
        agg = report.aggregates()
        combined.append(
            (t_value, agg["psnr_db"]["mean"], agg["ssim"]["mean"], agg["l1_percent"]["mean"])
        )
    with open(out_dir / "sweep.csv", "w") as f:
        f.write("T,psnr_db,ssim,l1_percent\n")
        for t_value, p, s, l1 in combined:
            f.write(f"{t_value},{p:.6f},{s:.6f},{l1:.6f}\n")
    print(f"swept T over {t_values}; combined CSV in {out_dir / 'sweep.csv'}")
    return 0


def cmd_plot(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    wrote = []
    if args.loss_csv:
        plots.plot_loss_curves(args.loss_csv, out_dir / "loss_curves.png")
        wrote.append("loss_curves.png")
    if args.bucket_csv:
        for metric in ("psnr_db", "ssim", "l1_percent"):
            plots.plot_bucket_bars(args.bucket_csv, out_dir / f"buckets_{metric}.png", metric)
            wrote.append(f"buckets_{metric}.png")
    if args.sweep_csv:
        for metric in ("psnr_db", "ssim", "l1_percent"):
            plots.plot_sweep_lines(args.sweep_csv, out_dir / f"sweep_{metric}.png", metric)
            wrote.append(f"sweep_{metric}.png")
    if not wrote:
        raise ConfigError("plot needs at least one of --loss-csv/--bucket-csv/--sweep-csv")
    print(f"wrote {', '.join(wrote)} to {out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scenefill",
        description="Self-supervised image completion: masked diffusion + single-step denoising + patch-adversarial refinement.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file (or $SCENEFILL_CONFIG)")
        p.add_argument(
            "--set",
            action="append",
            metavar="SECTION.KEY=VALUE",
            help="override a config value (JSON-parsed); repeatable",
        )

    p = sub.add_parser("mask-gen", help="emit random polygonal masks + JSON sidecars")
    common(p)
    p.add_argument("--count", type=int, default=5)
    p.add_argument("--size", type=int, help="mask side length (defaults to data.resolution)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_mask_gen)

    p = sub.add_parser("train", help="train on a directory of frames")
    common(p)
    p.add_argument("--data-root")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--resume", help="checkpoint to continue from")
    p.add_argument("--log-every", type=int, default=50)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="complete one masked image")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--t", type=int, help="diffusion step (defaults to the schedule's T)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--oracle",
        action="store_true",
        help="bypass the network and reuse the sampled noise (plumbing sanity mode)",
    )
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", help="metrics over a dataset split")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data-root")
    p.add_argument("--split", default="test", choices=["train", "val", "test"])
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep-t", help="evaluate (or train) across diffusion-step counts")
    common(p)
    p.add_argument("--checkpoint", help="required in eval mode")
    p.add_argument("--data-root")
    p.add_argument("--split", default="test", choices=["train", "val", "test"])
    p.add_argument("--t-values", required=True, help="comma-separated, e.g. 700,800,900")
    p.add_argument("--mode", default="eval", choices=["eval", "train"])
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_sweep_t)

    p = sub.add_parser("plot", help="figures from loss/bucket/sweep CSVs")
    p.add_argument("--loss-csv")
    p.add_argument("--bucket-csv")
    p.add_argument("--sweep-csv")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ScenefillError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
