"""Pilot: can the small preset hit gen-region SSIM >= 0.60 / L1 <= 8.0 within 2000 steps?"""
import sys
import time

import numpy as np
import torch

sys.path.insert(0, "tests")
from conftest import synthetic_frame

from scenefill.evaluation import evaluate
from scenefill.image_core import ImageTensor, normalize
from scenefill.masks import MaskConfig
from scenefill.training import state_from_payload, train_step

torch.manual_seed(0)
rng = np.random.default_rng(42)
images = []
for i in range(10):
    raw = synthetic_frame(rng, 64)
    images.append((f"img_{i:02d}", normalize(raw)))
data = torch.stack([torch.from_numpy(img.data.transpose(2, 0, 1).copy()) for _, img in images])

payload = {
    "schedule": {"T": 800},
    "generator": {"base_channels": 32, "depth": 3, "time_embed_dim": 128},
    "discriminator": {"base_channels": 32, "num_layers": 2},
    "masks": {"target_ratio_range": [0.05, 0.5]},
    "training": {"batch_size": 10, "seed": 0, "epochs": 1},
}
state = state_from_payload(payload)

eval_masks = MaskConfig(target_ratio_range=(0.05, 0.3))


def check(step):
    report = evaluate(
        lambda xt, mask, t: state.generator(
            xt, mask, torch.full((xt.shape[0],), int(t), dtype=torch.long)
        ),
        images,
        eval_masks,
        state.sched,
        seed=7,
        region="generated",
    )
    agg = report.aggregates()
    print(
        f"step {step}: gen-SSIM {agg['ssim']['mean']:.4f} gen-L1 {agg['l1_percent']['mean']:.3f}% "
        f"gen-PSNR {agg['psnr_db']['mean']:.2f}",
        flush=True,
    )
    return agg


t0 = time.time()
for step in range(1, 2001):
    rec = train_step(state, data)
    if step % 100 == 0:
        print(f"[{time.time()-t0:6.0f}s] step {step} mse {rec.mse_noise:.4f} ssim_l {rec.ssim_loss:.4f} g {rec.g_adv:.3f} d {rec.d_loss:.3f}", flush=True)
    if step % 250 == 0:
        state.generator.eval()
        agg = check(step)
        state.generator.train()
        if agg["ssim"]["mean"] >= 0.65 and agg["l1_percent"]["mean"] <= 7.0:
            print(f"target comfortably reached at step {step}; total {time.time()-t0:.0f}s")
            break
print("done", time.time() - t0)
