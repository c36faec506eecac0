import sys, time
import numpy as np
import torch

sys.path.insert(0, "tests")
from conftest import synthetic_scene_frames
from scenefill.evaluation import evaluate
from scenefill.image_core import normalize
from scenefill.masks import MaskConfig
from scenefill.training import state_from_payload, train_step

torch.manual_seed(0)
rng = np.random.default_rng(42)
frames = synthetic_scene_frames(rng, 10, 64)
images = [(f"img_{i:02d}", normalize(f)) for i, f in enumerate(frames)]
data = torch.stack([torch.from_numpy(img.data.transpose(2, 0, 1).copy()) for _, img in images])

payload = {
    "schedule": {"T": 800},
    "generator": {"base_channels": 32, "depth": 3, "time_embed_dim": 128},
    "discriminator": {"base_channels": 32, "num_layers": 2},
    "masks": {"target_ratio_range": [0.05, 0.5]},
    "training": {"batch_size": 10, "seed": 0, "epochs": 1,
                 "lr_generator": 2e-4, "lr_discriminator": 1e-4},
}
state = state_from_payload(payload)
eval_masks = MaskConfig(polygon_scale_range=(1.4, 2.4), hole_count_range=(0, 2),
                        hole_radius_range=(0.03, 0.08), target_ratio_range=(0.05, 0.3))


def check(step):
    state.generator.eval()
    report = evaluate(
        lambda xt, mask, t: state.generator(xt, mask, torch.full((xt.shape[0],), int(t), dtype=torch.long)),
        images, eval_masks, state.sched, seed=7, region="generated")
    state.generator.train()
    agg = report.aggregates()
    print(f"step {step}: gen-SSIM {agg['ssim']['mean']:.4f} gen-L1 {agg['l1_percent']['mean']:.3f}%", flush=True)


t0 = time.time()
for step in range(1, 2001):
    rec = train_step(state, data)
    if step % 100 == 0:
        print(f"[{time.time()-t0:6.0f}s] step {step} mse {rec.mse_noise:.4f} ssim_l {rec.ssim_loss:.4f} g {rec.g_adv:.3f} d {rec.d_loss:.3f}", flush=True)
    if step % 250 == 0:
        check(step)
print("done total", time.time() - t0)
