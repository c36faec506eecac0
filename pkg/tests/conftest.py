import numpy as np
import pytest
from PIL import Image


def synthetic_frame(rng: np.random.Generator, size: int = 64, channels: int = 3) -> np.ndarray:
    """Smooth low-frequency uint8 test image; learnable at desk scale."""
    yy, xx = np.mgrid[0:size, 0:size] / size
    img = np.zeros((size, size, channels))
    for c in range(channels):
        acc = np.zeros((size, size))
        for _ in range(3):
            fx, fy = rng.uniform(0.3, 2.5, 2)
            phase = rng.uniform(0, 2 * np.pi)
            acc += rng.uniform(0.4, 1.0) * np.cos(2 * np.pi * (fx * xx + fy * yy) + phase)
        span = acc.max() - acc.min()
        img[:, :, c] = (acc - acc.min()) / (span + 1e-9)
    return np.round(img * 255).astype(np.uint8)


def synthetic_scene_frames(
    rng: np.random.Generator, count: int, size: int = 64, channels: int = 3
) -> list[np.ndarray]:
    """Correlated views of one underlying scene: a shared texture seen through
    small shifts and brightness jitter, like consecutive frames of one video."""
    big = synthetic_frame(rng, size * 2, channels).astype(np.float64)
    frames = []
    for _ in range(count):
        oy, ox = rng.integers(0, size, size=2)
        crop = big[oy : oy + size, ox : ox + size]
        gain = rng.uniform(0.85, 1.0)
        frames.append(np.clip(crop * gain, 0, 255).round().astype(np.uint8))
    return frames


def write_dataset(root, count: int, size: int = 64, seed: int = 0) -> list[str]:
    rng = np.random.default_rng(seed)
    ids = []
    for i, frame in enumerate(synthetic_scene_frames(rng, count, size)):
        name = f"frame_{i:03d}.png"
        Image.fromarray(frame).save(root / name)
        ids.append(name)
    return ids


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
