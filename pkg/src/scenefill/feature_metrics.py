"""Learned-feature metric reducers and the feature-extractor plugin contract.

The package ships no pretrained feature network. A plugin is any object with
an ``extract(images) -> (N, D) array`` method (resolvable from a
"module:attribute" string); when none is configured the reducers report as
unavailable instead of failing. The reducers themselves are exact: the
Fréchet distance between Gaussian fits and the unbiased polynomial-kernel
MMD^2 with kernel (x . y / D + 1)^3.
"""

from __future__ import annotations

import importlib
from typing import Protocol, runtime_checkable

import numpy as np

from .errors import ConfigError, MetricError


@runtime_checkable
class FeatureExtractor(Protocol):
    def extract(self, images) -> np.ndarray: ...


def load_plugin(spec: str | None):
    """Resolve "package.module:attr" to an extractor instance, or None."""
    if not spec:
        return None
    if ":" not in spec:
        raise ConfigError(f"plugin spec must look like 'module:attr', got {spec!r}")
    mod_name, attr = spec.split(":", 1)
    try:
        obj = getattr(importlib.import_module(mod_name), attr)
    except (ImportError, AttributeError) as exc:
        raise ConfigError(f"cannot load feature plugin {spec!r}: {exc}") from exc
    extractor = obj() if isinstance(obj, type) else obj
    if not isinstance(extractor, FeatureExtractor):
        raise ConfigError(f"plugin {spec!r} lacks an extract(images) method")
    return extractor


def _as_features(x) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 2:
        raise MetricError(f"feature sets must be (N>=2, D) arrays, got shape {arr.shape}")
    return arr


def _symmetric_sqrt(mat: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(mat)
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


def frechet_distance(features_a, features_b) -> float:
    """Squared Fréchet distance between Gaussian fits of two feature sets:

        |mu_a - mu_b|^2 + tr(Ca + Cb - 2 (Ca Cb)^(1/2))
    """
    a, b = _as_features(features_a), _as_features(features_b)
    if a.shape[1] != b.shape[1]:
        raise MetricError(f"feature dims differ: {a.shape[1]} vs {b.shape[1]}")
    mu_a, mu_b = a.mean(axis=0), b.mean(axis=0)
    ca = np.atleast_2d(np.cov(a, rowvar=False))
    cb = np.atleast_2d(np.cov(b, rowvar=False))
    sqrt_ca = _symmetric_sqrt(ca)
    cross = np.trace(_symmetric_sqrt(sqrt_ca @ cb @ sqrt_ca))
    return float(np.sum((mu_a - mu_b) ** 2) + np.trace(ca) + np.trace(cb) - 2.0 * cross)


def polynomial_mmd(features_a, features_b, degree: int = 3, coef: float = 1.0) -> float:
    """Unbiased MMD^2 estimate with the polynomial kernel (x . y / D + coef)^degree."""
    a, b = _as_features(features_a), _as_features(features_b)
    if a.shape[1] != b.shape[1]:
        raise MetricError(f"feature dims differ: {a.shape[1]} vs {b.shape[1]}")
    d = a.shape[1]
    k_aa = (a @ a.T / d + coef) ** degree
    k_bb = (b @ b.T / d + coef) ** degree
    k_ab = (a @ b.T / d + coef) ** degree
    m, n = len(a), len(b)
    term_aa = (k_aa.sum() - np.trace(k_aa)) / (m * (m - 1))
    term_bb = (k_bb.sum() - np.trace(k_bb)) / (n * (n - 1))
    return float(term_aa + term_bb - 2.0 * k_ab.mean())


def feature_metric_report(extractor, real_images, generated_images) -> dict:
    """Fréchet + MMD over plugin features; degrades gracefully without a plugin."""
    if extractor is None:
        return {"available": False, "reason": "no feature-extractor plugin configured"}
    real = _as_features(extractor.extract(real_images))
    fake = _as_features(extractor.extract(generated_images))
    return {
        "available": True,
        "frechet": frechet_distance(real, fake),
        "kernel_mmd": polynomial_mmd(real, fake),
    }
