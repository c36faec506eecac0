import numpy as np
import pytest

from scenefill.errors import ConfigError, MetricError
from scenefill.feature_metrics import (
    feature_metric_report,
    frechet_distance,
    load_plugin,
    polynomial_mmd,
)


class TestFrechet:
    def test_identical_sets_zero(self, rng):
        feats = rng.normal(size=(500, 8))
        assert frechet_distance(feats, feats) == pytest.approx(0.0, abs=1e-10)

    def test_unit_mean_shift_1d_gaussians(self):
        # N(0,1) vs N(1,1): |mu|^2 + (1 + 1 - 2) = 1
        rng = np.random.default_rng(0)
        a = rng.normal(0, 1, (10000, 1))
        b = rng.normal(1, 1, (10000, 1))
        assert frechet_distance(a, b) == pytest.approx(1.0, rel=0.02)

    def test_diagonal_gaussians_closed_form(self):
        # diagonal covariances: d^2 = |mu_a-mu_b|^2 + sum (s_a + s_b - 2 sqrt(s_a s_b))
        rng = np.random.default_rng(1)
        a = rng.normal(0, 1, (40000, 2)) * np.array([1.0, 2.0])
        b = rng.normal(0, 1, (40000, 2)) * np.array([2.0, 1.0]) + np.array([0.5, 0.0])
        expected = 0.25 + 2 * (1 + 4 - 2 * 2)
        assert frechet_distance(a, b) == pytest.approx(expected, rel=0.05)

    def test_dim_mismatch(self, rng):
        with pytest.raises(MetricError):
            frechet_distance(rng.normal(size=(10, 2)), rng.normal(size=(10, 3)))

    def test_needs_two_samples(self, rng):
        with pytest.raises(MetricError):
            frechet_distance(rng.normal(size=(1, 2)), rng.normal(size=(10, 2)))


class TestPolynomialMmd:
    def test_same_distribution_near_zero(self):
        rng = np.random.default_rng(2)
        a = rng.normal(0, 1, (4000, 4))
        b = rng.normal(0, 1, (4000, 4))
        assert abs(polynomial_mmd(a, b)) < 0.05

    def test_unit_shift_1d_closed_form(self):
        # k(x,y) = (xy + 1)^3; E_PP = 4, E_QQ = 32, E_PQ = 7 -> MMD^2 = 22
        rng = np.random.default_rng(0)
        a = rng.normal(0, 1, (10000, 1))
        b = rng.normal(1, 1, (10000, 1))
        assert polynomial_mmd(a, b) == pytest.approx(22.0, rel=0.02)

    def test_unbiasedness_sign(self):
        # identical sets still include cross terms; estimator may go negative,
        # which the biased plug-in never does
        rng = np.random.default_rng(3)
        values = [
            polynomial_mmd(rng.normal(size=(50, 2)), rng.normal(size=(50, 2)))
            for _ in range(200)
        ]
        assert min(values) < 0.0
        assert abs(float(np.mean(values))) < 0.05


class TestPlugin:
    def test_absent_plugin_degrades_gracefully(self):
        report = feature_metric_report(None, [], [])
        assert report == {
            "available": False,
            "reason": "no feature-extractor plugin configured",
        }

    def test_load_plugin_none(self):
        assert load_plugin(None) is None
        assert load_plugin("") is None

    def test_load_plugin_bad_spec(self):
        with pytest.raises(ConfigError):
            load_plugin("no_colon_here")
        with pytest.raises(ConfigError):
            load_plugin("nonexistent_module_xyz:thing")

    def test_duck_typed_extractor(self, rng):
        class MeanFeatures:
            def extract(self, images):
                return np.stack([np.asarray(img).mean(axis=(0, 1)) for img in images])

        images_a = [rng.random((8, 8, 3)) for _ in range(16)]
        images_b = [rng.random((8, 8, 3)) + 0.5 for _ in range(16)]
        report = feature_metric_report(MeanFeatures(), images_a, images_b)
        assert report["available"]
        assert report["frechet"] > 0.0
        assert "kernel_mmd" in report
