import csv
import json
import math

import numpy as np
import pytest
import torch

from scenefill.diffusion import linear_beta_schedule
from scenefill.errors import ConfigError, ShapeMismatchError
from scenefill.evaluation import (
    MetricsReport,
    PerImageRecord,
    bucket_report,
    evaluate,
    image_seed,
    l1_percent,
    psnr,
    write_aggregate_json,
    write_bucket_csv,
    write_report_csv,
)
from scenefill.image_core import ImageTensor
from scenefill.losses import ssim_value
from scenefill.masks import MaskConfig

EVAL_MASKS = MaskConfig(target_ratio_range=(0.05, 0.9))


class TestPsnr:
    def test_identical_capped(self, rng):
        a = rng.random((16, 16, 3))
        assert psnr(a, a) == 99.0

    def test_uniform_mse_001_gives_20db(self, rng):
        a = rng.uniform(0.2, 0.8, (32, 32, 3))
        b = a + 0.1
        assert psnr(a, b) == pytest.approx(20.0, abs=1e-9)

    def test_matches_scalar_loop(self, rng):
        a, b = rng.random((8, 8, 3)), rng.random((8, 8, 3))
        total = 0.0
        for i in range(8):
            for j in range(8):
                for c in range(3):
                    total += (a[i, j, c] - b[i, j, c]) ** 2
        expected = 10 * math.log10(1.0 / (total / (8 * 8 * 3)))
        assert psnr(a, b) == pytest.approx(expected, abs=1e-9)

    def test_shape_mismatch(self, rng):
        with pytest.raises(ShapeMismatchError):
            psnr(rng.random((8, 8, 1)), rng.random((8, 9, 1)))


class TestL1Percent:
    def test_identical_zero(self, rng):
        a = rng.random((16, 16, 3))
        assert l1_percent(a, a) == 0.0

    def test_constant_offset(self, rng):
        a = rng.uniform(0.1, 0.9, (16, 16, 3))
        assert l1_percent(a, a + 0.05) == pytest.approx(5.0, abs=1e-9)

    def test_matches_scalar_loop(self, rng):
        a, b = rng.random((8, 8, 3)), rng.random((8, 8, 3))
        total = sum(
            abs(a[i, j, c] - b[i, j, c]) for i in range(8) for j in range(8) for c in range(3)
        )
        assert l1_percent(a, b) == pytest.approx(100 * total / (8 * 8 * 3), abs=1e-9)


class TestMetricProperties:
    def test_symmetry_randomized(self, rng):
        for _ in range(200):
            a = rng.random((12, 12, 1))
            b = rng.random((12, 12, 1))
            assert psnr(a, b) == psnr(b, a)
            assert l1_percent(a, b) == l1_percent(b, a)
            assert ssim_value(a, b) == pytest.approx(ssim_value(b, a), abs=1e-12)

    def test_noise_ladder_monotone(self, rng):
        a = rng.uniform(0.3, 0.7, (32, 32, 3))
        psnrs, ssims, l1s = [], [], []
        for amp in (0.01, 0.05, 0.1):
            noisy = np.clip(a + rng.normal(0, amp, a.shape), 0, 1)
            psnrs.append(psnr(a, noisy))
            ssims.append(ssim_value(a, noisy))
            l1s.append(l1_percent(a, noisy))
        assert psnrs[0] > psnrs[1] > psnrs[2]
        assert ssims[0] > ssims[1] > ssims[2]
        assert l1s[0] < l1s[1] < l1s[2]


def _toy_images(rng, count=4, size=32):
    images = []
    for i in range(count):
        data = rng.uniform(-0.9, 0.9, (size, size, 3)).astype(np.float32)
        images.append((f"img_{i:02d}", ImageTensor(data, "signed")))
    return images


class OracleModel:
    """Returns the exact noise that reproduces the stored ground truth."""

    def __init__(self, images, sched):
        self.queue = [img for _, img in sorted(images, key=lambda p: p[0])]
        self.sched = sched
        self.calls = 0

    def __call__(self, xt, mask, t):
        x0 = torch.from_numpy(self.queue[self.calls].data.transpose(2, 0, 1)[None].copy())
        self.calls += 1
        ab = self.sched.alpha_bar_at(int(t))
        return (xt - math.sqrt(ab) * x0) / math.sqrt(1.0 - ab)


class CopyInputModel:
    def __call__(self, xt, mask, t):
        return torch.zeros_like(xt)


class TestEvaluate:
    def setup_method(self):
        self.sched = linear_beta_schedule(50)

    def test_oracle_model_is_perfect(self, rng):
        images = _toy_images(rng)
        report = evaluate(
            OracleModel(images, self.sched), images, EVAL_MASKS, self.sched, seed=1
        )
        for record in report.records:
            assert record.psnr_db == 99.0
            assert record.ssim == pytest.approx(1.0, abs=1e-9)
            assert record.l1_percent == 0.0

    def test_copy_input_model_strictly_worse(self, rng):
        images = _toy_images(rng)
        oracle = evaluate(OracleModel(images, self.sched), images, EVAL_MASKS, self.sched, seed=1)
        copy_in = evaluate(CopyInputModel(), images, EVAL_MASKS, self.sched, seed=1)
        for good, bad in zip(oracle.records, copy_in.records):
            assert bad.psnr_db < good.psnr_db
            assert bad.ssim < good.ssim
            assert bad.l1_percent > good.l1_percent

    def test_reproducible_and_order_independent(self, rng):
        images = _toy_images(rng)
        a = evaluate(CopyInputModel(), images, EVAL_MASKS, self.sched, seed=7)
        b = evaluate(CopyInputModel(), list(reversed(images)), EVAL_MASKS, self.sched, seed=7)
        assert a.records == b.records

    def test_aggregates_match_hand_recomputation(self, rng):
        images = _toy_images(rng)
        report = evaluate(CopyInputModel(), images, EVAL_MASKS, self.sched, seed=3)
        agg = report.aggregates()
        for name in ("psnr_db", "ssim", "l1_percent"):
            values = [getattr(r, name) for r in report.records]
            assert agg[name]["mean"] == pytest.approx(float(np.mean(values)), abs=1e-12)
            assert agg[name]["std"] == pytest.approx(float(np.std(values)), abs=1e-12)

    def test_empty_split_rejected(self):
        with pytest.raises(ConfigError):
            evaluate(CopyInputModel(), [], EVAL_MASKS, self.sched)

    def test_generated_region_mode(self, rng):
        images = _toy_images(rng)
        report = evaluate(
            CopyInputModel(), images, EVAL_MASKS, self.sched, seed=3, region="generated"
        )
        full = evaluate(CopyInputModel(), images, EVAL_MASKS, self.sched, seed=3)
        # restricting to damaged pixels must not improve any error metric
        for gen_rec, full_rec in zip(report.records, full.records):
            assert gen_rec.l1_percent >= full_rec.l1_percent

    def test_image_seed_stability(self):
        assert image_seed(0, "img") == image_seed(0, "img")
        assert image_seed(0, "img") != image_seed(1, "img")
        assert image_seed(0, "a") != image_seed(0, "b")


class TestBucketReport:
    def _report(self, ratios):
        records = [
            PerImageRecord(f"i{i}", r, psnr_db=30.0 + i, ssim=0.9 - 0.05 * i, l1_percent=float(i))
            for i, r in enumerate(ratios)
        ]
        return MetricsReport(records=records)

    def test_single_bucket_equals_overall(self):
        report = self._report([0.1, 0.4, 0.8])
        rows = bucket_report(report, [0.0, 1.0])
        assert rows[0].count == 3
        assert rows[0].means["psnr_db"] == pytest.approx(31.0)

    def test_edge_value_goes_right(self):
        report = self._report([0.2])
        rows = bucket_report(report, [0.0, 0.2, 1.0])
        assert rows[0].count == 0
        assert rows[1].count == 1

    def test_top_edge_included_in_last_bucket(self):
        report = self._report([1.0])
        rows = bucket_report(report, [0.0, 0.5, 1.0])
        assert rows[1].count == 1

    def test_counts_match_hand_tally(self):
        report = self._report([0.05, 0.15, 0.25, 0.35, 0.55, 0.55, 0.9])
        rows = bucket_report(report, [0.0, 0.2, 0.4, 0.6, 1.0])
        assert [r.count for r in rows] == [2, 2, 2, 1]

    def test_empty_bucket_flagged(self):
        report = self._report([0.9])
        rows = bucket_report(report, [0.0, 0.5, 1.0])
        assert rows[0].count == 0 and rows[0].means == {}

    def test_non_monotone_edges_rejected(self):
        report = self._report([0.5])
        with pytest.raises(ConfigError):
            bucket_report(report, [0.0, 0.6, 0.4, 1.0])


class TestWriters:
    def test_csv_json_round_trip(self, tmp_path, rng):
        images = _toy_images(rng, count=3)
        sched = linear_beta_schedule(50)
        report = evaluate(CopyInputModel(), images, EVAL_MASKS, sched, seed=5)
        write_report_csv(report, tmp_path / "per_image.csv")
        write_aggregate_json(report, tmp_path / "agg.json")
        rows = bucket_report(report, [0.0, 0.5, 1.0])
        write_bucket_csv(rows, tmp_path / "buckets.csv")

        with open(tmp_path / "per_image.csv", newline="") as f:
            read = list(csv.DictReader(f))
        assert len(read) == 3
        assert read[0]["image_id"] == "img_00"
        payload = json.loads((tmp_path / "agg.json").read_text())
        assert payload["aggregates"]["count"] == 3
        with open(tmp_path / "buckets.csv", newline="") as f:
            bucket_rows = list(csv.DictReader(f))
        assert sum(int(r["count"]) for r in bucket_rows) == 3
