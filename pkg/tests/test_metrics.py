import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sharpmesh import FeatureCurveSet, MetricsConfig, TriMesh, precision_recall
from sharpmesh.metrics import (
    direction_recall_fpr,
    evaluate_meshes,
    field_recall_fpr,
    report_rows,
    restrict_near_features,
    rmse,
    rmse_qrmse,
    rows_to_csv,
    sample_and_match,
)
from sharpmesh.spatial import closest_points_on_triangles

from conftest import make_grid_strip, make_icosphere, make_valley


class TestSampleAndMatch:
    def test_identical_meshes_zero_distance(self, icosphere):
        s = sample_and_match(icosphere, icosphere, 2000, seed=0)
        assert s.distances.max() < 1e-9
        assert s.normal_angles_deg().max() < 1e-5

    def test_parallel_planes_constant_gap(self):
        a = make_grid_strip(4, 4)
        b = TriMesh(a.vertices + np.array([0, 0, 0.4]), a.faces)
        s = sample_and_match(b, a, 3000, seed=1)
        assert np.allclose(s.distances, 0.4, atol=1e-12)

    def test_matches_exhaustive_search(self, icosphere):
        # DERIVED oracle: brute-force closest triangle for 100 samples
        coarse = make_icosphere(1, radius=1.1)
        s = sample_and_match(coarse, icosphere, 100, seed=2)
        tri = icosphere.vertices[icosphere.faces]
        for i in range(100):
            p = np.repeat(s.src_points[i][None], len(tri), axis=0)
            _, d2 = closest_points_on_triangles(p, tri)
            assert s.distances[i] == pytest.approx(np.sqrt(d2.min()),
                                                   abs=1e-12)


class TestPrecisionRecall:
    def test_identical_meshes_all_ones(self, icosphere):
        cfg = MetricsConfig(lam=0.1, samples=3000)
        out = precision_recall(icosphere, icosphere, cfg)
        for key in ("precision", "recall", "fscore", "normals_precision",
                    "normals_recall", "normals_fscore"):
            assert out[key] == 1.0

    def test_far_translation_all_zeros(self, icosphere):
        cfg = MetricsConfig(lam=0.1, samples=1000, tau=1.0)
        moved = TriMesh(icosphere.vertices + 5.0, icosphere.faces)
        out = precision_recall(moved, icosphere, cfg)
        assert out["precision"] == 0.0
        assert out["recall"] == 0.0
        assert out["fscore"] == 0.0

    def test_half_covered_gt_recall_half(self):
        # DERIVED fixture: recon covers exactly half of the gt area
        gt = make_grid_strip(8, 4)
        half = make_grid_strip(4, 4)
        cfg = MetricsConfig(lam=0.05, samples=100000, tau=1.0)
        out = precision_recall(half, gt, cfg)
        assert out["precision"] == pytest.approx(1.0, abs=1e-6)
        assert out["recall"] == pytest.approx(0.5, abs=0.02)

    def test_normals_thresholding(self):
        gt = make_grid_strip(4, 4)
        tilted = TriMesh(gt.vertices + np.array([0, 0, 0.0]), gt.faces)
        # tilt recon by 15 degrees around x: normals off by 15 > 10 threshold
        ang = np.deg2rad(15)
        R = np.array([[1, 0, 0],
                      [0, np.cos(ang), -np.sin(ang)],
                      [0, np.sin(ang), np.cos(ang)]])
        tilted = TriMesh(gt.vertices @ R.T, gt.faces)
        cfg = MetricsConfig(lam=10.0, samples=2000, normal_deg=10.0)
        out = precision_recall(tilted, gt, cfg)
        assert out["precision"] == 1.0  # points still close at tau=10*lam
        assert out["normals_precision"] == 0.0

    def test_symmetry_swapping_roles(self, icosphere):
        coarse = make_icosphere(2, radius=1.05)
        cfg = MetricsConfig(lam=0.05, samples=20000, tau=1.0)
        ab = precision_recall(coarse, icosphere, cfg)
        ba = precision_recall(icosphere, coarse, cfg)
        assert ab["precision"] == pytest.approx(ba["recall"], abs=0.02)
        assert ab["recall"] == pytest.approx(ba["precision"], abs=0.02)


class TestRestrictNearFeatures:
    def test_infinite_delta_keeps_all(self, valley):
        gt, curves = valley
        s = sample_and_match(gt, gt, 500, seed=0, source_is_gt=True)
        kept = restrict_near_features(s, curves, np.inf)
        assert len(kept) == len(s)

    def test_no_curves_keeps_none(self, valley):
        gt, _ = valley
        s = sample_and_match(gt, gt, 500, seed=0, source_is_gt=True)
        kept = restrict_near_features(s, FeatureCurveSet([]), 0.5)
        assert len(kept) == 0

    def test_band_area_fraction_analytic(self):
        # DERIVED oracle: a straight crease across a flat two-plane sheet
        # keeps the band |x| <= delta; its area fraction is delta / half
        gt, curves = make_valley(half=2.0, ny=2.0, slope=0.0)
        delta = 0.5
        s = sample_and_match(gt, gt, 200000, seed=3, source_is_gt=True)
        kept = restrict_near_features(s, curves, delta)
        frac = len(kept) / len(s)
        assert frac == pytest.approx(delta / 2.0, rel=0.05)
        assert (np.abs(kept.src_points[:, 0]) <= delta + 1e-9).all()

    def test_recon_samples_filter_by_matched_point(self, valley):
        gt, curves = valley
        recon = TriMesh(gt.vertices + np.array([0, 0, 0.05]), gt.faces)
        s = sample_and_match(recon, gt, 2000, seed=1, source_is_gt=False)
        kept = restrict_near_features(s, curves, 0.4)
        from sharpmesh.spatial import PolylineLocator

        d, _, _ = PolylineLocator(curves.curves).query(kept.dst_points)
        assert (d <= 0.4).all()


class TestFieldMetrics:
    def test_perfect_prediction(self):
        d = np.array([0.1, 0.5, 2.0, 0.05])
        out = field_recall_fpr(d, d, T=0.3)
        assert out.recall == 1.0
        assert out.fpr == 0.0
        assert not out.zero_positives

    def test_degenerate_all_negative_truth(self):
        d_hat = np.zeros(6)
        d_true = np.full(6, 2.0)
        out = field_recall_fpr(d_hat, d_true, T=1.0)
        assert out.recall == 1.0
        assert out.zero_positives
        assert out.fpr == 1.0

    def test_matches_confusion_matrix_oracle(self):
        # DERIVED oracle: direct counting over random fields
        rng = np.random.default_rng(5)
        d_hat = rng.uniform(0, 2, 500)
        d_true = rng.uniform(0, 2, 500)
        T = 0.8
        out = field_recall_fpr(d_hat, d_true, T)
        tp = sum(1 for a, b in zip(d_hat, d_true) if a < T and b < T)
        fn = sum(1 for a, b in zip(d_hat, d_true) if a >= T and b < T)
        fp = sum(1 for a, b in zip(d_hat, d_true) if a < T and b >= T)
        tn = sum(1 for a, b in zip(d_hat, d_true) if a >= T and b >= T)
        assert out.recall == pytest.approx(tp / (tp + fn), abs=1e-15)
        assert out.fpr == pytest.approx(fp / (fp + tn), abs=1e-15)

    def test_direction_recall(self):
        r = np.tile([1.0, 0, 0], (4, 1))
        assert direction_recall_fpr(r, r, 10.0)[:2] == (1.0, 0.0)
        assert direction_recall_fpr(-r, r, 10.0)[:2] == (0.0, 1.0)

    def test_direction_mixed_hand_count(self):
        r_true = np.tile([1.0, 0, 0], (4, 1))
        r_hat = np.array([
            [1, 0, 0],            # 0 degrees: hit
            [0, 1, 0],            # 90: miss
            [np.cos(np.deg2rad(5)), np.sin(np.deg2rad(5)), 0],  # 5: hit
            [0, 0, 0],            # zero vector: excluded
        ])
        recall, fpr, n = direction_recall_fpr(r_hat, r_true, 10.0)
        assert n == 3
        assert recall == pytest.approx(2 / 3)
        assert fpr == pytest.approx(1 / 3)

    def test_rmse_identities(self):
        x = np.arange(5, dtype=float)
        assert rmse(x, x) == 0.0
        assert rmse(x + 0.3, x) == pytest.approx(0.3)

    def test_rmse_matches_direct_formula(self):
        rng = np.random.default_rng(9)
        a = rng.normal(size=40)
        b = rng.normal(size=40)
        assert rmse(a, b) == pytest.approx(
            np.sqrt(((a - b) ** 2).sum() / 40), abs=1e-15)

    def test_qrmse_quantile(self):
        pairs = [(np.array([float(k)]), np.array([0.0])) for k in range(1, 21)]
        values, q = rmse_qrmse(pairs, q=0.95)
        assert values == [float(k) for k in range(1, 21)]
        assert q == pytest.approx(np.quantile(np.arange(1.0, 21.0), 0.95))


class TestInvariantsAndReports:
    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 100000))
    def test_rates_bounded_and_fscore_inequality(self, seed):
        rng = np.random.default_rng(seed)
        d_hat = rng.uniform(0, 2, 100)
        d_true = rng.uniform(0, 2, 100)
        out = field_recall_fpr(d_hat, d_true, 0.7)
        assert 0 <= out.recall <= 1
        assert 0 <= out.fpr <= 1

    def test_fscore_bound(self, icosphere):
        coarse = make_icosphere(2, radius=1.02)
        cfg = MetricsConfig(lam=0.02, samples=5000)
        out = precision_recall(coarse, icosphere, cfg)
        f = out["fscore"]
        assert f <= min(2 * out["precision"], 2 * out["recall"]) + 1e-12

    def test_evaluate_includes_both_bands(self, valley):
        gt, curves = valley
        cfg = MetricsConfig(lam=0.2, samples=3000)
        out = evaluate_meshes(gt, gt, cfg, curves=curves)
        assert "fscore" in out and "fscore_band" in out
        rows = report_rows(out, "a|b")
        bands = {r[2] for r in rows}
        assert bands == {"inf", "delta"}
        csv_text = rows_to_csv(rows)
        assert csv_text.splitlines()[0] == "pair,metric,band,value"
        # round-trip: every float parses back exactly
        for line in csv_text.splitlines()[1:]:
            parts = line.split(",")
            float(parts[3])

    def test_determinism_fixed_seed(self, icosphere):
        coarse = make_icosphere(2, radius=1.03)
        cfg = MetricsConfig(lam=0.05, samples=10000, seed=42)
        a = precision_recall(coarse, icosphere, cfg)
        b = precision_recall(coarse, icosphere, cfg)
        assert a == b

    def test_seed_variance_small(self, icosphere):
        coarse = make_icosphere(2, radius=1.03)
        values = []
        for seed in range(3):
            cfg = MetricsConfig(lam=0.05, samples=100000, seed=seed)
            values.append(
                precision_recall(coarse, icosphere, cfg)["fscore"]
            )
        assert np.ptp(values) < 0.01
