"""Synthetic generator self-consistency and experiment drivers."""

import numpy as np
import pytest

from pairpose.geometry import AffineCorrection, Hypothesis, pose_error
from pairpose.polysys import build_system, verify_solution, AlgebraicSolution
from pairpose.ransac import EstimationConfig, estimate
from pairpose.scoring import hypothesis_errors
from pairpose.synthetic import (
    InfeasibleSceneError,
    SceneSpec,
    generate_pair,
    make_corpus,
    run_hybrid_ablation,
    run_noise_sweep,
    run_shift_ablation,
)


class TestGeneratePair:
    def test_self_consistency_under_gt(self):
        # noise-free inliers: zero reprojection errors under the GT hypothesis
        # and the pairwise-distance equalities hold for the GT affine tuple
        spec = SceneSpec(
            n_points=40, affine_gt=AffineCorrection(1.7, 0.5, -0.2), seed=5
        )
        pair = generate_pair(spec)
        hyp = Hypothesis(pair.gt_pose, pair.gt_affine)
        e_fwd, e_bwd, e_s = hypothesis_errors(
            pair.correspondences, hyp, *pair.gt_cams
        )
        assert e_fwd.max() < 1e-12 and e_bwd.max() < 1e-12 and e_s.max() < 1e-12

        corr = pair.correspondences
        f = pair.gt_cams[0].focal
        idx = [0, 1, 2]
        ones = np.ones((3, 1))
        q1 = np.hstack([corr.p1[idx] / f, ones])
        q2 = np.hstack([corr.p2[idx] / f, ones])
        system = build_system(q1, q2, corr.d1[idx], corr.d2[idx], "calibrated")
        gt_sol = AlgebraicSolution(
            pair.gt_affine.alpha**2, pair.gt_affine.beta1, pair.gt_affine.beta2
        )
        assert verify_solution(system, gt_sol) < 1e-10

    def test_estimator_recovers_generated_scene(self):
        spec = SceneSpec(n_points=150, affine_gt=AffineCorrection(1.3, 0.2, -0.4), seed=9)
        pair = generate_pair(spec)
        cfg = EstimationConfig(mode="calibrated", min_iterations=50, max_iterations=200, seed=0)
        report = estimate(pair.correspondences, cfg, cams=pair.gt_cams)
        er, et = pose_error(report.best.pose, pair.gt_pose)
        assert er < 1e-4 and et < 1e-4

    def test_outlier_mask_popcount_binomial(self):
        # popcount within the binomial 99% interval around the target fraction
        spec = SceneSpec(n_points=400, outlier_fraction=0.3, seed=3)
        pair = generate_pair(spec)
        count = int(pair.outlier_mask.sum())
        n, p = 400, 0.3
        sd = np.sqrt(n * p * (1 - p))
        assert abs(count - n * p) <= 2.58 * sd + 1

    def test_gt_shift_zero_gives_exact_priors(self):
        spec = SceneSpec(n_points=50, gt_shift_fraction=0.0, seed=4)
        pair = generate_pair(spec)
        assert np.allclose(pair.correspondences.d1, pair.gt_depths1)
        assert np.allclose(pair.correspondences.d2, pair.gt_depths2)

    def test_gt_shift_protocol(self):
        spec = SceneSpec(n_points=50, gt_shift_fraction=0.25, seed=4)
        pair = generate_pair(spec)
        shift1 = 0.25 * np.median(pair.gt_depths1)
        assert np.allclose(pair.correspondences.d1, pair.gt_depths1 + shift1)
        assert pair.gt_affine.beta1 == pytest.approx(-shift1)

    def test_seeded_determinism(self):
        spec = SceneSpec(n_points=30, pixel_noise_sigma=1.0, outlier_fraction=0.2, seed=77)
        a = generate_pair(spec)
        b = generate_pair(spec)
        assert np.array_equal(a.correspondences.to_array(), b.correspondences.to_array())
        assert np.array_equal(a.outlier_mask, b.outlier_mask)
        assert np.array_equal(a.gt_pose.R, b.gt_pose.R)

    def test_infeasible_spec_raises(self):
        spec = SceneSpec(n_points=50, baseline_range=(500.0, 500.0), seed=0)
        with pytest.raises(InfeasibleSceneError):
            generate_pair(spec)


class TestDrivers:
    def test_shift_ablation_table_shape(self):
        base = SceneSpec(n_points=60, pixel_noise_sigma=0.5, outlier_fraction=0.1, seed=13)
        cfg = EstimationConfig(mode="calibrated", min_iterations=30, max_iterations=80)
        rows, raw = run_shift_ablation(
            base, [0.0, 0.2], methods=("full", "scale_only"), n_trials=3, config=cfg
        )
        assert len(rows) == 4  # 2 fractions x 2 methods
        assert len(raw) == 12  # 2 x 2 x 3 trials
        assert all(np.isfinite(r["median_rot_err_deg"]) for r in rows)

    def test_noise_sweep_monotone_smoke(self):
        base = SceneSpec(n_points=60, outlier_fraction=0.0, seed=17)
        cfg = EstimationConfig(mode="calibrated", min_iterations=30, max_iterations=80)
        rows, _ = run_noise_sweep(base, noise_sigmas=(0.0, 2.0), n_trials=8, config=cfg)
        assert rows[0]["median_rot_err_deg"] <= rows[1]["median_rot_err_deg"] + 1e-9

    def test_corpus_garbage_fraction(self):
        base = SceneSpec(n_points=40, seed=23)
        pairs = make_corpus(base, 12, garbage_fraction=1.0)
        for pair in pairs:
            # garbage priors: reprojection errors under GT affine are nonzero
            hyp = Hypothesis(pair.gt_pose, pair.gt_affine)
            e_fwd, _, _ = hypothesis_errors(pair.correspondences, hyp, *pair.gt_cams)
            assert e_fwd.max() > 1.0

    def test_hybrid_ablation_runs(self):
        base = SceneSpec(
            n_points=60, pixel_noise_sigma=0.5, outlier_fraction=0.2, seed=29
        )
        cfg = EstimationConfig(mode="calibrated", min_iterations=30, max_iterations=80)
        rows, raw = run_hybrid_ablation(
            base, variants=("H/H/H", "P/P/P"), garbage_fraction=0.5, n_pairs=6, config=cfg
        )
        assert [r["variant"] for r in rows] == ["H/H/H", "P/P/P"]
        assert all(0.0 <= r["auc10"] <= 100.0 for r in rows)
        assert len(raw) == 12
