"""Depth-aware minimal solvers against the synthetic-scene oracle."""

import numpy as np
import pytest

from pairpose.depth_solvers import (
    rigid_align,
    scaled_align,
    solve_calibrated,
    solve_no_correction,
    solve_scale_only,
    solve_shared_focal,
    solve_two_focal,
)
from pairpose.geometry import (
    AffineCorrection,
    CameraModel,
    Correspondences,
    Pose,
    pose_error,
    so3_exp,
)
from pairpose.polysys import DegenerateSampleError

from conftest import depth_instance, hypothesis_matches_gt, random_pose


def instance_to_corr(mode, pts1, pts2, d1, d2, focal=None):
    """Solver input from a depth_instance: pixel coordinates per mode."""
    return Correspondences(
        pts1[:, :2] / pts1[:, 2:], pts2[:, :2] / pts2[:, 2:], d1, d2
    )


class TestRigidAlign:
    def test_identity(self):
        P = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0]])
        pose = rigid_align(P, P)
        assert np.allclose(pose.R, np.eye(3), atol=1e-12)
        assert np.allclose(pose.t, 0.0, atol=1e-12)

    def test_pure_translation(self):
        P = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0]])
        pose = rigid_align(P, P + [0.0, 0.0, 1.0])
        assert np.allclose(pose.R, np.eye(3), atol=1e-12)
        assert np.allclose(pose.t, [0, 0, 1], atol=1e-12)

    def test_constructed_rotation(self):
        P1 = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0]])
        P2 = np.array([[0.0, 0, 0], [0, 1, 0], [-1, 0, 0]])
        pose = rigid_align(P1, P2)
        Rz90 = so3_exp(np.array([0, 0, np.pi / 2]))
        assert np.abs(pose.R - Rz90).max() < 1e-12
        assert np.allclose(pose.t, 0.0, atol=1e-12)

    def test_collinear_signal(self):
        P = np.array([[0.0, 0, 0], [1, 0, 0], [2, 0, 0]])
        with pytest.raises(DegenerateSampleError):
            rigid_align(P, P)

    def test_orthonormality_of_output(self, rng):
        for _ in range(20):
            pose = random_pose(rng)
            P1 = rng.normal(size=(5, 3))
            P2 = P1 @ pose.R.T + pose.t
            est = rigid_align(P1, P2)
            est.validate()
            assert pose_error(est, pose) == (0.0, 0.0) or pose_error(est, pose)[0] < 1e-9


class TestScaledAlign:
    def test_recovers_similarity(self, rng):
        pose = random_pose(rng)
        scale = 2.7
        P1 = rng.normal(size=(6, 3))
        P2 = (P1 @ pose.R.T) * scale + pose.t
        c, est = scaled_align(P1, P2)
        assert abs(c - scale) < 1e-9
        assert pose_error(est, pose)[0] < 1e-9


class TestSolveCalibrated:
    def test_self_consistent_identity(self, rng):
        pts1, pts2, d1, d2, gt = depth_instance(
            "calibrated", rng, affine=AffineCorrection(1.0, 0.0, 0.0)
        )
        corr = instance_to_corr("calibrated", pts1, pts1, d1, d1)
        cams = (CameraModel(1.0), CameraModel(1.0))
        hyps = solve_calibrated(corr, *cams)
        assert any(
            pose_error(h.pose, Pose.identity())[0] < 1e-9
            and abs(h.affine.alpha - 1.0) < 1e-9
            for h in hyps
        )

    def test_gt_recovery(self, rng):
        cams = (CameraModel(1.0), CameraModel(1.0))
        found = 0
        for _ in range(300):
            pts1, pts2, d1, d2, gt = depth_instance("calibrated", rng)
            corr = instance_to_corr("calibrated", pts1, pts2, d1, d2)
            hyps = solve_calibrated(corr, *cams)
            assert len(hyps) <= 4
            found += any(hypothesis_matches_gt(h, gt) for h in hyps)
        assert found == 300

    def test_cheirality_filter(self, rng):
        # force a negative corrected ground-truth depth: that branch must vanish
        cams = (CameraModel(1.0), CameraModel(1.0))
        for _ in range(20):
            pts1, pts2, d1, d2, gt = depth_instance("calibrated", rng)
            corr = instance_to_corr("calibrated", pts1, pts2, d1, d2)
            for h in solve_calibrated(corr, *cams):
                dh1 = corr.d1 + h.affine.beta1
                dh2 = h.affine.alpha * (corr.d2 + h.affine.beta2)
                assert np.all(dh1 > 0) and np.all(dh2 > 0)

    def test_degenerate_sample_empty(self, rng):
        pts1, pts2, d1, d2, _ = depth_instance("calibrated", rng)
        corr = Correspondences(
            np.repeat(pts1[:1, :2], 3, axis=0), pts2[:, :2] / pts2[:, 2:], d1, d2
        )
        assert solve_calibrated(corr, CameraModel(1.0), CameraModel(1.0)) == []


class TestSolveSharedFocal:
    def test_gt_recovery(self, rng):
        found = 0
        for _ in range(200):
            pts1, pts2, d1, d2, gt = depth_instance("shared_focal", rng)
            corr = Correspondences(pts1[:, :2], pts2[:, :2], d1, d2)
            hyps = solve_shared_focal(corr)
            assert len(hyps) <= 8
            for h in hyps:
                assert h.focal1 is not None and h.focal1 > 0 and h.focal1 == h.focal2
            found += any(hypothesis_matches_gt(h, gt) for h in hyps)
        assert found == 200

    def test_focal_bounds_gate(self, rng):
        pts1, pts2, d1, d2, gt = depth_instance("shared_focal", rng)
        corr = Correspondences(pts1[:, :2], pts2[:, :2], d1, d2)
        hyps = solve_shared_focal(corr, focal_bounds=(gt["f1"] * 3.0, gt["f1"] * 5.0))
        assert all(gt["f1"] * 3.0 <= h.focal1 <= gt["f1"] * 5.0 for h in hyps)


class TestSolveTwoFocal:
    def test_gt_recovery_distinct_focals(self, rng):
        found = 0
        for _ in range(200):
            pts1, pts2, d1, d2, gt = depth_instance("two_focal", rng)
            corr = Correspondences(pts1[:, :2], pts2[:, :2], d1, d2)
            hyps = solve_two_focal(corr)
            assert len(hyps) <= 4
            found += any(hypothesis_matches_gt(h, gt) for h in hyps)
        assert found == 200

    def test_swapped_image_symmetry(self, rng):
        for _ in range(20):
            pts1, pts2, d1, d2, gt = depth_instance("two_focal", rng)
            corr = Correspondences(pts1[:, :2], pts2[:, :2], d1, d2)
            swapped = Correspondences(pts2[:, :2], pts1[:, :2], d2, d1)
            hyps = solve_two_focal(swapped)
            inv_pose = gt["pose"].inverse()
            ok = False
            for h in hyps:
                er, et = pose_error(h.pose, inv_pose)
                if (
                    er < 1e-6
                    and et < 1e-6
                    and abs(h.focal1 - gt["f2"]) / gt["f2"] < 1e-6
                    and abs(h.focal2 - gt["f1"]) / gt["f1"] < 1e-6
                ):
                    ok = True
            assert ok


class TestAblationSolvers:
    def test_scale_only_recovers_scale_scene(self, rng):
        # priors exact up to a scale on image 2: the model it was built for
        pose = random_pose(rng)
        from conftest import covisible_points

        P1 = covisible_points(rng, pose, 3)
        P2 = P1 @ pose.R.T + pose.t
        alpha = 1.7
        corr = Correspondences(
            P1[:, :2] / P1[:, 2:], P2[:, :2] / P2[:, 2:], P1[:, 2], P2[:, 2] / alpha
        )
        hyps = solve_scale_only(corr, CameraModel(1.0), CameraModel(1.0))
        assert len(hyps) == 1
        assert abs(hyps[0].affine.alpha - alpha) < 1e-9
        assert pose_error(hyps[0].pose, pose)[0] < 1e-9
        assert np.allclose(hyps[0].pose.t, pose.t, atol=1e-9)

    def test_no_correction_on_exact_depths(self, rng):
        pose = random_pose(rng)
        from conftest import covisible_points

        P1 = covisible_points(rng, pose, 3)
        P2 = P1 @ pose.R.T + pose.t
        corr = Correspondences(
            P1[:, :2] / P1[:, 2:], P2[:, :2] / P2[:, 2:], P1[:, 2], P2[:, 2]
        )
        hyps = solve_no_correction(corr, CameraModel(1.0), CameraModel(1.0))
        assert len(hyps) == 1 and pose_error(hyps[0].pose, pose)[0] < 1e-9


class TestNoiseMonotonicity:
    def test_median_rotation_error_nondecreasing(self):
        # statistical: median over many instances per pixel-noise level
        from conftest import covisible_points

        f = 600.0
        sigmas = [0.0, 0.5, 1.0, 2.0]
        medians = []
        for si, sigma in enumerate(sigmas):
            rng = np.random.default_rng(900 + si)
            errs = []
            for _ in range(150):
                pose = random_pose(rng)
                P1 = covisible_points(rng, pose, 3)
                P2 = P1 @ pose.R.T + pose.t
                alpha, b1, b2 = rng.uniform(0.5, 2.0), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)
                p1 = P1[:, :2] / P1[:, 2:] * f + rng.normal(0, sigma, (3, 2))
                p2 = P2[:, :2] / P2[:, 2:] * f + rng.normal(0, sigma, (3, 2))
                corr = Correspondences(p1, p2, P1[:, 2] - b1, P2[:, 2] / alpha - b2)
                hyps = solve_calibrated(corr, CameraModel(f), CameraModel(f))
                if hyps:
                    errs.append(min(pose_error(h.pose, pose)[0] for h in hyps))
            medians.append(np.median(errs))
        assert all(b >= a - 1e-9 for a, b in zip(medians, medians[1:])), medians
