"""Refinement: residual definition, analytic Jacobians, LM behavior."""

import numpy as np
import pytest

from pairpose.geometry import (
    AffineCorrection,
    CameraModel,
    Correspondences,
    ErrorThresholds,
    Hypothesis,
    Pose,
    so3_exp,
)
from pairpose.refine import (
    RefinementProblem,
    jacobian_matrix,
    pack_params,
    refine,
    residual_vector,
    residuals,
)
from pairpose.scoring import InlierMasks, hypothesis_errors

from conftest import covisible_points, random_pose


def make_problem(mode, rng, n=40, noise=0.0, thresholds=None):
    f1 = rng.uniform(400, 1200)
    f2 = f1 if mode != "two_focal" else rng.uniform(400, 1200)
    pose = random_pose(rng)
    P1 = covisible_points(rng, pose, n)
    P2 = P1 @ pose.R.T + pose.t
    alpha = rng.uniform(0.5, 2.0)
    b1, b2 = rng.uniform(-0.5, 0.5, 2)
    d1 = P1[:, 2] - b1
    d2 = P2[:, 2] / alpha - b2
    p1 = P1[:, :2] / P1[:, 2:] * f1 + rng.normal(0, noise, (n, 2))
    p2 = P2[:, :2] / P2[:, 2:] * f2 + rng.normal(0, noise, (n, 2))
    corr = Correspondences(p1, p2, d1, d2)
    gt = Hypothesis(
        pose,
        AffineCorrection(alpha, b1, b2),
        None if mode == "calibrated" else f1,
        None if mode == "calibrated" else f2,
    )
    cam1 = CameraModel(f1) if mode == "calibrated" else None
    cam2 = CameraModel(f2) if mode == "calibrated" else None
    masks = InlierMasks(np.ones(n, bool), np.ones(n, bool), np.ones(n, bool))
    prob = RefinementProblem(corr, masks, gt, thresholds or ErrorThresholds(), mode, cam1, cam2)
    return prob, gt


def perturbed(gt, mode, rng, rot_deg=1.0):
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    pose = Pose(so3_exp(axis * np.radians(rot_deg)) @ gt.pose.R, gt.pose.t * 1.01)
    return Hypothesis(
        pose,
        AffineCorrection(gt.affine.alpha * 1.01, gt.affine.beta1 + 0.01, gt.affine.beta2 - 0.01),
        None if mode == "calibrated" else gt.focal1 * 1.01,
        None if mode == "calibrated" else gt.focal2 * 1.01,
    )


MODES = ("calibrated", "shared_focal", "two_focal")


class TestResiduals:
    def test_zero_at_ground_truth(self, rng):
        for mode in MODES:
            prob, gt = make_problem(mode, rng)
            r = residuals(gt, prob)
            assert np.abs(r).max() < 1e-9

    def test_lambda_zero_drops_epipolar_terms(self, rng):
        prob, gt = make_problem("calibrated", rng, thresholds=ErrorThresholds(8, 2, 0.0))
        n = len(prob.corr)
        r = residuals(gt, prob)
        assert len(r) == 4 * n + n  # fwd + bwd pairs plus zero-weight sampson rows
        assert np.abs(r[4 * n :]).max() == 0.0

    def test_squared_sum_matches_hand_cost(self, rng):
        # single inlier of each type with hand-computable errors
        prob, gt = make_problem("calibrated", rng, n=6, noise=0.0)
        pert = perturbed(gt, "calibrated", rng)
        masks = InlierMasks(
            np.eye(6, dtype=bool)[0], np.eye(6, dtype=bool)[1], np.ones(6, dtype=bool)
        )
        prob1 = RefinementProblem(
            prob.corr, masks, pert, prob.thresholds, "calibrated", prob.cam1, prob.cam2
        )
        r = residuals(pert, prob1)
        e_fwd, e_bwd, e_s = hypothesis_errors(prob.corr, pert, prob.cam1, prob.cam2)
        th = prob.thresholds
        expected = (
            e_fwd[0]
            + e_bwd[1]
            + 2.0 * th.lambda_s * th.tau_r**2 / th.tau_s**2 * e_s.sum()
        )
        assert abs(float(r @ r) - expected) < 1e-8 * max(1.0, expected)


class TestJacobian:
    @pytest.mark.parametrize("mode", MODES)
    def test_matches_central_differences(self, rng, mode):
        for _ in range(12):
            prob, gt = make_problem(mode, rng, n=12)
            x = pack_params(gt, prob) + rng.normal(0, 0.05, pack_params(gt, prob).shape)
            J = jacobian_matrix(x, prob)
            Jfd = np.zeros_like(J)
            for k in range(len(x)):
                h = 1e-6 * max(1.0, abs(x[k]))
                xp, xm = x.copy(), x.copy()
                xp[k] += h
                xm[k] -= h
                Jfd[:, k] = (residual_vector(xp, prob) - residual_vector(xm, prob)) / (2 * h)
            rel = np.abs(J - Jfd).max() / max(np.abs(Jfd).max(), 1e-12)
            assert rel < 1e-4


class TestRefine:
    def test_ground_truth_is_fixed_point(self, rng):
        for mode in MODES:
            prob, gt = make_problem(mode, rng)
            res = refine(prob)
            assert res.final_cost <= res.initial_cost
            assert res.initial_cost < 1e-15

    @pytest.mark.parametrize("mode", MODES)
    def test_basin_recovery(self, rng, mode):
        from pairpose.geometry import pose_error

        for _ in range(10):
            prob, gt = make_problem(mode, rng)
            start = perturbed(gt, mode, rng)
            prob2 = RefinementProblem(
                prob.corr, prob.masks, start, prob.thresholds, mode, prob.cam1, prob.cam2
            )
            res = refine(prob2)
            er, et = pose_error(res.hypothesis.pose, gt.pose)
            assert er < 1e-6 and et < 1e-6
            assert abs(res.hypothesis.affine.alpha - gt.affine.alpha) / gt.affine.alpha < 1e-6

    def test_monotone_with_contaminated_masks(self, rng):
        prob, gt = make_problem("calibrated", rng, n=30, noise=1.0)
        corr = prob.corr
        p2 = corr.p2.copy()
        p2[:5] += rng.uniform(50, 100, (5, 2))  # gross outliers mislabeled inliers
        bad_corr = Correspondences(corr.p1, p2, corr.d1, corr.d2)
        start = perturbed(gt, "calibrated", rng)
        prob2 = RefinementProblem(
            bad_corr, prob.masks, start, prob.thresholds, "calibrated", prob.cam1, prob.cam2
        )
        res = refine(prob2)
        assert res.final_cost <= res.initial_cost + 1e-12

    def test_rotation_stays_orthonormal(self, rng):
        prob, gt = make_problem("two_focal", rng, noise=0.5)
        start = perturbed(gt, "two_focal", rng)
        prob2 = RefinementProblem(
            prob.corr, prob.masks, start, prob.thresholds, "two_focal", None, None
        )
        res = refine(prob2)
        res.hypothesis.pose.validate()

    def test_fixed_params_stay_fixed(self, rng):
        prob, gt = make_problem("calibrated", rng, noise=0.5)
        start = perturbed(gt, "calibrated", rng)
        prob2 = RefinementProblem(
            prob.corr,
            prob.masks,
            start,
            prob.thresholds,
            "calibrated",
            prob.cam1,
            prob.cam2,
            fixed_params=(7, 8),
        )
        res = refine(prob2)
        assert res.hypothesis.affine.beta1 == start.affine.beta1
        assert res.hypothesis.affine.beta2 == start.affine.beta2

    def test_sampson_only_keeps_unit_translation(self, rng):
        prob, gt = make_problem("calibrated", rng, noise=0.5)
        n = len(prob.corr)
        masks = InlierMasks(np.zeros(n, bool), np.zeros(n, bool), np.ones(n, bool))
        start = perturbed(gt, "calibrated", rng)
        prob2 = RefinementProblem(
            prob.corr, masks, start, prob.thresholds, "calibrated", prob.cam1, prob.cam2
        )
        res = refine(prob2)
        if res.improved:
            assert abs(np.linalg.norm(res.hypothesis.pose.t) - 1.0) < 1e-9

    def test_pure_reprojection_consistency_with_exact_depth(self, rng):
        # lambda_s = 0 and exact priors: minimizer of E coincides with the
        # minimizer of pure reprojection error, i.e. the ground truth
        prob, gt = make_problem("calibrated", rng, thresholds=ErrorThresholds(8, 2, 0.0))
        start = perturbed(gt, "calibrated", rng)
        prob2 = RefinementProblem(
            prob.corr, prob.masks, start, prob.thresholds, "calibrated", prob.cam1, prob.cam2
        )
        res = refine(prob2)
        from pairpose.geometry import pose_error

        er, _ = pose_error(res.hypothesis.pose, gt.pose)
        assert er < 1e-6 and res.final_cost < 1e-12

    def test_insufficient_inliers_rejected(self, rng):
        prob, gt = make_problem("calibrated", rng, n=8)
        n = len(prob.corr)
        masks = InlierMasks(
            np.zeros(n, bool), np.zeros(n, bool), np.eye(n, dtype=bool)[0]
        )
        with pytest.raises(ValueError):
            RefinementProblem(
                prob.corr, masks, gt, prob.thresholds, "calibrated", prob.cam1, prob.cam2
            )
