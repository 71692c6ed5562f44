"""Shared synthetic-scene oracles for the test suite.

Every generator starts from explicit 3D geometry (points, pose, intrinsics)
and derives the observable quantities from it, so tests can always check
solver output against the generating ground truth.
"""

import numpy as np
import pytest

from pairpose.geometry import AffineCorrection, Hypothesis, Pose, so3_exp


def rel_err(a, b):
    return abs(a - b) / max(1e-12, abs(b))


def param_err(a, b, floor=1.0):
    """Relative error with a near-zero guard: |a-b| / max(floor, |b|).

    The shifts can legitimately be ~0, where a pure relative tolerance is
    ill-posed; parameters bounded away from zero (omega) pass floor=0.
    """
    return abs(a - b) / max(floor, abs(b), 1e-300)


def random_pose(rng, max_angle=0.5, baseline=(0.3, 1.0)):
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    R = so3_exp(axis * rng.uniform(0.05, max_angle))
    tdir = rng.normal(size=3)
    tdir /= np.linalg.norm(tdir)
    return Pose(R, tdir * rng.uniform(*baseline))


def covisible_points(rng, pose, n, depth=(2.0, 8.0), spread=0.4, min_z2=0.1):
    """n 3D points in camera 1 that are in front of both cameras."""
    P1_rows = []
    while len(P1_rows) < n:
        z = rng.uniform(*depth, 2 * n)
        xy = rng.uniform(-spread, spread, (2 * n, 2))
        P1 = np.column_stack([xy * z[:, None], z])
        P2 = P1 @ pose.R.T + pose.t
        P1_rows.extend(P1[P2[:, 2] > min_z2])
    return np.array(P1_rows[:n])


def depth_instance(mode, rng, affine=None):
    """Noise-free sample for the constraint system of the given mode.

    Returns (points1, points2, d1, d2, gt) where points are homogeneous
    solver inputs (normalized rays or centered pixels) and gt maps the
    AlgebraicSolution field names to the generating values.
    """
    m = 3 if mode == "calibrated" else 4
    pose = random_pose(rng)
    P1 = covisible_points(rng, pose, m)
    P2 = P1 @ pose.R.T + pose.t
    if affine is None:
        affine = AffineCorrection(
            rng.uniform(0.5, 2.0), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)
        )
    d1 = P1[:, 2] - affine.beta1
    d2 = P2[:, 2] / affine.alpha - affine.beta2
    gt = {"gamma": affine.alpha**2, "beta1": affine.beta1, "beta2": affine.beta2}
    x1 = P1[:, :2] / P1[:, 2:]
    x2 = P2[:, :2] / P2[:, 2:]
    ones = np.ones((m, 1))
    if mode == "calibrated":
        pts1 = np.hstack([x1, ones])
        pts2 = np.hstack([x2, ones])
    elif mode == "shared_focal":
        f = rng.uniform(300.0, 1500.0)
        pts1 = np.hstack([x1 * f, ones])
        pts2 = np.hstack([x2 * f, ones])
        gt["omega1"] = 1.0 / f**2
        gt["f1"] = gt["f2"] = f
    else:
        f1 = rng.uniform(300.0, 1500.0)
        f2 = rng.uniform(300.0, 1500.0)
        pts1 = np.hstack([x1 * f1, ones])
        pts2 = np.hstack([x2 * f2, ones])
        gt["omega1"] = 1.0 / f1**2
        gt["omega2"] = 1.0 / f2**2
        gt["f1"], gt["f2"] = f1, f2
    gt["pose"] = pose
    gt["affine"] = affine
    return pts1, pts2, d1, d2, gt


def solver_matches(rng, n, pose=None, focal=1.0):
    """Noise-free normalized (or focal-scaled) matches from a random scene."""
    pose = pose or random_pose(rng)
    P1 = covisible_points(rng, pose, n)
    P2 = P1 @ pose.R.T + pose.t
    x1 = P1[:, :2] / P1[:, 2:] * focal
    x2 = P2[:, :2] / P2[:, 2:] * focal
    return x1, x2, pose, P1, P2


def hypothesis_matches_gt(hyp: Hypothesis, gt, tol=1e-6) -> bool:
    """Pose within tol degrees and all scalar parameters within tol relative
    (unit near-zero guard on the shifts, which can legitimately be ~0)."""
    from pairpose.geometry import pose_error

    er, et = pose_error(hyp.pose, gt["pose"])
    if er > tol or et > tol:
        return False
    aff = gt["affine"]
    checks = [
        param_err(hyp.affine.alpha, aff.alpha, floor=0.0),
        param_err(hyp.affine.beta1, aff.beta1),
        param_err(hyp.affine.beta2, aff.beta2),
    ]
    if "f1" in gt:
        checks.append(param_err(hyp.focal1, gt["f1"], floor=0.0))
        checks.append(param_err(hyp.focal2, gt["f2"], floor=0.0))
    return max(checks) < tol


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
