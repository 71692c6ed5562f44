"""Depth-aware minimal solvers.

Each solver takes a minimal sample of correspondences with depth priors,
solves the pairwise-distance system for the depth correction (and focal
lengths when unknown), and recovers the pose of every admissible branch by
rigidly aligning the back-projected points. Branches are kept only when
alpha = sqrt(gamma) is real and every corrected sample depth is strictly
positive (and, in the focal modes, the recovered focals are positive and
inside the optional plausibility bounds).
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from .geometry import (
    AffineCorrection,
    CameraModel,
    Correspondences,
    Hypothesis,
    Pose,
    lift_points,
)
from .polysys import DegenerateSampleError, build_system, solve_system

__all__ = [
    "rigid_align",
    "scaled_align",
    "solve_calibrated",
    "solve_scale_only",
    "solve_no_correction",
    "solve_shared_focal",
    "solve_two_focal",
    "DEPTH_SAMPLE_SIZE",
]

DEPTH_SAMPLE_SIZE = {"calibrated": 3, "shared_focal": 4, "two_focal": 4}


def rigid_align(P1: np.ndarray, P2: np.ndarray) -> Pose:
    """Least-squares rotation + translation mapping P1 onto P2 (no scale).

    Uses the SVD of the centered cross-covariance with reflection correction,
    so det(R) = +1. Raises DegenerateSampleError for collinear point sets.
    """
    P1 = np.asarray(P1, dtype=np.float64)
    P2 = np.asarray(P2, dtype=np.float64)
    if P1.shape != P2.shape or P1.shape[0] < 3 or P1.shape[1] != 3:
        raise ValueError("need matching (N>=3, 3) point arrays")
    c1 = P1.mean(axis=0)
    c2 = P2.mean(axis=0)
    H = (P1 - c1).T @ (P2 - c2)
    U, S, Vt = np.linalg.svd(H)
    if S[1] <= 1e-9 * max(S[0], 1e-300):
        raise DegenerateSampleError("collinear points in rigid alignment")
    d = np.sign(np.linalg.det(Vt.T @ U.T))
    R = Vt.T @ np.diag([1.0, 1.0, d]) @ U.T
    t = c2 - R @ c1
    return Pose(R, t)


def scaled_align(P1: np.ndarray, P2: np.ndarray) -> tuple[float, Pose]:
    """Similarity alignment P2 ~ c * R * P1 + t; returns (c, Pose(R, t)).

    Same degeneracy conditions as rigid_align; c > 0 by construction on
    non-degenerate input.
    """
    P1 = np.asarray(P1, dtype=np.float64)
    P2 = np.asarray(P2, dtype=np.float64)
    c1 = P1.mean(axis=0)
    c2 = P2.mean(axis=0)
    A = P1 - c1
    B = P2 - c2
    H = A.T @ B
    U, S, Vt = np.linalg.svd(H)
    if S[1] <= 1e-9 * max(S[0], 1e-300):
        raise DegenerateSampleError("collinear points in scaled alignment")
    d = np.sign(np.linalg.det(Vt.T @ U.T))
    D = np.diag([1.0, 1.0, d])
    R = Vt.T @ D @ U.T
    var1 = np.sum(A * A)
    if var1 <= 0:
        raise DegenerateSampleError("coincident points in scaled alignment")
    c = float(np.trace(np.diag(S) @ D) / var1)
    if c <= 0:
        raise DegenerateSampleError("non-positive similarity scale")
    t = c2 - c * (R @ c1)
    return c, Pose(R, t)


def solve_scale_only(
    corr: Correspondences, cam1: CameraModel, cam2: CameraModel
) -> list[Hypothesis]:
    """Ablation baseline: models the depth-scale ratio but no shifts.

    The pose and alpha come from one similarity alignment of the raw-depth
    lifted points (dhat1 = d1, dhat2 = alpha * d2), so one hypothesis at most.
    """
    if len(corr) != 3:
        raise ValueError("scale-only solver needs exactly 3 correspondences")
    if np.any(corr.d1 <= 0) or np.any(corr.d2 <= 0):
        return []
    P1 = lift_points(corr.p1, corr.d1, cam1)
    P2raw = lift_points(corr.p2, corr.d2, cam2)
    try:
        c, pose_raw = scaled_align(P1, P2raw)
    except DegenerateSampleError:
        return []
    # P2raw ~ c R P1 + t  <=>  alpha P2raw = R P1 + t / c with alpha = 1 / c
    alpha = 1.0 / c
    pose = Pose(pose_raw.R, pose_raw.t * alpha)
    return [Hypothesis(pose, AffineCorrection(alpha, 0.0, 0.0))]


def solve_no_correction(
    corr: Correspondences, cam1: CameraModel, cam2: CameraModel
) -> list[Hypothesis]:
    """Ablation baseline: trusts the depth priors as-is (alpha=1, betas=0)."""
    if len(corr) != 3:
        raise ValueError("no-correction solver needs exactly 3 correspondences")
    if np.any(corr.d1 <= 0) or np.any(corr.d2 <= 0):
        return []
    P1 = lift_points(corr.p1, corr.d1, cam1)
    P2 = lift_points(corr.p2, corr.d2, cam2)
    try:
        pose = rigid_align(P1, P2)
    except DegenerateSampleError:
        return []
    return [Hypothesis(pose, AffineCorrection(1.0, 0.0, 0.0))]


def _assemble(q1, q2, corr, solutions, mode, focal_bounds):
    """Filter algebraic branches and recover a pose per admissible one."""
    out = []
    for sol in solutions:
        if sol.gamma <= 0:
            continue
        alpha = float(np.sqrt(sol.gamma))
        dh1 = corr.d1 + sol.beta1
        dh2 = alpha * (corr.d2 + sol.beta2)
        if np.any(dh1 <= 0) or np.any(dh2 <= 0):
            continue
        if mode == "calibrated":
            f1 = f2 = None
            r1, r2 = q1, q2
        else:
            if sol.omega1 is None or sol.omega1 <= 0:
                continue
            f1 = float(1.0 / np.sqrt(sol.omega1))
            if mode == "shared_focal":
                f2 = f1
            else:
                if sol.omega2 is None or sol.omega2 <= 0:
                    continue
                f2 = float(1.0 / np.sqrt(sol.omega2))
            if focal_bounds is not None:
                lo, hi = focal_bounds
                if not (lo <= f1 <= hi and lo <= f2 <= hi):
                    continue
            r1 = np.column_stack([q1[:, 0] / f1, q1[:, 1] / f1, q1[:, 2]])
            r2 = np.column_stack([q2[:, 0] / f2, q2[:, 1] / f2, q2[:, 2]])
        P1 = r1 * dh1[:, None]
        P2 = r2 * dh2[:, None]
        try:
            pose = rigid_align(P1, P2)
        except DegenerateSampleError:
            continue
        out.append(
            Hypothesis(pose, AffineCorrection(alpha, sol.beta1, sol.beta2), f1, f2)
        )
    return out


def solve_calibrated(
    corr: Correspondences, cam1: CameraModel, cam2: CameraModel
) -> list[Hypothesis]:
    """3-point solver for known intrinsics: at most 4 hypotheses."""
    if len(corr) != 3:
        raise ValueError("calibrated solver needs exactly 3 correspondences")
    q1 = lift_points(corr.p1, np.ones(3), cam1)
    q2 = lift_points(corr.p2, np.ones(3), cam2)
    try:
        system = build_system(q1, q2, corr.d1, corr.d2, "calibrated")
        solutions = solve_system(system)
    except DegenerateSampleError:
        return []
    return _assemble(q1, q2, corr, solutions, "calibrated", None)


def solve_shared_focal(
    corr: Correspondences, focal_bounds: Optional[tuple[float, float]] = None
) -> list[Hypothesis]:
    """4-point solver for one unknown focal shared by both cameras (<= 8).

    Pixel coordinates must be pre-centered at the principal point.
    """
    return _solve_focal_mode(corr, "shared_focal", focal_bounds)


def solve_two_focal(
    corr: Correspondences, focal_bounds: Optional[tuple[float, float]] = None
) -> list[Hypothesis]:
    """4-point solver for two independent unknown focals (<= 4 hypotheses).

    Pixel coordinates must be pre-centered at the principal point.
    """
    return _solve_focal_mode(corr, "two_focal", focal_bounds)


def _solve_focal_mode(corr, mode, focal_bounds):
    if len(corr) != 4:
        raise ValueError(f"{mode} solver needs exactly 4 correspondences")
    q1 = np.column_stack([corr.p1, np.ones(4)])
    q2 = np.column_stack([corr.p2, np.ones(4)])
    try:
        system = build_system(q1, q2, corr.d1, corr.d2, mode)
        solutions = solve_system(system)
    except DegenerateSampleError:
        return []
    return _assemble(q1, q2, corr, solutions, mode, focal_bounds)
