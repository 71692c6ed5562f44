"""Core two-view geometry: camera model, point lifting/projection, error
functions, and pose/focal accuracy metrics.

Conventions
-----------
- Image points are pixel coordinates, stored as float64 arrays of shape (N, 2)
  (or (2,) for single points).
- A pose (R, t) maps camera-1 coordinates into camera-2: P2 = R @ P1 + t.
- Depth priors are unit-free; the affine correction turns them into
  consistent depths: dhat1 = d1 + beta1, dhat2 = alpha * (d2 + beta2).
- Squared thresholds: tau_r and tau_s are stored unsquared (pixels) and
  squared at use sites, since all error functions return squared pixels.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

__all__ = [
    "BehindCameraError",
    "CameraModel",
    "Pose",
    "AffineCorrection",
    "Hypothesis",
    "ErrorThresholds",
    "Correspondences",
    "lift_points",
    "project_point",
    "project_points",
    "apply_correction",
    "depth_reprojection_errors",
    "sampson_error",
    "fundamental_from_pose",
    "pose_error",
    "pose_auc",
    "focal_error",
    "skew",
    "so3_exp",
    "rotation_angle_deg",
]

ROTATION_TOL = 1e-9


class BehindCameraError(ValueError):
    """Raised when a point with non-positive depth is projected."""


@dataclass(frozen=True)
class CameraModel:
    """Pinhole camera with square pixels: K = [[f, 0, cx], [0, f, cy], [0, 0, 1]]."""

    focal: float
    cx: float = 0.0
    cy: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.focal) and self.focal > 0):
            raise ValueError(f"focal must be positive, got {self.focal}")

    @property
    def K(self) -> np.ndarray:
        return np.array(
            [[self.focal, 0.0, self.cx], [0.0, self.focal, self.cy], [0.0, 0.0, 1.0]]
        )

    @property
    def principal_point(self) -> np.ndarray:
        return np.array([self.cx, self.cy])


@dataclass(frozen=True)
class Pose:
    """Rigid transform mapping camera-1 coordinates into camera-2."""

    R: np.ndarray  # (3, 3) special orthogonal
    t: np.ndarray  # (3,)

    def __post_init__(self):
        object.__setattr__(self, "R", np.asarray(self.R, dtype=np.float64))
        object.__setattr__(self, "t", np.asarray(self.t, dtype=np.float64).reshape(3))

    def validate(self, tol: float = ROTATION_TOL) -> None:
        err = np.abs(self.R.T @ self.R - np.eye(3)).max()
        if err > tol:
            raise ValueError(f"R is not orthonormal (|R^T R - I|_inf = {err:.3e})")
        if abs(np.linalg.det(self.R) - 1.0) > tol:
            raise ValueError("R has determinant != +1")

    def inverse(self) -> "Pose":
        return Pose(self.R.T, -self.R.T @ self.t)

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.eye(3), np.zeros(3))


@dataclass(frozen=True)
class AffineCorrection:
    """Scale/shift correction relating the two images' depth priors."""

    alpha: float
    beta1: float
    beta2: float

    def __post_init__(self):
        if not (np.isfinite(self.alpha) and self.alpha > 0):
            raise ValueError(f"alpha must be positive, got {self.alpha}")

    @staticmethod
    def identity() -> "AffineCorrection":
        return AffineCorrection(1.0, 0.0, 0.0)


@dataclass(frozen=True)
class Hypothesis:
    """A full model candidate: pose + depth correction (+ focals when estimated)."""

    pose: Pose
    affine: AffineCorrection
    focal1: Optional[float] = None
    focal2: Optional[float] = None


@dataclass(frozen=True)
class ErrorThresholds:
    """Inlier thresholds (unsquared pixels) and the epipolar score weight."""

    tau_r: float = 8.0
    tau_s: float = 2.0
    lambda_s: float = 1.0

    def __post_init__(self):
        if self.tau_r <= 0 or self.tau_s <= 0:
            raise ValueError("thresholds must be positive")
        if self.lambda_s < 0:
            raise ValueError("lambda_s must be nonnegative")


@dataclass(frozen=True)
class Correspondences:
    """A batch of pixel matches with per-match depth priors."""

    p1: np.ndarray  # (N, 2)
    p2: np.ndarray  # (N, 2)
    d1: np.ndarray  # (N,)
    d2: np.ndarray  # (N,)

    def __post_init__(self):
        object.__setattr__(self, "p1", np.asarray(self.p1, dtype=np.float64).reshape(-1, 2))
        object.__setattr__(self, "p2", np.asarray(self.p2, dtype=np.float64).reshape(-1, 2))
        object.__setattr__(self, "d1", np.asarray(self.d1, dtype=np.float64).reshape(-1))
        object.__setattr__(self, "d2", np.asarray(self.d2, dtype=np.float64).reshape(-1))
        n = len(self.p1)
        if not (len(self.p2) == len(self.d1) == len(self.d2) == n):
            raise ValueError("correspondence fields must have matching lengths")

    def __len__(self) -> int:
        return len(self.p1)

    @staticmethod
    def from_array(arr: np.ndarray) -> "Correspondences":
        """Build from an (N, 6) array of rows (x1, y1, x2, y2, d1, d2)."""
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 6:
            raise ValueError(f"expected (N, 6) array, got {arr.shape}")
        return Correspondences(arr[:, 0:2], arr[:, 2:4], arr[:, 4], arr[:, 5])

    def to_array(self) -> np.ndarray:
        return np.hstack([self.p1, self.p2, self.d1[:, None], self.d2[:, None]])

    def take(self, idx) -> "Correspondences":
        return Correspondences(self.p1[idx], self.p2[idx], self.d1[idx], self.d2[idx])

    def recentered(self, pp1: np.ndarray, pp2: np.ndarray) -> "Correspondences":
        """Shift pixel coordinates so the principal points move to the origin."""
        return Correspondences(self.p1 - pp1, self.p2 - pp2, self.d1, self.d2)


# ---------------------------------------------------------------------------
# lifting / projection


def lift_points(p: np.ndarray, depth: np.ndarray, cam: CameraModel) -> np.ndarray:
    """Back-project pixels to 3D camera coordinates: K^-1 (p, 1)^T * depth.

    The z component of each output equals its depth exactly.
    """
    p = np.asarray(p, dtype=np.float64)
    depth = np.asarray(depth, dtype=np.float64)
    x = (p[..., 0] - cam.cx) / cam.focal
    y = (p[..., 1] - cam.cy) / cam.focal
    return np.stack([x * depth, y * depth, depth * np.ones_like(x)], axis=-1)


def project_points(P: np.ndarray, cam: CameraModel) -> tuple[np.ndarray, np.ndarray]:
    """Perspective projection of (..., 3) points.

    Returns (pixels, in_front) where in_front marks points with z > 0;
    projections of points at or behind the camera are not meaningful.
    """
    P = np.asarray(P, dtype=np.float64)
    z = P[..., 2]
    in_front = z > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        u = cam.focal * P[..., 0] / z + cam.cx
        v = cam.focal * P[..., 1] / z + cam.cy
    return np.stack([u, v], axis=-1), in_front


def project_point(P: np.ndarray, cam: CameraModel) -> np.ndarray:
    """Project a single 3D point; raises BehindCameraError for z <= 0."""
    uv, ok = project_points(P, cam)
    if not np.all(ok):
        raise BehindCameraError("point has non-positive depth")
    return uv


def apply_correction(d1, d2, affine: AffineCorrection):
    """Corrected depths: dhat1 = d1 + beta1, dhat2 = alpha * (d2 + beta2).

    No clamping; negative outputs are filtered by callers that need
    positive depths.
    """
    d1 = np.asarray(d1, dtype=np.float64)
    d2 = np.asarray(d2, dtype=np.float64)
    return d1 + affine.beta1, affine.alpha * (d2 + affine.beta2)


# ---------------------------------------------------------------------------
# error functions


def depth_reprojection_errors(
    corr: Correspondences,
    hyp: Hypothesis,
    cam1: CameraModel,
    cam2: CameraModel,
) -> tuple[np.ndarray, np.ndarray]:
    """Squared depth-induced reprojection errors, both directions, in pixels^2.

    Lifts each match with the hypothesis' corrected depths, transfers it to
    the other view and measures the squared pixel displacement. A lift from a
    non-positive corrected depth or a projection behind the target camera
    yields +inf (callers truncate at the inlier threshold, so this is
    equivalent to outlier saturation).
    """
    dh1, dh2 = apply_correction(corr.d1, corr.d2, hyp.affine)
    R, t = hyp.pose.R, hyp.pose.t

    P1 = lift_points(corr.p1, dh1, cam1)
    q2, front2 = project_points(P1 @ R.T + t, cam2)
    e_fwd = np.sum((q2 - corr.p2) ** 2, axis=-1)
    e_fwd = np.where(front2 & (dh1 > 0), e_fwd, np.inf)

    P2 = lift_points(corr.p2, dh2, cam2)
    q1, front1 = project_points((P2 - t) @ R, cam1)
    e_bwd = np.sum((q1 - corr.p1) ** 2, axis=-1)
    e_bwd = np.where(front1 & (dh2 > 0), e_bwd, np.inf)
    return e_fwd, e_bwd


def sampson_error(
    p1: np.ndarray, p2: np.ndarray, F: np.ndarray, pixel_scale: float = 1.0
) -> np.ndarray:
    """Squared Sampson (first-order epipolar) distance for each match.

    When F is an essential matrix and p1/p2 are normalized camera
    coordinates, pass pixel_scale = sqrt(f1*f2) to express the result in
    pixels^2; the value is multiplied by pixel_scale**2.
    """
    p1 = np.atleast_2d(np.asarray(p1, dtype=np.float64))
    p2 = np.atleast_2d(np.asarray(p2, dtype=np.float64))
    x1 = np.hstack([p1, np.ones((len(p1), 1))])
    x2 = np.hstack([p2, np.ones((len(p2), 1))])
    Fx1 = x1 @ F.T
    Ftx2 = x2 @ F
    e = np.sum(x2 * Fx1, axis=-1)
    denom = Fx1[:, 0] ** 2 + Fx1[:, 1] ** 2 + Ftx2[:, 0] ** 2 + Ftx2[:, 1] ** 2
    num = e**2 * pixel_scale**2
    with np.errstate(divide="ignore", invalid="ignore"):
        err = num / denom
    # Both points on both epipoles: define 0 if the constraint holds, else huge.
    err = np.where(denom > 0, err, np.where(num > 0, np.inf, 0.0))
    return err


def fundamental_from_pose(pose: Pose, cam1: CameraModel, cam2: CameraModel) -> np.ndarray:
    """F = K2^-T [t]_x R K1^-1 so that x2^T F x1 = 0 in pixel coordinates."""
    E = skew(pose.t) @ pose.R
    K1inv = np.linalg.inv(cam1.K)
    K2inv = np.linalg.inv(cam2.K)
    return K2inv.T @ E @ K1inv


# ---------------------------------------------------------------------------
# metrics


def rotation_angle_deg(R: np.ndarray) -> float:
    """Rotation angle of R in degrees (atan2 form, accurate near 0)."""
    vee = 0.5 * np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    s = np.linalg.norm(vee)
    c = (np.trace(R) - 1.0) / 2.0
    return float(np.degrees(np.arctan2(s, c)))


def pose_error(est: Pose, gt: Pose, zero_tol: float = 1e-12) -> tuple[float, float]:
    """(rotation error, translation direction error), both in degrees.

    The translation error ignores scale; if one translation is (near) zero it
    is 0 when both are, else 180.
    """
    eps_r = rotation_angle_deg(est.R @ gt.R.T)
    n_est = np.linalg.norm(est.t)
    n_gt = np.linalg.norm(gt.t)
    if n_est < zero_tol or n_gt < zero_tol:
        eps_t = 0.0 if (n_est < zero_tol and n_gt < zero_tol) else 180.0
    else:
        u = est.t / n_est
        v = gt.t / n_gt
        eps_t = float(
            np.degrees(np.arctan2(np.linalg.norm(np.cross(u, v)), np.dot(u, v)))
        )
    return eps_r, eps_t


def pose_auc(errors, thresholds) -> list[float]:
    """Area under the cumulative recall curve, in percent, per threshold.

    The recall staircase vertices (error_i, i/N) are connected by straight
    segments (trapezoidal rule); beyond the largest error below a threshold
    the recall is extended flat. Failed pairs should be encoded as +inf.
    """
    errors = np.asarray(errors, dtype=np.float64)
    if errors.size == 0:
        raise ValueError("empty error list")
    if np.any(errors < 0):
        raise ValueError("errors must be nonnegative")
    order = np.argsort(errors)
    errs = errors[order]
    recall = np.arange(1, len(errs) + 1) / len(errs)
    aucs = []
    for thr in thresholds:
        keep = errs <= thr
        x = np.concatenate([[0.0], errs[keep], [thr]])
        y = np.concatenate([[0.0], recall[keep], [recall[keep][-1] if keep.any() else 0.0]])
        aucs.append(float(np.trapezoid(y, x) / thr * 100.0))
    return aucs


def focal_error(f_est: float, f_gt: float) -> float:
    """Relative focal error in percent: 100 * |f_est - f_gt| / f_gt."""
    if f_gt <= 0:
        raise ValueError("ground-truth focal must be positive")
    return 100.0 * abs(f_est - f_gt) / f_gt


def focal_error_pair(f1_est, f1_gt, f2_est, f2_gt) -> float:
    """Two-camera focal error: the max of the per-camera relative errors."""
    return max(focal_error(f1_est, f1_gt), focal_error(f2_est, f2_gt))


# ---------------------------------------------------------------------------
# small SO(3) helpers shared by solvers, refinement, and the synthetic bench


def skew(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64).reshape(3)
    return np.array(
        [[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]]
    )


def so3_exp(w: np.ndarray) -> np.ndarray:
    """Rodrigues exponential map from an axis-angle 3-vector."""
    w = np.asarray(w, dtype=np.float64).reshape(3)
    theta = np.linalg.norm(w)
    if theta < 1e-12:
        return np.eye(3) + skew(w)
    K = skew(w / theta)
    return np.eye(3) + np.sin(theta) * K + (1.0 - np.cos(theta)) * (K @ K)


def so3_log(R: np.ndarray) -> np.ndarray:
    """Axis-angle 3-vector of a rotation matrix (inverse of so3_exp)."""
    c = np.clip((np.trace(R) - 1.0) / 2.0, -1.0, 1.0)
    theta = np.arccos(c)
    vee = 0.5 * np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    if theta < 1e-7:
        return vee
    if theta > np.pi - 1e-5:
        # near pi the skew part vanishes; recover the axis from R + I
        M = (R + np.eye(3)) / 2.0
        axis = np.sqrt(np.maximum(np.diag(M), 0.0))
        k = int(np.argmax(axis))
        axis = M[:, k] / max(axis[k], 1e-12)
        axis /= np.linalg.norm(axis)
        if np.dot(axis, vee) < 0:
            axis = -axis
        return theta * axis
    return theta / np.sin(theta) * vee


def so3_left_jacobian(w: np.ndarray) -> np.ndarray:
    """Left Jacobian of SO(3): exp((w + J_l(w) dw)^) ~ exp(dw-increment) exp(w^)."""
    w = np.asarray(w, dtype=np.float64).reshape(3)
    theta = np.linalg.norm(w)
    K = skew(w)
    if theta < 1e-7:
        return np.eye(3) + K / 2.0 + K @ K / 6.0
    return (
        np.eye(3)
        + (1.0 - np.cos(theta)) / theta**2 * K
        + (theta - np.sin(theta)) / theta**3 * (K @ K)
    )
