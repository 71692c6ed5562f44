"""Hybrid MSAC scoring: truncated depth-reprojection + epipolar errors.

A correspondence contributes three data types: (p1, p2, d1) scored by the
forward reprojection error, (p1, p2, d2) by the backward one, and (p1, p2)
by the Sampson error. The combined score of a hypothesis is

    sum_i  min(E_fwd, tau_r^2) + min(E_bwd, tau_r^2)
         + 2 * lambda_s * (tau_r^2 / tau_s^2) * min(E_s, tau_s^2)

with all thresholds squared internally (they are stored in pixels).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import (
    CameraModel,
    Correspondences,
    ErrorThresholds,
    Hypothesis,
    depth_reprojection_errors,
    sampson_error,
    skew,
)

__all__ = ["InlierMasks", "hypothesis_cameras", "hypothesis_errors", "score_hypothesis"]


@dataclass(frozen=True)
class InlierMasks:
    """Per-data-type inlier masks (same length as the correspondence list)."""

    type1: np.ndarray  # forward depth-reprojection inliers (p1, p2, d1)
    type2: np.ndarray  # backward depth-reprojection inliers (p1, p2, d2)
    type3: np.ndarray  # epipolar (Sampson) inliers (p1, p2)

    def __post_init__(self):
        n = len(self.type1)
        if not (len(self.type2) == len(self.type3) == n):
            raise ValueError("masks must have equal lengths")

    def counts(self) -> tuple[int, int, int]:
        return int(self.type1.sum()), int(self.type2.sum()), int(self.type3.sum())

    def ratios(self) -> np.ndarray:
        n = max(len(self.type1), 1)
        return np.array(self.counts()) / n


def hypothesis_cameras(
    hyp: Hypothesis, cam1: CameraModel | None, cam2: CameraModel | None
) -> tuple[CameraModel, CameraModel]:
    """Effective cameras for a hypothesis: its focals override in uncalibrated
    modes (principal point at the origin of the centered pixel frame)."""
    if hyp.focal1 is not None:
        c1 = CameraModel(hyp.focal1)
        c2 = CameraModel(hyp.focal2 if hyp.focal2 is not None else hyp.focal1)
        return c1, c2
    if cam1 is None or cam2 is None:
        raise ValueError("calibrated hypothesis requires camera models")
    return cam1, cam2


def hypothesis_errors(
    corr: Correspondences,
    hyp: Hypothesis,
    cam1: CameraModel | None,
    cam2: CameraModel | None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(E_fwd, E_bwd, E_sampson) squared pixel errors of every correspondence.

    In the calibrated case the Sampson error is evaluated on normalized
    coordinates and rescaled by sqrt(f1*f2) into pixels; with estimated
    focals the fundamental matrix acts on the centered pixels directly.
    """
    c1, c2 = hypothesis_cameras(hyp, cam1, cam2)
    e_fwd, e_bwd = depth_reprojection_errors(corr, hyp, c1, c2)
    E = skew(hyp.pose.t) @ hyp.pose.R
    if hyp.focal1 is None:
        x1 = (corr.p1 - [c1.cx, c1.cy]) / c1.focal
        x2 = (corr.p2 - [c2.cx, c2.cy]) / c2.focal
        e_s = sampson_error(x1, x2, E, pixel_scale=np.sqrt(c1.focal * c2.focal))
    else:
        K1inv = np.diag([1.0 / c1.focal, 1.0 / c1.focal, 1.0])
        K2inv = np.diag([1.0 / c2.focal, 1.0 / c2.focal, 1.0])
        F = K2inv @ E @ K1inv
        e_s = sampson_error(corr.p1, corr.p2, F)
    return e_fwd, e_bwd, e_s


def score_hypothesis(
    corr: Correspondences,
    hyp: Hypothesis,
    thresholds: ErrorThresholds,
    cam1: CameraModel | None = None,
    cam2: CameraModel | None = None,
    depth_weight: float = 1.0,
    epipolar_weight: float = 1.0,
) -> tuple[float, InlierMasks]:
    """Truncated MSAC score (lower is better) and per-type inlier masks.

    depth_weight/epipolar_weight switch score components off for the
    ablation variants; masks are always computed from the full errors.
    """
    e_fwd, e_bwd, e_s = hypothesis_errors(corr, hyp, cam1, cam2)
    tr2 = thresholds.tau_r**2
    ts2 = thresholds.tau_s**2
    masks = InlierMasks(e_fwd < tr2, e_bwd < tr2, e_s < ts2)
    score = depth_weight * (
        np.minimum(e_fwd, tr2).sum() + np.minimum(e_bwd, tr2).sum()
    ) + epipolar_weight * (
        2.0 * thresholds.lambda_s * (tr2 / ts2) * np.minimum(e_s, ts2).sum()
    )
    return float(score), masks
