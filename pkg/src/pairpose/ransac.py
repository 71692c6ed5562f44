"""Hybrid LO-MSAC estimation.

Each iteration selects a depth-aware or point-based minimal solver, draws a
distinct minimal sample, scores every hypothesis the solver returns with the
combined truncated score, and locally optimizes new bests on their inlier
sets. Solver selection starts uniform and later follows the per-data-type
inlier ratios; termination combines a minimum iteration count with the
classic adaptive bound computed from the epipolar inlier ratio and the point
solver's sample size.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .geometry import (
    CameraModel,
    Correspondences,
    ErrorThresholds,
    Hypothesis,
    Pose,
)
from . import depth_solvers
from . import point_solvers
from .refine import RefinementProblem, refine
from .scoring import InlierMasks, score_hypothesis

__all__ = [
    "EstimationConfig",
    "EstimationReport",
    "select_solver",
    "estimate",
    "POINT_SAMPLE_SIZE",
]

POINT_SAMPLE_SIZE = {"calibrated": 5, "shared_focal": 7, "two_focal": 7}


@dataclass(frozen=True)
class EstimationConfig:
    mode: str = "calibrated"
    thresholds: ErrorThresholds = field(default_factory=ErrorThresholds)
    min_iterations: int = 1000
    max_iterations: int = 10000
    lo_steps: int = 4
    confidence: float = 0.9999
    seed: int = 0
    solver_floor_prob: float = 0.1
    # hybrid-component switches (ablation variants); "hybrid" uses everything
    solver_mode: str = "hybrid"  # hybrid | depth | point
    score_mode: str = "hybrid"  # hybrid | depth | point
    lo_mode: str = "hybrid"  # hybrid | depth | point
    # depth-correction model; "scale_only"/"none" are calibrated-only baselines
    correction_model: str = "affine"  # affine | scale_only | none
    focal_bounds: Optional[tuple[float, float]] = None
    track_scores: bool = False

    def __post_init__(self):
        if self.mode not in ("calibrated", "shared_focal", "two_focal"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not 0.0 < self.confidence < 1.0:
            raise ValueError("confidence must be in (0, 1)")
        if self.min_iterations > self.max_iterations:
            raise ValueError("min_iterations must not exceed max_iterations")
        if self.lo_steps < 0:
            raise ValueError("lo_steps must be nonnegative")
        for mode_field in (self.solver_mode, self.score_mode, self.lo_mode):
            if mode_field not in ("hybrid", "depth", "point"):
                raise ValueError(f"unknown component mode {mode_field!r}")
        if self.correction_model not in ("affine", "scale_only", "none"):
            raise ValueError(f"unknown correction model {self.correction_model!r}")


@dataclass(frozen=True)
class EstimationReport:
    success: bool
    best: Optional[Hypothesis]
    masks: Optional[InlierMasks]
    score: float
    iterations: int
    lo_runs: int
    solver_usage: dict
    elapsed: float
    debug_scores: Optional[list] = None


def select_solver(ratios, mode: str, rng, cfg: EstimationConfig) -> str:
    """Pick "depth" or "point" for the next iteration.

    Before any inlier statistics exist both solvers are equally likely.
    Afterwards each solver's weight is the probability that its minimal
    sample is all-inlier, using the geometric mean of the three data-type
    ratios per correspondence for the depth solver and the epipolar ratio
    for the point solver; weights are normalized and clamped to
    [floor, 1 - floor] so neither solver starves.
    """
    use_depth = cfg.solver_mode in ("hybrid", "depth")
    use_point = cfg.solver_mode in ("hybrid", "point")
    if not use_depth:
        return "point"
    if not use_point:
        return "depth"
    if ratios is None:
        p_depth = 0.5
    else:
        e1, e2, e3 = np.clip(ratios, 0.0, 1.0)
        gm = (e1 * e2 * e3) ** (1.0 / 3.0)
        w_depth = gm ** depth_solvers.DEPTH_SAMPLE_SIZE[mode]
        w_point = e3 ** POINT_SAMPLE_SIZE[mode]
        total = w_depth + w_point
        if total <= 0:
            p_depth = 0.5
        else:
            floor = cfg.solver_floor_prob
            p_depth = np.clip(w_depth / total, floor, 1.0 - floor)
    return "depth" if rng.random() < p_depth else "point"


def _depth_hypotheses(sample: Correspondences, cfg, cam1, cam2):
    if cfg.correction_model == "scale_only":
        return depth_solvers.solve_scale_only(sample, cam1, cam2)
    if cfg.correction_model == "none":
        return depth_solvers.solve_no_correction(sample, cam1, cam2)
    if cfg.mode == "calibrated":
        return depth_solvers.solve_calibrated(sample, cam1, cam2)
    if cfg.mode == "shared_focal":
        return depth_solvers.solve_shared_focal(sample, cfg.focal_bounds)
    return depth_solvers.solve_two_focal(sample, cfg.focal_bounds)


def _point_hypotheses(sample: Correspondences, cfg, cam1, cam2):
    """Point-solver poses completed with a triangulation-fitted correction."""
    out = []
    if cfg.mode == "calibrated":
        x1 = (sample.p1 - [cam1.cx, cam1.cy]) / cam1.focal
        x2 = (sample.p2 - [cam2.cx, cam2.cy]) / cam2.focal
        candidates = [(pose, None, None) for pose in point_solvers.solve_5pt_essential(x1, x2)]
    elif cfg.mode == "shared_focal":
        candidates = [
            (pose, f, f) for pose, f in point_solvers.solve_shared_focal_points(sample.p1, sample.p2)
        ]
    else:
        candidates = [
            (pose, f1, f2)
            for pose, f1, f2 in point_solvers.solve_two_focal_points(sample.p1, sample.p2)
        ]
    for pose, f1, f2 in candidates:
        if f1 is not None and cfg.focal_bounds is not None:
            lo, hi = cfg.focal_bounds
            if not (lo <= f1 <= hi and lo <= f2 <= hi):
                continue
        c1 = cam1 if f1 is None else CameraModel(f1)
        c2 = cam2 if f2 is None else CameraModel(f2)
        fitted = point_solvers.fit_scale_shift_full(sample, pose, c1, c2)
        if fitted is None:
            continue
        affine, a1 = fitted
        # corrected depths live in z/a1 units; rescale the translation to match
        full_pose = Pose(pose.R, pose.t / a1)
        out.append(Hypothesis(full_pose, affine, f1, f2))
    return out


def _score(corr, hyp, cfg, cam1, cam2):
    return score_hypothesis(
        corr,
        hyp,
        cfg.thresholds,
        cam1,
        cam2,
        depth_weight=1.0 if cfg.score_mode in ("hybrid", "depth") else 0.0,
        epipolar_weight=1.0 if cfg.score_mode in ("hybrid", "point") else 0.0,
    )


_FROZEN_PARAMS = {"affine": (), "scale_only": (7, 8), "none": (6, 7, 8)}


def _local_optimize(corr, best_hyp, best_score, best_masks, cfg, cam1, cam2):
    """Run up to cfg.lo_steps accepted refinement rounds on the current best."""
    lo_runs = 0
    for _ in range(cfg.lo_steps):
        masks = best_masks
        if cfg.lo_mode == "depth":
            masks = InlierMasks(masks.type1, masks.type2, np.zeros_like(masks.type3))
        elif cfg.lo_mode == "point":
            masks = InlierMasks(
                np.zeros_like(masks.type1), np.zeros_like(masks.type2), masks.type3
            )
        n1, n2, n3 = masks.counts()
        if n3 < 4 and n1 < 3 and n2 < 3:
            break
        problem = RefinementProblem(
            corr,
            masks,
            best_hyp,
            cfg.thresholds,
            cfg.mode,
            cam1,
            cam2,
            fixed_params=_FROZEN_PARAMS[cfg.correction_model],
        )
        result = refine(problem)
        lo_runs += 1
        if not result.improved:
            break
        new_score, new_masks = _score(corr, result.hypothesis, cfg, cam1, cam2)
        if new_score < best_score:
            best_hyp, best_score, best_masks = result.hypothesis, new_score, new_masks
        else:
            break
    return best_hyp, best_score, best_masks, lo_runs


def _adaptive_bound(eps3: float, sample_size: int, confidence: float) -> float:
    if eps3 <= 0.0:
        return np.inf
    if eps3 >= 1.0:
        return 1.0
    p_good = eps3**sample_size
    if p_good >= 1.0:
        return 1.0
    denom = np.log1p(-min(p_good, 1.0 - 1e-16))
    if denom >= 0:
        return np.inf
    return np.log(1.0 - confidence) / denom


def estimate(
    corr: Correspondences,
    cfg: EstimationConfig,
    cams: Optional[tuple[CameraModel, CameraModel]] = None,
    principal_points=None,
) -> EstimationReport:
    """Robust hypothesis search over a correspondence set.

    cams is required in calibrated mode. In the uncalibrated modes the pixel
    coordinates are recentered at the given principal points (pass None if
    the input is already centered); the returned hypothesis carries the
    estimated focals.
    """
    start = time.perf_counter()
    if cfg.mode == "calibrated":
        if cams is None:
            raise ValueError("calibrated mode requires camera models")
        cam1, cam2 = cams
        work = corr
    else:
        cam1 = cam2 = None
        if principal_points is not None:
            pp1, pp2 = principal_points
            work = corr.recentered(np.asarray(pp1, float), np.asarray(pp2, float))
        else:
            work = corr

    sizes = []
    if cfg.solver_mode in ("hybrid", "depth"):
        sizes.append(depth_solvers.DEPTH_SAMPLE_SIZE[cfg.mode])
    if cfg.solver_mode in ("hybrid", "point"):
        sizes.append(POINT_SAMPLE_SIZE[cfg.mode])
    needed = max(sizes)
    n = len(work)
    if n < needed:
        raise ValueError(f"too few correspondences: {n} < {needed}")

    rng = np.random.default_rng(cfg.seed)
    best_hyp = None
    best_score = np.inf
    best_masks = None
    ratios = None
    lo_runs_total = 0
    usage = {"depth": 0, "point": 0}
    debug_scores = [] if cfg.track_scores else None

    it = 0
    while it < cfg.max_iterations:
        it += 1
        solver = select_solver(ratios, cfg.mode, rng, cfg)
        usage[solver] += 1
        size = (
            depth_solvers.DEPTH_SAMPLE_SIZE[cfg.mode]
            if solver == "depth"
            else POINT_SAMPLE_SIZE[cfg.mode]
        )
        idx = rng.choice(n, size=size, replace=False)
        sample = work.take(idx)
        if solver == "depth":
            hyps = _depth_hypotheses(sample, cfg, cam1, cam2)
        else:
            hyps = _point_hypotheses(sample, cfg, cam1, cam2)

        sample_best = None
        sample_best_score = np.inf
        sample_best_masks = None
        for hyp in hyps:
            score, masks = _score(work, hyp, cfg, cam1, cam2)
            if debug_scores is not None:
                debug_scores.append(score)
            if score < sample_best_score:
                sample_best, sample_best_score, sample_best_masks = hyp, score, masks

        if sample_best is not None and sample_best_score < best_score:
            best_hyp, best_score, best_masks = (
                sample_best,
                sample_best_score,
                sample_best_masks,
            )
            if cfg.lo_steps > 0:
                best_hyp, best_score, best_masks, lo_runs = _local_optimize(
                    work, best_hyp, best_score, best_masks, cfg, cam1, cam2
                )
                lo_runs_total += lo_runs
            ratios = best_masks.ratios()

        if it >= cfg.min_iterations and best_masks is not None:
            bound = _adaptive_bound(
                best_masks.ratios()[2], POINT_SAMPLE_SIZE[cfg.mode], cfg.confidence
            )
            if it >= bound:
                break

    elapsed = time.perf_counter() - start
    if best_hyp is None:
        return EstimationReport(
            False, None, None, np.inf, it, lo_runs_total, usage, elapsed, debug_scores
        )
    return EstimationReport(
        True,
        best_hyp,
        best_masks,
        best_score,
        it,
        lo_runs_total,
        usage,
        elapsed,
        debug_scores,
    )
