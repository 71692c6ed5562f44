"""Two-view relative pose estimation with affine-corrected monocular depth priors.

Jointly estimates rotation, translation, per-image depth scale/shift
corrections, and optionally one or two unknown focal lengths from pixel
correspondences annotated with monocular depth samples, via depth-aware
minimal solvers inside a hybrid LO-MSAC loop.
"""

from .geometry import (
    AffineCorrection,
    BehindCameraError,
    CameraModel,
    Correspondences,
    ErrorThresholds,
    Hypothesis,
    Pose,
    apply_correction,
    depth_reprojection_errors,
    focal_error,
    focal_error_pair,
    lift_points,
    pose_auc,
    pose_error,
    project_point,
    project_points,
    sampson_error,
)
from .polysys import (
    AlgebraicSolution,
    ConstraintSystem,
    DegenerateSampleError,
    build_system,
    solve_system,
    verify_solution,
)
from .depth_solvers import (
    rigid_align,
    scaled_align,
    solve_calibrated,
    solve_shared_focal,
    solve_two_focal,
)
from .point_solvers import (
    EpipolarMatrix,
    bougnoux_focals,
    fit_scale_shift,
    solve_5pt_essential,
    solve_7pt_fundamental,
    solve_shared_focal_points,
    solve_two_focal_points,
)
from .scoring import InlierMasks, score_hypothesis
from .ransac import EstimationConfig, EstimationReport, estimate, select_solver
from .refine import RefinementProblem, RefineResult, refine, residuals
from .synthetic import SceneSpec, SyntheticPair, generate_pair
from .records import PairRecord, ParseError, ResultRecord

__version__ = "0.1.0"
