"""Joint nonlinear refinement of a hypothesis on its current inlier sets.

Minimizes

    E(theta) = sum_{I1} E_fwd + sum_{I2} E_bwd
             + 2 * lambda_s * (tau_r^2 / tau_s^2) * sum_{I3} E_sampson

over rotation (tangent-space increment), translation, log(alpha), the two
shifts, and log-focals when present, with a damped Levenberg-Marquardt loop
and analytic Jacobians. The refined cost never exceeds the initial one; on
divergence the initial hypothesis is returned with improved=False.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import (
    AffineCorrection,
    CameraModel,
    Correspondences,
    ErrorThresholds,
    Hypothesis,
    Pose,
    lift_points,
    skew,
    so3_exp,
    so3_left_jacobian,
    so3_log,
)
from .scoring import InlierMasks

__all__ = ["RefinementProblem", "RefineResult", "residuals", "refine"]

MAX_ITERATIONS = 25
FUNCTION_TOL = 1e-10
BIG_RESIDUAL = 1e6  # behind-camera sentinel inside the optimizer


@dataclass(frozen=True)
class RefinementProblem:
    corr: Correspondences
    masks: InlierMasks
    initial: Hypothesis
    thresholds: ErrorThresholds
    mode: str  # calibrated | shared_focal | two_focal
    cam1: Optional[CameraModel] = None
    cam2: Optional[CameraModel] = None
    fixed_params: tuple = ()  # parameter indices held at their initial values

    def __post_init__(self):
        n1, n2, n3 = self.masks.counts()
        if n3 < 4 and (n1 < 3 and n2 < 3):
            raise ValueError("not enough inliers to constrain the refinement")
        if self.mode == "calibrated" and (self.cam1 is None or self.cam2 is None):
            raise ValueError("calibrated refinement requires camera models")


@dataclass(frozen=True)
class RefineResult:
    hypothesis: Hypothesis
    initial_cost: float
    final_cost: float
    iterations: int
    improved: bool


def _param_count(mode: str) -> int:
    return {"calibrated": 9, "shared_focal": 10, "two_focal": 11}[mode]


def pack_params(hyp: Hypothesis, prob: RefinementProblem) -> np.ndarray:
    """[rot tangent (3), t (3), log alpha, beta1, beta2, log focals...]."""
    delta = so3_log(hyp.pose.R @ prob.initial.pose.R.T)
    x = [*delta, *hyp.pose.t, np.log(hyp.affine.alpha), hyp.affine.beta1, hyp.affine.beta2]
    if prob.mode == "shared_focal":
        x.append(np.log(hyp.focal1))
    elif prob.mode == "two_focal":
        x.append(np.log(hyp.focal1))
        x.append(np.log(hyp.focal2))
    return np.array(x)


def unpack_params(x: np.ndarray, prob: RefinementProblem) -> Hypothesis:
    R = so3_exp(x[:3]) @ prob.initial.pose.R
    pose = Pose(R, x[3:6])
    affine = AffineCorrection(float(np.exp(x[6])), float(x[7]), float(x[8]))
    if prob.mode == "calibrated":
        return Hypothesis(pose, affine)
    if prob.mode == "shared_focal":
        f = float(np.exp(x[9]))
        return Hypothesis(pose, affine, f, f)
    return Hypothesis(pose, affine, float(np.exp(x[9])), float(np.exp(x[10])))


def _cameras(x, prob):
    if prob.mode == "calibrated":
        return prob.cam1, prob.cam2
    if prob.mode == "shared_focal":
        f = float(np.exp(x[9]))
        return CameraModel(f), CameraModel(f)
    return CameraModel(float(np.exp(x[9]))), CameraModel(float(np.exp(x[10])))


def _epipolar_weight(prob) -> float:
    th = prob.thresholds
    return np.sqrt(2.0 * th.lambda_s) * th.tau_r / th.tau_s


def residual_vector(x: np.ndarray, prob: RefinementProblem) -> np.ndarray:
    """Stacked residuals whose squared sum equals the refinement cost E."""
    corr, m = prob.corr, prob.masks
    R = so3_exp(x[:3]) @ prob.initial.pose.R
    t = x[3:6]
    alpha = np.exp(x[6])
    beta1, beta2 = x[7], x[8]
    cam1, cam2 = _cameras(x, prob)

    parts = []
    if m.type1.any():
        q1 = lift_points(corr.p1[m.type1], np.ones(int(m.type1.sum())), cam1)
        P1 = q1 * (corr.d1[m.type1] + beta1)[:, None]
        X = P1 @ R.T + t
        parts.append(_projection_residuals(X, corr.p2[m.type1], cam2))
    if m.type2.any():
        q2 = lift_points(corr.p2[m.type2], np.ones(int(m.type2.sum())), cam2)
        P2 = q2 * (alpha * (corr.d2[m.type2] + beta2))[:, None]
        Y = (P2 - t) @ R
        parts.append(_projection_residuals(Y, corr.p1[m.type2], cam1))
    if m.type3.any():
        parts.append(_sampson_residuals(x, prob, R, t, cam1, cam2)[0])
    return np.concatenate(parts) if parts else np.zeros(0)


def _projection_residuals(X, target, cam):
    z = X[:, 2]
    ok = z > 1e-12
    with np.errstate(divide="ignore", invalid="ignore"):
        u = cam.focal * X[:, 0] / z + cam.cx
        v = cam.focal * X[:, 1] / z + cam.cy
    r = np.stack([u - target[:, 0], v - target[:, 1]], axis=1)
    r = np.where(ok[:, None], r, BIG_RESIDUAL)
    return r.reshape(-1)


def _sampson_pack(x, prob, R, t, cam1, cam2):
    """Per-inlier Sampson quantities shared by residuals and Jacobian."""
    corr, m = prob.corr, prob.masks
    E = skew(t) @ R
    if prob.mode == "calibrated":
        x1 = (corr.p1[m.type3] - [cam1.cx, cam1.cy]) / cam1.focal
        x2 = (corr.p2[m.type3] - [cam2.cx, cam2.cy]) / cam2.focal
        F = E
        kappa = _epipolar_weight(prob) * np.sqrt(cam1.focal * cam2.focal)
    else:
        x1 = corr.p1[m.type3]
        x2 = corr.p2[m.type3]
        K1inv = np.diag([1.0 / cam1.focal, 1.0 / cam1.focal, 1.0])
        K2inv = np.diag([1.0 / cam2.focal, 1.0 / cam2.focal, 1.0])
        F = K2inv @ E @ K1inv
        kappa = _epipolar_weight(prob)
    h1 = np.hstack([x1, np.ones((len(x1), 1))])
    h2 = np.hstack([x2, np.ones((len(x2), 1))])
    Fx1 = h1 @ F.T
    Ftx2 = h2 @ F
    e = np.sum(h2 * Fx1, axis=1)
    D = Fx1[:, 0] ** 2 + Fx1[:, 1] ** 2 + Ftx2[:, 0] ** 2 + Ftx2[:, 1] ** 2
    D = np.maximum(D, 1e-300)
    return h1, h2, Fx1, Ftx2, e, D, kappa


def _sampson_residuals(x, prob, R, t, cam1, cam2):
    pack = _sampson_pack(x, prob, R, t, cam1, cam2)
    _, _, _, _, e, D, kappa = pack
    return kappa * e / np.sqrt(D), pack


def jacobian_matrix(x: np.ndarray, prob: RefinementProblem) -> np.ndarray:
    """Analytic Jacobian of residual_vector at x, shape (n_residuals, n_params)."""
    corr, m = prob.corr, prob.masks
    npar = _param_count(prob.mode)
    delta = x[:3]
    R0 = prob.initial.pose.R
    R = so3_exp(delta) @ R0
    t = x[3:6]
    alpha = np.exp(x[6])
    beta1, beta2 = x[7], x[8]
    cam1, cam2 = _cameras(x, prob)
    Jl = so3_left_jacobian(delta)
    Jl_neg = so3_left_jacobian(-delta)
    blocks = []

    if m.type1.any():
        sel = m.type1
        q1 = lift_points(corr.p1[sel], np.ones(int(sel.sum())), cam1)
        dh1 = corr.d1[sel] + beta1
        P1 = q1 * dh1[:, None]
        X = P1 @ R.T + t
        Jpi, ok = _projection_jacobian(X, cam2)
        cols = np.zeros((len(X), 3, npar))
        RP1 = P1 @ R.T
        # d(R P1)/d(rot) = -[R P1]_x Jl
        cols[:, :, 0:3] = -np.einsum("nij,jk->nik", _skew_batch(RP1), Jl)
        cols[:, :, 3:6] = np.eye(3)
        cols[:, :, 7] = q1 @ R.T
        if prob.mode != "calibrated":
            i_f1 = 9
            dq1 = np.column_stack([-q1[:, 0], -q1[:, 1], np.zeros(len(q1))])
            cols[:, :, i_f1] += (dq1 * dh1[:, None]) @ R.T
        block = np.einsum("nij,njp->nip", Jpi, cols)
        if prob.mode == "shared_focal":
            block[:, :, 9] += _projection_focal_term(X, cam2)
        elif prob.mode == "two_focal":
            block[:, :, 10] += _projection_focal_term(X, cam2)
        block = np.where(ok[:, None, None], block, 0.0)
        blocks.append(block.reshape(-1, npar))

    if m.type2.any():
        sel = m.type2
        q2 = lift_points(corr.p2[sel], np.ones(int(sel.sum())), cam2)
        dh2 = alpha * (corr.d2[sel] + beta2)
        P2 = q2 * dh2[:, None]
        V = P2 - t
        Y = V @ R
        Jpi, ok = _projection_jacobian(Y, cam1)
        cols = np.zeros((len(Y), 3, npar))
        # Y = R0^T exp(-delta^) V: dY/d(rot) = R0^T [exp(-delta^) V]_x Jl(-delta)
        expnd = so3_exp(-delta)
        cols[:, :, 0:3] = np.einsum(
            "ji,njk,kl->nil", R0, _skew_batch(V @ expnd.T), Jl_neg
        )
        cols[:, :, 3:6] = -R.T[None, :, :] * np.ones((len(Y), 1, 1))
        cols[:, :, 6] = P2 @ R
        cols[:, :, 8] = (q2 * alpha) @ R
        if prob.mode != "calibrated":
            i_f2 = 9 if prob.mode == "shared_focal" else 10
            dq2 = np.column_stack([-q2[:, 0], -q2[:, 1], np.zeros(len(q2))])
            cols[:, :, i_f2] += (dq2 * dh2[:, None]) @ R
        block = np.einsum("nij,njp->nip", Jpi, cols)
        if prob.mode == "shared_focal":
            block[:, :, 9] += _projection_focal_term(Y, cam1)
        elif prob.mode == "two_focal":
            block[:, :, 9] += _projection_focal_term(Y, cam1)
        block = np.where(ok[:, None, None], block, 0.0)
        blocks.append(block.reshape(-1, npar))

    if m.type3.any():
        r3, pack = _sampson_residuals(x, prob, R, t, cam1, cam2)
        h1, h2, Fx1, Ftx2, e, D, kappa = pack
        if prob.mode == "calibrated":
            C1 = C2t = np.eye(3)
        else:
            C1 = np.diag([1.0 / cam1.focal, 1.0 / cam1.focal, 1.0])
            C2t = np.diag([1.0 / cam2.focal, 1.0 / cam2.focal, 1.0])
        dFs = np.zeros((npar, 3, 3))
        for k in range(3):
            dR = skew(Jl[:, k]) @ R
            dFs[k] = C2t @ skew(t) @ dR @ C1
            dFs[3 + k] = C2t @ skew(np.eye(3)[k]) @ R @ C1
        if prob.mode == "shared_focal":
            dK = np.diag([-1.0 / cam1.focal, -1.0 / cam1.focal, 0.0])
            dFs[9] = C2t @ skew(t) @ R @ dK + dK @ skew(t) @ R @ C1
        elif prob.mode == "two_focal":
            dK1 = np.diag([-1.0 / cam1.focal, -1.0 / cam1.focal, 0.0])
            dK2 = np.diag([-1.0 / cam2.focal, -1.0 / cam2.focal, 0.0])
            dFs[9] = C2t @ skew(t) @ R @ dK1
            dFs[10] = dK2 @ skew(t) @ R @ C1
        dFx1 = np.einsum("pij,nj->npi", dFs, h1)
        dFtx2 = np.einsum("pji,nj->npi", dFs, h2)
        de = np.einsum("ni,npi->np", h2, dFx1)
        dD = 2.0 * (
            Fx1[:, None, 0] * dFx1[:, :, 0]
            + Fx1[:, None, 1] * dFx1[:, :, 1]
            + Ftx2[:, None, 0] * dFtx2[:, :, 0]
            + Ftx2[:, None, 1] * dFtx2[:, :, 1]
        )
        sqD = np.sqrt(D)
        block = kappa * (de / sqD[:, None] - (e / (2.0 * D * sqD))[:, None] * dD)
        blocks.append(block)

    return np.vstack(blocks) if blocks else np.zeros((0, npar))


def _skew_batch(v):
    out = np.zeros((len(v), 3, 3))
    out[:, 0, 1] = -v[:, 2]
    out[:, 0, 2] = v[:, 1]
    out[:, 1, 0] = v[:, 2]
    out[:, 1, 2] = -v[:, 0]
    out[:, 2, 0] = -v[:, 1]
    out[:, 2, 1] = v[:, 0]
    return out


def _projection_jacobian(X, cam):
    z = X[:, 2]
    ok = z > 1e-12
    zs = np.where(ok, z, 1.0)
    J = np.zeros((len(X), 2, 3))
    J[:, 0, 0] = cam.focal / zs
    J[:, 1, 1] = cam.focal / zs
    J[:, 0, 2] = -cam.focal * X[:, 0] / zs**2
    J[:, 1, 2] = -cam.focal * X[:, 1] / zs**2
    return J, ok


def _projection_focal_term(X, cam):
    """d(projection)/d(log focal): the centered pixel coordinates."""
    z = np.where(X[:, 2] > 1e-12, X[:, 2], 1.0)
    return np.stack([cam.focal * X[:, 0] / z, cam.focal * X[:, 1] / z], axis=1)


def residuals(theta: Hypothesis, prob: RefinementProblem) -> np.ndarray:
    """Residual vector of a hypothesis on the problem's inlier sets."""
    return residual_vector(pack_params(theta, prob), prob)


def refine(prob: RefinementProblem) -> RefineResult:
    """Damped LM minimization of E; monotone non-increasing by construction."""
    x = pack_params(prob.initial, prob)
    r = residual_vector(x, prob)
    cost0 = float(r @ r)
    cost = cost0
    lam = 1e-4
    iterations = 0
    frozen = list(prob.fixed_params)
    for _ in range(MAX_ITERATIONS):
        with np.errstate(over="ignore", invalid="ignore"):
            J = jacobian_matrix(x, prob)
        if not np.all(np.isfinite(J)):
            J = np.nan_to_num(J, nan=0.0, posinf=0.0, neginf=0.0)
        if frozen:
            J[:, frozen] = 0.0
        g = J.T @ r
        H = J.T @ J
        diag = np.diag(np.diag(H)) + 1e-12 * np.eye(len(x))
        accepted = False
        for _trial in range(12):
            try:
                dx = np.linalg.solve(H + lam * diag, -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            x_try = x + dx
            with np.errstate(over="ignore", invalid="ignore"):
                r_try = residual_vector(x_try, prob)
                c_try = float(r_try @ r_try) if np.all(np.isfinite(r_try)) else np.inf
            if np.isfinite(c_try) and c_try < cost:
                prev = cost
                x, r, cost = x_try, r_try, c_try
                lam = max(lam / 3.0, 1e-12)
                accepted = True
                iterations += 1
                break
            lam *= 10.0
        if not accepted:
            break
        if prev - cost <= FUNCTION_TOL * max(cost, 1e-300):
            break

    if cost < cost0:
        hyp = unpack_params(x, prob)
        if not (prob.masks.type1.any() or prob.masks.type2.any()):
            # Sampson-only problem: the cost is invariant to the translation
            # scale, so pin the gauge at unit norm.
            norm = np.linalg.norm(hyp.pose.t)
            if norm > 1e-12:
                hyp = Hypothesis(
                    Pose(hyp.pose.R, hyp.pose.t / norm),
                    hyp.affine,
                    hyp.focal1,
                    hyp.focal2,
                )
        return RefineResult(hyp, cost0, float(cost), iterations, True)
    return RefineResult(prob.initial, cost0, cost0, iterations, False)
