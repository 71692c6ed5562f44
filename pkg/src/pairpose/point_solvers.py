"""Classic point-based solvers used by the hybrid pipeline.

- 5-point essential matrix solver (null-space expansion of the cubic
  constraints, Gauss-Jordan reduction, 10x10 action-matrix eigenproblem),
- 7-point fundamental matrix solver,
- focal length extraction from a fundamental matrix (Bougnoux closed form),
- a shared-focal point solver composed from the two above (it consumes 7
  matches and enforces f = sqrt(f1*f2); flagged approximate, exact on
  noise-free shared-focal data),
- least-squares scale/shift fitting of depth priors against triangulated
  depths, so point-based hypotheses carry a full depth correction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import AffineCorrection, CameraModel, Pose, skew

__all__ = [
    "EpipolarMatrix",
    "solve_5pt_essential",
    "solve_7pt_fundamental",
    "bougnoux_focals",
    "solve_shared_focal_points",
    "solve_two_focal_points",
    "decompose_essential",
    "triangulate_depths",
    "fit_scale_shift",
    "fit_scale_shift_full",
]


@dataclass(frozen=True)
class EpipolarMatrix:
    """A rank-2 epipolar constraint matrix (x2^T M x1 = 0)."""

    matrix: np.ndarray
    kind: str  # "essential" | "fundamental"

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        norm = np.linalg.norm(m)
        if norm == 0:
            raise ValueError("zero epipolar matrix")
        object.__setattr__(self, "matrix", m / norm)
        if self.kind not in ("essential", "fundamental"):
            raise ValueError(f"unknown kind {self.kind!r}")


# ---------------------------------------------------------------------------
# trivariate polynomial tables for the 5-point solver
#
# Basis of 20 monomials in (x, y, z): the ten cubics followed by
# [x^2, xy, xz, y^2, yz, z^2, x, y, z, 1]; the trailing ten form the
# quotient-space basis of the action matrix.

_DEG3 = [(3, 0, 0), (2, 1, 0), (2, 0, 1), (1, 2, 0), (1, 1, 1), (1, 0, 2),
         (0, 3, 0), (0, 2, 1), (0, 1, 2), (0, 0, 3)]
_DEG2 = [(2, 0, 0), (1, 1, 0), (1, 0, 1), (0, 2, 0), (0, 1, 1), (0, 0, 2),
         (1, 0, 0), (0, 1, 0), (0, 0, 1), (0, 0, 0)]
_DEG1 = [(1, 0, 0), (0, 1, 0), (0, 0, 1), (0, 0, 0)]
_MONO20 = {m: i for i, m in enumerate(_DEG3 + _DEG2)}


def _mono_mul(a, b):
    return tuple(i + j for i, j in zip(a, b))


_T11 = np.array([[_MONO20[_mono_mul(a, b)] for b in _DEG1] for a in _DEG1])
_T21 = np.array([[_MONO20[_mono_mul(m, a)] for a in _DEG1] for m in _DEG2])


def _poly11(u, v):
    """Product of two linear (..., 4) polynomials into the 20-basis."""
    out = np.zeros(u.shape[:-1] + (20,))
    for a in range(4):
        for b in range(4):
            out[..., _T11[a, b]] += u[..., a] * v[..., b]
    return out


def solve_5pt_essential(x1: np.ndarray, x2: np.ndarray) -> list[Pose]:
    """Essential-matrix poses from 5 normalized correspondences.

    Returns up to 10 poses (unit-norm translation), each the
    cheirality-consistent decomposition of one real essential matrix.
    """
    x1 = np.asarray(x1, dtype=np.float64).reshape(-1, 2)
    x2 = np.asarray(x2, dtype=np.float64).reshape(-1, 2)
    if len(x1) != 5 or len(x2) != 5:
        raise ValueError("5pt solver needs exactly 5 correspondences")
    h1 = np.hstack([x1, np.ones((5, 1))])
    h2 = np.hstack([x2, np.ones((5, 1))])
    A = np.einsum("ni,nj->nij", h2, h1).reshape(5, 9)
    _, _, Vt = np.linalg.svd(A)
    basis = Vt[5:9][::-1]  # X, Y, Z, W span the null space
    # E(x, y, z) = x*X + y*Y + z*Z + W; entries are linear polynomials
    E = np.moveaxis(basis.reshape(4, 3, 3), 0, -1)  # (3, 3, 4)

    # EE^T as degree-2 polynomials (only the trailing 10-basis is populated)
    EEt = np.zeros((3, 3, 20))
    for a in range(4):
        for b in range(4):
            EEt[:, :, _T11[a, b]] += E[:, :, a] @ E[:, :, b].T
    EEt2 = EEt[:, :, 10:]  # (3, 3, 10)
    trace = EEt2[0, 0] + EEt2[1, 1] + EEt2[2, 2]
    T = 2.0 * EEt2 - trace * np.eye(3)[:, :, None]

    # trace constraint 2 E E^T E - tr(E E^T) E = 0 (9 cubics)
    C = np.zeros((3, 3, 20))
    for m in range(10):
        for a in range(4):
            C[:, :, _T21[m, a]] += T[:, :, m] @ E[:, :, a]

    # det(E) = 0 via cofactor expansion along the first row
    m0 = _poly11(E[1, 1], E[2, 2]) - _poly11(E[1, 2], E[2, 1])
    m1 = _poly11(E[1, 0], E[2, 2]) - _poly11(E[1, 2], E[2, 0])
    m2 = _poly11(E[1, 0], E[2, 1]) - _poly11(E[1, 1], E[2, 0])
    det = np.zeros(20)
    for m in range(10):
        for a in range(4):
            det[_T21[m, a]] += (
                m0[10 + m] * E[0, 0, a] - m1[10 + m] * E[0, 1, a] + m2[10 + m] * E[0, 2, a]
            )

    M = np.vstack([det, C.reshape(9, 20)])
    A1, A2 = M[:, :10], M[:, 10:]
    try:
        Rm = -np.linalg.solve(A1, A2)
    except np.linalg.LinAlgError:
        return []
    action = np.zeros((10, 10))
    action[:6] = Rm[:6]  # x * {x^2, xy, xz, y^2, yz, z^2} are cubics
    action[6, 0] = 1.0  # x * x = x^2
    action[7, 1] = 1.0  # x * y = xy
    action[8, 2] = 1.0  # x * z = xz
    action[9, 6] = 1.0  # x * 1 = x
    w, V = np.linalg.eig(action)

    poses = []
    for i in range(10):
        v = V[:, i]
        if abs(v[9]) < 1e-12:
            continue
        xyz = v[6:9] / v[9]
        if np.any(np.abs(xyz.imag) > 1e-6 * (1.0 + np.abs(xyz.real))):
            continue
        xyz = _polish_xyz(M, xyz.real)
        Em = E[:, :, 0] * xyz[0] + E[:, :, 1] * xyz[1] + E[:, :, 2] * xyz[2] + E[:, :, 3]
        pose = decompose_essential(Em, x1, x2)
        if pose is not None:
            poses.append(pose)
    return poses


_EXPONENTS = np.array(_DEG3 + _DEG2, dtype=np.float64)


def _mono_eval(xyz):
    e = _EXPONENTS
    p = [xyz[v] ** e[:, v] for v in range(3)]
    pm = [xyz[v] ** np.clip(e[:, v] - 1, 0, None) for v in range(3)]
    vals = p[0] * p[1] * p[2]
    grad = np.stack(
        [
            e[:, 0] * pm[0] * p[1] * p[2],
            e[:, 1] * p[0] * pm[1] * p[2],
            e[:, 2] * p[0] * p[1] * pm[2],
        ],
        axis=1,
    )
    return vals, grad


def _polish_xyz(M, xyz, iters=4):
    """Damped Gauss-Newton on the ten cubic constraints; monotone in |F|.

    Degenerate configurations (e.g. pure rotation) make the system
    rank-deficient; the damping keeps the step finite and the acceptance
    check keeps the root from drifting.
    """
    vals, grad = _mono_eval(xyz)
    fnorm = np.linalg.norm(M @ vals)
    for _ in range(iters):
        J = M @ grad
        F = M @ vals
        H = J.T @ J
        H += 1e-12 * max(np.trace(H) / 3.0, 1e-300) * np.eye(3)
        try:
            delta = np.linalg.solve(H, J.T @ F)
        except np.linalg.LinAlgError:
            break
        cand = xyz - delta
        if not np.all(np.isfinite(cand)):
            break
        vals2, grad2 = _mono_eval(cand)
        fnorm2 = np.linalg.norm(M @ vals2)
        if not fnorm2 < fnorm:
            break
        xyz, vals, grad, fnorm = cand, vals2, grad2, fnorm2
    return xyz


def decompose_essential(E: np.ndarray, x1: np.ndarray, x2: np.ndarray) -> Optional[Pose]:
    """Cheirality-consistent (R, t) from an essential matrix and sample points.

    The four candidate decompositions are ranked by how many sample points
    triangulate in front of both cameras; translation is unit-norm.
    """
    U, _, Vt = np.linalg.svd(E)
    if np.linalg.det(U) < 0:
        U = -U
    if np.linalg.det(Vt) < 0:
        Vt = -Vt
    W = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    t = U[:, 2]
    h1 = np.hstack([np.atleast_2d(x1), np.ones((len(np.atleast_2d(x1)), 1))])
    h2 = np.hstack([np.atleast_2d(x2), np.ones((len(np.atleast_2d(x2)), 1))])
    Rs = np.stack([U @ W @ Vt, U @ W @ Vt, U @ W.T @ Vt, U @ W.T @ Vt])
    ts = np.stack([t, -t, t, -t])
    a = np.einsum("cij,nj->cni", Rs, h1)
    b = h2[None, :, :]
    aa = np.sum(a * a, axis=2)
    bb = np.sum(b * b, axis=2)
    ab = np.sum(a * b, axis=2)
    at = np.einsum("cni,ci->cn", a, ts)
    bt = np.einsum("ni,ci->cn", h2, ts)
    det = aa * bb - ab * ab
    with np.errstate(divide="ignore", invalid="ignore"):
        z1 = (ab * bt - bb * at) / det
        z2 = (aa * bt - ab * at) / det
    parallel = det <= 1e-12 * np.maximum(aa * bb, 1e-300)
    # zero-parallax rays count as consistent when they point the same way
    good = np.where(parallel, ab > 0, (z1 > 0) & (z2 > 0))
    counts = np.sum(good, axis=1)
    best = int(np.argmax(counts))
    return Pose(Rs[best], ts[best])


def triangulate_depths(pose: Pose, x1: np.ndarray, x2: np.ndarray):
    """Per-match depths along both rays (midpoint least squares).

    x1/x2 are normalized coordinates; returns (z1, z2) with z the depth in
    its own camera. Non-intersecting or behind-camera cases simply yield
    non-positive values for the caller to filter.
    """
    x1 = np.atleast_2d(x1)
    x2 = np.atleast_2d(x2)
    a = np.hstack([x1, np.ones((len(x1), 1))]) @ pose.R.T  # rays of cam1 in cam2 frame
    b = np.hstack([x2, np.ones((len(x2), 1))])
    aa = np.sum(a * a, axis=1)
    bb = np.sum(b * b, axis=1)
    ab = np.sum(a * b, axis=1)
    at = a @ pose.t
    bt = b @ pose.t
    det = aa * bb - ab * ab
    with np.errstate(divide="ignore", invalid="ignore"):
        z1 = (ab * bt - bb * at) / det
        z2 = (aa * bt - ab * at) / det
    bad = np.abs(det) < 1e-12 * np.maximum(aa * bb, 1e-300)
    z1 = np.where(bad, -1.0, z1)
    z2 = np.where(bad, -1.0, z2)
    return z1, z2


def solve_7pt_fundamental(p1: np.ndarray, p2: np.ndarray) -> list[EpipolarMatrix]:
    """1-3 fundamental matrices from 7 pixel correspondences.

    Points are Hartley-normalized internally; the returned matrices act on
    the original pixel coordinates and are Frobenius-normalized.
    """
    p1 = np.asarray(p1, dtype=np.float64).reshape(-1, 2)
    p2 = np.asarray(p2, dtype=np.float64).reshape(-1, 2)
    if len(p1) != 7 or len(p2) != 7:
        raise ValueError("7pt solver needs exactly 7 correspondences")
    T1, h1 = _hartley_normalize(p1)
    T2, h2 = _hartley_normalize(p2)
    A = np.einsum("ni,nj->nij", h2, h1).reshape(7, 9)
    _, s, Vt = np.linalg.svd(A)
    if s[-1] > 1e-8 * s[0] and len(s) >= 7 and s[6] < 1e-10 * s[0]:
        return []
    F1 = Vt[8].reshape(3, 3)
    F2 = Vt[7].reshape(3, 3)

    # det(F1 + lam*F2) interpolated at 4 nodes gives the exact cubic
    nodes = np.array([0.0, 1.0, -1.0, 2.0])
    vals = np.array([np.linalg.det(F1 + lam * F2) for lam in nodes])
    coeffs = np.linalg.solve(np.vander(nodes, 4), vals)  # high-to-low
    scale = np.abs(coeffs).max()
    if scale == 0.0:
        return []
    coeffs = coeffs / scale
    candidates = []
    deg = 0
    while deg < 3 and abs(coeffs[deg]) < 1e-12:
        deg += 1
    roots = np.roots(coeffs[deg:]) if deg < 3 else np.empty(0)
    for lam in roots:
        if abs(lam.imag) > 1e-8 * (1.0 + abs(lam.real)):
            continue
        candidates.append(F1 + _polish_det_root(F1, F2, lam.real) * F2)
    if abs(coeffs[0]) < 1e-12 and abs(np.linalg.det(F2)) < 1e-12:
        candidates.append(F2)

    out = []
    for Fn in candidates:
        F = T2.T @ Fn @ T1
        norm = np.linalg.norm(F)
        if norm < 1e-12:
            continue
        out.append(EpipolarMatrix(F / norm, "fundamental"))
    return out[:3]


def _polish_det_root(F1, F2, lam, iters=2):
    """Newton steps on det(F1 + lam*F2) = 0; d det = tr(adj(M) F2)."""
    for _ in range(iters):
        Mt = F1 + lam * F2
        det = np.linalg.det(Mt)
        adj = np.linalg.inv(Mt).T * det if abs(det) > 1e-300 else _adjugate(Mt)
        d = np.trace(adj.T @ F2)
        if abs(d) < 1e-300:
            break
        lam = lam - det / d
    return lam


def _adjugate(Mt):
    cof = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            minor = np.delete(np.delete(Mt, i, axis=0), j, axis=1)
            cof[i, j] = (-1) ** (i + j) * np.linalg.det(minor)
    return cof.T


def _hartley_normalize(p):
    centroid = p.mean(axis=0)
    rms = np.sqrt(np.mean(np.sum((p - centroid) ** 2, axis=1)))
    s = np.sqrt(2.0) / max(rms, 1e-12)
    T = np.array(
        [[s, 0.0, -s * centroid[0]], [0.0, s, -s * centroid[1]], [0.0, 0.0, 1.0]]
    )
    h = np.hstack([(p - centroid) * s, np.ones((len(p), 1))])
    return T, h


def bougnoux_focals(F, pp1=(0.0, 0.0), pp2=(0.0, 0.0)) -> Optional[tuple[float, float]]:
    """Closed-form focal lengths from a fundamental matrix.

    Returns None when either squared focal comes out non-positive or the
    formula degenerates (e.g. coplanar optical axes, epipole at the
    principal point).
    """
    if isinstance(F, EpipolarMatrix):
        F = F.matrix
    F = np.asarray(F, dtype=np.float64)
    p1 = np.array([pp1[0], pp1[1], 1.0])
    p2 = np.array([pp2[0], pp2[1], 1.0])
    II = np.diag([1.0, 1.0, 0.0])

    f1sq = _bougnoux_half(F, p1, p2, II)
    f2sq = _bougnoux_half(F.T, p2, p1, II)
    if f1sq is None or f2sq is None or f1sq <= 0 or f2sq <= 0:
        return None
    return float(np.sqrt(f1sq)), float(np.sqrt(f2sq))


def _bougnoux_half(F, p1, p2, II):
    """Squared focal of camera 1 for x2^T F x1 = 0 with principal points p1, p2."""
    # e2: epipole in image 2 (F^T e2 = 0)
    _, _, Vt = np.linalg.svd(F.T)
    e2 = Vt[2]
    num = p2 @ skew(e2) @ II @ F @ np.outer(p1, p1) @ F.T @ p2
    den = p2 @ skew(e2) @ II @ F @ II @ F.T @ p2
    scale = np.abs(F).max() ** 2
    if abs(den) < 1e-12 * scale:
        return None
    return -num / den


def solve_shared_focal_points(p1: np.ndarray, p2: np.ndarray) -> list[tuple[Pose, float]]:
    """Point-based shared-focal solver (approximate composition).

    Composes the 7-point fundamental solver with focal extraction and
    enforces the shared focal as sqrt(f1*f2); needs 7 centered pixel
    correspondences. Exact on noise-free shared-focal data, approximate
    otherwise (a dedicated 6-point minimal solver would be exact).
    """
    out = []
    for em in solve_7pt_fundamental(p1, p2):
        focals = bougnoux_focals(em)
        if focals is None:
            continue
        f = float(np.sqrt(focals[0] * focals[1]))
        pose = _pose_from_fundamental(em.matrix, p1, p2, f, f)
        if pose is not None:
            out.append((pose, f))
    return out


def solve_two_focal_points(p1: np.ndarray, p2: np.ndarray) -> list[tuple[Pose, float, float]]:
    """Point-based two-focal solver: 7pt fundamental + focal extraction."""
    out = []
    for em in solve_7pt_fundamental(p1, p2):
        focals = bougnoux_focals(em)
        if focals is None:
            continue
        f1, f2 = focals
        pose = _pose_from_fundamental(em.matrix, p1, p2, f1, f2)
        if pose is not None:
            out.append((pose, f1, f2))
    return out


def _pose_from_fundamental(F, p1, p2, f1, f2):
    K1 = np.diag([f1, f1, 1.0])
    K2 = np.diag([f2, f2, 1.0])
    E = K2.T @ F @ K1
    U, s, Vt = np.linalg.svd(E)
    E = U @ np.diag([1.0, 1.0, 0.0]) @ Vt
    x1 = np.asarray(p1, dtype=np.float64) / f1
    x2 = np.asarray(p2, dtype=np.float64) / f2
    return decompose_essential(E, x1, x2)


# ---------------------------------------------------------------------------
# scale/shift fitting for point-based hypotheses


def fit_scale_shift_full(corr, pose: Pose, cam1: CameraModel, cam2: CameraModel):
    """Fit the depth priors to triangulated depths: z_i ~ a_i * d_i + b_i.

    Returns (AffineCorrection, a1) or None. a1 is the image-1 fit slope: the
    corrected depths live in metric units z/a1, so a pose with translation t
    must be rescaled to t/a1 to be consistent with the correction.
    """
    if np.linalg.norm(pose.t) < 1e-9:
        return None
    x1 = (corr.p1 - [cam1.cx, cam1.cy]) / cam1.focal
    x2 = (corr.p2 - [cam2.cx, cam2.cy]) / cam2.focal
    z1, z2 = triangulate_depths(pose, x1, x2)
    good = (z1 > 0) & (z2 > 0)
    if np.sum(good) < 2:
        return None
    fit1 = _linear_fit(corr.d1[good], z1[good])
    fit2 = _linear_fit(corr.d2[good], z2[good])
    if fit1 is None or fit2 is None:
        return None
    a1, b1 = fit1
    a2, b2 = fit2
    if a1 <= 0 or a2 <= 0:
        return None
    return AffineCorrection(a2 / a1, b1 / a1, b2 / a2), a1


def fit_scale_shift(corr, pose: Pose, cam1: CameraModel, cam2: CameraModel):
    """AffineCorrection from triangulated depths, or None on failure."""
    full = fit_scale_shift_full(corr, pose, cam1, cam2)
    return None if full is None else full[0]


def _linear_fit(d, z):
    dm = d.mean()
    var = np.mean((d - dm) ** 2)
    if var < 1e-12 * max(1.0, dm * dm):
        return None
    a = np.mean((d - dm) * (z - z.mean())) / var
    b = z.mean() - a * dm
    return a, b
