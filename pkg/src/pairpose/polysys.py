"""Polynomial systems behind the depth-aware solvers.

Each sampled pair (j, k) of correspondences yields one equality between the
squared 3D distances of the lifted points in the two views. After the
substitutions gamma = alpha^2 and omega = 1/f^2 every equation has the form

    omega1 * Q1_jk(beta1) + c1_jk  =  gamma * (omega2 * Q2_jk(beta2) + c2_jk)

where Q_jk is a quadratic in the shift whose coefficients come from the
pixel (or normalized-ray) dot products, and c_jk = (d_j - d_k)^2 collects the
z components (the shifts cancel there). The three modes pin different
unknowns:

    calibrated    omega1 = omega2 = 1,  unknowns (gamma, beta1, beta2)
    shared_focal  omega1 = omega2 = w,  unknowns (gamma, beta1, beta2, w)
    two_focal     unknowns (gamma, beta1, beta2, omega1, omega2)

The systems are linear in the grouped unknowns (omega1, gamma*omega2, gamma),
which reduces solving to determinantal consistency conditions in
(beta1, beta2) followed by univariate root finding, Newton polishing on the
original equations, and residual-based filtering. The calibrated case
collapses to a single quartic (at most 4 solutions); shared-focal keeps at
most 8 and two-focal at most 4.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

__all__ = [
    "DegenerateSampleError",
    "ConstraintSystem",
    "AlgebraicSolution",
    "build_system",
    "solve_system",
    "verify_solution",
    "MAX_SOLUTIONS",
]

MODES = ("calibrated", "shared_focal", "two_focal")
MAX_SOLUTIONS = {"calibrated": 4, "shared_focal": 8, "two_focal": 4}
SAMPLE_SIZE = {"calibrated": 3, "shared_focal": 4, "two_focal": 4}

# Equation subsets: every correspondence participates.
EQ_PAIRS = {
    "calibrated": ((0, 1), (0, 2), (1, 2)),
    "shared_focal": ((0, 1), (0, 2), (0, 3), (1, 2)),
    "two_focal": ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3)),
}

RESIDUAL_TOL = 1e-6  # max relative equation residual for an accepted solution
REAL_TOL = 1e-6  # |Im|/max(1, |Re|) below which a root counts as real
_COND_MAX = 1e14


def _perms_with_signs(n):
    out = []
    for p in itertools.permutations(range(n)):
        inversions = sum(1 for i in range(n) for j in range(i + 1, n) if p[i] > p[j])
        out.append((p, -1.0 if inversions % 2 else 1.0))
    return out


_PERM4 = _perms_with_signs(4)
_PERM3 = _perms_with_signs(3)


class DegenerateSampleError(ValueError):
    """Raised when a minimal sample cannot produce a well-posed system."""


@dataclass(frozen=True)
class AlgebraicSolution:
    """One real solution of the pairwise-distance constraint system.

    gamma is the squared depth-scale ratio; omega1/omega2 are the inverse
    squared focal lengths (omega1 doubles as the shared omega in
    shared-focal mode). Sign filtering (gamma > 0, omega > 0) is left to the
    pose recovery stage.
    """

    gamma: float
    beta1: float
    beta2: float
    omega1: Optional[float] = None
    omega2: Optional[float] = None
    residual: float = 0.0


@dataclass(frozen=True)
class ConstraintSystem:
    """Coefficient table of the pairwise-distance equations (normalized units).

    q1/q2 hold, per equation, the coefficients [a2, a1, a0] of the quadratic
    Q(beta) built from the xy dot products; c1/c2 the constant z terms. The
    *_scale/*_shift fields record the input normalization so solutions can be
    mapped back to the caller's units.
    """

    mode: str
    pairs: tuple
    q1: np.ndarray  # (P, 3)
    c1: np.ndarray  # (P,)
    q2: np.ndarray  # (P, 3)
    c2: np.ndarray  # (P,)
    d1_shift: float
    d1_scale: float
    d2_shift: float
    d2_scale: float
    px_scale1: float
    px_scale2: float

    def to_internal(self, sol: AlgebraicSolution) -> np.ndarray:
        """Map a solution in caller units to normalized variables."""
        b1 = (sol.beta1 + self.d1_shift) / self.d1_scale
        b2 = (sol.beta2 + self.d2_shift) / self.d2_scale
        g = sol.gamma * self.d2_scale**2 / self.d1_scale**2
        vals = [g, b1, b2]
        if self.mode == "shared_focal":
            vals.append(sol.omega1 * self.px_scale1**2)
        elif self.mode == "two_focal":
            vals.append(sol.omega1 * self.px_scale1**2)
            vals.append(sol.omega2 * self.px_scale2**2)
        return np.array(vals)

    def from_internal(self, vals: np.ndarray, residual: float) -> AlgebraicSolution:
        g, b1, b2 = vals[0], vals[1], vals[2]
        kwargs = {}
        if self.mode == "shared_focal":
            kwargs["omega1"] = vals[3] / self.px_scale1**2
        elif self.mode == "two_focal":
            kwargs["omega1"] = vals[3] / self.px_scale1**2
            kwargs["omega2"] = vals[4] / self.px_scale2**2
        return AlgebraicSolution(
            gamma=float(g * self.d1_scale**2 / self.d2_scale**2),
            beta1=float(b1 * self.d1_scale - self.d1_shift),
            beta2=float(b2 * self.d2_scale - self.d2_shift),
            residual=float(residual),
            **kwargs,
        )


# ---------------------------------------------------------------------------
# system construction


def _quad_coeffs(rho_jj, rho_jk, rho_kk, dj, dk):
    """Coefficients [a2, a1, a0] of Q(beta) = sum rho-weighted (d + beta) products."""
    a2 = rho_jj - 2.0 * rho_jk + rho_kk
    a1 = 2.0 * (dj * rho_jj - (dj + dk) * rho_jk + dk * rho_kk)
    a0 = dj * dj * rho_jj - 2.0 * dj * dk * rho_jk + dk * dk * rho_kk
    return a2, a1, a0


def build_system(points1, points2, d1, d2, mode: str) -> ConstraintSystem:
    """Expand the pairwise-distance equalities into polynomial coefficients.

    points1/points2: (M, 3) homogeneous image points -- normalized rays for
    the calibrated mode, centered pixel coordinates otherwise. M = 3 for
    calibrated, M = 4 for the focal modes. Inputs are rescaled internally
    for conditioning; the returned system records the transform.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    pts1 = np.asarray(points1, dtype=np.float64)
    pts2 = np.asarray(points2, dtype=np.float64)
    d1 = np.asarray(d1, dtype=np.float64).reshape(-1)
    d2 = np.asarray(d2, dtype=np.float64).reshape(-1)
    m = SAMPLE_SIZE[mode]
    if pts1.shape != (m, 3) or pts2.shape != (m, 3):
        raise ValueError(f"{mode} mode needs {m} homogeneous points per image")
    if len(d1) != m or len(d2) != m:
        raise ValueError("depth count must match point count")
    if np.any(np.abs(pts1[:, 2]) < 1e-12) or np.any(np.abs(pts2[:, 2]) < 1e-12):
        raise DegenerateSampleError("point at infinity")
    xy1 = pts1[:, :2] / pts1[:, 2:]
    xy2 = pts2[:, :2] / pts2[:, 2:]

    for xy in (xy1, xy2):
        span = max(np.abs(xy).max(), 1.0)
        for j in range(m):
            for k in range(j + 1, m):
                if np.linalg.norm(xy[j] - xy[k]) < 1e-9 * span:
                    raise DegenerateSampleError("coincident sample points")

    # Conditioning: unit-spread depths, unit-RMS pixel radii in focal modes.
    mu1, s1 = _depth_norm(d1)
    mu2, s2 = _depth_norm(d2)
    nd1 = (d1 - mu1) / s1
    nd2 = (d2 - mu2) / s2
    if mode == "calibrated":
        k1 = k2 = 1.0
    elif mode == "shared_focal":
        k1 = k2 = _pixel_norm(np.vstack([xy1, xy2]))
    else:
        k1 = _pixel_norm(xy1)
        k2 = _pixel_norm(xy2)
    nxy1 = xy1 / k1
    nxy2 = xy2 / k2

    pairs = EQ_PAIRS[mode]
    q1 = np.empty((len(pairs), 3))
    q2 = np.empty((len(pairs), 3))
    c1 = np.empty(len(pairs))
    c2 = np.empty(len(pairs))
    g1 = nxy1 @ nxy1.T
    g2 = nxy2 @ nxy2.T
    for row, (j, k) in enumerate(pairs):
        q1[row] = _quad_coeffs(g1[j, j], g1[j, k], g1[k, k], nd1[j], nd1[k])
        q2[row] = _quad_coeffs(g2[j, j], g2[j, k], g2[k, k], nd2[j], nd2[k])
        c1[row] = (nd1[j] - nd1[k]) ** 2
        c2[row] = (nd2[j] - nd2[k]) ** 2
    return ConstraintSystem(
        mode=mode,
        pairs=pairs,
        q1=q1,
        c1=c1,
        q2=q2,
        c2=c2,
        d1_shift=mu1,
        d1_scale=s1,
        d2_shift=mu2,
        d2_scale=s2,
        px_scale1=k1,
        px_scale2=k2,
    )


def _depth_norm(d):
    mu = float(np.mean(d))
    spread = float(np.sqrt(np.mean((d - mu) ** 2)))
    floor = 1e-3 * max(1.0, np.abs(d).max())
    return mu, max(spread, floor)


def _pixel_norm(xy):
    rms = float(np.sqrt(np.mean(np.sum(xy**2, axis=1))))
    if rms < 1e-9:
        raise DegenerateSampleError("all points at the principal point")
    return rms


# ---------------------------------------------------------------------------
# residual evaluation


def _equation_values(sys: ConstraintSystem, vals: np.ndarray):
    """Left/right sides of every equation; vals is (C, nvars), output (C, P)."""
    g, b1, b2 = vals[:, 0:1], vals[:, 1:2], vals[:, 2:3]
    if sys.mode == "calibrated":
        w1 = w2 = 1.0
    elif sys.mode == "shared_focal":
        w1 = w2 = vals[:, 3:4]
    else:
        w1, w2 = vals[:, 3:4], vals[:, 4:5]
    Q1 = sys.q1[:, 0] * b1 * b1 + sys.q1[:, 1] * b1 + sys.q1[:, 2]
    Q2 = sys.q2[:, 0] * b2 * b2 + sys.q2[:, 1] * b2 + sys.q2[:, 2]
    lhs = w1 * Q1 + sys.c1
    rhs = g * (w2 * Q2 + sys.c2)
    return lhs, rhs


def _relative_residual(sys: ConstraintSystem, vals: np.ndarray) -> np.ndarray:
    lhs, rhs = _equation_values(sys, vals)
    denom = np.maximum(np.maximum(np.abs(lhs), np.abs(rhs)), 1e-12)
    return np.max(np.abs(lhs - rhs) / denom, axis=1)


def verify_solution(sys: ConstraintSystem, sol: AlgebraicSolution) -> float:
    """Max relative residual of the original equalities at the solution."""
    return float(_relative_residual(sys, sys.to_internal(sol)[None, :])[0])


# ---------------------------------------------------------------------------
# bivariate polynomial helpers (coefficient arrays C[i, j] ~ beta1^i beta2^j)


def _det4_bipoly(colA, colB, colu, colv, rows):
    """det of the 4x4 matrix [A(beta1) | B(beta2) | u | v] on the given rows.

    colA/colB hold per-row quadratic coefficient triples [a2, a1, a0]; the
    result is a (3, 3) bivariate coefficient array.
    """
    out = np.zeros((3, 3))
    A = colA[list(rows)]
    B = colB[list(rows)]
    u = colu[list(rows)]
    v = colv[list(rows)]
    for p, sign in _PERM4:
        w = sign * u[p[2]] * v[p[3]]
        if w == 0.0:
            continue
        # coefficient triples are stored high-to-low: index 0 ~ beta^2
        out += w * np.outer(A[p[0]][::-1], B[p[1]][::-1])
    return out


def _det3_bipoly(cols, rows):
    """det of a 3x3 matrix whose columns are (kind, data) pairs.

    kind is one of 'p1' (quadratic in beta1, data (P, 3) high-to-low),
    'p2' (quadratic in beta2) or 'c' (scalars). Returns a bivariate array.
    """
    deg1 = sum(2 for kind, _ in cols if kind == "p1")
    deg2 = sum(2 for kind, _ in cols if kind == "p2")
    out = np.zeros((deg1 + 1, deg2 + 1))
    rows = list(rows)
    for p, sign in _PERM3:
        term = np.ones((1, 1)) * sign
        for col, (kind, data) in enumerate(cols):
            val = data[rows[p[col]]]
            if kind == "c":
                term = term * val
            elif kind == "p1":
                term = _bipoly_mul(term, val[::-1].reshape(3, 1))
            else:
                term = _bipoly_mul(term, val[::-1].reshape(1, 3))
        out[: term.shape[0], : term.shape[1]] += term
    return out


def _bipoly_mul(a, b):
    out = np.zeros((a.shape[0] + b.shape[0] - 1, a.shape[1] + b.shape[1] - 1))
    for i in range(a.shape[0]):
        for j in range(a.shape[1]):
            if a[i, j] != 0.0:
                out[i : i + b.shape[0], j : j + b.shape[1]] += a[i, j] * b
    return out


def _bipoly_eval_beta2(C, b2):
    """Collapse a bivariate array to beta1 coefficients (low-to-high)."""
    powers = b2 ** np.arange(C.shape[1])
    return C @ powers


def _real_roots(coeffs_low_to_high, tol=REAL_TOL):
    """Real roots of a univariate polynomial given low-to-high coefficients."""
    c = np.asarray(coeffs_low_to_high, dtype=np.float64)
    scale = np.abs(c).max()
    if scale == 0.0:
        return np.empty(0)
    c = c / scale
    # trim negligible leading (highest-degree) coefficients
    deg = len(c) - 1
    while deg > 0 and abs(c[deg]) < 1e-12:
        deg -= 1
    if deg == 0:
        return np.empty(0)
    roots = np.roots(c[: deg + 1][::-1])
    real = roots[np.abs(roots.imag) <= tol * np.maximum(1.0, np.abs(roots.real))]
    return np.unique(real.real)


# ---------------------------------------------------------------------------
# per-mode solvers


def _solve_calibrated(sys: ConstraintSystem):
    # Equations are linear in (u, w, s) = (gamma*b2^2, gamma*b2, gamma) with a
    # constant coefficient matrix; consistency u*s = w^2 is a quartic in b1.
    M = np.column_stack([sys.q2[:, 0], sys.q2[:, 1], sys.q2[:, 2] + sys.c2])
    if np.linalg.cond(M) > _COND_MAX:
        raise DegenerateSampleError("rank-deficient elimination matrix")
    rhs = np.column_stack([sys.q1[:, 0], sys.q1[:, 1], sys.q1[:, 2] + sys.c1])
    X = np.linalg.solve(M, rhs)  # rows: u, w, s as quadratics [b1^2, b1, 1]
    u, w, s = X[0], X[1], X[2]
    quartic = np.convolve(s[::-1], u[::-1]) - np.convolve(w[::-1], w[::-1])
    if np.abs(quartic).max() < 1e-10 * max(1.0, np.abs(X).max() ** 2):
        # one-parameter solution family (e.g. identical geometry in both
        # frames); report the representative with beta1 = 0 in caller units
        b0 = sys.d1_shift / sys.d1_scale
        g = s[0] * b0 * b0 + s[1] * b0 + s[2]
        wv = w[0] * b0 * b0 + w[1] * b0 + w[2]
        if abs(g) > 1e-12:
            return [np.array([g, b0, wv / g])]
        return []
    candidates = []
    for b1 in _real_roots(quartic):
        g = s[0] * b1 * b1 + s[1] * b1 + s[2]
        wv = w[0] * b1 * b1 + w[1] * b1 + w[2]
        if abs(g) < 1e-12:
            continue
        candidates.append(np.array([g, b1, wv / g]))
    return candidates


def _newton_polish(sys: ConstraintSystem, vals: np.ndarray, iters: int = 15):
    """Batched Newton iteration on the square original system; vals (C, nv)."""
    vals = vals.copy()
    for _ in range(iters):
        lhs, rhs = _equation_values(sys, vals)
        F = lhs - rhs
        scale = np.maximum(
            np.max(np.abs(lhs), axis=1), np.maximum(np.max(np.abs(rhs), axis=1), 1e-12)
        )
        active = np.isfinite(F).all(axis=1) & (np.abs(F).max(axis=1) > 1e-15 * scale)
        if not active.any():
            break
        J = _equation_jacobian(sys, vals[active])
        dets = np.linalg.det(J)
        good = np.isfinite(dets) & (np.abs(dets) > 1e-280)
        if not good.any():
            break
        idx = np.nonzero(active)[0][good]
        step = np.linalg.solve(J[good], F[active][good][..., None])[..., 0]
        new = vals[idx] - step
        ok = np.isfinite(new).all(axis=1)
        vals[idx[ok]] = new[ok]
    return vals


def _equation_jacobian(sys: ConstraintSystem, vals: np.ndarray) -> np.ndarray:
    """Jacobian of (lhs - rhs) per equation; vals (C, nv) -> (C, P, nv)."""
    g, b1, b2 = vals[:, 0:1], vals[:, 1:2], vals[:, 2:3]
    Q1 = sys.q1[:, 0] * b1 * b1 + sys.q1[:, 1] * b1 + sys.q1[:, 2]
    Q2 = sys.q2[:, 0] * b2 * b2 + sys.q2[:, 1] * b2 + sys.q2[:, 2]
    dQ1 = 2.0 * sys.q1[:, 0] * b1 + sys.q1[:, 1]
    dQ2 = 2.0 * sys.q2[:, 0] * b2 + sys.q2[:, 1]
    if sys.mode == "calibrated":
        cols = [-(Q2 + sys.c2) * np.ones_like(g), dQ1, -g * dQ2]
    elif sys.mode == "shared_focal":
        w = vals[:, 3:4]
        cols = [
            -(w * Q2 + sys.c2),
            w * dQ1,
            -g * w * dQ2,
            Q1 - g * Q2,
        ]
    else:
        w1, w2 = vals[:, 3:4], vals[:, 4:5]
        cols = [
            -(w2 * Q2 + sys.c2),
            w1 * dQ1,
            -g * w2 * dQ2,
            Q1 * np.ones_like(g),
            -g * Q2,
        ]
    return np.stack(cols, axis=2)


def _sylvester(polys1, polys2):
    """Sylvester matrix of two beta1-polynomials with beta2-polynomial entries.

    polys1/polys2: lists of beta2 coefficient vectors, low-to-high beta1
    degree. Returns (n, n, L) stacked beta2 coefficients.
    """
    n1 = len(polys1) - 1
    n2 = len(polys2) - 1
    n = n1 + n2
    L = max(max(len(p) for p in polys1), max(len(p) for p in polys2))
    S = np.zeros((n, n, L))
    for r in range(n2):
        for i, p in enumerate(reversed(polys1)):  # high-to-low
            S[r, r + i, : len(p)] = p
    for r in range(n1):
        for i, p in enumerate(reversed(polys2)):
            S[n2 + r, r + i, : len(p)] = p
    return S


def _resultant_roots(C1, C2):
    """Real beta2 roots of the resultant in beta1 of two bivariate polynomials.

    Builds the Sylvester matrix (entries are polynomials in beta2) and solves
    det S(beta2) = 0 as a polynomial eigenvalue problem via a block-companion
    QZ linearization, which stays accurate for roots of any magnitude.
    """
    n1 = np.abs(C1).max()
    n2 = np.abs(C2).max()
    if n1 == 0.0 or n2 == 0.0:
        raise DegenerateSampleError("vanishing consistency polynomial")
    polys1 = [C1[i, :] / n1 for i in range(C1.shape[0])]
    polys2 = [C2[i, :] / n2 for i in range(C2.shape[0])]
    S = _sylvester(polys1, polys2)
    n, _, L1 = S.shape
    L = L1 - 1
    smax = np.abs(S).max()
    while L > 0 and np.abs(S[:, :, L]).max() < 1e-14 * smax:
        L -= 1
    if L == 0:
        raise DegenerateSampleError("constant resultant")
    N = n * L
    A = np.zeros((N, N))
    B = np.eye(N)
    if L > 1:
        A[: N - n, n:] = np.eye(N - n)
    for l in range(L):
        A[N - n :, l * n : (l + 1) * n] = -S[:, :, l]
    B[N - n :, N - n :] = S[:, :, L]
    eigvals = scipy.linalg.eigvals(A, B)
    finite = eigvals[np.isfinite(eigvals)]
    real = finite[
        np.abs(finite.imag) <= REAL_TOL * np.maximum(1.0, np.abs(finite.real))
    ]
    if real.size == 0 and finite.size == 0:
        raise DegenerateSampleError("identically vanishing resultant")
    return np.unique(real.real)


def _quad_roots_batch(coeffs):
    """Real roots of a*x^2 + b*x + c per row; coeffs is (R, 3) low-to-high."""
    c, b, a = coeffs[:, 0], coeffs[:, 1], coeffs[:, 2]
    scale = np.abs(coeffs).max(axis=1)
    quad = np.abs(a) > 1e-13 * np.maximum(scale, 1e-300)
    lin = ~quad & (np.abs(b) > 1e-13 * np.maximum(scale, 1e-300))
    roots = np.full((len(coeffs), 2), np.nan)
    if quad.any():
        aq, bq, cq = a[quad], b[quad], c[quad]
        disc = bq * bq - 4.0 * aq * cq
        # keep tangency (double-root) cases that dip slightly negative
        near = disc > -1e-10 * (bq * bq + np.abs(4.0 * aq * cq))
        sq = np.sqrt(np.maximum(disc, 0.0))
        q = -0.5 * (bq + np.where(bq >= 0, sq, -sq))
        with np.errstate(divide="ignore", invalid="ignore"):
            r1 = np.where(near, q / aq, np.nan)
            r2 = np.where(near & (np.abs(q) > 0), cq / q, np.where(near, 0.0, np.nan))
        roots[quad, 0] = r1
        roots[quad, 1] = r2
    if lin.any():
        roots[lin, 0] = -c[lin] / b[lin]
    return roots


def _focal_conditions(sys: ConstraintSystem, cramer_rows, minor_rows):
    """Consistency polynomials G1, H in (beta1, beta2) for the focal modes."""
    negq2 = -sys.q2
    negc2 = -sys.c2
    negc1 = -sys.c1
    if sys.mode == "shared_focal":
        G1 = _det4_bipoly(sys.q1, negq2, negc2, negc1, (0, 1, 2, 3))
        D = _det3_bipoly([("p1", sys.q1), ("p2", negq2), ("c", negc2)], cramer_rows)
        s_num = _det3_bipoly([("c", negc1), ("p2", negq2), ("c", negc2)], cramer_rows)
        t_num = _det3_bipoly([("p1", sys.q1), ("c", negc1), ("c", negc2)], cramer_rows)
        g_num = _det3_bipoly([("p1", sys.q1), ("p2", negq2), ("c", negc1)], cramer_rows)
        G2 = _bipoly_mul(s_num, g_num)
        TD = _bipoly_mul(t_num, D)
        H = np.zeros((max(G2.shape[0], TD.shape[0]), max(G2.shape[1], TD.shape[1])))
        H[: G2.shape[0], : G2.shape[1]] += G2
        H[: TD.shape[0], : TD.shape[1]] -= TD
    else:
        G1 = _det4_bipoly(sys.q1, negq2, negc2, negc1, minor_rows[0])
        H = _det4_bipoly(sys.q1, negq2, negc2, negc1, minor_rows[1])
    return G1, H


_FOCAL_ATTEMPTS = {
    "shared_focal": [((0, 1, 2), None), ((0, 1, 3), None), ((1, 2, 3), None)],
    "two_focal": [
        (None, ((0, 1, 2, 3), (0, 1, 2, 4))),
        (None, ((0, 1, 3, 4), (0, 2, 3, 4))),
        (None, ((1, 2, 3, 4), (0, 1, 2, 3))),
    ],
}


def _solve_focal(sys: ConstraintSystem, attempt: int):
    """Candidate tuples from one internal elimination row arrangement."""
    shared = sys.mode == "shared_focal"
    cramer_rows, minor_rows = _FOCAL_ATTEMPTS[sys.mode][attempt]
    try:
        G1, H = _focal_conditions(sys, cramer_rows, minor_rows)
        roots2 = _resultant_roots(G1, H)
    except DegenerateSampleError:
        return []
    if roots2.size == 0:
        return []

    # beta1 back-substitution, batched over the beta2 roots
    powers = roots2[:, None] ** np.arange(G1.shape[1])[None, :]
    b1_pairs = _quad_roots_batch(powers @ G1.T)
    missing = np.all(np.isnan(b1_pairs), axis=1)
    for i in np.nonzero(missing)[0]:  # rare: G1 collapses at this root
        extra = _real_roots(_bipoly_eval_beta2(H, roots2[i]))
        b1_pairs[i, : min(2, len(extra))] = extra[:2]

    b2s = np.repeat(roots2, 2)
    b1s = b1_pairs.reshape(-1)
    ok = np.isfinite(b1s)
    b1s, b2s = b1s[ok], b2s[ok]
    if b1s.size == 0:
        return []

    # grouped linear unknowns (omega1, gamma*omega2, gamma) per candidate
    Q1 = sys.q1[:, 0] * b1s[:, None] ** 2 + sys.q1[:, 1] * b1s[:, None] + sys.q1[:, 2]
    Q2 = sys.q2[:, 0] * b2s[:, None] ** 2 + sys.q2[:, 1] * b2s[:, None] + sys.q2[:, 2]
    A = np.empty((len(b1s), Q1.shape[1], 3))
    A[:, :, 0] = Q1
    A[:, :, 1] = -Q2
    A[:, :, 2] = -sys.c2
    At = np.swapaxes(A, 1, 2)
    gram = At @ A
    rhs = At @ (-sys.c1)[None, :, None]
    dets = np.linalg.det(gram)
    good = np.abs(dets) > 1e-280
    lin = np.full((len(b1s), 3), np.nan)
    if good.any():
        lin[good] = np.linalg.solve(gram[good], rhs[good])[:, :, 0]
    sigma, tau, g = lin[:, 0], lin[:, 1], lin[:, 2]

    # prefilter: linear system must be (approximately) consistent
    resid = (A @ lin[:, :, None])[:, :, 0] + sys.c1
    scale = np.abs(A).max(axis=(1, 2)) * np.abs(lin).max(axis=1) + np.abs(sys.c1).max()
    keep = (
        np.isfinite(lin).all(axis=1)
        & (np.abs(g) > 1e-12)
        & (np.abs(resid).max(axis=1) < 1e-2 * np.maximum(scale, 1e-12))
    )
    if not keep.any():
        return []
    if shared:
        w = 0.5 * (sigma[keep] + tau[keep] / g[keep])
        return list(np.column_stack([g[keep], b1s[keep], b2s[keep], w]))
    return list(
        np.column_stack([g[keep], b1s[keep], b2s[keep], sigma[keep], tau[keep] / g[keep]])
    )


def solve_system(sys: ConstraintSystem) -> list[AlgebraicSolution]:
    """All real solutions of the constraint system, polished and verified.

    Each returned solution satisfies every used equation with relative
    residual below RESIDUAL_TOL; the count is capped at the mode's algebraic
    bound (4 / 8 / 4), keeping the best residuals.
    """
    if sys.mode == "calibrated":
        candidate_sets = [_solve_calibrated(sys)]
    else:
        # internal row arrangements are retried until one yields verified
        # solutions (conditioning fallback; the equation subset is fixed)
        candidate_sets = (
            _solve_focal(sys, a) for a in range(len(_FOCAL_ATTEMPTS[sys.mode]))
        )
    for candidates in candidate_sets:
        if not candidates:
            continue
        vals = _newton_polish(sys, np.asarray(candidates))
        vals = vals[np.isfinite(vals).all(axis=1)]
        if len(vals) == 0:
            continue
        res = _relative_residual(sys, vals)
        # best residual first, so dedup keeps the most converged representative
        accepted: list[tuple[float, np.ndarray]] = []
        for i in np.argsort(res):
            if res[i] >= RESIDUAL_TOL or len(accepted) == MAX_SOLUTIONS[sys.mode]:
                break
            if any(_same_solution(vals[i], prev) for _, prev in accepted):
                continue
            accepted.append((float(res[i]), vals[i]))
        if accepted:
            return [sys.from_internal(v, r) for r, v in accepted]
    return []


def _same_solution(a: np.ndarray, b: np.ndarray, tol: float = 1e-7) -> bool:
    return bool(np.all(np.abs(a - b) <= tol * np.maximum(1.0, np.abs(b))))
