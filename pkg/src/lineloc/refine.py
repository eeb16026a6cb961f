"""Pose refinement from 2D-3D point correspondences.

A classical three-point resection on bearing vectors provides minimal
solutions inside a seeded RANSAC loop; the best consensus model is
polished by Gauss-Newton on the angular reprojection errors. Everything
is angular (no pixels): bearings are unit vectors on the query sphere.

The repository ships a single matcher, an oracle that synthesizes
correspondences from a known ground-truth pose; any callable producing
Correspondence lists can be substituted for it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import PointAtCameraCenter, TooFewMatches
from .geometry import Pose, UnitVector, project_point, rotation_about_axis
from .lines import LineMap3D

_P3P_VERIFY_TOL = 1e-6
_COLLINEAR_TOL = 1e-9


@dataclass(frozen=True)
class Correspondence:
    """A 2D bearing paired with the 3D point it observes."""

    bearing: UnitVector
    point: np.ndarray

    def __init__(self, bearing: UnitVector, point):
        object.__setattr__(self, "bearing", bearing)
        p = np.asarray(point, dtype=float).copy()
        if p.shape != (3,):
            raise ValueError("point must be a 3-vector")
        p.flags.writeable = False
        object.__setattr__(self, "point", p)


@dataclass(frozen=True)
class RansacConfig:
    max_iterations: int = 1000
    inlier_threshold: float = 0.01
    min_inliers: int = 6
    confidence: float = 0.999
    seed: int = 0

    def __post_init__(self):
        if self.inlier_threshold <= 0:
            raise ValueError("inlier_threshold must be > 0")
        if not 0.0 <= self.confidence < 1.0:
            raise ValueError("confidence must be in [0, 1)")


def solve_p3p(correspondences) -> list[Pose]:
    """All poses consistent with three bearing observations.

    Classical three-point resection: the pairwise bearing angles and the
    world-point distances yield a quartic in the depth ratio; each
    admissible root gives camera-frame point positions, from which the
    rigid transform is recovered. Solutions are verified to reproject the
    three bearings within 1e-6 rad.

    Returns:
        0 to 4 poses; empty on degenerate input (collinear points, failed
        quartic).
    """
    c = list(correspondences)
    if len(c) != 3:
        raise ValueError("solve_p3p needs exactly 3 correspondences")
    X = np.array([m.point for m in c])
    F = np.array([m.bearing.xyz for m in c])

    # Collinear world points cannot fix the pose.
    area = np.linalg.norm(np.cross(X[1] - X[0], X[2] - X[0]))
    scale = max(np.linalg.norm(X[1] - X[0]), np.linalg.norm(X[2] - X[0]))
    if scale <= 0 or area <= _COLLINEAR_TOL * scale * scale:
        return []

    a = np.linalg.norm(X[1] - X[2])
    b = np.linalg.norm(X[0] - X[2])
    cc = np.linalg.norm(X[0] - X[1])
    cos_a = float(F[1] @ F[2])
    cos_b = float(F[0] @ F[2])
    cos_g = float(F[0] @ F[1])
    if b <= 0:
        return []
    A2 = (a / b) ** 2
    C2 = (cc / b) ** 2

    # Q(v) = 1 - 2 cos_b v + v^2; s1^2 = b^2 / Q(v); u = s2/s1, v = s3/s1.
    Q = np.array([1.0, -2.0 * cos_b, 1.0])
    den = np.array([2.0 * cos_g, -2.0 * cos_a])
    num = npoly.polysub(np.array([1.0, 0.0, -1.0]), (C2 - A2) * Q)
    quartic = npoly.polyadd(
        npoly.polymul(npoly.polymul(den, den), npoly.polysub([1.0], C2 * Q)),
        npoly.polymul(num, num),
    )
    quartic = npoly.polysub(quartic, 2.0 * cos_g * npoly.polymul(den, num))

    coeffs = np.atleast_1d(np.asarray(quartic, dtype=float))
    top = np.max(np.abs(coeffs))
    if not np.isfinite(top) or top == 0.0:
        return []
    # Trim negligible leading coefficients so polyroots sees the true degree.
    k = coeffs.size
    while k > 1 and abs(coeffs[k - 1]) < 1e-14 * top:
        k -= 1
    coeffs = coeffs[:k]
    if coeffs.size < 2:
        return []
    roots = npoly.polyroots(coeffs)

    # Repeated roots (symmetric configurations) split under coefficient
    # roundoff into clusters whose mean recovers the true root; merge them.
    merged = []
    used = np.zeros(len(roots), dtype=bool)
    for i in range(len(roots)):
        if used[i]:
            continue
        cluster = [roots[i]]
        used[i] = True
        for j in range(i + 1, len(roots)):
            if not used[j] and abs(roots[j] - roots[i]) < 1e-4 * max(
                1.0, abs(roots[i])
            ):
                cluster.append(roots[j])
                used[j] = True
        merged.append(np.mean(cluster))

    poses: list[Pose] = []
    for v in merged:
        if abs(v.imag) > 1e-8 or v.real <= 0:
            continue
        v = float(v.real)
        qv = float(npoly.polyval(v, Q))
        if qv <= 0:
            continue
        s1 = b / math.sqrt(qv)
        dv = float(npoly.polyval(v, den))
        if abs(dv) > 1e-9:
            us = [float(npoly.polyval(v, num)) / dv]
        else:
            # Fall back to the second constraint, quadratic in u.
            disc = cos_g * cos_g - (1.0 - C2 * qv)
            if disc < 0:
                continue
            r = math.sqrt(disc)
            us = [cos_g + r, cos_g - r]
        for u in us:
            if u <= 0:
                continue
            s = np.array([s1, u * s1, v * s1])
            Y = F * s[:, None]
            fit = _rigid_fit(X, Y)
            if fit is None:
                continue
            # Near-repeated quartic roots limit raw accuracy; Newton on the
            # bearing constraints restores machine precision.
            pose = _newton_polish(fit, F, X)
            if _max_angular_error(pose, F, X) < _P3P_VERIFY_TOL:
                if not any(
                    np.allclose(pose.R, p.R, atol=1e-9)
                    and np.allclose(pose.t, p.t, atol=1e-9)
                    for p in poses
                ):
                    poses.append(pose)
    return poses


def refine_pose(
    initial: Pose, matches, cfg: RansacConfig = RansacConfig()
) -> tuple[Pose, np.ndarray, float]:
    """RANSAC + Gauss-Newton pose refinement from correspondences.

    Seeded RANSAC over 3-point minimal samples; the inlier test is the
    angular error between the observed bearing and the reprojected point.
    The iteration budget adapts to the best consensus via the standard
    confidence bound. The best model is polished by Gauss-Newton on all
    its inliers (<= 20 iterations or step norm < 1e-10).

    Returns:
        (pose, inlier_mask, mean_angular_error). Without consensus of at
        least cfg.min_inliers the initial pose comes back unchanged with
        an all-false mask and the mean error over all matches under it.

    Raises:
        TooFewMatches: fewer than 3 correspondences.
    """
    matches = list(matches)
    n = len(matches)
    if n < 3:
        raise TooFewMatches(f"refinement needs >= 3 matches, got {n}")
    B = np.array([m.bearing.xyz for m in matches])
    P = np.array([m.point for m in matches])
    rng = np.random.default_rng(cfg.seed)

    best_count = 0
    best_key = None
    best_pose = None
    best_mask = None
    budget = cfg.max_iterations
    trial = 0
    while trial < budget:
        idx = rng.choice(n, size=3, replace=False)
        candidates = solve_p3p([matches[i] for i in idx])
        for pose in candidates:
            err = _angular_errors(pose, B, P)
            mask = err < cfg.inlier_threshold
            count = int(mask.sum())
            if count == 0:
                continue
            mean_err = float(err[mask].mean())
            key = (-count, mean_err, trial)
            if best_key is None or key < best_key:
                best_key = key
                best_count = count
                best_pose = pose
                best_mask = mask
                if count >= 3:
                    w = count / n
                    denom = math.log(max(1e-12, 1.0 - w**3))
                    if denom < 0:
                        needed = math.ceil(
                            math.log(1.0 - cfg.confidence) / denom
                        )
                        budget = min(cfg.max_iterations, max(needed, trial + 1))
        trial += 1

    if best_pose is None or best_count < cfg.min_inliers:
        err = _angular_errors(initial, B, P)
        return initial, np.zeros(n, dtype=bool), float(err.mean())

    pose = _polish(best_pose, B[best_mask], P[best_mask])
    err = _angular_errors(pose, B, P)
    return pose, best_mask, float(err[best_mask].mean())


def oracle_matcher(
    line_map: LineMap3D,
    gt_pose: Pose,
    n: int,
    noise: float = 0.0,
    outlier_fraction: float = 0.0,
    seed: int = 0,
) -> list[Correspondence]:
    """Synthesize correspondences from a known pose.

    Stands in for a learned feature matcher: n 3D points are sampled on
    the map segments (uniform by length; keypoints are used instead when
    the map has no segments), projected with the ground-truth pose,
    perturbed in the bearing tangent plane (per-axis std = noise radians)
    and a round(outlier_fraction * n) subset replaced by uniform random
    directions. Deterministic for a fixed seed.
    """
    if not 0.0 <= outlier_fraction <= 1.0:
        raise ValueError("outlier_fraction must be in [0, 1]")
    rng = np.random.default_rng(seed)
    if line_map.segments:
        starts = np.array([s.s for s in line_map.segments])
        ends = np.array([s.e for s in line_map.segments])
        lengths = np.linalg.norm(ends - starts, axis=1)
        probs = lengths / lengths.sum()
        seg_idx = rng.choice(len(lengths), size=n, p=probs)
        u = rng.random(n)
        pts = starts[seg_idx] + u[:, None] * (ends[seg_idx] - starts[seg_idx])
    elif line_map.keypoints:
        kp = np.array([p for p, _ in line_map.keypoints])
        pts = kp[rng.choice(len(kp), size=n)]
    else:
        raise ValueError("map has neither segments nor keypoints to sample")

    out: list[Correspondence] = []
    cam = (pts @ gt_pose.R.T) + gt_pose.t
    norms = np.linalg.norm(cam, axis=1)
    bearings = cam / np.maximum(norms, 1e-12)[:, None]
    if noise > 0:
        for i in range(n):
            t1, t2 = _tangent_basis(bearings[i])
            eta = rng.normal(0.0, noise, size=2)
            b = bearings[i] + eta[0] * t1 + eta[1] * t2
            bearings[i] = b / np.linalg.norm(b)
    n_out = int(round(outlier_fraction * n))
    if n_out > 0:
        idx = rng.choice(n, size=n_out, replace=False)
        rand = rng.normal(size=(n_out, 3))
        bearings[idx] = rand / np.linalg.norm(rand, axis=1, keepdims=True)
    for i in range(n):
        out.append(Correspondence(UnitVector(bearings[i]), pts[i]))
    return out


def residual_jacobian(pose: Pose, bearings: np.ndarray, points: np.ndarray):
    """Angular residuals and their Jacobian wrt (rotation tangent, t).

    The residual of a correspondence is the angle between its bearing and
    the reprojected point; the rotation is parameterized by a left tangent
    increment, R <- exp([w]x) R.

    Returns:
        (e (n,), J (n, 6)) with columns [dw_x, dw_y, dw_z, dt_x, dt_y, dt_z].
    """
    p = points @ pose.R.T + pose.t
    norms = np.linalg.norm(p, axis=1)
    phat = p / norms[:, None]
    u = np.clip(np.sum(bearings * phat, axis=1), -1.0, 1.0)
    e = np.arccos(u)
    s = np.sqrt(np.maximum(1.0 - u * u, 1e-24))
    # d e / d p = -(1/s) * b^T (I - phat phat^T) / ||p||
    bp = bearings - u[:, None] * phat
    de_dp = -(bp / (s * norms)[:, None])
    q = points @ pose.R.T  # rotated points before translation
    # d p / d w = -[q]x (left perturbation); row form: r @ (-[q]x) = q x r.
    de_dw = np.cross(q, de_dp)
    J = np.concatenate([de_dw, de_dp], axis=1)
    return e, J


# ---------------------------------------------------------------------------
# internals


def _angular_errors(pose: Pose, B: np.ndarray, P: np.ndarray) -> np.ndarray:
    p = P @ pose.R.T + pose.t
    norms = np.linalg.norm(p, axis=1)
    norms = np.maximum(norms, 1e-12)
    u = np.clip(np.sum(B * (p / norms[:, None]), axis=1), -1.0, 1.0)
    return np.arccos(u)


def _exp_rotation(w: np.ndarray) -> np.ndarray:
    ang = float(np.linalg.norm(w))
    if ang < 1e-12:
        return np.eye(3)
    return rotation_about_axis(w, ang)


def _polish(pose: Pose, B: np.ndarray, P: np.ndarray) -> Pose:
    """Gauss-Newton on the angular errors with a halving line search."""
    R = pose.R.copy()
    t = pose.t.copy()
    cost = float(np.sum(_angular_errors(Pose(R, t), B, P) ** 2))
    for _ in range(20):
        e, J = residual_jacobian(Pose(R, t), B, P)
        delta, *_ = np.linalg.lstsq(J, -e, rcond=None)
        if not np.all(np.isfinite(delta)):
            break
        step = 1.0
        improved = False
        for _ in range(10):
            d = step * delta
            Rn = _exp_rotation(d[:3]) @ R
            tn = t + d[3:]
            new_cost = float(np.sum(_angular_errors(Pose(Rn, tn), B, P) ** 2))
            if new_cost <= cost:
                R, t, cost = Rn, tn, new_cost
                improved = True
                break
            step *= 0.5
        if not improved or np.linalg.norm(delta) < 1e-10:
            break
    return Pose(R, t)


def _newton_polish(pose: Pose, F: np.ndarray, X: np.ndarray, iters: int = 25) -> Pose:
    """Newton iterations on the full bearing constraints (2 DOF each).

    Each bearing pins two tangent-plane components, so three
    correspondences give a square 6x6 system. Convergence is quadratic
    except at repeated-root configurations, where it is linear; there the
    reprojection error stays flat along the merge direction, so the final
    iterate (not the best-error one) is the right answer.
    """
    R = pose.R.copy()
    t = pose.t.copy()
    bases = [_tangent_basis(f) for f in F]
    init_err = _max_angular_error(Pose(R, t), F, X)
    for _ in range(iters):
        p = X @ R.T + t
        norms = np.linalg.norm(p, axis=1)
        if np.any(norms < 1e-12):
            return pose
        phat = p / norms[:, None]
        q = X @ R.T
        rows = []
        res = []
        for i, (t1, t2) in enumerate(bases):
            dphat_dp = (np.eye(3) - np.outer(phat[i], phat[i])) / norms[i]
            for tv in (t1, t2):
                res.append(float(tv @ phat[i]))
                dr_dp = tv @ dphat_dp
                rows.append(np.concatenate([np.cross(q[i], dr_dp), dr_dp]))
        J = np.array(rows)
        r = np.array(res)
        delta, *_ = np.linalg.lstsq(J, -r, rcond=None)
        if not np.all(np.isfinite(delta)):
            return pose
        R = _exp_rotation(delta[:3]) @ R
        t = t + delta[3:]
        if np.linalg.norm(delta) < 1e-12:
            break
    final = Pose(R, t)
    if _max_angular_error(final, F, X) <= max(init_err, 1e-9):
        return final
    return pose


def _rigid_fit(X: np.ndarray, Y: np.ndarray) -> Pose | None:
    """Least-squares rigid transform with Y ~ R X + t (proper rotation)."""
    xm = X.mean(axis=0)
    ym = Y.mean(axis=0)
    H = (X - xm).T @ (Y - ym)
    U, S, Vt = np.linalg.svd(H)
    if S[1] <= 1e-12:
        return None
    d = np.sign(np.linalg.det(Vt.T @ U.T))
    D = np.diag([1.0, 1.0, d])
    R = Vt.T @ D @ U.T
    t = ym - R @ xm
    try:
        return Pose(R, t)
    except ValueError:
        return None


def _max_angular_error(pose: Pose, F: np.ndarray, X: np.ndarray) -> float:
    try:
        errs = [
            math.acos(
                min(
                    1.0,
                    max(-1.0, float(F[i] @ project_point(X[i], pose).xyz)),
                )
            )
            for i in range(len(X))
        ]
    except PointAtCameraCenter:
        return math.inf
    return max(errs)


def _tangent_basis(v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    helper = (
        np.array([0.0, 0.0, 1.0]) if abs(v[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    )
    t1 = np.cross(helper, v)
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(v, t1)
    return t1, t2
