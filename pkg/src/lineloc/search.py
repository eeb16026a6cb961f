"""Candidate pose search with decomposed spherical line distance fields.

For each rotation hypothesis the query arcs and map segments are split
into three groups by principal direction; one distance field per group is
evaluated on a sparse set of query points, and candidate poses (rotation x
grid translation) are ranked by a robust inlier-counting loss. A symmetric
Chamfer ranker is included as the comparison baseline.

The batched evaluator works in cosine space to avoid per-pair inverse
trig: for every (query point, pose, group) it reduces the candidate arcs
with monotone surrogates and converts only the winning values to radians
using the same branch formulas as the scalar path.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .directions import assign_lines_2d, assign_lines_3d
from .errors import EmptyQuery, NoCandidates
from .geometry import (
    CAMERA_CENTER_TOL,
    CROSS_NORM_TOL,
    Pose,
    UnitVector,
)
from .icosphere import icosphere, level_for_count
from .lines import LineMap3D, QueryLines2D
from .rotations import RotationHypothesis

LOSS_KINDS = ("inlier_count", "l1", "l2", "huber", "median")

_MAX_BISECTIONS = 32
_EMPTY_FIELD = math.pi
# Translation chunking bounds the (n_query x n_arc) pair matrices.
_ARCS_PER_CHUNK = 20000


@dataclass(frozen=True)
class QueryPointSet:
    """Uniformly distributed sphere points the fields are sampled on."""

    points: tuple[UnitVector, ...]

    def as_array(self) -> np.ndarray:
        return np.array([p.xyz for p in self.points])

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class DistanceField:
    """Distance values (radians) aligned index-for-index with a point set."""

    values: np.ndarray = field(repr=False)

    def __init__(self, values):
        v = np.asarray(values, dtype=float).copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class RankedPose:
    """A scored candidate pose from the search stage."""

    pose: Pose
    inliers: int
    residual: float
    rotation_index: int
    translation_index: int


@dataclass(frozen=True)
class SearchConfig:
    """Knobs of the candidate-search stage.

    tau is the inlier threshold on |f2d - f3d| in radians; line_tol is the
    line-to-direction assignment tolerance. loss_kind other than
    "inlier_count" exists for ablation runs and ranks by ascending loss.
    """

    tau: float = 0.1
    n_query_points: int = 42
    top_k: int = 20
    n_translations: int = 200
    decompose: bool = True
    loss_kind: str = "inlier_count"
    line_tol: float = math.radians(10.0)

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be > 0")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.n_translations < 1:
            raise ValueError("n_translations must be >= 1")
        if self.loss_kind not in LOSS_KINDS:
            raise ValueError(f"loss_kind must be one of {LOSS_KINDS}")


def sample_query_points(n_target: int = 42) -> QueryPointSet:
    """Icosphere vertex set with the smallest count >= n_target.

    Counts follow the subdivision ladder 12, 42, 162, 642, ...
    """
    if n_target < 12:
        raise ValueError("n_target must be >= 12")
    verts = icosphere(level_for_count(n_target))
    return QueryPointSet(tuple(UnitVector(v) for v in verts))


def translation_pool(
    line_map: LineMap3D, n_t: int, margin: float = 0.05
) -> np.ndarray:
    """Uniform grid of candidate camera centers inside the map bbox.

    The bbox is shrunk by `margin` (fraction of the extent, per side);
    per-axis cell counts are proportional to the bbox extents with the
    common scale chosen as large as possible while the total count stays
    <= n_t. Centers are returned in lexicographic (x, y, z) order.
    """
    if n_t < 1:
        raise ValueError("n_t must be >= 1")
    if not 0.0 <= margin < 0.5:
        raise ValueError("margin must be in [0, 0.5)")
    ext = line_map.extents
    lo = line_map.bbox_min + margin * ext
    hi = line_map.bbox_max - margin * ext
    ext_in = hi - lo

    def counts(alpha: float) -> np.ndarray:
        return np.maximum(1, np.floor(alpha * ext_in + 0.5).astype(int))

    # Product of counts is a nondecreasing step function of the scale;
    # bisect for the largest scale whose product stays within n_t.
    a_lo, a_hi = 0.0, 2.0
    while np.prod(counts(a_hi)) <= n_t:
        a_hi *= 2.0
        if a_hi > 1e9:
            break
    for _ in range(80):
        mid = 0.5 * (a_lo + a_hi)
        if np.prod(counts(mid)) <= n_t:
            a_lo = mid
        else:
            a_hi = mid
    m = counts(a_lo)
    axes = [
        lo[i] + (np.arange(m[i]) + 0.5) * ext_in[i] / m[i] for i in range(3)
    ]
    centers = np.array(
        [(x, y, z) for x in axes[0] for y in axes[1] for z in axes[2]]
    )
    return centers


def ldf_2d(query_points: QueryPointSet, arcs) -> DistanceField:
    """2D line distance field: per-point minimum distance to the arcs.

    The empty arc set yields pi everywhere.
    """
    X = query_points.as_array()
    return DistanceField(_field_over_arcs(X, list(arcs)))


def ldf_3d(query_points: QueryPointSet, segments, pose: Pose) -> DistanceField:
    """3D line distance field at a pose: project segments, then as ldf_2d.

    Degenerate pieces (through the camera center) are silently dropped;
    if everything drops the field is pi everywhere.
    """
    from .geometry import project_segment

    arcs = []
    for seg in segments:
        arcs.extend(project_segment(seg, pose))
    X = query_points.as_array()
    return DistanceField(_field_over_arcs(X, arcs))


def evaluate_pool(
    query: QueryLines2D,
    line_map: LineMap3D,
    rotations: list[RotationHypothesis],
    translations,
    cfg: SearchConfig = SearchConfig(),
    threads: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """Inlier counts and scores over the rotation x translation pool.

    Returns:
        (counts, scores), both (n_rotations, n_translations). For the
        inlier_count loss the score is the mean inlier residual; for the
        ablation losses it is the loss value itself.

    Raises:
        NoCandidates: empty rotation or translation pool.
    """
    centers = np.atleast_2d(np.asarray(translations, dtype=float))
    if len(rotations) == 0 or centers.shape[0] == 0:
        raise NoCandidates("rotation and translation pools must be non-empty")
    qpts = sample_query_points(cfg.n_query_points)
    X = qpts.as_array()

    def eval_rotation(hyp: RotationHypothesis):
        return _evaluate_rotation(X, query, line_map, hyp, centers, cfg)

    if threads > 1 and len(rotations) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_rotation = list(pool.map(eval_rotation, rotations))
    else:
        per_rotation = [eval_rotation(h) for h in rotations]

    counts = np.stack([pr[0] for pr in per_rotation])
    scores = np.stack([pr[1] for pr in per_rotation])
    return counts, scores


def select_top(
    counts: np.ndarray,
    scores: np.ndarray,
    rotations: list[RotationHypothesis],
    translations,
    cfg: SearchConfig = SearchConfig(),
) -> list[RankedPose]:
    """Deterministic top-K selection from pool scores.

    inlier_count ranks by descending count with ascending score then
    (rotation_index, translation_index) tie-breaks; other losses rank by
    ascending score.
    """
    centers = np.atleast_2d(np.asarray(translations, dtype=float))
    n_r, n_t = counts.shape
    rot_idx = np.repeat(np.arange(n_r), n_t)
    t_idx = np.tile(np.arange(n_t), n_r)
    flat_counts = counts.ravel()
    flat_scores = scores.ravel()
    if cfg.loss_kind == "inlier_count":
        order = np.lexsort((t_idx, rot_idx, flat_scores, -flat_counts))
    else:
        order = np.lexsort((t_idx, rot_idx, flat_scores))
    top = order[: min(cfg.top_k, order.size)]

    out = []
    for n in top:
        r, t = int(rot_idx[n]), int(t_idx[n])
        R = rotations[r].R
        out.append(
            RankedPose(
                pose=Pose(R, -R @ centers[t]),
                inliers=int(flat_counts[n]),
                residual=float(flat_scores[n]),
                rotation_index=r,
                translation_index=t,
            )
        )
    return out


def rank_poses(
    query: QueryLines2D,
    line_map: LineMap3D,
    rotations: list[RotationHypothesis],
    translations,
    cfg: SearchConfig = SearchConfig(),
    threads: int = 1,
) -> list[RankedPose]:
    """Rank the rotation x translation candidate pool by field affinity.

    Translations are camera centers in world coordinates; each candidate
    pose is Pose(R, -R @ c). Results are independent of the thread count.

    Raises:
        NoCandidates: empty rotation or translation pool.
    """
    counts, scores = evaluate_pool(
        query, line_map, rotations, translations, cfg, threads
    )
    return select_top(counts, scores, rotations, translations, cfg)


def chamfer_rank(
    query: QueryLines2D,
    line_map: LineMap3D,
    rotations: list[RotationHypothesis],
    translations,
    k: int = 20,
    threads: int = 1,
) -> list[RankedPose]:
    """Baseline ranker: symmetric Chamfer distance between line sets.

    Points are sampled at 1 degree spacing along every arc; the score is
    the mean distance from query samples to the nearest projected 3D arc
    plus the reverse term. Lower is better; ties break on indices. The
    inliers field of the results is 0 (no inlier notion here).

    Raises:
        EmptyQuery: the query has no arcs.
        NoCandidates: empty rotation or translation pool.
    """
    centers = np.atleast_2d(np.asarray(translations, dtype=float))
    if len(rotations) == 0 or centers.shape[0] == 0:
        raise NoCandidates("rotation and translation pools must be non-empty")
    if not query.arcs:
        raise EmptyQuery("query contains no arcs")

    arcs2 = list(query.arcs)
    S2, E2, N2, C2 = _arc_arrays(arcs2)
    P2 = _sample_along_arcs(S2, E2, C2)
    seg_s = np.array([s.s for s in line_map.segments])
    seg_e = np.array([s.e for s in line_map.segments])

    def eval_rotation(hyp: RotationHypothesis):
        scores = np.full(centers.shape[0], np.inf)
        for t, c in enumerate(centers):
            Rc = hyp.R @ c
            A = seg_s @ hyp.R.T - Rc
            B = seg_e @ hyp.R.T - Rc
            S3, E3, _, N3 = _split_batched(A, B, np.zeros(len(A), dtype=int))
            if S3.shape[0] == 0:
                continue
            C3 = np.sum(S3 * E3, axis=1)
            P3 = _sample_along_arcs(S3, E3, C3)
            d23 = _min_point_to_arcs(P2, S3, E3, N3, C3)
            d32 = _min_point_to_arcs(P3, S2, E2, N2, C2)
            scores[t] = float(np.mean(d23) + np.mean(d32))
        return scores

    if threads > 1 and len(rotations) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_rot = list(pool.map(eval_rotation, rotations))
    else:
        per_rot = [eval_rotation(h) for h in rotations]

    scores = np.stack(per_rot)
    n_r, n_t = scores.shape
    rot_idx = np.repeat(np.arange(n_r), n_t)
    t_idx = np.tile(np.arange(n_t), n_r)
    flat = scores.ravel()
    order = np.lexsort((t_idx, rot_idx, flat))
    top = order[: min(k, order.size)]
    out = []
    for n in top:
        r, t = int(rot_idx[n]), int(t_idx[n])
        R = rotations[r].R
        out.append(
            RankedPose(
                pose=Pose(R, -R @ centers[t]),
                inliers=0,
                residual=float(flat[n]),
                rotation_index=r,
                translation_index=t,
            )
        )
    return out


# ---------------------------------------------------------------------------
# batched internals


def _arc_arrays(arcs):
    """Stack arcs into (S, E, N, C) arrays; all empty for no arcs."""
    if not arcs:
        z = np.zeros((0, 3))
        return z, z, z, np.zeros(0)
    S = np.array([a.s.xyz for a in arcs])
    E = np.array([a.e.xyz for a in arcs])
    N = np.cross(S, E)
    N /= np.linalg.norm(N, axis=1, keepdims=True)
    C = np.sum(S * E, axis=1)
    return S, E, N, C


def _field_over_arcs(X: np.ndarray, arcs) -> np.ndarray:
    """Exact per-point min distance to a fixed arc list (pi when empty)."""
    if not arcs:
        return np.full(X.shape[0], _EMPTY_FIELD)
    S, E, N, C = _arc_arrays(arcs)
    XS = X @ S.T
    XE = X @ E.T
    XN = X @ N.T
    in_q = (XS - C[None, :] * XE >= 0.0) & (XE - C[None, :] * XS >= 0.0)
    d_line = np.arcsin(np.minimum(np.abs(XN), 1.0))
    d_end = np.minimum(
        np.arccos(np.clip(XS, -1.0, 1.0)), np.arccos(np.clip(XE, -1.0, 1.0))
    )
    return np.min(np.where(in_q, d_line, d_end), axis=1)


def _split_batched(A, B, labels):
    """Vectorized projection of camera-frame 3D segments into arcs.

    Mirrors geometry.project_segment: pieces subtending more than pi/2 or
    numerically degenerate are bisected in 3D up to a depth cap; pieces
    still bad at the cap are dropped.

    Args:
        A, B: (n, 3) camera-frame endpoints.
        labels: (n,) integer labels carried through the splitting.

    Returns:
        (P_s, P_e, labels_out, normals) for the surviving arcs.
    """
    max_arc_cos = math.cos(math.pi / 2)
    out_s, out_e, out_lab, out_n = [], [], [], []
    depth = _MAX_BISECTIONS
    while A.shape[0]:
        na = np.linalg.norm(A, axis=1)
        nb = np.linalg.norm(B, axis=1)
        ok_center = (na > CAMERA_CENTER_TOL) & (nb > CAMERA_CENTER_TOL)
        pa = np.where(ok_center[:, None], A, 1.0) / np.where(
            ok_center[:, None], na[:, None], 1.0
        )
        pb = np.where(ok_center[:, None], B, 1.0) / np.where(
            ok_center[:, None], nb[:, None], 1.0
        )
        cross = np.cross(pa, pb)
        cn = np.linalg.norm(cross, axis=1)
        dot = np.sum(pa * pb, axis=1)
        # dot < cos(max_arc) <=> angle > max_arc; exact for max_arc = pi/2.
        good = ok_center & (cn > CROSS_NORM_TOL) & (dot >= max_arc_cos)
        # Radial pieces (coincident projections) have point images; drop.
        drop = ok_center & (cn <= CROSS_NORM_TOL) & (dot > 0.0)
        if np.any(good):
            out_s.append(pa[good])
            out_e.append(pb[good])
            out_lab.append(labels[good])
            out_n.append(cross[good] / cn[good][:, None])
        if depth == 0:
            break
        split = ~good & ~drop
        if not np.any(split):
            break
        As, Bs = A[split], B[split]
        M = 0.5 * (As + Bs)
        A = np.concatenate([As, M])
        B = np.concatenate([M, Bs])
        labels = np.concatenate([labels[split], labels[split]])
        depth -= 1
    if not out_s:
        z = np.zeros((0, 3))
        return z, z, np.zeros(0, dtype=labels.dtype), z
    return (
        np.concatenate(out_s),
        np.concatenate(out_e),
        np.concatenate(out_lab),
        np.concatenate(out_n),
    )


def _fields_for_blocks(X, S, E, N, C, labels, n_blocks):
    """Distance fields for label blocks: (n_points, n_blocks), pi if empty.

    Two monotone surrogate layers are reduced per block and only the
    winners converted to radians with the exact branch formulas, keeping
    results bit-compatible with the scalar path.
    """
    n_q = X.shape[0]
    fields = np.full((n_q, n_blocks), _EMPTY_FIELD)
    if S.shape[0] == 0:
        return fields
    order = np.argsort(labels, kind="stable")
    S, E, N, C, labels = S[order], E[order], N[order], C[order], labels[order]

    XS = X @ S.T
    XE = X @ E.T
    XN = np.abs(X @ N.T)
    in_q = (XS - C[None, :] * XE >= 0.0) & (XE - C[None, :] * XS >= 0.0)
    # Great-circle branch: distance arcsin|x.n| grows with |x.n|, so the
    # nearest in-quadrilateral arc has the minimum |x.n| (sentinel 2).
    # Endpoint branch: distance arccos(max dot) shrinks as the dot grows,
    # so the nearest arc has the maximum endpoint dot (sentinel -2).
    v = np.where(in_q, XN, 2.0)
    u = np.where(in_q, -2.0, np.maximum(XS, XE))

    blocks, starts = np.unique(labels, return_index=True)
    v_min = np.minimum.reduceat(v, starts, axis=1)
    u_max = np.maximum.reduceat(u, starts, axis=1)
    d_v = np.where(
        v_min < 1.5, np.arcsin(np.minimum(v_min, 1.0)), np.inf
    )
    d_u = np.where(
        u_max > -1.5, np.arccos(np.clip(u_max, -1.0, 1.0)), np.inf
    )
    fields[:, blocks] = np.minimum(d_v, d_u)
    return fields


def _evaluate_rotation(X, query, line_map, hyp, centers, cfg):
    """Inlier counts and scores for one rotation across all translations.

    Returns:
        (counts (Nt,) int, scores (Nt,) float). For inlier_count the score
        is the mean inlier residual (pi with zero inliers); for other loss
        kinds it is the loss itself.
    """
    if cfg.decompose:
        groups2 = assign_lines_2d(query, hyp.triplet_2d, cfg.line_tol)
        groups3 = assign_lines_3d(line_map, hyp.triplet_3d, cfg.line_tol)
    else:
        groups2 = [list(query.arcs)]
        groups3 = [list(line_map.segments)]
    n_g = len(groups2)

    f2 = np.stack([_field_over_arcs(X, g) for g in groups2])  # (n_g, Nq)

    seg_s, seg_e, seg_g = [], [], []
    for g, segs in enumerate(groups3):
        for s in segs:
            seg_s.append(s.s)
            seg_e.append(s.e)
            seg_g.append(g)
    seg_s = np.array(seg_s) if seg_s else np.zeros((0, 3))
    seg_e = np.array(seg_e) if seg_e else np.zeros((0, 3))
    seg_g = np.array(seg_g, dtype=int)

    n_t = centers.shape[0]
    n_q = X.shape[0]
    counts = np.zeros(n_t, dtype=int)
    scores = np.zeros(n_t)

    n_seg = max(1, seg_s.shape[0])
    chunk = max(1, _ARCS_PER_CHUNK // n_seg)
    RT = hyp.R.T
    for t0 in range(0, n_t, chunk):
        t1 = min(n_t, t0 + chunk)
        nt = t1 - t0
        if seg_s.shape[0]:
            Rc = centers[t0:t1] @ RT  # (nt, 3)
            A = (seg_s @ RT)[None, :, :] - Rc[:, None, :]
            B = (seg_e @ RT)[None, :, :] - Rc[:, None, :]
            # Composite block label: local translation index * n_g + group.
            lab = (
                np.repeat(np.arange(nt), seg_s.shape[0]) * n_g
                + np.tile(seg_g, nt)
            )
            S, E, L, N = _split_batched(
                A.reshape(-1, 3), B.reshape(-1, 3), lab
            )
            C = np.sum(S * E, axis=1)
            f3 = _fields_for_blocks(X, S, E, N, C, L, nt * n_g)
        else:
            f3 = np.full((n_q, nt * n_g), _EMPTY_FIELD)
        f3 = f3.reshape(n_q, nt, n_g).transpose(1, 2, 0)  # (nt, n_g, Nq)
        diff = np.abs(f3 - f2[None, :, :])
        inl = diff < cfg.tau
        c = inl.sum(axis=(1, 2))
        counts[t0:t1] = c
        if cfg.loss_kind == "inlier_count":
            rsum = np.where(inl, diff, 0.0).sum(axis=(1, 2))
            scores[t0:t1] = np.where(c > 0, rsum / np.maximum(c, 1), math.pi)
        elif cfg.loss_kind == "l1":
            scores[t0:t1] = diff.sum(axis=(1, 2))
        elif cfg.loss_kind == "l2":
            scores[t0:t1] = (diff**2).sum(axis=(1, 2))
        elif cfg.loss_kind == "huber":
            delta = cfg.tau
            h = np.where(
                diff <= delta,
                0.5 * diff**2,
                delta * (diff - 0.5 * delta),
            )
            scores[t0:t1] = h.sum(axis=(1, 2))
        elif cfg.loss_kind == "median":
            scores[t0:t1] = np.median(diff, axis=2).sum(axis=1)
    return counts, scores


def _sample_along_arcs(S, E, C, spacing_deg: float = 1.0) -> np.ndarray:
    """Points along each arc at the given angular spacing (incl. endpoints)."""
    if S.shape[0] == 0:
        return np.zeros((0, 3))
    ang = np.arccos(np.clip(C, -1.0, 1.0))
    n = np.maximum(2, np.ceil(np.degrees(ang) / spacing_deg).astype(int) + 1)
    arc_idx = np.repeat(np.arange(S.shape[0]), n)
    # Per-sample parameter in [0, 1] along its arc.
    u = np.concatenate([np.linspace(0.0, 1.0, k) for k in n])
    a = ang[arc_idx]
    sin_a = np.sin(a)
    w_s = np.sin((1.0 - u) * a) / sin_a
    w_e = np.sin(u * a) / sin_a
    pts = w_s[:, None] * S[arc_idx] + w_e[:, None] * E[arc_idx]
    return pts / np.linalg.norm(pts, axis=1, keepdims=True)


def _min_point_to_arcs(P, S, E, N, C) -> np.ndarray:
    """Min distance from each point to an arc set (pi for the empty set)."""
    if S.shape[0] == 0:
        return np.full(P.shape[0], _EMPTY_FIELD)
    XS = P @ S.T
    XE = P @ E.T
    XN = P @ N.T
    in_q = (XS - C[None, :] * XE >= 0.0) & (XE - C[None, :] * XS >= 0.0)
    d_line = np.arcsin(np.minimum(np.abs(XN), 1.0))
    d_end = np.minimum(
        np.arccos(np.clip(XS, -1.0, 1.0)), np.arccos(np.clip(XE, -1.0, 1.0))
    )
    return np.min(np.where(in_q, d_line, d_end), axis=1)
