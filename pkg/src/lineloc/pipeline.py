"""End-to-end localization orchestration.

Wires filtering, direction estimation, rotation enumeration, pose ranking
and (optionally) matcher-driven refinement into one call, with per-stage
wall-clock timings for benchmarking.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .directions import (
    DEFAULT_K_2D,
    DEFAULT_K_3D,
    directions_3d,
    vanishing_points_2d,
)
from .errors import NoCandidates
from .geometry import Pose
from .lines import LineMap3D, QueryLines2D, filter_lines_2d, filter_lines_3d
from .refine import RansacConfig, refine_pose
from .rotations import (
    DEFAULT_DEDUP_ANGLE_DEG,
    DEFAULT_MSE_MAX,
    enumerate_rotations,
)
from .search import (
    RankedPose,
    SearchConfig,
    chamfer_rank,
    evaluate_pool,
    select_top,
    translation_pool,
)


@dataclass
class LocalizeResult:
    """Everything the localize path produces."""

    ranked: list[RankedPose]
    refined: Pose | None = None
    refined_inliers: int = 0
    refined_error: float = float("nan")
    chosen_index: int = -1  # index into `ranked` of the most-matched candidate
    timings: dict = field(default_factory=dict)


def localize(
    line_map: LineMap3D,
    query: QueryLines2D,
    cfg: SearchConfig = SearchConfig(),
    ransac: RansacConfig = RansacConfig(),
    matcher=None,
    baseline: str | None = None,
    lam: float = 0.1,
    k_2d: int = DEFAULT_K_2D,
    k_3d: int = DEFAULT_K_3D,
    mse_max: float = DEFAULT_MSE_MAX,
    dedup_angle: float = DEFAULT_DEDUP_ANGLE_DEG,
    margin: float = 0.05,
    threads: int = 1,
    extra_translations=None,
) -> LocalizeResult:
    """Run the full candidate-search (+ optional refinement) pipeline.

    Args:
        matcher: callable (line_map, query_keypoints, candidate_pose) ->
            list of Correspondence; refinement is skipped when None. The
            candidate with the most matches is refined.
        baseline: None for the field ranker, "chamfer" for the baseline.
        extra_translations: optional (n, 3) camera centers appended to the
            grid pool (used by tests to inject the ground truth).

    Raises:
        NoCandidates: the query has no line segments.
    """
    if not query.arcs:
        raise NoCandidates("query has no line segments")
    timings: dict[str, float] = {}

    t0 = time.perf_counter()
    map_f, removed = filter_lines_3d(line_map, lam)
    query_f = filter_lines_2d(query, removed)
    timings["line_filtering"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    p2d = vanishing_points_2d(query_f, k_2d)
    p3d = directions_3d(map_f, k_3d)
    timings["direction_estimation"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    rotations = enumerate_rotations(p2d, p3d, mse_max, dedup_angle)
    timings["rotation_enumeration"] = time.perf_counter() - t0

    centers = translation_pool(map_f, cfg.n_translations, margin)
    if extra_translations is not None:
        extra = np.atleast_2d(np.asarray(extra_translations, dtype=float))
        centers = np.concatenate([centers, extra])

    t0 = time.perf_counter()
    if baseline == "chamfer":
        ranked = chamfer_rank(
            query_f, map_f, rotations, centers, cfg.top_k, threads
        )
        timings["field_computation"] = time.perf_counter() - t0
        timings["ranking"] = 0.0
    else:
        counts, scores = evaluate_pool(
            query_f, map_f, rotations, centers, cfg, threads
        )
        timings["field_computation"] = time.perf_counter() - t0
        t0 = time.perf_counter()
        ranked = select_top(counts, scores, rotations, centers, cfg)
        timings["ranking"] = time.perf_counter() - t0

    result = LocalizeResult(ranked=ranked, timings=timings)
    if matcher is None:
        return result

    t0 = time.perf_counter()
    match_sets = [
        matcher(line_map, query.keypoints, rp.pose) for rp in ranked
    ]
    best = max(range(len(ranked)), key=lambda i: (len(match_sets[i]), -i))
    pose, mask, err = refine_pose(ranked[best].pose, match_sets[best], ransac)
    timings["refinement"] = time.perf_counter() - t0
    result.refined = pose
    result.refined_inliers = int(mask.sum())
    result.refined_error = err
    result.chosen_index = best
    return result
