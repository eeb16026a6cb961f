"""Line-proximity keypoint filtering.

Only keypoints near line segments are retained for sharing: far-from-line
features (typically objects, people, clutter) are removed before leaving
the client. 2D distances are spherical (point to arc), 3D distances are
Euclidean (point to segment).
"""

from __future__ import annotations

import numpy as np

from .geometry import Arc2D, Segment3D, UnitVector, arc_distance

DEFAULT_LAMBDA_2D = 0.05  # radians
DEFAULT_LAMBDA_3D = 0.1  # meters


def filter_keypoints_2d(
    keypoints, arcs, lambda_2d: float = DEFAULT_LAMBDA_2D
) -> list[tuple[UnitVector, int]]:
    """Keep keypoints within lambda_2d radians of the nearest arc.

    Order is preserved; with no arcs nothing is kept.
    """
    if lambda_2d <= 0:
        raise ValueError("lambda_2d must be > 0")
    arcs = list(arcs)
    out = []
    for kp, kp_id in keypoints:
        if arcs and min(arc_distance(kp, a) for a in arcs) <= lambda_2d:
            out.append((kp, kp_id))
    return out


def filter_keypoints_3d(
    keypoints, segments, lambda_3d: float = DEFAULT_LAMBDA_3D
) -> list[tuple[np.ndarray, int]]:
    """Keep keypoints within lambda_3d meters of the nearest segment."""
    if lambda_3d <= 0:
        raise ValueError("lambda_3d must be > 0")
    segments = list(segments)
    out = []
    for kp, kp_id in keypoints:
        p = np.asarray(kp, dtype=float)
        if segments and min(
            point_segment_distance(p, s) for s in segments
        ) <= lambda_3d:
            out.append((kp, kp_id))
    return out


def point_segment_distance(p: np.ndarray, seg: Segment3D) -> float:
    """Euclidean distance from a point to a 3D segment."""
    d = seg.e - seg.s
    t = float(np.dot(p - seg.s, d) / np.dot(d, d))
    t = min(1.0, max(0.0, t))
    return float(np.linalg.norm(p - (seg.s + t * d)))


def restrict_arcs_to_principal(
    arcs, principal_directions, tol: float
) -> list[Arc2D]:
    """Arcs whose great circle passes through a principal direction.

    Used by the privacy variant that only shares structural lines:
    membership is |arcsin<n, p>| < tol for the arc-plane normal n.
    """
    out = []
    for a in arcs:
        n = a.normal
        for p in principal_directions:
            pv = p.xyz if isinstance(p, UnitVector) else np.asarray(p, float)
            if abs(np.arcsin(np.clip(float(n @ pv), -1.0, 1.0))) < tol:
                out.append(a)
                break
    return out
