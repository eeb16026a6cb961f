"""Line-set containers and length-based filtering.

3D lines are filtered against a threshold derived from the map bounding
box; 2D lines are then filtered by subtended angle so that the removal
rates match.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyAfterFilter
from .geometry import Arc2D, Segment3D, UnitVector


@dataclass(frozen=True)
class LineMap3D:
    """3D line map: segments, bounding box, and optional keypoints.

    Keypoints are (position, id) pairs used only by refinement and the
    privacy filter.
    """

    segments: tuple[Segment3D, ...]
    bbox_min: np.ndarray = field(repr=False)
    bbox_max: np.ndarray = field(repr=False)
    keypoints: tuple[tuple[np.ndarray, int], ...] = ()

    def __init__(self, segments, bbox_min, bbox_max, keypoints=()):
        object.__setattr__(self, "segments", tuple(segments))
        lo = np.asarray(bbox_min, dtype=float).copy()
        hi = np.asarray(bbox_max, dtype=float).copy()
        if lo.shape != (3,) or hi.shape != (3,):
            raise ValueError("bbox corners must be 3-vectors")
        if not np.all(hi - lo > 0.0):
            raise ValueError("bbox extents must be strictly positive")
        for seg in self.segments:
            for p in (seg.s, seg.e):
                if np.any(p < lo - 1e-9) or np.any(p > hi + 1e-9):
                    raise ValueError("segment endpoint outside bbox")
        object.__setattr__(self, "bbox_min", lo)
        object.__setattr__(self, "bbox_max", hi)
        object.__setattr__(
            self,
            "keypoints",
            tuple((np.asarray(p, dtype=float).copy(), int(i)) for p, i in keypoints),
        )
        lo.flags.writeable = False
        hi.flags.writeable = False

    @classmethod
    def from_segments(cls, segments, keypoints=(), pad: float = 1e-6) -> "LineMap3D":
        """Build a map with the tight (slightly padded) bbox of the segments."""
        segments = tuple(segments)
        if not segments:
            raise ValueError("cannot infer a bbox from zero segments")
        pts = np.array([p for s in segments for p in (s.s, s.e)])
        lo = pts.min(axis=0) - pad
        hi = pts.max(axis=0) + pad
        return cls(segments, lo, hi, keypoints)

    @property
    def extents(self) -> np.ndarray:
        return self.bbox_max - self.bbox_min


@dataclass(frozen=True)
class QueryLines2D:
    """2D observation: arcs on the query sphere plus optional keypoints."""

    arcs: tuple[Arc2D, ...]
    keypoints: tuple[tuple[UnitVector, int], ...] = ()

    def __init__(self, arcs, keypoints=()):
        object.__setattr__(self, "arcs", tuple(arcs))
        object.__setattr__(
            self, "keypoints", tuple((d, int(i)) for d, i in keypoints)
        )


def filter_lines_3d(
    line_map: LineMap3D, lam: float = 0.1
) -> tuple[LineMap3D, float]:
    """Drop 3D segments shorter than lam * (bx + by + bz) / 3.

    Returns:
        (filtered map, fraction of segments removed).

    Raises:
        EmptyAfterFilter: if nothing survives.
    """
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    threshold = lam * float(np.sum(line_map.extents)) / 3.0
    kept = [s for s in line_map.segments if s.length >= threshold]
    n = len(line_map.segments)
    if not kept:
        raise EmptyAfterFilter(
            f"no 3D segment reaches the length threshold {threshold:.3g} m"
        )
    removed_fraction = (n - len(kept)) / n if n else 0.0
    filtered = LineMap3D(
        kept, line_map.bbox_min, line_map.bbox_max, line_map.keypoints
    )
    return filtered, removed_fraction


def filter_lines_2d(
    query: QueryLines2D, target_removed_fraction: float
) -> QueryLines2D:
    """Remove the shortest arcs to match a 3D removal rate.

    Arcs are ranked by subtended angle; the shortest
    floor(fraction * N) are removed, ties broken by input order
    (earlier-listed arcs removed first).
    """
    if not 0.0 <= target_removed_fraction < 1.0:
        raise ValueError("target_removed_fraction must be in [0, 1)")
    n = len(query.arcs)
    # Epsilon guards floor against rates like 1/3 that are not exact doubles.
    n_remove = int(math.floor(target_removed_fraction * n + 1e-9))
    if n_remove == 0:
        return query
    order = sorted(range(n), key=lambda i: (query.arcs[i].angle, i))
    removed = set(order[:n_remove])
    kept = [a for i, a in enumerate(query.arcs) if i not in removed]
    return QueryLines2D(kept, query.keypoints)
