"""Synthetic scene generation and query rendering.

Replaces datasets and detectors for desk-scale validation: scenes are
axis-aligned wireframe rooms with controllable clutter, and queries are
rendered by projecting the map at a pose with configurable endpoint
noise, arc dropping and outlier injection. All randomness derives from
the single seed in SimConfig.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CameraOnLine
from .geometry import (
    Arc2D,
    Pose,
    Segment3D,
    UnitVector,
    project_segment,
    rotation_about_axis,
)
from .lines import LineMap3D, QueryLines2D

SCENE_KINDS = ("box_room", "manhattan_multi_room", "dense_parallel", "rot_symmetric")

_CAMERA_CLEARANCE = 1e-6


@dataclass(frozen=True)
class SimConfig:
    """Scene and rendering parameters; `seed` drives all randomness."""

    scene_kind: str = "box_room"
    extents: tuple[float, float, float] = (8.0, 6.0, 3.0)
    n_clutter_lines: int = 12
    endpoint_noise: float = 0.0
    outlier_arcs: float = 0.0
    drop_fraction: float = 0.0
    seed: int = 0
    n_marker_lines: int = 3

    def __post_init__(self):
        if self.scene_kind not in SCENE_KINDS:
            raise ValueError(f"scene_kind must be one of {SCENE_KINDS}")
        if not all(e > 0 for e in self.extents):
            raise ValueError("extents must be positive")
        for name in ("outlier_arcs", "drop_fraction"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")


def generate_scene(cfg: SimConfig) -> LineMap3D:
    """Deterministic synthetic 3D line map for the configured scene kind.

    box_room: the 12 box edges plus axis-aligned clutter inside.
    manhattan_multi_room: 2-4 boxes in a row sharing walls.
    dense_parallel: box_room plus a tightly spaced parallel bundle
    (spacing <= 0.2 m) that makes one-to-one line matching ambiguous.
    rot_symmetric: a scene invariant under 90-degree yaw except for
    n_marker_lines asymmetric marker segments.
    """
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0]))
    ex, ey, ez = cfg.extents
    if cfg.scene_kind == "box_room":
        lo = np.array([-ex / 2, -ey / 2, -ez / 2])
        hi = -lo
        segs = _box_edges(lo, hi)
        segs += _axis_aligned_clutter(rng, lo, hi, cfg.n_clutter_lines)
        return LineMap3D(segs, lo, hi)

    if cfg.scene_kind == "manhattan_multi_room":
        n_rooms = int(rng.integers(2, 5))
        segs = []
        for i in range(n_rooms):
            lo = np.array([i * ex - ex / 2, -ey / 2, -ez / 2])
            hi = lo + np.array([ex, ey, ez])
            segs += _box_edges(lo, hi)
            segs += _axis_aligned_clutter(
                rng, lo, hi, cfg.n_clutter_lines // n_rooms
            )
        segs = _dedupe_segments(segs)
        lo = np.array([-ex / 2, -ey / 2, -ez / 2])
        hi = np.array([(n_rooms - 0.5) * ex, ey / 2, ez / 2])
        return LineMap3D(segs, lo, hi)

    if cfg.scene_kind == "dense_parallel":
        lo = np.array([-ex / 2, -ey / 2, -ez / 2])
        hi = -lo
        segs = _box_edges(lo, hi)
        segs += _axis_aligned_clutter(rng, lo, hi, cfg.n_clutter_lines)
        # Vertical bundle along one wall, spacing well under 0.2 m.
        n_bundle = 12
        spacing = min(0.15, 0.8 * ex / n_bundle)
        x0 = -spacing * (n_bundle - 1) / 2
        y_wall = hi[1] - 1e-3
        for i in range(n_bundle):
            x = x0 + i * spacing
            segs.append(
                Segment3D(
                    [x, y_wall, lo[2] + 0.1 * ez], [x, y_wall, hi[2] - 0.1 * ez]
                )
            )
        return LineMap3D(segs, lo, hi)

    # rot_symmetric: square the footprint so 90-degree yaw is exact.
    e = min(ex, ey)
    lo = np.array([-e / 2, -e / 2, -ez / 2])
    hi = -lo
    segs = _box_edges(lo, hi)
    base = _axis_aligned_clutter(rng, lo, hi, max(0, cfg.n_clutter_lines) // 4)
    yaw90 = rotation_about_axis([0.0, 0.0, 1.0], math.pi / 2)
    for seg in base:
        for k in range(4):
            Rk = np.linalg.matrix_power(yaw90, k) if k else np.eye(3)
            segs.append(Segment3D(Rk @ seg.s, Rk @ seg.e))
    # Markers are vertical and asymmetrically placed: the only symmetry
    # breakers, concentrated in the sparsest direction family.
    for _ in range(max(0, cfg.n_marker_lines)):
        x = rng.uniform(lo[0] + 0.1 * e, hi[0] - 0.1 * e)
        y = rng.uniform(lo[1] + 0.1 * e, hi[1] - 0.1 * e)
        z0 = rng.uniform(lo[2] + 0.05 * ez, lo[2] + 0.25 * ez)
        z1 = rng.uniform(hi[2] - 0.25 * ez, hi[2] - 0.05 * ez)
        segs.append(Segment3D([x, y, z0], [x, y, z1]))
    return LineMap3D(segs, lo, hi)


def render_query(line_map: LineMap3D, pose: Pose, cfg: SimConfig) -> QueryLines2D:
    """Render the 2D line observation of a map at a pose.

    Projects every segment, drops a random drop_fraction of the arcs,
    perturbs arc endpoints in their tangent planes (per-axis std =
    endpoint_noise radians) and appends round(outlier_arcs * N) random
    arcs with extents between 5 and 60 degrees. Deterministic under
    cfg.seed.

    Raises:
        CameraOnLine: a map segment passes through the camera center.
    """
    center = pose.camera_center
    for seg in line_map.segments:
        if _point_segment_distance(center, seg.s, seg.e) <= _CAMERA_CLEARANCE:
            raise CameraOnLine("a map segment passes through the camera center")

    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1]))
    arcs: list[Arc2D] = []
    for seg in line_map.segments:
        arcs.extend(project_segment(seg, pose))

    n = len(arcs)
    n_drop = int(round(cfg.drop_fraction * n))
    if n_drop > 0:
        dropped = set(rng.choice(n, size=n_drop, replace=False).tolist())
        arcs = [a for i, a in enumerate(arcs) if i not in dropped]

    if cfg.endpoint_noise > 0:
        noisy = []
        for a in arcs:
            s = _perturb(rng, a.s.xyz, cfg.endpoint_noise)
            e = _perturb(rng, a.e.xyz, cfg.endpoint_noise)
            if np.linalg.norm(np.cross(s, e)) > 1e-8:
                noisy.append(Arc2D(UnitVector(s), UnitVector(e)))
        arcs = noisy

    n_out = int(round(cfg.outlier_arcs * n))
    for _ in range(n_out):
        arcs.append(_random_arc(rng))

    return QueryLines2D(arcs)


# ---------------------------------------------------------------------------


def _box_edges(lo: np.ndarray, hi: np.ndarray) -> list[Segment3D]:
    x0, y0, z0 = lo
    x1, y1, z1 = hi
    c = [
        (x0, y0, z0), (x1, y0, z0), (x1, y1, z0), (x0, y1, z0),
        (x0, y0, z1), (x1, y0, z1), (x1, y1, z1), (x0, y1, z1),
    ]
    pairs = [
        (0, 1), (1, 2), (2, 3), (3, 0),
        (4, 5), (5, 6), (6, 7), (7, 4),
        (0, 4), (1, 5), (2, 6), (3, 7),
    ]
    return [Segment3D(c[i], c[j]) for i, j in pairs]


def _axis_aligned_clutter(rng, lo, hi, n: int) -> list[Segment3D]:
    """Random axis-parallel interior segments (doors, shelves, frames)."""
    ext = hi - lo
    mean_ext = float(np.sum(ext)) / 3.0
    out = []
    for _ in range(max(0, n)):
        axis = int(rng.integers(0, 3))
        length = float(rng.uniform(0.25, 0.6) * mean_ext)
        length = min(length, 0.9 * ext[axis])
        start = np.array(
            [
                rng.uniform(lo[k] + 0.05 * ext[k], hi[k] - 0.05 * ext[k] - (length if k == axis else 0.0))
                for k in range(3)
            ]
        )
        end = start.copy()
        end[axis] += length
        out.append(Segment3D(start, end))
    return out


def _dedupe_segments(segs: list[Segment3D]) -> list[Segment3D]:
    seen = set()
    out = []
    for s in segs:
        a = tuple(np.round(s.s, 9))
        b = tuple(np.round(s.e, 9))
        key = (a, b) if a <= b else (b, a)
        if key not in seen:
            seen.add(key)
            out.append(s)
    return out


def _perturb(rng, v: np.ndarray, sigma: float) -> np.ndarray:
    helper = (
        np.array([0.0, 0.0, 1.0]) if abs(v[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    )
    t1 = np.cross(helper, v)
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(v, t1)
    eta = rng.normal(0.0, sigma, size=2)
    out = v + eta[0] * t1 + eta[1] * t2
    return out / np.linalg.norm(out)


def _random_arc(rng) -> Arc2D:
    """Arc on a random great circle with extent uniform in [5, 60] degrees."""
    while True:
        u = rng.normal(size=3)
        nu = np.linalg.norm(u)
        if nu > 1e-6:
            u = u / nu
            break
    t1, _ = _tangent_pair(u)
    t2 = np.cross(u, t1)
    theta0 = rng.uniform(0.0, 2.0 * math.pi)
    extent = math.radians(rng.uniform(5.0, 60.0))
    s = math.cos(theta0) * t1 + math.sin(theta0) * t2
    e = math.cos(theta0 + extent) * t1 + math.sin(theta0 + extent) * t2
    return Arc2D(UnitVector(s), UnitVector(e))


def _tangent_pair(v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    helper = (
        np.array([0.0, 0.0, 1.0]) if abs(v[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    )
    t1 = np.cross(helper, v)
    t1 /= np.linalg.norm(t1)
    return t1, np.cross(v, t1)


def _point_segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    d = b - a
    t = float(np.dot(p - a, d) / np.dot(d, d))
    t = min(1.0, max(0.0, t))
    return float(np.linalg.norm(p - (a + t * d)))
