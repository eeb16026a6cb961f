"""Exact primitives on the unit sphere.

Points, arcs and poses are small immutable wrappers around float64 numpy
arrays. The camera convention is fixed everywhere: a pose (R, t) maps world
coordinates into the camera frame, x_cam = R @ x_world + t.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateProjection, PointAtCameraCenter

UNIT_NORM_TOL = 1e-9
CROSS_NORM_TOL = 1e-8
CAMERA_CENTER_TOL = 1e-6
ROTATION_TOL = 1e-8

# Recursion cap for segment projection. Pieces that stay degenerate at this
# depth (camera on or numerically at the line) are dropped.
_MAX_BISECTIONS = 32


def _as_vec3(v) -> np.ndarray:
    a = np.asarray(v, dtype=float)
    if a.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class UnitVector:
    """Point on the unit sphere; normalized at construction."""

    xyz: np.ndarray = field(repr=False)

    def __init__(self, x, y=None, z=None):
        if y is None:
            v = _as_vec3(x).copy()
        else:
            v = np.array([x, y, z], dtype=float)
        n = np.linalg.norm(v)
        if n < 1e-12:
            raise ValueError("cannot normalize the zero vector")
        # Already-unit input is kept bit-for-bit (construction idempotent,
        # serialization round-trips exactly); the invariant allows 1e-9.
        if abs(n - 1.0) > UNIT_NORM_TOL:
            v = v / n
        object.__setattr__(self, "xyz", v)
        self.xyz.flags.writeable = False

    @property
    def x(self) -> float:
        return float(self.xyz[0])

    @property
    def y(self) -> float:
        return float(self.xyz[1])

    @property
    def z(self) -> float:
        return float(self.xyz[2])

    def __repr__(self):
        return f"UnitVector({self.x:.6g}, {self.y:.6g}, {self.z:.6g})"


@dataclass(frozen=True)
class Arc2D:
    """Minor great-circle arc between two sphere points s and e.

    Degenerate arcs (coincident or antipodal endpoints, cross-product norm
    <= 1e-8) are rejected; the subtended angle is always in (0, pi).
    """

    s: UnitVector
    e: UnitVector

    def __post_init__(self):
        c = np.cross(self.s.xyz, self.e.xyz)
        if np.linalg.norm(c) <= CROSS_NORM_TOL:
            raise DegenerateProjection(
                "arc endpoints are coincident or antipodal"
            )

    @property
    def normal(self) -> np.ndarray:
        """Unit normal of the arc's great-circle plane, (s x e)/|s x e|."""
        c = np.cross(self.s.xyz, self.e.xyz)
        return c / np.linalg.norm(c)

    @property
    def angle(self) -> float:
        """Subtended angle arccos<s,e> in (0, pi)."""
        return float(
            np.arccos(np.clip(np.dot(self.s.xyz, self.e.xyz), -1.0, 1.0))
        )


@dataclass(frozen=True)
class Segment3D:
    """Metric 3D line segment with strictly positive length."""

    s: np.ndarray = field(repr=False)
    e: np.ndarray = field(repr=False)

    def __init__(self, s, e):
        object.__setattr__(self, "s", _as_vec3(s).copy())
        object.__setattr__(self, "e", _as_vec3(e).copy())
        if np.linalg.norm(self.e - self.s) <= 0.0:
            raise ValueError("segment endpoints coincide")
        self.s.flags.writeable = False
        self.e.flags.writeable = False

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.e - self.s))

    @property
    def direction(self) -> np.ndarray:
        d = self.e - self.s
        return d / np.linalg.norm(d)

    def __repr__(self):
        return f"Segment3D({self.s.tolist()}, {self.e.tolist()})"


@dataclass(frozen=True)
class Pose:
    """Rigid camera-from-world transform: x_cam = R @ x_world + t."""

    R: np.ndarray = field(repr=False)
    t: np.ndarray = field(repr=False)

    def __init__(self, R, t):
        Rm = np.asarray(R, dtype=float)
        if Rm.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {Rm.shape}")
        if np.max(np.abs(Rm.T @ Rm - np.eye(3))) > ROTATION_TOL:
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(Rm) - 1.0) > ROTATION_TOL:
            raise ValueError("rotation has det != +1")
        object.__setattr__(self, "R", Rm.copy())
        object.__setattr__(self, "t", _as_vec3(t).copy())
        self.R.flags.writeable = False
        self.t.flags.writeable = False

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_camera_center(cls, R, center) -> "Pose":
        """Pose with the camera located at `center` in world coordinates."""
        Rm = np.asarray(R, dtype=float)
        return cls(Rm, -Rm @ _as_vec3(center))

    @property
    def camera_center(self) -> np.ndarray:
        """Camera position in world coordinates, -R^T t."""
        return -self.R.T @ self.t

    def __repr__(self):
        return f"Pose(R={self.R.tolist()}, t={self.t.tolist()})"


def in_quadrilateral(x: UnitVector, l: Arc2D) -> bool:
    """Test whether x lies in the spherical quadrilateral of the arc.

    The quadrilateral has vertices {s, e, +-n} where n is the arc's
    great-circle pole. Membership is equivalent to the great-circle
    projection of x falling on the minor arc between s and e; boundary
    points count as inside.
    """
    xs = float(np.dot(x.xyz, l.s.xyz))
    xe = float(np.dot(x.xyz, l.e.xyz))
    c = float(np.dot(l.s.xyz, l.e.xyz))
    # x_proj ~ alpha*s + beta*e with alpha, beta >= 0 iff these hold.
    return (xs - c * xe >= 0.0) and (xe - c * xs >= 0.0)


def arc_distance(x: UnitVector, l: Arc2D) -> float:
    """Spherical distance from a point to a line segment on the sphere.

    Inside the arc's quadrilateral the distance is to the great circle,
    arcsin|<x, n>|; outside it is the smaller of the two endpoint
    distances, computed in the chord form 2 asin(|x - v|/2) which stays
    accurate down to zero. Result is in [0, pi].
    """
    if in_quadrilateral(x, l):
        return float(np.arcsin(min(abs(float(np.dot(x.xyz, l.normal))), 1.0)))
    ds = 2.0 * math.asin(min(1.0, 0.5 * float(np.linalg.norm(x.xyz - l.s.xyz))))
    de = 2.0 * math.asin(min(1.0, 0.5 * float(np.linalg.norm(x.xyz - l.e.xyz))))
    return float(min(ds, de))


def project_point(p, pose: Pose) -> UnitVector:
    """Spherical projection of a world point into the camera frame.

    Raises:
        PointAtCameraCenter: if ||R p + t|| <= 1e-6.
    """
    v = pose.R @ _as_vec3(p) + pose.t
    n = np.linalg.norm(v)
    if n <= CAMERA_CENTER_TOL:
        raise PointAtCameraCenter("point projects onto the camera center")
    return UnitVector(v / n)


def project_segment(
    seg: Segment3D, pose: Pose, max_arc: float = math.pi / 2
) -> list[Arc2D]:
    """Project a 3D segment to one or more arcs on the unit sphere.

    The endpoint pair is projected; whenever the projected pair subtends
    more than max_arc (or is numerically degenerate) the 3D segment is
    bisected and the halves projected recursively, so every returned arc
    subtends <= max_arc and their union is the image of the segment.
    Pieces that stay degenerate at the recursion cap (the segment passes
    through or grazes the camera center) are dropped.

    Raises:
        PointAtCameraCenter: if an original endpoint is at the center.
    """
    # Precondition on the original endpoints only; interior degeneracies
    # are handled by dropping the offending pieces.
    project_point(seg.s, pose)
    project_point(seg.e, pose)

    out: list[Arc2D] = []
    # Camera-frame endpoints; bisection commutes with the rigid transform.
    a = pose.R @ seg.s + pose.t
    b = pose.R @ seg.e + pose.t
    stack = [(a, b, _MAX_BISECTIONS)]
    while stack:
        a, b, depth = stack.pop()
        na = np.linalg.norm(a)
        nb = np.linalg.norm(b)
        if na <= CAMERA_CENTER_TOL or nb <= CAMERA_CENTER_TOL:
            if depth > 0:
                m = 0.5 * (a + b)
                stack.append(((m, b, depth - 1)))
                stack.append(((a, m, depth - 1)))
            continue
        pa = a / na
        pb = b / nb
        dot = float(np.dot(pa, pb))
        cross_norm = np.linalg.norm(np.cross(pa, pb))
        if cross_norm <= CROSS_NORM_TOL and dot > 0.0:
            # Radial piece: both endpoints project to one direction, the
            # image is a point. Splitting cannot change that; drop it.
            continue
        angle = np.arccos(np.clip(dot, -1.0, 1.0))
        if cross_norm <= CROSS_NORM_TOL or angle > max_arc:
            if depth > 0:
                m = 0.5 * (a + b)
                stack.append(((m, b, depth - 1)))
                stack.append(((a, m, depth - 1)))
            continue
        out.append(Arc2D(UnitVector(pa), UnitVector(pb)))
    # The stack pops halves in (first, second) order; keep arcs in
    # traversal order along the segment for deterministic output.
    return out


def rotation_angle(Ra, Rb) -> float:
    """Relative rotation angle between two rotation matrices, in degrees.

    Computes arccos((trace(Ra^T Rb) - 1) / 2) in its atan2 form, which
    stays well-conditioned near 0 and 180 degrees.
    """
    Ra = np.asarray(Ra, dtype=float)
    Rb = np.asarray(Rb, dtype=float)
    M = Ra.T @ Rb
    cos_t = (np.trace(M) - 1.0) / 2.0
    sin_t = 0.5 * math.sqrt(
        (M[2, 1] - M[1, 2]) ** 2
        + (M[0, 2] - M[2, 0]) ** 2
        + (M[1, 0] - M[0, 1]) ** 2
    )
    return float(np.degrees(math.atan2(sin_t, cos_t)))


def rotation_about_axis(axis, angle_rad: float) -> np.ndarray:
    """Rodrigues rotation matrix about a (not necessarily unit) axis."""
    a = _as_vec3(axis)
    n = np.linalg.norm(a)
    if n < 1e-12:
        raise ValueError("rotation axis is the zero vector")
    a = a / n
    K = np.array(
        [[0.0, -a[2], a[1]], [a[2], 0.0, -a[0]], [-a[1], a[0], 0.0]]
    )
    return np.eye(3) + math.sin(angle_rad) * K + (1.0 - math.cos(angle_rad)) * (K @ K)


def yaw_pitch_roll(yaw: float, pitch: float, roll: float) -> np.ndarray:
    """Rotation from yaw (about z), pitch (about y), roll (about x), radians."""
    return (
        rotation_about_axis([0.0, 0.0, 1.0], yaw)
        @ rotation_about_axis([0.0, 1.0, 0.0], pitch)
        @ rotation_about_axis([1.0, 0.0, 0.0], roll)
    )
