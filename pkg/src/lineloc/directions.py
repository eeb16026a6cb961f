"""Principal-direction extraction and line-to-direction assignment.

2D directions are vanishing points found by voting pairwise great-circle
intersections into an icosphere grid; 3D directions come from voting the
segment directions into the same grid. Antipodal ambiguity is resolved by
canonicalizing every candidate to one hemisphere before voting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import TooFewDirections, TooFewLines
from .geometry import Arc2D, Segment3D, UnitVector
from .icosphere import SphereGrid
from .lines import LineMap3D, QueryLines2D

DEFAULT_K_2D = 20
DEFAULT_K_3D = 3
DEFAULT_GRID_LEVEL = 3
DEFAULT_ASSIGN_TOL = math.radians(10.0)

_COPLANAR_TOL = 1e-8


def canonical_hemisphere(v: np.ndarray) -> np.ndarray:
    """Flip unit vectors (rows) into the canonical hemisphere.

    Canonical means z > 0, or z == 0 and y > 0, or z == y == 0 and x > 0.
    """
    v = np.atleast_2d(np.asarray(v, dtype=float))
    sign = np.where(
        v[:, 2] != 0.0,
        np.sign(v[:, 2]),
        np.where(v[:, 1] != 0.0, np.sign(v[:, 1]), np.sign(v[:, 0])),
    )
    # sign can only be 0 for the zero vector, which unit vectors exclude.
    return v * sign[:, None]


@dataclass(frozen=True)
class PrincipalDirections2D:
    """Top vanishing points, ordered by descending vote count.

    `requested` records the k that was asked for; fewer directions are
    returned when the vote grid has fewer non-empty cells.
    """

    directions: tuple[UnitVector, ...]
    votes: tuple[int, ...]
    requested: int

    @property
    def complete(self) -> bool:
        return len(self.directions) >= self.requested

    def as_array(self) -> np.ndarray:
        return np.array([d.xyz for d in self.directions])


@dataclass(frozen=True)
class PrincipalDirections3D:
    """Top 3D line directions, ordered by descending vote count."""

    directions: tuple[UnitVector, ...]
    votes: tuple[int, ...]
    requested: int

    def as_array(self) -> np.ndarray:
        return np.array([d.xyz for d in self.directions])


def arc_normals(arcs) -> np.ndarray:
    """Great-circle plane normals of arcs, one unit row per arc."""
    if not arcs:
        return np.zeros((0, 3))
    s = np.array([a.s.xyz for a in arcs])
    e = np.array([a.e.xyz for a in arcs])
    n = np.cross(s, e)
    return n / np.linalg.norm(n, axis=1, keepdims=True)


def _top_cells(points: np.ndarray, k: int, grid: SphereGrid):
    """Vote points into grid cells; return (directions, votes) of the top k.

    The reported direction of a cell is the renormalized centroid of the
    points it received. Ordering: descending count, then ascending cell
    index for determinism.
    """
    cells = grid.cell_of(points)
    counts = np.bincount(cells, minlength=grid.n_cells)
    sums = np.zeros((grid.n_cells, 3))
    np.add.at(sums, cells, points)
    nonempty = np.flatnonzero(counts)
    order = nonempty[np.lexsort((nonempty, -counts[nonempty]))]
    top = order[:k]
    dirs = []
    for c in top:
        centroid = sums[c] / np.linalg.norm(sums[c])
        centroid = canonical_hemisphere(centroid)[0]
        dirs.append(UnitVector(centroid))
    return tuple(dirs), tuple(int(counts[c]) for c in top)


def vanishing_points_2d(
    query: QueryLines2D,
    k_2d: int = DEFAULT_K_2D,
    grid_level: int = DEFAULT_GRID_LEVEL,
) -> PrincipalDirections2D:
    """Vanishing points of the query arcs by intersection voting.

    Every unordered pair of arcs contributes the intersection point of
    their great circles (canonicalized to one hemisphere) as one vote;
    coplanar pairs cast no vote. Returns the top-k cells of the voting
    grid. When fewer than k_2d cells are non-empty, all non-empty cells
    are returned (the result's `requested` field exposes the shortfall).

    Raises:
        TooFewLines: fewer than 3 arcs.
        TooFewDirections: no arc pair intersects (all coplanar).
    """
    arcs = query.arcs
    if len(arcs) < 3:
        raise TooFewLines(f"need >= 3 arcs for vanishing points, got {len(arcs)}")
    if k_2d < 1:
        raise ValueError("k_2d must be >= 1")
    normals = arc_normals(arcs)
    ii, jj = np.triu_indices(len(arcs), k=1)
    cross = np.cross(normals[ii], normals[jj])
    norms = np.linalg.norm(cross, axis=1)
    valid = norms > _COPLANAR_TOL
    points = canonical_hemisphere(cross[valid] / norms[valid, None])
    if points.shape[0] == 0:
        raise TooFewDirections("all arc pairs are coplanar; no intersections")
    grid = SphereGrid(grid_level)
    dirs, votes = _top_cells(points, k_2d, grid)
    return PrincipalDirections2D(dirs, votes, requested=k_2d)


def directions_3d(
    line_map: LineMap3D,
    k_3d: int = DEFAULT_K_3D,
    grid_level: int = DEFAULT_GRID_LEVEL,
) -> PrincipalDirections3D:
    """Dominant 3D line directions by direction voting.

    Raises:
        TooFewDirections: fewer than k_3d non-empty cells.
    """
    if k_3d < 1:
        raise ValueError("k_3d must be >= 1")
    if len(line_map.segments) < k_3d:
        raise TooFewDirections(
            f"map has {len(line_map.segments)} segments, need >= {k_3d}"
        )
    dirs = np.array([s.direction for s in line_map.segments])
    points = canonical_hemisphere(dirs)
    grid = SphereGrid(grid_level)
    out_dirs, votes = _top_cells(points, k_3d, grid)
    if len(out_dirs) < k_3d:
        raise TooFewDirections(
            f"only {len(out_dirs)} direction cells received votes, need {k_3d}"
        )
    return PrincipalDirections3D(out_dirs, votes, requested=k_3d)


def assign_lines_2d(
    query: QueryLines2D,
    triplet,
    tol: float = DEFAULT_ASSIGN_TOL,
) -> list[list[Arc2D]]:
    """Partition arcs among three directions by vanishing-point incidence.

    An arc belongs with direction p when its great circle passes through p
    within tol, i.e. |arcsin<n, p>| < tol for the arc-plane normal n. The
    smallest residual wins when several qualify (exact ties go to the
    lower index); arcs matching no direction are excluded.
    """
    if not 0.0 < tol < math.pi / 4:
        raise ValueError("tol must be in (0, pi/4)")
    t = _triplet_array(triplet)
    groups: list[list[Arc2D]] = [[], [], []]
    if not query.arcs:
        return groups
    normals = arc_normals(query.arcs)
    resid = np.abs(np.arcsin(np.clip(normals @ t.T, -1.0, 1.0)))
    best = np.argmin(resid, axis=1)
    best_val = resid[np.arange(len(query.arcs)), best]
    for idx, arc in enumerate(query.arcs):
        if best_val[idx] < tol:
            groups[int(best[idx])].append(arc)
    return groups


def assign_lines_3d(
    line_map: LineMap3D,
    triplet,
    tol: float = DEFAULT_ASSIGN_TOL,
) -> list[list[Segment3D]]:
    """Partition segments among three directions by parallelism.

    Membership: angle between the segment direction and p, mod antipody,
    below tol. Tie and exclusion rules match assign_lines_2d.
    """
    if not 0.0 < tol < math.pi / 4:
        raise ValueError("tol must be in (0, pi/4)")
    t = _triplet_array(triplet)
    groups: list[list[Segment3D]] = [[], [], []]
    if not line_map.segments:
        return groups
    dirs = np.array([s.direction for s in line_map.segments])
    ang = np.arccos(np.clip(np.abs(dirs @ t.T), -1.0, 1.0))
    best = np.argmin(ang, axis=1)
    best_val = ang[np.arange(len(line_map.segments)), best]
    for idx, seg in enumerate(line_map.segments):
        if best_val[idx] < tol:
            groups[int(best[idx])].append(seg)
    return groups


def _triplet_array(triplet) -> np.ndarray:
    rows = []
    for d in triplet:
        rows.append(d.xyz if isinstance(d, UnitVector) else np.asarray(d, float))
    t = np.array(rows)
    if t.shape != (3, 3):
        raise ValueError("triplet must contain exactly three directions")
    return t
