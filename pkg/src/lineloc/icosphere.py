"""Icosphere vertex sets: near-uniform samplings of the unit sphere.

Level 0 is the icosahedron (12 vertices); each subdivision splits every
edge at its midpoint and reprojects, giving 42, 162, 642, ... vertices.
Construction is deterministic: vertex order depends only on the level.
"""

from __future__ import annotations

import numpy as np

_PHI = (1.0 + np.sqrt(5.0)) / 2.0

# Canonical icosahedron: 12 vertices, 20 faces (indices into the vertices).
_BASE_VERTICES = np.array(
    [
        [-1.0, _PHI, 0.0],
        [1.0, _PHI, 0.0],
        [-1.0, -_PHI, 0.0],
        [1.0, -_PHI, 0.0],
        [0.0, -1.0, _PHI],
        [0.0, 1.0, _PHI],
        [0.0, -1.0, -_PHI],
        [0.0, 1.0, -_PHI],
        [_PHI, 0.0, -1.0],
        [_PHI, 0.0, 1.0],
        [-_PHI, 0.0, -1.0],
        [-_PHI, 0.0, 1.0],
    ]
)

_BASE_FACES = np.array(
    [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ],
    dtype=int,
)


def vertex_count(level: int) -> int:
    """Number of icosphere vertices at a subdivision level (12, 42, 162, ...)."""
    n, e, f = 12, 30, 20
    for _ in range(level):
        n, e, f = n + e, 2 * e + 3 * f, 4 * f
    return n


def icosphere(level: int) -> np.ndarray:
    """Unit vertices of the icosphere at the given subdivision level.

    Returns:
        (N, 3) float64 array of unit vectors, N = vertex_count(level).
    """
    if level < 0:
        raise ValueError("subdivision level must be >= 0")
    verts = [v / np.linalg.norm(v) for v in _BASE_VERTICES]
    faces = _BASE_FACES.tolist()
    for _ in range(level):
        midpoint_cache: dict[tuple[int, int], int] = {}

        def midpoint(i: int, j: int) -> int:
            key = (i, j) if i < j else (j, i)
            idx = midpoint_cache.get(key)
            if idx is None:
                m = verts[i] + verts[j]
                verts.append(m / np.linalg.norm(m))
                idx = len(verts) - 1
                midpoint_cache[key] = idx
            return idx

        new_faces = []
        for a, b, c in faces:
            ab = midpoint(a, b)
            bc = midpoint(b, c)
            ca = midpoint(c, a)
            new_faces += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        faces = new_faces
    out = np.array(verts)
    out.flags.writeable = False
    return out


def level_for_count(n_target: int) -> int:
    """Smallest subdivision level whose vertex count reaches n_target."""
    level = 0
    while vertex_count(level) < n_target:
        level += 1
    return level


class SphereGrid:
    """Nearest-vertex cells of an icosphere, used for direction voting.

    Votes accumulate an integer count and a vector sum per cell; the
    reported direction of a cell is the renormalized vector centroid
    (sub-cell accuracy), not the cell vertex.
    """

    def __init__(self, level: int = 3):
        self.level = level
        self.vertices = icosphere(level)

    @property
    def n_cells(self) -> int:
        return self.vertices.shape[0]

    def cell_of(self, points: np.ndarray) -> np.ndarray:
        """Nearest-vertex cell index for each row of (N, 3) unit points."""
        return np.argmax(points @ self.vertices.T, axis=1)
