import math

import numpy as np
import pytest

from lineloc.directions import (
    assign_lines_2d,
    assign_lines_3d,
    canonical_hemisphere,
    directions_3d,
    vanishing_points_2d,
)
from lineloc.errors import TooFewDirections, TooFewLines
from lineloc.geometry import Arc2D, Segment3D, UnitVector, rotation_about_axis
from lineloc.icosphere import SphereGrid
from lineloc.lines import LineMap3D, QueryLines2D
from oracles import random_rotation

X = UnitVector(1, 0, 0)
Y = UnitVector(0, 1, 0)
Z = UnitVector(0, 0, 1)


def _meridian_through_z(phi, span=(0.3, 1.2)):
    """Arc on the great circle through +-z at azimuth phi."""
    u = np.array([math.cos(phi), math.sin(phi), 0.0])
    s = math.cos(span[0]) * u + math.sin(span[0]) * np.array([0, 0, 1.0])
    e = math.cos(span[1]) * u + math.sin(span[1]) * np.array([0, 0, 1.0])
    return Arc2D(UnitVector(s), UnitVector(e))


def _circle_through_x(psi, span=(0.3, 1.2)):
    """Arc on the great circle through +-x tilted by psi."""
    u = np.array([0.0, math.cos(psi), math.sin(psi)])
    s = math.cos(span[0]) * np.array([1.0, 0, 0]) + math.sin(span[0]) * u
    e = math.cos(span[1]) * np.array([1.0, 0, 0]) + math.sin(span[1]) * u
    return Arc2D(UnitVector(s), UnitVector(e))


class TestCanonicalHemisphere:
    def test_rules(self):
        assert np.allclose(canonical_hemisphere([0, 0, -1])[0], [0, 0, 1])
        assert np.allclose(canonical_hemisphere([0, -1, 0])[0], [0, 1, 0])
        assert np.allclose(canonical_hemisphere([-1, 0, 0])[0], [1, 0, 0])
        v = np.array([0.3, -0.2, 0.5])
        v /= np.linalg.norm(v)
        assert np.allclose(canonical_hemisphere(v)[0], v)

    def test_negation_invariant(self):
        rng = np.random.default_rng(2)
        v = rng.normal(size=(50, 3))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        a = canonical_hemisphere(v)
        b = canonical_hemisphere(-v)
        assert np.allclose(a, b)


class TestVanishingPoints2D:
    def test_meridians_vote_for_pole(self):
        arcs = [_meridian_through_z(0.5 * k) for k in range(8)]
        p = vanishing_points_2d(QueryLines2D(arcs), k_2d=3)
        top = p.directions[0].xyz
        # Within one grid-cell radius of the pole.
        assert np.degrees(np.arccos(abs(top @ np.array([0, 0, 1.0])))) < 5.0
        assert p.votes[0] == 28  # C(8,2), every meridian pair meets at z

    def test_two_bundles_exact_counts(self):
        # Two orthogonal 10-line bundles; the construction is tilted by a
        # generic rotation so neither hub sits on the hemisphere boundary
        # and no line of one bundle contains the other bundle's hub.
        # Azimuth ranges stay away from pi/2 so no cross-bundle
        # intersection lands inside either hub's grid cell.
        Q = rotation_about_axis([1.0, 2.0, 3.0], 0.7)
        arcs = []
        for k in range(10):
            a = _meridian_through_z(0.3 + 0.1 * k)
            arcs.append(Arc2D(UnitVector(Q @ a.s.xyz), UnitVector(Q @ a.e.xyz)))
        for k in range(10):
            a = _circle_through_x(0.3 + 0.1 * k, span=(0.4, 1.0))
            arcs.append(Arc2D(UnitVector(Q @ a.s.xyz), UnitVector(Q @ a.e.xyz)))
        p = vanishing_points_2d(QueryLines2D(arcs), k_2d=2)
        # Exact pairwise-enumeration count: C(10,2) = 45 votes per hub.
        assert p.votes == (45, 45)
        hubs = {0: Q @ np.array([0.0, 0.0, 1.0]), 1: Q @ np.array([1.0, 0.0, 0.0])}
        matched = set()
        for d in p.directions:
            for key, hub in hubs.items():
                if np.degrees(np.arccos(min(1.0, abs(d.xyz @ hub)))) < 5.0:
                    matched.add(key)
        assert matched == {0, 1}
        # Oracle cross-check: brute-force intersections landing in the z hub.
        grid = SphereGrid(3)
        from lineloc.directions import arc_normals, canonical_hemisphere

        hub_cell = grid.cell_of(
            canonical_hemisphere(hubs[0][None] / np.linalg.norm(hubs[0]))
        )[0]
        brute = 0
        normals = arc_normals(arcs)
        for i in range(len(arcs)):
            for j in range(i + 1, len(arcs)):
                c = np.cross(normals[i], normals[j])
                n = np.linalg.norm(c)
                if n <= 1e-8:
                    continue
                pt = canonical_hemisphere(c / n)[0]
                if grid.cell_of(pt[None])[0] == hub_cell:
                    brute += 1
        assert brute == 45

    def test_too_few_lines(self):
        arcs = [_meridian_through_z(0.5 * k) for k in range(2)]
        with pytest.raises(TooFewLines):
            vanishing_points_2d(QueryLines2D(arcs))

    def test_short_result_flagged(self):
        # Three bundles only: far fewer than 20 non-empty cells is fine,
        # the result reports the shortfall through `requested`.
        arcs = [_meridian_through_z(0.7 * k) for k in range(4)]
        p = vanishing_points_2d(QueryLines2D(arcs), k_2d=20)
        assert p.requested == 20
        assert not p.complete

    def test_votes_nonincreasing(self):
        rng = np.random.default_rng(3)
        arcs = [_meridian_through_z(0.3 * k) for k in range(6)]
        arcs += [_circle_through_x(0.45 * k) for k in range(4)]
        p = vanishing_points_2d(QueryLines2D(arcs), k_2d=5)
        assert all(a >= b for a, b in zip(p.votes, p.votes[1:]))
        for d in p.directions:
            assert np.allclose(canonical_hemisphere(d.xyz)[0], d.xyz)


class TestDirections3D:
    def _box_map(self):
        segs = []
        for axis in range(3):
            for k in range(4):
                start = np.array([0.2 * k + 0.1] * 3)
                end = start.copy()
                end[axis] += 2.0
                segs.append(Segment3D(start, end))
        return LineMap3D(segs, [0, 0, 0], [3, 3, 3])

    def test_axis_wireframe(self):
        p = directions_3d(self._box_map(), k_3d=3)
        dirs = np.abs(np.array([d.xyz for d in p.directions]))
        assert np.allclose(np.sort(np.max(dirs, axis=1)), [1, 1, 1], atol=1e-9)
        assert p.votes == (4, 4, 4)

    def test_single_direction(self):
        d = np.array([1.0, 1.0, 1.0]) / math.sqrt(3)
        segs = [Segment3D(np.zeros(3) + 0.1 * k, np.zeros(3) + 0.1 * k + d) for k in range(5)]
        m = LineMap3D(segs, [-1, -1, -1], [3, 3, 3])
        p = directions_3d(m, k_3d=1)
        assert abs(abs(p.directions[0].xyz @ d) - 1) < 1e-9

    def test_too_few_directions(self):
        d = np.array([1.0, 0.0, 0.0])
        segs = [Segment3D([0, 0.1 * k, 0], [1, 0.1 * k, 0]) for k in range(5)]
        m = LineMap3D(segs, [-1, -1, -1], [3, 3, 3])
        with pytest.raises(TooFewDirections):
            directions_3d(m, k_3d=3)

    def test_rotation_equivariance(self):
        rng = np.random.default_rng(9)
        base = self._box_map()
        p0 = directions_3d(base, k_3d=3)
        Q = random_rotation(rng)
        rot_segs = [Segment3D(Q @ s.s, Q @ s.e) for s in base.segments]
        pts = np.array([p for s in rot_segs for p in (s.s, s.e)])
        m = LineMap3D(rot_segs, pts.min(axis=0) - 0.1, pts.max(axis=0) + 0.1)
        p1 = directions_3d(m, k_3d=3)
        # Each rotated direction matches +-Q d within one cell radius (~4.5 deg).
        for d1 in p1.directions:
            best = min(
                np.degrees(np.arccos(np.clip(abs(d1.xyz @ (Q @ d0.xyz)), 0, 1)))
                for d0 in p0.directions
            )
            assert best < 4.6


class TestAssignment:
    def test_meridian_to_z(self):
        arc = _meridian_through_z(0.3)
        groups = assign_lines_2d(
            QueryLines2D([arc]), [X, Y, Z], math.radians(10)
        )
        assert groups[2] == [arc]
        assert groups[0] == [] and groups[1] == []

    def test_45_degree_excluded(self):
        # Normal at 45 degrees from every axis-ish: use an arc whose plane
        # normal is (1,1,1)/sqrt(3): ~35 deg off each axis, outside 10 deg.
        n = np.array([1.0, 1.0, 1.0]) / math.sqrt(3)
        u = np.array([1.0, -1.0, 0.0]) / math.sqrt(2)
        v = np.cross(n, u)
        s = UnitVector(u)
        e = UnitVector(math.cos(0.8) * u + math.sin(0.8) * v)
        groups = assign_lines_2d(
            QueryLines2D([Arc2D(s, e)]), [X, Y, Z], math.radians(10)
        )
        assert all(g == [] for g in groups)

    def test_tie_goes_to_lower_index(self):
        # Two directions at exactly the same small residual from the
        # arc's plane: the tie must resolve to index 0.
        n = np.array([1.0, 1.0, 0.0]) / math.sqrt(2)
        u = np.array([1.0, -1.0, 0.0]) / math.sqrt(2)
        v = np.cross(n, u)
        arc = Arc2D(UnitVector(u), UnitVector(math.cos(1.0) * u + math.sin(1.0) * v))
        th = math.radians(5)
        p0 = UnitVector(math.sin(th) * n + math.cos(th) * u)
        p1 = UnitVector(-p0.xyz)  # same residual bitwise (negation is exact)
        p2 = UnitVector(n)  # residual pi/2, always excluded
        groups = assign_lines_2d(
            QueryLines2D([arc]), [p0, p1, p2], math.radians(10)
        )
        assert len(groups[0]) == 1 and len(groups[1]) == 0

    def test_3d_axis_parallel(self):
        seg = Segment3D([0, 0, 0], [2, 0, 0])
        m = LineMap3D([seg], [-1, -1, -1], [3, 3, 3])
        groups = assign_lines_3d(m, [X, Y, Z], math.radians(10))
        assert groups[0] == [seg]

    def test_3d_diagonal_excluded(self):
        seg = Segment3D([0, 0, 0], [1, 1, 0])
        m = LineMap3D([seg], [-1, -1, -1], [3, 3, 3])
        groups = assign_lines_3d(m, [X, Y, Z], math.radians(10))
        assert all(g == [] for g in groups)

    def test_3d_nine_degrees_included(self):
        ang = math.radians(9)
        seg = Segment3D([0, 0, 0], [math.cos(ang), math.sin(ang), 0])
        m = LineMap3D([seg], [-1, -1, -1], [3, 3, 3])
        groups = assign_lines_3d(m, [X, Y, Z], math.radians(10))
        assert groups[0] == [seg]

    def test_partition_properties(self):
        rng = np.random.default_rng(21)
        arcs = []
        for _ in range(40):
            v = rng.normal(size=3)
            v /= np.linalg.norm(v)
            w = rng.normal(size=3)
            w -= (w @ v) * v
            w /= np.linalg.norm(w)
            ang = rng.uniform(0.2, 1.4)
            arcs.append(
                Arc2D(UnitVector(v), UnitVector(math.cos(ang) * v + math.sin(ang) * w))
            )
        q = QueryLines2D(arcs)
        tol = math.radians(10)
        groups = assign_lines_2d(q, [X, Y, Z], tol)
        seen = set()
        for gi, group in enumerate(groups):
            for arc in group:
                assert id(arc) not in seen
                seen.add(id(arc))
                n = arc.normal
                resid = abs(math.asin(abs(float(n @ [X, Y, Z][gi].xyz))))
                assert resid < tol
        assigned = {id(a) for g in groups for a in g}
        for arc in arcs:
            if id(arc) not in assigned:
                n = arc.normal
                for d in (X, Y, Z):
                    assert abs(math.asin(abs(float(n @ d.xyz)))) >= tol
