import math

import numpy as np

from lineloc.geometry import Arc2D, Segment3D, UnitVector, arc_distance
from lineloc.privacy import (
    filter_keypoints_2d,
    filter_keypoints_3d,
    point_segment_distance,
)
from oracles import random_arc, random_unit

EQ_ARC = Arc2D(UnitVector(1, 0, 0), UnitVector(0, 1, 0))


class Test2D:
    def test_on_arc_kept(self):
        kp = [(UnitVector(1 / math.sqrt(2), 1 / math.sqrt(2), 0), 0)]
        assert filter_keypoints_2d(kp, [EQ_ARC], 1e-6) == kp

    def test_pole_removed_at_default(self):
        kp = [(UnitVector(0, 0, 1), 7)]
        assert filter_keypoints_2d(kp, [EQ_ARC], 0.05) == []

    def test_empty_arcs_keep_nothing(self):
        kp = [(UnitVector(0, 0, 1), 0), (UnitVector(1, 0, 0), 1)]
        assert filter_keypoints_2d(kp, [], 0.05) == []

    def test_partition_and_order(self):
        rng = np.random.default_rng(111)
        arcs = [random_arc(rng) for _ in range(6)]
        kps = [(random_unit(rng), i) for i in range(1000)]
        lam = 0.05
        kept = filter_keypoints_2d(kps, arcs, lam)
        kept_ids = [i for _, i in kept]
        assert kept_ids == sorted(kept_ids)  # order preserved
        kept_set = set(kept_ids)
        for kp, i in kps:
            d = min(arc_distance(kp, a) for a in arcs)
            assert (d <= lam) == (i in kept_set)

    def test_idempotent_and_monotone(self):
        rng = np.random.default_rng(113)
        arcs = [random_arc(rng) for _ in range(4)]
        kps = [(random_unit(rng), i) for i in range(300)]
        k1 = filter_keypoints_2d(kps, arcs, 0.05)
        k2 = filter_keypoints_2d(k1, arcs, 0.05)
        assert k1 == k2
        bigger = filter_keypoints_2d(kps, arcs, 0.2)
        assert set(i for _, i in k1) <= set(i for _, i in bigger)


class Test3D:
    SEG = Segment3D([0, 0, 0], [2, 0, 0])

    def test_on_segment_kept(self):
        kp = [(np.array([1.0, 0, 0]), 0)]
        assert len(filter_keypoints_3d(kp, [self.SEG], 0.1)) == 1

    def test_far_removed(self):
        kp = [(np.array([1.0, 1.0, 0]), 0)]
        assert filter_keypoints_3d(kp, [self.SEG], 0.1) == []

    def test_empty_segments(self):
        kp = [(np.array([1.0, 0, 0]), 0)]
        assert filter_keypoints_3d(kp, [], 0.1) == []

    def test_point_segment_distance_clamps(self):
        assert point_segment_distance(np.array([3.0, 0, 0]), self.SEG) == 1.0
        assert point_segment_distance(np.array([-1.0, 0, 0]), self.SEG) == 1.0
        assert point_segment_distance(np.array([1.0, 0.5, 0]), self.SEG) == 0.5

    def test_partition_on_random(self):
        rng = np.random.default_rng(117)
        segs = [
            Segment3D(rng.uniform(-3, 3, 3), rng.uniform(-3, 3, 3))
            for _ in range(5)
        ]
        kps = [(rng.uniform(-3, 3, 3), i) for i in range(500)]
        lam = 0.3
        kept = {i for _, i in filter_keypoints_3d(kps, segs, lam)}
        for kp, i in kps:
            d = min(point_segment_distance(kp, s) for s in segs)
            assert (d <= lam) == (i in kept)
