import math
import time

import numpy as np
import pytest

from lineloc.directions import (
    PrincipalDirections2D,
    PrincipalDirections3D,
    canonical_hemisphere,
)
from lineloc.errors import DegenerateConfiguration, NoFeasibleRotation
from lineloc.geometry import UnitVector, rotation_angle
from lineloc.rotations import EnumerationStats, enumerate_rotations, kabsch
from oracles import random_rotation

AXES = [UnitVector(1, 0, 0), UnitVector(0, 1, 0), UnitVector(0, 0, 1)]


def _dirs2d(vectors):
    dirs = tuple(UnitVector(canonical_hemisphere(v)[0]) for v in vectors)
    return PrincipalDirections2D(dirs, tuple(range(len(dirs), 0, -1)), len(dirs))


def _dirs3d(vectors):
    dirs = tuple(UnitVector(canonical_hemisphere(v)[0]) for v in vectors)
    return PrincipalDirections3D(dirs, tuple(range(len(dirs), 0, -1)), len(dirs))


class TestKabsch:
    def test_identity(self):
        R, mse = kabsch(AXES, AXES)
        assert np.allclose(R, np.eye(3), atol=1e-12)
        assert mse == pytest.approx(0.0, abs=1e-18)

    def test_recovers_known_rotation(self):
        rng = np.random.default_rng(31)
        for _ in range(50):
            Q = random_rotation(rng)
            a = [UnitVector(Q @ v.xyz) for v in AXES]
            R, mse = kabsch(a, AXES)
            assert np.max(np.abs(R - Q)) < 1e-9
            assert mse < 1e-18

    def test_degenerate_triplet(self):
        x = UnitVector(1, 0, 0)
        with pytest.raises(DegenerateConfiguration):
            kabsch([x, x, x], AXES)

    def test_result_in_so3(self):
        rng = np.random.default_rng(37)
        for _ in range(50):
            a = [UnitVector(v) for v in rng.normal(size=(3, 3))]
            b = [UnitVector(v) for v in rng.normal(size=(3, 3))]
            try:
                R, mse = kabsch(a, b)
            except DegenerateConfiguration:
                continue
            assert np.max(np.abs(R.T @ R - np.eye(3))) < 1e-10
            assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-10)
            assert mse >= 0

    def test_handles_reflection_ambiguity(self):
        # A left-handed target triplet must still produce det(R) = +1.
        a = [AXES[0], AXES[1], UnitVector(0, 0, -1)]
        R, mse = kabsch(a, AXES)
        assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-10)


class TestEnumerate:
    def test_combination_count(self):
        rng = np.random.default_rng(41)
        vecs2 = rng.normal(size=(20, 3))
        vecs2 /= np.linalg.norm(vecs2, axis=1, keepdims=True)
        p2d = _dirs2d(vecs2)
        p3d = _dirs3d(np.eye(3))
        stats = EnumerationStats()
        t0 = time.perf_counter()
        try:
            enumerate_rotations(p2d, p3d, mse_max=0.02, stats=stats)
        except NoFeasibleRotation:
            pass
        elapsed = time.perf_counter() - t0
        assert stats.kabsch_evaluations == 54720
        assert elapsed < 1.0

    def test_identity_survives_exact_axes(self):
        p2d = _dirs2d(np.eye(3))
        p3d = _dirs3d(np.eye(3))
        hyps = enumerate_rotations(p2d, p3d)
        assert any(rotation_angle(h.R, np.eye(3)) < 1e-9 for h in hyps)
        assert hyps[0].mse == pytest.approx(0.0, abs=1e-15)
        for i, a in enumerate(hyps):
            for b in hyps[i + 1 :]:
                assert rotation_angle(a.R, b.R) > 5.0

    def test_ground_truth_recovery(self):
        rng = np.random.default_rng(43)
        for _ in range(10):
            Q = random_rotation(rng)
            p2d = _dirs2d([Q @ v.xyz for v in AXES])
            p3d = _dirs3d(np.eye(3))
            hyps = enumerate_rotations(p2d, p3d)
            best = min(rotation_angle(h.R, Q) for h in hyps)
            assert best < 1e-6

    def test_mse_zero_with_noise_raises(self):
        rng = np.random.default_rng(47)
        noisy = np.eye(3) + rng.normal(0, 0.05, size=(3, 3))
        noisy /= np.linalg.norm(noisy, axis=1, keepdims=True)
        p2d = _dirs2d(noisy)
        p3d = _dirs3d(np.eye(3) + 0.0)
        with pytest.raises(NoFeasibleRotation):
            enumerate_rotations(p2d, p3d, mse_max=0.0)

    def test_sorted_by_mse_and_so3(self):
        rng = np.random.default_rng(53)
        vecs2 = rng.normal(size=(6, 3))
        vecs2 /= np.linalg.norm(vecs2, axis=1, keepdims=True)
        p2d = _dirs2d(vecs2)
        p3d = _dirs3d(np.eye(3))
        hyps = enumerate_rotations(p2d, p3d, mse_max=0.5, dedup_angle=5.0)
        mses = [h.mse for h in hyps]
        assert mses == sorted(mses)
        for h in hyps:
            assert np.max(np.abs(h.R.T @ h.R - np.eye(3))) < 1e-8
            assert np.linalg.det(h.R) == pytest.approx(1.0, abs=1e-8)

    def test_triplet_alignment_convention(self):
        # R maps the (permuted, signed) 3D triplet onto the 2D triplet.
        rng = np.random.default_rng(59)
        Q = random_rotation(rng)
        p2d = _dirs2d([Q @ v.xyz for v in AXES])
        p3d = _dirs3d(np.eye(3))
        hyps = enumerate_rotations(p2d, p3d)
        h = hyps[0]
        for p2, p3 in zip(h.triplet_2d, h.triplet_3d):
            assert np.allclose(h.R @ p3.xyz, p2.xyz, atol=1e-6)

    def test_order_independence_of_input_scramble(self):
        # Scrambling direction order changes indices but not the resulting
        # rotation set (up to dedup tie handling at equal mse).
        rng = np.random.default_rng(61)
        vecs = rng.normal(size=(5, 3))
        vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
        Q = random_rotation(rng)
        p3d = _dirs3d(vecs)
        p2d = _dirs2d([Q @ v for v in vecs])
        hyps = enumerate_rotations(p2d, p3d, mse_max=1e-6)
        assert any(rotation_angle(h.R, Q) < 1e-5 for h in hyps)
