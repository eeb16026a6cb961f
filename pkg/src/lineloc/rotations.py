"""Candidate rotation enumeration from principal-direction triplets.

Every 3-subset of 2D directions is aligned against every 3-subset of 3D
directions under all 3! permutations and 2^3 sign patterns of the 3D
triplet; each combination is solved in closed form (SVD alignment with
determinant correction), filtered by mean squared alignment error, and
greedily deduplicated by relative rotation angle.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .directions import PrincipalDirections2D, PrincipalDirections3D
from .errors import DegenerateConfiguration, NoFeasibleRotation
from .geometry import UnitVector

DEFAULT_MSE_MAX = 0.02
DEFAULT_DEDUP_ANGLE_DEG = 5.0

_RANK_TOL = 1e-9


@dataclass(frozen=True)
class RotationHypothesis:
    """A candidate rotation with the direction triplets that produced it.

    The rotation maps 3D (world) directions into the query-sphere frame:
    R @ triplet_3d[i] ~ triplet_2d[i]. triplet_3d carries the permutation
    and signs applied during enumeration so group i on both sides refers
    to the same physical direction family.
    """

    R: np.ndarray = field(repr=False)
    triplet_2d: tuple[UnitVector, UnitVector, UnitVector]
    triplet_3d: tuple[UnitVector, UnitVector, UnitVector]
    mse: float

    def __post_init__(self):
        self.R.flags.writeable = False


@dataclass
class EnumerationStats:
    """Counters filled in by enumerate_rotations (for tests and bench)."""

    kabsch_evaluations: int = 0
    survivors_before_dedup: int = 0


def kabsch(a, b) -> tuple[np.ndarray, float]:
    """Optimal rotation aligning b onto a in the least-squares sense.

    Minimizes sum_i ||a_i - R b_i||^2 over R in SO(3) via SVD of the
    cross-covariance with determinant correction.

    Args:
        a: three unit vectors (rows or UnitVectors), the target frame.
        b: three unit vectors, the source frame.

    Returns:
        (R, mse) with mse = mean_i ||a_i - R b_i||^2.

    Raises:
        DegenerateConfiguration: cross-covariance rank < 2.
    """
    A = _rows(a)
    B = _rows(b)
    H = B.T @ A  # sum_i b_i a_i^T
    U, S, Vt = np.linalg.svd(H)
    if S[1] <= _RANK_TOL:
        raise DegenerateConfiguration("direction triplet is rank-deficient")
    d = np.sign(np.linalg.det(U) * np.linalg.det(Vt))
    V = Vt.T.copy()
    V[:, 2] *= d
    R = V @ U.T
    mse = float(np.mean(np.sum((A - B @ R.T) ** 2, axis=1)))
    return R, mse


def enumerate_rotations(
    p2d: PrincipalDirections2D,
    p3d: PrincipalDirections3D,
    mse_max: float = DEFAULT_MSE_MAX,
    dedup_angle: float = DEFAULT_DEDUP_ANGLE_DEG,
    stats: EnumerationStats | None = None,
) -> list[RotationHypothesis]:
    """Enumerate, filter and deduplicate candidate rotations.

    Iteration order is fixed (lexicographic subsets, permutations, sign
    patterns) so output is independent of caller-side ordering quirks.
    Survivors are sorted by ascending mse; greedy dedup then drops any
    rotation within dedup_angle degrees of an already-kept one.

    Raises:
        NoFeasibleRotation: nothing survives the mse threshold.
    """
    a2 = p2d.as_array()
    a3 = p3d.as_array()
    if a2.shape[0] < 3 or a3.shape[0] < 3:
        raise NoFeasibleRotation(
            "need at least three principal directions on each side"
        )
    combos2 = list(itertools.combinations(range(a2.shape[0]), 3))
    combos3 = list(itertools.combinations(range(a3.shape[0]), 3))
    perms = list(itertools.permutations(range(3)))
    signs = np.array(list(itertools.product((1.0, -1.0), repeat=3)))

    # One (permutation, sign) variant block shared by all subset pairs.
    n_var = len(perms) * len(signs)

    A_sub = a2[np.array(combos2)]  # (n2, 3, 3)
    B_sub = a3[np.array(combos3)]  # (n3, 3, 3)
    perm_idx = np.array(perms)  # (6, 3)
    # variants[v] applied to a 3D subset: rows permuted then sign-flipped.
    B_var = B_sub[:, perm_idx, :]  # (n3, 6, 3, 3)
    B_var = B_var[:, :, None, :, :] * signs[None, None, :, :, None]
    B_var = B_var.reshape(len(combos3), n_var, 3, 3)  # (n3, 48, 3, 3)

    n2, n3 = len(combos2), len(combos3)
    A_all = np.broadcast_to(
        A_sub[:, None, None, :, :], (n2, n3, n_var, 3, 3)
    ).reshape(-1, 3, 3)
    B_all = np.broadcast_to(
        B_var[None, :, :, :, :], (n2, n3, n_var, 3, 3)
    ).reshape(-1, 3, 3)
    n_total = A_all.shape[0]
    if stats is not None:
        stats.kabsch_evaluations += n_total

    H = np.einsum("nij,nik->njk", B_all, A_all)
    U, S, Vt = np.linalg.svd(H)
    ok = S[:, 1] > _RANK_TOL
    d = np.sign(np.linalg.det(U) * np.linalg.det(Vt))
    V = np.transpose(Vt, (0, 2, 1)).copy()
    V[:, :, 2] *= d[:, None]
    R_all = V @ np.transpose(U, (0, 2, 1))
    diff = A_all - np.einsum("nij,nkj->nki", R_all, B_all)
    mse_all = np.mean(np.sum(diff**2, axis=2), axis=1)

    keep = ok & (mse_all <= mse_max)
    idx = np.flatnonzero(keep)
    if idx.size == 0:
        raise NoFeasibleRotation(
            f"no rotation reaches mse <= {mse_max:g}"
        )
    if stats is not None:
        stats.survivors_before_dedup = int(idx.size)
    # Ascending mse; stable so equal-mse entries keep enumeration order.
    idx = idx[np.argsort(mse_all[idx], kind="stable")]

    cos_limit = np.cos(np.radians(dedup_angle))
    kept_R: list[np.ndarray] = []
    kept_idx: list[int] = []
    for n in idx:
        R = R_all[n]
        if kept_R:
            K = np.array(kept_R)
            cos_ang = (np.einsum("mji,ji->m", K, R) - 1.0) / 2.0
            if np.any(cos_ang >= cos_limit):
                continue
        kept_R.append(R)
        kept_idx.append(int(n))

    hypotheses = []
    for n in kept_idx:
        i2, rem = divmod(n, n3 * n_var)
        i3, v = divmod(rem, n_var)
        t2 = tuple(UnitVector(x) for x in A_sub[i2])
        t3 = tuple(UnitVector(x) for x in B_var[i3, v])
        hypotheses.append(
            RotationHypothesis(
                R=R_all[n].copy(),
                triplet_2d=t2,
                triplet_3d=t3,
                mse=float(mse_all[n]),
            )
        )
    return hypotheses


def _rows(vectors) -> np.ndarray:
    rows = [
        v.xyz if isinstance(v, UnitVector) else np.asarray(v, dtype=float)
        for v in vectors
    ]
    out = np.array(rows)
    if out.shape != (3, 3):
        raise ValueError("expected exactly three 3-vectors")
    return out
