"""Deterministic JSON serialization of maps, queries, poses and results.

Every file carries {"format": "ldl/1", "kind": <schema>}. Floats are
written with Python's shortest round-trip representation so that
read(write(x)) reproduces every value bit-exactly. All type invariants
are re-validated on read and reported with the offending field.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .errors import InvariantViolation, ParseError
from .geometry import Arc2D, Pose, Segment3D, UnitVector
from .lines import LineMap3D, QueryLines2D
from .refine import RansacConfig
from .search import RankedPose, SearchConfig
from .simulate import SimConfig

FORMAT_VERSION = "ldl/1"


# ---------------------------------------------------------------------------
# primitives


def _load(path, kind: str) -> dict:
    text = Path(path).read_text()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}")
    if not isinstance(obj, dict):
        raise ParseError(f"{path}: top level must be an object")
    fmt = obj.get("format")
    if fmt != FORMAT_VERSION:
        raise ParseError(
            f"{path}: field 'format' must be '{FORMAT_VERSION}', got {fmt!r}"
        )
    got = obj.get("kind")
    if got != kind:
        raise ParseError(f"{path}: field 'kind' must be '{kind}', got {got!r}")
    return obj


def _dump(path, payload: dict) -> None:
    payload = {"format": FORMAT_VERSION, **payload}
    Path(path).write_text(json.dumps(payload, indent=1) + "\n")


def _req(obj: dict, key: str, context: str):
    if key not in obj:
        raise ParseError(f"{context}: missing field '{key}'")
    return obj[key]


def _vec(values, n: int, context: str) -> np.ndarray:
    try:
        arr = np.array([float(v) for v in values], dtype=float)
    except (TypeError, ValueError):
        raise ParseError(f"{context}: expected a numeric array")
    if arr.shape != (n,):
        raise ParseError(f"{context}: expected {n} values, got {arr.size}")
    return arr


def _unit(values, context: str) -> UnitVector:
    v = _vec(values, 3, context)
    if abs(np.linalg.norm(v) - 1.0) > 1e-9:
        raise InvariantViolation(f"{context}: vector is not unit norm")
    return UnitVector(v)


# ---------------------------------------------------------------------------
# maps and queries


def write_map(path, line_map: LineMap3D) -> None:
    _dump(
        path,
        {
            "kind": "map",
            "bbox_min": [float(v) for v in line_map.bbox_min],
            "bbox_max": [float(v) for v in line_map.bbox_max],
            "segments": [
                {"s": [float(v) for v in s.s], "e": [float(v) for v in s.e]}
                for s in line_map.segments
            ],
            "keypoints": [
                {"p": [float(v) for v in p], "id": int(i)}
                for p, i in line_map.keypoints
            ],
        },
    )


def read_map(path) -> LineMap3D:
    obj = _load(path, "map")
    bbox_min = _vec(_req(obj, "bbox_min", f"{path}"), 3, f"{path}: bbox_min")
    bbox_max = _vec(_req(obj, "bbox_max", f"{path}"), 3, f"{path}: bbox_max")
    if not np.all(bbox_max - bbox_min > 0):
        raise InvariantViolation(f"{path}: bbox extents must be positive")
    segments = []
    for i, rec in enumerate(_req(obj, "segments", f"{path}")):
        ctx = f"{path}: segments[{i}]"
        s = _vec(_req(rec, "s", ctx), 3, f"{ctx}.s")
        e = _vec(_req(rec, "e", ctx), 3, f"{ctx}.e")
        if np.linalg.norm(e - s) <= 0:
            raise InvariantViolation(f"{ctx}: zero-length segment")
        for name, p in (("s", s), ("e", e)):
            if np.any(p < bbox_min - 1e-9) or np.any(p > bbox_max + 1e-9):
                raise InvariantViolation(f"{ctx}.{name}: endpoint outside bbox")
        segments.append(Segment3D(s, e))
    keypoints = []
    for i, rec in enumerate(obj.get("keypoints", [])):
        ctx = f"{path}: keypoints[{i}]"
        p = _vec(_req(rec, "p", ctx), 3, f"{ctx}.p")
        keypoints.append((p, int(_req(rec, "id", ctx))))
    return LineMap3D(segments, bbox_min, bbox_max, keypoints)


def write_query(path, query: QueryLines2D) -> None:
    _dump(
        path,
        {
            "kind": "query",
            "arcs": [
                {
                    "s": [float(v) for v in a.s.xyz],
                    "e": [float(v) for v in a.e.xyz],
                }
                for a in query.arcs
            ],
            "keypoints": [
                {"d": [float(v) for v in d.xyz], "id": int(i)}
                for d, i in query.keypoints
            ],
        },
    )


def read_query(path) -> QueryLines2D:
    obj = _load(path, "query")
    arcs = []
    for i, rec in enumerate(_req(obj, "arcs", f"{path}")):
        ctx = f"{path}: arcs[{i}]"
        s = _unit(_req(rec, "s", ctx), f"{ctx}.s")
        e = _unit(_req(rec, "e", ctx), f"{ctx}.e")
        if np.linalg.norm(np.cross(s.xyz, e.xyz)) <= 1e-8:
            raise InvariantViolation(f"{ctx}: degenerate arc endpoints")
        arcs.append(Arc2D(s, e))
    keypoints = []
    for i, rec in enumerate(obj.get("keypoints", [])):
        ctx = f"{path}: keypoints[{i}]"
        d = _unit(_req(rec, "d", ctx), f"{ctx}.d")
        keypoints.append((d, int(_req(rec, "id", ctx))))
    return QueryLines2D(arcs, keypoints)


# ---------------------------------------------------------------------------
# poses and results


def _pose_payload(pose: Pose) -> dict:
    return {
        "R": [float(v) for v in pose.R.reshape(-1)],
        "t": [float(v) for v in pose.t],
    }


def _pose_from(rec: dict, context: str) -> Pose:
    R = _vec(_req(rec, "R", context), 9, f"{context}.R").reshape(3, 3)
    t = _vec(_req(rec, "t", context), 3, f"{context}.t")
    if np.max(np.abs(R.T @ R - np.eye(3))) > 1e-8:
        raise InvariantViolation(f"{context}.R: not orthonormal")
    if abs(np.linalg.det(R) - 1.0) > 1e-8:
        raise InvariantViolation(f"{context}.R: det != +1")
    return Pose(R, t)


def write_pose(path, pose: Pose) -> None:
    _dump(path, {"kind": "pose", **_pose_payload(pose)})


def read_pose(path) -> Pose:
    obj = _load(path, "pose")
    return _pose_from(obj, f"{path}")


def write_results(path, poses: list[RankedPose], config: dict | None = None) -> None:
    """Write ranked poses; optional `config` echoes the effective settings."""
    payload = {
        "kind": "results",
        "poses": [
            {
                **_pose_payload(rp.pose),
                "inliers": int(rp.inliers),
                "residual": float(rp.residual),
            }
            for rp in poses
        ],
    }
    if config is not None:
        payload["config"] = config
    _dump(path, payload)


def read_results(path) -> list[RankedPose]:
    """Read ranked poses; pool indices are not serialized and read as -1."""
    obj = _load(path, "results")
    out = []
    for i, rec in enumerate(_req(obj, "poses", f"{path}")):
        ctx = f"{path}: poses[{i}]"
        pose = _pose_from(rec, ctx)
        out.append(
            RankedPose(
                pose=pose,
                inliers=int(_req(rec, "inliers", ctx)),
                residual=float(_req(rec, "residual", ctx)),
                rotation_index=-1,
                translation_index=-1,
            )
        )
    return out


# ---------------------------------------------------------------------------
# configs


def write_sim_config(path, cfg: SimConfig) -> None:
    _dump(path, {"kind": "sim_config", **_jsonable(asdict(cfg))})


def read_sim_config(path) -> SimConfig:
    obj = _load(path, "sim_config")
    return sim_config_from_dict(obj, f"{path}")


def write_search_config(path, cfg: SearchConfig) -> None:
    _dump(path, {"kind": "search_config", **_jsonable(asdict(cfg))})


def read_search_config(path) -> SearchConfig:
    obj = _load(path, "search_config")
    return search_config_from_dict(obj, f"{path}")


def sim_config_from_dict(obj: dict, context: str) -> SimConfig:
    kwargs = _pick_fields(obj, SimConfig, context)
    if "extents" in kwargs:
        kwargs["extents"] = tuple(
            _vec(kwargs["extents"], 3, f"{context}: extents")
        )
    try:
        return SimConfig(**kwargs)
    except ValueError as exc:
        raise InvariantViolation(f"{context}: {exc}")


def search_config_from_dict(obj: dict, context: str) -> SearchConfig:
    kwargs = _pick_fields(obj, SearchConfig, context)
    try:
        return SearchConfig(**kwargs)
    except ValueError as exc:
        raise InvariantViolation(f"{context}: {exc}")


def ransac_config_from_dict(obj: dict, context: str) -> RansacConfig:
    kwargs = _pick_fields(obj, RansacConfig, context)
    try:
        return RansacConfig(**kwargs)
    except ValueError as exc:
        raise InvariantViolation(f"{context}: {exc}")


def _pick_fields(obj: dict, cls, context: str) -> dict:
    import dataclasses

    names = {f.name for f in dataclasses.fields(cls)}
    out = {}
    for key, value in obj.items():
        if key in ("format", "kind"):
            continue
        if key not in names:
            raise ParseError(f"{context}: unknown field '{key}'")
        out[key] = value
    return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, bool):
        return obj
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    return obj
