"""Command-line interface.

Subcommands: generate (synthetic scene + rendered query), localize
(candidate search + optional refinement), eval (pose error metrics),
filter-keypoints (privacy filtering), bench (per-stage timings).

Exit codes: 0 success, 1 usage error, 2 data/parse error, 3 algorithmic
failure (named error printed on stderr).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import statistics
import sys
import time
from pathlib import Path

import numpy as np

from . import io as lio
from .directions import (
    DEFAULT_ASSIGN_TOL,
    DEFAULT_K_2D,
    DEFAULT_K_3D,
    directions_3d,
    vanishing_points_2d,
)
from .errors import (
    AlgorithmError,
    CameraOnLine,
    DataError,
    LinelocError,
    ParseError,
)
from .geometry import Pose, rotation_angle, yaw_pitch_roll
from .lines import LineMap3D, QueryLines2D, filter_lines_2d, filter_lines_3d
from .pipeline import localize as run_localize
from .privacy import (
    DEFAULT_LAMBDA_2D,
    DEFAULT_LAMBDA_3D,
    filter_keypoints_2d,
    filter_keypoints_3d,
    restrict_arcs_to_principal,
)
from .refine import RansacConfig, oracle_matcher
from .rotations import (
    DEFAULT_DEDUP_ANGLE_DEG,
    DEFAULT_MSE_MAX,
    enumerate_rotations,
)
from .search import SearchConfig, evaluate_pool, select_top, translation_pool
from .simulate import SCENE_KINDS, SimConfig, generate_scene, render_query


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except LinelocError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


def _build_parser() -> _Parser:
    p = _Parser(prog="lineloc", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate a synthetic scene and query")
    g.add_argument("--scene", choices=SCENE_KINDS, default="box_room")
    g.add_argument("--extents", default="8,6,3", help="room size in m: x,y,z")
    g.add_argument("--clutter", type=int, default=12, help="clutter segment count")
    g.add_argument("--noise", type=float, default=0.0, help="endpoint noise (rad)")
    g.add_argument("--outliers", type=float, default=0.0, help="outlier arc fraction")
    g.add_argument("--drop", type=float, default=0.0, help="dropped arc fraction")
    g.add_argument("--markers", type=int, default=3, help="marker lines (rot_symmetric)")
    g.add_argument("--keypoints", type=int, default=100, help="synthetic keypoint count")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument(
        "--pose",
        default="random",
        help="'random' or 'x,y,z,yaw,pitch,roll' (m and degrees, camera center)",
    )
    g.add_argument("--out-map", required=True)
    g.add_argument("--out-query", required=True)
    g.add_argument("--out-gt", required=True)
    g.set_defaults(func=_cmd_generate)

    l = sub.add_parser("localize", help="run candidate search and refinement")
    l.add_argument("--map", required=True)
    l.add_argument("--query", required=True)
    l.add_argument("--config", help="JSON config file (sections: search, ransac)")
    l.add_argument("--out", required=True)
    l.add_argument("--top-k", type=int, default=None)
    l.add_argument("--nt", type=int, default=None, help="translation pool size")
    l.add_argument("--tau", type=float, default=None)
    l.add_argument("--query-points", type=int, default=None)
    l.add_argument("--loss-kind", default=None)
    l.add_argument("--no-decompose", action="store_true")
    l.add_argument("--no-refine", action="store_true")
    l.add_argument("--baseline", choices=["chamfer"], default=None)
    l.add_argument("--gt", help="ground-truth pose file (enables the oracle matcher)")
    l.add_argument("--oracle-n", type=int, default=100)
    l.add_argument("--oracle-noise", type=float, default=0.0, help="radians")
    l.add_argument("--oracle-outliers", type=float, default=0.0)
    l.add_argument("--seed", type=int, default=0)
    l.add_argument("--lambda", dest="lam", type=float, default=0.1)
    l.add_argument("--k2d", type=int, default=DEFAULT_K_2D)
    l.add_argument("--k3d", type=int, default=DEFAULT_K_3D)
    l.add_argument("--mse-max", type=float, default=DEFAULT_MSE_MAX)
    l.add_argument("--dedup-angle", type=float, default=DEFAULT_DEDUP_ANGLE_DEG)
    l.add_argument("--margin", type=float, default=0.05)
    l.add_argument("--threads", type=int, default=1)
    l.add_argument(
        "--inject-translation",
        action="append",
        default=None,
        metavar="X,Y,Z",
        help="append a camera center (m) to the translation pool (repeatable)",
    )
    l.set_defaults(func=_cmd_localize)

    e = sub.add_parser("eval", help="pose error metrics against ground truth")
    e.add_argument("--pred", action="append", required=True,
                   help="results or pose file (repeatable, paired with --gt)")
    e.add_argument("--gt", action="append", required=True,
                   help="ground-truth pose file (repeatable)")
    e.add_argument("--thresholds", default="0.1m,5deg",
                   help="semicolon-separated pairs, e.g. '0.1m,5deg;0.05m,10deg'")
    e.add_argument("--csv", help="write the threshold/accuracy table as CSV")
    e.add_argument("--fig", help="render pose-error recall curves to a file")
    e.set_defaults(func=_cmd_eval)

    f = sub.add_parser("filter-keypoints", help="privacy-filter keypoints")
    src = f.add_mutually_exclusive_group(required=True)
    src.add_argument("--map")
    src.add_argument("--query")
    f.add_argument("--lambda", dest="lam", type=float, default=None,
                   help=f"distance threshold (default {DEFAULT_LAMBDA_2D} rad 2D,"
                        f" {DEFAULT_LAMBDA_3D} m 3D)")
    f.add_argument("--principal-only", action="store_true",
                   help="only keep lines parallel to principal directions")
    f.add_argument("--principal-k", type=int, default=3)
    f.add_argument("--out", required=True)
    f.set_defaults(func=_cmd_filter_keypoints)

    b = sub.add_parser("bench", help="per-stage wall-clock timings")
    b.add_argument("--map", required=True)
    b.add_argument("--query", required=True)
    b.add_argument("--nt", type=int, default=200)
    b.add_argument("--repeat", type=int, default=3)
    b.add_argument("--threads", type=int, default=1)
    b.add_argument("--lambda", dest="lam", type=float, default=0.1)
    b.add_argument("--csv", help="write stage timings as CSV")
    b.add_argument("--fig", help="render stage timings to a file")
    b.set_defaults(func=_cmd_bench)
    return p


# ---------------------------------------------------------------------------


def _cmd_generate(args) -> int:
    extents = _parse_floats(args.extents, 3, "--extents")
    cfg = SimConfig(
        scene_kind=args.scene,
        extents=tuple(extents),
        n_clutter_lines=args.clutter,
        endpoint_noise=args.noise,
        outlier_arcs=args.outliers,
        drop_fraction=args.drop,
        seed=args.seed,
        n_marker_lines=args.markers,
    )
    scene = generate_scene(cfg)
    scene = _with_synthetic_keypoints(scene, args.keypoints, args.seed)

    if args.pose == "random":
        rng = np.random.default_rng(np.random.SeedSequence([args.seed, 3]))
        last_err = None
        for _ in range(3):
            pose = _random_pose(rng, scene)
            try:
                query = render_query(scene, pose, cfg)
                break
            except CameraOnLine as exc:
                last_err = exc
        else:
            raise last_err
    else:
        vals = _parse_floats(args.pose, 6, "--pose")
        R = yaw_pitch_roll(*(math.radians(v) for v in vals[3:]))
        pose = Pose.from_camera_center(R, vals[:3])
        query = render_query(scene, pose, cfg)

    query = _project_keypoints(scene, query, pose)
    lio.write_map(args.out_map, scene)
    lio.write_query(args.out_query, query)
    lio.write_pose(args.out_gt, pose)
    print(
        f"wrote {len(scene.segments)} segments, {len(query.arcs)} arcs "
        f"(seed {args.seed})"
    )
    return 0


def _cmd_localize(args) -> int:
    line_map = lio.read_map(args.map)
    query = lio.read_query(args.query)

    search_kwargs: dict = {}
    ransac_kwargs: dict = {}
    if args.config:
        bundle = _read_config_bundle(args.config)
        search_kwargs.update(bundle.get("search", {}))
        ransac_kwargs.update(bundle.get("ransac", {}))
    for key, val in (
        ("top_k", args.top_k),
        ("n_translations", args.nt),
        ("tau", args.tau),
        ("n_query_points", args.query_points),
        ("loss_kind", args.loss_kind),
    ):
        if val is not None:
            search_kwargs[key] = val
    if args.no_decompose:
        search_kwargs["decompose"] = False
    ransac_kwargs.setdefault("seed", args.seed)
    cfg = lio.search_config_from_dict(search_kwargs, "--config search")
    ransac = lio.ransac_config_from_dict(ransac_kwargs, "--config ransac")

    matcher = None
    if not args.no_refine and args.gt:
        gt_pose = lio.read_pose(args.gt)

        def matcher(lm, _keypoints, _pose):
            return oracle_matcher(
                lm,
                gt_pose,
                n=args.oracle_n,
                noise=args.oracle_noise,
                outlier_fraction=args.oracle_outliers,
                seed=args.seed,
            )

    elif not args.no_refine:
        print(
            "note: no --gt given; the oracle matcher is unavailable, "
            "skipping refinement",
            file=sys.stderr,
        )

    extra = None
    if args.inject_translation:
        extra = np.array(
            [_parse_floats(v, 3, "--inject-translation") for v in args.inject_translation]
        )
    result = run_localize(
        line_map,
        query,
        cfg=cfg,
        ransac=ransac,
        matcher=matcher,
        baseline=args.baseline,
        lam=args.lam,
        k_2d=args.k2d,
        k_3d=args.k3d,
        mse_max=args.mse_max,
        dedup_angle=args.dedup_angle,
        margin=args.margin,
        threads=args.threads,
        extra_translations=extra,
    )

    effective = {
        "search": lio._jsonable(
            {f: getattr(cfg, f) for f in cfg.__dataclass_fields__}
        ),
        "ransac": lio._jsonable(
            {f: getattr(ransac, f) for f in ransac.__dataclass_fields__}
        ),
        "baseline": args.baseline,
        "lambda": args.lam,
        "refined": result.refined is not None,
    }
    out_poses = list(result.ranked)
    if result.refined is not None:
        from .search import RankedPose

        out_poses.insert(
            0,
            RankedPose(
                pose=result.refined,
                inliers=result.refined_inliers,
                residual=result.refined_error,
                rotation_index=result.ranked[result.chosen_index].rotation_index,
                translation_index=result.ranked[
                    result.chosen_index
                ].translation_index,
            ),
        )
    lio.write_results(args.out, out_poses, config=effective)
    head = out_poses[0]
    print(
        f"wrote {len(out_poses)} poses; best: inliers={head.inliers} "
        f"residual={head.residual:.4g}"
    )
    return 0


def _cmd_eval(args) -> int:
    if len(args.pred) != len(args.gt):
        raise UsageError("--pred and --gt must be given the same number of times")
    thresholds = _parse_thresholds(args.thresholds)
    t_errs, r_errs = [], []
    for pred_path, gt_path in zip(args.pred, args.gt):
        pred = _read_best_pose(pred_path)
        gt = lio.read_pose(gt_path)
        t_errs.append(float(np.linalg.norm(pred.t - gt.t)))
        r_errs.append(rotation_angle(pred.R, gt.R))
    t_med = statistics.median(t_errs)
    r_med = statistics.median(r_errs)
    print(f"pairs: {len(t_errs)}")
    print(f"median t-error (m): {t_med:.6g}")
    print(f"median R-error (deg): {r_med:.6g}")
    rows = []
    for t_thr, r_thr in thresholds:
        acc = float(
            np.mean(
                [
                    (te < t_thr) and (re < r_thr)
                    for te, re in zip(t_errs, r_errs)
                ]
            )
        )
        rows.append((t_thr, r_thr, acc))
        print(f"accuracy @ ({t_thr:g} m, {r_thr:g} deg): {acc:.4f}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t_threshold_m", "r_threshold_deg", "accuracy"])
            w.writerows(rows)
    if args.fig:
        from .plots import save_recall_curves

        save_recall_curves(t_errs, r_errs, args.fig)
    return 0


def _cmd_filter_keypoints(args) -> int:
    if args.map:
        line_map = lio.read_map(args.map)
        lam = args.lam if args.lam is not None else DEFAULT_LAMBDA_3D
        segments = list(line_map.segments)
        if args.principal_only:
            p3d = directions_3d(line_map, min(args.principal_k, 3))
            from .directions import assign_lines_3d

            groups = assign_lines_3d(
                line_map, _pad_triplet(p3d.directions), DEFAULT_ASSIGN_TOL
            )
            segments = [s for g in groups for s in g]
        kept = filter_keypoints_3d(line_map.keypoints, segments, lam)
        out = LineMap3D(
            line_map.segments, line_map.bbox_min, line_map.bbox_max, kept
        )
        lio.write_map(args.out, out)
        print(f"kept {len(kept)}/{len(line_map.keypoints)} keypoints")
    else:
        query = lio.read_query(args.query)
        lam = args.lam if args.lam is not None else DEFAULT_LAMBDA_2D
        arcs = list(query.arcs)
        if args.principal_only:
            p2d = vanishing_points_2d(query, max(args.principal_k, 3))
            dirs = p2d.directions[: args.principal_k]
            arcs = restrict_arcs_to_principal(arcs, dirs, DEFAULT_ASSIGN_TOL)
        kept = filter_keypoints_2d(query.keypoints, arcs, lam)
        lio.write_query(args.out, QueryLines2D(query.arcs, kept))
        print(f"kept {len(kept)}/{len(query.keypoints)} keypoints")
    return 0


def _cmd_bench(args) -> int:
    line_map = lio.read_map(args.map)
    query = lio.read_query(args.query)
    stages = {
        "direction_estimation": [],
        "rotation_enumeration": [],
        "field_computation": [],
        "ranking": [],
    }
    cfg = SearchConfig(n_translations=args.nt)
    for _ in range(args.repeat):
        map_f, removed = filter_lines_3d(line_map, args.lam)
        query_f = filter_lines_2d(query, removed)

        t0 = time.perf_counter()
        p2d = vanishing_points_2d(query_f)
        p3d = directions_3d(map_f)
        stages["direction_estimation"].append(time.perf_counter() - t0)

        t0 = time.perf_counter()
        rotations = enumerate_rotations(p2d, p3d)
        stages["rotation_enumeration"].append(time.perf_counter() - t0)

        centers = translation_pool(map_f, args.nt)
        t0 = time.perf_counter()
        counts, scores = evaluate_pool(
            query_f, map_f, rotations, centers, cfg, args.threads
        )
        stages["field_computation"].append(time.perf_counter() - t0)

        t0 = time.perf_counter()
        select_top(counts, scores, rotations, centers, cfg)
        stages["ranking"].append(time.perf_counter() - t0)

    rows = []
    for name, vals in stages.items():
        mean = statistics.mean(vals)
        std = statistics.stdev(vals) if len(vals) > 1 else 0.0
        rows.append((name, mean, std))
        print(f"{name}: mean {mean * 1e3:.2f} ms, stdev {std * 1e3:.2f} ms")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["stage", "mean_s", "stdev_s"])
            w.writerows(rows)
    if args.fig:
        from .plots import save_stage_timings

        save_stage_timings(rows, args.fig)
    return 0


# ---------------------------------------------------------------------------


def _parse_floats(text: str, n: int, flag: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"{flag}: expected comma-separated numbers")
    if len(vals) != n:
        raise UsageError(f"{flag}: expected {n} values, got {len(vals)}")
    return vals


def _parse_thresholds(text: str) -> list[tuple[float, float]]:
    out = []
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        bits = part.split(",")
        if len(bits) != 2:
            raise UsageError(f"--thresholds: malformed pair '{part}'")
        try:
            t = float(bits[0].strip().removesuffix("m"))
            r = float(bits[1].strip().removesuffix("deg"))
        except ValueError:
            raise UsageError(f"--thresholds: malformed pair '{part}'")
        out.append((t, r))
    if not out:
        raise UsageError("--thresholds: no threshold pairs given")
    return out


def _read_best_pose(path) -> Pose:
    """Read a pose file, or the top entry of a results file."""
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}")
    kind = obj.get("kind") if isinstance(obj, dict) else None
    if kind == "results":
        results = lio.read_results(path)
        if not results:
            raise ParseError(f"{path}: results file contains no poses")
        return results[0].pose
    return lio.read_pose(path)


def _read_config_bundle(path) -> dict:
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}")
    if not isinstance(obj, dict):
        raise ParseError(f"{path}: top level must be an object")
    out = {}
    for section in ("search", "ransac", "sim"):
        if section in obj:
            if not isinstance(obj[section], dict):
                raise ParseError(f"{path}: section '{section}' must be an object")
            out[section] = obj[section]
    return out


def _random_pose(rng, scene: LineMap3D) -> Pose:
    ext = scene.extents
    lo = scene.bbox_min + 0.2 * ext
    hi = scene.bbox_max - 0.2 * ext
    center = rng.uniform(lo, hi)
    yaw = rng.uniform(0.0, 2.0 * math.pi)
    pitch = math.radians(rng.uniform(-10.0, 10.0))
    roll = math.radians(rng.uniform(-10.0, 10.0))
    return Pose.from_camera_center(yaw_pitch_roll(yaw, pitch, roll), center)


def _with_synthetic_keypoints(scene: LineMap3D, n: int, seed: int) -> LineMap3D:
    """Attach keypoints: half on segments (structural), half scattered."""
    if n <= 0:
        return scene
    rng = np.random.default_rng(np.random.SeedSequence([seed, 2]))
    starts = np.array([s.s for s in scene.segments])
    ends = np.array([s.e for s in scene.segments])
    lengths = np.linalg.norm(ends - starts, axis=1)
    probs = lengths / lengths.sum()
    n_line = n // 2
    keypoints = []
    idx = rng.choice(len(lengths), size=n_line, p=probs)
    u = rng.random(n_line)
    on_lines = starts[idx] + u[:, None] * (ends[idx] - starts[idx])
    for i in range(n_line):
        keypoints.append((on_lines[i], i))
    scattered = rng.uniform(scene.bbox_min, scene.bbox_max, size=(n - n_line, 3))
    for j in range(n - n_line):
        keypoints.append((scattered[j], n_line + j))
    return LineMap3D(scene.segments, scene.bbox_min, scene.bbox_max, keypoints)


def _project_keypoints(
    scene: LineMap3D, query: QueryLines2D, pose: Pose
) -> QueryLines2D:
    from .geometry import project_point

    kps = []
    for p, i in scene.keypoints:
        try:
            kps.append((project_point(p, pose), i))
        except LinelocError:
            continue
    return QueryLines2D(query.arcs, kps)


def _pad_triplet(directions):
    """Pad a short direction list to three entries for the assigner."""
    dirs = list(directions)
    while len(dirs) < 3:
        dirs.append(dirs[-1])
    return dirs[:3]


if __name__ == "__main__":
    sys.exit(main())
