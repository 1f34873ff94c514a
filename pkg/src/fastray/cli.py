"""Command-line front end.

Subcommands:

    build-lut   precompute a lookup table from calibration
    transform   apply a view transformation to a feature file
    bench       run the latency suite and write a CSV report
    validate    run the oracle-equivalence property suite
    fuse        align and concatenate multi-frame BEV features

Exit codes: 0 success, 1 validation failure, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .augment import (
    BevAugConfig,
    ImageAugConfig,
    apply_bev_aug,
    apply_image_aug,
    sample_bev_aug,
    sample_image_aug,
)
from .bench import BenchConfig, run_benchmark, suite_config, synth_depth, write_csv
from .bevops import BevFeature
from .calib import CalibrationError, bundled_rig, load_calibration
from .geometry import (
    CameraRig,
    RigidTransform,
    VoxelGridSpec,
    DEFAULT_GRID_RANGES,
    project_point,
    voxel_center,
)
from .lut import build_history_lut, build_lut, deserialize_lut, load_lut, save_lut, serialize_lut
from .temporal import FrameSample, fuse_frames
from .tensorio import FormatError, load_tensor, save_tensor
from .viewtrans import (
    FeatureStack,
    fast_ray_transform,
    lss_reference_transform,
    naive_transform,
)

USAGE_ERROR = 2
VALIDATION_ERROR = 1


def parse_grid_arg(text: str) -> tuple[int, int, int]:
    parts = text.lower().split("x")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"grid must look like 200x200x4, got {text!r}")
    try:
        nx, ny, nz = (int(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must contain integers, got {text!r}")
    return nx, ny, nz


def parse_range_arg(text: str):
    axes = text.split(",")
    if len(axes) != 3:
        raise argparse.ArgumentTypeError(
            f"range must be x0:x1,y0:y1,z0:z1 in meters, got {text!r}"
        )
    out = []
    for axis in axes:
        lohi = axis.split(":")
        if len(lohi) != 2:
            raise argparse.ArgumentTypeError(f"bad axis range {axis!r}")
        try:
            out.append((float(lohi[0]), float(lohi[1])))
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad axis range {axis!r}")
    return tuple(out)


def make_grid(dims: tuple[int, int, int], ranges) -> VoxelGridSpec:
    (xr, yr, zr) = ranges
    return VoxelGridSpec(xr, yr, zr, *dims)


def _add_grid_args(p: argparse.ArgumentParser, required: bool = True) -> None:
    p.add_argument("--grid", type=parse_grid_arg, required=required,
                   help="cell counts NXxNYxNZ, e.g. 200x200x4")
    p.add_argument("--range", type=parse_range_arg, default=DEFAULT_GRID_RANGES,
                   dest="ranges",
                   help="metric extent x0:x1,y0:y1,z0:z1; write --range=-50:50,... "
                        "when the first bound is negative (default %(default)s)")


def _add_threads_arg(p: argparse.ArgumentParser) -> None:
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: FASTRAY_THREADS or 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fastray",
        description="LUT-based camera-to-BEV view transformation toolkit",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-lut", help="precompute a lookup table from calibration")
    p.add_argument("--calib", required=True, help="calibration JSON path")
    _add_grid_args(p)
    p.add_argument("--out", required=True, help="output FBLT path")
    p.add_argument("--history-frame", type=int, default=None, metavar="IDX",
                   help="build for history frame IDX aligned to frame 0 (current)")
    _add_threads_arg(p)

    p = sub.add_parser("transform", help="apply a view transformation to features")
    p.add_argument("--lut", required=True, help="FBLT table path")
    p.add_argument("--features", required=True, help="FBTF feature stack path (N,C,H,W)")
    p.add_argument("--out", required=True, help="output FBTF volume path (nx,ny,nz,C)")
    p.add_argument("--method", choices=("fast", "naive", "lss"), default="fast")
    p.add_argument("--calib", help="calibration JSON (required for naive/lss)")
    p.add_argument("--range", type=parse_range_arg, default=DEFAULT_GRID_RANGES,
                   dest="ranges", help="metric extent used when the table was built")
    p.add_argument("--aggregation", choices=("first_view", "mean"), default="first_view",
                   help="naive-method overlap handling")
    p.add_argument("--depth-bins", type=int, default=8, help="lss synthetic depth bins")
    p.add_argument("--depth-seed", type=int, default=0, help="lss synthetic depth seed")
    _add_threads_arg(p)

    p = sub.add_parser("bench", help="run the latency suite and write CSV")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--suite", choices=tuple("s%d" % i for i in range(1, 7)),
                       help="bundled configuration name")
    group.add_argument("--config", help="JSON file with BenchConfig fields")
    p.add_argument("--csv", required=True, help="output CSV path")
    p.add_argument("--calib", help="calibration JSON (default: bundled surround rig)")
    _add_threads_arg(p)

    p = sub.add_parser("validate", help="run the oracle-equivalence property suite")
    p.add_argument("--calib", help="calibration JSON (default: bundled surround rig)")
    p.add_argument("--grid", type=parse_grid_arg, default=(32, 32, 4),
                   help="cell counts for the checks (default 32x32x4)")
    p.add_argument("--range", type=parse_range_arg, default=DEFAULT_GRID_RANGES, dest="ranges")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="run-config JSON with augment sampling ranges")
    _add_threads_arg(p)

    p = sub.add_parser("fuse", help="align history BEV features and concatenate")
    p.add_argument("--frames", nargs="+", required=True, metavar="FBTF",
                   help="BEV feature files, current frame first, then most recent history")
    p.add_argument("--poses", required=True,
                   help="calibration JSON whose frames[i] is the pose of frames file i")
    p.add_argument("--out", required=True, help="output FBTF path")
    p.add_argument("--mode", choices=("nearest", "bilinear"), default="nearest")
    p.add_argument("--range", type=parse_range_arg, default=DEFAULT_GRID_RANGES, dest="ranges")
    _add_threads_arg(p)

    return parser


def _load_rig(path: str | None) -> tuple[CameraRig, list]:
    if path is None:
        return bundled_rig()
    return load_calibration(path)


def cmd_build_lut(args) -> int:
    rig, frames = load_calibration(args.calib)
    grid = make_grid(args.grid, args.ranges)
    if args.history_frame is None:
        lut = build_lut(rig, grid, threads=args.threads)
    else:
        if not (0 <= args.history_frame < len(frames)) or not frames:
            print(f"error: history frame {args.history_frame} out of range "
                  f"(calibration has {len(frames)} frames)", file=sys.stderr)
            return USAGE_ERROR
        cur = frames[0].world_from_ego
        hist = frames[args.history_frame].world_from_ego
        from .geometry import compose
        motion = compose(cur.inverse(), hist)
        lut = build_history_lut(rig, grid, motion, threads=args.threads)
    save_lut(args.out, lut)
    print(f"wrote {args.out}: {grid.nx}x{grid.ny}x{grid.nz}, "
          f"{lut.n_cameras} cameras, {lut.mapped_fraction:.1%} mapped")
    return 0


def cmd_transform(args) -> int:
    features = FeatureStack(load_tensor(args.features)).validate_finite()
    if args.method == "fast":
        # The gather itself never consults metric ranges, only cell counts.
        lut = load_lut(args.lut)
        volume = fast_ray_transform(features, lut, threads=args.threads)
    else:
        if not args.calib:
            print("error: --calib is required for naive/lss methods", file=sys.stderr)
            return USAGE_ERROR
        rig, _ = load_calibration(args.calib)
        header = load_lut(args.lut)
        grid = make_grid((header.grid.nx, header.grid.ny, header.grid.nz), args.ranges)
        if args.method == "naive":
            volume = naive_transform(features, rig, grid, args.aggregation, threads=args.threads)
        else:
            cfg = BenchConfig(
                name="cli", n_cameras=features.n_cameras, channels=features.channels,
                height=features.height, width=features.width,
                bev_channels=features.channels, bev_x=grid.nx, bev_y=grid.ny,
                bev_z=grid.nz, depth_bins=args.depth_bins, seed=args.depth_seed,
            )
            depth = synth_depth(cfg, grid)
            volume = lss_reference_transform(features, depth, rig, grid, threads=args.threads)
    save_tensor(args.out, volume.data)
    print(f"wrote {args.out}: volume {volume.data.shape}")
    return 0


def cmd_bench(args) -> int:
    if args.suite:
        config = suite_config(args.suite, threads=args.threads)
    else:
        with open(args.config, "r", encoding="utf-8") as f:
            fields = json.load(f)
        if args.threads is not None:
            fields["threads"] = args.threads
        config = BenchConfig(**fields)
    rig, _ = _load_rig(args.calib)
    report = run_benchmark(config, rig)
    write_csv(args.csv, [report])
    fast = report.methods["fast_ray"].median
    naive = report.methods["naive"].median
    lss = report.methods["lss_reference"].median
    print(f"{config.name}: lut build {report.lut_build_s * 1e3:.2f} ms")
    print(f"  fast_ray      {fast * 1e3:10.3f} ms/call")
    print(f"  naive         {naive * 1e3:10.3f} ms/call  ({naive / fast:5.1f}x fast_ray)")
    print(f"  lss_reference {lss * 1e3:10.3f} ms/call  ({lss / fast:5.1f}x fast_ray)")
    print(f"wrote {args.csv}")
    return 0


def _property_results(args) -> list[tuple[str, bool, str]]:
    from .geometry import compose

    rig, _ = _load_rig(args.calib)
    grid = make_grid(args.grid, args.ranges)
    threads = args.threads
    rng = np.random.default_rng(args.seed)
    results: list[tuple[str, bool, str]] = []

    feat_h = max(c.intrinsics.height for c in rig)
    feat_w = max(c.intrinsics.width for c in rig)
    if feat_h > 64 or feat_w > 64:
        from .bench import resize_rig

        scale = 64 / max(feat_h, feat_w)
        rig = resize_rig(rig, max(1, int(feat_w * scale)), max(1, int(feat_h * scale)))
    h = max(c.intrinsics.height for c in rig)
    w = max(c.intrinsics.width for c in rig)

    lut = build_lut(rig, grid, threads=threads)

    # Re-projection check through the scalar projection path, entry by entry.
    n_check = min(grid.n_voxels, 4096)
    offsets = rng.choice(grid.n_voxels, size=n_check, replace=False)
    bad = 0
    for off in offsets:
        i, rem = divmod(int(off), grid.ny * grid.nz)
        j, k = divmod(rem, grid.nz)
        center = voxel_center(grid, i, j, k)
        legal_hits = []
        for ci, cam in enumerate(rig):
            hit = project_point(center, cam.intrinsics, cam.cam_from_ego)
            if hit is None:
                continue
            u, v = int(np.floor(hit[0])), int(np.floor(hit[1]))
            if 0 <= u < cam.intrinsics.width and 0 <= v < cam.intrinsics.height:
                legal_hits.append((ci, u, v))
        entry = tuple(int(x) for x in lut.entries[off])
        expect = legal_hits[0] if legal_hits else (-1, -1, -1)
        if entry != expect:
            bad += 1
    results.append((
        "lut-first-view-reprojection", bad == 0,
        f"{bad}/{n_check} entries disagree with scalar re-projection",
    ))

    feats = FeatureStack(
        rng.uniform(-1.0, 1.0, (len(rig), 8, h, w)).astype(np.float32)
    )
    fast = fast_ray_transform(feats, lut, threads=threads)
    naive = naive_transform(feats, rig, grid, "first_view", threads=threads)
    results.append((
        "fast-equals-naive-first-view", np.array_equal(fast.data, naive.data),
        "volumes are not element-identical",
    ))

    zero = build_history_lut(rig, grid, RigidTransform.identity(), threads=threads)
    results.append((
        "history-lut-zero-motion", serialize_lut(zero) == serialize_lut(lut),
        "zero-motion history table is not byte-identical",
    ))

    blob = serialize_lut(lut)
    round_trip = serialize_lut(deserialize_lut(blob, grid=grid))
    results.append((
        "lut-serialization-round-trip", round_trip == blob,
        "serialize/deserialize/serialize changed bytes",
    ))

    rebuilt = build_lut(rig, grid, threads=4)
    again = fast_ray_transform(feats, lut, threads=4)
    results.append((
        "thread-count-determinism",
        serialize_lut(rebuilt) == blob and np.array_equal(again.data, fast.data),
        "results changed with thread count",
    ))

    img_cfg = ImageAugConfig()
    bev_cfg = BevAugConfig()
    if args.config:
        with open(args.config, "r", encoding="utf-8") as f:
            doc = json.load(f)
        aug = doc.get("augment", {})
        if "image" in aug:
            img_cfg = ImageAugConfig(**{k: tuple(v) if isinstance(v, list) else v
                                        for k, v in aug["image"].items()})
        if "bev" in aug:
            bev_cfg = BevAugConfig(**{k: tuple(v) if isinstance(v, list) else v
                                      for k, v in aug["bev"].items()})

    cam = rig[0]
    worst = 0.0
    for _ in range(200):
        aug = sample_image_aug(img_cfg, cam.intrinsics.width, cam.intrinsics.height, rng)
        k2 = apply_image_aug(aug, cam.intrinsics)
        pts = rng.uniform(-20, 20, (50, 3))
        pts[:, 0] = np.abs(pts[:, 0]) + 1.0  # keep points in front
        for p in pts:
            hit = project_point(p, cam.intrinsics, cam.cam_from_ego)
            if hit is None:
                continue
            warped = aug.apply_pixels(np.array([hit[:2]]))[0]
            direct = project_point(p, k2, cam.cam_from_ego)
            worst = max(worst, float(np.abs(warped - np.array(direct[:2])).max()))
    results.append((
        "image-aug-two-path", worst <= 1e-6, f"max pixel error {worst:.3e}",
    ))

    worst = 0.0
    for _ in range(200):
        aug = sample_bev_aug(bev_cfg, rng)
        new_rig, _ = apply_bev_aug(aug, rig, [])
        p = rng.uniform(-30, 30, 3)
        q = aug.apply_points(p)
        for cam_a, cam_b in zip(rig, new_rig):
            h1 = project_point(p, cam_a.intrinsics, cam_a.cam_from_ego)
            h2 = project_point(q, cam_b.intrinsics, cam_b.cam_from_ego)
            if (h1 is None) != (h2 is None):
                worst = np.inf
            elif h1 is not None:
                worst = max(worst, float(np.abs(np.array(h1[:2]) - np.array(h2[:2])).max()))
    results.append((
        "bev-aug-two-path", worst <= 1e-6, f"max pixel error {worst:.3e}",
    ))
    return results


def cmd_validate(args) -> int:
    results = _property_results(args)
    failed = 0
    for name, ok, detail in results:
        if ok:
            print(f"PASS {name}")
        else:
            failed += 1
            print(f"FAIL {name}: {detail}")
    if failed:
        print(f"{failed}/{len(results)} properties failed")
        return VALIDATION_ERROR
    print(f"all {len(results)} properties passed")
    return 0


def cmd_fuse(args) -> int:
    rig, frames = load_calibration(args.poses)
    if len(frames) < len(args.frames):
        print(f"error: {len(args.frames)} feature files but only {len(frames)} poses",
              file=sys.stderr)
        return USAGE_ERROR
    bevs = [BevFeature(load_tensor(p)) for p in args.frames]
    nx, ny = bevs[0].nx, bevs[0].ny
    grid = make_grid((nx, ny, 1), args.ranges)
    current = bevs[0]
    cur_pose = frames[0].world_from_ego
    history = [
        FrameSample(frames[i].timestamp, frames[i].world_from_ego, bevs[i])
        for i in range(1, len(bevs))
    ]
    fused = fuse_frames(current, history, cur_pose, grid, mode=args.mode, threads=args.threads)
    save_tensor(args.out, fused.data)
    print(f"wrote {args.out}: fused {fused.data.shape}")
    return 0


def cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handlers = {
        "build-lut": cmd_build_lut,
        "transform": cmd_transform,
        "bench": cmd_bench,
        "validate": cmd_validate,
        "fuse": cmd_fuse,
    }
    try:
        return handlers[args.command](args)
    except (FileNotFoundError, FormatError, CalibrationError, ValueError, TypeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR


def main() -> None:
    sys.exit(cli())
