"""Latency harness: timed view-transform comparisons with CSV reports.

Each benchmark run pins one configuration (feature dims in, BEV dims out),
feeds the identical synthetic feature stack to every method, and times
repeated applies with a monotonic clock after discarding warmup calls.
Table construction is timed separately from table application, since the
whole point of the table route is that its cost is paid once. For the
table path a second timing series reuses a preallocated output buffer, so
allocation-included and allocation-excluded costs are both visible.

The bundled suite spans small to large settings; its concrete dimensions
are a property of this harness, chosen to ramp feature and BEV sizes
together, and can be overridden by a config file.
"""

from __future__ import annotations

import cProfile
import csv
import io
import platform
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__ as _pkg_version
from ._kernels import HAVE_NUMBA
from .augment import ImageAug, apply_image_aug
from .geometry import Camera, CameraRig, VoxelGridSpec, default_grid
from .lut import build_lut
from .parallel import resolve_threads
from .viewtrans import (
    DepthDistribution,
    FeatureStack,
    fast_ray_transform,
    lss_reference_transform,
    naive_transform,
)

__all__ = [
    "BenchConfig",
    "MethodStats",
    "BenchReport",
    "SUITE",
    "suite_config",
    "synth_features",
    "synth_depth",
    "resize_rig",
    "run_benchmark",
    "write_csv",
    "read_csv",
]

CSV_SCHEMA_VERSION = 1
METHODS = ("fast_ray", "naive", "lss_reference")

# name -> (channels, feat H, feat W, bev X, bev Y, bev Z)
SUITE: dict[str, tuple[int, int, int, int, int, int]] = {
    "s1": (64, 16, 44, 128, 128, 1),
    "s2": (64, 24, 66, 160, 160, 1),
    "s3": (80, 32, 88, 192, 192, 1),
    "s4": (96, 40, 110, 224, 224, 1),
    "s5": (112, 48, 132, 240, 240, 1),
    "s6": (128, 64, 176, 256, 256, 1),
}


@dataclass(frozen=True)
class BenchConfig:
    """One benchmark setting: tensor dims, repetition counts, threading."""

    name: str
    n_cameras: int = 6
    channels: int = 80
    height: int = 32
    width: int = 88
    bev_channels: int = 80
    bev_x: int = 192
    bev_y: int = 192
    bev_z: int = 1
    repetitions: int = 5
    warmup: int = 2
    threads: int | None = None
    depth_bins: int = 8
    seed: int = 0

    def __post_init__(self):
        dims = (
            self.n_cameras, self.channels, self.height, self.width,
            self.bev_channels, self.bev_x, self.bev_y, self.bev_z, self.depth_bins,
        )
        if min(dims) < 1:
            raise ValueError(f"all dimensions must be >= 1, got {dims}")
        if self.repetitions < 3:
            raise ValueError(f"repetitions must be >= 3, got {self.repetitions}")
        if self.warmup < 0:
            raise ValueError(f"warmup must be >= 0, got {self.warmup}")
        if self.bev_channels != self.channels:
            raise ValueError(
                "the transforms preserve channel count; bev_channels must equal channels"
            )


def suite_config(name: str, **overrides) -> BenchConfig:
    key = name.lower()
    if key not in SUITE:
        raise ValueError(f"unknown suite entry {name!r}; choose from {sorted(SUITE)}")
    c, h, w, x, y, z = SUITE[key]
    base = BenchConfig(
        name=key, channels=c, height=h, width=w,
        bev_channels=c, bev_x=x, bev_y=y, bev_z=z,
    )
    return replace(base, **overrides) if overrides else base


@dataclass(frozen=True)
class MethodStats:
    """Per-call wall times (seconds) for one method, post-warmup."""

    samples: tuple[float, ...]

    def __post_init__(self):
        if not self.samples:
            raise ValueError("stats need at least one sample")
        if min(self.samples) <= 0.0:
            raise ValueError("wall times must be positive")
        object.__setattr__(self, "samples", tuple(float(s) for s in self.samples))

    @property
    def min(self) -> float:
        return min(self.samples)

    @property
    def median(self) -> float:
        return float(np.median(self.samples))

    @property
    def mean(self) -> float:
        return float(np.mean(self.samples))

    @property
    def p95(self) -> float:
        return float(np.percentile(self.samples, 95))


@dataclass
class BenchReport:
    config: BenchConfig
    lut_build_s: float
    methods: dict[str, MethodStats]
    fast_alloc_excl: MethodStats | None
    projection_free: bool
    fast_call_graph: tuple[str, ...]
    env: dict[str, str] = field(default_factory=dict)


def environment_metadata(threads: int) -> dict[str, str]:
    return {
        "platform": platform.platform(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "kernel": "numba" if HAVE_NUMBA else "numpy",
        "threads": str(threads),
        "package": _pkg_version,
    }


def synth_features(config: BenchConfig, seed: int | None = None) -> FeatureStack:
    """Deterministic random feature stack in [-1, 1]; same seed, same bits."""
    rng = np.random.default_rng(config.seed if seed is None else seed)
    data = rng.uniform(
        -1.0, 1.0, (config.n_cameras, config.channels, config.height, config.width)
    )
    return FeatureStack(data.astype(np.float32))


def synth_depth(
    config: BenchConfig, grid: VoxelGridSpec, seed: int | None = None
) -> DepthDistribution:
    """Deterministic random depth weights with bins spanning the grid reach."""
    rng = np.random.default_rng([config.seed if seed is None else seed, 1])
    weights = rng.uniform(
        0.0, 1.0, (config.n_cameras, config.depth_bins, config.height, config.width)
    ).astype(np.float32)
    reach = max(
        abs(grid.x_range[0]), abs(grid.x_range[1]),
        abs(grid.y_range[0]), abs(grid.y_range[1]),
    )
    bins = np.linspace(1.0, max(reach, 2.0), config.depth_bins)
    return DepthDistribution(weights, bins)


def resize_rig(rig: CameraRig, width: int, height: int) -> CameraRig:
    """Refit a full-resolution rig to feature-map pixels via intrinsic folding."""
    cams = []
    for cam in rig:
        aug = ImageAug.resize(cam.intrinsics.width, cam.intrinsics.height, width, height)
        cams.append(Camera(cam.name, apply_image_aug(aug, cam.intrinsics), cam.cam_from_ego))
    return CameraRig(tuple(cams))


def config_grid(config: BenchConfig) -> VoxelGridSpec:
    return default_grid(config.bev_x, config.bev_y, config.bev_z)


def _time_calls(fn, repetitions: int, warmup: int) -> MethodStats:
    for _ in range(warmup):
        fn()
    samples = []
    for _ in range(repetitions):
        t0 = time.perf_counter()
        fn()
        t1 = time.perf_counter()
        samples.append(t1 - t0)
    return MethodStats(tuple(samples))


def _profile_call_graph(fn) -> tuple[str, ...]:
    prof = cProfile.Profile()
    prof.enable()
    fn()
    prof.disable()
    names = set()
    for entry in prof.getstats():
        code = entry.code
        if isinstance(code, str):
            names.add(code)
        else:
            mod = code.co_filename.rsplit("/", 1)[-1]
            names.add(f"{mod}:{code.co_name}")
    return tuple(sorted(names))


def run_benchmark(
    config: BenchConfig, rig: CameraRig, grid: VoxelGridSpec | None = None
) -> BenchReport:
    """Time all three transforms on identical inputs and return the report.

    The rig is refit to the config's feature resolution; the table is built
    once up front (timed on its own). The fast and naive volumes are
    required to be element-identical, keeping the comparison honest, and a
    profile of one table apply is recorded so the report documents that no
    projection code runs at apply time.
    """
    if len(rig) != config.n_cameras:
        raise ValueError(f"config expects {config.n_cameras} cameras, rig has {len(rig)}")
    threads = resolve_threads(config.threads)
    if grid is None:
        grid = config_grid(config)
    feat_rig = resize_rig(rig, config.width, config.height)
    features = synth_features(config)
    depth = synth_depth(config, grid)

    t0 = time.perf_counter()
    lut = build_lut(feat_rig, grid, threads=threads)
    lut_build_s = time.perf_counter() - t0

    fast_vol = fast_ray_transform(features, lut, threads=threads)
    naive_vol = naive_transform(features, feat_rig, grid, "first_view", threads=threads)
    if not np.array_equal(fast_vol.data, naive_vol.data):
        raise AssertionError("fast_ray and naive volumes diverged; benchmark aborted")

    # One contiguous timed series per method, each preceded by its own
    # warmup: every method is measured with its working set warm, as it
    # would run in steady-state deployment, not under another method's
    # cache pollution.
    methods = {
        "fast_ray": _time_calls(
            lambda: fast_ray_transform(features, lut, threads=threads),
            config.repetitions, config.warmup,
        ),
        "naive": _time_calls(
            lambda: naive_transform(features, feat_rig, grid, "first_view", threads=threads),
            config.repetitions, config.warmup,
        ),
        "lss_reference": _time_calls(
            lambda: lss_reference_transform(features, depth, feat_rig, grid, threads=threads),
            config.repetitions, config.warmup,
        ),
    }

    buffer = np.zeros_like(fast_vol.data)
    fast_alloc_excl = _time_calls(
        lambda: fast_ray_transform(features, lut, out=buffer, threads=threads),
        config.repetitions, config.warmup,
    )

    call_graph = _profile_call_graph(
        lambda: fast_ray_transform(features, lut, threads=threads)
    )
    projection_free = not any(
        "geometry" in name or "project" in name for name in call_graph
    )

    return BenchReport(
        config=config,
        lut_build_s=lut_build_s,
        methods=methods,
        fast_alloc_excl=fast_alloc_excl,
        projection_free=projection_free,
        fast_call_graph=call_graph,
        env=environment_metadata(threads),
    )


CSV_COLUMNS = [
    "schema_version", "name", "method",
    "n_cameras", "channels", "height", "width",
    "bev_x", "bev_y", "bev_z", "depth_bins", "seed",
    "repetitions", "warmup", "threads",
    "lut_build_s", "min_s", "median_s", "mean_s", "p95_s",
    "samples_s", "alloc_excl_samples_s",
    "projection_free", "fast_call_graph",
    "platform", "python", "numpy", "kernel", "package",
]


def _report_rows(report: BenchReport) -> list[dict[str, str]]:
    cfg = report.config
    rows = []
    for method in METHODS:
        stats = report.methods[method]
        is_fast = method == "fast_ray"
        rows.append({
            "schema_version": str(CSV_SCHEMA_VERSION),
            "name": cfg.name,
            "method": method,
            "n_cameras": str(cfg.n_cameras),
            "channels": str(cfg.channels),
            "height": str(cfg.height),
            "width": str(cfg.width),
            "bev_x": str(cfg.bev_x),
            "bev_y": str(cfg.bev_y),
            "bev_z": str(cfg.bev_z),
            "depth_bins": str(cfg.depth_bins),
            "seed": str(cfg.seed),
            "repetitions": str(cfg.repetitions),
            "warmup": str(cfg.warmup),
            "threads": report.env.get("threads", "1"),
            "lut_build_s": repr(report.lut_build_s),
            "min_s": repr(stats.min),
            "median_s": repr(stats.median),
            "mean_s": repr(stats.mean),
            "p95_s": repr(stats.p95),
            "samples_s": ";".join(repr(s) for s in stats.samples),
            "alloc_excl_samples_s": (
                ";".join(repr(s) for s in report.fast_alloc_excl.samples)
                if is_fast and report.fast_alloc_excl is not None else ""
            ),
            "projection_free": ("true" if report.projection_free else "false") if is_fast else "",
            "fast_call_graph": ";".join(report.fast_call_graph) if is_fast else "",
            "platform": report.env.get("platform", ""),
            "python": report.env.get("python", ""),
            "numpy": report.env.get("numpy", ""),
            "kernel": report.env.get("kernel", ""),
            "package": report.env.get("package", ""),
        })
    return rows


def dumps_csv(reports: list[BenchReport]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for report in reports:
        for row in _report_rows(report):
            writer.writerow(row)
    return buf.getvalue()


def write_csv(path, reports: list[BenchReport]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(dumps_csv(reports))


def loads_csv(text: str) -> list[BenchReport]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != CSV_COLUMNS:
        raise ValueError(
            f"CSV schema mismatch: expected columns {CSV_COLUMNS}, got {reader.fieldnames}"
        )
    grouped: dict[tuple, dict] = {}
    for row in reader:
        if int(row["schema_version"]) != CSV_SCHEMA_VERSION:
            raise ValueError(f"unsupported CSV schema version {row['schema_version']}")
        cfg = BenchConfig(
            name=row["name"],
            n_cameras=int(row["n_cameras"]),
            channels=int(row["channels"]),
            height=int(row["height"]),
            width=int(row["width"]),
            bev_channels=int(row["channels"]),
            bev_x=int(row["bev_x"]),
            bev_y=int(row["bev_y"]),
            bev_z=int(row["bev_z"]),
            depth_bins=int(row["depth_bins"]),
            seed=int(row["seed"]),
            repetitions=int(row["repetitions"]),
            warmup=int(row["warmup"]),
            threads=int(row["threads"]),
        )
        key = (cfg.name, cfg.seed)
        entry = grouped.setdefault(key, {
            "config": cfg,
            "lut_build_s": float(row["lut_build_s"]),
            "methods": {},
            "fast_alloc_excl": None,
            "projection_free": False,
            "fast_call_graph": (),
            "env": {
                "platform": row["platform"],
                "python": row["python"],
                "numpy": row["numpy"],
                "kernel": row["kernel"],
                "threads": row["threads"],
                "package": row["package"],
            },
        })
        samples = tuple(float(s) for s in row["samples_s"].split(";"))
        entry["methods"][row["method"]] = MethodStats(samples)
        if row["method"] == "fast_ray":
            if row["alloc_excl_samples_s"]:
                entry["fast_alloc_excl"] = MethodStats(
                    tuple(float(s) for s in row["alloc_excl_samples_s"].split(";"))
                )
            entry["projection_free"] = row["projection_free"] == "true"
            entry["fast_call_graph"] = (
                tuple(row["fast_call_graph"].split(";")) if row["fast_call_graph"] else ()
            )
    return [BenchReport(**entry) for entry in grouped.values()]


def read_csv(path) -> list[BenchReport]:
    with open(path, "r", encoding="utf-8", newline="") as f:
        return loads_csv(f.read())
