"""2D-to-3D view transformations: table-driven, naive, and depth-weighted.

Three routes from multi-camera image features to a dense voxel volume:

* :func:`fast_ray_transform` applies a precomputed :class:`LookupTable`.
  Every voxel is either a plain copy of one pixel's feature vector or zero;
  no projection arithmetic happens at apply time.
* :func:`naive_transform` is the reference baseline it replaces: each call
  re-projects every voxel center into every camera, materializes one dense
  volume per camera, and aggregates them afterwards.
* :func:`lss_reference_transform` is the depth-distribution baseline:
  features are scattered along each pixel ray weighted by per-bin depth
  probabilities and summed per voxel.

Dense tensors are float32; projection and interpolation arithmetic runs in
float64.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import gather_rows
from .geometry import (
    Camera,
    CameraIntrinsics,
    CameraRig,
    VoxelGridSpec,
    project_points,
    voxel_centers,
)
from .lut import LookupTable, build_lut
from .parallel import run_chunked

__all__ = [
    "FeatureStack",
    "VoxelVolume",
    "DepthDistribution",
    "fast_ray_transform",
    "naive_transform",
    "lss_reference_transform",
    "multi_scale_transform",
    "scale_intrinsics",
    "multi_scale_grids",
]


@dataclass
class FeatureStack:
    """N-camera feature tensor, layout [cam][channel][v][u], float32."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float32)
        if arr.ndim != 4:
            raise ValueError(f"feature stack must be 4D (N,C,H,W), got {arr.ndim}D")
        if min(arr.shape) < 1:
            raise ValueError(f"all dims must be >= 1, got {arr.shape}")
        self.data = arr

    @property
    def n_cameras(self) -> int:
        return self.data.shape[0]

    @property
    def channels(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[2]

    @property
    def width(self) -> int:
        return self.data.shape[3]

    def validate_finite(self) -> "FeatureStack":
        """Full finiteness check; used at trust boundaries (file loads)."""
        if not np.all(np.isfinite(self.data)):
            raise ValueError("feature stack contains non-finite values")
        return self


@dataclass
class VoxelVolume:
    """Dense voxel feature volume, layout [i][j][k][channel], float32."""

    grid: VoxelGridSpec
    data: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float32)
        g = self.grid
        if arr.shape[:3] != (g.nx, g.ny, g.nz) or arr.ndim != 4:
            raise ValueError(
                f"volume data must have shape ({g.nx}, {g.ny}, {g.nz}, C), got {arr.shape}"
            )
        self.data = arr

    @property
    def channels(self) -> int:
        return self.data.shape[3]

    def flat(self) -> np.ndarray:
        """(n_voxels, C) view in LUT offset order."""
        return self.data.reshape(-1, self.data.shape[3])


@dataclass
class DepthDistribution:
    """Per-pixel depth-bin weights, layout [cam][bin][v][u], plus bin depths.

    Weights must be non-negative; they are not required to sum to one.
    Bin depths are camera-frame z values, strictly increasing and positive.
    """

    data: np.ndarray
    bin_depths: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float32)
        if arr.ndim != 4:
            raise ValueError(f"depth weights must be 4D (N,D,H,W), got {arr.ndim}D")
        depths = np.asarray(self.bin_depths, dtype=np.float64)
        if depths.ndim != 1 or depths.shape[0] != arr.shape[1]:
            raise ValueError(
                f"bin_depths must have length {arr.shape[1]}, got shape {depths.shape}"
            )
        if depths[0] <= 0.0 or np.any(np.diff(depths) <= 0.0):
            raise ValueError("bin depths must be strictly increasing and positive")
        if arr.size and arr.min() < 0.0:
            raise ValueError("depth weights must be non-negative")
        self.data = arr
        self.bin_depths = depths

    @property
    def n_bins(self) -> int:
        return self.data.shape[1]


def _check_features_against_lut(features: FeatureStack, lut: LookupTable) -> None:
    if features.n_cameras != lut.n_cameras:
        raise ValueError(
            f"camera count mismatch: features have {features.n_cameras}, "
            f"LUT was built for {lut.n_cameras}"
        )
    max_u, max_v = lut.max_pixel()
    if max_u >= features.width or max_v >= features.height:
        raise ValueError(
            f"LUT/feature bound mismatch: LUT addresses pixel ({max_u}, {max_v}), "
            f"features are {features.height}x{features.width}"
        )


def fast_ray_transform(
    features: FeatureStack,
    lut: LookupTable,
    out: np.ndarray | None = None,
    threads: int | None = None,
) -> VoxelVolume:
    """Fill a voxel volume by table lookup: one gather per mapped voxel.

    Apply time contains no projection arithmetic; all geometry was spent
    when the table was built. Mapped voxels copy their pixel's channel
    vector, everything else is zero. Pass ``out`` (an (nx, ny, nz, C)
    float32 array) to reuse an output buffer and skip the allocation.
    """
    _check_features_against_lut(features, lut)
    g = lut.grid
    c = features.channels
    if out is None:
        out = np.zeros((g.nx, g.ny, g.nz, c), dtype=np.float32)
    else:
        if out.shape != (g.nx, g.ny, g.nz, c) or out.dtype != np.float32:
            raise ValueError("out buffer has wrong shape or dtype")
        out[:] = 0.0
    flat = out.reshape(-1, c)
    offsets, cams, us, vs = lut._gather
    src = features.data

    def work(lo: int, hi: int) -> None:
        gather_rows(flat, src, offsets, cams, vs, us, lo, hi)

    run_chunked(work, offsets.shape[0], threads)
    return VoxelVolume(g, out)


def _legal_pixels(
    cam: Camera, centers: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Project centers into one camera; returns (legal mask, u idx, v idx)."""
    uv, _, in_front = project_points(centers, cam.intrinsics, cam.cam_from_ego)
    fu = np.floor(uv[:, 0])
    fv = np.floor(uv[:, 1])
    legal = (
        in_front
        & (fu >= 0)
        & (fu < cam.intrinsics.width)
        & (fv >= 0)
        & (fv < cam.intrinsics.height)
    )
    return legal, fu[legal].astype(np.intp), fv[legal].astype(np.intp)


def naive_transform(
    features: FeatureStack,
    rig: CameraRig,
    grid: VoxelGridSpec,
    aggregation: str = "first_view",
    threads: int | None = None,
) -> VoxelVolume:
    """Per-camera projection baseline with an explicit aggregation pass.

    Every call re-projects all voxel centers into every camera and builds
    one dense (sparsely filled) volume per camera, then combines them:
    ``first_view`` keeps the lowest-index camera with a legal projection
    per voxel, ``mean`` averages all cameras that hit the voxel. The
    N-fold memory and the aggregation sweep are the costs the lookup-table
    route removes; they are kept here on purpose.
    """
    if aggregation not in ("first_view", "mean"):
        raise ValueError(f"unknown aggregation {aggregation!r}")
    if features.n_cameras != len(rig):
        raise ValueError(
            f"camera count mismatch: features have {features.n_cameras}, rig has {len(rig)}"
        )
    centers = voxel_centers(grid)
    n_vox = centers.shape[0]
    n_cam = len(rig)
    c = features.channels
    out = np.zeros((n_vox, c), dtype=np.float32)

    def work(lo: int, hi: int) -> None:
        chunk = centers[lo:hi]
        vols = np.zeros((n_cam, hi - lo, c), dtype=np.float32)
        hits = np.zeros((n_cam, hi - lo), dtype=bool)
        for ci, cam in enumerate(rig):
            legal, us, vs = _legal_pixels(cam, chunk)
            vols[ci, legal] = features.data[ci, :, vs, us]
            hits[ci] = legal
        any_hit = hits.any(axis=0)
        if aggregation == "first_view":
            first = hits.argmax(axis=0)
            sel = np.take_along_axis(vols, first[None, :, None], axis=0)[0]
            out[lo:hi] = np.where(any_hit[:, None], sel, np.float32(0.0))
        else:
            counts = hits.sum(axis=0)
            total = vols.sum(axis=0, dtype=np.float64)
            np.divide(total, np.maximum(counts, 1)[:, None], out=total)
            out[lo:hi] = np.where(any_hit[:, None], total, 0.0)

    run_chunked(work, n_vox, threads)
    return VoxelVolume(grid, out.reshape(grid.nx, grid.ny, grid.nz, c))


def lss_reference_transform(
    features: FeatureStack,
    depth: DepthDistribution,
    rig: CameraRig,
    grid: VoxelGridSpec,
    threads: int | None = None,
) -> VoxelVolume:
    """Depth-distribution baseline: weighted scatter of pixel frustums.

    Each pixel's feature vector is lifted to every depth bin along its ray
    (bin depths are camera-frame z; the ray passes through the integer
    pixel coordinate), scaled by that bin's weight, and scatter-added into
    the voxel containing the lifted point. Points outside the grid are
    dropped. Pooling is summation, which keeps the map linear in the
    features.

    Accumulation runs in float64 per worker and partials are reduced in
    chunk order, so any schedule matches the sequential result to float32
    rounding.
    """
    if depth.data.shape[0] != features.n_cameras:
        raise ValueError(
            f"camera count mismatch: features have {features.n_cameras}, "
            f"depth has {depth.data.shape[0]}"
        )
    if depth.data.shape[2:] != (features.height, features.width):
        raise ValueError(
            f"depth pixel dims {depth.data.shape[2:]} do not match features "
            f"{(features.height, features.width)}"
        )
    if features.n_cameras != len(rig):
        raise ValueError(
            f"camera count mismatch: features have {features.n_cameras}, rig has {len(rig)}"
        )
    g = grid
    px, py, pz = g.pitch
    n_vox = g.n_voxels
    c = features.channels
    h, w = features.height, features.width
    n_bins = depth.n_bins
    per_cam_points = n_bins * h * w

    # Per-camera lifted points in ego coordinates, bin-major then row-major,
    # matching the scatter order of a straightforward per-pixel loop.
    cam_offsets: list[np.ndarray] = []
    cam_inside: list[np.ndarray] = []
    for cam in rig:
        K = cam.intrinsics
        us = np.arange(w, dtype=np.float64)
        vs = np.arange(h, dtype=np.float64)
        dir_x = (us - K.cx) / K.fx
        dir_y = (vs - K.cy) / K.fy
        d = depth.bin_depths
        pts = np.empty((n_bins, h, w, 3))
        pts[..., 0] = d[:, None, None] * dir_x[None, None, :]
        pts[..., 1] = d[:, None, None] * dir_y[None, :, None]
        pts[..., 2] = d[:, None, None]
        ego = cam.cam_from_ego.inverse().apply(pts.reshape(-1, 3))
        ii = np.floor((ego[:, 0] - g.x_range[0]) / px).astype(np.int64)
        jj = np.floor((ego[:, 1] - g.y_range[0]) / py).astype(np.int64)
        kk = np.floor((ego[:, 2] - g.z_range[0]) / pz).astype(np.int64)
        inside = (
            (ii >= 0) & (ii < g.nx) & (jj >= 0) & (jj < g.ny) & (kk >= 0) & (kk < g.nz)
        )
        cam_offsets.append((ii * g.ny + jj) * g.nz + kk)
        cam_inside.append(inside)

    def work(lo: int, hi: int) -> np.ndarray:
        acc = np.zeros((n_vox, c), dtype=np.float64)
        for ci in range(features.n_cameras):
            sel = np.arange(lo, hi)
            inside = cam_inside[ci][lo:hi]
            sel = sel[inside]
            if sel.size == 0:
                continue
            offs = cam_offsets[ci][sel]
            bins, rem = np.divmod(sel, h * w)
            rows, cols = np.divmod(rem, w)
            weights = depth.data[ci, bins, rows, cols].astype(np.float64)
            contrib = features.data[ci, :, rows, cols].astype(np.float64) * weights[:, None]
            np.add.at(acc, offs, contrib)
        return acc

    partials = run_chunked(work, per_cam_points, threads)
    acc = partials[0]
    for extra in partials[1:]:
        acc += extra
    return VoxelVolume(g, acc.astype(np.float32).reshape(g.nx, g.ny, g.nz, c))


def scale_intrinsics(cam: CameraIntrinsics, stride: int) -> CameraIntrinsics:
    """Intrinsics of the same camera after 1/stride feature downsampling.

    Focal lengths and principal point divide by the stride; the pixel grid
    shrinks with floor division.
    """
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    return CameraIntrinsics(
        cam.fx / stride,
        cam.fy / stride,
        cam.cx / stride,
        cam.cy / stride,
        cam.width // stride,
        cam.height // stride,
    )


def multi_scale_grids(
    base: VoxelGridSpec, xy_resolutions: tuple[int, ...] = (200, 150, 100)
) -> list[VoxelGridSpec]:
    """BEV grids at several XY resolutions over the same metric range."""
    return [base.with_resolution(n, n) for n in xy_resolutions]


def multi_scale_transform(
    feature_pyramid: list[FeatureStack],
    rig: CameraRig,
    grids: list[VoxelGridSpec],
    strides: tuple[int, ...] = (4, 8, 16),
    luts: list[LookupTable] | None = None,
    threads: int | None = None,
) -> list[VoxelVolume]:
    """Apply the table-driven transform at every pyramid level.

    Level i holds features at 1/strides[i] of full image resolution and
    projects into grids[i]. Tables are built per level with rescaled
    intrinsics unless prebuilt ones are passed via ``luts``.
    """
    if not (len(feature_pyramid) == len(grids) == len(strides)):
        raise ValueError(
            f"pyramid/grid level-count mismatch: {len(feature_pyramid)} feature levels, "
            f"{len(grids)} grids, {len(strides)} strides"
        )
    if luts is not None and len(luts) != len(grids):
        raise ValueError(f"expected {len(grids)} cached LUTs, got {len(luts)}")
    volumes = []
    for level, (stack, grid, stride) in enumerate(zip(feature_pyramid, grids, strides)):
        scaled = CameraRig(
            tuple(
                Camera(c.name, scale_intrinsics(c.intrinsics, stride), c.cam_from_ego)
                for c in rig
            )
        )
        expect = (scaled[0].intrinsics.height, scaled[0].intrinsics.width)
        if (stack.height, stack.width) != expect:
            raise ValueError(
                f"level {level}: features are {stack.height}x{stack.width}, "
                f"stride {stride} expects {expect[0]}x{expect[1]}"
            )
        lut = luts[level] if luts is not None else build_lut(scaled, grid, threads=threads)
        volumes.append(fast_ray_transform(stack, lut, threads=threads))
    return volumes
