"""Multi-frame BEV fusion: warp history maps into the current ego frame.

History BEV features were computed in their own ego frames. Fusing them
with the current frame first inverse-warps each one: every current-frame
cell center is carried through world coordinates into the history ego
frame, the history map is sampled there, and out-of-grid samples are zero.
The aligned maps are then concatenated along channels, current frame
first, history in the caller's order (most recent first by convention).

Warping happens in the 2D BEV plane: cell centers are taken at ego z = 0,
pushed through the full 3D relative pose, and the resulting z is dropped.
For planar (SE(2)) motion this is exact; roll and pitch components only
enter through their effect on the z = 0 plane.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bevops import BevFeature, concat_channels
from .geometry import RigidTransform, VoxelGridSpec, compose
from .parallel import run_chunked

__all__ = ["FrameSample", "align_to_current", "fuse_frames"]


@dataclass
class FrameSample:
    """One captured frame: when, where the ego was, and its BEV features."""

    timestamp: float
    ego_pose: RigidTransform  # world_from_ego
    bev: BevFeature


def _cell_centers_2d(grid: VoxelGridSpec) -> tuple[np.ndarray, np.ndarray]:
    px, py, _ = grid.pitch
    xs = grid.x_range[0] + (np.arange(grid.nx) + 0.5) * px
    ys = grid.y_range[0] + (np.arange(grid.ny) + 0.5) * py
    return xs, ys


def align_to_current(
    hist: FrameSample,
    cur_pose: RigidTransform,
    grid: VoxelGridSpec,
    mode: str = "nearest",
    threads: int | None = None,
) -> BevFeature:
    """Resample a history BEV map onto the current frame's grid.

    ``nearest`` picks the closest history cell (exact for identity motion
    and whole-cell translations); ``bilinear`` interpolates the four
    surrounding cells with zero padding outside the grid.
    """
    if mode not in ("nearest", "bilinear"):
        raise ValueError(f"unknown mode {mode!r}")
    if (hist.bev.nx, hist.bev.ny) != (grid.nx, grid.ny):
        raise ValueError(
            f"resolution mismatch: history BEV is {hist.bev.nx}x{hist.bev.ny}, "
            f"grid is {grid.nx}x{grid.ny}"
        )
    # cur ego -> world -> hist ego
    rel = compose(hist.ego_pose.inverse(), cur_pose)
    xs, ys = _cell_centers_2d(grid)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.stack([gx, gy, np.zeros_like(gx)], axis=-1).reshape(-1, 3)
    warped = rel.apply(pts)
    px, py, _ = grid.pitch
    fi = (warped[:, 0] - grid.x_range[0]) / px - 0.5
    fj = (warped[:, 1] - grid.y_range[0]) / py - 0.5

    src = hist.bev.data
    c = hist.bev.channels
    out = np.zeros((grid.nx * grid.ny, c), dtype=np.float32)

    if mode == "nearest":
        ii = np.floor(fi + 0.5).astype(np.int64)
        jj = np.floor(fj + 0.5).astype(np.int64)
        inside = (ii >= 0) & (ii < grid.nx) & (jj >= 0) & (jj < grid.ny)

        def work(lo: int, hi: int) -> None:
            m = inside[lo:hi]
            idx = np.flatnonzero(m) + lo
            out[idx] = src[ii[idx], jj[idx]]

        run_chunked(work, out.shape[0], threads)
        return BevFeature(out.reshape(grid.nx, grid.ny, c))

    i0 = np.floor(fi).astype(np.int64)
    j0 = np.floor(fj).astype(np.int64)
    wx = fi - i0
    wy = fj - j0

    def corner_weight(di: int, dj: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        w = (wx if di else 1.0 - wx) * (wy if dj else 1.0 - wy)
        return i0 + di, j0 + dj, w

    def work(lo: int, hi: int) -> None:
        acc = np.zeros((hi - lo, c), dtype=np.float64)
        for di in (0, 1):
            for dj in (0, 1):
                ci, cj, w = corner_weight(di, dj)
                ci = ci[lo:hi]
                cj = cj[lo:hi]
                w = w[lo:hi]
                ok = (ci >= 0) & (ci < grid.nx) & (cj >= 0) & (cj < grid.ny)
                idx = np.flatnonzero(ok)
                acc[idx] += src[ci[idx], cj[idx]].astype(np.float64) * w[idx, None]
        out[lo:hi] = acc

    run_chunked(work, out.shape[0], threads)
    return BevFeature(out.reshape(grid.nx, grid.ny, c))


def fuse_frames(
    current: BevFeature,
    history: list[FrameSample],
    cur_pose: RigidTransform,
    grid: VoxelGridSpec,
    mode: str = "nearest",
    threads: int | None = None,
) -> BevFeature:
    """Channel-concatenate the current map with aligned history maps.

    Output order is [current, history[0], history[1], ...]; pass history
    most recent first. An empty history returns the current map unchanged.
    """
    if (current.nx, current.ny) != (grid.nx, grid.ny):
        raise ValueError(
            f"resolution mismatch: current BEV is {current.nx}x{current.ny}, "
            f"grid is {grid.nx}x{grid.ny}"
        )
    if not history:
        return current
    aligned = [align_to_current(h, cur_pose, grid, mode=mode, threads=threads) for h in history]
    return concat_channels([current] + aligned)
