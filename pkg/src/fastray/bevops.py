"""BEV-plane tensor operators: height collapse, upsampling, channel fusion.

These are the dimension-reduction pieces that keep the BEV encoder 2D:
collapsing the height axis into channels, bringing multi-scale maps to a
common resolution, and concatenating scale/frame stacks before a 1x1
channel-mixing projection. Fusion weights are plain inputs (file or seeded
PRNG); nothing here is trained.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .viewtrans import VoxelVolume

__all__ = [
    "BevFeature",
    "FusionWeights",
    "space_to_channel",
    "channel_to_space",
    "upsample_bev",
    "concat_channels",
    "fuse_channels",
    "random_fusion_weights",
    "load_fusion_weights",
    "save_fusion_weights",
]


@dataclass
class BevFeature:
    """2D BEV feature map, layout [i][j][channel], float32."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float32)
        if arr.ndim != 3:
            raise ValueError(f"BEV feature must be 3D (nx, ny, C), got {arr.ndim}D")
        if min(arr.shape) < 1:
            raise ValueError(f"all dims must be >= 1, got {arr.shape}")
        self.data = arr

    @property
    def nx(self) -> int:
        return self.data.shape[0]

    @property
    def ny(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass
class FusionWeights:
    """Per-pixel affine channel map: out = matrix @ in (+ bias)."""

    matrix: np.ndarray
    bias: np.ndarray | None = None

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=np.float64)
        if mat.ndim != 2:
            raise ValueError(f"weight matrix must be 2D (out, in), got {mat.ndim}D")
        if not np.all(np.isfinite(mat)):
            raise ValueError("weight matrix contains non-finite values")
        self.matrix = mat
        if self.bias is not None:
            b = np.asarray(self.bias, dtype=np.float64)
            if b.shape != (mat.shape[0],):
                raise ValueError(
                    f"bias must have shape ({mat.shape[0]},), got {b.shape}"
                )
            if not np.all(np.isfinite(b)):
                raise ValueError("bias contains non-finite values")
            self.bias = b

    @property
    def in_channels(self) -> int:
        return self.matrix.shape[1]

    @property
    def out_channels(self) -> int:
        return self.matrix.shape[0]


def space_to_channel(volume: VoxelVolume) -> BevFeature:
    """Collapse (nx, ny, nz, C) to (nx, ny, nz*C), z-major channels.

    Output channel k*C + c holds height slice k, channel c. Because the
    volume is stored z-innermost this is a pure reinterpretation of the
    same memory; values are untouched and :func:`channel_to_space` inverts
    it exactly.
    """
    g = volume.grid
    return BevFeature(volume.data.reshape(g.nx, g.ny, g.nz * volume.channels))


def channel_to_space(bev: BevFeature, nz: int, grid=None) -> VoxelVolume:
    """Inverse of :func:`space_to_channel` for a known height count."""
    if nz < 1 or bev.channels % nz != 0:
        raise ValueError(f"channel count {bev.channels} is not divisible by nz={nz}")
    from .geometry import VoxelGridSpec

    if grid is None:
        grid = VoxelGridSpec(
            (0.0, float(bev.nx)), (0.0, float(bev.ny)), (0.0, float(nz)),
            bev.nx, bev.ny, nz,
        )
    if (grid.nx, grid.ny, grid.nz) != (bev.nx, bev.ny, nz):
        raise ValueError("grid resolution does not match the BEV feature")
    return VoxelVolume(grid, bev.data.reshape(bev.nx, bev.ny, nz, bev.channels // nz))


def _axis_coords_bilinear(n_src: int, n_tgt: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Source indices and weights per target index, align-corners=false."""
    x = (np.arange(n_tgt) + 0.5) * (n_src / n_tgt) - 0.5
    x = np.clip(x, 0.0, n_src - 1.0)
    i0 = np.floor(x).astype(np.intp)
    i0 = np.minimum(i0, n_src - 1)
    i1 = np.minimum(i0 + 1, n_src - 1)
    return i0, i1, x - i0


def upsample_bev(bev: BevFeature, nx: int, ny: int, mode: str = "bilinear") -> BevFeature:
    """Resize a BEV map up to (nx, ny); channels pass through unchanged.

    ``nearest`` replicates source cells (block replication when the target
    is an integer multiple); ``bilinear`` interpolates with the
    align-corners=false convention. Both preserve constant fields exactly.
    """
    if mode not in ("nearest", "bilinear"):
        raise ValueError(f"unknown mode {mode!r}")
    if nx < bev.nx or ny < bev.ny:
        raise ValueError(
            f"target {nx}x{ny} is smaller than source {bev.nx}x{bev.ny}"
        )
    if (nx, ny) == (bev.nx, bev.ny):
        return BevFeature(bev.data.copy())
    if mode == "nearest":
        ii = (np.arange(nx) * bev.nx) // nx
        jj = (np.arange(ny) * bev.ny) // ny
        return BevFeature(bev.data[np.ix_(ii, jj)])
    i0, i1, wx = _axis_coords_bilinear(bev.nx, nx)
    j0, j1, wy = _axis_coords_bilinear(bev.ny, ny)
    src = bev.data.astype(np.float64)
    rows = src[i0] * (1.0 - wx)[:, None, None] + src[i1] * wx[:, None, None]
    out = rows[:, j0] * (1.0 - wy)[None, :, None] + rows[:, j1] * wy[None, :, None]
    return BevFeature(out.astype(np.float32))


def concat_channels(features: list[BevFeature]) -> BevFeature:
    """Stack maps along the channel axis, preserving input order."""
    if not features:
        raise ValueError("cannot concatenate an empty feature list")
    nx, ny = features[0].nx, features[0].ny
    for idx, f in enumerate(features):
        if (f.nx, f.ny) != (nx, ny):
            raise ValueError(
                f"spatial mismatch: input 0 is {nx}x{ny}, input {idx} is {f.nx}x{f.ny}"
            )
    return BevFeature(np.concatenate([f.data for f in features], axis=2))


def fuse_channels(bev: BevFeature, weights: FusionWeights) -> BevFeature:
    """Apply the 1x1 channel-mixing projection at every BEV cell."""
    if bev.channels != weights.in_channels:
        raise ValueError(
            f"channel mismatch: feature has {bev.channels}, weights expect "
            f"{weights.in_channels}"
        )
    flat = bev.data.reshape(-1, bev.channels).astype(np.float64)
    out = flat @ weights.matrix.T
    if weights.bias is not None:
        out += weights.bias
    return BevFeature(out.reshape(bev.nx, bev.ny, weights.out_channels).astype(np.float32))


def random_fusion_weights(
    in_channels: int, out_channels: int, seed: int, bias: bool = False
) -> FusionWeights:
    """Seeded stand-in weights for exercising the fusion dataflow."""
    rng = np.random.default_rng(seed)
    scale = 1.0 / np.sqrt(in_channels)
    mat = rng.uniform(-scale, scale, (out_channels, in_channels))
    b = rng.uniform(-scale, scale, out_channels) if bias else None
    return FusionWeights(mat, b)


def save_fusion_weights(path, weights: FusionWeights) -> None:
    """Write the [out, in] matrix, then the optional [out] bias, as tensors."""
    from .tensorio import write_tensors

    tensors = [weights.matrix]
    if weights.bias is not None:
        tensors.append(weights.bias)
    with open(path, "wb") as f:
        f.write(write_tensors(tensors))


def load_fusion_weights(path) -> FusionWeights:
    from .tensorio import read_tensors

    with open(path, "rb") as f:
        tensors = read_tensors(f.read())
    if len(tensors) not in (1, 2) or tensors[0].ndim != 2:
        raise ValueError(
            f"fusion-weight file must hold an [out, in] matrix plus optional "
            f"[out] bias, found {[t.shape for t in tensors]}"
        )
    bias = tensors[1] if len(tensors) == 2 else None
    return FusionWeights(tensors[0], bias)
