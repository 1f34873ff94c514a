"""Precomputed voxel-to-pixel lookup tables.

The table stores, for every voxel cell, which camera sees its center and at
which integer pixel, or a (-1, -1, -1) sentinel when no camera does. Because
calibration is fixed, this mapping is data independent: it is built once and
then turns every view transformation into pure index lookups.

Entries are laid out in offset order ``offset = (i*ny + j)*nz + k`` (x
outermost, z innermost) so a volume filled in this order collapses to a BEV
tensor by plain reshape.

Binary format ("FBLT"), all little-endian and bit-exact:

    magic     4 bytes  b"FBLT"
    version   u32      1
    nx,ny,nz  u32 * 3
    n_cameras u32
    reserved  8 bytes  zero
    body      nx*ny*nz records of (cam i32, u i32, v i32) in offset order
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .geometry import (
    Camera,
    CameraRig,
    RigidTransform,
    VoxelGridSpec,
    compose,
    project_points,
    voxel_centers,
)
from .parallel import run_chunked
from .tensorio import FormatError

__all__ = [
    "LutEntry",
    "LookupTable",
    "build_lut",
    "build_history_lut",
    "serialize_lut",
    "deserialize_lut",
    "load_lut",
    "save_lut",
]

MAGIC = b"FBLT"
VERSION = 1
HEADER = struct.Struct("<4sIIIII8s")  # 32 bytes
SENTINEL = (-1, -1, -1)


class LutEntry(NamedTuple):
    cam: int
    u: int
    v: int

    @property
    def is_sentinel(self) -> bool:
        return self.cam < 0


@dataclass
class LookupTable:
    """Dense per-voxel (camera, u, v) index map.

    ``entries`` is an (n_voxels, 3) int32 array in offset order; sentinel
    rows are (-1, -1, -1). Tables are immutable once built. The derived
    gather arrays (flattened indices of mapped voxels and their camera /
    pixel coordinates) are precomputed so that applying the table involves
    no per-call index preparation.
    """

    grid: VoxelGridSpec
    n_cameras: int
    entries: np.ndarray
    _gather: tuple[np.ndarray, ...] = field(init=False, repr=False)

    def __post_init__(self):
        entries = np.ascontiguousarray(self.entries, dtype=np.int32)
        if entries.shape != (self.grid.n_voxels, 3):
            raise ValueError(
                f"entries must have shape ({self.grid.n_voxels}, 3), got {entries.shape}"
            )
        if self.n_cameras < 1:
            raise ValueError("n_cameras must be >= 1")
        entries.setflags(write=False)
        self.entries = entries
        valid = np.flatnonzero(entries[:, 0] >= 0).astype(np.intp)
        self._gather = (
            valid,
            entries[valid, 0].astype(np.intp),
            entries[valid, 1].astype(np.intp),
            entries[valid, 2].astype(np.intp),
        )

    def entry(self, i: int, j: int, k: int) -> LutEntry:
        offset = (i * self.grid.ny + j) * self.grid.nz + k
        cam, u, v = self.entries[offset]
        return LutEntry(int(cam), int(u), int(v))

    @property
    def mapped_fraction(self) -> float:
        """Fraction of voxels visible to at least one camera."""
        return self._gather[0].size / self.entries.shape[0]

    def max_pixel(self) -> tuple[int, int]:
        """(max u, max v) over mapped voxels; (-1, -1) if none are mapped."""
        _, _, us, vs = self._gather
        if us.size == 0:
            return (-1, -1)
        return (int(us.max()), int(vs.max()))


def _fill_entries(
    rig: CameraRig, centers: np.ndarray, entries: np.ndarray
) -> None:
    """First-view scan: cameras in rig order claim still-unmapped voxels."""
    unmapped = np.ones(centers.shape[0], dtype=bool)
    for ci, cam in enumerate(rig):
        uv, _, in_front = project_points(centers, cam.intrinsics, cam.cam_from_ego)
        fu = np.floor(uv[:, 0])
        fv = np.floor(uv[:, 1])
        legal = in_front.copy()
        np.logical_and(legal, fu >= 0, out=legal)
        np.logical_and(legal, fu < cam.intrinsics.width, out=legal)
        np.logical_and(legal, fv >= 0, out=legal)
        np.logical_and(legal, fv < cam.intrinsics.height, out=legal)
        take = unmapped & legal
        entries[take, 0] = ci
        entries[take, 1] = fu[take].astype(np.int32)
        entries[take, 2] = fv[take].astype(np.int32)
        unmapped &= ~legal


def build_lut(
    rig: CameraRig, grid: VoxelGridSpec, threads: int | None = None
) -> LookupTable:
    """Precompute the voxel -> (camera, pixel) map for a fixed rig and grid.

    For each voxel center, cameras are scanned in rig order and the first
    one with a legal projection (depth > 0, floor(u) in [0, W), floor(v) in
    [0, H)) is recorded with floor-quantized pixel coordinates; voxels no
    camera sees keep the sentinel. Voxels are independent, so chunked
    execution is byte-identical to the sequential scan.
    """
    centers = voxel_centers(grid)
    entries = np.full((centers.shape[0], 3), -1, dtype=np.int32)

    def work(lo: int, hi: int) -> None:
        _fill_entries(rig, centers[lo:hi], entries[lo:hi])

    run_chunked(work, centers.shape[0], threads)
    return LookupTable(grid, len(rig), entries)


def build_history_lut(
    rig: CameraRig,
    grid: VoxelGridSpec,
    ego_cur_from_ego_hist: RigidTransform,
    threads: int | None = None,
) -> LookupTable:
    """LUT that maps current-frame voxels into a past frame's images.

    Extrinsics are composed with the inverse ego motion, so looking up a
    current-frame voxel center lands on the pixel that observed that point
    when the history frame was captured. Zero motion reproduces
    :func:`build_lut` byte for byte.
    """
    hist_from_cur = ego_cur_from_ego_hist.inverse()
    shifted = CameraRig(
        tuple(
            Camera(c.name, c.intrinsics, compose(c.cam_from_ego, hist_from_cur))
            for c in rig
        )
    )
    return build_lut(shifted, grid, threads=threads)


def serialize_lut(lut: LookupTable) -> bytes:
    g = lut.grid
    header = HEADER.pack(MAGIC, VERSION, g.nx, g.ny, g.nz, lut.n_cameras, b"\x00" * 8)
    return header + lut.entries.astype("<i4").tobytes()


def deserialize_lut(data: bytes, grid: VoxelGridSpec | None = None) -> LookupTable:
    """Parse FBLT bytes.

    The binary format carries cell counts but not metric ranges; pass
    ``grid`` to attach real ranges (its nx/ny/nz must match the header),
    otherwise a unit-pitch grid is assumed.
    """
    if len(data) < HEADER.size:
        raise FormatError("truncated payload: header incomplete")
    magic, version, nx, ny, nz, n_cameras, reserved = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}, expected {VERSION}")
    if n_cameras < 1:
        raise FormatError(f"camera count must be >= 1, got {n_cameras}")
    if min(nx, ny, nz) < 1:
        raise FormatError(f"cell counts must be >= 1, got {nx}x{ny}x{nz}")
    n_voxels = nx * ny * nz
    expected = HEADER.size + n_voxels * 12
    if len(data) != expected:
        raise FormatError(
            f"truncated payload: expected {expected} bytes for {nx}x{ny}x{nz}, got {len(data)}"
        )
    entries = (
        np.frombuffer(data, dtype="<i4", offset=HEADER.size)
        .reshape(n_voxels, 3)
        .astype(np.int32)
    )
    cams = entries[:, 0]
    if cams.min(initial=0) < -1 or cams.max(initial=-1) >= n_cameras:
        raise FormatError("entry out of declared bounds: camera index outside [-1, n_cameras)")
    sentinel_rows = cams < 0
    if sentinel_rows.any() and not np.all(entries[sentinel_rows] == -1):
        raise FormatError("entry out of declared bounds: partial sentinel record")
    mapped = entries[~sentinel_rows]
    if mapped.size and mapped[:, 1:].min() < 0:
        raise FormatError("entry out of declared bounds: negative pixel coordinate")
    if grid is None:
        grid = VoxelGridSpec((0.0, float(nx)), (0.0, float(ny)), (0.0, float(nz)), nx, ny, nz)
    elif (grid.nx, grid.ny, grid.nz) != (nx, ny, nz):
        raise FormatError(
            f"grid mismatch: file is {nx}x{ny}x{nz}, caller grid is "
            f"{grid.nx}x{grid.ny}x{grid.nz}"
        )
    return LookupTable(grid, int(n_cameras), entries)


def save_lut(path, lut: LookupTable) -> None:
    with open(path, "wb") as f:
        f.write(serialize_lut(lut))


def load_lut(path, grid: VoxelGridSpec | None = None) -> LookupTable:
    with open(path, "rb") as f:
        return deserialize_lut(f.read(), grid=grid)
