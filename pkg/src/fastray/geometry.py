"""Pinhole cameras, rigid transforms, and the voxel grid they project into.

Coordinate conventions used throughout the package:

  Ego frame (right-handed):
    - x forward, y left, z up (meters). BEV alignment and voxel grids
      live in this frame.

  Camera frame (right-handed, standard computer vision):
    - x right in the image, y down, z forward along the optical axis.
    - Extrinsics are stored as ``cam_from_ego``: p_cam = R @ p_ego + t.

  Image frame:
    - u right, v down, origin at the top-left pixel, units of pixels.
    - Projection: u = fx * x/z + cx, v = fy * y/z + cy, valid for z > 0.

Focal lengths may be negative: a horizontally mirrored view is represented
by negating fx (see :mod:`fastray.augment`). Calibration files loaded from
disk must still carry positive focals; negative values only arise from
augmentation folding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Camera",
    "CameraIntrinsics",
    "CameraRig",
    "DEFAULT_GRID_RANGES",
    "RigidTransform",
    "VoxelGridSpec",
    "compose",
    "default_grid",
    "project_point",
    "project_points",
    "unproject_pixel",
    "voxel_center",
    "voxel_centers",
]

_ORTHO_TOL = 1e-9


def _as_matrix(value, shape, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics plus the image size the pixels live in.

    fx/fy/cx/cy are in pixels. fx and fy must be non-zero; negative values
    denote a mirrored image axis.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        for name in ("fx", "fy", "cx", "cy"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v}")
        if self.fx == 0.0 or self.fy == 0.0:
            raise ValueError("focal lengths must be non-zero")
        if self.width < 1 or self.height < 1:
            raise ValueError(
                f"image size must be positive, got {self.width}x{self.height}"
            )

    def matrix(self) -> np.ndarray:
        """3x3 projection matrix K."""
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )


@dataclass(frozen=True)
class RigidTransform:
    """SE(3) element: p_out = rotation @ p_in + translation.

    rotation must be orthonormal with determinant +1 (within 1e-9).
    Instances are immutable; the wrapped arrays are marked read-only.
    """

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        rot = _as_matrix(self.rotation, (3, 3), "rotation")
        tra = _as_matrix(self.translation, (3,), "translation")
        err = np.abs(rot.T @ rot - np.eye(3)).max()
        if err > _ORTHO_TOL:
            raise ValueError(f"rotation is not orthonormal (error {err:.3e})")
        det = float(np.linalg.det(rot))
        if abs(det - 1.0) > _ORTHO_TOL:
            raise ValueError(f"rotation determinant must be +1, got {det!r}")
        rot.setflags(write=False)
        tra.setflags(write=False)
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", tra)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, mat) -> "RigidTransform":
        """Build from a 4x4 homogeneous matrix."""
        m = _as_matrix(mat, (4, 4), "matrix")
        return cls(m[:3, :3], m[:3, 3])

    def matrix(self) -> np.ndarray:
        """4x4 homogeneous form."""
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -(rt @ self.translation))

    def apply(self, points) -> np.ndarray:
        """Transform one point (3,) or a batch (N, 3)."""
        p = np.asarray(points, dtype=np.float64)
        if p.ndim == 1:
            return self.rotation @ p + self.translation
        return p @ self.rotation.T + self.translation


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """Composition a∘b: apply b first, then a."""
    return RigidTransform(
        a.rotation @ b.rotation, a.rotation @ b.translation + a.translation
    )


@dataclass(frozen=True)
class Camera:
    """One named camera: intrinsics plus its pose relative to the ego frame."""

    name: str
    intrinsics: CameraIntrinsics
    cam_from_ego: RigidTransform


@dataclass(frozen=True)
class CameraRig:
    """Ordered multi-camera setup.

    Order is significant: overlap tie-breaking takes the first camera (by
    index) whose projection is legal, so two rigs with the same cameras in
    a different order are different rigs.
    """

    cameras: tuple[Camera, ...]

    def __post_init__(self):
        cams = tuple(self.cameras)
        if not cams:
            raise ValueError("rig must contain at least one camera")
        names = [c.name for c in cams]
        if len(set(names)) != len(names):
            raise ValueError(f"camera names must be unique, got {names}")
        object.__setattr__(self, "cameras", cams)

    def __len__(self) -> int:
        return len(self.cameras)

    def __iter__(self):
        return iter(self.cameras)

    def __getitem__(self, idx: int) -> Camera:
        return self.cameras[idx]


@dataclass(frozen=True)
class VoxelGridSpec:
    """Axis-aligned voxel grid over half-open metric ranges.

    Cell (i, j, k) covers [min + i*pitch, min + (i+1)*pitch) per axis and
    has its center at min + (i + 0.5) * pitch.
    """

    x_range: tuple[float, float]
    y_range: tuple[float, float]
    z_range: tuple[float, float]
    nx: int
    ny: int
    nz: int

    def __post_init__(self):
        for axis, (lo, hi) in zip("xyz", (self.x_range, self.y_range, self.z_range)):
            if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
                raise ValueError(f"{axis}_range must satisfy max > min, got [{lo}, {hi})")
        if self.nx < 1 or self.ny < 1 or self.nz < 1:
            raise ValueError("cell counts must be >= 1")
        object.__setattr__(self, "x_range", (float(self.x_range[0]), float(self.x_range[1])))
        object.__setattr__(self, "y_range", (float(self.y_range[0]), float(self.y_range[1])))
        object.__setattr__(self, "z_range", (float(self.z_range[0]), float(self.z_range[1])))

    @property
    def pitch(self) -> tuple[float, float, float]:
        return (
            (self.x_range[1] - self.x_range[0]) / self.nx,
            (self.y_range[1] - self.y_range[0]) / self.ny,
            (self.z_range[1] - self.z_range[0]) / self.nz,
        )

    @property
    def n_voxels(self) -> int:
        return self.nx * self.ny * self.nz

    def with_resolution(self, nx: int, ny: int, nz: int | None = None) -> "VoxelGridSpec":
        """Same metric ranges at a different cell count."""
        return VoxelGridSpec(
            self.x_range, self.y_range, self.z_range, nx, ny, self.nz if nz is None else nz
        )


# Default metric coverage. The grid extent is configuration, not a quantity
# fixed by the transform itself; callers with real calibration should set
# their own ranges.
DEFAULT_GRID_RANGES = ((-50.0, 50.0), (-50.0, 50.0), (-5.0, 3.0))


def default_grid(nx: int = 200, ny: int = 200, nz: int = 6) -> VoxelGridSpec:
    xr, yr, zr = DEFAULT_GRID_RANGES
    return VoxelGridSpec(xr, yr, zr, nx, ny, nz)


def voxel_center(grid: VoxelGridSpec, i: int, j: int, k: int) -> np.ndarray:
    """Metric center of cell (i, j, k). Out-of-range indices are a caller bug."""
    if not (0 <= i < grid.nx and 0 <= j < grid.ny and 0 <= k < grid.nz):
        raise IndexError(
            f"voxel index ({i}, {j}, {k}) outside grid {grid.nx}x{grid.ny}x{grid.nz}"
        )
    px, py, pz = grid.pitch
    return np.array(
        [
            grid.x_range[0] + (i + 0.5) * px,
            grid.y_range[0] + (j + 0.5) * py,
            grid.z_range[0] + (k + 0.5) * pz,
        ]
    )


def voxel_centers(grid: VoxelGridSpec) -> np.ndarray:
    """All cell centers as an (nx*ny*nz, 3) array in offset order.

    Offset ordering is (i*ny + j)*nz + k, i.e. x outermost, z innermost.
    """
    px, py, pz = grid.pitch
    xs = grid.x_range[0] + (np.arange(grid.nx) + 0.5) * px
    ys = grid.y_range[0] + (np.arange(grid.ny) + 0.5) * py
    zs = grid.z_range[0] + (np.arange(grid.nz) + 0.5) * pz
    gx, gy, gz = np.meshgrid(xs, ys, zs, indexing="ij")
    return np.stack([gx, gy, gz], axis=-1).reshape(-1, 3)


def project_point(
    p_ego, cam: CameraIntrinsics, cam_from_ego: RigidTransform
) -> tuple[float, float, float] | None:
    """Project one ego-frame point; returns (u, v, depth) or None.

    None means the point sits at or behind the image plane (z <= 0; the
    projection is undefined by division at z = 0, so zero depth is
    excluded). Pixel bounds are deliberately not checked here.
    """
    p = np.asarray(p_ego, dtype=np.float64)
    if not np.all(np.isfinite(p)):
        raise ValueError("point must be finite")
    x, y, z = cam_from_ego.apply(p)
    if z <= 0.0:
        return None
    return (cam.fx * x / z + cam.cx, cam.fy * y / z + cam.cy, z)


def project_points(
    points: np.ndarray, cam: CameraIntrinsics, cam_from_ego: RigidTransform
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized projection of (N, 3) ego-frame points.

    Returns (uv (N, 2) float64, depth (N,) float64, in_front (N,) bool).
    uv rows where in_front is False are unspecified; depth is the camera-
    frame z. Bounds are the caller's job, as in :func:`project_point`.
    """
    p_cam = cam_from_ego.apply(points)
    z = p_cam[:, 2]
    in_front = z > 0.0
    uv = np.empty((points.shape[0], 2))
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        uv[:, 0] = cam.fx * p_cam[:, 0] / z + cam.cx
        uv[:, 1] = cam.fy * p_cam[:, 1] / z + cam.cy
    return uv, z, in_front


def unproject_pixel(
    u: float, v: float, depth: float, cam: CameraIntrinsics, cam_from_ego: RigidTransform
) -> np.ndarray:
    """Inverse of :func:`project_point` at a known depth; returns p_ego."""
    if depth <= 0.0:
        raise ValueError(f"depth must be positive, got {depth}")
    p_cam = np.array(
        [(u - cam.cx) / cam.fx * depth, (v - cam.cy) / cam.fy * depth, depth]
    )
    return cam_from_ego.inverse().apply(p_cam)
