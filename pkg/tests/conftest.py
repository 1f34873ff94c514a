"""Shared builders and independent projection oracles for the test suite.

The oracle helpers here deliberately avoid the library's projection code:
everything goes through explicit 4x4 homogeneous matrices and scalar
arithmetic, so library bugs cannot cancel out of the comparisons.
"""

from __future__ import annotations

import math

import numpy as np

from fastray.geometry import (
    Camera,
    CameraIntrinsics,
    CameraRig,
    RigidTransform,
    VoxelGridSpec,
)


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform-ish proper rotation from a random quaternion."""
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def random_rigid(rng: np.random.Generator, t_scale: float = 5.0) -> RigidTransform:
    return RigidTransform(random_rotation(rng), rng.uniform(-t_scale, t_scale, 3))


def random_intrinsics(rng: np.random.Generator) -> CameraIntrinsics:
    width = int(rng.integers(8, 64))
    height = int(rng.integers(8, 64))
    return CameraIntrinsics(
        fx=float(rng.uniform(0.5, 2.0) * width),
        fy=float(rng.uniform(0.5, 2.0) * height),
        cx=float(rng.uniform(0.3, 0.7) * width),
        cy=float(rng.uniform(0.3, 0.7) * height),
        width=width,
        height=height,
    )


def random_rig(rng: np.random.Generator, n_cameras: int) -> CameraRig:
    return CameraRig(
        tuple(
            Camera(f"cam{i}", random_intrinsics(rng), random_rigid(rng))
            for i in range(n_cameras)
        )
    )


def random_grid(rng: np.random.Generator, max_cells: tuple[int, int, int] = (32, 32, 8)) -> VoxelGridSpec:
    nx = int(rng.integers(1, max_cells[0] + 1))
    ny = int(rng.integers(1, max_cells[1] + 1))
    nz = int(rng.integers(1, max_cells[2] + 1))
    x0, y0, z0 = rng.uniform(-10, 0, 3)
    return VoxelGridSpec(
        (x0, x0 + rng.uniform(2, 20)),
        (y0, y0 + rng.uniform(2, 20)),
        (z0, z0 + rng.uniform(1, 8)),
        nx, ny, nz,
    )


def level_camera(
    name: str,
    yaw_deg: float,
    fx: float,
    width: int,
    height: int,
    position=(0.0, 0.0, 0.0),
    fy: float | None = None,
) -> Camera:
    """Horizontal camera facing (cos yaw, sin yaw, 0) in the ego frame."""
    psi = math.radians(yaw_deg)
    c, s = math.cos(psi), math.sin(psi)
    # columns: camera x (image right), y (image down), z (forward) in ego coords
    ego_from_cam = np.column_stack([[s, -c, 0.0], [0.0, 0.0, -1.0], [c, s, 0.0]])
    t = np.asarray(position, dtype=float)
    cam_from_ego = RigidTransform(ego_from_cam.T, -ego_from_cam.T @ t)
    intr = CameraIntrinsics(
        fx, fx if fy is None else fy, (width - 1) / 2.0, (height - 1) / 2.0, width, height
    )
    return Camera(name, intr, cam_from_ego)


# ---------------------------------------------------------------------------
# Independent oracles (homogeneous-matrix route, scalar loops).


def homogeneous_matrix(rot: np.ndarray, tra: np.ndarray) -> np.ndarray:
    m = np.eye(4)
    m[:3, :3] = rot
    m[:3, 3] = tra
    return m


def oracle_project(point, cam: Camera):
    """(u, v, depth) via an explicit 4x4 pipeline, or None if depth <= 0."""
    ext = homogeneous_matrix(cam.cam_from_ego.rotation, cam.cam_from_ego.translation)
    p = ext @ np.array([point[0], point[1], point[2], 1.0])
    if p[2] <= 0.0:
        return None
    k = cam.intrinsics
    kmat = np.array([[k.fx, 0.0, k.cx], [0.0, k.fy, k.cy], [0.0, 0.0, 1.0]])
    uvw = kmat @ p[:3]
    return uvw[0] / uvw[2], uvw[1] / uvw[2], p[2]


def oracle_first_hit(point, rig: CameraRig):
    """First camera (in rig order) whose floor-quantized projection is legal."""
    for ci, cam in enumerate(rig):
        hit = oracle_project(point, cam)
        if hit is None:
            continue
        u = math.floor(hit[0])
        v = math.floor(hit[1])
        if 0 <= u < cam.intrinsics.width and 0 <= v < cam.intrinsics.height:
            return (ci, u, v)
    return (-1, -1, -1)


def oracle_voxel_center(grid: VoxelGridSpec, i: int, j: int, k: int) -> np.ndarray:
    return np.array(
        [
            grid.x_range[0] + (i + 0.5) * (grid.x_range[1] - grid.x_range[0]) / grid.nx,
            grid.y_range[0] + (j + 0.5) * (grid.y_range[1] - grid.y_range[0]) / grid.ny,
            grid.z_range[0] + (k + 0.5) * (grid.z_range[1] - grid.z_range[0]) / grid.nz,
        ]
    )


def oracle_lut_entries(rig: CameraRig, grid: VoxelGridSpec, transform: RigidTransform | None = None) -> np.ndarray:
    """Exhaustive per-voxel projection scan; optionally pre-transforms centers."""
    entries = np.empty((grid.n_voxels, 3), dtype=np.int32)
    off = 0
    for i in range(grid.nx):
        for j in range(grid.ny):
            for k in range(grid.nz):
                center = oracle_voxel_center(grid, i, j, k)
                if transform is not None:
                    center = transform.rotation @ center + transform.translation
                entries[off] = oracle_first_hit(center, rig)
                off += 1
    return entries
