"""Calibration-consistent augmentation of image space and BEV space.

Instead of resampling pixels or feature maps, augmentations here rewrite
the calibration so that projection through the updated calibration lands
where the augmented data would be:

* Image-space affine warps (flip / crop / resize and their compositions)
  fold into the 4-parameter intrinsics. Only axis-aligned affines can be
  folded; an arbitrary-angle rotation needs off-diagonal terms that
  fx/fy/cx/cy cannot express, so :func:`apply_image_aug` rejects it (the
  rotation constructor still exists for pixel-space math and for
  compositions that cancel back to axis-aligned, e.g. two half-turns).
* BEV-space transforms (flips about the x/y axis, yaw rotation, uniform
  scale) fold into the extrinsics, with ground-truth boxes moved to match.
  Reflections make the camera see a mirrored world; the mirror is folded
  into the intrinsics by negating fx, which keeps extrinsic rotations
  proper. Uniform scale cancels out of the pinhole division and only
  rescales the camera position.

Both foldings preserve projected pixel coordinates exactly (up to float
rounding), which is what the consistency tests check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Camera, CameraIntrinsics, CameraRig, RigidTransform

__all__ = [
    "ImageAug",
    "BevAug",
    "Box3D",
    "apply_image_aug",
    "apply_bev_aug",
    "ImageAugConfig",
    "BevAugConfig",
    "sample_image_aug",
    "sample_bev_aug",
]


def normalize_yaw(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    wrapped = math.fmod(theta + math.pi, 2.0 * math.pi)
    if wrapped <= 0.0:
        wrapped += 2.0 * math.pi
    return wrapped - math.pi


@dataclass(frozen=True)
class ImageAug:
    """2D affine pixel warp plus the augmented image size.

    ``matrix`` is 3x3 with last row (0, 0, 1); it maps original pixel
    coordinates (u, v, 1) to augmented ones.
    """

    matrix: np.ndarray
    width: int
    height: int

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.shape != (3, 3) or not np.allclose(m[2], (0.0, 0.0, 1.0), atol=1e-12):
            raise ValueError("matrix must be a 3x3 affine with last row (0, 0, 1)")
        if abs(np.linalg.det(m[:2, :2])) < 1e-12:
            raise ValueError("augmentation matrix is not invertible")
        if self.width < 1 or self.height < 1:
            raise ValueError("augmented image size must be positive")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls, width: int, height: int) -> "ImageAug":
        return cls(np.eye(3), width, height)

    @classmethod
    def hflip(cls, width: int, height: int) -> "ImageAug":
        """Pixel-center mirror: u' = (W - 1) - u."""
        m = np.eye(3)
        m[0, 0] = -1.0
        m[0, 2] = width - 1.0
        return cls(m, width, height)

    @classmethod
    def vflip(cls, width: int, height: int) -> "ImageAug":
        m = np.eye(3)
        m[1, 1] = -1.0
        m[1, 2] = height - 1.0
        return cls(m, width, height)

    @classmethod
    def crop(cls, x0: int, y0: int, width: int, height: int) -> "ImageAug":
        """Keep the window starting at (x0, y0); u' = u - x0."""
        m = np.eye(3)
        m[0, 2] = -float(x0)
        m[1, 2] = -float(y0)
        return cls(m, width, height)

    @classmethod
    def resize(cls, old_width: int, old_height: int, width: int, height: int) -> "ImageAug":
        """Scale pixel coordinates: u' = u * W'/W."""
        m = np.eye(3)
        m[0, 0] = width / old_width
        m[1, 1] = height / old_height
        return cls(m, width, height)

    @classmethod
    def rotate(cls, angle_rad: float, width: int, height: int) -> "ImageAug":
        """Rotate about the image center ((W-1)/2, (H-1)/2)."""
        cu, cv = (width - 1) / 2.0, (height - 1) / 2.0
        c, s = math.cos(angle_rad), math.sin(angle_rad)
        m = np.array(
            [
                [c, -s, cu - c * cu + s * cv],
                [s, c, cv - s * cu - c * cv],
                [0.0, 0.0, 1.0],
            ]
        )
        return cls(m, width, height)

    def then(self, after: "ImageAug") -> "ImageAug":
        """Composition: apply self first, then ``after``."""
        return ImageAug(after.matrix @ self.matrix, after.width, after.height)

    def apply_pixels(self, uv: np.ndarray) -> np.ndarray:
        """Warp (N, 2) pixel coordinates."""
        uv = np.asarray(uv, dtype=np.float64)
        return uv @ self.matrix[:2, :2].T + self.matrix[:2, 2]


def apply_image_aug(aug: ImageAug, K: CameraIntrinsics) -> CameraIntrinsics:
    """Fold a pixel-space affine into the intrinsics.

    The returned intrinsics satisfy project(p, K') == aug(project(p, K))
    for every 3D point. Raises if the affine has off-diagonal terms, which
    a 4-parameter pinhole cannot absorb.
    """
    m = aug.matrix
    if abs(m[0, 1]) > 1e-12 or abs(m[1, 0]) > 1e-12:
        raise ValueError(
            "affine with rotation/shear cannot fold into fx/fy/cx/cy intrinsics; "
            "only axis-aligned warps (flip/crop/resize) are foldable"
        )
    a, b = m[0, 0], m[1, 1]
    return CameraIntrinsics(
        fx=a * K.fx,
        fy=b * K.fy,
        cx=a * K.cx + m[0, 2],
        cy=b * K.cy + m[1, 2],
        width=aug.width,
        height=aug.height,
    )


@dataclass(frozen=True)
class Box3D:
    """Axis-yaw 3D box with planar velocity.

    Sizes are (w, h, l) in meters and must be positive; yaw is stored
    normalized to (-pi, pi].
    """

    center: tuple[float, float, float]
    size: tuple[float, float, float]
    yaw: float
    velocity: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if min(self.size) <= 0.0:
            raise ValueError(f"box sizes must be positive, got {self.size}")
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))
        object.__setattr__(self, "size", tuple(float(v) for v in self.size))
        object.__setattr__(self, "velocity", tuple(float(v) for v in self.velocity))
        object.__setattr__(self, "yaw", normalize_yaw(float(self.yaw)))


@dataclass(frozen=True)
class BevAug:
    """Ego-frame similarity transform: scale * orthogonal (rotation/flip).

    ``linear`` = scale * Q with Q orthogonal (det +1 for rotations, -1 for
    single flips); scale must be positive.
    """

    linear: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        m = np.asarray(self.linear, dtype=np.float64)
        if m.shape != (3, 3):
            raise ValueError(f"linear part must be 3x3, got {m.shape}")
        if self.scale <= 0.0 or not math.isfinite(self.scale):
            raise ValueError(f"scale must be positive, got {self.scale}")
        q = m / self.scale
        if np.abs(q.T @ q - np.eye(3)).max() > 1e-9:
            raise ValueError("linear part must be scale * orthogonal")
        m.setflags(write=False)
        object.__setattr__(self, "linear", m)

    @classmethod
    def identity(cls) -> "BevAug":
        return cls(np.eye(3))

    @classmethod
    def flip_x(cls) -> "BevAug":
        """Mirror across the x axis (y -> -y)."""
        return cls(np.diag([1.0, -1.0, 1.0]))

    @classmethod
    def flip_y(cls) -> "BevAug":
        """Mirror across the y axis (x -> -x)."""
        return cls(np.diag([-1.0, 1.0, 1.0]))

    @classmethod
    def yaw(cls, angle_rad: float) -> "BevAug":
        c, s = math.cos(angle_rad), math.sin(angle_rad)
        return cls(np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]))

    @classmethod
    def scaling(cls, factor: float) -> "BevAug":
        return cls(np.eye(3) * factor, scale=factor)

    def then(self, after: "BevAug") -> "BevAug":
        """Composition: apply self first, then ``after``."""
        return BevAug(after.linear @ self.linear, after.scale * self.scale)

    def apply_points(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.float64)
        return pts @ self.linear.T

    @property
    def unit_part(self) -> np.ndarray:
        """Orthogonal factor Q (rotation and/or reflection, no scale)."""
        return self.linear / self.scale


_MIRROR_CAM_X = np.diag([-1.0, 1.0, 1.0])


def _transform_box(aug: BevAug, box: Box3D) -> Box3D:
    center = aug.apply_points(np.asarray(box.center))
    q = aug.unit_part
    heading = q @ np.array([math.cos(box.yaw), math.sin(box.yaw), 0.0])
    vel = q @ np.array([box.velocity[0], box.velocity[1], 0.0])
    return Box3D(
        center=tuple(center),
        size=tuple(s * aug.scale for s in box.size),
        yaw=math.atan2(heading[1], heading[0]),
        velocity=(vel[0], vel[1]),
    )


def apply_bev_aug(
    aug: BevAug, rig: CameraRig, boxes: list[Box3D]
) -> tuple[CameraRig, list[Box3D]]:
    """Move the world by ``aug`` and rewrite calibration and boxes to match.

    Projection consistency: for any world point P,
    project(P, original camera) == project(aug(P), augmented camera).

    Cameras view the transformed world through cam_from_ego composed with
    the inverse transform. The positive scale cancels out of the pinhole
    projection and survives only as a rescaled camera position; a
    reflection is pulled out of the rotation and folded into the
    intrinsics as a negated fx.
    """
    inv_unit = aug.unit_part.T  # Q^-1; with 1/scale this inverts the linear part
    cameras = []
    for cam in rig:
        ext = cam.cam_from_ego
        m = ext.rotation @ inv_unit
        t = ext.translation * aug.scale
        K = cam.intrinsics
        if np.linalg.det(m) < 0.0:
            m = _MIRROR_CAM_X @ m
            t = _MIRROR_CAM_X @ t
            K = CameraIntrinsics(-K.fx, K.fy, K.cx, K.cy, K.width, K.height)
        cameras.append(Camera(cam.name, K, RigidTransform(m, t)))
    return CameraRig(tuple(cameras)), [_transform_box(aug, b) for b in boxes]


@dataclass(frozen=True)
class ImageAugConfig:
    """Sampling ranges for random image augmentation.

    Defaults are conventional training ranges, not values fixed by the
    transform itself. Rotation defaults to zero because rotations cannot
    fold into 4-parameter intrinsics (see :func:`apply_image_aug`).
    """

    flip_prob: float = 0.5
    resize_range: tuple[float, float] = (0.9, 1.1)
    crop_fraction: float = 0.1
    rotate_range: tuple[float, float] = (0.0, 0.0)


@dataclass(frozen=True)
class BevAugConfig:
    """Sampling ranges for random BEV augmentation (conventional defaults)."""

    flip_x_prob: float = 0.5
    flip_y_prob: float = 0.5
    yaw_range_rad: tuple[float, float] = (-math.pi / 8, math.pi / 8)
    scale_range: tuple[float, float] = (0.95, 1.05)


def sample_image_aug(
    cfg: ImageAugConfig, width: int, height: int, rng: np.random.Generator
) -> ImageAug:
    """Draw a random flip/resize/crop composition for a width x height image."""
    s = rng.uniform(*cfg.resize_range)
    new_w = max(1, round(width * s))
    new_h = max(1, round(height * s))
    aug = ImageAug.resize(width, height, new_w, new_h)
    if cfg.crop_fraction > 0.0:
        dx = int(rng.integers(0, max(1, int(new_w * cfg.crop_fraction))))
        dy = int(rng.integers(0, max(1, int(new_h * cfg.crop_fraction))))
        aug = aug.then(ImageAug.crop(dx, dy, new_w - dx, new_h - dy))
    if rng.random() < cfg.flip_prob:
        aug = aug.then(ImageAug.hflip(aug.width, aug.height))
    lo, hi = cfg.rotate_range
    if hi > lo:
        aug = aug.then(ImageAug.rotate(rng.uniform(lo, hi), aug.width, aug.height))
    return aug


def sample_bev_aug(cfg: BevAugConfig, rng: np.random.Generator) -> BevAug:
    """Draw a random flip/yaw/scale composition."""
    aug = BevAug.yaw(rng.uniform(*cfg.yaw_range_rad))
    if rng.random() < cfg.flip_x_prob:
        aug = aug.then(BevAug.flip_x())
    if rng.random() < cfg.flip_y_prob:
        aug = aug.then(BevAug.flip_y())
    return aug.then(BevAug.scaling(rng.uniform(*cfg.scale_range)))
