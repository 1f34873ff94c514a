"""Camera-to-BEV view transformation built around a precomputed lookup table.

The package covers the full tensor/geometry pipeline around the transform:
multi-camera pinhole geometry, table precomputation and serialization,
three view-transformation routes (table-driven, naive per-camera, and
depth-weighted), BEV-plane operators, temporal multi-frame fusion,
calibration-consistent augmentation, detection-loss math, and a latency
benchmark harness with a CLI front end.
"""

__version__ = "0.1.0"

from .augment import BevAug, Box3D, ImageAug, apply_bev_aug, apply_image_aug
from .bench import BenchConfig, BenchReport, run_benchmark, suite_config, synth_features
from .bevops import (
    BevFeature,
    FusionWeights,
    channel_to_space,
    concat_channels,
    fuse_channels,
    space_to_channel,
    upsample_bev,
)
from .calib import EgoFrame, bundled_rig, load_calibration, save_calibration
from .geometry import (
    Camera,
    CameraIntrinsics,
    CameraRig,
    RigidTransform,
    VoxelGridSpec,
    compose,
    default_grid,
    project_point,
    voxel_center,
)
from .losses import AnchorBatch, LossWeights, detection_loss, focal_loss, loss_gradient, smooth_l1
from .lut import LookupTable, build_history_lut, build_lut, deserialize_lut, serialize_lut
from .temporal import FrameSample, align_to_current, fuse_frames
from .viewtrans import (
    DepthDistribution,
    FeatureStack,
    VoxelVolume,
    fast_ray_transform,
    lss_reference_transform,
    multi_scale_transform,
    naive_transform,
)

__all__ = [
    "__version__",
    "AnchorBatch",
    "BenchConfig",
    "BenchReport",
    "BevAug",
    "BevFeature",
    "Box3D",
    "Camera",
    "CameraIntrinsics",
    "CameraRig",
    "DepthDistribution",
    "EgoFrame",
    "FeatureStack",
    "FrameSample",
    "FusionWeights",
    "ImageAug",
    "LookupTable",
    "LossWeights",
    "RigidTransform",
    "VoxelGridSpec",
    "VoxelVolume",
    "align_to_current",
    "apply_bev_aug",
    "apply_image_aug",
    "build_history_lut",
    "build_lut",
    "bundled_rig",
    "channel_to_space",
    "compose",
    "concat_channels",
    "default_grid",
    "deserialize_lut",
    "detection_loss",
    "fast_ray_transform",
    "focal_loss",
    "fuse_channels",
    "fuse_frames",
    "load_calibration",
    "loss_gradient",
    "lss_reference_transform",
    "multi_scale_transform",
    "naive_transform",
    "project_point",
    "run_benchmark",
    "save_calibration",
    "serialize_lut",
    "smooth_l1",
    "space_to_channel",
    "suite_config",
    "synth_features",
    "upsample_bev",
    "voxel_center",
]
