"""Calibration and ego-pose JSON: schema, validation, and the bundled rig.

Schema (version 1):

    {
      "version": 1,
      "cameras": [
        {
          "name": str,
          "width": int, "height": int,
          "intrinsics": {"fx": f, "fy": f, "cx": f, "cy": f},
          "cam_from_ego": {"rotation": [9 floats, row-major],
                           "translation": [3 floats]}
        }, ...
      ],
      "frames": [
        {"timestamp": f, "world_from_ego": {"rotation": [...],
                                            "translation": [...]}}, ...
      ]
    }

Rotations are accepted if orthonormal within 1e-6 and are snapped to the
nearest exact rotation before constructing transforms; determinant -1 is
rejected with the offending field path. Loaded focal lengths must be
positive (negative focals only arise internally, from augmentation
folding).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .geometry import Camera, CameraIntrinsics, CameraRig, RigidTransform

__all__ = [
    "CalibrationError",
    "EgoFrame",
    "load_calibration",
    "loads_calibration",
    "save_calibration",
    "dumps_calibration",
    "bundled_rig",
]

SCHEMA_VERSION = 1
_ROT_LOAD_TOL = 1e-6

BUNDLED_RIG_RESOURCE = "surround6.json"


class CalibrationError(ValueError):
    """Schema violation in a calibration file; message carries the field path."""


@dataclass(frozen=True)
class EgoFrame:
    """One timestamped ego pose from the calibration's frame sequence."""

    timestamp: float
    world_from_ego: RigidTransform


def _require(obj: dict, key: str, path: str):
    if key not in obj:
        raise CalibrationError(f"{path}.{key}: missing required field")
    return obj[key]


def _number(value, path: str) -> float:
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise CalibrationError(f"{path}: expected a number, got {type(value).__name__}")
    return float(value)


def _parse_transform(obj, path: str, *, snap_tol: float = _ROT_LOAD_TOL) -> RigidTransform:
    if not isinstance(obj, dict):
        raise CalibrationError(f"{path}: expected an object")
    rot = _require(obj, "rotation", path)
    tra = _require(obj, "translation", path)
    if not isinstance(rot, list) or len(rot) != 9:
        raise CalibrationError(f"{path}.rotation: expected 9 row-major floats")
    if not isinstance(tra, list) or len(tra) != 3:
        raise CalibrationError(f"{path}.translation: expected 3 floats")
    r = np.array([_number(v, f"{path}.rotation") for v in rot]).reshape(3, 3)
    t = np.array([_number(v, f"{path}.translation") for v in tra])
    err = np.abs(r.T @ r - np.eye(3)).max()
    if err > snap_tol:
        raise CalibrationError(
            f"{path}.rotation: not orthonormal (error {err:.3e} beyond {snap_tol:g})"
        )
    if np.linalg.det(r) < 0.0:
        raise CalibrationError(f"{path}.rotation: determinant is -1 (reflection)")
    # Snap to the nearest exact rotation so downstream invariants hold.
    u, _, vt = np.linalg.svd(r)
    r = u @ vt
    return RigidTransform(r, t)


def _parse_camera(obj, idx: int) -> Camera:
    path = f"cameras[{idx}]"
    if not isinstance(obj, dict):
        raise CalibrationError(f"{path}: expected an object")
    name = _require(obj, "name", path)
    if not isinstance(name, str) or not name:
        raise CalibrationError(f"{path}.name: expected a non-empty string")
    width = _require(obj, "width", path)
    height = _require(obj, "height", path)
    if any(
        not isinstance(v, int) or isinstance(v, bool) or v < 1 for v in (width, height)
    ):
        raise CalibrationError(f"{path}: width/height must be positive integers")
    intr = _require(obj, "intrinsics", path)
    if not isinstance(intr, dict):
        raise CalibrationError(f"{path}.intrinsics: expected an object")
    vals = {k: _number(_require(intr, k, f"{path}.intrinsics"), f"{path}.intrinsics.{k}")
            for k in ("fx", "fy", "cx", "cy")}
    if vals["fx"] <= 0.0 or vals["fy"] <= 0.0:
        raise CalibrationError(
            f"{path}.intrinsics: focal lengths must be positive in calibration files"
        )
    try:
        ext = _parse_transform(_require(obj, "cam_from_ego", path), f"{path}.cam_from_ego")
    except CalibrationError as exc:
        raise CalibrationError(f"camera {name!r}: {exc}") from None
    return Camera(name, CameraIntrinsics(width=width, height=height, **vals), ext)


def loads_calibration(text: str) -> tuple[CameraRig, list[EgoFrame]]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CalibrationError(f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise CalibrationError("top level: expected an object")
    version = _require(doc, "version", "top level")
    if version != SCHEMA_VERSION:
        raise CalibrationError(f"version: expected {SCHEMA_VERSION}, got {version!r}")
    cams_obj = _require(doc, "cameras", "top level")
    if not isinstance(cams_obj, list) or not cams_obj:
        raise CalibrationError("cameras: expected a non-empty list")
    rig = CameraRig(tuple(_parse_camera(c, i) for i, c in enumerate(cams_obj)))
    frames = []
    for i, f in enumerate(doc.get("frames", [])):
        path = f"frames[{i}]"
        if not isinstance(f, dict):
            raise CalibrationError(f"{path}: expected an object")
        ts = _number(_require(f, "timestamp", path), f"{path}.timestamp")
        pose = _parse_transform(_require(f, "world_from_ego", path), f"{path}.world_from_ego")
        frames.append(EgoFrame(ts, pose))
    return rig, frames


def load_calibration(path) -> tuple[CameraRig, list[EgoFrame]]:
    """Load and validate a calibration file; see module docstring for schema."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except FileNotFoundError:
        raise FileNotFoundError(f"calibration file not found: {path}") from None
    return loads_calibration(text)


def _transform_obj(t: RigidTransform) -> dict:
    return {
        "rotation": [float(v) for v in t.rotation.reshape(-1)],
        "translation": [float(v) for v in t.translation],
    }


def dumps_calibration(rig: CameraRig, frames: list[EgoFrame] | None = None) -> str:
    doc = {
        "version": SCHEMA_VERSION,
        "cameras": [
            {
                "name": c.name,
                "width": c.intrinsics.width,
                "height": c.intrinsics.height,
                "intrinsics": {
                    "fx": c.intrinsics.fx,
                    "fy": c.intrinsics.fy,
                    "cx": c.intrinsics.cx,
                    "cy": c.intrinsics.cy,
                },
                "cam_from_ego": _transform_obj(c.cam_from_ego),
            }
            for c in rig
        ],
        "frames": [
            {"timestamp": f.timestamp, "world_from_ego": _transform_obj(f.world_from_ego)}
            for f in (frames or [])
        ],
    }
    return json.dumps(doc, indent=2)


def save_calibration(path, rig: CameraRig, frames: list[EgoFrame] | None = None) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(dumps_calibration(rig, frames))
        f.write("\n")


def bundled_rig() -> tuple[CameraRig, list[EgoFrame]]:
    """The packaged six-camera surround rig and its short pose sequence."""
    text = (
        resources.files("fastray") / "data" / BUNDLED_RIG_RESOURCE
    ).read_text(encoding="utf-8")
    return loads_calibration(text)
