#!/usr/bin/env python3
"""Regenerate the bundled six-camera surround rig fixture.

Six level cameras at 60-degree yaw spacing on a 1.2 m ring, 1.6 m above
ground, each with a ~64 degree horizontal field of view, plus a short
constant-turn ego trajectory sampled at 0.5 s. Writes
src/fastray/data/surround6.json.
"""

import pathlib
import sys

import numpy as np

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from fastray.calib import EgoFrame, save_calibration
from fastray.geometry import Camera, CameraIntrinsics, CameraRig, RigidTransform

WIDTH, HEIGHT = 1600, 900
FOCAL = 1270.0
RING_RADIUS = 1.2
CAMERA_HEIGHT = 1.6
YAWS_DEG = [0, 60, 120, 180, -120, -60]
NAMES = ["front", "front_left", "back_left", "back", "back_right", "front_right"]


def level_camera(name: str, yaw_deg: float) -> Camera:
    psi = np.deg2rad(yaw_deg)
    c, s = np.cos(psi), np.sin(psi)
    # Camera axes in ego coordinates: x right, y down, z forward.
    ego_from_cam = np.column_stack([[s, -c, 0.0], [0.0, 0.0, -1.0], [c, s, 0.0]])
    position = np.array([RING_RADIUS * c, RING_RADIUS * s, CAMERA_HEIGHT])
    cam_from_ego = RigidTransform(ego_from_cam.T, -ego_from_cam.T @ position)
    intr = CameraIntrinsics(FOCAL, FOCAL, (WIDTH - 1) / 2.0, (HEIGHT - 1) / 2.0, WIDTH, HEIGHT)
    return Camera(name, intr, cam_from_ego)


def turning_pose(t: float) -> RigidTransform:
    # Constant 8 m/s forward speed with a gentle left turn.
    omega = np.deg2rad(6.0)
    speed = 8.0
    heading = omega * t
    radius = speed / omega
    x = radius * np.sin(heading)
    y = radius * (1.0 - np.cos(heading))
    c, s = np.cos(heading), np.sin(heading)
    rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    return RigidTransform(rot, np.array([x, y, 0.0]))


def main() -> None:
    rig = CameraRig(tuple(level_camera(n, y) for n, y in zip(NAMES, YAWS_DEG)))
    frames = [EgoFrame(round(0.5 * i, 1), turning_pose(0.5 * i)) for i in range(5)]
    out = pathlib.Path(__file__).resolve().parents[1] / "src" / "fastray" / "data" / "surround6.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    save_calibration(out, rig, frames)
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
