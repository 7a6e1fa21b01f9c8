"""Shared fixtures and model factories for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from gridtrack.geometry import CameraModel
from gridtrack.pose import NUM_KEYPOINTS, Keypoint, PoseDetection


def make_camera(camera_id: str = "cam0",
                world_pos: tuple[float, float] = (0.0, 0.0),
                yaw_deg: float = 0.0,
                image_w: int = 640, image_h: int = 480) -> CameraModel:
    """Monotone linear depth model: D(v) = 8 - 0.015 v over rows [80, 440]."""
    return CameraModel(
        camera_id=camera_id,
        image_w=image_w,
        image_h=image_h,
        principal_col=(image_w - 1) / 2,
        depth_coeffs=(8.0, -0.015),
        lateral_coeffs=(0.01, -1.875e-5),  # s(v) = D(v) / 800
        world_pos=world_pos,
        yaw_deg=yaw_deg,
        valid_row_range=(80.0, 440.0),
    )


def make_random_camera(rng: np.random.Generator, camera_id: str = "cam") -> CameraModel:
    """Random but well-behaved model: decreasing depth, positive scale."""
    v_lo = float(rng.uniform(40, 120))
    v_hi = float(rng.uniform(360, 470))
    d_near = float(rng.uniform(0.5, 2.0))
    d_far = float(rng.uniform(4.0, 9.0))
    slope = (d_near - d_far) / (v_hi - v_lo)
    a0 = d_far - slope * v_lo
    focal = float(rng.uniform(500, 1200))
    return CameraModel(
        camera_id=camera_id,
        image_w=640,
        image_h=480,
        principal_col=float(rng.uniform(280, 360)),
        depth_coeffs=(a0, slope),
        lateral_coeffs=(a0 / focal, slope / focal),
        world_pos=(float(rng.uniform(-5, 5)), float(rng.uniform(-5, 5))),
        yaw_deg=float(rng.uniform(-180, 180)),
        valid_row_range=(v_lo, v_hi),
    )


def make_detection(left_ankle=(320.0, 400.0, 0.9),
                   right_ankle=(300.0, 398.0, 0.8),
                   person_tag: int = 0) -> PoseDetection:
    """Detection with filler keypoints and the given ankle (x, y, conf)."""
    points = [Keypoint(100.0 + i, 200.0 + i, 0.5) for i in range(NUM_KEYPOINTS - 2)]
    points.append(Keypoint(*left_ankle))
    points.append(Keypoint(*right_ankle))
    return PoseDetection(keypoints=tuple(points), person_tag=person_tag)


@pytest.fixture
def camera() -> CameraModel:
    return make_camera()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20260810)
