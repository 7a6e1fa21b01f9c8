"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field


class CalibrationSampleIn(BaseModel):
    row_px: float
    depth_m: float
    object_width_px: Optional[float] = None
    object_width_m: Optional[float] = None


class CameraPoseIn(BaseModel):
    camera_id: str
    image_w: int = 640
    image_h: int = 480
    principal_col: Optional[float] = None
    world_pos: tuple[float, float] = (0.0, 0.0)
    yaw_deg: float = 0.0


class CalibrateRequest(BaseModel):
    samples: list[CalibrationSampleIn]
    camera: CameraPoseIn
    depth_degree: int = 3
    lateral_degree: int = 3


class CameraModelOut(BaseModel):
    version: int
    camera_id: str
    image_w: int
    image_h: int
    principal_col: float
    depth_coeffs: list[float]
    lateral_coeffs: list[float]
    world_pos: tuple[float, float]
    yaw_deg: float
    valid_row_range: tuple[float, float]


class CalibrateResponse(BaseModel):
    model: CameraModelOut
    depth_residual_rms_m: float
    lateral_residual_rms_mpp: float
    depth_monotone: bool
    n_samples: int


class WaypointIn(BaseModel):
    x_m: float
    y_m: float
    dwell_s: float = 0.0
    speed_mps: float = 1.0


class ScenarioIn(BaseModel):
    room_w: float
    room_h: float
    cameras: list[CameraModelOut]
    trajectory: list[WaypointIn]
    grid_pitch_m: float = 0.6096
    pixel_noise_px: float = 0.0
    detector_latency_ms: float = 0.0
    capture_fps: float = 4.0
    trial_duration_s: float = 20.0
    rng_seed: int = 0


class SimulateRequest(BaseModel):
    scenario: ScenarioIn
    trials: int = Field(default=1, ge=1, le=200)
    snap_truth: bool = False


class TrialStats(BaseModel):
    trial: int
    mean_m: float
    sd_m: float
    min_m: float
    max_m: float
    n_matched: int
    n_unmatched: int
    fps: Optional[float] = None


class SimulateResponse(BaseModel):
    mean_m: float
    sd_m: float
    min_m: float
    max_m: float
    n_trials: int
    fps_mean: Optional[float] = None
    fps_sd: Optional[float] = None
    per_trial: list[TrialStats]


class TrackPointIn(BaseModel):
    ts_us: int
    x_m: float
    y_m: float


class EvaluateRequest(BaseModel):
    estimated: list[TrackPointIn]
    truth: list[TrackPointIn]
    match_window_us: int = 200_000


class EvaluateResponse(BaseModel):
    mean_m: float
    sd_m: float
    min_m: float
    max_m: float
    n_matched: int
    n_unmatched: int


class PredictFitRequest(BaseModel):
    points: list[TrackPointIn]
    robot_points: Optional[list[TrackPointIn]] = None
    lags: int = Field(default=4, ge=1, le=32)
    dt_s: float = 0.25


class ARModelOut(BaseModel):
    p: int
    dt_s: float
    c: tuple[float, float]
    A: list[list[list[float]]]
    B: list[list[list[float]]]
    fit_rmse_m: float


class PredictFitResponse(BaseModel):
    model: ARModelOut
    n_samples: int


class PredictNextRequest(BaseModel):
    model: ARModelOut
    window: list[tuple[float, float]]
    robot_window: Optional[list[tuple[float, float]]] = None
    steps: int = Field(default=1, ge=1, le=1000)


class PredictNextResponse(BaseModel):
    predictions: list[tuple[float, float]]
    horizon_s: float


class LatestPosition(BaseModel):
    person_tag: int
    ts_us: int
    x_m: float
    y_m: float
    camera_id: str
    source: str


class PositionsResponse(BaseModel):
    positions: list[LatestPosition]


class TrackResponse(BaseModel):
    points: list[LatestPosition]
    n_points: int
    iqr_applied: bool
    merge_mode: str


class StatusResponse(BaseModel):
    service: Literal["gridtrack"] = "gridtrack"
    version: str
    station: Optional[dict] = None
