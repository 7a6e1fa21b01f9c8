"""gridtrack: multi-camera indoor position tracking.

Camera nodes stream frames or pre-extracted keypoints to a ground station
over a latest-frame REQ/REP transport; the station converts ankle pixels to
world coordinates through per-camera ground-plane models, fuses and filters
the tracks, and fits a short-horizon autoregressive motion predictor. A scene
simulator with ground-truth trajectories makes every stage testable without
cameras.
"""

__version__ = "0.1.0"

from .errors import (
    CalibrationError,
    ConfigError,
    EvaluationError,
    GridTrackError,
    InsufficientDataError,
    MalformedMessageError,
    MalformedPayloadError,
    OutOfCalibrationError,
    ProtocolViolationError,
    UndefinedStatError,
    UnsupportedModelError,
)
from .geometry import (
    CalibrationSample,
    CameraModel,
    fit_depth_model,
    fit_lateral_model,
    pixel_to_world,
    world_to_pixel,
)
from .pose import (
    BBox,
    Keypoint,
    PoseDetection,
    anchor_pixel_from_pose,
    bbox_to_anchor_pixel,
    decode_kp17,
    encode_kp17,
)
from .prediction import ARModel, fit_ar, fit_ar_pooled, predict_next, resample_uniform, rollout
from .simulator import (
    GroundTruthTrack,
    ScenarioConfig,
    Waypoint,
    evaluate_accuracy,
    gen_trajectory,
    render_keypoints,
    run_simulation,
)
from .station import GroundStation, StationConfig
from .tracking import (
    Track,
    TrackPoint,
    Tracker,
    fps_stats,
    ingest_detection,
    iqr_filter,
    merge_camera_tracks,
)
from .transport import (
    ConflationMap,
    FrameHeader,
    FrameMessage,
    FrameReceiver,
    FrameSender,
    LatestFrameMailbox,
    conflate,
    decode_frame,
    encode_frame,
)
