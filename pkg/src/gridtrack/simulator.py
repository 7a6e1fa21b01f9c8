"""Scene simulator: ground-truth trajectories on the floor grid, synthetic
keypoint streams per camera, full-stack replay through the real transport,
and accuracy evaluation against ground truth.

With detector_latency_ms == 0 a trial is a deterministic lockstep replay
(every frame acknowledged and processed, simulated timestamps); with a
positive latency the cameras pace themselves in wall-clock time and the
station's forced per-frame delay throttles them through REQ/REP, dropping
intermediate frames exactly as a live deployment would.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, EvaluationError, UnsupportedModelError
from .geometry import CameraModel, world_to_pixel
from .pose import NUM_KEYPOINTS, Keypoint, PoseDetection, encode_kp17
from .station import GroundStation, StationConfig
from .tracking import Track, fps_stats
from .transport import FrameHeader, FrameMessage, FrameSender, LatestFrameMailbox, pump_mailbox, send_frames_lockstep

log = logging.getLogger(__name__)

GRID_PITCH_M = 0.6096  # 2 ft cells

MATCH_WINDOW_US = 200_000

ANKLE_CONF = 0.95
TEMPLATE_CONF = 0.5

# Pixel offsets (du, dv) from the ankle anchor for the 15 non-anchor
# keypoints of a roughly standing figure; dv < 0 is up the image.
BODY_TEMPLATE_PX = (
    (0.0, -170.0),    # nose
    (-4.0, -175.0),   # left_eye
    (4.0, -175.0),    # right_eye
    (-9.0, -170.0),   # left_ear
    (9.0, -170.0),    # right_ear
    (-16.0, -140.0),  # left_shoulder
    (16.0, -140.0),   # right_shoulder
    (-20.0, -110.0),  # left_elbow
    (20.0, -110.0),   # right_elbow
    (-22.0, -82.0),   # left_wrist
    (22.0, -82.0),    # right_wrist
    (-10.0, -80.0),   # left_hip
    (10.0, -80.0),    # right_hip
    (-8.0, -40.0),    # left_knee
    (8.0, -40.0),     # right_knee
)


@dataclass(frozen=True)
class Waypoint:
    x_m: float
    y_m: float
    dwell_s: float = 0.0
    speed_mps: float = 1.0

    def __post_init__(self):
        if self.dwell_s < 0:
            raise ConfigError("dwell_s must be >= 0")
        if self.speed_mps <= 0:
            raise ConfigError("speed_mps must be > 0")


@dataclass
class ScenarioConfig:
    room_w: float
    room_h: float
    cameras: list[CameraModel]
    trajectory: list[Waypoint]
    grid_pitch_m: float = GRID_PITCH_M
    pixel_noise_px: float = 0.0
    detector_latency_ms: float = 0.0
    capture_fps: float = 4.0
    trial_duration_s: float = 20.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.room_w <= 0 or self.room_h <= 0:
            raise ConfigError("room dimensions must be positive")
        if self.grid_pitch_m <= 0:
            raise ConfigError("grid pitch must be positive")
        if self.pixel_noise_px < 0:
            raise ConfigError("pixel noise must be >= 0")
        if self.detector_latency_ms < 0:
            raise ConfigError("detector latency must be >= 0")
        if self.capture_fps <= 0:
            raise ConfigError("capture fps must be positive")
        if self.trial_duration_s <= 0:
            raise ConfigError("trial duration must be positive")
        if not self.cameras:
            raise ConfigError("scenario needs at least one camera")
        if not self.trajectory:
            raise ConfigError("scenario needs at least one waypoint")
        for wp in self.trajectory:
            if not (0 <= wp.x_m <= self.room_w and 0 <= wp.y_m <= self.room_h):
                raise ConfigError(f"waypoint ({wp.x_m}, {wp.y_m}) outside room")

    def to_dict(self) -> dict:
        return {
            "room_w": self.room_w,
            "room_h": self.room_h,
            "grid_pitch_m": self.grid_pitch_m,
            "cameras": [cam.to_dict() for cam in self.cameras],
            "trajectory": [
                {"x_m": wp.x_m, "y_m": wp.y_m,
                 "dwell_s": wp.dwell_s, "speed_mps": wp.speed_mps}
                for wp in self.trajectory
            ],
            "pixel_noise_px": self.pixel_noise_px,
            "detector_latency_ms": self.detector_latency_ms,
            "capture_fps": self.capture_fps,
            "trial_duration_s": self.trial_duration_s,
            "rng_seed": self.rng_seed,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ScenarioConfig":
        try:
            return cls(
                room_w=float(doc["room_w"]),
                room_h=float(doc["room_h"]),
                grid_pitch_m=float(doc.get("grid_pitch_m", GRID_PITCH_M)),
                cameras=[CameraModel.from_dict(c) for c in doc["cameras"]],
                trajectory=[Waypoint(
                    x_m=float(w["x_m"]), y_m=float(w["y_m"]),
                    dwell_s=float(w.get("dwell_s", 0.0)),
                    speed_mps=float(w.get("speed_mps", 1.0)),
                ) for w in doc["trajectory"]],
                pixel_noise_px=float(doc.get("pixel_noise_px", 0.0)),
                detector_latency_ms=float(doc.get("detector_latency_ms", 0.0)),
                capture_fps=float(doc.get("capture_fps", 4.0)),
                trial_duration_s=float(doc.get("trial_duration_s", 20.0)),
                rng_seed=int(doc.get("rng_seed", 0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid scenario: {exc}") from exc

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "ScenarioConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"scenario file is not valid JSON: {exc}") from exc
        return cls.from_dict(doc)


@dataclass(frozen=True)
class GroundTruthTrack:
    ts_us: tuple[int, ...]
    xy: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if len(self.ts_us) != len(self.xy):
            raise ValueError("timestamp/position length mismatch")
        for a, b in zip(self.ts_us, self.ts_us[1:]):
            if b <= a:
                raise ValueError("ground-truth timestamps must be strictly increasing")

    def __len__(self) -> int:
        return len(self.ts_us)

    def positions(self) -> np.ndarray:
        return np.asarray(self.xy, dtype=float)

    def cell_snapped(self, pitch_m: float = GRID_PITCH_M) -> "GroundTruthTrack":
        """Positions mapped to the center of their containing grid cell."""
        snapped = tuple(
            ((math.floor(x / pitch_m) + 0.5) * pitch_m,
             (math.floor(y / pitch_m) + 0.5) * pitch_m)
            for x, y in self.xy
        )
        return GroundTruthTrack(self.ts_us, snapped)


GT_CSV_FIELDS = ["ts_us", "x_m", "y_m"]


def save_ground_truth_csv(path: str | Path, truth: GroundTruthTrack) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(GT_CSV_FIELDS)
        for ts, (x, y) in zip(truth.ts_us, truth.xy):
            writer.writerow([ts, repr(x), repr(y)])


def load_ground_truth_csv(path: str | Path) -> GroundTruthTrack:
    ts, xy = [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(GT_CSV_FIELDS) - set(reader.fieldnames or [])
        if missing:
            raise ConfigError(f"ground-truth CSV missing columns: {sorted(missing)}")
        for row in reader:
            ts.append(int(row["ts_us"]))
            xy.append((float(row["x_m"]), float(row["y_m"])))
    return GroundTruthTrack(tuple(ts), tuple(xy))


def gen_trajectory(config: ScenarioConfig) -> GroundTruthTrack:
    """Sample the waypoint path at capture instants.

    Motion is piecewise linear at each leg's constant speed, with dwells at
    waypoints; after the last waypoint the subject stands still.
    """
    waypoints = config.trajectory
    # Build (time, position) knots along the path.
    knot_t = [0.0]
    knot_xy = [(waypoints[0].x_m, waypoints[0].y_m)]
    t = waypoints[0].dwell_s
    if t > 0:
        knot_t.append(t)
        knot_xy.append(knot_xy[0])
    for prev, wp in zip(waypoints, waypoints[1:]):
        dist = math.hypot(wp.x_m - prev.x_m, wp.y_m - prev.y_m)
        if dist > 0:
            t += dist / wp.speed_mps
            knot_t.append(t)
            knot_xy.append((wp.x_m, wp.y_m))
        if wp.dwell_s > 0:
            t += wp.dwell_s
            knot_t.append(t)
            knot_xy.append((wp.x_m, wp.y_m))
    knots_t = np.asarray(knot_t)
    knots_x = np.asarray([p[0] for p in knot_xy])
    knots_y = np.asarray([p[1] for p in knot_xy])

    n = int(math.floor(config.trial_duration_s * config.capture_fps)) + 1
    times = np.arange(n) / config.capture_fps
    xs = np.interp(times, knots_t, knots_x)
    ys = np.interp(times, knots_t, knots_y)
    ts_us = tuple(int(round(tv * 1e6)) for tv in times)
    return GroundTruthTrack(ts_us, tuple((float(x), float(y)) for x, y in zip(xs, ys)))


def render_keypoints(truth: GroundTruthTrack, camera: CameraModel,
                     sigma_px: float, rng: np.random.Generator
                     ) -> list[tuple[int, list[PoseDetection]]]:
    """Project ground truth into one camera's kp17 detections.

    Both ankles get the projected anchor pixel plus N(0, sigma^2) noise per
    axis; the other 15 keypoints sit on a fixed offset template. Samples the
    camera cannot see yield zero-person frames. Noise is drawn for every
    sample (then scaled by sigma) so runs with different sigma share draws.
    """
    if not camera.depth_monotone:
        raise UnsupportedModelError(
            f"camera {camera.camera_id} has a non-monotone depth model"
        )
    frames: list[tuple[int, list[PoseDetection]]] = []
    for ts, (x, y) in zip(truth.ts_us, truth.xy):
        noise = rng.standard_normal(2) * sigma_px
        pixel = world_to_pixel(camera, (x, y))
        if pixel is None:
            frames.append((ts, []))
            continue
        u = pixel[0] + noise[0]
        v = pixel[1] + noise[1]
        keypoints = [
            Keypoint(u + du, v + dv, TEMPLATE_CONF) for du, dv in BODY_TEMPLATE_PX
        ]
        keypoints.append(Keypoint(u, v, ANKLE_CONF))  # left ankle
        keypoints.append(Keypoint(u, v, ANKLE_CONF))  # right ankle
        assert len(keypoints) == NUM_KEYPOINTS
        frames.append((ts, [PoseDetection(keypoints=tuple(keypoints), person_tag=0)]))
    return frames


def frames_to_messages(camera: CameraModel,
                       rendered: Sequence[tuple[int, list[PoseDetection]]]
                       ) -> list[FrameMessage]:
    """Wrap rendered detections as kp17 wire messages with increasing seq."""
    messages = []
    for seq, (ts, detections) in enumerate(rendered):
        header = FrameHeader(
            camera_id=camera.camera_id, seq=seq, ts_us=ts,
            width=camera.image_w, height=camera.image_h, encoding="kp17",
        )
        messages.append(FrameMessage(header=header, payload=encode_kp17(detections)))
    return messages


def evaluate_accuracy(estimated: Track, truth: GroundTruthTrack,
                      match_window_us: int = MATCH_WINDOW_US) -> dict:
    """Per-trial accuracy of an estimated track against ground truth.

    Each estimated point is matched to the nearest-timestamp truth sample
    within the window; unmatched points are excluded but counted. Errors are
    Euclidean distances in meters.
    """
    if len(estimated) == 0 or len(truth) == 0:
        raise EvaluationError("evaluation needs non-empty tracks")
    truth_ts = np.asarray(truth.ts_us, dtype=np.int64)
    truth_xy = truth.positions()
    errors = []
    unmatched = 0
    for point in estimated:
        idx = int(np.searchsorted(truth_ts, point.ts_us))
        best, best_dt = None, None
        for j in (idx - 1, idx):
            if 0 <= j < len(truth_ts):
                dt = abs(int(truth_ts[j]) - point.ts_us)
                if best_dt is None or dt < best_dt:
                    best, best_dt = j, dt
        if best is None or best_dt > match_window_us:
            unmatched += 1
            continue
        errors.append(float(np.hypot(point.pos[0] - truth_xy[best, 0],
                                     point.pos[1] - truth_xy[best, 1])))
    if not errors:
        raise EvaluationError("no estimated point matched ground truth in time")
    arr = np.asarray(errors)
    return {
        "mean_m": float(arr.mean()),
        "sd_m": float(arr.std(ddof=1)) if len(arr) > 1 else 0.0,
        "min_m": float(arr.min()),
        "max_m": float(arr.max()),
        "n_matched": len(errors),
        "n_unmatched": unmatched,
    }


def aggregate_trials(per_trial: Sequence[dict]) -> dict:
    """Cross-trial aggregate: statistics of the per-trial mean errors."""
    if not per_trial:
        raise EvaluationError("no trials to aggregate")
    means = np.asarray([t["mean_m"] for t in per_trial])
    return {
        "mean_m": float(means.mean()),
        "sd_m": float(means.std(ddof=1)) if len(means) > 1 else 0.0,
        "min_m": float(means.min()),
        "max_m": float(means.max()),
        "n_trials": len(per_trial),
    }


@dataclass
class TrialResult:
    estimated: Track
    truth: GroundTruthTrack
    accuracy: dict
    fps_processed: Optional[float]
    drops: dict[str, int]
    counters: dict[str, int]
    sent: dict[str, int] = field(default_factory=dict)


def run_trial(config: ScenarioConfig, rng: np.random.Generator,
              snap_truth: bool = False) -> TrialResult:
    """One full trial through real sockets on loopback.

    Zero detector latency replays lockstep (deterministic); a positive
    latency runs wall-clock paced capture with latest-frame dropping.
    """
    truth = gen_trajectory(config)
    eval_truth = truth.cell_snapped(config.grid_pitch_m) if snap_truth else truth

    per_camera_frames: dict[str, list[FrameMessage]] = {}
    for camera in config.cameras:
        cam_rng = np.random.default_rng(rng.integers(0, 2**63 - 1))
        rendered = render_keypoints(truth, camera, config.pixel_noise_px, cam_rng)
        per_camera_frames[camera.camera_id] = frames_to_messages(camera, rendered)

    station_config = StationConfig(
        cameras={c.camera_id: c for c in config.cameras},
        host="127.0.0.1", port=0,
        processing_delay_s=config.detector_latency_ms / 1000.0,
    )
    station = GroundStation(station_config)
    sent: dict[str, int] = {}
    errors: list[BaseException] = []
    with station:
        host, port = station.address
        realtime = config.detector_latency_ms > 0
        threads = []
        for cam_id, frames in per_camera_frames.items():
            thread = threading.Thread(
                target=_run_camera, name=f"sim-{cam_id}",
                args=(host, port, frames, realtime, config.capture_fps,
                      sent, cam_id, errors),
            )
            thread.start()
            threads.append(thread)
        for thread in threads:
            thread.join()
        if errors:
            raise errors[0]
        estimated = station.tracker.merged_track(mode=station_config.merge_mode,
                                                 iqr=station_config.iqr_enabled)
        accuracy = evaluate_accuracy(estimated, eval_truth)
        fps = station.processed_fps()
        drops = dict(station.tracker.drops)
        counters = dict(station.counters)
    return TrialResult(estimated=estimated, truth=eval_truth, accuracy=accuracy,
                       fps_processed=fps, drops=drops, counters=counters, sent=sent)


def _run_camera(host: str, port: int, frames: list[FrameMessage],
                realtime: bool, capture_fps: float,
                sent: dict[str, int], cam_id: str,
                errors: list[BaseException]) -> None:
    try:
        _run_camera_inner(host, port, frames, realtime, capture_fps, sent, cam_id)
    except BaseException as exc:
        log.exception("simulated camera %s failed", cam_id)
        errors.append(exc)


def _run_camera_inner(host: str, port: int, frames: list[FrameMessage],
                      realtime: bool, capture_fps: float,
                      sent: dict[str, int], cam_id: str) -> None:
    with FrameSender(host, port) as sender:
        if not realtime:
            sent[cam_id] = send_frames_lockstep(sender, frames)
            return
        mailbox: LatestFrameMailbox[FrameMessage] = LatestFrameMailbox()

        def capture():
            start = time.monotonic()
            for i, frame in enumerate(frames):
                target = start + i / capture_fps
                delay = target - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
                mailbox.put(frame)
            mailbox.close()

        capture_thread = threading.Thread(target=capture, name=f"capture-{cam_id}")
        capture_thread.start()
        sent[cam_id] = pump_mailbox(sender, mailbox)
        capture_thread.join()


def run_simulation(config: ScenarioConfig, n_trials: int = 1,
                   snap_truth: bool = False) -> tuple[dict, list[TrialResult]]:
    """Run n trials with per-trial seeds derived from the scenario seed.

    Returns (report, per-trial results); the report is JSON-serializable.
    """
    if n_trials < 1:
        raise ConfigError("n_trials must be >= 1")
    seed_seq = np.random.SeedSequence(config.rng_seed)
    children = seed_seq.spawn(n_trials)
    per_trial = []
    results = []
    for i, child in enumerate(children):
        result = run_trial(config, np.random.default_rng(child), snap_truth=snap_truth)
        results.append(result)
        entry = dict(result.accuracy)
        entry["trial"] = i
        if result.fps_processed is not None:
            entry["fps"] = result.fps_processed
        per_trial.append(entry)
        log.info("trial %d: mean %.4f m over %d matched points",
                 i, entry["mean_m"], entry["n_matched"])
    aggregate = aggregate_trials(per_trial)
    fps_values = [t["fps"] for t in per_trial if "fps" in t]
    report = {
        **aggregate,
        "fps_mean": float(np.mean(fps_values)) if fps_values else None,
        "fps_sd": (float(np.std(fps_values, ddof=1))
                   if len(fps_values) > 1 else 0.0 if fps_values else None),
        "per_trial": per_trial,
    }
    return report, results


def write_xy_tracks(path: str | Path, estimated: Track,
                    truth: GroundTruthTrack) -> None:
    """Two-block gnuplot file: estimated points, blank-blank, truth points."""
    lines = ["# estimated track (x_m y_m)"]
    for p in estimated:
        lines.append(f"{p.pos[0]!r} {p.pos[1]!r}")
    lines.append("")
    lines.append("")
    lines.append("# ground truth (x_m y_m)")
    for x, y in truth.xy:
        lines.append(f"{x!r} {y!r}")
    Path(path).write_text("\n".join(lines) + "\n")
