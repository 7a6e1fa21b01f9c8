"""Ground station: receives frame streams, turns detections into world-space
tracks, and keeps a queryable latest-position snapshot.

The REP for each frame is sent only after that frame's processing completes,
so a slow station automatically throttles every connected camera to its own
pace. Cameras are processed concurrently but frames within one session are
strictly sequential.
"""

from __future__ import annotations

import json
import logging
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

from .errors import ConfigError, MalformedPayloadError
from .geometry import CameraModel
from .pose import DEFAULT_CONF_THRESHOLD, PoseDetection, anchor_pixel_from_pose, decode_kp17
from .tracking import MERGE_MODES, Track, Tracker, TrackLogWriter, TrackPoint, fps_stats
from .transport import DEFAULT_PORT, FrameMessage, FrameReceiver

log = logging.getLogger(__name__)

# Optional hook type: turns an image frame into detections. The bundled
# pipeline only understands kp17 payloads; a real detector plugs in here.
FrameDetector = Callable[[FrameMessage], list[PoseDetection]]


@dataclass
class StationConfig:
    cameras: dict[str, CameraModel]
    host: str = "127.0.0.1"
    port: int = DEFAULT_PORT
    conf_threshold: float = DEFAULT_CONF_THRESHOLD
    iqr_enabled: bool = True
    merge_mode: str = "concat"
    output_dir: Optional[Path] = None
    trial_id: str = "trial"
    processing_delay_s: float = 0.0

    def __post_init__(self):
        if not self.cameras:
            raise ConfigError("station needs at least one camera model")
        if self.merge_mode not in MERGE_MODES:
            raise ConfigError(f"unknown merge mode {self.merge_mode!r}")
        if not (0.0 <= self.conf_threshold <= 1.0):
            raise ConfigError("conf_threshold must be in [0, 1]")
        if self.processing_delay_s < 0:
            raise ConfigError("processing_delay_s must be >= 0")
        if self.output_dir is not None:
            self.output_dir = Path(self.output_dir)


def load_station_config(path: str | Path) -> StationConfig:
    """Read a station JSON file; camera model paths are resolved relative to it."""
    base = Path(path).parent
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"station config is not valid JSON: {exc}") from exc
    try:
        listen = doc.get("listen", f"127.0.0.1:{DEFAULT_PORT}")
        host, _, port = listen.rpartition(":")
        cameras = {}
        for cam_id, model_path in doc["cameras"].items():
            model = CameraModel.load(base / model_path)
            if model.camera_id != cam_id:
                raise ConfigError(
                    f"camera model {model_path} is for {model.camera_id!r}, "
                    f"configured as {cam_id!r}"
                )
            cameras[cam_id] = model
        out_dir = doc.get("output_dir")
        return StationConfig(
            cameras=cameras,
            host=host or "127.0.0.1",
            port=int(port),
            conf_threshold=float(doc.get("conf_threshold", DEFAULT_CONF_THRESHOLD)),
            iqr_enabled=bool(doc.get("iqr", True)),
            merge_mode=doc.get("merge_mode", "concat"),
            output_dir=Path(base / out_dir) if out_dir else None,
            trial_id=str(doc.get("trial_id", "trial")),
            processing_delay_s=float(doc.get("processing_delay_ms", 0)) / 1000.0,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid station config: {exc}") from exc


class GroundStation:
    """Runs the receive -> detect -> project -> track pipeline."""

    def __init__(self, config: StationConfig, detector: Optional[FrameDetector] = None):
        self.config = config
        self.tracker = Tracker(config.cameras)
        self.detector = detector
        self._receiver = FrameReceiver(self._handle_frame,
                                       host=config.host, port=config.port)
        self._log_writer: Optional[TrackLogWriter] = None
        self._log_path: Optional[Path] = None
        self._counts_lock = threading.Lock()
        self.counters = {
            "frames": 0,
            "detections": 0,
            "no_anchor": 0,
            "malformed_payload": 0,
            "undecodable_encoding": 0,
        }
        self._processed_wall_us: dict[str, list[int]] = {}
        self._started_at: Optional[float] = None

    @property
    def address(self) -> tuple[str, int]:
        return self._receiver.address

    def start(self) -> "GroundStation":
        if self.config.output_dir is not None:
            self.config.output_dir.mkdir(parents=True, exist_ok=True)
            self._log_path = self.config.output_dir / f"{self.config.trial_id}_track.csv"
            self._log_writer = TrackLogWriter(self._log_path, self.config.trial_id)
        self._receiver.start()
        self._started_at = time.time()
        log.info("ground station listening on %s:%s", *self.address)
        return self

    def stop(self) -> Optional[Path]:
        self._receiver.stop()
        if self._log_writer is not None:
            path = self._log_writer.finalize()
            self._log_writer = None
            return path
        return None

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()

    def _count(self, key: str, n: int = 1) -> None:
        with self._counts_lock:
            self.counters[key] += n

    def _handle_frame(self, message: FrameMessage) -> None:
        if self.config.processing_delay_s > 0:
            time.sleep(self.config.processing_delay_s)
        header = message.header
        detections: list[PoseDetection] = []
        if header.encoding == "kp17":
            try:
                detections = decode_kp17(message.payload)
            except MalformedPayloadError as exc:
                self._count("malformed_payload")
                log.warning("bad kp17 payload from %s seq %s: %s",
                            header.camera_id, header.seq, exc)
        elif self.detector is not None:
            detections = self.detector(message)
        else:
            self._count("undecodable_encoding")
        for det in detections:
            self._count("detections")
            anchor = anchor_pixel_from_pose(det, self.config.conf_threshold)
            if anchor is None:
                self._count("no_anchor")
                continue
            point = self.tracker.ingest(header, anchor,
                                        person_tag=det.person_tag, source="pose")
            if point is not None and self._log_writer is not None:
                self._log_writer.append(point)
        self._count("frames")
        with self._counts_lock:
            self._processed_wall_us.setdefault(header.camera_id, []).append(
                int(time.monotonic() * 1e6)
            )

    def processed_fps(self, camera_id: Optional[str] = None) -> Optional[float]:
        """Wall-clock processing rate; None until it is measurable."""
        with self._counts_lock:
            if camera_id is not None:
                ts = list(self._processed_wall_us.get(camera_id, []))
            else:
                ts = sorted(t for lst in self._processed_wall_us.values() for t in lst)
        if len(ts) < 2 or ts[-1] <= ts[0]:
            return None
        return fps_stats(ts)["fps"]

    def processed_timestamps(self, camera_id: str) -> list[int]:
        with self._counts_lock:
            return list(self._processed_wall_us.get(camera_id, []))

    def latest_positions(self) -> dict[int, TrackPoint]:
        return self.tracker.latest_positions()

    def merged_track(self) -> Track:
        return self.tracker.merged_track(mode=self.config.merge_mode,
                                         iqr=self.config.iqr_enabled)

    def status(self) -> dict:
        with self._counts_lock:
            counters = dict(self.counters)
        receiver = dict(self._receiver.stats)
        return {
            "listening": f"{self.address[0]}:{self.address[1]}",
            "uptime_s": (time.time() - self._started_at) if self._started_at else 0.0,
            "cameras": sorted(self.config.cameras),
            "counters": counters,
            "receiver": receiver,
            "ingested": self.tracker.ingested,
            "drops": dict(self.tracker.drops),
            "fps": {cam: self.processed_fps(cam)
                    for cam in self.config.cameras},
            "track_log": str(self._log_path) if self._log_path else None,
        }
