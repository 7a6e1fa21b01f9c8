"""World-space tracks: detection ingest, IQR outlier filtering, cross-camera
merging, and frame-rate statistics."""

from __future__ import annotations

import csv
import logging
import math
import os
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from .errors import ConfigError, OutOfCalibrationError, UndefinedStatError
from .geometry import CameraModel, pixel_to_world
from .transport.framing import FrameHeader

log = logging.getLogger(__name__)

# Outlier cut multiplier on the inter-quartile range. Fixed; override only via
# an explicit argument.
IQR_MULTIPLIER = 1.5

MERGE_MODES = ("concat", "window-average")
MERGE_WINDOW_US = 150_000

TRACK_CSV_FIELDS = ["trial", "camera_id", "ts_us", "person_tag", "x_m", "y_m", "source"]


@dataclass(frozen=True)
class TrackPoint:
    ts_us: int
    pos: tuple[float, float]
    camera_id: str
    person_tag: int = 0
    source: str = "pose"

    def __post_init__(self):
        if not (math.isfinite(self.pos[0]) and math.isfinite(self.pos[1])):
            raise ValueError(f"non-finite position {self.pos}")
        # normalize numpy scalars so logs/JSON render plain floats
        object.__setattr__(self, "pos", (float(self.pos[0]), float(self.pos[1])))
        object.__setattr__(self, "ts_us", int(self.ts_us))


@dataclass(frozen=True)
class Track:
    points: tuple[TrackPoint, ...] = ()

    def __post_init__(self):
        pts = tuple(self.points)
        for a, b in zip(pts, pts[1:]):
            if b.ts_us < a.ts_us:
                raise ValueError("track timestamps must be non-decreasing")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def xs(self) -> list[float]:
        return [p.pos[0] for p in self.points]

    def ys(self) -> list[float]:
        return [p.pos[1] for p in self.points]


def ingest_detection(model: CameraModel, header: FrameHeader,
                     anchor: tuple[float, float],
                     person_tag: int = 0, source: str = "pose") -> TrackPoint:
    """Project one anchor pixel into a world-space TrackPoint.

    Raises OutOfCalibrationError for anchors the model cannot place; callers
    drop those with a counted reason.
    """
    pos = pixel_to_world(model, anchor[0], anchor[1])
    return TrackPoint(ts_us=header.ts_us, pos=pos, camera_id=header.camera_id,
                      person_tag=person_tag, source=source)


def quartiles(values: Sequence[float]) -> tuple[float, float]:
    """Q1 and Q3 by linear interpolation at 0.25(n-1) and 0.75(n-1).

    The convention is pinned so filter results are bit-reproducible.
    """
    if not values:
        raise ValueError("quartiles of empty sequence")
    ordered = sorted(values)
    n = len(ordered)

    def at(q: float) -> float:
        h = q * (n - 1)
        i = math.floor(h)
        if i + 1 >= n:
            return ordered[-1]
        return ordered[i] + (h - i) * (ordered[i + 1] - ordered[i])

    return at(0.25), at(0.75)


def iqr_filter(track: Track, multiplier: float = IQR_MULTIPLIER) -> Track:
    """Drop points whose x or y falls outside [Q1 - k*IQR, Q3 + k*IQR].

    Bounds are computed once per axis from the whole original series (single
    pass; never iterated). Tracks shorter than 4 points pass through.
    """
    if len(track) < 4:
        return track
    lo_x, hi_x = _bounds(track.xs(), multiplier)
    lo_y, hi_y = _bounds(track.ys(), multiplier)
    kept = [p for p in track.points
            if lo_x <= p.pos[0] <= hi_x and lo_y <= p.pos[1] <= hi_y]
    return Track(tuple(kept))


def _bounds(values: Sequence[float], multiplier: float) -> tuple[float, float]:
    q1, q3 = quartiles(values)
    spread = q3 - q1
    return q1 - multiplier * spread, q3 + multiplier * spread


def merge_camera_tracks(tracks: Mapping[str, Track] | Iterable[Track],
                        mode: str = "concat",
                        window_us: int = MERGE_WINDOW_US) -> Track:
    """Combine per-camera tracks into one global track.

    "concat" unions all points sorted by timestamp (ties broken by camera id
    for determinism). "window-average" additionally collapses points from
    different cameras within window_us into their centroid, stamped at the
    earliest time in the group.
    """
    if mode not in MERGE_MODES:
        raise ConfigError(f"unknown merge mode {mode!r}")
    track_list = list(tracks.values()) if isinstance(tracks, Mapping) else list(tracks)
    merged = sorted((p for t in track_list for p in t),
                    key=lambda p: (p.ts_us, p.camera_id, p.person_tag))
    if mode == "concat":
        return Track(tuple(merged))

    out: list[TrackPoint] = []
    pool = merged
    while pool:
        head = pool[0]
        group = [head]
        cams = {head.camera_id}
        rest: list[TrackPoint] = []
        for p in pool[1:]:
            if p.ts_us - head.ts_us <= window_us and p.camera_id not in cams:
                group.append(p)
                cams.add(p.camera_id)
            else:
                rest.append(p)
        pool = rest
        if len(group) == 1:
            out.append(head)
        else:
            cx = sum(p.pos[0] for p in group) / len(group)
            cy = sum(p.pos[1] for p in group) / len(group)
            out.append(TrackPoint(
                ts_us=head.ts_us,
                pos=(cx, cy),
                camera_id="+".join(sorted(cams)),
                person_tag=head.person_tag,
                source=head.source,
            ))
    return Track(tuple(sorted(out, key=lambda p: (p.ts_us, p.camera_id))))


def fps_stats(ts_us: Sequence[int | float]) -> dict[str, float]:
    """Frames per second over a trial: (N - 1) / elapsed seconds."""
    if len(ts_us) < 2:
        raise UndefinedStatError(f"need >= 2 timestamps for FPS, got {len(ts_us)}")
    span_s = (ts_us[-1] - ts_us[0]) / 1e6
    if span_s <= 0:
        raise UndefinedStatError("timestamps span no time")
    return {"fps": (len(ts_us) - 1) / span_s}


class Tracker:
    """Shared track state fed concurrently by per-session ingest.

    Appends are guarded by a lock; snapshots/merges run on copies. Ingest
    never fabricates points: ingested + dropped = offered.
    """

    def __init__(self, models: Mapping[str, CameraModel]):
        self._models = dict(models)
        self._lock = threading.Lock()
        self._points: dict[str, list[TrackPoint]] = {}
        self._latest: dict[int, TrackPoint] = {}
        self.drops: dict[str, int] = {}
        self.ingested = 0

    def model_for(self, camera_id: str) -> CameraModel:
        try:
            return self._models[camera_id]
        except KeyError:
            raise ConfigError(f"no camera model for {camera_id!r}") from None

    def ingest(self, header: FrameHeader, anchor: tuple[float, float],
               person_tag: int = 0, source: str = "pose") -> Optional[TrackPoint]:
        """Project and record one anchor; returns None when dropped."""
        try:
            model = self.model_for(header.camera_id)
        except ConfigError:
            self._drop("unknown_camera")
            return None
        try:
            point = ingest_detection(model, header, anchor, person_tag, source)
        except OutOfCalibrationError:
            self._drop("out_of_calibration")
            return None
        with self._lock:
            self._points.setdefault(header.camera_id, []).append(point)
            self._latest[person_tag] = point
            self.ingested += 1
        return point

    def _drop(self, reason: str) -> None:
        with self._lock:
            self.drops[reason] = self.drops.get(reason, 0) + 1

    def camera_track(self, camera_id: str) -> Track:
        with self._lock:
            pts = list(self._points.get(camera_id, []))
        return Track(tuple(sorted(pts, key=lambda p: p.ts_us)))

    def camera_ids(self) -> list[str]:
        with self._lock:
            return sorted(self._points)

    def merged_track(self, mode: str = "concat", iqr: bool = False) -> Track:
        tracks = {cam: self.camera_track(cam) for cam in self.camera_ids()}
        merged = merge_camera_tracks(tracks, mode=mode)
        return iqr_filter(merged) if iqr else merged

    def latest_positions(self) -> dict[int, TrackPoint]:
        with self._lock:
            return dict(self._latest)

    def drop_count(self, reason: str | None = None) -> int:
        with self._lock:
            if reason is None:
                return sum(self.drops.values())
            return self.drops.get(reason, 0)


class TrackLogWriter:
    """Appends track points to CSV as they arrive; finalize() renames the
    temp file into place so a crash loses at most the in-flight frame."""

    def __init__(self, path: str | Path, trial: str):
        self._path = Path(path)
        self._tmp_path = self._path.with_suffix(self._path.suffix + ".part")
        self._trial = trial
        self._lock = threading.Lock()
        self._fh = open(self._tmp_path, "w", newline="")
        self._writer = csv.writer(self._fh)
        self._writer.writerow(TRACK_CSV_FIELDS)
        self._fh.flush()
        self.rows = 0

    def append(self, point: TrackPoint) -> None:
        with self._lock:
            self._writer.writerow([
                self._trial, point.camera_id, point.ts_us, point.person_tag,
                repr(point.pos[0]), repr(point.pos[1]), point.source,
            ])
            self._fh.flush()
            self.rows += 1

    def finalize(self, sort: bool = True) -> Path:
        """Close and atomically rename; rows are sorted for reproducibility."""
        with self._lock:
            self._fh.flush()
            os.fsync(self._fh.fileno())
            self._fh.close()
        if sort:
            with open(self._tmp_path, newline="") as fh:
                reader = csv.reader(fh)
                header = next(reader)
                rows = sorted(reader, key=lambda r: (int(r[2]), r[1], int(r[3])))
            with open(self._tmp_path, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(header)
                writer.writerows(rows)
        os.replace(self._tmp_path, self._path)
        return self._path

    def abort(self) -> None:
        with self._lock:
            if not self._fh.closed:
                self._fh.close()
        if self._tmp_path.exists():
            self._tmp_path.unlink()


def load_track_csv(path: str | Path) -> Track:
    """Read a track log back into a single time-sorted Track."""
    points = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(TRACK_CSV_FIELDS) - set(reader.fieldnames or [])
        if missing:
            raise ConfigError(f"track CSV missing columns: {sorted(missing)}")
        for row in reader:
            points.append(TrackPoint(
                ts_us=int(row["ts_us"]),
                pos=(float(row["x_m"]), float(row["y_m"])),
                camera_id=row["camera_id"],
                person_tag=int(row["person_tag"]),
                source=row["source"],
            ))
    points.sort(key=lambda p: (p.ts_us, p.camera_id))
    return Track(tuple(points))
