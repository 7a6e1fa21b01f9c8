"""Keypoint data model, ground-contact anchor selection and the kp17 codec.

The pose detector itself is pluggable; this module only fixes the COCO-17
keypoint layout, how a single anchor pixel is chosen from a detection, and
the byte layout used to ship pre-extracted keypoints over the wire.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .errors import MalformedPayloadError

COCO_KEYPOINT_NAMES = (
    "nose", "left_eye", "right_eye", "left_ear", "right_ear",
    "left_shoulder", "right_shoulder", "left_elbow", "right_elbow",
    "left_wrist", "right_wrist", "left_hip", "right_hip",
    "left_knee", "right_knee", "left_ankle", "right_ankle",
)

NUM_KEYPOINTS = 17
LEFT_ANKLE = 15
RIGHT_ANKLE = 16

DEFAULT_CONF_THRESHOLD = 0.3

# kp17 wire layout: little-endian u16 person count, then per person
# 17 x (f32 x, f32 y, f32 conf) in COCO-17 index order.
_COUNT_STRUCT = struct.Struct("<H")
_PERSON_STRUCT = struct.Struct("<" + "fff" * NUM_KEYPOINTS)
PERSON_RECORD_SIZE = _PERSON_STRUCT.size  # 17 * 12 = 204
MAX_PERSONS = 0xFFFF


@dataclass(frozen=True)
class Keypoint:
    x: float
    y: float
    conf: float

    def __post_init__(self):
        if not (0.0 <= self.conf <= 1.0):
            raise ValueError(f"confidence must be in [0, 1], got {self.conf}")


@dataclass(frozen=True)
class PoseDetection:
    """One person's 17 COCO keypoints within a frame."""

    keypoints: tuple[Keypoint, ...]
    person_tag: int = 0

    def __post_init__(self):
        if len(self.keypoints) != NUM_KEYPOINTS:
            raise ValueError(f"expected {NUM_KEYPOINTS} keypoints, got {len(self.keypoints)}")
        object.__setattr__(self, "keypoints", tuple(self.keypoints))

    @property
    def left_ankle(self) -> Keypoint:
        return self.keypoints[LEFT_ANKLE]

    @property
    def right_ankle(self) -> Keypoint:
        return self.keypoints[RIGHT_ANKLE]


@dataclass(frozen=True)
class BBox:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(
                f"degenerate bbox ({self.x_min}, {self.y_min}, {self.x_max}, {self.y_max})"
            )


def anchor_pixel_from_pose(detection: PoseDetection,
                           conf_threshold: float = DEFAULT_CONF_THRESHOLD
                           ) -> Optional[tuple[float, float]]:
    """Pick the ground-contact pixel for one detection.

    Left ankle wins when confident enough, then the right ankle; when neither
    clears the threshold but both clear half of it, their midpoint is used so
    partially occluded ankles still produce a position. Returns None when no
    rule applies.
    """
    if not (0.0 <= conf_threshold <= 1.0):
        raise ValueError(f"conf_threshold must be in [0, 1], got {conf_threshold}")
    left = detection.left_ankle
    right = detection.right_ankle
    if left.conf >= conf_threshold:
        return (left.x, left.y)
    if right.conf >= conf_threshold:
        return (right.x, right.y)
    if left.conf >= conf_threshold / 2 and right.conf >= conf_threshold / 2:
        return ((left.x + right.x) / 2, (left.y + right.y) / 2)
    return None


def bbox_to_anchor_pixel(bbox: BBox) -> tuple[float, float]:
    """Bottom-center of the box, the ground-contact estimate for boxed objects."""
    return ((bbox.x_min + bbox.x_max) / 2, bbox.y_max)


def encode_kp17(detections: Sequence[PoseDetection]) -> bytes:
    """Serialize detections to the kp17 payload.

    Person identity on the wire is the record order; person_tag is not
    transmitted and decode reassigns it from the index.
    """
    if len(detections) > MAX_PERSONS:
        raise ValueError(f"too many detections for kp17: {len(detections)}")
    parts = [_COUNT_STRUCT.pack(len(detections))]
    for det in detections:
        flat = []
        for kp in det.keypoints:
            flat.extend((kp.x, kp.y, kp.conf))
        parts.append(_PERSON_STRUCT.pack(*flat))
    return b"".join(parts)


def decode_kp17(payload: bytes) -> list[PoseDetection]:
    """Parse a kp17 payload, rejecting any length mismatch."""
    if len(payload) < _COUNT_STRUCT.size:
        raise MalformedPayloadError(f"kp17 payload too short: {len(payload)} bytes")
    (count,) = _COUNT_STRUCT.unpack_from(payload, 0)
    expected = _COUNT_STRUCT.size + count * PERSON_RECORD_SIZE
    if len(payload) != expected:
        raise MalformedPayloadError(
            f"kp17 payload length {len(payload)} != {expected} for {count} person(s)"
        )
    detections = []
    offset = _COUNT_STRUCT.size
    for tag in range(count):
        flat = _PERSON_STRUCT.unpack_from(payload, offset)
        offset += PERSON_RECORD_SIZE
        try:
            keypoints = tuple(
                Keypoint(flat[3 * i], flat[3 * i + 1], flat[3 * i + 2])
                for i in range(NUM_KEYPOINTS)
            )
        except ValueError as exc:
            raise MalformedPayloadError(f"kp17 record {tag}: {exc}") from exc
        detections.append(PoseDetection(keypoints=keypoints, person_tag=tag))
    return detections
