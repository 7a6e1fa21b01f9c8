"""Anchor selection rules and the kp17 payload codec."""

from __future__ import annotations

import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridtrack.errors import MalformedPayloadError
from gridtrack.pose import (
    BBox,
    Keypoint,
    LEFT_ANKLE,
    NUM_KEYPOINTS,
    PERSON_RECORD_SIZE,
    PoseDetection,
    RIGHT_ANKLE,
    anchor_pixel_from_pose,
    bbox_to_anchor_pixel,
    decode_kp17,
    encode_kp17,
)

from conftest import make_detection


class TestAnchorFromPose:
    def test_left_ankle_preferred(self):
        det = make_detection(left_ankle=(320, 400, 0.9), right_ankle=(300, 398, 0.8))
        assert anchor_pixel_from_pose(det, 0.5) == (320, 400)

    def test_right_ankle_fallback(self):
        det = make_detection(left_ankle=(320, 400, 0.1), right_ankle=(300, 398, 0.8))
        assert anchor_pixel_from_pose(det, 0.5) == (300, 398)

    def test_midpoint_when_both_half_confident(self):
        det = make_detection(left_ankle=(320, 400, 0.3), right_ankle=(300, 398, 0.28))
        assert anchor_pixel_from_pose(det, 0.5) == (310, 399)

    def test_no_anchor_below_all_thresholds(self):
        det = make_detection(left_ankle=(320, 400, 0.1), right_ankle=(300, 398, 0.1))
        assert anchor_pixel_from_pose(det, 0.5) is None

    def test_bad_threshold_rejected(self):
        det = make_detection()
        with pytest.raises(ValueError):
            anchor_pixel_from_pose(det, 1.5)

    @given(
        left_conf=st.floats(0, 1),
        right_conf=st.floats(0, 1),
        threshold=st.floats(0, 1),
    )
    def test_returned_pixel_meets_applicable_threshold(self, left_conf, right_conf,
                                                       threshold):
        det = make_detection(left_ankle=(10.0, 20.0, left_conf),
                             right_ankle=(30.0, 40.0, right_conf))
        anchor = anchor_pixel_from_pose(det, threshold)
        if anchor == (10.0, 20.0):
            assert left_conf >= threshold
        elif anchor == (30.0, 40.0):
            assert right_conf >= threshold
        elif anchor is not None:
            assert left_conf >= threshold / 2 and right_conf >= threshold / 2
        else:
            assert left_conf < threshold and right_conf < threshold
            assert left_conf < threshold / 2 or right_conf < threshold / 2


class TestBBoxAnchor:
    def test_bottom_center_simple(self):
        assert bbox_to_anchor_pixel(BBox(0, 0, 10, 10)) == (5, 10)

    def test_bottom_center_arithmetic(self):
        assert bbox_to_anchor_pixel(BBox(100, 50, 140, 250)) == (120, 250)

    @pytest.mark.parametrize("bad", [(10, 0, 10, 10), (11, 0, 10, 10),
                                     (0, 10, 10, 10), (0, 11, 10, 10)])
    def test_degenerate_rejected_at_construction(self, bad):
        with pytest.raises(ValueError):
            BBox(*bad)


def f32(x: float) -> float:
    return float(np.float32(x))


class TestKp17Codec:
    def test_empty_list(self):
        payload = encode_kp17([])
        assert payload == b"\x00\x00"
        assert decode_kp17(payload) == []

    def test_single_detection_length(self):
        kps = tuple(Keypoint(1.5, 2.5, 1.0) for _ in range(NUM_KEYPOINTS))
        det = PoseDetection(keypoints=kps, person_tag=0)
        payload = encode_kp17([det])
        assert len(payload) == 2 + 1 * NUM_KEYPOINTS * 12 == 206
        assert decode_kp17(payload) == [det]

    def test_round_trip_fuzz(self, rng):
        for _ in range(300):
            n = int(rng.integers(0, 5))
            dets = []
            for tag in range(n):
                kps = tuple(
                    Keypoint(f32(rng.uniform(0, 640)), f32(rng.uniform(0, 480)),
                             f32(rng.uniform(0, 1)))
                    for _ in range(NUM_KEYPOINTS)
                )
                dets.append(PoseDetection(keypoints=kps, person_tag=tag))
            assert decode_kp17(encode_kp17(dets)) == dets

    @given(st.lists(
        st.tuples(st.floats(-1e6, 1e6, width=32), st.floats(-1e6, 1e6, width=32),
                  st.floats(0, 1, width=32)),
        min_size=NUM_KEYPOINTS, max_size=NUM_KEYPOINTS,
    ))
    @settings(max_examples=200)
    def test_round_trip_identity_property(self, triples):
        det = PoseDetection(
            keypoints=tuple(Keypoint(*t) for t in triples), person_tag=0
        )
        assert decode_kp17(encode_kp17([det])) == [det]

    def test_wrong_length_rejected(self):
        kps = tuple(Keypoint(1.0, 2.0, 0.5) for _ in range(NUM_KEYPOINTS))
        payload = encode_kp17([PoseDetection(keypoints=kps)])
        with pytest.raises(MalformedPayloadError):
            decode_kp17(payload[:-1])
        with pytest.raises(MalformedPayloadError):
            decode_kp17(payload + b"\x00")
        with pytest.raises(MalformedPayloadError):
            decode_kp17(b"")
        with pytest.raises(MalformedPayloadError):
            decode_kp17(b"\x01")

    def test_count_mismatch_rejected(self):
        # count says 2 persons but only one record present
        record = struct.pack("<" + "f" * 51, *([0.5] * 51))
        assert len(record) == PERSON_RECORD_SIZE
        with pytest.raises(MalformedPayloadError):
            decode_kp17(struct.pack("<H", 2) + record)

    def test_out_of_range_confidence_rejected(self):
        flat = [10.0, 20.0, 1.5] * NUM_KEYPOINTS  # conf > 1
        payload = struct.pack("<H", 1) + struct.pack("<" + "f" * 51, *flat)
        with pytest.raises(MalformedPayloadError):
            decode_kp17(payload)

    def test_decode_assigns_person_tags_in_order(self):
        kps = tuple(Keypoint(1.0, 2.0, 0.5) for _ in range(NUM_KEYPOINTS))
        dets = [PoseDetection(keypoints=kps, person_tag=i) for i in range(3)]
        decoded = decode_kp17(encode_kp17(dets))
        assert [d.person_tag for d in decoded] == [0, 1, 2]


class TestDataModel:
    def test_exactly_17_keypoints_required(self):
        kps = tuple(Keypoint(0, 0, 0.5) for _ in range(16))
        with pytest.raises(ValueError):
            PoseDetection(keypoints=kps)

    def test_conf_in_unit_interval(self):
        with pytest.raises(ValueError):
            Keypoint(0, 0, -0.01)
        with pytest.raises(ValueError):
            Keypoint(0, 0, 1.01)

    def test_ankle_indices_fixed_by_coco_order(self):
        det = make_detection(left_ankle=(1, 2, 0.9), right_ankle=(3, 4, 0.8))
        assert det.keypoints[LEFT_ANKLE] == Keypoint(1, 2, 0.9)
        assert det.keypoints[RIGHT_ANKLE] == Keypoint(3, 4, 0.8)
