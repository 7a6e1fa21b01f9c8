"""Wire framing codec and conflation semantics."""

from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridtrack.pose import NUM_KEYPOINTS, Keypoint, PoseDetection, encode_kp17
from gridtrack.transport import (
    ConflationMap,
    FrameError,
    FrameHeader,
    FrameMessage,
    MAGIC,
    conflate,
    decode_frame,
    encode_frame,
)


def kp17_message(camera_id="cam0", seq=0, ts_us=0, persons=0) -> FrameMessage:
    kps = tuple(Keypoint(1.0, 2.0, 0.5) for _ in range(NUM_KEYPOINTS))
    dets = [PoseDetection(keypoints=kps, person_tag=i) for i in range(persons)]
    header = FrameHeader(camera_id=camera_id, seq=seq, ts_us=ts_us,
                         width=640, height=480, encoding="kp17")
    return FrameMessage(header=header, payload=encode_kp17(dets))


class TestFrameCodec:
    def test_minimal_kp17_round_trip(self):
        msg = kp17_message("cam0", persons=0)
        wire = encode_frame(msg)
        # magic | u32 len | header json | u32 len | 2-byte empty kp17 payload
        header_json = json.dumps(
            {"v": 1, "cam": "cam0", "seq": 0, "ts_us": 0, "w": 640, "h": 480,
             "enc": "kp17"},
            separators=(",", ":")).encode()
        assert len(wire) == 4 + 4 + len(header_json) + 4 + 2
        assert wire[:4] == MAGIC
        assert decode_frame(wire) == msg

    def test_round_trip_all_encodings(self):
        messages = [
            kp17_message("kpcam", seq=7, ts_us=123456, persons=3),
            FrameMessage(
                header=FrameHeader(camera_id="raw", seq=1, ts_us=2,
                                   width=8, height=4, encoding="raw8"),
                payload=bytes(range(32)),
            ),
            FrameMessage(
                header=FrameHeader(camera_id="jpg", seq=9, ts_us=10,
                                   width=640, height=480, encoding="jpeg"),
                payload=b"\xff\xd8 not really a jpeg \xff\xd9",
            ),
        ]
        for msg in messages:
            assert decode_frame(encode_frame(msg)) == msg

    def test_truncation_always_rejected(self):
        msg = kp17_message("cam0", seq=3, persons=2)
        wire = encode_frame(msg)
        for cut in range(1, len(wire)):
            with pytest.raises(FrameError):
                decode_frame(wire[:cut])

    def test_trailing_garbage_rejected(self):
        wire = encode_frame(kp17_message())
        with pytest.raises(FrameError):
            decode_frame(wire + b"\x00")

    def test_bad_magic_rejected_unrecoverable(self):
        wire = bytearray(encode_frame(kp17_message()))
        wire[0] ^= 0xFF
        with pytest.raises(FrameError) as info:
            decode_frame(bytes(wire))
        assert not info.value.recoverable

    def test_bad_version_recoverable(self):
        msg = kp17_message()
        wire = encode_frame(msg)
        # splice a v=2 header of identical length
        header_json = json.dumps(
            {"v": 2, "cam": "cam0", "seq": 0, "ts_us": 0, "w": 640, "h": 480,
             "enc": "kp17"}, separators=(",", ":")).encode()
        spliced = wire[:8] + header_json + wire[8 + len(header_json):]
        with pytest.raises(FrameError) as info:
            decode_frame(spliced)
        assert info.value.recoverable

    def test_raw8_payload_length_enforced(self):
        header = FrameHeader(camera_id="c", seq=0, ts_us=0,
                             width=640, height=480, encoding="raw8")
        FrameMessage(header=header, payload=bytes(307200))
        with pytest.raises(ValueError):
            FrameMessage(header=header, payload=bytes(307199))

    def test_kp17_payload_consistency_enforced(self):
        header = FrameHeader(camera_id="c", seq=0, ts_us=0,
                             width=640, height=480, encoding="kp17")
        with pytest.raises(ValueError):
            FrameMessage(header=header, payload=b"\x01\x00" + bytes(10))

    def test_header_field_validation(self):
        with pytest.raises(ValueError):
            FrameHeader(camera_id="x" * 65, seq=0, ts_us=0,
                        width=1, height=1, encoding="jpeg")
        with pytest.raises(ValueError):
            FrameHeader(camera_id="c", seq=-1, ts_us=0,
                        width=1, height=1, encoding="jpeg")
        with pytest.raises(ValueError):
            FrameHeader(camera_id="c", seq=0, ts_us=0,
                        width=1, height=1, encoding="png")

    @given(
        camera_id=st.text(
            alphabet=st.characters(codec="utf-8", exclude_categories=("Cs",)),
            min_size=1, max_size=16),
        seq=st.integers(0, 2**64 - 1),
        ts_us=st.integers(0, 2**60),
        persons=st.integers(0, 4),
    )
    @settings(max_examples=150)
    def test_round_trip_identity_property(self, camera_id, seq, ts_us, persons):
        msg = kp17_message(camera_id, seq=seq, ts_us=ts_us, persons=persons)
        assert decode_frame(encode_frame(msg)) == msg


class TestConflation:
    def test_newest_wins(self):
        state = {}
        for seq in (1, 2, 3):
            conflate(state, kp17_message("cam0", seq=seq))
        assert set(state) == {"cam0"}
        assert state["cam0"].header.seq == 3

    def test_stale_discarded(self):
        state = {}
        conflate(state, kp17_message("cam0", seq=5))
        conflate(state, kp17_message("cam1", seq=2))
        conflate(state, kp17_message("cam0", seq=4))
        assert state["cam0"].header.seq == 5
        assert state["cam1"].header.seq == 2

    def test_fuzz_matches_max_seq_oracle(self, rng):
        state = {}
        arrivals = []
        for _ in range(10_000):
            cam = f"cam{int(rng.integers(0, 2))}"
            seq = int(rng.integers(0, 10_000))
            msg = kp17_message(cam, seq=seq)
            arrivals.append(msg)
            conflate(state, msg)
        # oracle: linear scan for the per-sender maximum
        expected: dict[str, int] = {}
        for msg in arrivals:
            cam = msg.header.camera_id
            if cam not in expected or msg.header.seq > expected[cam]:
                expected[cam] = msg.header.seq
        assert {cam: m.header.seq for cam, m in state.items()} == expected

    def test_state_size_bounded_by_senders(self, rng):
        state = {}
        for _ in range(500):
            conflate(state, kp17_message(f"cam{int(rng.integers(0, 7))}",
                                         seq=int(rng.integers(0, 100))))
        assert len(state) <= 7

    def test_conflation_map_wrapper(self):
        inbox = ConflationMap()
        assert inbox.offer(kp17_message("a", seq=1))
        assert not inbox.offer(kp17_message("a", seq=0))
        assert inbox.offer(kp17_message("b", seq=9))
        assert len(inbox) == 2
        assert inbox.discarded == 1
        latest = inbox.latest()
        assert latest["a"].header.seq == 1
        assert inbox.pop("a").header.seq == 1
        assert inbox.pop("a") is None
