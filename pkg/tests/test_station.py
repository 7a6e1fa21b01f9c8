"""Ground-station pipeline over real sockets: logging, counters, resilience,
and REQ/REP throttling of the senders."""

from __future__ import annotations

import csv
import json
import socket
import time

import pytest

from gridtrack.errors import ConfigError
from gridtrack.pose import encode_kp17
from gridtrack.station import GroundStation, StationConfig, load_station_config
from gridtrack.tracking import fps_stats
from gridtrack.transport import FrameHeader, FrameMessage, FrameSender, send_frames_lockstep

from conftest import make_camera, make_detection


def kp17_frames(camera_id: str, n: int, v: float = 200.0, ts0: int = 0,
                dt_us: int = 250_000, conf: float = 0.9) -> list[FrameMessage]:
    frames = []
    for i in range(n):
        det = make_detection(left_ankle=(320.0, v, conf), right_ankle=(318.0, v, conf))
        header = FrameHeader(camera_id=camera_id, seq=i, ts_us=ts0 + i * dt_us,
                             width=640, height=480, encoding="kp17")
        frames.append(FrameMessage(header=header, payload=encode_kp17([det])))
    return frames


def station_config(tmp_path=None, **overrides) -> StationConfig:
    defaults = dict(
        cameras={"cam0": make_camera("cam0"), "cam1": make_camera("cam1")},
        host="127.0.0.1", port=0,
    )
    if tmp_path is not None:
        defaults["output_dir"] = tmp_path
    defaults.update(overrides)
    return StationConfig(**defaults)


def send_all(address, frames):
    with FrameSender(*address) as sender:
        return send_frames_lockstep(sender, frames)


class TestPipeline:
    def test_two_cameras_logged_with_ordered_timestamps(self, tmp_path):
        config = station_config(tmp_path, trial_id="t1")
        with GroundStation(config) as station:
            send_all(station.address, kp17_frames("cam0", 12))
            send_all(station.address, kp17_frames("cam1", 10, ts0=70_000))
        log_path = tmp_path / "t1_track.csv"
        assert log_path.exists()
        with open(log_path) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 22
        cams = {r["camera_id"] for r in rows}
        assert cams == {"cam0", "cam1"}
        per_cam = {}
        for r in rows:
            per_cam.setdefault(r["camera_id"], []).append(int(r["ts_us"]))
        for ts in per_cam.values():
            assert ts == sorted(ts)

    def test_latest_position_snapshot(self):
        config = station_config()
        with GroundStation(config) as station:
            send_all(station.address, kp17_frames("cam0", 3))
            latest = station.latest_positions()
            assert set(latest) == {0}
            assert latest[0].camera_id == "cam0"
            assert latest[0].ts_us == 2 * 250_000

    def test_malformed_payload_counted_session_continues(self):
        config = station_config()
        with GroundStation(config) as station:
            good = kp17_frames("cam0", 2)
            # handcraft a frame whose kp17 payload length lies
            bad_payload = b"\x01\x00" + bytes(10)
            header = {"v": 1, "cam": "cam0", "seq": 5, "ts_us": 0,
                      "w": 640, "h": 480, "enc": "kp17"}
            header_json = json.dumps(header, separators=(",", ":")).encode()
            import struct

            wire = (b"GTK1" + struct.pack(">I", len(header_json)) + header_json
                    + struct.pack(">I", len(bad_payload)) + bad_payload)
            sock = socket.create_connection(station.address)
            sock.settimeout(2.0)
            try:
                from gridtrack.transport import encode_frame

                sock.sendall(encode_frame(good[0]))
                assert sock.recv(1) == b"\x01"
                sock.sendall(wire)
                assert sock.recv(1) == b"\x01"  # malformed but acked
                sock.sendall(encode_frame(good[1]))
                assert sock.recv(1) == b"\x01"
            finally:
                sock.close()
            deadline = time.monotonic() + 2.0
            while time.monotonic() < deadline and station.tracker.ingested < 2:
                time.sleep(0.01)
            status = station.status()
        assert status["receiver"]["malformed"] == 1
        assert station.tracker.ingested == 2

    def test_unknown_camera_dropped_counted(self):
        config = station_config()
        with GroundStation(config) as station:
            send_all(station.address, kp17_frames("ghost", 3))
            send_all(station.address, kp17_frames("cam0", 2))
        assert station.tracker.drops["unknown_camera"] == 3
        assert station.tracker.ingested == 2

    def test_anchor_below_threshold_counted(self):
        # ankles at conf 0.2 fail both the 0.8 threshold and its midpoint half
        config = station_config(conf_threshold=0.8)
        with GroundStation(config) as station:
            send_all(station.address, kp17_frames("cam0", 4, conf=0.2))
            status = station.status()
        assert status["counters"]["no_anchor"] == 4
        assert station.tracker.ingested == 0

    def test_out_of_calibration_anchor_counted(self):
        config = station_config()
        with GroundStation(config) as station:
            send_all(station.address, kp17_frames("cam0", 3, v=470.0))
        assert station.tracker.drops["out_of_calibration"] == 3

    def test_rep_throttles_sender_to_processing_rate(self):
        # 100 ms forced processing: lockstep sender paces to ~10 msg/s
        config = station_config(processing_delay_s=0.1)
        with GroundStation(config) as station:
            start = time.monotonic()
            send_all(station.address, kp17_frames("cam0", 8))
            elapsed = time.monotonic() - start
            ts = station.processed_timestamps("cam0")
        assert elapsed >= 8 * 0.1
        fps = fps_stats(ts)["fps"]
        assert fps == pytest.approx(10.0, rel=0.2)

    def test_requires_camera_models(self):
        with pytest.raises(ConfigError):
            StationConfig(cameras={})


class TestStationConfigFile:
    def test_load_round_trip(self, tmp_path):
        cam = make_camera("cam0")
        cam.save(tmp_path / "cam0.json")
        doc = {
            "listen": "127.0.0.1:0",
            "cameras": {"cam0": "cam0.json"},
            "conf_threshold": 0.4,
            "iqr": False,
            "merge_mode": "window-average",
            "output_dir": "out",
            "trial_id": "abc",
            "processing_delay_ms": 250,
        }
        path = tmp_path / "station.json"
        path.write_text(json.dumps(doc))
        config = load_station_config(path)
        assert config.cameras["cam0"] == cam
        assert config.conf_threshold == 0.4
        assert config.iqr_enabled is False
        assert config.merge_mode == "window-average"
        assert config.output_dir == tmp_path / "out"
        assert config.trial_id == "abc"
        assert config.processing_delay_s == pytest.approx(0.25)

    def test_mismatched_camera_id_rejected(self, tmp_path):
        cam = make_camera("actual")
        cam.save(tmp_path / "cam.json")
        path = tmp_path / "station.json"
        path.write_text(json.dumps({"cameras": {"configured": "cam.json"}}))
        with pytest.raises(ConfigError):
            load_station_config(path)

    def test_invalid_json_rejected(self, tmp_path):
        path = tmp_path / "station.json"
        path.write_text("{nope")
        with pytest.raises(ConfigError):
            load_station_config(path)
