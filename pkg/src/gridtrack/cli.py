"""Command-line interface.

Batch subcommands are thin wrappers over gridtrack.workflows; `serve` runs
the HTTP service with the TCP frame ingest; `status`/`positions` query a
running service. Log level comes from the GRIDTRACK_LOG env var.
"""

from __future__ import annotations

import json
import logging
import math
import os
import threading
import time

import click

from . import __version__, workflows
from .errors import GridTrackError
from .pose import Keypoint, PoseDetection, encode_kp17
from .station import load_station_config
from .transport import (
    FrameHeader,
    FrameMessage,
    FrameSender,
    LatestFrameMailbox,
    pump_mailbox,
    send_frames_lockstep,
)
from .transport.framing import iter_frames_from_file

log = logging.getLogger(__name__)


def _echo_json(doc: dict) -> None:
    click.echo(json.dumps(doc, indent=2))


def _fail(exc: Exception) -> "click.exceptions.Exit":
    click.echo(f"error: {exc}", err=True)
    return click.exceptions.Exit(1)


@click.group()
@click.version_option(version=__version__)
def main():
    """Multi-camera indoor position tracking."""
    level = os.environ.get("GRIDTRACK_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


@main.command()
@click.option("--samples", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Calibration CSV (row_px,depth_m,object_width_px,object_width_m).")
@click.option("--degree", default=3, show_default=True, help="Depth polynomial degree.")
@click.option("--lateral-degree", default=3, show_default=True,
              help="Lateral-scale polynomial degree.")
@click.option("--out", required=True, type=click.Path(dir_okay=False),
              help="Output camera-model JSON.")
@click.option("--cam-id", default="cam0", show_default=True)
@click.option("--image-w", default=640, show_default=True)
@click.option("--image-h", default=480, show_default=True)
@click.option("--principal-col", default=None, type=float,
              help="Principal column in pixels [default: (image_w-1)/2].")
@click.option("--world-pos", default="0,0", show_default=True,
              help="Camera world position as X,Y meters.")
@click.option("--yaw-deg", default=0.0, show_default=True,
              help="CCW angle from world +Y to the camera forward axis.")
def calibrate(samples, degree, lateral_degree, out, cam_id, image_w, image_h,
              principal_col, world_pos, yaw_deg):
    """Fit a camera model from a calibration-sample CSV."""
    try:
        wx, wy = (float(v) for v in world_pos.split(","))
    except ValueError:
        raise click.BadParameter("expected X,Y", param_hint="--world-pos")
    try:
        _, diag = workflows.calibrate(
            samples, camera_id=cam_id, image_w=image_w, image_h=image_h,
            depth_degree=degree, lateral_degree=lateral_degree,
            principal_col=principal_col, world_pos=(wx, wy), yaw_deg=yaw_deg,
            out=out,
        )
    except GridTrackError as exc:
        raise _fail(exc)
    click.echo(f"wrote {out}")
    _echo_json(diag)


@main.command()
@click.option("--scenario", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Scenario JSON file.")
@click.option("--trials", default=1, show_default=True)
@click.option("--out", default=None, type=click.Path(dir_okay=False),
              help="Write the evaluation report JSON here.")
@click.option("--xy-out", default=None, type=click.Path(dir_okay=False),
              help="Write a gnuplot XY file of trial 0 estimated vs truth.")
@click.option("--tracks-dir", default=None, type=click.Path(file_okay=False),
              help="Write per-trial track and truth CSVs here.")
@click.option("--snap-truth", is_flag=True,
              help="Evaluate against cell-center-snapped ground truth.")
def simulate(scenario, trials, out, xy_out, tracks_dir, snap_truth):
    """Run simulated trials through the full pipeline."""
    try:
        report = workflows.simulate(scenario, trials=trials, out=out,
                                    xy_out=xy_out, tracks_dir=tracks_dir,
                                    snap_truth=snap_truth)
    except GridTrackError as exc:
        raise _fail(exc)
    _echo_json(report)


@main.command()
@click.option("--est", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Estimated track CSV (track-log format).")
@click.option("--truth", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Ground-truth CSV (ts_us,x_m,y_m).")
@click.option("--window-ms", default=200, show_default=True,
              help="Timestamp matching window.")
def evaluate(est, truth, window_ms):
    """Score an estimated track against ground truth."""
    try:
        stats = workflows.evaluate(est, truth, match_window_us=window_ms * 1000)
    except GridTrackError as exc:
        raise _fail(exc)
    _echo_json(stats)


@main.command("predict-fit")
@click.option("--track", "tracks", required=True, multiple=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Track CSV; repeat to pool several trials into one model.")
@click.option("--lags", default=4, show_default=True)
@click.option("--dt", default=0.25, show_default=True, help="Prediction step seconds.")
@click.option("--robot", default=None, type=click.Path(exists=True, dir_okay=False),
              help="Optional robot track CSV for exogenous terms.")
@click.option("--out", required=True, type=click.Path(dir_okay=False),
              help="Output model JSON.")
def predict_fit(tracks, lags, dt, robot, out):
    """Fit the autoregressive motion predictor from track logs."""
    try:
        _, stats = workflows.predict_fit(list(tracks), lags=lags, dt_s=dt,
                                         robot_csv=robot, out=out)
    except (GridTrackError, ValueError) as exc:
        raise _fail(exc)
    click.echo(f"wrote {out}")
    _echo_json(stats)


@main.command("predict-eval")
@click.option("--model", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--track", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", default=None, type=click.Path(dir_okay=False),
              help="Write per-step prediction CSV here.")
def predict_eval(model, track, out):
    """Replay a track through a fitted predictor and score it."""
    try:
        stats = workflows.predict_eval(model, track, out=out)
    except GridTrackError as exc:
        raise _fail(exc)
    _echo_json(stats)


@main.command()
@click.option("--config", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Station JSON config.")
@click.option("--http-host", default="127.0.0.1", show_default=True)
@click.option("--http-port", default=8000, show_default=True)
def serve(config, http_host, http_port):
    """Run the ground station: TCP frame ingest plus the HTTP service."""
    import uvicorn

    from .service import create_app

    try:
        station_config = load_station_config(config)
    except GridTrackError as exc:
        raise _fail(exc)
    app = create_app(station_config)
    uvicorn.run(app, host=http_host, port=http_port, log_level="info")


@main.command()
@click.option("--server", default="http://127.0.0.1:8000", show_default=True)
def status(server):
    """Query a running service for pipeline status."""
    _echo_json(_get_json(server, "/status"))


@main.command()
@click.option("--server", default="http://127.0.0.1:8000", show_default=True)
def positions(server):
    """Query a running service for the latest position per person."""
    _echo_json(_get_json(server, "/station/positions"))


def _get_json(server: str, path: str) -> dict:
    import httpx

    try:
        resp = httpx.get(server.rstrip("/") + path, timeout=10.0)
        resp.raise_for_status()
    except httpx.HTTPError as exc:
        raise _fail(exc)
    return resp.json()


@main.command("camera-node")
@click.option("--connect", required=True, help="Ground station HOST:PORT.")
@click.option("--cam-id", required=True)
@click.option("--source", required=True,
              type=click.Choice(["kp17-file", "synthetic"]))
@click.option("--file", "file_path", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="Frame-stream file for --source kp17-file.")
@click.option("--fps", default=10.0, show_default=True, help="Capture rate.")
@click.option("--duration", default=10.0, show_default=True,
              help="Synthetic capture duration, seconds.")
@click.option("--width", default=640, show_default=True)
@click.option("--height", default=480, show_default=True)
@click.option("--lockstep", is_flag=True,
              help="Send every frame (no latest-frame dropping).")
def camera_node(connect, cam_id, source, file_path, fps, duration,
                width, height, lockstep):
    """Stream kp17 frames to a ground station over REQ/REP."""
    host, _, port = connect.rpartition(":")
    if not host or not port.isdigit():
        raise click.BadParameter("expected HOST:PORT", param_hint="--connect")
    if source == "kp17-file":
        if file_path is None:
            raise click.BadParameter("--file is required for kp17-file",
                                     param_hint="--file")
        frames = [
            FrameMessage(
                header=FrameHeader(
                    camera_id=cam_id, seq=i, ts_us=m.header.ts_us,
                    width=m.header.width, height=m.header.height,
                    encoding=m.header.encoding,
                ),
                payload=m.payload,
            )
            for i, m in enumerate(iter_frames_from_file(file_path))
        ]
    else:
        frames = _synthetic_frames(cam_id, fps, duration, width, height)
    try:
        delivered = _stream_frames(host, int(port), frames, fps,
                                   lockstep=lockstep or source == "kp17-file")
    except OSError as exc:
        raise _fail(exc)
    click.echo(f"delivered {delivered}/{len(frames)} frames")


def _synthetic_frames(cam_id: str, fps: float, duration: float,
                      width: int, height: int) -> list[FrameMessage]:
    """A figure pacing a sine path across the lower image half."""
    frames = []
    n = int(duration * fps) + 1
    for i in range(n):
        t = i / fps
        u = width * (0.5 + 0.35 * math.sin(0.4 * t))
        v = height * (0.75 + 0.15 * math.sin(0.17 * t))
        keypoints = [Keypoint(u, max(0.0, v - 120 + 8 * k), 0.5) for k in range(15)]
        keypoints += [Keypoint(u, v, 0.95), Keypoint(u, v, 0.95)]
        det = PoseDetection(keypoints=tuple(keypoints), person_tag=0)
        header = FrameHeader(camera_id=cam_id, seq=i, ts_us=int(t * 1e6),
                             width=width, height=height, encoding="kp17")
        frames.append(FrameMessage(header=header, payload=encode_kp17([det])))
    return frames


def _stream_frames(host: str, port: int, frames: list[FrameMessage],
                   fps: float, lockstep: bool) -> int:
    with FrameSender(host, port) as sender:
        if lockstep:
            return send_frames_lockstep(sender, frames)
        mailbox: LatestFrameMailbox[FrameMessage] = LatestFrameMailbox()

        def capture():
            start = time.monotonic()
            for i, frame in enumerate(frames):
                delay = start + i / fps - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
                mailbox.put(frame)
            mailbox.close()

        thread = threading.Thread(target=capture, name="camera-capture")
        thread.start()
        delivered = pump_mailbox(sender, mailbox)
        thread.join()
        if mailbox.overwritten:
            log.info("dropped %d stale frames at source", mailbox.overwritten)
        return delivered


if __name__ == "__main__":
    main()
