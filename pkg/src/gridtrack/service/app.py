"""FastAPI service wrapping the core package.

The app always exposes the batch workflows (calibrate, simulate, evaluate,
predict). When built with a StationConfig the TCP frame ingest runs for the
app's lifetime and the live endpoints (/station/...) report pipeline state.
"""

from __future__ import annotations

import logging
from contextlib import asynccontextmanager
from typing import Optional

from fastapi import FastAPI, HTTPException

from .. import __version__, workflows
from ..errors import GridTrackError
from ..geometry import CalibrationSample, CameraModel
from ..prediction import ARModel, fit_ar, resample_uniform, rollout
from ..simulator import (
    GroundTruthTrack,
    ScenarioConfig,
    Waypoint,
    evaluate_accuracy,
    run_simulation,
)
from ..station import GroundStation, StationConfig
from ..tracking import Track, TrackPoint
from . import schemas

log = logging.getLogger(__name__)


def create_app(station_config: Optional[StationConfig] = None) -> FastAPI:
    @asynccontextmanager
    async def lifespan(app: FastAPI):
        station = None
        if station_config is not None:
            station = GroundStation(station_config).start()
            app.state.station = station
            log.info("frame ingest on %s:%s", *station.address)
        else:
            app.state.station = None
        try:
            yield
        finally:
            if station is not None:
                station.stop()

    app = FastAPI(title="gridtrack", version=__version__, lifespan=lifespan)

    def station_or_404() -> GroundStation:
        station = app.state.station
        if station is None:
            raise HTTPException(status_code=404, detail="no frame ingest configured")
        return station

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "version": __version__}

    @app.get("/status", response_model=schemas.StatusResponse)
    def status() -> schemas.StatusResponse:
        station = app.state.station
        return schemas.StatusResponse(
            version=__version__,
            station=station.status() if station is not None else None,
        )

    @app.get("/station/positions", response_model=schemas.PositionsResponse)
    def station_positions() -> schemas.PositionsResponse:
        station = station_or_404()
        return schemas.PositionsResponse(positions=[
            _position_out(tag, point)
            for tag, point in sorted(station.latest_positions().items())
        ])

    @app.get("/station/track", response_model=schemas.TrackResponse)
    def station_track(camera_id: Optional[str] = None) -> schemas.TrackResponse:
        station = station_or_404()
        if camera_id is not None:
            track = station.tracker.camera_track(camera_id)
            iqr_applied = False
        else:
            track = station.merged_track()
            iqr_applied = station.config.iqr_enabled
        return schemas.TrackResponse(
            points=[_position_out(p.person_tag, p) for p in track],
            n_points=len(track),
            iqr_applied=iqr_applied,
            merge_mode=station.config.merge_mode,
        )

    @app.post("/calibrate", response_model=schemas.CalibrateResponse)
    def calibrate(req: schemas.CalibrateRequest) -> schemas.CalibrateResponse:
        samples = [CalibrationSample(**s.model_dump()) for s in req.samples]
        with _wrap_errors():
            model, diag = workflows.calibrate(
                samples,
                camera_id=req.camera.camera_id,
                image_w=req.camera.image_w,
                image_h=req.camera.image_h,
                depth_degree=req.depth_degree,
                lateral_degree=req.lateral_degree,
                principal_col=req.camera.principal_col,
                world_pos=req.camera.world_pos,
                yaw_deg=req.camera.yaw_deg,
            )
        return schemas.CalibrateResponse(
            model=schemas.CameraModelOut(**model.to_dict()),
            depth_residual_rms_m=diag["depth_residual_rms_m"],
            lateral_residual_rms_mpp=diag["lateral_residual_rms_mpp"],
            depth_monotone=diag["depth_monotone"],
            n_samples=diag["n_samples"],
        )

    @app.post("/simulate", response_model=schemas.SimulateResponse)
    def simulate(req: schemas.SimulateRequest) -> schemas.SimulateResponse:
        with _wrap_errors():
            scenario = ScenarioConfig(
                room_w=req.scenario.room_w,
                room_h=req.scenario.room_h,
                grid_pitch_m=req.scenario.grid_pitch_m,
                cameras=[CameraModel.from_dict(c.model_dump())
                         for c in req.scenario.cameras],
                trajectory=[Waypoint(**w.model_dump())
                            for w in req.scenario.trajectory],
                pixel_noise_px=req.scenario.pixel_noise_px,
                detector_latency_ms=req.scenario.detector_latency_ms,
                capture_fps=req.scenario.capture_fps,
                trial_duration_s=req.scenario.trial_duration_s,
                rng_seed=req.scenario.rng_seed,
            )
            report, _ = run_simulation(scenario, n_trials=req.trials,
                                       snap_truth=req.snap_truth)
        return schemas.SimulateResponse(**report)

    @app.post("/evaluate", response_model=schemas.EvaluateResponse)
    def evaluate(req: schemas.EvaluateRequest) -> schemas.EvaluateResponse:
        with _wrap_errors():
            estimated = Track(tuple(
                TrackPoint(ts_us=p.ts_us, pos=(p.x_m, p.y_m), camera_id="est")
                for p in sorted(req.estimated, key=lambda p: p.ts_us)
            ))
            truth = GroundTruthTrack(
                tuple(p.ts_us for p in req.truth),
                tuple((p.x_m, p.y_m) for p in req.truth),
            )
            stats = evaluate_accuracy(estimated, truth,
                                      match_window_us=req.match_window_us)
        return schemas.EvaluateResponse(**stats)

    @app.post("/predict/fit", response_model=schemas.PredictFitResponse)
    def predict_fit(req: schemas.PredictFitRequest) -> schemas.PredictFitResponse:
        with _wrap_errors():
            track = Track(tuple(
                TrackPoint(ts_us=p.ts_us, pos=(p.x_m, p.y_m), camera_id="in")
                for p in sorted(req.points, key=lambda p: p.ts_us)
            ))
            positions = resample_uniform(track, req.dt_s)
            robot = None
            if req.robot_points:
                robot_track = Track(tuple(
                    TrackPoint(ts_us=p.ts_us, pos=(p.x_m, p.y_m), camera_id="robot")
                    for p in sorted(req.robot_points, key=lambda p: p.ts_us)
                ))
                robot = resample_uniform(robot_track, req.dt_s)
                n = min(len(positions), len(robot))
                positions, robot = positions[:n], robot[:n]
            model = fit_ar(positions, robot, p=req.lags, dt_s=req.dt_s)
        return schemas.PredictFitResponse(
            model=schemas.ARModelOut(**model.to_dict()),
            n_samples=int(positions.shape[0]),
        )

    @app.post("/predict/next", response_model=schemas.PredictNextResponse)
    def predict_next_route(req: schemas.PredictNextRequest) -> schemas.PredictNextResponse:
        with _wrap_errors():
            model = ARModel.from_dict(req.model.model_dump())
            steps = rollout(model, req.window, req.robot_window, k=req.steps)
        return schemas.PredictNextResponse(
            predictions=[(float(x), float(y)) for x, y in steps],
            horizon_s=model.dt_s * req.steps,
        )

    return app


def _position_out(tag: int, point: TrackPoint) -> "schemas.LatestPosition":
    return schemas.LatestPosition(
        person_tag=tag,
        ts_us=point.ts_us,
        x_m=point.pos[0],
        y_m=point.pos[1],
        camera_id=point.camera_id,
        source=point.source,
    )


class _wrap_errors:
    """Convert domain errors to HTTP 422 instead of a 500."""

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and isinstance(exc, GridTrackError):
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return False
