"""Batch workflows shared by the CLI and the HTTP service.

Each function takes plain values/paths and returns JSON-serializable dicts so
both frontends stay thin.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import InsufficientDataError
from .geometry import (
    CalibrationSample,
    CameraModel,
    default_principal_col,
    fit_depth_model,
    fit_lateral_model,
    load_calibration_csv,
)
from .prediction import (
    ARModel,
    fit_ar,
    fit_ar_pooled,
    one_step_predictions,
    resample_uniform,
    write_prediction_csv,
)
from .simulator import (
    ScenarioConfig,
    evaluate_accuracy,
    load_ground_truth_csv,
    run_simulation,
    write_xy_tracks,
)
from .tracking import load_track_csv

log = logging.getLogger(__name__)


def calibrate(samples: Sequence[CalibrationSample] | str | Path,
              camera_id: str,
              image_w: int = 640, image_h: int = 480,
              depth_degree: int = 3, lateral_degree: int = 3,
              principal_col: Optional[float] = None,
              world_pos: tuple[float, float] = (0.0, 0.0),
              yaw_deg: float = 0.0,
              out: Optional[str | Path] = None) -> tuple[CameraModel, dict]:
    """Fit a camera model from calibration samples and optionally save it."""
    if isinstance(samples, (str, Path)):
        samples = load_calibration_csv(samples)
    depth_coeffs, depth_rms = fit_depth_model(samples, depth_degree)
    lateral_coeffs, lateral_rms = fit_lateral_model(samples, lateral_degree)
    rows = [s.row_px for s in samples]
    model = CameraModel(
        camera_id=camera_id,
        image_w=image_w, image_h=image_h,
        principal_col=(default_principal_col(image_w)
                       if principal_col is None else principal_col),
        depth_coeffs=depth_coeffs,
        lateral_coeffs=lateral_coeffs,
        world_pos=world_pos,
        yaw_deg=yaw_deg,
        valid_row_range=(min(rows), max(rows)),
    )
    if not model.depth_monotone:
        log.warning("fitted depth model for %s is not monotone over rows %s..%s",
                    camera_id, min(rows), max(rows))
    if out is not None:
        model.save(out)
    diagnostics = {
        "depth_residual_rms_m": depth_rms,
        "lateral_residual_rms_mpp": lateral_rms,
        "depth_monotone": model.depth_monotone,
        "n_samples": len(samples),
        "valid_row_range": list(model.valid_row_range),
    }
    return model, diagnostics


def simulate(scenario: ScenarioConfig | str | Path, trials: int = 1,
             out: Optional[str | Path] = None,
             xy_out: Optional[str | Path] = None,
             tracks_dir: Optional[str | Path] = None,
             snap_truth: bool = False) -> dict:
    """Run simulated trials; write the report and optional track artifacts."""
    if isinstance(scenario, (str, Path)):
        scenario = ScenarioConfig.load(scenario)
    report, results = run_simulation(scenario, n_trials=trials, snap_truth=snap_truth)
    if out is not None:
        Path(out).write_text(json.dumps(report, indent=2) + "\n")
    if xy_out is not None and results:
        write_xy_tracks(xy_out, results[0].estimated, results[0].truth)
    if tracks_dir is not None:
        tracks_dir = Path(tracks_dir)
        tracks_dir.mkdir(parents=True, exist_ok=True)
        from .simulator import save_ground_truth_csv
        from .tracking import TrackLogWriter

        for i, result in enumerate(results):
            writer = TrackLogWriter(tracks_dir / f"trial{i}_track.csv", f"trial{i}")
            for point in result.estimated:
                writer.append(point)
            writer.finalize()
            save_ground_truth_csv(tracks_dir / f"trial{i}_truth.csv", result.truth)
    return report


def evaluate(est_csv: str | Path, truth_csv: str | Path,
             match_window_us: int | None = None) -> dict:
    """Compare an estimated track log against a ground-truth CSV."""
    estimated = load_track_csv(est_csv)
    truth = load_ground_truth_csv(truth_csv)
    kwargs = {} if match_window_us is None else {"match_window_us": match_window_us}
    return evaluate_accuracy(estimated, truth, **kwargs)


def predict_fit(track_csv: str | Path | Sequence[str | Path],
                lags: int = 4, dt_s: float = 0.25,
                robot_csv: Optional[str | Path] = None,
                out: Optional[str | Path] = None) -> tuple[ARModel, dict]:
    """Fit the motion predictor from one track log, or pool several trials."""
    paths = ([track_csv] if isinstance(track_csv, (str, Path)) else list(track_csv))
    if len(paths) > 1:
        if robot_csv is not None:
            raise ValueError("robot tracks are supported for single-trial fits only")
        trials = [(resample_uniform(load_track_csv(p), dt_s), None) for p in paths]
        model = fit_ar_pooled(trials, p=lags, dt_s=dt_s)
        n_samples = sum(int(t[0].shape[0]) for t in trials)
    else:
        track = load_track_csv(paths[0])
        positions = resample_uniform(track, dt_s)
        robot = None
        if robot_csv is not None:
            robot_track = load_track_csv(robot_csv)
            robot = resample_uniform(robot_track, dt_s)
            n = min(len(positions), len(robot))
            positions, robot = positions[:n], robot[:n]
        model = fit_ar(positions, robot, p=lags, dt_s=dt_s)
        n_samples = int(positions.shape[0])
    if out is not None:
        model.save(out)
    stats = {
        "p": model.p,
        "dt_s": model.dt_s,
        "fit_rmse_m": model.fit_rmse_m,
        "n_samples": n_samples,
        "n_trials": len(paths),
        "robot_terms": model.has_robot_terms,
    }
    return model, stats


def predict_eval(model_path: str | Path, track_csv: str | Path,
                 out: Optional[str | Path] = None) -> dict:
    """One-step-ahead predictions along a track, compared with what happened."""
    model = ARModel.load(model_path)
    track = load_track_csv(track_csv)
    positions = resample_uniform(track, model.dt_s)
    if positions.shape[0] <= model.p:
        raise InsufficientDataError(
            f"track resamples to {positions.shape[0]} points, need > {model.p}"
        )
    t0 = track.points[0].ts_us
    ts = [int(t0 + round(i * model.dt_s * 1e6)) for i in range(positions.shape[0])]
    rows = one_step_predictions(model, positions, ts)
    errors = np.asarray([
        np.hypot(pred[0] - actual[0], pred[1] - actual[1])
        for _, pred, actual in rows
    ])
    if out is not None:
        write_prediction_csv(out, rows)
    return {
        "n_predictions": len(rows),
        "rmse_m": float(np.sqrt(np.mean(errors**2))),
        "mean_m": float(errors.mean()),
        "max_m": float(errors.max()),
        "horizon_s": model.dt_s,
    }
