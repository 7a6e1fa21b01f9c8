"""Short-horizon motion prediction.

A linear vector-autoregressive model predicts the tracked person's next
position one nominal step (0.25 s) ahead from the last p positions, with
optional terms for a second agent (the robot). Fitting is ordinary least
squares on uniformly resampled tracks; rank-deficient regressors fall back to
the minimum-norm solution.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, InsufficientDataError
from .tracking import Track

DEFAULT_STEP_S = 0.25
DEFAULT_LAGS = 4

PREDICTION_CSV_FIELDS = ["ts_us", "pred_x_m", "pred_y_m", "actual_x_m", "actual_y_m"]


@dataclass(frozen=True)
class ARModel:
    """Lag coefficients for one-step-ahead position prediction.

    evacuee_coeffs[i] multiplies the position i+1 steps back; robot_coeffs is
    all-zero when the model was fit without robot positions.
    """

    p: int
    dt_s: float
    intercept: tuple[float, float]
    evacuee_coeffs: tuple[tuple[tuple[float, float], tuple[float, float]], ...]
    robot_coeffs: tuple[tuple[tuple[float, float], tuple[float, float]], ...]
    fit_rmse_m: float

    def __post_init__(self):
        if self.p < 1:
            raise ValueError(f"lag order must be >= 1, got {self.p}")
        if len(self.evacuee_coeffs) != self.p or len(self.robot_coeffs) != self.p:
            raise ValueError("coefficient count inconsistent with lag order")

    @property
    def has_robot_terms(self) -> bool:
        return any(any(any(v != 0.0 for v in row) for row in block)
                   for block in self.robot_coeffs)

    def evacuee_matrices(self) -> np.ndarray:
        return np.asarray(self.evacuee_coeffs, dtype=float)

    def robot_matrices(self) -> np.ndarray:
        return np.asarray(self.robot_coeffs, dtype=float)

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "dt_s": self.dt_s,
            "c": list(self.intercept),
            "A": [[list(row) for row in block] for block in self.evacuee_coeffs],
            "B": [[list(row) for row in block] for block in self.robot_coeffs],
            "fit_rmse_m": self.fit_rmse_m,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ARModel":
        try:
            return cls(
                p=int(data["p"]),
                dt_s=float(data["dt_s"]),
                intercept=(float(data["c"][0]), float(data["c"][1])),
                evacuee_coeffs=_to_blocks(data["A"]),
                robot_coeffs=_to_blocks(data["B"]),
                fit_rmse_m=float(data["fit_rmse_m"]),
            )
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid prediction-model file: {exc}") from exc

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "ARModel":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"prediction-model file is not valid JSON: {exc}") from exc
        return cls.from_dict(data)


def _to_blocks(raw) -> tuple:
    return tuple(
        tuple(tuple(float(v) for v in row) for row in block) for block in raw
    )


def resample_uniform(track: Track, dt_s: float = DEFAULT_STEP_S) -> np.ndarray:
    """Linearly interpolate a track onto a uniform time grid.

    Returns an (n, 2) position array covering t_first .. t_last in steps of
    dt_s. The track must span at least two steps.
    """
    if dt_s <= 0:
        raise ValueError(f"dt_s must be > 0, got {dt_s}")
    if len(track) < 2:
        raise InsufficientDataError("resampling needs at least 2 points")
    ts = np.asarray([p.ts_us for p in track], dtype=float) / 1e6
    span = ts[-1] - ts[0]
    if span < 2 * dt_s:
        raise InsufficientDataError(
            f"track spans {span:.3f}s, need >= {2 * dt_s:.3f}s for dt {dt_s}s"
        )
    xs = np.asarray(track.xs())
    ys = np.asarray(track.ys())
    n = int(math.floor(span / dt_s + 1e-9)) + 1
    grid = ts[0] + dt_s * np.arange(n)
    return np.column_stack((np.interp(grid, ts, xs), np.interp(grid, ts, ys)))


def _build_regression(evacuee: np.ndarray, robot: Optional[np.ndarray],
                      p: int) -> tuple[np.ndarray, np.ndarray]:
    n = evacuee.shape[0]
    rows = n - p
    cols = 1 + 2 * p + (2 * p if robot is not None else 0)
    design = np.zeros((rows, cols))
    design[:, 0] = 1.0
    for lag in range(1, p + 1):
        start = p - lag
        design[:, 1 + 2 * (lag - 1):1 + 2 * lag] = evacuee[start:start + rows]
    if robot is not None:
        base = 1 + 2 * p
        for lag in range(1, p + 1):
            start = p - lag
            design[:, base + 2 * (lag - 1):base + 2 * lag] = robot[start:start + rows]
    targets = evacuee[p:]
    return design, targets


def fit_ar(evacuee: np.ndarray, robot: Optional[np.ndarray] = None,
           p: int = DEFAULT_LAGS, dt_s: float = DEFAULT_STEP_S) -> ARModel:
    """Fit the vector-AR model by ordinary least squares.

    evacuee (and robot, when given) are (n, 2) arrays on a uniform grid with
    step dt_s. Requires n >= 4p + 10 so the regression is well posed.
    """
    if p < 1:
        raise ValueError(f"lag order must be >= 1, got {p}")
    evacuee = np.asarray(evacuee, dtype=float)
    if evacuee.ndim != 2 or evacuee.shape[1] != 2:
        raise ValueError(f"evacuee positions must be (n, 2), got {evacuee.shape}")
    if robot is not None:
        robot = np.asarray(robot, dtype=float)
        if robot.shape != evacuee.shape:
            raise ValueError(
                f"robot positions {robot.shape} must match evacuee {evacuee.shape}"
            )
    n = evacuee.shape[0]
    needed = 4 * p + 10
    if n < needed:
        raise InsufficientDataError(f"need >= {needed} samples for p={p}, got {n}")
    design, targets = _build_regression(evacuee, robot, p)
    weights, *_ = np.linalg.lstsq(design, targets, rcond=None)
    residual = design @ weights - targets
    rmse = float(np.sqrt(np.mean(np.sum(residual**2, axis=1))))
    return _model_from_weights(weights, p, dt_s, robot is not None, rmse)


def _model_from_weights(weights: np.ndarray, p: int, dt_s: float,
                        has_robot: bool, rmse: float) -> ARModel:
    """Unpack the stacked OLS solution into per-lag coefficient matrices."""
    intercept = (float(weights[0, 0]), float(weights[0, 1]))
    a_blocks = []
    for lag in range(p):
        block = weights[1 + 2 * lag:3 + 2 * lag, :].T  # (2, 2), rows map outputs
        a_blocks.append(tuple(tuple(float(v) for v in row) for row in block))
    if has_robot:
        base = 1 + 2 * p
        b_blocks = []
        for lag in range(p):
            block = weights[base + 2 * lag:base + 2 * lag + 2, :].T
            b_blocks.append(tuple(tuple(float(v) for v in row) for row in block))
    else:
        zero = ((0.0, 0.0), (0.0, 0.0))
        b_blocks = [zero] * p
    return ARModel(
        p=p, dt_s=dt_s, intercept=intercept,
        evacuee_coeffs=tuple(a_blocks), robot_coeffs=tuple(b_blocks),
        fit_rmse_m=rmse,
    )


def fit_ar_pooled(trials: Sequence[tuple[np.ndarray, Optional[np.ndarray]]],
                  p: int = DEFAULT_LAGS, dt_s: float = DEFAULT_STEP_S) -> ARModel:
    """Fit one model from several trials' uniform tracks.

    Regression rows are built per trial and stacked, so lag windows never
    span a trial boundary. Robot positions must be given for all trials or
    none. The combined row count must satisfy the same floor as fit_ar.
    """
    if p < 1:
        raise ValueError(f"lag order must be >= 1, got {p}")
    if not trials:
        raise InsufficientDataError("pooled fit needs at least one trial")
    robot_presence = {robot is not None for _, robot in trials}
    if len(robot_presence) != 1:
        raise ValueError("robot positions must be present in all trials or none")
    has_robot = robot_presence.pop()
    designs, targets = [], []
    total = 0
    for evacuee, robot in trials:
        evacuee = np.asarray(evacuee, dtype=float)
        if evacuee.ndim != 2 or evacuee.shape[1] != 2:
            raise ValueError(f"evacuee positions must be (n, 2), got {evacuee.shape}")
        if evacuee.shape[0] <= p:
            continue  # too short to contribute a single regression row
        robot_arr = None
        if has_robot:
            robot_arr = np.asarray(robot, dtype=float)
            if robot_arr.shape != evacuee.shape:
                raise ValueError("robot positions must match evacuee shape per trial")
        design, target = _build_regression(evacuee, robot_arr, p)
        designs.append(design)
        targets.append(target)
        total += evacuee.shape[0]
    needed = 4 * p + 10
    if total < needed:
        raise InsufficientDataError(
            f"pooled trials hold {total} usable samples, need >= {needed} for p={p}"
        )
    design = np.vstack(designs)
    target = np.vstack(targets)
    weights, *_ = np.linalg.lstsq(design, target, rcond=None)
    residual = design @ weights - target
    rmse = float(np.sqrt(np.mean(np.sum(residual**2, axis=1))))
    return _model_from_weights(weights, p, dt_s, has_robot, rmse)


def _window_tail(window: Sequence[Sequence[float]], p: int, what: str) -> np.ndarray:
    arr = np.asarray(window, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"{what} window must be (n, 2)")
    if arr.shape[0] < p:
        raise InsufficientDataError(
            f"{what} window holds {arr.shape[0]} samples, need >= {p}"
        )
    return arr[-p:]


def predict_next(model: ARModel, evacuee_window: Sequence[Sequence[float]],
                 robot_window: Optional[Sequence[Sequence[float]]] = None
                 ) -> tuple[float, float]:
    """One-step-ahead position from the trailing windows (most recent last)."""
    recent = _window_tail(evacuee_window, model.p, "evacuee")
    pred = np.asarray(model.intercept, dtype=float).copy()
    a = model.evacuee_matrices()
    for lag in range(1, model.p + 1):
        pred += a[lag - 1] @ recent[-lag]
    if model.has_robot_terms:
        if robot_window is None:
            raise InsufficientDataError("model has robot terms but no robot window given")
        recent_r = _window_tail(robot_window, model.p, "robot")
        b = model.robot_matrices()
        for lag in range(1, model.p + 1):
            pred += b[lag - 1] @ recent_r[-lag]
    return (float(pred[0]), float(pred[1]))


def rollout(model: ARModel, evacuee_window: Sequence[Sequence[float]],
            robot_window: Optional[Sequence[Sequence[float]]] = None,
            k: int = 1) -> np.ndarray:
    """Feed predictions back autoregressively for k steps.

    The robot, whose future is not modeled, is held at its last position.
    Returns a (k, 2) array; rollout(..., k=1) equals predict_next exactly.
    """
    if k < 1:
        raise ValueError(f"rollout steps must be >= 1, got {k}")
    window = [tuple(map(float, q)) for q in np.asarray(evacuee_window, dtype=float)]
    robot = None
    if robot_window is not None:
        robot = [tuple(map(float, q)) for q in np.asarray(robot_window, dtype=float)]
    steps = []
    for _ in range(k):
        nxt = predict_next(model, window, robot)
        steps.append(nxt)
        window.append(nxt)
        if robot is not None:
            robot.append(robot[-1])
    return np.asarray(steps)


def one_step_predictions(model: ARModel, positions: np.ndarray,
                         ts_us: Optional[Sequence[int]] = None
                         ) -> list[tuple[int, tuple[float, float], tuple[float, float]]]:
    """Walk a uniform trajectory producing (ts_us, predicted, actual) triples.

    Prediction at index i uses only positions up to i-1. Timestamps default to
    the grid index in dt_s steps.
    """
    positions = np.asarray(positions, dtype=float)
    n = positions.shape[0]
    if n <= model.p:
        raise InsufficientDataError(f"need more than {model.p} samples, got {n}")
    if ts_us is None:
        ts_us = [int(round(i * model.dt_s * 1e6)) for i in range(n)]
    out = []
    for i in range(model.p, n):
        pred = predict_next(model, positions[:i])
        out.append((int(ts_us[i]), pred, (float(positions[i, 0]), float(positions[i, 1]))))
    return out


def write_prediction_csv(path: str | Path,
                         rows: Sequence[tuple[int, tuple[float, float], tuple[float, float]]]
                         ) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PREDICTION_CSV_FIELDS)
        for ts, pred, actual in rows:
            writer.writerow([ts, repr(pred[0]), repr(pred[1]),
                             repr(actual[0]), repr(actual[1])])
