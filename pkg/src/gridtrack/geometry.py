"""Ground-plane camera geometry.

A camera is modeled by two 1-D polynomials in the image row v: a depth
polynomial giving the ground distance D(v) in meters along the camera's
forward axis, and a lateral scale polynomial s(v) giving meters-per-pixel
across the image at that row. Combined with the camera's world position and
yaw this converts any in-range pixel to a point on the floor, and back.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import CalibrationError, ConfigError, OutOfCalibrationError, UnsupportedModelError

INCHES_TO_METERS = 0.0254

# Rows sampled when checking depth-polynomial monotonicity at model build time.
MONOTONICITY_SAMPLES = 256

# Bisection tolerance (in rows) when inverting the depth polynomial.
ROW_SOLVE_TOL = 1e-9

CAMERA_MODEL_VERSION = 1


def poly_eval(coeffs: Sequence[float], x: float) -> float:
    """Evaluate a polynomial with ascending-degree coefficients at x."""
    acc = 0.0
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


@dataclass(frozen=True)
class CalibrationSample:
    """One calibration measurement taken at a known ground distance.

    Widths describe a calibration object seen at this row; they are optional
    and only used by the lateral-scale fit. Widths are stored in meters.
    """

    row_px: float
    depth_m: float
    object_width_px: Optional[float] = None
    object_width_m: Optional[float] = None

    def __post_init__(self):
        if self.row_px < 0:
            raise ValueError(f"row_px must be >= 0, got {self.row_px}")
        if self.depth_m <= 0:
            raise ValueError(f"depth_m must be > 0, got {self.depth_m}")
        for name in ("object_width_px", "object_width_m"):
            value = getattr(self, name)
            if value is not None and value <= 0:
                raise ValueError(f"{name} must be > 0 when present, got {value}")

    @classmethod
    def with_width_inches(cls, row_px: float, depth_m: float,
                          object_width_px: float, object_width_in: float) -> "CalibrationSample":
        """Build a sample from a width measured in inches, converting at ingest."""
        return cls(row_px, depth_m, object_width_px, object_width_in * INCHES_TO_METERS)


@dataclass(frozen=True)
class CameraModel:
    """Per-camera pixel-to-world ground-plane model.

    yaw_deg is measured counterclockwise from world +Y to the camera's forward
    axis; at yaw 0 image-right points along world +X. Rows outside
    valid_row_range are rejected rather than extrapolated.
    """

    camera_id: str
    image_w: int
    image_h: int
    principal_col: float
    depth_coeffs: tuple[float, ...]
    lateral_coeffs: tuple[float, ...]
    world_pos: tuple[float, float]
    yaw_deg: float
    valid_row_range: tuple[float, float]

    def __post_init__(self):
        if self.image_w <= 0 or self.image_h <= 0:
            raise ValueError("image dimensions must be positive")
        v_min, v_max = self.valid_row_range
        if not (0 <= v_min < v_max < self.image_h):
            raise ValueError(
                f"valid_row_range {self.valid_row_range} must satisfy "
                f"0 <= v_min < v_max < image_h ({self.image_h})"
            )
        object.__setattr__(self, "depth_coeffs", tuple(float(c) for c in self.depth_coeffs))
        object.__setattr__(self, "lateral_coeffs", tuple(float(c) for c in self.lateral_coeffs))
        object.__setattr__(self, "world_pos", (float(self.world_pos[0]), float(self.world_pos[1])))
        object.__setattr__(self, "valid_row_range", (float(v_min), float(v_max)))

    def depth_at(self, v: float) -> float:
        return poly_eval(self.depth_coeffs, v)

    def scale_at(self, v: float) -> float:
        return poly_eval(self.lateral_coeffs, v)

    @cached_property
    def _row_grid_depths(self) -> np.ndarray:
        v_min, v_max = self.valid_row_range
        rows = np.linspace(v_min, v_max, MONOTONICITY_SAMPLES)
        return np.asarray([self.depth_at(v) for v in rows])

    @cached_property
    def depth_monotone(self) -> bool:
        """Whether the depth polynomial is strictly monotone over the valid rows."""
        d = np.diff(self._row_grid_depths)
        return bool(np.all(d > 0) or np.all(d < 0))

    @cached_property
    def scale_positive(self) -> bool:
        v_min, v_max = self.valid_row_range
        rows = np.linspace(v_min, v_max, MONOTONICITY_SAMPLES)
        return bool(all(self.scale_at(v) > 0 for v in rows))

    @cached_property
    def depth_range(self) -> tuple[float, float]:
        """(min, max) ground distance spanned by the valid rows."""
        d = self._row_grid_depths
        return float(d.min()), float(d.max())

    def to_dict(self) -> dict:
        return {
            "version": CAMERA_MODEL_VERSION,
            "camera_id": self.camera_id,
            "image_w": self.image_w,
            "image_h": self.image_h,
            "principal_col": self.principal_col,
            "depth_coeffs": list(self.depth_coeffs),
            "lateral_coeffs": list(self.lateral_coeffs),
            "world_pos": list(self.world_pos),
            "yaw_deg": self.yaw_deg,
            "valid_row_range": list(self.valid_row_range),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CameraModel":
        version = data.get("version")
        if version != CAMERA_MODEL_VERSION:
            raise ConfigError(f"unsupported camera-model version: {version!r}")
        try:
            return cls(
                camera_id=data["camera_id"],
                image_w=int(data["image_w"]),
                image_h=int(data["image_h"]),
                principal_col=float(data["principal_col"]),
                depth_coeffs=tuple(data["depth_coeffs"]),
                lateral_coeffs=tuple(data["lateral_coeffs"]),
                world_pos=(data["world_pos"][0], data["world_pos"][1]),
                yaw_deg=float(data["yaw_deg"]),
                valid_row_range=(data["valid_row_range"][0], data["valid_row_range"][1]),
            )
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid camera-model file: {exc}") from exc

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "CameraModel":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"camera-model file is not valid JSON: {exc}") from exc
        return cls.from_dict(data)


def default_principal_col(image_w: int) -> float:
    return (image_w - 1) / 2


def _fit_polynomial(rows: np.ndarray, values: np.ndarray, degree: int) -> tuple[tuple[float, ...], float]:
    """Least-squares polynomial fit via the normal equations.

    Returns ascending-degree coefficients and the residual RMS. Degrees are
    small (<= ~5) and sample counts modest, where the normal equations are
    perfectly adequate.
    """
    vander = np.vander(rows, degree + 1, increasing=True)
    gram = vander.T @ vander
    moments = vander.T @ values
    try:
        coeffs = np.linalg.solve(gram, moments)
    except np.linalg.LinAlgError as exc:
        raise CalibrationError(f"normal equations are singular: {exc}") from exc
    residuals = vander @ coeffs - values
    rms = float(math.sqrt(float(np.mean(residuals**2))))
    return tuple(float(c) for c in coeffs), rms


def _check_fit_inputs(rows: Sequence[float], degree: int, what: str) -> None:
    if degree < 0:
        raise CalibrationError(f"{what}: degree must be >= 0, got {degree}")
    if len(rows) < degree + 1:
        raise CalibrationError(
            f"{what}: need at least {degree + 1} samples for degree {degree}, got {len(rows)}"
        )
    if len(set(rows)) != len(rows):
        raise CalibrationError(f"{what}: duplicate row_px values in samples")


def fit_depth_model(samples: Sequence[CalibrationSample], degree: int) -> tuple[tuple[float, ...], float]:
    """Fit the row -> ground-distance polynomial.

    Returns (coefficients ascending by degree, residual RMS in meters).
    Monotonicity is not enforced here; it is checked when the CameraModel is
    built and carried on the model as a flag.
    """
    rows = [s.row_px for s in samples]
    _check_fit_inputs(rows, degree, "depth fit")
    return _fit_polynomial(np.asarray(rows, dtype=float),
                           np.asarray([s.depth_m for s in samples], dtype=float), degree)


def fit_lateral_model(samples: Sequence[CalibrationSample], degree: int) -> tuple[tuple[float, ...], float]:
    """Fit the row -> meters-per-pixel polynomial s(v) = width_m / width_px(v)."""
    usable = [s for s in samples if s.object_width_px is not None and s.object_width_m is not None]
    for s in usable:
        if s.object_width_px == 0:
            raise CalibrationError("lateral fit: sample with zero pixel width")
    rows = [s.row_px for s in usable]
    _check_fit_inputs(rows, degree, "lateral fit")
    scales = np.asarray([s.object_width_m / s.object_width_px for s in usable], dtype=float)
    return _fit_polynomial(np.asarray(rows, dtype=float), scales, degree)


def rotation_matrix(yaw_deg: float) -> np.ndarray:
    """Standard 2-D counterclockwise rotation by yaw_deg degrees."""
    a = math.radians(yaw_deg)
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s], [s, c]])


def pixel_to_world(model: CameraModel, u: float, v: float) -> tuple[float, float]:
    """Convert an image pixel to its world-space ground-plane point.

    Raises OutOfCalibrationError for pixels outside the calibrated row range
    or the image width; callers typically drop such detections.
    """
    v_min, v_max = model.valid_row_range
    if not (v_min <= v <= v_max):
        raise OutOfCalibrationError(
            f"row {v} outside calibrated range [{v_min}, {v_max}] for {model.camera_id}"
        )
    if not (0 <= u < model.image_w):
        raise OutOfCalibrationError(
            f"column {u} outside image width {model.image_w} for {model.camera_id}"
        )
    depth = model.depth_at(v)
    x_cam = (u - model.principal_col) * model.scale_at(v)
    rot = rotation_matrix(model.yaw_deg)
    wx = model.world_pos[0] + rot[0, 0] * x_cam + rot[0, 1] * depth
    wy = model.world_pos[1] + rot[1, 0] * x_cam + rot[1, 1] * depth
    return (float(wx), float(wy))


def _solve_row_for_depth(model: CameraModel, depth: float) -> float:
    """Invert the depth polynomial by bisection over the valid row range."""
    v_lo, v_hi = model.valid_row_range
    f_lo = model.depth_at(v_lo) - depth
    f_hi = model.depth_at(v_hi) - depth
    if f_lo == 0.0:
        return v_lo
    if f_hi == 0.0:
        return v_hi
    while v_hi - v_lo > ROW_SOLVE_TOL:
        v_mid = 0.5 * (v_lo + v_hi)
        f_mid = model.depth_at(v_mid) - depth
        if f_mid == 0.0:
            return v_mid
        if (f_mid > 0) == (f_lo > 0):
            v_lo, f_lo = v_mid, f_mid
        else:
            v_hi, f_hi = v_mid, f_mid
    return 0.5 * (v_lo + v_hi)


def world_to_pixel(model: CameraModel, point: tuple[float, float]) -> Optional[tuple[float, float]]:
    """Project a world ground-plane point back to a pixel.

    Returns None when the point is not visible: behind the camera, at a depth
    the calibrated rows do not cover, or outside the image width.
    """
    if not model.depth_monotone:
        raise UnsupportedModelError(
            f"depth polynomial for {model.camera_id} is not monotone; cannot invert"
        )
    rot = rotation_matrix(-model.yaw_deg)
    dx = point[0] - model.world_pos[0]
    dy = point[1] - model.world_pos[1]
    x_cam = float(rot[0, 0] * dx + rot[0, 1] * dy)
    depth = float(rot[1, 0] * dx + rot[1, 1] * dy)
    d_min, d_max = model.depth_range
    if not (d_min <= depth <= d_max):
        return None
    v = _solve_row_for_depth(model, depth)
    scale = model.scale_at(v)
    u = model.principal_col + x_cam / scale
    if not (0 <= u < model.image_w):
        return None
    return (u, v)


CALIBRATION_CSV_FIELDS = ["row_px", "depth_m", "object_width_px", "object_width_m"]


def load_calibration_csv(path: str | Path) -> list[CalibrationSample]:
    """Read calibration samples from CSV (width columns optional per row)."""
    samples = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"row_px", "depth_m"} - set(reader.fieldnames or [])
        if missing:
            raise CalibrationError(f"calibration CSV missing columns: {sorted(missing)}")
        for line_no, row in enumerate(reader, start=2):
            try:
                width_px = row.get("object_width_px") or None
                width_m = row.get("object_width_m") or None
                samples.append(CalibrationSample(
                    row_px=float(row["row_px"]),
                    depth_m=float(row["depth_m"]),
                    object_width_px=float(width_px) if width_px is not None else None,
                    object_width_m=float(width_m) if width_m is not None else None,
                ))
            except (TypeError, ValueError) as exc:
                raise CalibrationError(f"bad calibration sample on line {line_no}: {exc}") from exc
    return samples


def save_calibration_csv(path: str | Path, samples: Sequence[CalibrationSample]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CALIBRATION_CSV_FIELDS)
        for s in samples:
            writer.writerow([
                s.row_px, s.depth_m,
                "" if s.object_width_px is None else s.object_width_px,
                "" if s.object_width_m is None else s.object_width_m,
            ])
