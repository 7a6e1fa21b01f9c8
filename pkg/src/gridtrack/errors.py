"""Exception types shared across the gridtrack package."""


class GridTrackError(Exception):
    """Base class for all gridtrack errors."""


class CalibrationError(GridTrackError):
    """Calibration input is unusable (too few samples, duplicate rows, zero widths)."""


class OutOfCalibrationError(GridTrackError):
    """Pixel lies outside the row range the camera model was calibrated on."""


class UnsupportedModelError(GridTrackError):
    """Camera model cannot support the requested operation (e.g. non-monotone depth)."""


class MalformedPayloadError(GridTrackError):
    """kp17 payload bytes are inconsistent with the declared layout."""


class MalformedMessageError(GridTrackError):
    """Frame wire bytes fail the magic/version/length checks."""


class ProtocolViolationError(GridTrackError):
    """REQ/REP session contract broken (second send before REP)."""


class InsufficientDataError(GridTrackError):
    """Not enough samples for the requested fit, resample or prediction."""


class UndefinedStatError(GridTrackError):
    """Statistic undefined for the given input (e.g. FPS from fewer than 2 timestamps)."""


class EvaluationError(GridTrackError):
    """Accuracy evaluation cannot be computed (no matched points)."""


class ConfigError(GridTrackError):
    """Configuration is invalid or incomplete."""
