"""Error types raised across the toolkit."""

from typing import Any, Dict, Optional


class ChiplessSensorError(Exception):
    """Base class for every error raised by this package."""


class DomainError(ChiplessSensorError, ValueError):
    """An input lies outside the domain of an operation."""


class SingularConversionError(DomainError):
    """A network conversion hit a singular point (open circuit, Z + z0*I singular)."""

    def __init__(self, message: str, index: Optional[int] = None, frequency: Optional[float] = None):
        super().__init__(message)
        self.index = index
        self.frequency = frequency


class AboveSelfResonanceError(DomainError):
    """Capacitance requested where the impedance is not capacitive (Im{Z} >= 0)."""


class NoCapacitiveRegionError(DomainError):
    """No point of the requested band has Im{Z} < 0."""


class TemperatureRangeError(DomainError):
    """Temperature outside a model's validity range with extrapolation disabled."""


class OutOfCalibrationRangeError(DomainError):
    """Measured frequency outside the calibrated range in strict inversion mode."""


class InsufficientDataError(DomainError):
    """Too few samples for the requested fit or curve."""


class FitFailureError(ChiplessSensorError):
    """A least-squares fit did not converge or produced invalid parameters."""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class TrackingFailureError(ChiplessSensorError):
    """The tracked resonance sequence is not strictly monotone in temperature."""

    def __init__(self, message: str, index: int):
        super().__init__(message)
        self.index = index


class TouchstoneFormatError(ChiplessSensorError, ValueError):
    """Malformed Touchstone input; `line` is 1-based."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.reason = message


class UnsupportedVersionError(TouchstoneFormatError):
    """Touchstone version 2 keyword content."""


class ConfigError(ChiplessSensorError, ValueError):
    """A system configuration document violates the schema."""

    def __init__(self, message: str, key_path: str = ""):
        super().__init__(f"{key_path}: {message}" if key_path else message)
        self.key_path = key_path


class CsvFormatError(ChiplessSensorError, ValueError):
    """Malformed CSV input; `line` is 1-based."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line
