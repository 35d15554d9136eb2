"""From reflection traces to temperature readings.

Dips are found on the reflection magnitude in dB, tracked across temperatures
into a calibration curve f_r(T), and the curve is inverted with a
shape-preserving cubic interpolant.
"""

import logging
import math
from dataclasses import dataclass
from importlib import resources
from typing import List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.interpolate import PchipInterpolator
from scipy.signal import find_peaks

from chipless_sensor.exceptions import (
    DomainError,
    InsufficientDataError,
    OutOfCalibrationRangeError,
    TrackingFailureError,
)
from chipless_sensor.rfnet import DB_FLOOR, FrequencyGrid, OnePortSweep, TwoPortSweep, reflection_db
from chipless_sensor.schemas import ComparisonRow
from chipless_sensor.utils import PathLike, read_table, write_table

logger = logging.getLogger(__name__)

TrackingPolicy = Literal["nearest", "highest_frequency"]
InvertMode = Literal["clamp", "strict"]

DEFAULT_PROMINENCE_DB = 1.0
MISMATCH_TOLERANCE = 0.05
MIN_CURVE_SAMPLES = 3
CURVE_COLUMNS = ("temperature_c", "f_r_hz")


@dataclass(frozen=True)
class ResonancePeak:
    """A reflection dip; `index` is the discrete minimum on the grid."""

    frequency: float
    depth_db: float
    prominence_db: float
    index: int


def trace_db(sweep: Union[OnePortSweep, TwoPortSweep], port: str = "s11", floor: float = DB_FLOOR) -> np.ndarray:
    """Reflection (or transmission) magnitude in dB for one trace of a sweep."""
    if isinstance(sweep, OnePortSweep):
        if port.lower() != "s11":
            raise DomainError(f"a one-port sweep has no {port}")
        return reflection_db(sweep.s11, floor)
    return reflection_db(sweep.parameter(port), floor)


def _refine(f: np.ndarray, y: np.ndarray, i: int) -> Tuple[float, float]:
    """Vertex of the parabola through points i-1, i, i+1, kept inside that span."""
    x = f[i - 1 : i + 2] - f[i]
    a, b, c = np.polyfit(x, y[i - 1 : i + 2], 2)
    if a <= 0:
        return float(f[i]), float(y[i])
    xv = float(np.clip(-b / (2.0 * a), x[0], x[2]))
    return float(f[i] + xv), float(np.polyval((a, b, c), xv))


def find_dips(
    grid: Union[FrequencyGrid, Sequence[float], np.ndarray],
    trace: Sequence[float],
    prominence_db: float = DEFAULT_PROMINENCE_DB,
) -> List[ResonancePeak]:
    """Local minima of a dB trace with at least `prominence_db` of prominence.

    Each dip is refined by 3-point parabolic interpolation in (f, dB). End
    points are never reported. Non-finite samples are dropped first; a dip
    next to a dropped sample keeps its grid value unrefined, and `index`
    always refers to the original grid.

    Args:
        grid: Frequencies of the trace.
        trace: Magnitude in dB per frequency.
        prominence_db: Minimum prominence, > 0.

    Returns:
        Dips sorted by frequency; possibly empty.
    """
    f = np.asarray(grid.points if isinstance(grid, FrequencyGrid) else grid, dtype=float)
    y = np.asarray(trace, dtype=float)
    if f.shape != y.shape:
        raise DomainError(f"trace has {y.size} values for {f.size} frequencies")
    if not prominence_db > 0:
        raise DomainError(f"prominence must be > 0, got {prominence_db}")
    keep = np.isfinite(y)
    original = np.flatnonzero(keep)
    if not np.all(keep):
        logger.warning(f"dropping {int(np.count_nonzero(~keep))} non-finite trace point(s)")
        f, y = f[keep], y[keep]
    if f.size < 5:
        raise DomainError(f"dip search needs at least 5 points, got {f.size}")

    idx, props = find_peaks(-y, prominence=prominence_db)
    peaks = []
    for i, prom in zip(idx, props["prominences"]):
        i = int(i)
        j = int(original[i])
        if original[i - 1] == j - 1 and original[i + 1] == j + 1:
            freq, depth = _refine(f, y, i)
        else:
            freq, depth = float(f[i]), float(y[i])
        peaks.append(ResonancePeak(frequency=freq, depth_db=depth, prominence_db=float(prom), index=j))
    logger.debug(f"{len(peaks)} dip(s) above {prominence_db:g} dB")
    return peaks


@dataclass(frozen=True)
class CalibrationCurve:
    """Resonance frequency against temperature, strictly monotone."""

    temperatures: np.ndarray
    frequencies: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.temperatures, dtype=float)
        f = np.asarray(self.frequencies, dtype=float)
        if t.ndim != 1 or t.shape != f.shape:
            raise DomainError("temperatures and frequencies must be 1-D arrays of equal length")
        if t.size < MIN_CURVE_SAMPLES:
            raise InsufficientDataError(
                f"a calibration curve needs at least {MIN_CURVE_SAMPLES} samples, got {t.size}"
            )
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(f))) or np.any(f <= 0):
            raise DomainError("calibration samples must be finite with f_r > 0")
        if np.any(np.diff(t) <= 0):
            raise DomainError("calibration temperatures must be strictly increasing")
        bad = _first_non_monotone(f)
        if bad is not None:
            raise DomainError(f"f_r is not strictly monotone at sample {bad}")
        t.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "temperatures", t)
        object.__setattr__(self, "frequencies", f)

    @classmethod
    def from_samples(cls, samples: Sequence[Tuple[float, float]]) -> "CalibrationCurve":
        return cls(
            temperatures=np.array([s[0] for s in samples], dtype=float),
            frequencies=np.array([s[1] for s in samples], dtype=float),
        )

    @property
    def direction(self) -> Literal["increasing", "decreasing"]:
        return "increasing" if self.frequencies[-1] > self.frequencies[0] else "decreasing"

    def frequency_at(self, t: float) -> float:
        """Monotone cubic interpolation of f_r at temperature `t` inside the curve."""
        if not self.temperatures[0] <= t <= self.temperatures[-1]:
            raise DomainError(f"{t:g} degC is outside the calibrated range")
        return float(PchipInterpolator(self.temperatures, self.frequencies)(t))


def _first_non_monotone(f: np.ndarray) -> Optional[int]:
    """Index of the first sample that breaks strict monotonicity, or None."""
    d = np.diff(f)
    if d.size == 0:
        return None
    sign = np.sign(d[0])
    if sign == 0:
        return 1
    bad = np.flatnonzero(np.sign(d) != sign)
    return int(bad[0]) + 1 if bad.size else None


def select_peaks(
    peaks_by_temperature: Sequence[Tuple[float, Sequence[ResonancePeak]]],
    policy: TrackingPolicy = "highest_frequency",
    reference_frequency: Optional[float] = None,
) -> List[ResonancePeak]:
    """Pick one dip per temperature according to `policy`, without checking monotonicity.

    `highest_frequency` takes the top dip. `nearest` starts from the first
    temperature's dip closest to `reference_frequency`, then follows the dip
    closest to the previous pick (equidistant dips resolve to the lower frequency).
    """
    temps = [float(t) for t, _ in peaks_by_temperature]
    if any(b <= a for a, b in zip(temps, temps[1:])):
        raise DomainError("temperatures must be strictly increasing")
    for i, (t, peaks) in enumerate(peaks_by_temperature):
        if not peaks:
            raise TrackingFailureError(f"no dip at {t:g} degC", index=i)

    if policy == "highest_frequency":
        return [max(peaks, key=lambda p: p.frequency) for _, peaks in peaks_by_temperature]
    if policy != "nearest":
        raise DomainError(f"unknown tracking policy {policy!r}")
    if reference_frequency is None:
        raise DomainError("nearest tracking needs a reference frequency")
    picked = []
    target = float(reference_frequency)
    for _, peaks in peaks_by_temperature:
        best = min(peaks, key=lambda p: (abs(p.frequency - target), p.frequency))
        picked.append(best)
        target = best.frequency
    return picked


def track(
    peaks_by_temperature: Sequence[Tuple[float, Sequence[ResonancePeak]]],
    policy: TrackingPolicy = "highest_frequency",
    reference_frequency: Optional[float] = None,
) -> CalibrationCurve:
    """Follow one resonance across temperatures into a calibration curve.

    Dips are chosen by `select_peaks`; with `highest_frequency` the result must
    also rise with temperature.

    Raises:
        DomainError: Temperatures not strictly increasing, or `nearest` without
            a reference frequency.
        TrackingFailureError: A temperature without dips, or a tracked sequence
            that is not strictly monotone; `index` names the sample.
    """
    temps = [float(t) for t, _ in peaks_by_temperature]
    f = np.array([p.frequency for p in select_peaks(peaks_by_temperature, policy, reference_frequency)])
    bad = _first_non_monotone(f)
    if bad is None and policy == "highest_frequency" and f.size > 1 and f[-1] < f[0]:
        bad = 1
    if bad is not None:
        raise TrackingFailureError(
            f"tracked resonance is not strictly monotone at {temps[bad]:g} degC ({policy})", index=bad
        )
    logger.info(f"tracked {len(f)} samples with {policy}: {f[0]:g} -> {f[-1]:g} Hz")
    return CalibrationCurve(temperatures=np.array(temps), frequencies=f)


@dataclass(frozen=True)
class SensitivityReport:
    span: Tuple[float, float]
    delta_f: float
    avg_sensitivity_pct_per_degc: float
    slope_mhz_per_degc: float
    freq_normalized_pct_per_degc: float
    reference_frequency: float
    relative_response: float


def sensitivity(
    curve: CalibrationCurve,
    span: Optional[Tuple[float, float]] = None,
    reference_frequency: Optional[float] = None,
) -> SensitivityReport:
    """Average sensitivity metrics of a curve.

    Args:
        curve: Calibration curve, frequencies in Hz.
        span: (t_lo, t_hi) inside the curve; defaults to its end points.
        reference_frequency: Normalization for the frequency-normalized metric;
            defaults to f_r(t_lo).
    """
    t_lo, t_hi = span if span is not None else (curve.temperatures[0], curve.temperatures[-1])
    t_lo, t_hi = float(t_lo), float(t_hi)
    if not t_hi > t_lo:
        raise DomainError(f"degenerate span ({t_lo:g}, {t_hi:g})")
    f_lo, f_hi = curve.frequency_at(t_lo), curve.frequency_at(t_hi)
    ref = f_lo if reference_frequency is None else float(reference_frequency)
    if not ref > 0:
        raise DomainError("reference frequency must be > 0")
    delta_f = f_hi - f_lo
    width = t_hi - t_lo
    slope_hz = abs(delta_f) / width
    return SensitivityReport(
        span=(t_lo, t_hi),
        delta_f=delta_f,
        avg_sensitivity_pct_per_degc=100.0 * abs(delta_f) / f_lo / width,
        slope_mhz_per_degc=slope_hz / 1e6,
        freq_normalized_pct_per_degc=100.0 * slope_hz / ref,
        reference_frequency=ref,
        relative_response=abs(delta_f) / f_lo,
    )


def invert(curve: CalibrationCurve, f_measured: float, mode: InvertMode = "clamp") -> float:
    """Temperature at which the curve reaches `f_measured`.

    Outside the calibrated frequencies `clamp` returns the nearer end
    temperature and `strict` raises OutOfCalibrationRangeError.
    """
    f_measured = float(f_measured)
    if math.isnan(f_measured):
        raise DomainError("measured frequency is NaN")
    f, t = curve.frequencies, curve.temperatures
    if curve.direction == "decreasing":
        f, t = f[::-1], t[::-1]
    if f_measured < f[0] or f_measured > f[-1]:
        if mode == "strict":
            raise OutOfCalibrationRangeError(
                f"{f_measured:g} Hz is outside the calibrated range [{f[0]:g}, {f[-1]:g}] Hz"
            )
        end = t[0] if f_measured < f[0] else t[-1]
        logger.debug(f"{f_measured:g} Hz clamped to {end:g} degC")
        return float(end)
    knot = np.flatnonzero(f == f_measured)
    if knot.size:
        return float(t[knot[0]])
    return float(PchipInterpolator(f, t)(f_measured))


def relative_response_curve(curve: CalibrationCurve, reference_frequency: Optional[float] = None) -> pd.DataFrame:
    """Relative response of every sample against a reference resonance.

    The reference defaults to the first sample. Columns: temperature_c, f_r_hz,
    relative_response (fraction, magnitude) and sign.
    """
    ref = float(curve.frequencies[0] if reference_frequency is None else reference_frequency)
    if not ref > 0:
        raise DomainError("reference frequency must be > 0")
    diff = curve.frequencies - ref
    return pd.DataFrame(
        {
            "temperature_c": curve.temperatures,
            "f_r_hz": curve.frequencies,
            "relative_response": np.abs(diff) / ref,
            "sign": np.sign(diff).astype(int),
        }
    )


def save_curve(path: PathLike, curve: CalibrationCurve, metadata: Optional[str] = None, digits: int = 9) -> None:
    df = pd.DataFrame({"temperature_c": curve.temperatures, "f_r_hz": curve.frequencies})
    write_table(path, df, metadata=metadata, digits=digits)


def load_curve(path: PathLike) -> Tuple[CalibrationCurve, Optional[str]]:
    """Read a curve written by `save_curve`; returns the curve and its metadata line."""
    df, metadata = read_table(path, CURVE_COLUMNS)
    curve = CalibrationCurve(
        temperatures=df["temperature_c"].to_numpy(), frequencies=df["f_r_hz"].to_numpy()
    )
    return curve, metadata


def load_comparison_table() -> pd.DataFrame:
    """Published frequency-domain temperature sensors bundled with the package."""
    text = resources.files("chipless_sensor").joinpath("data/sensor_comparison.csv").read_text(encoding="utf-8")
    df, _ = read_table(text, ("f0_mhz", "slope_mhz_per_degc", "printed_pct_per_degc"), text=True)
    return df


def compare_sensitivities(
    rows: Union[pd.DataFrame, Sequence[dict]], tolerance: float = MISMATCH_TOLERANCE
) -> List[ComparisonRow]:
    """Recompute 100*slope/f0 per row and flag relative deviations above `tolerance`."""
    df = pd.DataFrame(rows) if not isinstance(rows, pd.DataFrame) else rows
    out: List[ComparisonRow] = []
    for i, rec in enumerate(df.to_dict("records")):
        recomputed = 100.0 * rec["slope_mhz_per_degc"] / rec["f0_mhz"]
        printed = rec["printed_pct_per_degc"]
        deviation = abs(recomputed - printed) / abs(printed) if printed else math.inf
        flagged = deviation > tolerance
        if flagged:
            logger.info(f"{rec.get('reference', i)}: printed {printed:g} vs recomputed {recomputed:.4g} %/degC")
        out.append(
            ComparisonRow(
                reference=str(rec.get("reference", i)),
                architecture=str(rec.get("architecture", "")),
                f0_mhz=float(rec["f0_mhz"]),
                slope_mhz_per_degc=float(rec["slope_mhz_per_degc"]),
                printed_pct_per_degc=float(printed),
                recomputed_pct_per_degc=recomputed,
                deviation=deviation,
                flagged=flagged,
            )
        )
    return out


def read_dips(path: PathLike) -> List[Tuple[float, List[ResonancePeak]]]:
    """Group a dips table (temperature_c, f_hz, depth_db, prominence_db) by temperature."""
    df, _ = read_table(path, ("temperature_c", "f_hz", "depth_db", "prominence_db"))
    grouped = []
    for t, group in df.groupby("temperature_c", sort=True):
        peaks = [
            ResonancePeak(frequency=r.f_hz, depth_db=r.depth_db, prominence_db=r.prominence_db, index=-1)
            for r in group.sort_values("f_hz").itertuples(index=False)
        ]
        grouped.append((float(t), peaks))
    return grouped


def write_dips(path: PathLike, dips: Sequence[Tuple[float, Sequence[ResonancePeak]]], digits: int = 9) -> None:
    rows = [
        {"temperature_c": t, "f_hz": p.frequency, "depth_db": p.depth_db, "prominence_db": p.prominence_db}
        for t, peaks in dips
        for p in peaks
    ]
    df = pd.DataFrame(rows, columns=["temperature_c", "f_hz", "depth_db", "prominence_db"])
    write_table(path, df, digits=digits)

