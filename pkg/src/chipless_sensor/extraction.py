"""Lumped capacitor properties from one-port impedance sweeps.

    C   = -1 / (Im{Z} * 2*pi*f)     valid only where Im{Z} < 0
    Q   = |Im{Z}| / |Re{Z}|
    tan = 1 / Q
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from chipless_sensor.exceptions import AboveSelfResonanceError, DomainError, NoCapacitiveRegionError
from chipless_sensor.rfnet import DEFAULT_REFERENCE_IMPEDANCE, FrequencyGrid, OnePortSweep
from chipless_sensor.schemas import CapacitorModel

logger = logging.getLogger(__name__)

__all__ = [
    "CapacitorModel",
    "ExtractionReport",
    "capacitance_from_impedance",
    "extract",
    "loss_tangent",
    "quality_factor",
    "sample_sweep",
    "self_resonant_frequency",
]


def sample_sweep(
    model: CapacitorModel, grid: FrequencyGrid, z0: float = DEFAULT_REFERENCE_IMPEDANCE
) -> OnePortSweep:
    """Sample a capacitor model on a grid."""
    return OnePortSweep(grid=grid, z=model.impedance(grid.points), reference_impedance=z0)


def capacitance_from_impedance(z: complex, f: float) -> float:
    """Apparent capacitance of a single impedance sample.

    Args:
        z: Impedance in ohms.
        f: Frequency in Hz.

    Returns:
        Capacitance in farads, always positive.

    Raises:
        DomainError: If `f` is not a finite positive number.
        AboveSelfResonanceError: If Im{z} >= 0 (the sample is not capacitive).
    """
    if not math.isfinite(f) or f <= 0:
        raise DomainError(f"frequency must be finite and > 0, got {f}")
    x = complex(z).imag
    if not x < 0:
        raise AboveSelfResonanceError(f"Im{{Z}} = {x:g} ohm at {f:g} Hz is not capacitive")
    return -1.0 / (x * 2.0 * math.pi * f)


def quality_factor(z):
    """Return |Im{z}|/|Re{z}|; math.inf where Re{z} == 0. Works on scalars and arrays."""
    arr = np.asarray(z, dtype=complex)
    re = np.abs(arr.real)
    im = np.abs(arr.imag)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(re == 0, np.inf, im / np.where(re == 0, 1.0, re))
    return float(q) if q.ndim == 0 else q


def loss_tangent(z):
    """Return 1/Q (0 for a lossless sample)."""
    q = np.asarray(quality_factor(z), dtype=float)
    with np.errstate(divide="ignore"):
        t = np.where(np.isinf(q), 0.0, 1.0 / q)
    return float(t) if t.ndim == 0 else t


def self_resonant_frequency(sweep: OnePortSweep) -> Optional[float]:
    """First frequency where Im{Z} goes from negative to non-negative.

    The crossing is located by linear interpolation between the two bracketing
    grid points. Returns None when the sweep has no such crossing.
    """
    x = sweep.z.imag
    f = sweep.frequencies
    hits = np.flatnonzero((x[:-1] < 0) & (x[1:] >= 0))
    if hits.size == 0:
        return None
    i = int(hits[0])
    x0, x1 = x[i], x[i + 1]
    srf = float(f[i] + (0.0 - x0) * (f[i + 1] - f[i]) / (x1 - x0))
    logger.debug(f"self-resonance between {f[i]:g} and {f[i + 1]:g} Hz at {srf:g} Hz")
    return srf


@dataclass(frozen=True)
class ExtractionReport:
    """Per-point and band-averaged capacitor properties.

    `c_of_f` is NaN wherever Im{Z} >= 0. Band statistics use only the points
    inside `band` that are capacitive. The `*_per_area` fields are None unless
    an area was supplied.
    """

    grid: FrequencyGrid
    c_of_f: np.ndarray
    q_of_f: np.ndarray
    srf: Optional[float]
    band: Tuple[float, float]
    band_mean_c: float
    band_std_c: float
    band_mean_q: float
    band_mean_tan_delta: float
    band_points: int
    area: Optional[float] = None
    c_per_area: Optional[float] = None
    c_std_per_area: Optional[float] = None
    tan_delta_per_area: Optional[float] = None


def _check_band(grid: FrequencyGrid, band: Tuple[float, float]) -> Tuple[float, float]:
    f_lo, f_hi = float(band[0]), float(band[1])
    if not (math.isfinite(f_lo) and math.isfinite(f_hi)) or not f_lo < f_hi:
        raise DomainError(f"band must satisfy f_lo < f_hi, got ({f_lo:g}, {f_hi:g})")
    slack = 1e-12 * grid.stop
    if f_lo < grid.start - slack or f_hi > grid.stop + slack:
        raise DomainError(
            f"band ({f_lo:g}, {f_hi:g}) Hz lies outside the sweep ({grid.start:g}, {grid.stop:g}) Hz"
        )
    return f_lo, f_hi


def extract(
    sweep: OnePortSweep, band: Tuple[float, float], area: Optional[float] = None
) -> ExtractionReport:
    """Extract C(f), Q(f), the self-resonance and band statistics from a sweep.

    Args:
        sweep: One-port impedance sweep of the capacitor.
        band: (f_lo, f_hi) in Hz, inclusive, inside the sweep.
        area: Optional plate area in m^2 for area-normalized values.

    Raises:
        DomainError: For a degenerate band, a band outside the grid or a bad area.
        NoCapacitiveRegionError: If no point of the band has Im{Z} < 0.
    """
    if area is not None and (not math.isfinite(area) or area <= 0):
        raise DomainError(f"area must be finite and > 0, got {area}")
    f_lo, f_hi = _check_band(sweep.grid, band)

    f = sweep.frequencies
    x = sweep.z.imag
    capacitive = x < 0
    with np.errstate(divide="ignore", invalid="ignore"):
        c_of_f = np.where(capacitive, -1.0 / (x * 2.0 * np.pi * f), np.nan)
    q_of_f = quality_factor(sweep.z)

    valid = capacitive & (f >= f_lo) & (f <= f_hi)
    n = int(np.count_nonzero(valid))
    if n == 0:
        raise NoCapacitiveRegionError(f"no capacitive point between {f_lo:g} and {f_hi:g} Hz")
    skipped = int(np.count_nonzero((f >= f_lo) & (f <= f_hi))) - n
    if skipped:
        logger.info(f"{skipped} inductive point(s) excluded from band statistics")

    c_band = c_of_f[valid]
    mean_c = float(np.mean(c_band))
    std_c = float(np.std(c_band))
    mean_q = float(np.mean(q_of_f[valid]))
    mean_tan = float(np.mean(loss_tangent(sweep.z[valid])))

    per_area = {}
    if area is not None:
        per_area = dict(
            c_per_area=mean_c / area,
            c_std_per_area=std_c / area,
            tan_delta_per_area=mean_tan / area,
        )
    return ExtractionReport(
        grid=sweep.grid,
        c_of_f=c_of_f,
        q_of_f=np.asarray(q_of_f, dtype=float),
        srf=self_resonant_frequency(sweep),
        band=(f_lo, f_hi),
        band_mean_c=mean_c,
        band_std_c=std_c,
        band_mean_q=mean_q,
        band_mean_tan_delta=mean_tan,
        band_points=n,
        area=area,
        **per_area,
    )
