"""Complex network math: frequency grids, one/two-port sweeps and conversions.

Impedance is the canonical domain. S-parameters are derived on demand at the
sweep's reference impedance using

    s = (z - z0) / (z + z0)                     (one-port)
    S = (Z - z0*I) (Z + z0*I)^-1                (two-port)

The two-port conversion is written out element by element so that a symmetric
Z-matrix gives s12 == s21 bit for bit.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Literal, Tuple, Union

import numpy as np

from chipless_sensor.exceptions import DomainError, SingularConversionError

logger = logging.getLogger(__name__)

ComplexLike = Union[complex, float, np.ndarray]

DEFAULT_REFERENCE_IMPEDANCE = 50.0
DB_FLOOR = -300.0


def _check_z0(z0: float) -> float:
    z0 = float(z0)
    if not math.isfinite(z0) or z0 <= 0:
        raise DomainError(f"reference impedance must be finite and > 0, got {z0}")
    return z0


@dataclass(frozen=True)
class FrequencyGrid:
    """Strictly increasing frequency points in Hz."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise DomainError("a frequency grid needs at least 2 points")
        if not np.all(np.isfinite(pts)) or np.any(pts <= 0):
            raise DomainError("grid frequencies must be finite and > 0")
        if np.any(np.diff(pts) <= 0):
            raise DomainError("grid frequencies must be strictly increasing")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def linspace(cls, start: float, stop: float, points: int) -> "FrequencyGrid":
        """Build an evenly spaced grid from start to stop inclusive."""
        if points < 2:
            raise DomainError("a frequency grid needs at least 2 points")
        return cls(np.linspace(float(start), float(stop), int(points)))

    def __len__(self) -> int:
        return int(self.points.size)

    @property
    def start(self) -> float:
        return float(self.points[0])

    @property
    def stop(self) -> float:
        return float(self.points[-1])

    @property
    def omega(self) -> np.ndarray:
        """Angular frequency 2*pi*f for every point."""
        return 2.0 * np.pi * self.points

    def step(self) -> float:
        """Largest spacing between neighbouring points."""
        return float(np.max(np.diff(self.points)))


def z_to_s_oneport(z: ComplexLike, z0: float = DEFAULT_REFERENCE_IMPEDANCE) -> ComplexLike:
    """Convert impedance to reflection coefficient at reference `z0`.

    Args:
        z: Impedance in ohms, scalar or array.
        z0: Real reference impedance in ohms.

    Returns:
        Reflection coefficient with the same shape as `z`.

    Raises:
        DomainError: If `z0` is not positive or `z` is not finite.
        SingularConversionError: If z == -z0.
    """
    z0 = _check_z0(z0)
    arr = np.asarray(z, dtype=complex)
    if not np.all(np.isfinite(arr)):
        raise DomainError("impedance must be finite")
    den = arr + z0
    if np.any(den == 0):
        idx = int(np.flatnonzero(np.atleast_1d(den) == 0)[0])
        raise SingularConversionError("z = -z0 has no reflection coefficient", index=idx)
    s = (arr - z0) / den
    return complex(s) if s.ndim == 0 else s


def s_to_z_oneport(s: ComplexLike, z0: float = DEFAULT_REFERENCE_IMPEDANCE) -> ComplexLike:
    """Convert reflection coefficient to impedance at reference `z0`.

    Raises:
        SingularConversionError: Where s == 1 exactly (open circuit).
    """
    z0 = _check_z0(z0)
    arr = np.asarray(s, dtype=complex)
    if not np.all(np.isfinite(arr)):
        raise DomainError("reflection coefficient must be finite")
    den = 1.0 - arr
    if np.any(den == 0):
        idx = int(np.flatnonzero(np.atleast_1d(den) == 0)[0])
        raise SingularConversionError("s = 1 is an open circuit", index=idx)
    z = z0 * (1.0 + arr) / den
    return complex(z) if z.ndim == 0 else z


def y_to_z_oneport(y: ComplexLike) -> ComplexLike:
    """Convert admittance to impedance."""
    arr = np.asarray(y, dtype=complex)
    if np.any(arr == 0):
        idx = int(np.flatnonzero(np.atleast_1d(arr) == 0)[0])
        raise SingularConversionError("zero admittance is an open circuit", index=idx)
    z = 1.0 / arr
    return complex(z) if z.ndim == 0 else z


def reflection_db(s: ComplexLike, floor: float = DB_FLOOR) -> np.ndarray:
    """Return 20*log10|s| with values below `floor` clamped to it."""
    mag = np.abs(np.asarray(s, dtype=complex))
    with np.errstate(divide="ignore"):
        db = 20.0 * np.log10(mag)
    return np.maximum(db, floor)


@dataclass(frozen=True)
class OnePortSweep:
    """Impedance per grid point, with the reference impedance used for S11."""

    grid: FrequencyGrid
    z: np.ndarray
    reference_impedance: float = DEFAULT_REFERENCE_IMPEDANCE

    def __post_init__(self):
        z = np.asarray(self.z, dtype=complex)
        if z.shape != (len(self.grid),):
            raise DomainError(f"expected {len(self.grid)} impedance values, got shape {z.shape}")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "reference_impedance", _check_z0(self.reference_impedance))

    @classmethod
    def from_s11(cls, grid: FrequencyGrid, s11: np.ndarray, z0: float = DEFAULT_REFERENCE_IMPEDANCE) -> "OnePortSweep":
        """Build a sweep from reflection data; fails on open-circuit points."""
        try:
            z = s_to_z_oneport(np.asarray(s11, dtype=complex), z0)
        except SingularConversionError as e:
            e.frequency = float(grid.points[e.index]) if e.index is not None else None
            raise
        return cls(grid=grid, z=z, reference_impedance=z0)

    @property
    def s11(self) -> np.ndarray:
        return z_to_s_oneport(self.z, self.reference_impedance)

    @property
    def frequencies(self) -> np.ndarray:
        return self.grid.points


@dataclass(frozen=True)
class PointError:
    """A grid point at which a conversion failed."""

    index: int
    frequency: float
    message: str


def _as_stack(m: np.ndarray, n: int) -> np.ndarray:
    arr = np.asarray(m, dtype=complex)
    if arr.shape != (n, 2, 2):
        raise DomainError(f"expected a ({n}, 2, 2) matrix stack, got {arr.shape}")
    return arr


@dataclass(frozen=True)
class TwoPortSweep:
    """2x2 S-matrix per grid point.

    Points listed in `errors` failed conversion and hold NaN.
    """

    grid: FrequencyGrid
    s: np.ndarray
    reference_impedance: float = DEFAULT_REFERENCE_IMPEDANCE
    errors: Tuple[PointError, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "s", _as_stack(self.s, len(self.grid)))
        object.__setattr__(self, "reference_impedance", _check_z0(self.reference_impedance))
        object.__setattr__(self, "errors", tuple(self.errors))

    @property
    def frequencies(self) -> np.ndarray:
        return self.grid.points

    @property
    def s11(self) -> np.ndarray:
        return self.s[:, 0, 0]

    @property
    def s21(self) -> np.ndarray:
        return self.s[:, 1, 0]

    @property
    def s12(self) -> np.ndarray:
        return self.s[:, 0, 1]

    @property
    def s22(self) -> np.ndarray:
        return self.s[:, 1, 1]

    @property
    def z(self) -> np.ndarray:
        return smatrix_to_zmatrix(self.s, self.reference_impedance)

    def parameter(self, name: str) -> np.ndarray:
        """Return one S-parameter trace by name ('s11', 's21', 's12', 's22')."""
        try:
            return getattr(self, name.lower())
        except AttributeError as e:
            raise DomainError(f"unknown parameter {name!r}") from e


def zmatrix_to_smatrix(
    grid: FrequencyGrid,
    z: np.ndarray,
    z0: float = DEFAULT_REFERENCE_IMPEDANCE,
    on_singular: Literal["raise", "mark"] = "raise",
) -> TwoPortSweep:
    """Convert a stack of 2x2 impedance matrices to a two-port S sweep.

    Args:
        grid: Frequencies of the stack.
        z: Array of shape (len(grid), 2, 2), ohms.
        z0: Reference impedance for both ports.
        on_singular: 'raise' stops at the first singular point; 'mark' records it in
            `TwoPortSweep.errors`, stores NaN there and carries on.
    """
    z0 = _check_z0(z0)
    zm = _as_stack(z, len(grid))
    z11, z12, z21, z22 = zm[:, 0, 0], zm[:, 0, 1], zm[:, 1, 0], zm[:, 1, 1]
    a = z11 + z0
    d = z22 + z0
    cross = z12 * z21
    delta = a * d - cross
    bad = (delta == 0) | ~np.isfinite(delta)

    errors = []
    if np.any(bad):
        for i in np.flatnonzero(bad):
            f = float(grid.points[i])
            if on_singular == "raise":
                raise SingularConversionError(f"Z + z0*I is singular at {f:g} Hz", index=int(i), frequency=f)
            logger.warning(f"singular two-port conversion at {f:g} Hz, point skipped")
            errors.append(PointError(int(i), f, "Z + z0*I is singular"))

    safe = np.where(bad, 1.0, delta)
    s = np.empty_like(zm)
    s[:, 0, 0] = ((z11 - z0) * d - cross) / safe
    s[:, 0, 1] = 2.0 * z0 * z12 / safe
    s[:, 1, 0] = 2.0 * z0 * z21 / safe
    s[:, 1, 1] = (a * (z22 - z0) - cross) / safe
    s[bad] = np.nan
    return TwoPortSweep(grid=grid, s=s, reference_impedance=z0, errors=tuple(errors))


def smatrix_to_zmatrix(s: np.ndarray, z0: float = DEFAULT_REFERENCE_IMPEDANCE) -> np.ndarray:
    """Convert a stack of 2x2 S-matrices to impedance matrices.

    Raises:
        SingularConversionError: Where I - S is singular.
    """
    z0 = _check_z0(z0)
    sm = np.asarray(s, dtype=complex)
    if sm.ndim != 3 or sm.shape[1:] != (2, 2):
        raise DomainError(f"expected an (N, 2, 2) matrix stack, got {sm.shape}")
    s11, s12, s21, s22 = sm[:, 0, 0], sm[:, 0, 1], sm[:, 1, 0], sm[:, 1, 1]
    cross = s12 * s21
    den = (1.0 - s11) * (1.0 - s22) - cross
    if np.any(den == 0):
        idx = int(np.flatnonzero(den == 0)[0])
        raise SingularConversionError("I - S is singular", index=idx)
    z = np.empty_like(sm)
    z[:, 0, 0] = z0 * ((1.0 + s11) * (1.0 - s22) + cross) / den
    z[:, 0, 1] = z0 * 2.0 * s12 / den
    z[:, 1, 0] = z0 * 2.0 * s21 / den
    z[:, 1, 1] = z0 * ((1.0 - s11) * (1.0 + s22) + cross) / den
    return z


def invert_2x2(m: np.ndarray) -> np.ndarray:
    """Invert a stack of 2x2 matrices in closed form."""
    m = np.asarray(m, dtype=complex)
    det = m[:, 0, 0] * m[:, 1, 1] - m[:, 0, 1] * m[:, 1, 0]
    if np.any(det == 0):
        idx = int(np.flatnonzero(det == 0)[0])
        raise SingularConversionError("matrix is singular", index=idx)
    out = np.empty_like(m)
    out[:, 0, 0] = m[:, 1, 1] / det
    out[:, 1, 1] = m[:, 0, 0] / det
    out[:, 0, 1] = -m[:, 0, 1] / det
    out[:, 1, 0] = -m[:, 1, 0] / det
    return out


def max_singular_values(sweep: TwoPortSweep) -> np.ndarray:
    """Largest singular value of S at every valid point (NaN at failed points)."""
    out = np.full(len(sweep.grid), np.nan)
    ok = np.all(np.isfinite(sweep.s), axis=(1, 2))
    if np.any(ok):
        out[ok] = np.linalg.svd(sweep.s[ok], compute_uv=False)[:, 0]
    return out


def is_passive(sweep: TwoPortSweep, tol: float = 1e-9) -> bool:
    """Check that no valid point amplifies: max singular value <= 1 + tol."""
    sv = max_singular_values(sweep)
    return bool(np.all(sv[np.isfinite(sv)] <= 1.0 + tol))


def is_reciprocal(sweep: TwoPortSweep, tol: float = 1e-12) -> bool:
    """Check s12 == s21 within `tol` at every valid point."""
    diff = np.abs(sweep.s12 - sweep.s21)
    return bool(np.all(diff[np.isfinite(diff)] <= tol))
