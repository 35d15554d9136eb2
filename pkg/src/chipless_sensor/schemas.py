import math
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from typing_extensions import Literal, TypedDict

_FROZEN = ConfigDict(frozen=True, extra="forbid")


class CapacitorModel(BaseModel):
    """Lumped series C-ESR-L_par capacitor, optionally with its plate area."""

    model_config = _FROZEN

    capacitance: float = Field(gt=0, description="Capacitance in farads.")
    esr: float = Field(default=0.0, ge=0, description="Equivalent series resistance in ohms.")
    parasitic_inductance: float = Field(default=0.0, ge=0, description="Series parasitic inductance in henries.")
    area: Optional[float] = Field(default=None, gt=0, description="Plate area in square metres.")

    def impedance(self, f) -> np.ndarray:
        """Return esr + j(2*pi*f*L_par - 1/(2*pi*f*C)) at frequency/frequencies `f`."""
        w = 2.0 * np.pi * np.asarray(f, dtype=float)
        return self.esr + 1j * (w * self.parasitic_inductance - 1.0 / (w * self.capacitance))

    @property
    def self_resonant_frequency(self) -> Optional[float]:
        """Analytic 1/(2*pi*sqrt(L_par*C)), None for an ideal capacitor."""
        if self.parasitic_inductance == 0:
            return None
        return 1.0 / (2.0 * math.pi * math.sqrt(self.parasitic_inductance * self.capacitance))


class CompositeResponseModel(BaseModel):
    """Temperature law C(T), tan_delta(T) of a composite capacitor at one frequency tag."""

    model_config = _FROZEN

    kind: Literal["linear", "exp_decay"] = Field(description="Shape of C(T).")
    c_ref: float = Field(gt=0, description="Capacitance at t_ref, farads.")
    t_ref: float = Field(default=20.0, description="Reference temperature, degC.")
    slope_rel: Optional[float] = Field(default=None, description="linear: fractional change per degC.")
    rr_max: Optional[float] = Field(default=None, gt=0, lt=1, description="exp_decay: saturated relative response.")
    tau: Optional[float] = Field(default=None, gt=0, description="exp_decay: temperature constant, degC.")
    tand_ref: float = Field(default=0.0, ge=0, description="Loss tangent at t_ref.")
    tand_slope_rel: float = Field(default=0.0, description="Fractional change of loss tangent per degC.")
    validity: Tuple[float, float] = Field(default=(20.0, 110.0), description="Validity range, degC.")
    frequency_tag: Optional[float] = Field(default=None, gt=0, description="Measurement frequency in Hz this model belongs to.")
    label: Optional[str] = Field(default=None, description="Free-text name, e.g. the filler.")

    @model_validator(mode="after")
    def _check_shape(self):
        lo, hi = self.validity
        if not lo < hi:
            raise ValueError("validity range must satisfy lo < hi")
        if self.kind == "linear":
            if self.slope_rel is None:
                raise ValueError("linear model needs slope_rel")
            for t in (lo, hi):
                if 1.0 + self.slope_rel * (t - self.t_ref) <= 0:
                    raise ValueError(f"linear capacitance is not positive at {t} degC")
        elif self.rr_max is None or self.tau is None:
            raise ValueError("exp_decay model needs rr_max and tau")
        for t in (lo, hi):
            if self.tand_ref * (1.0 + self.tand_slope_rel * (t - self.t_ref)) < 0:
                raise ValueError(f"loss tangent is negative at {t} degC")
        return self


class CoilParams(BaseModel):
    """Series R-L coil with an optional parallel self-capacitance."""

    model_config = _FROZEN

    inductance: float = Field(gt=0, description="Inductance in henries.")
    resistance: float = Field(default=0.0, ge=0, description="Series resistance in ohms.")
    self_capacitance: float = Field(default=0.0, ge=0, description="Parallel parasitic capacitance in farads.")

    @field_validator("inductance", "resistance", "self_capacitance")
    @classmethod
    def _finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("must be finite")
        return v


class SensorCapacitor(BaseModel):
    """Sensing capacitor: a fixed value or a temperature model."""

    model_config = _FROZEN

    capacitance: Optional[float] = Field(default=None, gt=0, description="Fixed capacitance, farads.")
    esr: float = Field(default=0.0, ge=0, description="Fixed ESR in ohms (fixed capacitor only).")
    tan_delta: float = Field(default=0.0, ge=0, description="Loss tangent (fixed capacitor only).")
    model: Optional[CompositeResponseModel] = Field(default=None, description="Temperature-dependent model.")

    @model_validator(mode="after")
    def _one_source(self):
        if (self.capacitance is None) == (self.model is None):
            raise ValueError("give exactly one of capacitance or model")
        return self


class ReaderLoop(BaseModel):
    model_config = _FROZEN

    coil: CoilParams
    tuning_capacitance: float = Field(gt=0, description="Series tuning capacitor, farads.")


class SensorLoop(BaseModel):
    model_config = _FROZEN

    coil: CoilParams
    capacitor: SensorCapacitor


class CoupledSystem(BaseModel):
    """Reader and sensor series-RLC loops coupled by mutual inductance."""

    model_config = _FROZEN

    reader: ReaderLoop
    sensor: SensorLoop
    k: float = Field(ge=0, lt=1, description="Coupling coefficient.")
    port_impedance: float = Field(default=50.0, gt=0, description="Termination of both ports, ohms.")

    @property
    def mutual_inductance(self) -> float:
        return self.k * math.sqrt(self.reader.coil.inductance * self.sensor.coil.inductance)


# System configuration document sections


class ReaderSection(BaseModel):
    model_config = _FROZEN

    inductance: float = Field(gt=0)
    resistance: float = Field(default=0.0, ge=0)
    self_capacitance: float = Field(default=0.0, ge=0)
    series_capacitance: Optional[float] = Field(default=None, gt=0)
    f_target: Optional[float] = Field(default=None, gt=0)

    @model_validator(mode="after")
    def _one_tuning(self):
        if (self.series_capacitance is None) == (self.f_target is None):
            raise ValueError("give exactly one of series_capacitance or f_target")
        return self


class CapacitorSection(BaseModel):
    model_config = _FROZEN

    capacitance: Optional[float] = Field(default=None, gt=0)
    esr: float = Field(default=0.0, ge=0)
    tan_delta: float = Field(default=0.0, ge=0)
    model: Optional[CompositeResponseModel] = None
    model_file: Optional[str] = None
    frequency_tag: Optional[float] = Field(default=None, gt=0)

    @model_validator(mode="after")
    def _one_source(self):
        given = [x is not None for x in (self.capacitance, self.model, self.model_file)]
        if sum(given) != 1:
            raise ValueError("give exactly one of capacitance, model or model_file")
        if self.model_file is not None and self.frequency_tag is None:
            raise ValueError("model_file needs frequency_tag")
        return self


class SensorSection(BaseModel):
    model_config = _FROZEN

    inductance: float = Field(gt=0)
    resistance: float = Field(default=0.0, ge=0)
    self_capacitance: float = Field(default=0.0, ge=0)
    capacitor: CapacitorSection


class GridSection(BaseModel):
    model_config = _FROZEN

    start: float = Field(gt=0, description="First frequency, Hz.")
    stop: float = Field(gt=0, description="Last frequency, Hz.")
    points: int = Field(ge=5, description="Number of points.")

    @model_validator(mode="after")
    def _ordered(self):
        if not self.stop > self.start:
            raise ValueError("stop must exceed start")
        return self


class ReadoutSection(BaseModel):
    model_config = _FROZEN

    prominence_db: Optional[float] = Field(default=None, gt=0, description="Dip prominence, dB (run default when omitted).")
    policy: Literal["nearest", "highest_frequency"] = "highest_frequency"
    reference_frequency: Optional[float] = Field(default=None, gt=0)

    @model_validator(mode="after")
    def _seeded(self):
        if self.policy == "nearest" and self.reference_frequency is None:
            raise ValueError("nearest tracking needs reference_frequency")
        return self


class SystemConfig(BaseModel):
    """Simulation document: coils, sensor capacitor, coupling, grid and temperatures."""

    model_config = _FROZEN

    reader: ReaderSection
    sensor: SensorSection
    k: float = Field(ge=0, lt=1)
    port_impedance: float = Field(default=50.0, gt=0)
    grid: GridSection
    temperatures: List[float] = Field(default_factory=lambda: [20.0], min_length=1)
    readout: ReadoutSection = Field(default_factory=ReadoutSection)

    @field_validator("temperatures")
    @classmethod
    def _increasing(cls, v: List[float]) -> List[float]:
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("temperatures must be strictly increasing")
        return v


# Report rows


class ExtractionRow(TypedDict):
    file: str
    band_mean_c_pf: Optional[float]
    band_std_c_pf: Optional[float]
    srf_mhz: Optional[float]
    mean_q: Optional[float]
    status: str


class DipRow(TypedDict):
    temperature_c: float
    f_hz: float
    depth_db: float
    prominence_db: float


class ComparisonRow(TypedDict):
    reference: str
    architecture: str
    f0_mhz: float
    slope_mhz_per_degc: float
    printed_pct_per_degc: float
    recomputed_pct_per_degc: float
    deviation: float
    flagged: bool
