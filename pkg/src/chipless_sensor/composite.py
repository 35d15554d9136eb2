"""Temperature response of composite capacitors and fitting to measured data.

Two shapes of C(T) are supported:

    linear:     C(T) = c_ref * (1 + slope_rel * (T - t_ref))
    exp_decay:  C(T) = c_ref * (1 - rr_max * (1 - exp(-(T - t_ref) / tau)))

and the loss tangent follows tan(T) = tand_ref * (1 + tand_slope_rel * (T - t_ref)).
"""

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Literal, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import TypeAdapter, ValidationError
from scipy.optimize import minimize_scalar

from chipless_sensor.exceptions import (
    DomainError,
    FitFailureError,
    InsufficientDataError,
    TemperatureRangeError,
)
from chipless_sensor.schemas import CompositeResponseModel

logger = logging.getLogger(__name__)

FitKind = Literal["linear", "exp_decay", "auto"]

TAU_BOUNDS = (1.0, 500.0)
_TAU_SCAN = 64
_MODEL_LIST = TypeAdapter(List[CompositeResponseModel])


@dataclass(frozen=True)
class TemperatureSeries:
    """Measured (temperature degC, value) samples, temperatures strictly increasing."""

    temperatures: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.temperatures, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape:
            raise DomainError("temperatures and values must be 1-D arrays of equal length")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
            raise DomainError("temperature series must be finite")
        if np.any(np.diff(t) <= 0):
            raise DomainError("temperatures must be strictly increasing")
        t.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "temperatures", t)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_pairs(cls, pairs: Iterable[Tuple[float, float]]) -> "TemperatureSeries":
        pairs = list(pairs)
        return cls(
            temperatures=np.array([p[0] for p in pairs], dtype=float),
            values=np.array([p[1] for p in pairs], dtype=float),
        )

    def __len__(self) -> int:
        return int(self.temperatures.size)


class Evaluation(NamedTuple):
    capacitance: float
    tan_delta: float
    esr: Optional[float] = None


def _capacitance_ratio(model: CompositeResponseModel, dt):
    if model.kind == "linear":
        return 1.0 + model.slope_rel * dt
    return 1.0 - model.rr_max * (1.0 - np.exp(-dt / model.tau))


def evaluate(
    model: CompositeResponseModel,
    t: float,
    frequency: Optional[float] = None,
    extrapolate: bool = False,
) -> Evaluation:
    """Evaluate capacitance and loss tangent at temperature `t`.

    Args:
        model: Temperature law.
        t: Temperature in degC.
        frequency: When given (Hz), also return the equivalent series resistance
            tan_delta / (2*pi*f*C).
        extrapolate: Allow `t` outside the model's validity range.

    Raises:
        TemperatureRangeError: If `t` is outside the validity range and
            extrapolation is off.
        DomainError: If extrapolation drives C or tan_delta out of their domain.
    """
    if not math.isfinite(t):
        raise DomainError(f"temperature must be finite, got {t}")
    lo, hi = model.validity
    if not extrapolate and not lo <= t <= hi:
        raise TemperatureRangeError(f"{t:g} degC is outside the validity range [{lo:g}, {hi:g}] degC")
    dt = t - model.t_ref
    c = float(model.c_ref * _capacitance_ratio(model, dt))
    tand = float(model.tand_ref * (1.0 + model.tand_slope_rel * dt))
    if c <= 0:
        raise DomainError(f"capacitance is not positive at {t:g} degC")
    if tand < 0:
        raise DomainError(f"loss tangent is negative at {t:g} degC")
    esr = None
    if frequency is not None:
        if not math.isfinite(frequency) or frequency <= 0:
            raise DomainError(f"frequency must be finite and > 0, got {frequency}")
        esr = tand / (2.0 * math.pi * frequency * c)
    return Evaluation(c, tand, esr)


def relative_response(value_at_t: float, value_at_ref: float) -> float:
    """Magnitude of the change relative to the reference, as a fraction."""
    if value_at_ref == 0 or not math.isfinite(value_at_ref):
        raise DomainError("reference value must be finite and non-zero")
    return abs(value_at_t - value_at_ref) / abs(value_at_ref)


def response_sign(value_at_t: float, value_at_ref: float) -> int:
    """Direction of the change: +1 up, -1 down, 0 unchanged."""
    return int(np.sign(value_at_t - value_at_ref))


@dataclass(frozen=True)
class FitResult:
    model: CompositeResponseModel
    kind: Literal["linear", "exp_decay"]
    rmse: float
    parameters: Dict[str, float]
    diagnostics: Dict[str, Any] = field(default_factory=dict)


def _rmse(residual: np.ndarray) -> float:
    return float(np.sqrt(np.mean(residual**2)))


def _fit_linear(data: TemperatureSeries, t_ref: float, validity: Tuple[float, float]) -> FitResult:
    if len(data) < 3:
        raise InsufficientDataError(f"a linear fit needs at least 3 points, got {len(data)}")
    dt = data.temperatures - t_ref
    a = np.column_stack([np.ones_like(dt), dt])
    (c_ref, slope), *_ = np.linalg.lstsq(a, data.values, rcond=None)
    diagnostics = {"points": len(data), "c_ref": float(c_ref), "slope": float(slope)}
    if not c_ref > 0:
        raise FitFailureError("fitted reference capacitance is not positive", diagnostics)
    try:
        model = CompositeResponseModel(
            kind="linear", c_ref=float(c_ref), t_ref=t_ref, slope_rel=float(slope / c_ref), validity=validity
        )
    except ValidationError as e:
        raise FitFailureError(f"fitted linear model is invalid: {e}", diagnostics) from e
    residual = data.values - a @ np.array([c_ref, slope])
    return FitResult(
        model=model,
        kind="linear",
        rmse=_rmse(residual),
        parameters={"c_ref": model.c_ref, "slope_rel": model.slope_rel},
        diagnostics=diagnostics,
    )


def _profile(data: TemperatureSeries, t_ref: float, tau: float) -> Tuple[float, np.ndarray]:
    """Solve (c_ref, c_ref*rr_max) linearly for a fixed tau; return SSE and coefficients."""
    g = 1.0 - np.exp(-(data.temperatures - t_ref) / tau)
    a = np.column_stack([np.ones_like(g), -g])
    coef, *_ = np.linalg.lstsq(a, data.values, rcond=None)
    residual = data.values - a @ coef
    return float(residual @ residual), coef


def _fit_exp_decay(data: TemperatureSeries, t_ref: float, validity: Tuple[float, float]) -> FitResult:
    if len(data) < 4:
        raise InsufficientDataError(f"an exp_decay fit needs at least 4 points, got {len(data)}")

    def objective(tau: float) -> float:
        return _profile(data, t_ref, tau)[0]

    # coarse log scan picks the basin, golden-section refines inside its bracket
    taus = np.geomspace(*TAU_BOUNDS, _TAU_SCAN)
    sse = np.array([objective(t) for t in taus])
    best = int(np.argmin(sse))
    if 0 < best < taus.size - 1 and sse[best] < min(sse[best - 1], sse[best + 1]):
        bracket = (taus[best - 1], taus[best], taus[best + 1])
        res = minimize_scalar(objective, bracket=bracket, method="golden", options={"xtol": 1e-10})
    else:
        # scan minimum on an edge or tied with a neighbour: no strict bracket
        lo = taus[max(best - 1, 0)]
        hi = taus[min(best + 1, taus.size - 1)]
        res = minimize_scalar(objective, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12 * hi})
    tau = float(res.x)
    _, (c_ref, drop) = _profile(data, t_ref, tau)
    rr_max = float(drop / c_ref) if c_ref != 0 else math.nan
    diagnostics = {
        "points": len(data),
        "tau": tau,
        "c_ref": float(c_ref),
        "rr_max": rr_max,
        "converged": bool(res.success),
        "iterations": int(res.nfev),
    }
    logger.debug(f"exp_decay profile search: {diagnostics}")
    if not res.success:
        raise FitFailureError("tau search did not converge", diagnostics)
    if not c_ref > 0 or not 0 < rr_max < 1:
        raise FitFailureError("fitted exp_decay parameters are out of range", diagnostics)
    model = CompositeResponseModel(
        kind="exp_decay", c_ref=float(c_ref), t_ref=t_ref, rr_max=rr_max, tau=tau, validity=validity
    )
    return FitResult(
        model=model,
        kind="exp_decay",
        rmse=math.sqrt(res.fun / len(data)),
        parameters={"c_ref": model.c_ref, "rr_max": rr_max, "tau": tau},
        diagnostics=diagnostics,
    )


def fit(
    data: TemperatureSeries,
    kind: FitKind = "auto",
    t_ref: Optional[float] = None,
    frequency_tag: Optional[float] = None,
    label: Optional[str] = None,
) -> FitResult:
    """Least-squares fit of a temperature law to (T, C) samples.

    Args:
        data: Samples, capacitance in farads.
        kind: 'linear', 'exp_decay' or 'auto' (lower RMSE wins, ties go to linear).
        t_ref: Reference temperature; defaults to the first sample's temperature.
        frequency_tag: Frequency in Hz the data was measured at.
        label: Name stored on the fitted model.

    Raises:
        InsufficientDataError: Fewer than 3 (linear) or 4 (exp_decay) samples.
        DomainError: Non-positive capacitance samples.
        FitFailureError: The search did not converge or parameters are invalid.
    """
    if np.any(data.values <= 0):
        raise DomainError("capacitance samples must be positive")
    t_ref = float(data.temperatures[0]) if t_ref is None else float(t_ref)
    validity = (float(data.temperatures[0]), float(data.temperatures[-1]))

    if kind == "linear":
        result = _fit_linear(data, t_ref, validity)
    elif kind == "exp_decay":
        result = _fit_exp_decay(data, t_ref, validity)
    elif kind == "auto":
        result = _fit_linear(data, t_ref, validity)
        try:
            other = _fit_exp_decay(data, t_ref, validity)
        except (InsufficientDataError, FitFailureError) as e:
            logger.info(f"exp_decay candidate rejected: {e}")
        else:
            if other.rmse < result.rmse:
                result = other
        logger.debug(f"auto fit selected {result.kind} (rmse {result.rmse:g})")
    else:
        raise DomainError(f"unknown fit kind {kind!r}")

    if frequency_tag is not None or label is not None:
        model = result.model.model_copy(update={"frequency_tag": frequency_tag, "label": label})
        result = FitResult(model, result.kind, result.rmse, result.parameters, result.diagnostics)
    return result


@dataclass(frozen=True)
class CapacitanceSensitivity:
    """Sensitivity over [t_lo, t_hi] under both readings of a 'per degC' figure."""

    t_lo: float
    t_hi: float
    relative_pct_per_degc: float
    absolute_per_degc: float
    sign: int


def capacitance_sensitivity(
    source: Union[CompositeResponseModel, TemperatureSeries], t_lo: float = 20.0, t_hi: float = 50.0
) -> CapacitanceSensitivity:
    """Average capacitance sensitivity between two temperatures.

    `relative_pct_per_degc` is the relative response in percent divided by the
    span; `absolute_per_degc` is the plain slope in farads per degC. A series is
    linearly interpolated at the end points.
    """
    if not t_hi > t_lo:
        raise DomainError("t_hi must exceed t_lo")
    if isinstance(source, TemperatureSeries):
        t = source.temperatures
        if t_lo < t[0] or t_hi > t[-1]:
            raise TemperatureRangeError(f"[{t_lo:g}, {t_hi:g}] degC is outside the series")
        c_lo, c_hi = np.interp([t_lo, t_hi], t, source.values)
    else:
        c_lo = evaluate(source, t_lo).capacitance
        c_hi = evaluate(source, t_hi).capacitance
    span = t_hi - t_lo
    return CapacitanceSensitivity(
        t_lo=t_lo,
        t_hi=t_hi,
        relative_pct_per_degc=100.0 * relative_response(c_hi, c_lo) / span,
        absolute_per_degc=float(c_hi - c_lo) / span,
        sign=response_sign(c_hi, c_lo),
    )


class ModelLibrary:
    """Frequency-tagged models of one device. Lookup is by exact tag only."""

    def __init__(self, models: Sequence[CompositeResponseModel] = ()):
        self._models: Dict[float, CompositeResponseModel] = {}
        for m in models:
            self.add(m)

    def add(self, model: CompositeResponseModel) -> None:
        if model.frequency_tag is None:
            raise DomainError("a library model needs a frequency_tag")
        if model.frequency_tag in self._models:
            logger.warning(f"replacing model tagged {model.frequency_tag:g} Hz")
        self._models[model.frequency_tag] = model

    def get(self, frequency_tag: float) -> CompositeResponseModel:
        try:
            return self._models[float(frequency_tag)]
        except KeyError:
            tags = ", ".join(f"{t:g}" for t in self.tags) or "none"
            raise DomainError(f"no model tagged {frequency_tag:g} Hz (available: {tags})") from None

    @property
    def tags(self) -> List[float]:
        return sorted(self._models)

    def __len__(self) -> int:
        return len(self._models)

    def __iter__(self):
        return iter(self._models[t] for t in self.tags)


def dump_models(models: Iterable[CompositeResponseModel]) -> str:
    """Serialize models to a JSON document."""
    return json.dumps({"models": [m.model_dump(mode="json") for m in models]}, indent=2)


def load_models(text: Union[str, bytes]) -> List[CompositeResponseModel]:
    """Parse a document written by `dump_models`."""
    try:
        doc = json.loads(text)
        return _MODEL_LIST.validate_python(doc["models"])
    except (json.JSONDecodeError, UnicodeDecodeError, KeyError, TypeError, ValidationError) as e:
        raise DomainError(f"not a model document: {e}") from e
