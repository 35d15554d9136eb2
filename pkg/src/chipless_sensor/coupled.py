"""Reader and sensor series-RLC loops coupled by a mutual inductance.

Mesh equations, with w = 2*pi*f:

    Z11 = R_r + jwL_r + 1/(jwC_r)
    Z22 = R_s + ESR(T) + jwL_s + 1/(jwC(T))
    Z12 = Z21 = jwM,          M = k * sqrt(L_r * L_s)

A coil self-capacitance sits in parallel with its own R-L branch. It is applied
to the coupled coil matrix in the admittance domain before the series
capacitors are added.
"""

import logging
import math
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from chipless_sensor.composite import evaluate
from chipless_sensor.exceptions import DomainError
from chipless_sensor.rfnet import FrequencyGrid, TwoPortSweep, zmatrix_to_smatrix
from chipless_sensor.schemas import CoilParams, CoupledSystem, ReaderLoop, SensorCapacitor, SensorLoop

logger = logging.getLogger(__name__)

CRITICAL_DEAD_BAND = 0.02


def _positive(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value <= 0:
        raise DomainError(f"{name} must be finite and > 0, got {value}")
    return value


def resonant_frequency(l: float, c: float) -> float:
    """Series LC resonance 1/(2*pi*sqrt(l*c)) in Hz."""
    l = _positive("inductance", l)
    c = _positive("capacitance", c)
    return 1.0 / (2.0 * math.pi * math.sqrt(l * c))


def solve_tuning_capacitor(l: float, f_target: float) -> float:
    """Series capacitor that tunes inductance `l` to `f_target`."""
    l = _positive("inductance", l)
    f_target = _positive("target frequency", f_target)
    return 1.0 / ((2.0 * math.pi * f_target) ** 2 * l)


def sensor_capacitance_for_frequency(coil: CoilParams, f_target: float) -> float:
    """Series capacitor that puts a coil's loop resonance at `f_target`.

    The coil's self-capacitance is included: the L || Cp branch is inductive
    only below its own parallel resonance.
    """
    f_target = _positive("target frequency", f_target)
    w2 = (2.0 * math.pi * f_target) ** 2
    margin = 1.0 - w2 * coil.inductance * coil.self_capacitance
    if margin <= 0:
        raise DomainError(f"{f_target:g} Hz is above the coil's self-resonance")
    return margin / (w2 * coil.inductance)


class SensorState(NamedTuple):
    capacitance: float
    tan_delta: float
    esr: float


def sensor_state(capacitor: SensorCapacitor, t: Optional[float]) -> SensorState:
    """Capacitance and losses of the sensing capacitor at temperature `t`."""
    if capacitor.model is None:
        return SensorState(capacitor.capacitance, capacitor.tan_delta, capacitor.esr)
    if t is None:
        raise DomainError("a temperature is required for a model-based sensor capacitor")
    c, tand, _ = evaluate(capacitor.model, t)
    return SensorState(c, tand, 0.0)


def _sensor_esr(state: SensorState, w: np.ndarray) -> np.ndarray:
    return state.esr + state.tan_delta / (w * state.capacitance)


def impedance_matrix(system: CoupledSystem, grid: FrequencyGrid, t: Optional[float] = None) -> np.ndarray:
    """Stack of 2x2 loop impedance matrices, shape (len(grid), 2, 2)."""
    w = grid.omega
    rc, sc = system.reader.coil, system.sensor.coil
    state = sensor_state(system.sensor.capacitor, t)
    jwm = 1j * w * system.mutual_inductance

    z = np.empty((len(grid), 2, 2), dtype=complex)
    z[:, 0, 0] = rc.resistance + 1j * w * rc.inductance
    z[:, 1, 1] = sc.resistance + 1j * w * sc.inductance
    z[:, 0, 1] = jwm
    z[:, 1, 0] = jwm

    if rc.self_capacitance > 0 or sc.self_capacitance > 0:
        with np.errstate(divide="ignore", invalid="ignore"):
            det = z[:, 0, 0] * z[:, 1, 1] - z[:, 0, 1] * z[:, 1, 0]
            y = np.empty_like(z)
            y[:, 0, 0] = z[:, 1, 1] / det + 1j * w * rc.self_capacitance
            y[:, 1, 1] = z[:, 0, 0] / det + 1j * w * sc.self_capacitance
            y[:, 0, 1] = -z[:, 0, 1] / det
            y[:, 1, 0] = -z[:, 1, 0] / det
            det = y[:, 0, 0] * y[:, 1, 1] - y[:, 0, 1] * y[:, 1, 0]
            z[:, 0, 0] = y[:, 1, 1] / det
            z[:, 1, 1] = y[:, 0, 0] / det
            z[:, 0, 1] = -y[:, 0, 1] / det
            z[:, 1, 0] = -y[:, 1, 0] / det

    z[:, 0, 0] += 1.0 / (1j * w * system.reader.tuning_capacitance)
    z[:, 1, 1] += _sensor_esr(state, w) + 1.0 / (1j * w * state.capacitance)
    return z


def sweep(system: CoupledSystem, grid: FrequencyGrid, t: Optional[float] = None) -> TwoPortSweep:
    """Simulate S-parameters of the coupled system with both ports terminated.

    Args:
        system: Reader, sensor and coupling.
        grid: Frequencies to solve at.
        t: Temperature in degC; required when the sensor capacitor is a model.

    Returns:
        A two-port sweep; singular points are listed in `errors` and hold NaN.
    """
    z = impedance_matrix(system, grid, t)
    result = zmatrix_to_smatrix(grid, z, system.port_impedance, on_singular="mark")
    if result.errors:
        logger.warning(f"{len(result.errors)} singular point(s) in sweep at T={t}")
    return result


def temperature_sweep(
    system: CoupledSystem, grid: FrequencyGrid, temperatures: Sequence[float]
) -> List[Tuple[float, TwoPortSweep]]:
    """One sweep per temperature, in input order."""
    if system.sensor.capacitor.model is None:
        logger.info("sensor capacitor is fixed; every temperature gives the same sweep")
    out = []
    for t in temperatures:
        logger.debug(f"simulating T={t:g} degC")
        out.append((float(t), sweep(system, grid, t)))
    return out


def _loop_resonances(system: CoupledSystem, t: Optional[float]) -> Tuple[float, float, SensorState]:
    state = sensor_state(system.sensor.capacitor, t)
    f_r = resonant_frequency(system.reader.coil.inductance, system.reader.tuning_capacitance)
    f_s = resonant_frequency(system.sensor.coil.inductance, state.capacitance)
    return f_r, f_s, state


def loaded_quality_factors(system: CoupledSystem, t: Optional[float] = None) -> Tuple[float, float]:
    """Loaded Q of the reader and sensor loops at their own resonances.

    Each loop's loss includes its coil resistance, capacitor ESR and the port
    termination.
    """
    f_r, f_s, state = _loop_resonances(system, t)
    z0 = system.port_impedance
    w_r = 2.0 * math.pi * f_r
    w_s = 2.0 * math.pi * f_s
    r_reader = system.reader.coil.resistance + z0
    r_sensor = system.sensor.coil.resistance + float(_sensor_esr(state, np.float64(w_s))) + z0
    return w_r * system.reader.coil.inductance / r_reader, w_s * system.sensor.coil.inductance / r_sensor


class CouplingRegime(NamedTuple):
    regime: str
    k_crit: float
    q_reader: float
    q_sensor: float


def coupling_regime(system: CoupledSystem, t: Optional[float] = None) -> CouplingRegime:
    """Classify k against the critical coupling 1/sqrt(Q_reader * Q_sensor).

    Values within 2% of k_crit (boundary included) count as critical.
    """
    q_r, q_s = loaded_quality_factors(system, t)
    k_crit = 1.0 / math.sqrt(q_r * q_s)
    if abs(system.k - k_crit) <= CRITICAL_DEAD_BAND * k_crit:
        regime = "critical"
    elif system.k < k_crit:
        regime = "under"
    else:
        regime = "over"
    logger.debug(f"k={system.k:g} k_crit={k_crit:g} -> {regime}")
    return CouplingRegime(regime, k_crit, q_r, q_s)


def reflected_impedance(system: CoupledSystem, grid: FrequencyGrid, t: Optional[float] = None) -> np.ndarray:
    """Impedance the terminated sensor loop adds in series with the reader loop: (wM)^2 / (Z22 + z0)."""
    z = impedance_matrix(system, grid, t)
    return -(z[:, 0, 1] * z[:, 1, 0]) / (z[:, 1, 1] + system.port_impedance)


def example_system(k: float = 0.05, sensor_capacitance: float = 66e-12) -> CoupledSystem:
    """Reader tuned to 6.78 MHz with 66 pF on 8.35 uH, unloaded Q near 100 on both loops."""
    inductance = 8.35e-6
    c_r = 66e-12
    resistance = 2.0 * math.pi * resonant_frequency(inductance, c_r) * inductance / 100.0
    coil = CoilParams(inductance=inductance, resistance=resistance)
    return CoupledSystem(
        reader=ReaderLoop(coil=coil, tuning_capacitance=c_r),
        sensor=SensorLoop(coil=coil, capacitor=SensorCapacitor(capacitance=sensor_capacitance)),
        k=k,
    )
