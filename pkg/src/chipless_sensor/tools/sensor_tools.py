"""
Sensor tools for agents: tuning, extraction, inversion and sensitivity reports.
Every tool returns formatted text and reports failures in that text.
"""

import logging
from typing import Optional

from langchain_core.runnables import RunnableConfig
from langchain_core.tools import tool

from chipless_sensor.configuration import Configuration
from chipless_sensor.coupled import resonant_frequency, solve_tuning_capacitor
from chipless_sensor.exceptions import ChiplessSensorError
from chipless_sensor.extraction import extract
from chipless_sensor.readout import invert, load_curve, sensitivity
from chipless_sensor.touchstone import load, to_oneport_sweep
from chipless_sensor.utils import format_key_values_markdown

logger = logging.getLogger(__name__)


@tool
def resonant_frequency_tool(inductance_h: float, capacitance_f: float) -> str:
    """Compute the series LC resonant frequency.

    Args:
        inductance_h: Inductance in henries
        capacitance_f: Capacitance in farads

    Returns:
        String with the resonant frequency
    """
    try:
        f = resonant_frequency(inductance_h, capacitance_f)
        return f"Resonant frequency: {f / 1e6:.6g} MHz ({f:.9g} Hz)"
    except ChiplessSensorError as e:
        logger.error(f"resonant_frequency_tool failed: {e}")
        return f"Error computing resonant frequency: {e}"


@tool
def tuning_capacitor_tool(inductance_h: float, f_target_hz: float) -> str:
    """Size the series capacitor that tunes a coil to a target frequency.

    Args:
        inductance_h: Coil inductance in henries
        f_target_hz: Target resonant frequency in Hz

    Returns:
        String with the capacitor value
    """
    try:
        c = solve_tuning_capacitor(inductance_h, f_target_hz)
        return f"Tuning capacitor: {c * 1e12:.6g} pF for {f_target_hz / 1e6:.6g} MHz"
    except ChiplessSensorError as e:
        logger.error(f"tuning_capacitor_tool failed: {e}")
        return f"Error sizing tuning capacitor: {e}"


@tool
def extract_capacitor_tool(
    path: str,
    config: RunnableConfig,
    f_lo_hz: Optional[float] = None,
    f_hi_hz: Optional[float] = None,
    area_cm2: Optional[float] = None,
) -> str:
    """Extract capacitance, quality factor and self-resonance from a one-port Touchstone file.

    Args:
        path: Path to the .s1p file
        f_lo_hz: Lower edge of the averaging band (default from configuration)
        f_hi_hz: Upper edge of the averaging band (default from configuration)
        area_cm2: Plate area in cm^2 for area-normalized capacitance

    Returns:
        Markdown summary of the extraction
    """
    defaults = Configuration.from_runnable_config(config)
    try:
        sweep = to_oneport_sweep(load(path))
        band = (
            f_lo_hz or max(defaults.band[0], sweep.grid.start),
            f_hi_hz or min(defaults.band[1], sweep.grid.stop),
        )
        report = extract(sweep, band, area=area_cm2 * 1e-4 if area_cm2 else None)
    except (ChiplessSensorError, OSError) as e:
        logger.error(f"extract_capacitor_tool failed for {path}: {e}")
        return f"Error extracting {path}: {e}"
    items = [
        ("Band", f"{band[0] / 1e6:g}-{band[1] / 1e6:g} MHz"),
        ("Mean capacitance (pF)", report.band_mean_c * 1e12),
        ("Std capacitance (pF)", report.band_std_c * 1e12),
        ("Mean Q", report.band_mean_q),
        ("Mean loss tangent", report.band_mean_tan_delta),
        ("Self-resonance (MHz)", report.srf / 1e6 if report.srf is not None else "none in sweep"),
    ]
    if report.c_per_area is not None:
        items.append(("Capacitance per area (pF/cm^2)", report.c_per_area * 1e12 * 1e-4))
    return format_key_values_markdown(f"Capacitor extraction: {path}", items)


@tool
def invert_temperature_tool(curve_path: str, f_measured_hz: float, config: RunnableConfig, mode: Optional[str] = None) -> str:
    """Read temperature off a calibration curve for a measured resonant frequency.

    Args:
        curve_path: CSV calibration curve (temperature_c, f_r_hz)
        f_measured_hz: Measured resonance in Hz
        mode: 'clamp' or 'strict' (default from configuration)

    Returns:
        String with the temperature
    """
    mode = mode or Configuration.from_runnable_config(config).invert_mode
    try:
        curve, _ = load_curve(curve_path)
        t = invert(curve, f_measured_hz, mode=mode)
        return f"Temperature: {t:.4g} degC at {f_measured_hz / 1e6:.6g} MHz ({mode})"
    except (ChiplessSensorError, OSError) as e:
        logger.error(f"invert_temperature_tool failed: {e}")
        return f"Error inverting calibration curve: {e}"


@tool
def sensitivity_report_tool(curve_path: str, reference_frequency_hz: Optional[float] = None) -> str:
    """Summarize the sensitivity of a calibration curve.

    Args:
        curve_path: CSV calibration curve (temperature_c, f_r_hz)
        reference_frequency_hz: Normalization frequency (default: f_r at the lowest temperature)

    Returns:
        Markdown sensitivity summary
    """
    try:
        curve, _ = load_curve(curve_path)
        rep = sensitivity(curve, reference_frequency=reference_frequency_hz)
    except (ChiplessSensorError, OSError) as e:
        logger.error(f"sensitivity_report_tool failed: {e}")
        return f"Error computing sensitivity: {e}"
    return format_key_values_markdown(
        "Sensitivity",
        [
            ("Span (degC)", f"{rep.span[0]:g}-{rep.span[1]:g}"),
            ("Delta f (MHz)", rep.delta_f / 1e6),
            ("Relative response (%)", 100.0 * rep.relative_response),
            ("Average sensitivity (%/degC)", rep.avg_sensitivity_pct_per_degc),
            ("Slope (MHz/degC)", rep.slope_mhz_per_degc),
            ("Frequency-normalized (%/degC)", rep.freq_normalized_pct_per_degc),
        ],
    )
