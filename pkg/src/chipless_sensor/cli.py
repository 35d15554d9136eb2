"""Command-line frontend: `chipless-sensor <command> ...`.

Exit codes: 0 success, 2 partial data errors, 64 usage, 65 input-format violation.
Tables go to stdout (or --out) as CSV; diagnostics go to stderr.
"""

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import pandas as pd

from chipless_sensor import version
from chipless_sensor.composite import (
    TemperatureSeries,
    capacitance_sensitivity,
    dump_models,
    fit,
    load_models,
)
from chipless_sensor.configuration import Configuration, build_grid, build_system, load_system_config
from chipless_sensor.coupled import coupling_regime, temperature_sweep
from chipless_sensor.exceptions import (
    ChiplessSensorError,
    ConfigError,
    CsvFormatError,
    DomainError,
    NoCapacitiveRegionError,
    TouchstoneFormatError,
    TrackingFailureError,
)
from chipless_sensor.extraction import extract, sample_sweep
from chipless_sensor.readout import (
    MIN_CURVE_SAMPLES,
    compare_sensitivities,
    find_dips,
    invert,
    load_comparison_table,
    load_curve,
    read_dips,
    relative_response_curve,
    select_peaks,
    sensitivity,
    trace_db,
    track,
    write_dips,
)
from chipless_sensor.rfnet import FrequencyGrid
from chipless_sensor.schemas import CapacitorModel, SystemConfig
from chipless_sensor.touchstone import from_oneport_sweep, from_twoport_sweep, load, save, to_oneport_sweep
from chipless_sensor.utils import read_table, table_to_csv, write_table

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_DATA = 2
EXIT_USAGE = 64
EXIT_FORMAT = 65

DEFAULTS = Configuration()


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _emit(text: str, out: Optional[str]) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8", newline="")


def _parse_band(text: str) -> Tuple[float, float]:
    """Parse 'lo:hi' in MHz into Hz."""
    try:
        lo, hi = (float(x) * 1e6 for x in text.split(":"))
    except ValueError:
        raise UsageError(f"band must look like LO:HI in MHz, got {text!r}") from None
    if not 0 < lo < hi:
        raise UsageError(f"band must satisfy 0 < LO < HI, got {text!r}")
    return lo, hi


# extract


def _extract_row(path: str, band: Optional[Tuple[float, float]], area: Optional[float]) -> dict:
    row = {"file": path, "band_mean_c_pf": None, "band_std_c_pf": None, "srf_mhz": None, "mean_q": None}
    if area is not None:
        row.update(c_per_area_pf_cm2=None, c_std_per_area_pf_cm2=None, tan_delta_per_area_cm2=None)
    try:
        sweep = to_oneport_sweep(load(path))
        if band is None:
            band = (max(DEFAULTS.band[0], sweep.grid.start), min(DEFAULTS.band[1], sweep.grid.stop))
        report = extract(sweep, band, area=area)
    except TouchstoneFormatError as e:
        logger.error(f"{path}: {e}")
        row["status"] = "format_error"
        return row
    except NoCapacitiveRegionError as e:
        logger.error(f"{path}: {e}")
        row["status"] = "no_capacitive_region"
        return row
    except (ChiplessSensorError, OSError) as e:
        logger.error(f"{path}: {e}")
        row["status"] = "error"
        return row

    row.update(
        band_mean_c_pf=report.band_mean_c * 1e12,
        band_std_c_pf=report.band_std_c * 1e12,
        srf_mhz=report.srf / 1e6 if report.srf is not None else None,
        mean_q=report.band_mean_q,
        status="ok",
    )
    if area is not None:
        row.update(
            c_per_area_pf_cm2=report.c_per_area * 1e8,
            c_std_per_area_pf_cm2=report.c_std_per_area * 1e8,
            tan_delta_per_area_cm2=report.tan_delta_per_area * 1e-4,
        )
    return row


def cmd_extract(args) -> int:
    if not args.inputs:
        raise UsageError("extract needs at least one input file")
    if args.jobs < 1:
        raise UsageError("--jobs must be at least 1")
    band = _parse_band(args.band) if args.band else None
    area = args.area * 1e-4 if args.area else None
    # map keeps argument order whatever order the files finish in
    with ThreadPoolExecutor(max_workers=args.jobs) as pool:
        rows = list(pool.map(lambda path: _extract_row(path, band, area), args.inputs))
    _emit(table_to_csv(pd.DataFrame(rows), digits=DEFAULTS.significant_digits), args.out)
    return EXIT_OK if all(r["status"] == "ok" for r in rows) else EXIT_DATA


# simulate


def cmd_simulate(args) -> int:
    config = load_system_config(args.config)
    system = build_system(config)
    grid = build_grid(config)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    digits = DEFAULTS.significant_digits
    floor = DEFAULTS.db_floor
    prominence = config.readout.prominence_db or DEFAULTS.prominence_db

    dips = []
    regimes = []
    for t, sw in temperature_sweep(system, grid, config.temperatures):
        name = f"sweep_T{t:g}"
        if args.format == "s2p":
            save(out_dir / f"{name}.s2p", from_twoport_sweep(sw, comments=(f" coupled system at {t:g} degC",)))
        else:
            df = pd.DataFrame(
                {
                    "f_hz": grid.points,
                    "s11_db": trace_db(sw, "s11", floor),
                    "s22_db": trace_db(sw, "s22", floor),
                    "s21_db": trace_db(sw, "s21", floor),
                }
            )
            write_table(out_dir / f"{name}.csv", df, digits=digits)
        peaks = find_dips(grid, trace_db(sw, "s11", floor), prominence)
        if not peaks:
            logger.warning(f"no reader dip at {t:g} degC")
        dips.append((t, peaks))
        regimes.append(coupling_regime(system, t))
    write_dips(out_dir / "dips.csv", dips, digits=digits)

    status = EXIT_OK
    policy, reference = config.readout.policy, config.readout.reference_frequency
    picked = [None] * len(dips)
    try:
        picked = select_peaks(dips, policy, reference)
        if len(dips) >= MIN_CURVE_SAMPLES:
            track(dips, policy, reference)
    except TrackingFailureError as e:
        logger.error(f"tracking failed at {dips[e.index][0]:g} degC: {e}")
        status = EXIT_DATA

    rows = []
    for (t, peaks), p, regime in zip(dips, picked, regimes):
        rows.append(
            {
                "temperature_c": t,
                "tracked_f_hz": p.frequency if p is not None else None,
                "tracked_depth_db": p.depth_db if p is not None else None,
                "dip_count": len(peaks),
                "coupling_regime": regime.regime,
                "k_crit": regime.k_crit,
            }
        )
    write_table(out_dir / "summary.csv", pd.DataFrame(rows), digits=digits)
    logger.info(f"wrote {len(dips)} sweep(s) to {out_dir}")
    return status


# fit


def cmd_fit(args) -> int:
    df, _ = read_table(args.input, ("temperature_c", "capacitance_f"))
    if "frequency_hz" in df.columns:
        df, _ = read_table(args.input, ("temperature_c", "capacitance_f", "frequency_hz"))
        groups = [(float(tag), g) for tag, g in df.groupby("frequency_hz", sort=True)]
    else:
        groups = [(None, df)]

    status = EXIT_OK
    models = []
    for tag, g in groups:
        g = g.sort_values("temperature_c")
        try:
            series = TemperatureSeries(g["temperature_c"].to_numpy(), g["capacitance_f"].to_numpy())
            result = fit(series, args.kind, t_ref=args.t_ref, frequency_tag=tag, label=args.label)
        except ChiplessSensorError as e:
            where = f" at {tag:g} Hz" if tag is not None else ""
            logger.error(f"fit failed{where}: {e}")
            status = EXIT_DATA
            continue
        params = ", ".join(f"{k}={v:.6g}" for k, v in result.parameters.items())
        logger.info(f"{result.kind} fit (rmse {result.rmse:.3g} F): {params}")
        models.append(result.model)
    _emit(dump_models(models) + "\n", args.out)
    return status


# calibrate


def cmd_calibrate(args) -> int:
    dips = read_dips(args.dips)
    reference = args.reference_mhz * 1e6 if args.reference_mhz else None
    try:
        curve = track(dips, args.policy, reference)
    except TrackingFailureError as e:
        logger.error(f"tracking failed at sample {e.index} ({dips[e.index][0]:g} degC): {e}")
        return EXIT_DATA
    text = table_to_csv(
        pd.DataFrame({"temperature_c": curve.temperatures, "f_r_hz": curve.frequencies}),
        metadata=f"policy={args.policy}",
        digits=DEFAULTS.significant_digits,
    )
    _emit(text, args.out)
    return EXIT_OK


# invert


def cmd_invert(args) -> int:
    curve, _ = load_curve(args.curve)
    status = EXIT_OK
    rows = []
    for f_mhz in args.frequencies_mhz:
        try:
            t = invert(curve, f_mhz * 1e6, mode=args.mode)
        except DomainError as e:
            logger.error(f"{f_mhz:g} MHz: {e}")
            t = None
            status = EXIT_DATA
        rows.append({"f_hz": f_mhz * 1e6, "temperature_c": t})
    _emit(table_to_csv(pd.DataFrame(rows), digits=DEFAULTS.significant_digits), args.out)
    return status


# report


def cmd_report(args) -> int:
    if not (args.curve or args.compare or args.models):
        raise UsageError("report needs a curve, --compare or --models")
    digits = DEFAULTS.significant_digits
    sections: List[str] = []

    if args.curve:
        curve, _ = load_curve(args.curve)
        reference = args.reference_mhz * 1e6 if args.reference_mhz else None
        rep = sensitivity(curve, reference_frequency=reference)
        sections.append(
            table_to_csv(
                pd.DataFrame(
                    [
                        {
                            "t_lo_c": rep.span[0],
                            "t_hi_c": rep.span[1],
                            "delta_f_hz": rep.delta_f,
                            "relative_response": rep.relative_response,
                            "avg_sensitivity_pct_per_degc": rep.avg_sensitivity_pct_per_degc,
                            "slope_mhz_per_degc": rep.slope_mhz_per_degc,
                            "freq_normalized_pct_per_degc": rep.freq_normalized_pct_per_degc,
                            "reference_frequency_hz": rep.reference_frequency,
                        }
                    ]
                ),
                digits=digits,
            )
        )
        if args.responses:
            write_table(args.responses, relative_response_curve(curve, reference), digits=digits)

    if args.models:
        rows = []
        for model in load_models(Path(args.models).read_bytes()):
            s = capacitance_sensitivity(model, args.t_lo, args.t_hi)
            rows.append(
                {
                    "label": model.label or model.kind,
                    "frequency_tag_hz": model.frequency_tag,
                    "t_lo_c": s.t_lo,
                    "t_hi_c": s.t_hi,
                    "relative_pct_per_degc": s.relative_pct_per_degc,
                    "absolute_pf_per_degc": s.absolute_per_degc * 1e12,
                }
            )
        sections.append(table_to_csv(pd.DataFrame(rows), digits=digits))

    status = EXIT_OK
    if args.compare:
        table = load_comparison_table() if args.compare == "bundled" else read_table(
            args.compare, ("f0_mhz", "slope_mhz_per_degc", "printed_pct_per_degc")
        )[0]
        compared = compare_sensitivities(table)
        flagged = [r["reference"] for r in compared if r["flagged"]]
        if flagged:
            logger.warning(f"printed sensitivity deviates >5% from recomputation: {', '.join(flagged)}")
        sections.append(table_to_csv(pd.DataFrame(compared), digits=digits))

    _emit("\n".join(sections), args.out)
    return status


# synth


def cmd_synth(args) -> int:
    model = CapacitorModel(
        capacitance=args.capacitance_pf * 1e-12,
        esr=args.esr,
        parasitic_inductance=args.l_par_nh * 1e-9,
    )
    grid = FrequencyGrid.linspace(args.start_mhz * 1e6, args.stop_mhz * 1e6, args.points)
    comment = f" synthetic capacitor C={args.capacitance_pf:g} pF ESR={args.esr:g} ohm L_par={args.l_par_nh:g} nH"
    doc = from_oneport_sweep(sample_sweep(model, grid), fmt=args.format, unit=args.unit, comments=(comment,))
    save(args.out, doc)
    logger.info(f"wrote {len(grid)} points to {args.out}")
    return EXIT_OK


def cmd_schema(args) -> int:
    _emit(json.dumps(SystemConfig.model_json_schema(), indent=2) + "\n", args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="chipless-sensor", description="Chipless LC temperature sensor toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {version}")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="Debug logging on stderr")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="Only warnings and errors on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="Capacitance, Q and self-resonance from .s1p files")
    p.add_argument("inputs", nargs="*", help="One-port Touchstone files")
    p.add_argument("--band", help="Averaging band LO:HI in MHz (default 1:200, clipped to each sweep)")
    p.add_argument("--area", type=float, help="Plate area in cm^2 for area-normalized columns")
    p.add_argument("--jobs", type=int, default=4, help="Files processed in parallel")
    p.add_argument("--out", help="Output CSV (default stdout)")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("simulate", help="Coupled reader/sensor sweeps over temperature")
    p.add_argument("config", help="System configuration TOML")
    p.add_argument("--out-dir", default=".", help="Directory for sweeps, dips.csv and summary.csv")
    p.add_argument("--format", choices=("s2p", "csv"), default="s2p")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="Fit C(T) models to temperature_c,capacitance_f[,frequency_hz] data")
    p.add_argument("input", help="CSV input")
    p.add_argument("--kind", choices=("linear", "exp_decay", "auto"), default="auto")
    p.add_argument("--t-ref", type=float, help="Reference temperature (default: lowest sample)")
    p.add_argument("--label", help="Label stored on the fitted models")
    p.add_argument("--out", help="Model JSON (default stdout)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("calibrate", help="Track dips into a calibration curve")
    p.add_argument("dips", help="CSV with temperature_c,f_hz,depth_db,prominence_db")
    p.add_argument("--policy", choices=("nearest", "highest_frequency"), default=DEFAULTS.policy)
    p.add_argument("--reference-mhz", type=float, help="Seed frequency for nearest tracking")
    p.add_argument("--out", help="Curve CSV (default stdout)")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("invert", help="Temperatures for measured resonant frequencies")
    p.add_argument("curve", help="Calibration curve CSV")
    p.add_argument("frequencies_mhz", type=float, nargs="+", help="Measured resonances in MHz")
    p.add_argument("--mode", choices=("clamp", "strict"), default=DEFAULTS.invert_mode)
    p.add_argument("--out", help="Output CSV (default stdout)")
    p.set_defaults(func=cmd_invert)

    p = sub.add_parser("report", help="Sensitivity metrics and literature comparison")
    p.add_argument("curve", nargs="?", help="Calibration curve CSV")
    p.add_argument("--reference-mhz", type=float, help="Reference resonance for normalization")
    p.add_argument("--responses", help="Write per-sample relative responses to this CSV")
    p.add_argument("--models", help="Model JSON; adds capacitance sensitivity per model")
    p.add_argument("--t-lo", type=float, default=20.0)
    p.add_argument("--t-hi", type=float, default=50.0)
    p.add_argument(
        "--compare", nargs="?", const="bundled", help="Comparison table CSV (bundled table if no path)"
    )
    p.add_argument("--out", help="Output CSV (default stdout)")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("synth", help="Write a synthetic capacitor .s1p")
    p.add_argument("out", help="Output .s1p path")
    p.add_argument("--capacitance-pf", type=float, required=True)
    p.add_argument("--esr", type=float, default=0.0, help="ohms")
    p.add_argument("--l-par-nh", type=float, default=0.0)
    p.add_argument("--start-mhz", type=float, default=10.0)
    p.add_argument("--stop-mhz", type=float, default=600.0)
    p.add_argument("--points", type=int, default=1181)
    p.add_argument("--format", choices=("RI", "MA", "DB"), default="RI")
    p.add_argument("--unit", choices=("HZ", "KHZ", "MHZ", "GHZ"), default="MHZ")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("schema", help="Print the system configuration JSON schema")
    p.add_argument("--out", help="Output file (default stdout)")
    p.set_defaults(func=cmd_schema)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr, force=True)

    try:
        return args.func(args)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        logger.error(str(e))
        return EXIT_USAGE
    except ConfigError as e:
        logger.error(f"invalid configuration: {e}")
        return EXIT_FORMAT
    except (CsvFormatError, TouchstoneFormatError) as e:
        logger.error(f"malformed input: {e}")
        return EXIT_FORMAT
    except (ChiplessSensorError, OSError) as e:
        logger.error(str(e))
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
