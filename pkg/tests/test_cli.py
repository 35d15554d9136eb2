import io
import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from chipless_sensor import cli
from chipless_sensor.cli import main
from chipless_sensor.composite import load_models
from chipless_sensor.configuration import Configuration
from chipless_sensor.coupled import resonant_frequency
from chipless_sensor.readout import CalibrationCurve, ResonancePeak, save_curve, write_dips

CONFIGS = Path(__file__).parent.parent / "configs"


def run(capsys, *argv):
    code = main(["-q", *map(str, argv)])
    out, err = capsys.readouterr()
    return code, out, err


def csv(text):
    return pd.read_csv(io.StringIO(text), comment="#")


def synth(capsys, path, *extra):
    code, _, _ = run(capsys, "synth", path, *extra)
    assert code == 0
    return path


def test_extract_ideal_capacitor(tmp_path, capsys):
    path = synth(capsys, tmp_path / "c35.s1p", "--capacitance-pf", 35, "--esr", 1.0)
    code, out, _ = run(capsys, "extract", path)
    assert code == 0
    row = csv(out).iloc[0]
    assert row["status"] == "ok"
    assert row["band_mean_c_pf"] == pytest.approx(35.0, rel=1e-3)
    assert np.isnan(row["srf_mhz"])


def test_extract_reports_srf_and_area(tmp_path, capsys):
    path = synth(capsys, tmp_path / "pdms.s1p", "--capacitance-pf", 35, "--esr", 1, "--l-par-nh", 8.97)
    code, out, _ = run(capsys, "extract", path, "--band", "10:100", "--area", 4)
    assert code == 0
    row = csv(out).iloc[0]
    assert row["srf_mhz"] == pytest.approx(284.0, abs=0.5)
    assert row["c_per_area_pf_cm2"] == pytest.approx(row["band_mean_c_pf"] / 4, rel=1e-8)


def test_extract_without_files_is_usage_error(capsys):
    code, _, _ = run(capsys, "extract")
    assert code == 64


def test_extract_keeps_going_past_bad_files(tmp_path, capsys):
    good = synth(capsys, tmp_path / "good.s1p", "--capacitance-pf", 10)
    inductive = synth(capsys, tmp_path / "ind.s1p", "--capacitance-pf", 35, "--l-par-nh", 100)
    broken = tmp_path / "broken.s1p"
    broken.write_text("# HZ S RI R 50\n1 0 0\n2 0 x\n")
    code, out, err = run(capsys, "extract", broken, good, inductive, "--band", "100:200", "--jobs", 2)
    assert code == 2
    table = csv(out)
    assert list(table["file"]) == [str(broken), str(good), str(inductive)]
    assert list(table["status"]) == ["format_error", "ok", "no_capacitive_region"]
    assert "line 3" in err


def test_simulate_example_system(tmp_path, capsys):
    code, _, _ = run(capsys, "simulate", CONFIGS / "example_system.toml", "--out-dir", tmp_path)
    assert code == 0
    assert (tmp_path / "sweep_T20.s2p").exists()
    summary = csv((tmp_path / "summary.csv").read_text())
    assert summary["tracked_f_hz"].iloc[0] == pytest.approx(resonant_frequency(8.35e-6, 66e-12), abs=1e3)
    assert summary["coupling_regime"].iloc[0] == "under"


def test_simulate_is_deterministic(tmp_path, capsys):
    for name in ("a", "b"):
        code, _, _ = run(capsys, "simulate", CONFIGS / "example_system.toml", "--out-dir", tmp_path / name)
        assert code == 0
    for name in ("sweep_T20.s2p", "dips.csv", "summary.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_simulate_uncoupled_csv_floor(tmp_path, capsys):
    text = (CONFIGS / "example_system.toml").read_text().replace("k = 0.002", "k = 0.0")
    config = tmp_path / "k0.toml"
    config.write_text(text)
    code, _, _ = run(capsys, "simulate", config, "--out-dir", tmp_path, "--format", "csv")
    assert code == 0
    sweep = csv((tmp_path / "sweep_T20.csv").read_text())
    assert list(sweep.columns) == ["f_hz", "s11_db", "s22_db", "s21_db"]
    assert (sweep["s21_db"] <= -300).all()


def test_simulate_off_tuned_readout_rises(tmp_path, capsys):
    code, _, _ = run(capsys, "simulate", CONFIGS / "off_tuned_pdms_cf.toml", "--out-dir", tmp_path)
    assert code == 0
    summary = csv((tmp_path / "summary.csv").read_text())
    assert len(summary) == 10
    assert np.all(np.diff(summary["tracked_f_hz"].to_numpy()) > 0)

    dips = csv((tmp_path / "dips.csv").read_text()).groupby("temperature_c")["f_hz"]
    assert len(dips) == 10
    assert (dips.size() == 2).all()
    lower, upper = dips.min(), dips.max()
    assert lower.to_numpy() == pytest.approx(6.76e6, abs=50e3)
    assert lower.max() - lower.min() < 50e3
    assert np.all(np.diff(upper.to_numpy()) > 0)
    assert (upper > 8e6).all()


def test_simulate_uses_run_defaults_when_document_omits_them(tmp_path, capsys, monkeypatch):
    text = (CONFIGS / "example_system.toml").read_text()
    config = tmp_path / "bare.toml"
    config.write_text(text.replace("k = 0.002", "k = 0.0").replace("prominence_db = 0.5\n", ""))
    monkeypatch.setattr(cli, "DEFAULTS", Configuration(prominence_db=5.0, db_floor=-200.0))
    code, _, err = run(capsys, "simulate", config, "--out-dir", tmp_path, "--format", "csv")
    assert code == 2
    assert "no dip at 20 degC" in err
    summary = csv((tmp_path / "summary.csv").read_text())
    assert summary["dip_count"].iloc[0] == 0
    sweep = csv((tmp_path / "sweep_T20.csv").read_text())
    assert sweep["s21_db"].min() == -200.0


def test_simulate_rejects_unknown_key(tmp_path, capsys):
    config = tmp_path / "bad.toml"
    config.write_text((CONFIGS / "example_system.toml").read_text().replace("[grid]", "[grid]\ncolour = 1"))
    code, _, err = run(capsys, "simulate", config, "--out-dir", tmp_path)
    assert code == 65
    assert "grid.colour" in err


def test_fit_recovers_generated_model(tmp_path, capsys):
    t = np.arange(20.0, 111.0, 10.0)
    c = 45.8e-12 * (1 - 0.8 * (1 - np.exp(-(t - 20.0) / 20.0)))
    data = tmp_path / "cap.csv"
    data.write_text("temperature_c,capacitance_f\n" + "".join(f"{float(a)!r},{float(b)!r}\n" for a, b in zip(t, c)))
    out = tmp_path / "models.json"
    code, _, _ = run(capsys, "fit", data, "--kind", "exp_decay", "--label", "PDMS-CF", "--out", out)
    assert code == 0
    (model,) = load_models(out.read_text())
    assert model.rr_max == pytest.approx(0.8, rel=1e-4)
    assert model.tau == pytest.approx(20.0, rel=1e-4)
    assert model.label == "PDMS-CF"


def test_fit_groups_by_frequency(tmp_path, capsys):
    rows = ["temperature_c,capacitance_f,frequency_hz"]
    for tag, slope in ((1e6, -0.002), (10e6, -0.001)):
        rows += [f"{t},{4e-12 * (1 + slope * (t - 20))!r},{tag}" for t in (20, 40, 60, 80)]
    data = tmp_path / "cap.csv"
    data.write_text("\n".join(rows) + "\n")
    code, out, _ = run(capsys, "fit", data, "--kind", "linear")
    assert code == 0
    models = load_models(out)
    assert [m.frequency_tag for m in models] == [1e6, 10e6]
    assert models[0].slope_rel == pytest.approx(-0.002, rel=1e-9)


def test_fit_malformed_csv_names_line(tmp_path, capsys):
    data = tmp_path / "cap.csv"
    data.write_text("temperature_c,capacitance_f\n20,1e-12\n30,abc\n")
    code, _, err = run(capsys, "fit", data)
    assert code == 65
    assert "line 3" in err


def peak(f):
    return ResonancePeak(frequency=f, depth_db=-10.0, prominence_db=5.0, index=0)


def test_calibrate_then_invert(tmp_path, capsys):
    dips = tmp_path / "dips.csv"
    write_dips(
        dips,
        [
            (20.0, [peak(6.7e6), peak(8.26e6)]),
            (50.0, [peak(6.7e6), peak(9.8e6)]),
            (80.0, [peak(6.7e6), peak(10.6e6)]),
            (110.0, [peak(6.7e6), peak(10.96e6)]),
        ],
    )
    curve = tmp_path / "curve.csv"
    code, _, _ = run(capsys, "calibrate", dips, "--out", curve)
    assert code == 0
    assert curve.read_text().startswith("# policy=highest_frequency\n")

    code, out, _ = run(capsys, "invert", curve, 9.8, 5.0)
    assert code == 0
    table = csv(out)
    assert list(table.columns) == ["f_hz", "temperature_c"]
    assert list(table["temperature_c"]) == [50.0, 20.0]

    code, _, _ = run(capsys, "invert", curve, 5.0, "--mode", "strict")
    assert code == 2

    code, _, err = run(capsys, "calibrate", dips, "--policy", "nearest", "--reference-mhz", 6.7)
    assert code == 2
    assert "50 degC" in err


def test_report_headline_sensitivity(tmp_path, capsys):
    curve = tmp_path / "curve.csv"
    save_curve(curve, CalibrationCurve.from_samples([(20, 7.03e6), (65, 8.5e6), (110, 9.41e6)]))
    responses = tmp_path / "responses.csv"
    code, out, _ = run(capsys, "report", curve, "--responses", responses)
    assert code == 0
    row = csv(out).iloc[0]
    assert round(row["avg_sensitivity_pct_per_degc"], 2) == 0.38
    assert csv(responses.read_text())["relative_response"].iloc[-1] == pytest.approx(0.3385, abs=5e-4)


def test_report_compare_bundled(capsys):
    code, out, _ = run(capsys, "report", "--compare")
    assert code == 0
    table = csv(out)
    assert len(table) == 16
    s1 = table[table["reference"] == "S1"].iloc[0]
    assert s1["recomputed_pct_per_degc"] == pytest.approx(0.0105, abs=5e-5)
    assert not s1["flagged"]
    assert table["flagged"].any()


def test_report_models_both_readings(tmp_path, capsys):
    models = tmp_path / "models.json"
    models.write_text(
        json.dumps({"models": [{"kind": "linear", "c_ref": 4e-12, "slope_rel": -0.0018, "label": "PU"}]})
    )
    code, out, _ = run(capsys, "report", "--models", models)
    assert code == 0
    row = csv(out).iloc[0]
    assert row["relative_pct_per_degc"] == pytest.approx(0.18, rel=1e-6)
    assert row["absolute_pf_per_degc"] == pytest.approx(-0.0072, rel=1e-6)


def test_report_needs_something(capsys):
    code, _, _ = run(capsys, "report")
    assert code == 64


def test_invert_malformed_curve(tmp_path, capsys):
    curve = tmp_path / "curve.csv"
    curve.write_text("temperature_c,f_r_hz\n20,7e6\n30,oops\n40,8e6\n")
    code, _, err = run(capsys, "invert", curve, 7.5)
    assert code == 65
    assert "line 3" in err


def test_invert_non_utf8_curve(tmp_path, capsys):
    curve = tmp_path / "curve.csv"
    curve.write_bytes(b"temperature_c,f_r_hz\n20,7e6\n30,7.5e6\n40,8e6\xe9\n")
    code, _, err = run(capsys, "invert", curve, 7.5)
    assert code == 65
    assert "line 4" in err


def test_simulate_non_utf8_document(tmp_path, capsys):
    config = tmp_path / "latin1.toml"
    config.write_bytes((CONFIGS / "example_system.toml").read_bytes() + b"# r\xe9glage\n")
    code, _, err = run(capsys, "simulate", config, "--out-dir", tmp_path)
    assert code == 65
    assert "UTF-8" in err



def test_bad_arguments_exit_64():
    with pytest.raises(SystemExit) as exc:
        main(["invert"])
    assert exc.value.code == 64


def test_schema_lists_sections(capsys):
    code, out, _ = run(capsys, "schema")
    assert code == 0
    schema = json.loads(out)
    assert {"reader", "sensor", "k", "grid"} <= set(schema["properties"])
