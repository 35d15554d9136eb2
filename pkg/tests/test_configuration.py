from pathlib import Path

import pytest

from chipless_sensor.composite import dump_models
from chipless_sensor.configuration import (
    Configuration,
    build_grid,
    build_system,
    load_system_config,
    parse_system_config,
)
from chipless_sensor.exceptions import ConfigError
from chipless_sensor.schemas import CompositeResponseModel

CONFIGS = Path(__file__).parent.parent / "configs"


def base_document():
    return {
        "k": 0.05,
        "reader": {"inductance": 8.35e-6, "resistance": 3.56, "series_capacitance": 66e-12},
        "sensor": {"inductance": 8.35e-6, "resistance": 3.56, "capacitor": {"capacitance": 66e-12}},
        "grid": {"start": 5e6, "stop": 9e6, "points": 401},
    }


def test_defaults():
    config = Configuration()
    assert config.band == (1e6, 200e6)
    assert config.policy == "highest_frequency"
    assert config.invert_mode == "clamp"
    assert config.significant_digits == 9
    assert config.prominence_db == 1.0
    assert config.db_floor == -300.0


def test_runnable_config_overrides():
    config = Configuration.from_runnable_config({"configurable": {"prominence_db": 0.5, "unrelated": 1}})
    assert config.prominence_db == 0.5
    assert config.db_floor == -300.0
    assert Configuration.from_runnable_config(None) == Configuration()


def test_example_document_builds():
    config = load_system_config(CONFIGS / "example_system.toml")
    system = build_system(config)
    assert system.k == 0.002
    assert system.reader.tuning_capacitance == 66e-12
    assert system.sensor.capacitor.capacitance == 66e-12
    assert config.temperatures == [20.0]
    grid = build_grid(config)
    assert len(grid) == 4001
    assert grid.step() == pytest.approx(1e3)


def test_off_tuned_document_solves_reader_capacitor():
    config = load_system_config(CONFIGS / "off_tuned_pdms_cf.toml")
    system = build_system(config)
    assert system.reader.tuning_capacitance == pytest.approx(66e-12, rel=1e-2)
    model = system.sensor.capacitor.model
    assert model.kind == "exp_decay"
    assert model.rr_max == 0.855
    assert config.readout.policy == "highest_frequency"
    assert len(config.temperatures) == 10


def test_document_defaults():
    config = parse_system_config(base_document())
    assert config.port_impedance == 50.0
    assert config.temperatures == [20.0]
    assert config.readout.prominence_db is None


@pytest.mark.parametrize(
    "mutate, key_path",
    [
        (lambda d: d["reader"].update(colour="red"), "reader.colour"),
        (lambda d: d.pop("grid"), "grid"),
        (lambda d: d["grid"].update(points=3), "grid.points"),
        (lambda d: d["grid"].update(stop=1e6), "grid"),
        (lambda d: d["reader"].update(f_target=6.78e6), "reader"),
        (lambda d: d.update(k=1.0), "k"),
        (lambda d: d.update(temperatures=[20.0, 20.0]), "temperatures"),
        (lambda d: d["sensor"]["capacitor"].update(model_file="m.json"), "sensor.capacitor"),
    ],
)
def test_schema_violations_name_the_key(mutate, key_path):
    doc = base_document()
    mutate(doc)
    with pytest.raises(ConfigError) as exc:
        parse_system_config(doc)
    assert exc.value.key_path == key_path


def test_invalid_toml(tmp_path):
    path = tmp_path / "broken.toml"
    path.write_text("k = [\n")
    with pytest.raises(ConfigError):
        load_system_config(path)


def write_model_document(tmp_path, tag):
    models = tmp_path / "models.json"
    model = CompositeResponseModel(
        kind="exp_decay", c_ref=45.8e-12, rr_max=0.855, tau=15.0, frequency_tag=10e6, label="PDMS-CF"
    )
    models.write_text(dump_models([model]))
    config = tmp_path / "system.toml"
    config.write_text(
        "k = 0.15\n"
        "[reader]\ninductance = 8.35e-6\nf_target = 6.78e6\n"
        "[sensor]\ninductance = 8.35e-6\n"
        f'[sensor.capacitor]\nmodel_file = "models.json"\nfrequency_tag = {tag}\n'
        "[grid]\nstart = 5e6\nstop = 25e6\npoints = 101\n"
    )
    return config


def test_model_file_is_resolved_by_exact_tag(tmp_path):
    config = load_system_config(write_model_document(tmp_path, "10e6"))
    assert config.sensor.capacitor.model_file is None
    assert config.sensor.capacitor.model.label == "PDMS-CF"
    assert build_system(config).sensor.capacitor.model.tau == 15.0


def test_model_file_with_unknown_tag(tmp_path):
    with pytest.raises(ConfigError) as exc:
        load_system_config(write_model_document(tmp_path, "11e6"))
    assert exc.value.key_path == "sensor.capacitor.frequency_tag"


def test_missing_model_file(tmp_path):
    path = write_model_document(tmp_path, "10e6")
    (tmp_path / "models.json").unlink()
    with pytest.raises(ConfigError) as exc:
        load_system_config(path)
    assert exc.value.key_path == "sensor.capacitor.model_file"


def test_non_utf8_document(tmp_path):
    path = tmp_path / "latin1.toml"
    path.write_bytes(b"k = 0.05\n# r\xe9glage\n")
    with pytest.raises(ConfigError, match="line 2"):
        load_system_config(path)


def test_non_utf8_model_file(tmp_path):
    path = write_model_document(tmp_path, "10e6")
    (tmp_path / "models.json").write_bytes(b'{"models": [\xff]}')
    with pytest.raises(ConfigError) as exc:
        load_system_config(path)
    assert exc.value.key_path == "sensor.capacitor.model_file"
