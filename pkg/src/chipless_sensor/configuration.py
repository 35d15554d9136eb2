"""Run defaults and the system configuration document."""

import logging
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Optional, Tuple, Union

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from langchain_core.runnables import RunnableConfig
from pydantic import ValidationError

from chipless_sensor.composite import ModelLibrary, load_models
from chipless_sensor.coupled import solve_tuning_capacitor
from chipless_sensor.exceptions import ConfigError, DomainError
from chipless_sensor.readout import DEFAULT_PROMINENCE_DB
from chipless_sensor.rfnet import DB_FLOOR, FrequencyGrid
from chipless_sensor.schemas import (
    CoilParams,
    CoupledSystem,
    ReaderLoop,
    SensorCapacitor,
    SensorLoop,
    SystemConfig,
)

logger = logging.getLogger(__name__)


@dataclass(kw_only=True)
class Configuration:
    """Defaults shared by the CLI and the tools."""

    band: Tuple[float, float] = (1e6, 200e6)
    prominence_db: float = DEFAULT_PROMINENCE_DB
    policy: str = "highest_frequency"
    invert_mode: str = "clamp"
    significant_digits: int = 9
    db_floor: float = DB_FLOOR

    @classmethod
    def from_runnable_config(cls, config: Optional[RunnableConfig] = None) -> "Configuration":
        """Create a Configuration from the `configurable` section of a RunnableConfig."""
        configurable = config["configurable"] if config and "configurable" in config else {}
        values: dict[str, Any] = {f.name: configurable.get(f.name) for f in fields(cls) if f.init}
        return cls(**{k: v for k, v in values.items() if v is not None})


def _key_path(error: ValidationError) -> Tuple[str, str]:
    first = error.errors()[0]
    return ".".join(str(p) for p in first["loc"]), first["msg"]


def parse_system_config(data: dict) -> SystemConfig:
    """Validate a decoded document; errors name the offending key."""
    try:
        return SystemConfig.model_validate(data)
    except ValidationError as e:
        path, msg = _key_path(e)
        raise ConfigError(msg, path) from e


def load_system_config(path: Union[str, Path]) -> SystemConfig:
    """Read and validate a TOML system document.

    A sensor `model_file` is resolved relative to the document and replaced by
    the model whose frequency tag matches exactly.
    """
    path = Path(path)
    raw = path.read_bytes()
    try:
        data = tomllib.loads(raw.decode("utf-8"))
    except UnicodeDecodeError as e:
        line = raw[: e.start].count(b"\n") + 1
        raise ConfigError(f"not UTF-8 text at line {line}") from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"not valid TOML: {e}") from e
    config = parse_system_config(data)

    cap = config.sensor.capacitor
    if cap.model_file is None:
        return config
    model_path = (path.parent / cap.model_file).resolve()
    try:
        library = ModelLibrary(load_models(model_path.read_bytes()))
    except (OSError, DomainError) as e:
        raise ConfigError(f"cannot read {model_path}: {e}", "sensor.capacitor.model_file") from e
    try:
        model = library.get(cap.frequency_tag)
    except DomainError as e:
        raise ConfigError(str(e), "sensor.capacitor.frequency_tag") from e
    logger.info(f"sensor model {model.label or model.kind} at {cap.frequency_tag:g} Hz from {model_path}")
    resolved = cap.model_copy(update={"model": model, "model_file": None})
    return config.model_copy(update={"sensor": config.sensor.model_copy(update={"capacitor": resolved})})


def build_system(config: SystemConfig) -> CoupledSystem:
    """Turn a validated document into a simulatable system."""
    r, s = config.reader, config.sensor
    if s.capacitor.model is None and s.capacitor.capacitance is None:
        raise ConfigError("model_file has not been resolved", "sensor.capacitor.model_file")
    c_r = r.series_capacitance
    if c_r is None:
        c_r = solve_tuning_capacitor(r.inductance, r.f_target)
        logger.info(f"reader tuned to {r.f_target:g} Hz with {c_r:.6g} F")
    capacitor = SensorCapacitor(
        capacitance=s.capacitor.capacitance,
        esr=s.capacitor.esr,
        tan_delta=s.capacitor.tan_delta,
        model=s.capacitor.model,
    )
    return CoupledSystem(
        reader=ReaderLoop(
            coil=CoilParams(inductance=r.inductance, resistance=r.resistance, self_capacitance=r.self_capacitance),
            tuning_capacitance=c_r,
        ),
        sensor=SensorLoop(
            coil=CoilParams(inductance=s.inductance, resistance=s.resistance, self_capacitance=s.self_capacitance),
            capacitor=capacitor,
        ),
        k=config.k,
        port_impedance=config.port_impedance,
    )


def build_grid(config: SystemConfig) -> FrequencyGrid:
    return FrequencyGrid.linspace(config.grid.start, config.grid.stop, config.grid.points)
