#!/usr/bin/env python

import sys
from pathlib import Path

import pytest

src_root = str(Path(__file__).parent.parent / "src")
if src_root not in sys.path:
    sys.path.insert(0, src_root)

from chipless_sensor.schemas import (  # noqa: E402
    CapacitorModel,
    CoilParams,
    CoupledSystem,
    ReaderLoop,
    SensorCapacitor,
    SensorLoop,
)

L_COIL = 8.35e-6
C_TUNE = 66e-12


def pytest_addoption(parser):
    """Add command-line options to pytest."""
    parser.addoption(
        "--oracle-seed",
        action="store",
        type=int,
        default=20240607,
        help="Seed for the randomized capacitor oracle tests",
    )


@pytest.fixture(scope="session")
def oracle_seed(request):
    """Return the oracle seed from the command line."""
    return request.config.getoption("--oracle-seed")


@pytest.fixture
def pdms_cf_capacitor():
    """35 pF with 8.97 nH of lead inductance: self-resonance near 284 MHz."""
    return CapacitorModel(capacitance=35e-12, esr=1.0, parasitic_inductance=8.97e-9)


def symmetric_system(k, resistance=2.0, port_impedance=50.0, sensor_capacitance=C_TUNE):
    coil = CoilParams(inductance=L_COIL, resistance=resistance)
    return CoupledSystem(
        reader=ReaderLoop(coil=coil, tuning_capacitance=C_TUNE),
        sensor=SensorLoop(coil=coil, capacitor=SensorCapacitor(capacitance=sensor_capacitance)),
        k=k,
        port_impedance=port_impedance,
    )


@pytest.fixture
def make_symmetric_system():
    return symmetric_system


@pytest.fixture
def high_q_system():
    """Symmetric loops with low loss and 1 ohm ports, so k_crit is well below 0.05."""

    def _make(k):
        return symmetric_system(k, resistance=0.1, port_impedance=1.0)

    return _make
