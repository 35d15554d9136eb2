import math

import numpy as np
import pytest

from chipless_sensor.exceptions import DomainError, SingularConversionError
from chipless_sensor.rfnet import (
    FrequencyGrid,
    OnePortSweep,
    TwoPortSweep,
    is_passive,
    is_reciprocal,
    max_singular_values,
    reflection_db,
    s_to_z_oneport,
    smatrix_to_zmatrix,
    y_to_z_oneport,
    z_to_s_oneport,
    zmatrix_to_smatrix,
)


@pytest.mark.parametrize(
    "points",
    [[1e6], [0.0, 1e6], [-1.0, 1e6], [1e6, math.nan], [1e6, math.inf], [2e6, 1e6], [1e6, 1e6]],
)
def test_grid_rejects_invalid_points(points):
    with pytest.raises(DomainError):
        FrequencyGrid(np.array(points))


def test_grid_linspace_and_step():
    grid = FrequencyGrid.linspace(10e6, 600e6, 1181)
    assert len(grid) == 1181
    assert grid.start == 10e6
    assert grid.stop == 600e6
    assert grid.step() == pytest.approx(0.5e6)
    assert grid.omega[0] == pytest.approx(2 * math.pi * 10e6)


def test_grid_points_are_read_only():
    grid = FrequencyGrid.linspace(1.0, 2.0, 3)
    with pytest.raises(ValueError):
        grid.points[0] = 5.0


@pytest.mark.parametrize(
    "z, expected",
    [(50 + 0j, 0j), (0j, -1 + 0j)],
)
def test_z_to_s_matched_and_short(z, expected):
    assert z_to_s_oneport(z, 50.0) == pytest.approx(expected, abs=1e-15)


def test_z_to_s_reactive_is_lossless():
    s = z_to_s_oneport(-1591.55j, 50.0)
    assert abs(s) == pytest.approx(1.0, abs=1e-12)


def test_z_to_s_passive_magnitude_bounded():
    rng = np.random.default_rng(3)
    z = rng.uniform(0, 500, 200) + 1j * rng.uniform(-500, 500, 200)
    assert np.all(np.abs(z_to_s_oneport(z)) <= 1.0)


@pytest.mark.parametrize("z", [complex(math.nan, 0), complex(0, math.inf)])
def test_z_to_s_rejects_non_finite(z):
    with pytest.raises(DomainError):
        z_to_s_oneport(z)


@pytest.mark.parametrize("z0", [0.0, -50.0, math.nan])
def test_rejects_bad_reference(z0):
    with pytest.raises(DomainError):
        z_to_s_oneport(10 + 0j, z0)


def test_z_to_s_singular_at_minus_z0():
    with pytest.raises(SingularConversionError):
        z_to_s_oneport(-50 + 0j, 50.0)


@pytest.mark.parametrize("s, expected", [(0j, 50 + 0j), (-1 + 0j, 0j)])
def test_s_to_z_matched_and_short(s, expected):
    assert s_to_z_oneport(s, 50.0) == pytest.approx(expected, abs=1e-12)


def test_s_to_z_open_circuit_is_singular():
    with pytest.raises(SingularConversionError) as exc:
        s_to_z_oneport(np.array([0.2, 1.0 + 0j]), 50.0)
    assert exc.value.index == 1


def test_oneport_round_trip():
    z = 10 - 30j
    back = s_to_z_oneport(z_to_s_oneport(z, 50.0), 50.0)
    assert abs(back - z) <= 1e-12 * abs(z)


def test_y_to_z():
    assert y_to_z_oneport(0.02 + 0j) == pytest.approx(50 + 0j)
    with pytest.raises(SingularConversionError):
        y_to_z_oneport(0j)


def test_reflection_db_floor():
    db = reflection_db(np.array([1.0, 0.1, 0.0]))
    assert db[0] == pytest.approx(0.0)
    assert db[1] == pytest.approx(-20.0)
    assert db[2] == -300.0


def test_oneport_sweep_from_s11_records_frequency():
    grid = FrequencyGrid.linspace(1e6, 3e6, 3)
    with pytest.raises(SingularConversionError) as exc:
        OnePortSweep.from_s11(grid, np.array([0.0, 0.1, 1.0]))
    assert exc.value.frequency == 3e6


def test_oneport_sweep_shape_checked():
    grid = FrequencyGrid.linspace(1e6, 3e6, 3)
    with pytest.raises(DomainError):
        OnePortSweep(grid=grid, z=np.ones(2))


def _stack(z, n):
    return np.broadcast_to(np.asarray(z, dtype=complex), (n, 2, 2)).copy()


def test_matched_isolated_ports_give_zero_s():
    grid = FrequencyGrid.linspace(1e6, 2e6, 4)
    sweep = zmatrix_to_smatrix(grid, _stack([[50, 0], [0, 50]], 4), 50.0)
    assert np.allclose(sweep.s, 0, atol=1e-15)


def test_series_element_bridging_ports():
    # A lone series element has no Z-matrix; approach it with a T-network whose
    # two 50 ohm arms sit on a very large shunt.
    shunt = 1e8
    z = [[50 + shunt, shunt], [shunt, 50 + shunt]]
    grid = FrequencyGrid.linspace(1e6, 2e6, 2)
    sweep = zmatrix_to_smatrix(grid, _stack(z, 2), 50.0)
    exact = 100 * shunt / (1e4 + 200 * shunt)
    assert sweep.s21[0].real == pytest.approx(exact, rel=1e-9)
    assert sweep.s21[0] == pytest.approx(0.5, abs=1e-6)


def test_reciprocity_of_symmetric_z():
    rng = np.random.default_rng(11)
    n = 50
    z = rng.uniform(0, 100, (n, 2, 2)) + 1j * rng.uniform(-300, 300, (n, 2, 2))
    z[:, 1, 0] = z[:, 0, 1]
    sweep = zmatrix_to_smatrix(FrequencyGrid.linspace(1e6, 50e6, n), z, 50.0)
    assert np.array_equal(sweep.s12, sweep.s21)
    assert is_reciprocal(sweep)


def test_passive_network_singular_values_bounded():
    rng = np.random.default_rng(5)
    n = 100
    r = rng.uniform(0, 50, (n, 2))
    x = rng.uniform(-200, 200, (n, 3))
    z = np.empty((n, 2, 2), dtype=complex)
    # T-network: two series arms and a shunt, all resistances >= 0
    shunt = rng.uniform(0, 20, n) + 1j * x[:, 2]
    z[:, 0, 0] = r[:, 0] + 1j * x[:, 0] + shunt
    z[:, 1, 1] = r[:, 1] + 1j * x[:, 1] + shunt
    z[:, 0, 1] = shunt
    z[:, 1, 0] = shunt
    sweep = zmatrix_to_smatrix(FrequencyGrid.linspace(1e6, 100e6, n), z)
    assert np.all(max_singular_values(sweep) <= 1 + 1e-9)
    assert is_passive(sweep)


def test_singular_point_raise_and_mark():
    grid = FrequencyGrid.linspace(1e6, 3e6, 3)
    z = _stack([[10, 0], [0, 10]], 3)
    z[1] = [[-50, 0], [0, 10]]
    with pytest.raises(SingularConversionError) as exc:
        zmatrix_to_smatrix(grid, z, 50.0)
    assert exc.value.index == 1
    assert exc.value.frequency == 2e6

    sweep = zmatrix_to_smatrix(grid, z, 50.0, on_singular="mark")
    assert [e.index for e in sweep.errors] == [1]
    assert np.all(np.isnan(sweep.s[1]))
    assert np.all(np.isfinite(sweep.s[[0, 2]]))


def test_twoport_round_trip():
    rng = np.random.default_rng(8)
    n = 20
    z = rng.uniform(1, 100, (n, 2, 2)) + 1j * rng.uniform(-100, 100, (n, 2, 2))
    sweep = zmatrix_to_smatrix(FrequencyGrid.linspace(1e6, 2e6, n), z, 50.0)
    back = smatrix_to_zmatrix(sweep.s, 50.0)
    assert np.allclose(back, z, rtol=1e-10, atol=0)
    assert np.allclose(sweep.z, z, rtol=1e-10, atol=0)


def test_twoport_parameter_lookup():
    grid = FrequencyGrid.linspace(1e6, 2e6, 2)
    s = np.zeros((2, 2, 2), dtype=complex)
    s[:, 1, 0] = 0.3
    sweep = TwoPortSweep(grid=grid, s=s)
    assert np.all(sweep.parameter("S21") == 0.3)
    with pytest.raises(DomainError):
        sweep.parameter("s33")
