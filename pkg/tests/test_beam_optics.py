import math

import numpy as np
import pytest
from scipy.integrate import trapezoid

from core.beam_optics import (
    field_at, field_on_grid, gouy_phase, inverse_radius_of_curvature, rayleigh_range, spot_size, to_beam_frame,
)
from utils.errors import ConfigError
from utils.types import Axis, BeamFramePoint, BeamGeometry


@pytest.fixture
def beam():
    return BeamGeometry(power=2e-3, wavelength=355e-9, waist_x=1e-6, waist_z=5e-6, phase0=0.3)


def test_spot_size_at_focus_and_rayleigh_range(beam):
    y_r = rayleigh_range(beam, Axis.X)
    assert spot_size(beam, Axis.X, 0.0) == pytest.approx(1e-6)
    assert spot_size(beam, Axis.X, y_r) == pytest.approx(1e-6 * math.sqrt(2))
    assert spot_size(beam, Axis.X, -y_r) == pytest.approx(spot_size(beam, Axis.X, y_r))


def test_rayleigh_range_of_one_micron_waist(beam):
    assert rayleigh_range(beam, Axis.X) == pytest.approx(8.85e-6, rel=1e-3)


def test_spot_size_increases_away_from_focus(beam):
    y = np.linspace(0, 50e-6, 20)
    assert np.all(np.diff(spot_size(beam, Axis.Z, y)) > 0)


def test_inverse_radius_of_curvature(beam):
    y_r = rayleigh_range(beam, Axis.X)
    assert inverse_radius_of_curvature(beam, Axis.X, 0.0) == 0.0
    assert inverse_radius_of_curvature(beam, Axis.X, y_r) == pytest.approx(1 / (2 * y_r))
    assert inverse_radius_of_curvature(beam, Axis.X, -y_r) == pytest.approx(-1 / (2 * y_r))
    y = np.linspace(-10 * y_r, 10 * y_r, 2001)
    assert np.max(np.abs(inverse_radius_of_curvature(beam, Axis.X, y))) <= 1 / (2 * y_r) * (1 + 1e-12)


def test_gouy_phase():
    beam = BeamGeometry(1e-3, 355e-9, 1e-6, 1e-6)
    assert gouy_phase(beam, 0.0) == 0.0
    assert gouy_phase(beam, 1.0) == pytest.approx(math.pi / 2, abs=1e-4)

    # equal Rayleigh ranges of 10 μm need w = √(10 μm · λ / π)
    w = math.sqrt(10e-6 * 355e-9 / math.pi)
    split = BeamGeometry(1e-3, 355e-9, w, w, focal_y_x=0.0, focal_y_z=10e-6)
    assert gouy_phase(split, 0.0) == pytest.approx(-math.pi / 8)


def test_field_on_axis_at_focus(beam):
    amplitude, phase = field_at(beam, BeamFramePoint(0.0, 0.0, 0.0))
    assert amplitude == pytest.approx(math.sqrt(2e-3 / (math.pi * 1e-6 * 5e-6)))
    assert phase == pytest.approx(0.3)


def test_field_falls_by_one_over_e_at_waist(beam):
    center, _ = field_at(beam, BeamFramePoint(0.0, 0.0, 0.0))
    edge, _ = field_at(beam, BeamFramePoint(1e-6, 0.0, 0.0))
    assert edge / center == pytest.approx(math.exp(-1))


def test_field_composes_sub_operations(beam):
    x, y, z = 0.4e-6, 3e-6, -1.2e-6
    amplitude, phase = field_at(beam, BeamFramePoint(x, y, z))
    w_x, w_z = spot_size(beam, Axis.X, y), spot_size(beam, Axis.Z, y)
    expected_amplitude = math.sqrt(beam.power / (math.pi * w_x * w_z)) * math.exp(-x ** 2 / w_x ** 2 - z ** 2 / w_z ** 2)
    k = beam.wavevector
    expected_phase = (-k * y + gouy_phase(beam, y)
                      - 0.5 * k * (x ** 2 * inverse_radius_of_curvature(beam, Axis.X, y)
                                   + z ** 2 * inverse_radius_of_curvature(beam, Axis.Z, y))
                      + beam.phase0)
    assert amplitude == pytest.approx(expected_amplitude, rel=1e-14)
    assert phase == pytest.approx(expected_phase, rel=1e-14)


@pytest.mark.parametrize("y", [0.0, 5e-6, 40e-6])
def test_intensity_integrates_to_half_power(beam, y):
    w_x, w_z = spot_size(beam, Axis.X, y), spot_size(beam, Axis.Z, y)
    x = np.linspace(-8 * w_x, 8 * w_x, 801)
    z = np.linspace(-8 * w_z, 8 * w_z, 801)
    amplitude, _ = field_on_grid(beam, x[:, None], y, z[None, :])
    integral = trapezoid(trapezoid(amplitude ** 2, z, axis=1), x)
    assert integral == pytest.approx(beam.power / 2, rel=1e-6)


def test_to_beam_frame_flips_y_for_counter_propagation():
    counter = BeamGeometry(1e-3, 355e-9, 1e-6, 1e-6, propagation_sign=-1)
    point = to_beam_frame(counter, BeamFramePoint(1.0, 2.0, 3.0))
    assert (point.x, point.y, point.z) == (1.0, -2.0, 3.0)


@pytest.mark.parametrize("field", ["power", "wavelength", "waist_x", "waist_z"])
def test_invalid_beam_names_field(field):
    values = {"power": 1e-3, "wavelength": 355e-9, "waist_x": 1e-6, "waist_z": 1e-6, field: 0.0}
    with pytest.raises(ConfigError, match=field):
        BeamGeometry(**values)
