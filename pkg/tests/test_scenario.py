import numpy as np
import pytest

from systems.scenario import build_setup, dominant_axial_mode, nbar_grid, phase_error_model
from utils.errors import ConfigError
from utils.types import Direction, Geometry, PhaseErrorModel


def test_dominant_mode_defaults_to_com(five_ions):
    axial = five_ions.modes_in(Direction.AXIAL)
    assert dominant_axial_mode(five_ions, 2) == axial[0]
    assert dominant_axial_mode(five_ions, 0, axial[1]) == axial[1]


def test_requested_mode_must_be_axial_and_move_the_ion(five_ions):
    with pytest.raises(ConfigError, match="addressing.mode"):
        dominant_axial_mode(five_ions, 2, five_ions.modes_in(Direction.VERTICAL)[0])
    # the first stretch mode leaves the centre ion at rest
    with pytest.raises(ConfigError, match="does not move"):
        dominant_axial_mode(five_ions, 2, five_ions.modes_in(Direction.AXIAL)[1])


def test_setup_addresses_the_middle_ion(scenario):
    setup = build_setup(scenario(trap={"ions": 3, "axial_hz": 200e3}))
    assert setup.ion == 1
    assert setup.geometry is Geometry.CO_PROPAGATING
    assert setup.chain.n_ions == 3


def test_explicit_initial_temperature(scenario):
    setup = build_setup(scenario(run={"nbar_grid": [10.0], "nbar0_source": "explicit", "nbar0": 12.5}))
    assert setup.nbar0 == 12.5
    assert setup.heating.rate == 0.0


def test_offset_ion_is_misaligned(scenario):
    setup = build_setup(scenario(addressing={"x0_m": 0.14e-6}))
    assert setup.xi == pytest.approx(0.14e-6 / (1.4e-6 / np.sqrt(2)))


def test_grids_and_phase_model(scenario):
    config = scenario(run={"nbar_grid": None, "delay_grid_s": [0.0, 1e-3], "heating_rate_per_s": 2e4,
                           "phase_error_model": "constant"})
    setup = build_setup(config)
    assert nbar_grid(config, setup.heating) == pytest.approx([setup.nbar0, setup.nbar0 + 20.0])
    assert phase_error_model(config) is PhaseErrorModel.CONSTANT
