import math

import pytest

from core.modes import chain_normal_modes
from utils.config import AMU, SPECIES_MASS_AMU
from utils.settings_manager import scenario_from_dict
from utils.types import BeamGeometry


@pytest.fixture
def yb_mass():
    return SPECIES_MASS_AMU["171Yb+"] * AMU


@pytest.fixture
def tight_beam():
    """355 nm beam focused to 1.4 μm along x."""
    return BeamGeometry(power=1e-3, wavelength=355e-9, waist_x=1.4e-6, waist_z=10e-6)


@pytest.fixture
def single_ion(yb_mass):
    return chain_normal_modes(1, 2 * math.pi * 153e3, 2 * math.pi * 3.0e6, 2 * math.pi * 2.5e6, yb_mass)


@pytest.fixture
def five_ions(yb_mass):
    return chain_normal_modes(5, 2 * math.pi * 200e3, 2 * math.pi * 3.0e6, 2 * math.pi * 2.5e6, yb_mass)


def make_scenario(**sections):
    """Scenario with a single-ion co-propagating default and section overrides."""
    raw = {
        "name": "test",
        "beam1": {"waist_x_m": 1.4e-6},
        "beam2": {"waist_x_m": 1.4e-6},
        "trap": {"ions": 1, "axial_hz": 153e3},
        "run": {"nbar_grid": [64.0, 200.0, 500.0]},
    }
    for name, section in sections.items():
        raw[name] = {**raw.get(name, {}), **section}
    return scenario_from_dict(raw)


@pytest.fixture
def scenario():
    return make_scenario
