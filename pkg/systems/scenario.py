"""Physical objects of a scenario: beams, chain, couplings and the effective gate."""
import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from core.beam_optics import to_beam_frame
from core.modes import chain_normal_modes, coupling_params, doppler_nbar, misaligned, mode_table_chain
from systems.dynamics import build_gate
from utils.config import AMU, SPECIES_MASS_AMU
from utils.errors import ConfigError
from utils.settings_manager import expand_grid
from utils.types import (
    BeamFramePoint, BeamGeometry, ChainModes, CouplingParams, Direction, EffectiveGate, Geometry,
    HeatingModel, PhaseErrorModel,
)

logger = logging.getLogger(__name__)


@dataclass
class Setup:
    beams: Tuple[BeamGeometry, BeamGeometry]
    chain: ChainModes
    ion: int
    mode: int
    geometry: Geometry
    coupling: CouplingParams
    gate: EffectiveGate
    heating: HeatingModel

    @property
    def eta(self) -> float:
        return self.gate.eta

    @property
    def xi(self) -> float:
        return self.gate.xi

    @property
    def nbar0(self) -> float:
        return self.heating.nbar0


def beam_from_section(section: dict) -> BeamGeometry:
    return BeamGeometry(
        power=float(section["power_w"]),
        wavelength=float(section["wavelength_m"]),
        waist_x=float(section["waist_x_m"]),
        waist_z=float(section["waist_z_m"]),
        focal_y_x=float(section["focal_y_x_m"]),
        focal_y_z=float(section["focal_y_z_m"]),
        phase0=float(section["phase0_rad"]),
        propagation_sign=int(section["propagation_sign"]),
    )


def chain_from_section(trap: dict, rotation: Optional[list] = None) -> ChainModes:
    mass = SPECIES_MASS_AMU[trap["species"]] * AMU
    n_ions = int(trap["ions"])
    if trap["mode_table"] is not None:
        chain = mode_table_chain(n_ions, mass, trap["mode_table"])
    else:
        chain = chain_normal_modes(
            n_ions,
            2.0 * math.pi * float(trap["axial_hz"]),
            2.0 * math.pi * float(trap["horizontal_hz"]),
            2.0 * math.pi * float(trap["vertical_hz"]),
            mass,
        )
    if rotation is not None and any(rotation):
        chain = misaligned(chain, rotation)
    return chain


def dominant_axial_mode(chain: ChainModes, ion: int, mode: Optional[int] = None) -> int:
    """The requested axial mode, else the lowest axial mode (COM), which heats fastest."""
    candidates = chain.modes_in(Direction.AXIAL)
    if mode is None:
        return min(candidates, key=lambda p: chain.frequencies[p])
    if mode not in candidates:
        raise ConfigError(f"mode {mode} is not an axial mode", "addressing.mode")
    if abs(chain.projection(mode, "x", ion)) < 1e-12:
        raise ConfigError(f"mode {mode} does not move ion {ion}", "addressing.mode")
    return mode


def build_setup(config: dict) -> Setup:
    """
    Build every physical object a run needs from a merged scenario.

    Args:
        config: Scenario returned by load_scenario

    Returns:
        Setup
    """
    addressing = config["addressing"]
    beams = (beam_from_section(config["beam1"]), beam_from_section(config["beam2"]))
    chain = chain_from_section(config["trap"], addressing["rotation_rad"])
    ion = chain.n_ions // 2 if addressing["ion"] is None else int(addressing["ion"])
    geometry = Geometry(addressing["geometry"])

    lab = BeamFramePoint(float(addressing["x0_m"]), float(addressing["y0_m"]), float(addressing["z0_m"]))
    equilibria = (to_beam_frame(beams[0], lab), to_beam_frame(beams[1], lab))
    coupling = coupling_params(beams, equilibria, chain, ion)
    mode = dominant_axial_mode(chain, ion, addressing["mode"])
    gate = build_gate(beams, coupling, chain, geometry, float(addressing["effective_dipole"]), mode, ion)

    run = config["run"]
    if run["nbar0_source"] == "doppler":
        nbar0 = doppler_nbar(omega=float(chain.frequencies[mode]))
    else:
        nbar0 = float(run["nbar0"])
    heating = HeatingModel(nbar0, float(run["heating_rate_per_s"]))
    logger.info("η=%.4g ξ=%.4g n̄₀=%.4g on mode %d of ion %d", gate.eta, gate.xi, nbar0, mode, ion)
    return Setup(beams, chain, ion, mode, geometry, coupling, gate, heating)


def nbar_grid(config: dict, heating: HeatingModel) -> np.ndarray:
    """Mean phonon numbers of the run grid, from the n̄ grid or mapped from the delay grid."""
    run = config["run"]
    if run["nbar_grid"] is not None:
        return expand_grid(run["nbar_grid"], "run.nbar_grid")
    return heating.nbar(expand_grid(run["delay_grid_s"], "run.delay_grid_s"))


def phase_error_model(config: dict) -> PhaseErrorModel:
    return PhaseErrorModel(config["run"]["phase_error_model"])
