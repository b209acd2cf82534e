"""Composite pulse sequences on the Fock-diagonal gate."""
import math
from typing import Iterator, Optional

import numpy as np

from systems.dynamics import theta_profile
from utils.errors import ConfigError
from utils.types import PhaseErrorModel, Pulse, PulseSequence, ThermalState


class UnsupportedSequence(ConfigError):
    """Raised for an unknown sequence name."""


def sk1_phase(theta: float = math.pi) -> float:
    """Correction phase of SK1 for a target rotation theta: arccos(−θ/4π)."""
    return math.acos(-theta / (4.0 * math.pi))


def _physical(theta: float, phi: float, gate: int) -> Iterator[Pulse]:
    # 2π rotations are played as two π pulses at the same phase
    if math.isclose(theta, 2.0 * math.pi):
        yield Pulse(math.pi, phi, gate)
        yield Pulse(math.pi, phi, gate)
    else:
        yield Pulse(theta, phi, gate)


def _sk1_pulses(theta: float, phi: float) -> Iterator[Pulse]:
    psi = sk1_phase(theta)
    yield from _physical(theta, phi, 0)
    yield from _physical(2.0 * math.pi, phi + psi, 1)
    yield from _physical(2.0 * math.pi, phi - psi, 2)


def _tycko_pulses(phi: float) -> Iterator[Pulse]:
    for gate, offset in enumerate((2.0 * math.pi / 3.0, 4.0 * math.pi / 3.0, 2.0 * math.pi / 3.0)):
        yield from _physical(math.pi, phi + offset, gate)


def single_pulse(theta: float = math.pi, phi: float = 0.0,
                 model: PhaseErrorModel = PhaseErrorModel.PROGRESSIVE) -> PulseSequence:
    return PulseSequence("single", tuple(_physical(theta, phi, 0)), model)


def sk1(theta: float = math.pi, phi: float = 0.0,
        model: PhaseErrorModel = PhaseErrorModel.PROGRESSIVE) -> PulseSequence:
    """R(2π, φ−ψ)·R(2π, φ+ψ)·R(θ, φ) in operator order; the R(θ, φ) pulse plays first."""
    return PulseSequence("sk1", tuple(_sk1_pulses(theta, phi)), model)


def tycko(phi: float = 0.0, model: PhaseErrorModel = PhaseErrorModel.PROGRESSIVE) -> PulseSequence:
    """Three-pulse π rotation R(π, 2π/3)·R(π, 4π/3)·R(π, 2π/3)."""
    return PulseSequence("tycko", tuple(_tycko_pulses(phi)), model)


SEQUENCES = {
    "single": single_pulse,
    "sk1": sk1,
    "tycko": tycko,
}


def make_sequence(name: str, model: PhaseErrorModel = PhaseErrorModel.PROGRESSIVE) -> PulseSequence:
    try:
        factory = SEQUENCES[name.lower()]
    except KeyError:
        raise UnsupportedSequence(f"unknown sequence {name!r}; expected one of {sorted(SEQUENCES)}",
                                  "run.sequences") from None
    return factory(model=model)


def pulse_phase(pulse: Pulse, model: PhaseErrorModel, phase_error: float) -> float:
    """Axis phase including the systematic error of the pulse's logical gate."""
    if model is PhaseErrorModel.PROGRESSIVE:
        return pulse.phi + pulse.gate * phase_error
    return pulse.phi + phase_error


def sequence_unitaries(
    sequence: PulseSequence,
    half_angles: np.ndarray,
    phase_error: float = 0.0,
    amplitude_error: float = 0.0,
) -> np.ndarray:
    """
    Products of the sequence's pulse blocks, one 2×2 unitary per entry of half_angles.

    Args:
        sequence: Pulses in time order
        half_angles: Θ of a calibrated π pulse at each Fock level
        phase_error: Systematic phase increment δφ [rad]
        amplitude_error: Fractional over-rotation of every pulse

    Returns:
        np.ndarray of shape (len(half_angles), 2, 2)
    """
    half_angles = np.asarray(half_angles, dtype=float)
    unitaries = np.broadcast_to(np.eye(2, dtype=complex), half_angles.shape + (2, 2)).copy()
    for pulse in sequence.pulses:
        angle = (pulse.theta / math.pi) * half_angles * (1.0 + amplitude_error)
        phi = pulse_phase(pulse, sequence.phase_error_model, phase_error)
        c, s = np.cos(angle), np.sin(angle)
        block = np.empty(half_angles.shape + (2, 2), dtype=complex)
        block[..., 0, 0] = c
        block[..., 1, 1] = c
        block[..., 0, 1] = -1j * s * np.exp(-1j * phi)
        block[..., 1, 0] = -1j * s * np.exp(1j * phi)
        unitaries = block @ unitaries
    return unitaries


def sequence_p_up(
    sequence: PulseSequence,
    state: ThermalState,
    eta: float,
    xi: float,
    pulse_area_pi: float,
    phase_error: float = 0.0,
    amplitude_error: float = 0.0,
    half_angles: Optional[np.ndarray] = None,
) -> float:
    """
    Thermally averaged bright population after a composite sequence from |↓⟩.

    Args:
        sequence: Pulse sequence
        state: Thermal state of the dominant axial mode
        eta: Lamb-Dicke-like parameter
        xi: Misalignment parameter
        pulse_area_pi: Calibrated Ω₀t of a π pulse
        phase_error: Systematic phase error per gate δφ [rad]
        amplitude_error: Fractional amplitude error on every pulse
        half_angles: Precomputed Θ_n of the π pulse, overriding eta/xi/pulse_area_pi

    Returns:
        float: P↑
    """
    if half_angles is None:
        half_angles = pulse_area_pi * theta_profile(state.cutoff, eta, xi)
    unitaries = sequence_unitaries(sequence, half_angles[: state.cutoff + 1], phase_error, amplitude_error)
    populations = np.abs(unitaries[:, 1, 0]) ** 2
    return float(np.sum(state.weights() * populations))
