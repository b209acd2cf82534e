"""Paraxial field of an elliptical Gaussian beam with simple astigmatism.

All functions are pure and accept numpy arrays for the coordinates.
"""
from typing import Tuple

import numpy as np

from utils.types import Axis, BeamFramePoint, BeamGeometry


def rayleigh_range(beam: BeamGeometry, axis: Axis) -> float:
    return beam.rayleigh_range(axis)


def spot_size(beam: BeamGeometry, axis: Axis, y):
    """
    Semi axis of the spot ellipse along one principal axis.

    Args:
        beam: Beam geometry
        axis: Principal axis (Axis.X tight, Axis.Z loose)
        y: Position along the propagation axis in the beam frame [m]

    Returns:
        Spot size w_α(y) [m]
    """
    defocus = (np.asarray(y, dtype=float) - beam.focal_y(axis)) / beam.rayleigh_range(axis)
    return beam.waist(axis) * np.sqrt(1.0 + defocus ** 2)


def inverse_radius_of_curvature(beam: BeamGeometry, axis: Axis, y):
    """
    Reciprocal wavefront curvature 1/R_α(y); zero at the focal plane.

    Args:
        beam: Beam geometry
        axis: Principal axis
        y: Position along the propagation axis [m]

    Returns:
        1/R_α [1/m]
    """
    dy = np.asarray(y, dtype=float) - beam.focal_y(axis)
    y_r = beam.rayleigh_range(axis)
    return dy / (dy ** 2 + y_r ** 2)


def gouy_phase(beam: BeamGeometry, y):
    """Mean of the two principal-axis Gouy phases, in (−π/2, π/2)."""
    y = np.asarray(y, dtype=float)
    phase_x = np.arctan((y - beam.focal_y_x) / beam.rayleigh_range(Axis.X))
    phase_z = np.arctan((y - beam.focal_y_z) / beam.rayleigh_range(Axis.Z))
    return 0.5 * (phase_x + phase_z)


def field_at(beam: BeamGeometry, point: BeamFramePoint) -> Tuple[float, float]:
    """
    Amplitude and phase of the beam at a point in its own frame.

    Args:
        beam: Beam geometry
        point: Position (x_b, y_b, z_b) [m]

    Returns:
        tuple: (E_b, Φ_b), amplitude normalised so that ∬E² dx dz = P_b/2, and phase [rad]
    """
    return field_on_grid(beam, point.x, point.y, point.z)


def field_on_grid(beam: BeamGeometry, x, y, z):
    """Vectorised field_at over broadcastable coordinate arrays."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    w_x = spot_size(beam, Axis.X, y)
    w_z = spot_size(beam, Axis.Z, y)
    amplitude = np.sqrt(beam.power / (np.pi * w_x * w_z)) * np.exp(-x ** 2 / w_x ** 2 - z ** 2 / w_z ** 2)
    k = beam.wavevector
    curvature = x ** 2 * inverse_radius_of_curvature(beam, Axis.X, y) + z ** 2 * inverse_radius_of_curvature(beam, Axis.Z, y)
    phase = -k * np.asarray(y, dtype=float) + gouy_phase(beam, y) - 0.5 * k * curvature + beam.phase0
    if amplitude.ndim == 0 and np.ndim(phase) == 0:
        return float(amplitude), float(phase)
    return amplitude, phase


def to_beam_frame(beam: BeamGeometry, lab: BeamFramePoint) -> BeamFramePoint:
    """Map a lab-frame point into the beam frame; beams share axes up to the sign of y."""
    return BeamFramePoint(lab.x, beam.propagation_sign * lab.y, lab.z)
