"""
Brute-force evolution on qubit ⊗ Fock space, used to validate the
Fock-diagonal gate model.
"""
import logging
import math
from typing import Optional

import numpy as np
import scipy.sparse as sparse
from scipy.linalg import expm
from scipy.sparse.linalg import expm_multiply

from core.expansion import a2_terms, ladder_monomial_matrix
from systems.dynamics import sigma_psi
from utils.config import ORACLE_MAX_DIMENSION
from utils.types import FockSpace

logger = logging.getLogger(__name__)


def coupling_series(eta: float, xi: float, order: int) -> np.ndarray:
    """
    Coefficients of (â+â†)^l in the transformed interaction, l = 0 … order.

    Read off the A2 series exp(−(ξ+q̂₁)²) at zero defocus with q̂₁ = η(â+â†),
    with the static Gaussian e^{−ξ²} divided out.
    """
    terms = a2_terms(0.0, xi, (0, order))
    coefficients = np.zeros(order + 1)
    for term in terms:
        coefficients[term.power_q] = term.coefficient.real * eta ** term.power_q
    return coefficients * math.exp(xi ** 2)


def interaction_matrix(eta: float, xi: float, space: FockSpace, order: int, resonant: bool = True) -> sparse.csr_matrix:
    """Σ_l c_l (â+â†)^l, keeping only its number-conserving diagonal when resonant."""
    coefficients = coupling_series(eta, xi, order)
    total = sparse.csr_matrix((space.dimension, space.dimension))
    for power, c in enumerate(coefficients):
        if c == 0:
            continue
        monomial = ladder_monomial_matrix(power, space)
        if resonant:
            monomial = sparse.diags(monomial.diagonal(), format="csr")
        total = total + c * monomial
    return total


def _check_dimension(space: FockSpace) -> None:
    if 2 * space.dimension > ORACLE_MAX_DIMENSION:
        raise ValueError(f"qubit ⊗ Fock dimension {2 * space.dimension} exceeds {ORACLE_MAX_DIMENSION}")


def brute_force_evolve(
    eta: float,
    xi: float,
    omega0: float,
    t: float,
    space: FockSpace,
    order: int,
    psi0: float = 0.0,
    keep_offresonant: bool = False,
    mode_frequency: Optional[float] = None,
    steps: int = 200,
) -> np.ndarray:
    """
    Bright probability |⟨↑,n|U|↓,n⟩|² for every Fock level of the space.

    Args:
        eta: Lamb-Dicke-like parameter
        xi: Misalignment parameter
        omega0: Rabi rate Ω₀ [rad/s]
        t: Pulse duration [s]
        space: Truncated axial Fock space
        order: Highest power of (â+â†) kept
        psi0: Drive phase Ψ₀
        keep_offresonant: Keep the imbalanced â/â† couplings, rotating at the mode frequency
        mode_frequency: Axial mode frequency [rad/s], required with keep_offresonant
        steps: Piecewise-constant steps of the time-dependent propagator

    Returns:
        np.ndarray: Probabilities indexed by n
    """
    _check_dimension(space)
    d = space.dimension
    qubit = sparse.csr_matrix(sigma_psi(psi0))
    down = np.zeros((2 * d, d), dtype=complex)
    down[np.arange(d), np.arange(d)] = 1.0  # |↓,n⟩ columns, qubit index major

    if not keep_offresonant:
        hamiltonian = omega0 * sparse.kron(qubit, interaction_matrix(eta, xi, space, order), format="csc")
        evolved = expm_multiply(-1j * t * hamiltonian, down)
    else:
        if mode_frequency is None:
            raise ValueError("mode_frequency is required when off-resonant couplings are kept")
        evolved = _piecewise_evolve(eta, xi, omega0, t, space, order, qubit.toarray(), mode_frequency, steps) @ down

    up = evolved[d + np.arange(d), np.arange(d)]
    return np.abs(up) ** 2


def _piecewise_evolve(eta, xi, omega0, t, space, order, qubit, mode_frequency, steps) -> np.ndarray:
    """Time-ordered product of midpoint propagators in the mode's interaction picture."""
    coefficients = coupling_series(eta, xi, order)
    d = space.dimension
    lower = sparse.diags(np.sqrt(np.arange(1, d, dtype=float)), 1).toarray()
    dt = t / steps
    propagator = np.eye(2 * d, dtype=complex)
    logger.debug("piecewise oracle: %d steps on dimension %d", steps, 2 * d)
    for k in range(steps):
        phase = np.exp(-1j * mode_frequency * (k + 0.5) * dt)
        x = phase * lower + np.conj(phase) * lower.T
        motion = np.zeros((d, d), dtype=complex)
        power = np.eye(d, dtype=complex)
        for c in coefficients:
            motion += c * power
            power = x @ power
        propagator = expm(-1j * omega0 * dt * np.kron(qubit, motion)) @ propagator
    return propagator


def check_position_truncation(space: FockSpace, order: int) -> int:
    """Highest Fock level whose diagonal of (â+â†)^order is free of truncation error."""
    return max(0, space.cutoff - order // 2)


def offresonant_shift(eta: float, xi: float, omega0: float, t: float, space: FockSpace, order: int,
                      mode_frequency: float, steps: int = 200) -> float:
    """Largest change in bright probability caused by keeping the imbalanced couplings."""
    resonant = brute_force_evolve(eta, xi, omega0, t, space, order)
    full = brute_force_evolve(eta, xi, omega0, t, space, order, keep_offresonant=True,
                              mode_frequency=mode_frequency, steps=steps)
    valid = check_position_truncation(space, order) + 1
    return float(np.max(np.abs(full[:valid] - resonant[:valid])))
