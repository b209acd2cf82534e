"""Normal modes of a linear ion chain and the dimensionless beam couplings."""
import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.transform import Rotation

from utils.config import (
    COULOMB_CONSTANT, ELEMENTARY_CHARGE, GAMMA_DOPPLER, HBAR,
    LAMBDA0_HARD_LIMIT, LAMBDA0_WARN_LIMIT,
)
from utils.errors import ConfigError, ConvergenceError
from utils.types import (
    AlignmentError, Axis, BeamFramePoint, BeamGeometry, ChainModes, CouplingParams, Direction,
)

logger = logging.getLogger(__name__)

EQUILIBRIUM_TOLERANCE = 1e-12
EQUILIBRIUM_MAX_STEPS = 200


def zero_point_spread(mass: float, omega: float) -> float:
    """
    Spread of the zero-point wavefunction, √(ħ/2mω).

    Args:
        mass: Ion mass [kg]
        omega: Mode angular frequency [rad/s]

    Returns:
        float: ζ⁽⁰⁾ [m]
    """
    if mass <= 0 or omega <= 0:
        raise ConfigError(f"mass and frequency must be positive, got m={mass!r}, ω={omega!r}")
    return math.sqrt(HBAR / (2.0 * mass * omega))


def doppler_nbar(gamma: float = GAMMA_DOPPLER, omega: float = 1.0) -> float:
    """Mean phonon number at the Doppler limit, Γ/2ω."""
    if gamma <= 0 or omega <= 0:
        raise ConfigError(f"linewidth and frequency must be positive, got Γ={gamma!r}, ω={omega!r}")
    return gamma / (2.0 * omega)


def length_scale(mass: float, axial_frequency: float) -> float:
    """Characteristic Coulomb length (e²/(4πε₀ m ω_z²))^(1/3)."""
    return (COULOMB_CONSTANT * ELEMENTARY_CHARGE ** 2 / (mass * axial_frequency ** 2)) ** (1.0 / 3.0)


def _residual(u: np.ndarray) -> np.ndarray:
    d = u[:, None] - u[None, :]
    np.fill_diagonal(d, np.inf)
    return u - np.sum(np.sign(d) / d ** 2, axis=1)


def _inverse_cubes(u: np.ndarray) -> np.ndarray:
    d = np.abs(u[:, None] - u[None, :])
    np.fill_diagonal(d, np.inf)
    return 1.0 / d ** 3


def _axial_hessian(u: np.ndarray) -> np.ndarray:
    inv3 = _inverse_cubes(u)
    hessian = -2.0 * inv3
    np.fill_diagonal(hessian, 1.0 + 2.0 * inv3.sum(axis=1))
    return hessian


def _transverse_hessian(u: np.ndarray, ratio_sq: float) -> np.ndarray:
    inv3 = _inverse_cubes(u)
    hessian = inv3.copy()
    np.fill_diagonal(hessian, ratio_sq - inv3.sum(axis=1))
    return hessian


def equilibrium_positions(n_ions: int) -> np.ndarray:
    """
    Dimensionless equilibrium positions of n_ions in a harmonic axial well.

    Damped Newton iteration on the force balance, seeded from the
    quasi-uniform spacing 2.018·N^(−0.559).

    Returns:
        np.ndarray: Sorted positions in units of length_scale
    """
    if n_ions < 1:
        raise ConfigError("chain needs at least one ion", "trap.ions")
    if n_ions == 1:
        return np.zeros(1)
    spacing = 2.018 * n_ions ** -0.559
    u = (np.arange(n_ions) - (n_ions - 1) / 2.0) * spacing
    residual = _residual(u)
    for step_count in range(1, EQUILIBRIUM_MAX_STEPS + 1):
        step = np.linalg.solve(_axial_hessian(u), -residual)
        damping = 1.0
        norm = np.linalg.norm(residual)
        while True:
            trial = u + damping * step
            # ordering must survive the step
            if np.all(np.diff(trial) > 0):
                trial_residual = _residual(trial)
                if np.linalg.norm(trial_residual) < norm or damping < 1e-6:
                    break
            damping *= 0.5
            if damping < 1e-12:
                raise ConvergenceError("equilibrium line search failed", partial=u, iterations=step_count)
        u, residual = trial, trial_residual
        if np.max(np.abs(damping * step)) <= EQUILIBRIUM_TOLERANCE * max(1.0, np.max(np.abs(u))):
            return u
    raise ConvergenceError(f"equilibrium did not converge in {EQUILIBRIUM_MAX_STEPS} steps",
                           partial=u, iterations=EQUILIBRIUM_MAX_STEPS)


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    # largest component of every column positive
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def chain_normal_modes(
    n_ions: int,
    axial_frequency: float,
    horizontal_frequency: float,
    vertical_frequency: float,
    mass: float,
) -> ChainModes:
    """
    Solve the harmonic normal modes of a linear chain.

    Args:
        n_ions: Number of ions N
        axial_frequency: Axial centre-of-mass frequency [rad/s]
        horizontal_frequency: Horizontal (beam y) COM frequency [rad/s]
        vertical_frequency: Vertical (beam z) COM frequency [rad/s]
        mass: Ion mass [kg]

    Returns:
        ChainModes: 3N modes, axial then horizontal then vertical
    """
    if min(axial_frequency, horizontal_frequency, vertical_frequency) <= 0:
        raise ConfigError("trap frequencies must be positive", "trap")
    if min(horizontal_frequency, vertical_frequency) <= axial_frequency:
        raise ConfigError("transverse frequencies must exceed the axial frequency for a linear chain", "trap")

    u = equilibrium_positions(n_ions)
    blocks = []
    frequencies = []
    directions: List[Direction] = []
    for direction, hessian in (
        (Direction.AXIAL, _axial_hessian(u)),
        (Direction.HORIZONTAL, _transverse_hessian(u, (horizontal_frequency / axial_frequency) ** 2)),
        (Direction.VERTICAL, _transverse_hessian(u, (vertical_frequency / axial_frequency) ** 2)),
    ):
        eigenvalues, vectors = np.linalg.eigh(hessian)
        if eigenvalues[0] <= 0:
            raise ConfigError(
                f"{direction.value} confinement too weak for {n_ions} ions (zigzag instability)", "trap")
        frequencies.append(axial_frequency * np.sqrt(eigenvalues))
        blocks.append(_fix_signs(vectors))
        directions.extend([direction] * n_ions)

    mode_matrix = np.zeros((3 * n_ions, 3 * n_ions))
    for k, block in enumerate(blocks):
        mode_matrix[k * n_ions:(k + 1) * n_ions, k * n_ions:(k + 1) * n_ions] = block

    logger.debug("solved %d-ion chain, axial spread %.3g", n_ions, np.ptp(u))
    return ChainModes(
        n_ions=n_ions,
        mass=mass,
        frequencies=np.concatenate(frequencies),
        mode_matrix=mode_matrix,
        directions=tuple(directions),
        positions=u * length_scale(mass, axial_frequency),
    )


def mode_table_chain(n_ions: int, mass: float, table: Sequence[dict]) -> ChainModes:
    """
    Build ChainModes from a measured mode table.

    Args:
        n_ions: Number of ions
        mass: Ion mass [kg]
        table: Rows with 'frequency_hz', 'direction' and 'vector' (3N entries, x ions, y ions, z ions)

    Returns:
        ChainModes with orthonormalised columns
    """
    if len(table) != 3 * n_ions:
        raise ConfigError(f"expected {3 * n_ions} rows, got {len(table)}", "trap.mode_table")
    order = sorted(range(len(table)), key=lambda i: (
        list(Direction).index(Direction(table[i]["direction"])), table[i]["frequency_hz"]))
    rows = [table[i] for i in order]
    matrix = np.array([row["vector"] for row in rows], dtype=float).T
    if matrix.shape != (3 * n_ions, 3 * n_ions):
        raise ConfigError("each mode vector needs 3N components", "trap.mode_table")
    return ChainModes(
        n_ions=n_ions,
        mass=mass,
        frequencies=2.0 * math.pi * np.array([row["frequency_hz"] for row in rows], dtype=float),
        mode_matrix=_orthonormalize(matrix),
        directions=tuple(Direction(row["direction"]) for row in rows),
    )


def _orthonormalize(matrix: np.ndarray) -> np.ndarray:
    q, r = np.linalg.qr(matrix)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def misaligned(chain: ChainModes, rotation_vector: Sequence[float]) -> ChainModes:
    """
    Rotate every ion's displacement frame by a small rigid rotation.

    Args:
        chain: Ideal chain
        rotation_vector: Rotation vector [rad] in beam-frame coordinates

    Returns:
        ChainModes with rotated, re-orthonormalised mode vectors
    """
    rotation = Rotation.from_rotvec(np.asarray(rotation_vector, dtype=float)).as_matrix()
    n = chain.n_ions
    rotated = chain.mode_matrix.copy()
    for ion in range(n):
        rows = [ion, n + ion, 2 * n + ion]
        rotated[rows, :] = rotation @ chain.mode_matrix[rows, :]
    return ChainModes(
        n_ions=n,
        mass=chain.mass,
        frequencies=chain.frequencies.copy(),
        mode_matrix=_orthonormalize(rotated),
        directions=chain.directions,
        positions=chain.positions,
    )


def alignment_violations(
    chain: ChainModes,
    alignment: AlignmentError,
    reading: str = "element",
) -> List[Tuple[int, str, Optional[int], float]]:
    """
    Off-dominant projections that exceed the alignment bound.

    With reading="element" every off-axis element must satisfy |ν| < ε/√N;
    with reading="vector" the norm of all off-axis elements of a mode must be below ε.

    Returns:
        list: (mode, axis, ion or None, offending value) tuples; empty when aligned
    """
    n = chain.n_ions
    bound = alignment.epsilon / math.sqrt(n)
    violations = []
    for p, direction in enumerate(chain.directions):
        off_axes = [a for a in "xyz" if a != direction.frame_axis]
        if reading == "element":
            for axis in off_axes:
                for ion in range(n):
                    value = abs(chain.projection(p, axis, ion))
                    if value >= bound:
                        violations.append((p, axis, ion, value))
        elif reading == "vector":
            norm = math.sqrt(sum(chain.projection(p, a, i) ** 2 for a in off_axes for i in range(n)))
            if norm >= alignment.epsilon:
                violations.append((p, "".join(off_axes), None, norm))
        else:
            raise ValueError(f"unknown alignment reading {reading!r}")
    return violations


def coupling_params(
    beams: Tuple[BeamGeometry, BeamGeometry],
    equilibria: Tuple[BeamFramePoint, BeamFramePoint],
    chain: ChainModes,
    ion: int,
) -> CouplingParams:
    """
    Dimensionless offsets γ⁽⁰⁾, λ⁽⁰⁾ and per-mode c-coefficients for both beams.

    Args:
        beams: The two Raman beams
        equilibria: Equilibrium of the addressed ion in each beam's frame
        chain: Normal modes
        ion: Addressed ion index

    Returns:
        CouplingParams
    """
    if not 0 <= ion < chain.n_ions:
        raise ConfigError(f"ion index {ion} outside chain of {chain.n_ions}", "addressing.ion")
    zeta = np.array([zero_point_spread(chain.mass, w) for w in chain.frequencies])
    nu = {axis: chain.projections(axis, ion) for axis in "xyz"}

    gamma0 = np.zeros((2, 2))
    lambda0 = np.zeros((2, 2))
    c_beta = np.zeros((2, chain.n_modes))
    c_gamma = np.zeros((2, 2, chain.n_modes))
    c_lambda = np.zeros((2, 2, chain.n_modes))
    for b, (beam, point) in enumerate(zip(beams, equilibria)):
        sign = beam.propagation_sign
        c_beta[b] = sign * beam.wavevector * zeta * nu["y"]
        for a, axis in enumerate((Axis.X, Axis.Z)):
            offset = point.x if axis is Axis.X else point.z
            gamma0[b, a] = offset / beam.waist(axis)
            y_r = beam.rayleigh_range(axis)
            lambda0[b, a] = (point.y - beam.focal_y(axis)) / y_r
            c_gamma[b, a] = zeta * nu[axis.value] / beam.waist(axis)
            c_lambda[b, a] = sign * zeta * nu["y"] / y_r

    worst = float(np.max(np.abs(lambda0)))
    if worst >= LAMBDA0_HARD_LIMIT:
        raise ConfigError(f"|λ⁽⁰⁾| = {worst:.3g} places the ion outside the Rayleigh range", "addressing.y0_m")
    if worst > LAMBDA0_WARN_LIMIT:
        logger.warning("|λ⁽⁰⁾| = %.3g exceeds %.2g; low-order expansion may be inaccurate", worst, LAMBDA0_WARN_LIMIT)

    return CouplingParams(
        gamma0=gamma0,
        lambda0=lambda0,
        c_beta=c_beta,
        c_gamma=c_gamma,
        c_lambda=c_lambda,
        y0=(equilibria[0].y, equilibria[1].y),
    )


def coupling_estimates(
    mass: float,
    beam: BeamGeometry,
    epsilon: float = 0.05,
    columns: Sequence[Tuple[float, Direction]] = (
        (2 * math.pi * 150e3, Direction.AXIAL),
        (2 * math.pi * 600e3, Direction.AXIAL),
        (2 * math.pi * 2.0e6, Direction.AXIAL),
        (2 * math.pi * 3.0e6, Direction.HORIZONTAL),
        (2 * math.pi * 2.5e6, Direction.VERTICAL),
    ),
) -> List[Dict[str, float]]:
    """
    Worst-case |c|·√N magnitudes for modes aligned up to ε.

    The dominant projection is 1/√N and off-dominant ones ε/√N, so the √N
    factor cancels and the table is independent of N.

    Returns:
        list: One dict per column with keys omega, direction and the five coefficients
    """
    rows = []
    for omega, direction in columns:
        zeta = zero_point_spread(mass, omega)
        nu = {a: (1.0 if a == direction.frame_axis else epsilon) for a in "xyz"}
        rows.append({
            "omega": omega,
            "direction": direction.value,
            "c_beta_y": beam.wavevector * zeta * nu["y"],
            "c_gamma_x": zeta * nu["x"] / beam.waist_x,
            "c_gamma_z": zeta * nu["z"] / beam.waist_z,
            "c_lambda_x": zeta * nu["y"] / beam.rayleigh_range(Axis.X),
            "c_lambda_z": zeta * nu["y"] / beam.rayleigh_range(Axis.Z),
        })
    return rows
