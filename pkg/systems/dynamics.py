"""
Effective single-mode gate: Rabi rate and phase, Lamb-Dicke-like parameters,
Fock-resolved rotation angles Θ_n, thermal bright population and the
Debye-Waller check.
"""
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Optional, Sequence, Tuple

import mpmath as mp
import numpy as np
from scipy.linalg import expm
from scipy.special import eval_laguerre

from core.expansion import hermite, position_operator
from core.modes import zero_point_spread
from utils.config import (
    DEBYE_WALLER_RTOL, DIRECT_HYP2F1_MAX_N, HBAR, THETA_BASE_DPS, THETA_M_CAP, THETA_RTOL,
    THERMAL_TAIL_TOLERANCE,
)
from utils.errors import ConfigError, ConvergenceError
from utils.types import (
    Axis, BeamGeometry, ChainModes, CouplingParams, EffectiveGate, FockSpace, Geometry, ThermalState,
)

logger = logging.getLogger(__name__)

# double precision is trusted while the series' largest term stays within 10**7 of the result
FLOAT_SERIES_DIGITS = 7.0


def omega0_psi0(
    beams: Tuple[BeamGeometry, BeamGeometry],
    coupling: CouplingParams,
    effective_dipole: float,
) -> Tuple[float, float]:
    """
    Rabi rate and phase of the static part of the two-beam coupling.

    Args:
        beams: The two Raman beams
        coupling: Offsets γ⁽⁰⁾, λ⁽⁰⁾ and beam-frame y⁽⁰⁾ per beam
        effective_dipole: Effective dipole constant D̄ of the Raman transition

    Returns:
        tuple: (Ω₀ [rad/s], Ψ₀ [rad])
    """
    b1, b2 = beams
    lam = coupling.lambda0
    gam = coupling.gamma0
    if np.max(np.abs(lam)) >= 0.5:
        raise ConfigError("|λ⁽⁰⁾| must stay below 0.5", "addressing.y0_m")
    prefactor = effective_dipole / (math.pi * HBAR) * math.sqrt(
        b1.power * b2.power / (b1.waist_x * b2.waist_x * b1.waist_z * b2.waist_z))
    focus = float(np.prod(1.0 + lam ** 2)) ** -0.25
    gaussian = math.exp(-float(np.sum(gam ** 2 / (1.0 + lam ** 2))))
    omega0 = prefactor * focus * gaussian

    y1, y2 = coupling.y0
    psi0 = (
        b1.phase0 - b2.phase0
        + b2.wavevector * y2 - b1.wavevector * y1
        + 0.5 * float(np.sum(np.arctan(lam)))
        - float(np.sum(lam * gam ** 2 / (1.0 + lam ** 2)))
    )
    return omega0, psi0


def effective_waist(geometry: Geometry, beams: Tuple[BeamGeometry, BeamGeometry]) -> float:
    """w_x^eff: w/√2 for two identical co-propagating beams, else the tight beam's waist."""
    tight = min(b.waist_x for b in beams)
    if geometry is Geometry.CO_PROPAGATING:
        return tight / math.sqrt(2.0)
    return tight


def eta_xi(
    geometry: Geometry,
    chain: ChainModes,
    mode: int,
    ion: int,
    waist_x: float,
    x0: float = 0.0,
    defocus: float = 0.0,
    rayleigh: float = math.inf,
) -> Tuple[float, float]:
    """
    Lamb-Dicke-like parameter η and misalignment ξ of the dominant axial mode.

    Args:
        geometry: Co- or counter-propagating beams
        chain: Normal modes
        mode: Index of the dominant axial mode
        ion: Addressed ion
        waist_x: Focal waist of the tight beam(s) along x [m]
        x0: Equilibrium offset along x [m]
        defocus: Focal offset y⁽⁰⁾f [m]
        rayleigh: Rayleigh range along x [m]

    Returns:
        tuple: (η, ξ)
    """
    w_eff = waist_x / math.sqrt(2.0) if geometry is Geometry.CO_PROPAGATING else waist_x
    scale = w_eff * math.sqrt(1.0 + (defocus / rayleigh) ** 2)
    zeta = zero_point_spread(chain.mass, float(chain.frequencies[mode]))
    nu = abs(chain.projection(mode, "x", ion))
    return zeta * nu / scale, x0 / scale


def hermite_coupling_coefficients(eta: float, xi: float, order: int) -> np.ndarray:
    """Coefficients (−1)^l η^l H_l(ξ)/l! of (â+â†)^l, l = 0 … order."""
    return np.array([(-eta) ** l * hermite(l, xi) / math.factorial(l) for l in range(order + 1)])


def two_beam_coupling_coefficients(
    c1: float, g1: float, c2: float, g2: float, order: int,
) -> np.ndarray:
    """
    Coefficients of (â+â†)^l from two independently offset tight beams.

    Args:
        c1, c2: Per-beam coupling of γ̂_λ to (â+â†)
        g1, g2: Per-beam static offsets γ_λ⁽⁰⁾
        order: Highest power l

    Returns:
        np.ndarray: Σ_m (−1)^l c1^m c2^(l−m) H_m(g1) H_(l−m)(g2) / (m!(l−m)!)
    """
    h1 = [hermite(m, g1) for m in range(order + 1)]
    h2 = [hermite(m, g2) for m in range(order + 1)]
    coefficients = np.zeros(order + 1)
    for l in range(order + 1):
        coefficients[l] = (-1) ** l * sum(
            c1 ** m * c2 ** (l - m) * h1[m] * h2[l - m] / (math.factorial(m) * math.factorial(l - m))
            for m in range(l + 1)
        )
    return coefficients


def hypergeometric_moment_factor(n: int, m: int) -> int:
    """₂F₁(1+n, −m; 1; 2) as an exact integer: Σ_k C(n+k,k) C(m,k) (−2)^k."""
    return sum(math.comb(n + k, k) * math.comb(m, k) * (-2) ** k for k in range(m + 1))


def fock_moment(n: int, m: int) -> int:
    """
    ⟨n|(â+â†)^(2m)|n⟩ from the finite factorial sum, in exact arithmetic.

    Args:
        n: Fock level
        m: Half the moment order

    Returns:
        int
    """
    if n < 0 or m < 0:
        raise ValueError(f"n and m must be non-negative, got n={n}, m={m}")
    total = Fraction(0)
    two_m = math.factorial(2 * m)
    for i in range(m + 1):
        total += Fraction(-1, 2) ** (m - i) * Fraction(
            two_m * math.comb(n + i, i), math.factorial(m - i) * math.factorial(i))
    if total.denominator != 1:
        raise ArithmeticError(f"moment ({n}, {m}) is not an integer: {total}")
    return int(total)


def fock_moment_hypergeometric(n: int, m: int) -> int:
    """Same moment as (−½)^m (2m)!/m! · ₂F₁(1+n, −m; 1; 2), i.e. (−1)^m (2m−1)!! ₂F₁."""
    if n < 0 or m < 0:
        raise ValueError(f"n and m must be non-negative, got n={n}, m={m}")
    double_factorial = math.factorial(2 * m) // (math.factorial(m) * 2 ** m)
    return (-1) ** m * double_factorial * hypergeometric_moment_factor(n, m)


def log_fock_moment(n: int, m: int) -> float:
    """Natural log of the moment; exact integers keep large n free of overflow."""
    return math.log(fock_moment_hypergeometric(n, m))


@dataclass(frozen=True)
class ThetaSeries:
    """Θ_n with the series order at which the tolerance was met."""
    value: float
    order: int
    converged: bool = True


def _theta_precision(n: int, eta: float, xi: float) -> int:
    growth = 4.0 * eta ** 2 * (n + 0.5) + xi ** 2
    return THETA_BASE_DPS + math.ceil(growth * math.log10(math.e))


def theta_n(
    n: int,
    eta: float,
    xi: float,
    pulse_area: float,
    rtol: float = THETA_RTOL,
    m_cap: int = THETA_M_CAP,
) -> ThetaSeries:
    """
    Fock-resolved rotation angle from the hypergeometric m-series.

    Θ_n = Ω₀t · Σ_m (−η²/2)^m H_2m(ξ)/m! · ₂F₁(1+n, −m; 1; 2)

    The alternating series is summed in mpmath with enough digits to absorb
    its cancellation. Summation stops at the first m whose error estimate,
    half the next term, is below rtol·|S_m| for three consecutive m; the
    looked-ahead terms are included in the value.

    Args:
        n: Fock level
        eta: Lamb-Dicke-like parameter
        xi: Misalignment parameter
        pulse_area: Ω₀t [rad]
        rtol: Relative tolerance
        m_cap: Largest m tried

    Returns:
        ThetaSeries with the value and the order m at which rtol was met
    """
    if eta < 0:
        raise ValueError(f"eta must be non-negative, got {eta}")
    if n < 0:
        raise ValueError(f"Fock level must be non-negative, got {n}")
    if eta == 0:
        return ThetaSeries(float(pulse_area), 0)

    with mp.workdps(_theta_precision(n, eta, xi)):
        x = mp.mpf(xi)
        ratio = -mp.mpf(eta) ** 2 / 2
        h_even, h_odd = mp.mpf(1), 2 * x  # H_0, H_1
        f_prev, f_cur = 0, 1  # F_{-1} (unused), F_0
        coefficient = mp.mpf(1)  # (−η²/2)^m / m!
        partial = mp.mpf(0)
        terms = []
        quiet = 0
        for m in range(m_cap + 1):
            term = coefficient * h_even * f_cur
            terms.append(term)
            partial += term
            if m >= 1:
                # estimate for S_{m-1} from the current term
                if abs(term) / 2 < rtol * abs(partial - term):
                    quiet += 1
                    if quiet == 3:
                        order = m - 3
                        return ThetaSeries(float(pulse_area * partial), order)
                else:
                    quiet = 0
            # H_2m, H_2m+1 → H_2m+2, H_2m+3
            h_even = 2 * x * h_odd - 2 * (2 * m + 1) * h_even
            h_odd = 2 * x * h_even - 2 * (2 * m + 2) * h_odd
            if m == 0:
                f_prev, f_cur = f_cur, -2 * n - 1
            else:
                f_prev, f_cur = f_cur, ((-2 * n - 1) * f_cur + m * f_prev) // (m + 1)
            coefficient = coefficient * ratio / (m + 1)
    raise ConvergenceError(
        f"Θ_n series for n={n}, η={eta}, ξ={xi} did not converge by m={m_cap}",
        partial=float(pulse_area * partial), iterations=m_cap)


def hyp2f1_terminating(a: float, n: int, c: float, z: float) -> float:
    """
    Direct sum of ₂F₁(a, −n; c; z) for small n.

    Cancellation destroys every digit for large n; callers above
    DIRECT_HYP2F1_MAX_N must use the recurrence.
    """
    if n > DIRECT_HYP2F1_MAX_N:
        raise ValueError(f"direct summation is unreliable for n > {DIRECT_HYP2F1_MAX_N}")
    total = 0.0
    term = 1.0
    for k in range(n + 1):
        total += term
        term *= (a + k) * (-n + k) / ((c + k) * (k + 1)) * z
    return total


def aligned_profile(n_max: int, eta: float) -> np.ndarray:
    """Θ_n/Ω₀t at ξ = 0 for n = 0 … n_max, by forward recurrence of ₂F₁(½, −n; 1; z)."""
    z = 4.0 * eta ** 2 / (1.0 + 2.0 * eta ** 2)
    g = np.empty(n_max + 1)
    g[0] = 1.0
    if n_max >= 1:
        g[1] = 1.0 - z / 2.0
    for k in range(1, n_max):
        g[k + 1] = ((2 * k + 1) * (1.0 - z / 2.0) * g[k] - k * (1.0 - z) * g[k - 1]) / (k + 1)
    return g / math.sqrt(1.0 + 2.0 * eta ** 2)


def theta_n_aligned(n: int, eta: float, pulse_area: float) -> float:
    """Θ_n = Ω₀t/√(1+2η²) · ₂F₁(½, −n; 1; 4η²/(1+2η²)) for a perfectly centred ion."""
    if eta < 0:
        raise ValueError(f"eta must be non-negative, got {eta}")
    if n < 0:
        raise ValueError(f"Fock level must be non-negative, got {n}")
    return float(pulse_area * aligned_profile(n, eta)[n])


def _float_series_profile(n_max: int, eta: float, xi: float) -> np.ndarray:
    """Vectorised m-series with positive moment factors; valid while cancellation is mild."""
    n = np.arange(n_max + 1, dtype=float)
    half = eta ** 2 / 2.0
    # B_m = (η²/2)^m (−1)^m F_m(n) > 0; term_m = B_m H_2m(ξ)/m!
    b_prev = np.zeros_like(n)
    b_cur = np.ones_like(n)
    total = np.zeros_like(n)
    quiet = 0
    with mp.workdps(THETA_BASE_DPS):
        x = mp.mpf(xi)
        h = [mp.mpf(1), 2 * x]
        for m in range(THETA_M_CAP + 1):
            while len(h) <= 2 * m:
                k = len(h) - 1
                h.append(2 * x * h[k] - 2 * k * h[k - 1])
            k_m = float(h[2 * m] / mp.factorial(m))
            term = b_cur * k_m
            total += term
            if np.all(np.abs(term) <= THETA_RTOL * 1e-3 * np.abs(total)):
                quiet += 1
                if quiet == 3:
                    return total
            else:
                quiet = 0
            b_prev, b_cur = b_cur, half * ((2.0 * n + 1.0) * b_cur + m * half * b_prev) / (m + 1)
    raise ConvergenceError(f"profile series for η={eta}, ξ={xi} did not converge", partial=total,
                           iterations=THETA_M_CAP)


@lru_cache(maxsize=64)
def _cached_profile(n_max: int, eta: float, xi: float) -> np.ndarray:
    if eta == 0:
        profile = np.ones(n_max + 1)
    elif xi == 0:
        profile = aligned_profile(n_max, eta)
    elif 4.0 * eta ** 2 * (n_max + 0.5) * math.log10(math.e) <= FLOAT_SERIES_DIGITS:
        profile = _float_series_profile(n_max, eta, xi)
    else:
        logger.warning("Θ_n profile for n ≤ %d, η=%g, ξ=%g needs arbitrary precision; this is slow", n_max, eta, xi)
        profile = np.array([theta_n(n, eta, xi, 1.0).value for n in range(n_max + 1)])
    profile.setflags(write=False)
    return profile


def theta_profile(n_max: int, eta: float, xi: float = 0.0) -> np.ndarray:
    """Θ_n/Ω₀t for n = 0 … n_max (read-only, cached)."""
    return _cached_profile(int(n_max), float(eta), float(xi))


def thermal_state(nbar: float, tolerance: float = THERMAL_TAIL_TOLERANCE) -> ThermalState:
    return ThermalState.with_tail(nbar, tolerance)


def sigma_psi(psi: float) -> np.ndarray:
    """e^{iΨ}|↑⟩⟨↓| + h.c. in the (|↓⟩, |↑⟩) basis."""
    return np.array([[0.0, np.exp(-1j * psi)], [np.exp(1j * psi), 0.0]])


def gate_block(theta: float, psi: float) -> np.ndarray:
    """cosΘ·I − i·sinΘ·σ_Ψ on the qubit at one Fock level."""
    return math.cos(theta) * np.eye(2) - 1j * math.sin(theta) * sigma_psi(psi)


def p_up(state: ThermalState, gate: EffectiveGate) -> float:
    """Thermally averaged bright population Σ_n w_n sin²Θ_n after one pulse from |↓⟩."""
    return p_up_at(state, gate.pulse_area, gate.eta, gate.xi)


def p_up_at(state: ThermalState, pulse_area: float, eta: float, xi: float = 0.0) -> float:
    weights = state.weights()
    theta = pulse_area * theta_profile(state.cutoff, eta, xi)
    # numpy's pairwise summation keeps the result independent of evaluation order
    return float(np.sum(weights * np.sin(theta) ** 2))


def debye_waller_factors(kappa: float, n_max: int) -> np.ndarray:
    """Diagonal ⟨n|e^{iκ(â+â†)}|n⟩ = e^{−κ²/2} L_n(κ²)."""
    n = np.arange(n_max + 1)
    return np.exp(-kappa ** 2 / 2.0) * eval_laguerre(n, kappa ** 2)


def _displacement_minus_identity(kappa: float, dimension: int) -> np.ndarray:
    x = position_operator(FockSpace(dimension - 1)).toarray()
    return expm(1j * kappa * x) - np.eye(dimension)


def debye_waller_norm(kappa: float, space: FockSpace, subspace: Optional[int] = None) -> float:
    """
    ‖e^{iκ(â+â†)} − 1‖ restricted to Fock levels n ≤ subspace (default: the whole cutoff).

    The exponential is built on a working space twice as large and compared
    with a build four times as large, so truncation of (â+â†) cannot leak into
    the restricted block unnoticed.
    """
    if kappa == 0:
        return 0.0
    limit = space.cutoff if subspace is None else subspace
    if not 0 <= limit <= space.cutoff:
        raise ValueError(f"subspace {subspace} outside cutoff {space.cutoff}")
    block = slice(0, limit + 1)
    values = []
    for factor in (2, 4):
        matrix = _displacement_minus_identity(kappa, factor * space.dimension)
        values.append(float(np.linalg.norm(matrix[block, block], 2)))
    if abs(values[0] - values[1]) > DEBYE_WALLER_RTOL * max(1.0, values[1]):
        raise ConvergenceError(f"Debye-Waller norm not converged in cutoff for κ={kappa}", partial=values[1])
    return values[1]


def net_kappas(coupling: CouplingParams) -> np.ndarray:
    """Per-mode coefficient of (â+â†) in β̂₂ − β̂₁."""
    return coupling.c_beta[1] - coupling.c_beta[0]


def debye_waller_check(
    coupling: CouplingParams,
    geometry: Geometry,
    space: FockSpace,
    modes: Optional[Sequence[int]] = None,
    subspace: Optional[int] = None,
) -> float:
    """Triangle-inequality bound Σ_p ‖e^{iκ_p(â_p+â_p†)} − 1‖ over the selected modes."""
    kappas = net_kappas(coupling)
    selected = range(len(kappas)) if modes is None else modes
    total = sum(debye_waller_norm(float(kappas[p]), space, subspace) for p in selected)
    logger.debug("Debye-Waller bound %.3g for %s geometry", total, geometry.value)
    return total


def thermal_debye_waller_shift(kappa: float, nbar: float, tolerance: float = THERMAL_TAIL_TOLERANCE) -> float:
    """Thermal average of |1 − ⟨n|e^{iκ(â+â†)}|n⟩|, the mean fractional Rabi-rate change."""
    state = thermal_state(nbar, tolerance)
    factors = debye_waller_factors(kappa, state.cutoff)
    return float(np.sum(state.weights() * np.abs(1.0 - factors)))


def build_gate(
    beams: Tuple[BeamGeometry, BeamGeometry],
    coupling: CouplingParams,
    chain: ChainModes,
    geometry: Geometry,
    effective_dipole: float,
    mode: int,
    ion: int,
    duration: float = 1.0,
) -> EffectiveGate:
    """EffectiveGate of the addressed ion from beams and couplings."""
    omega0, psi0 = omega0_psi0(beams, coupling, effective_dipole)
    t = 0 if beams[0].waist_x <= beams[1].waist_x else 1
    tight = beams[t]
    x0 = float(coupling.gamma0[t, 0]) * tight.waist_x
    defocus = float(coupling.lambda0[t, 0]) * tight.rayleigh_range(Axis.X)
    eta, xi = eta_xi(geometry, chain, mode, ion, tight.waist_x, x0, defocus, tight.rayleigh_range(Axis.X))
    return EffectiveGate(omega0, psi0, eta, xi, duration, 0.0, geometry)
