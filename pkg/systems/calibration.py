"""
Rabi-rate calibration, the delayed-gate heating model and the heating-rate
and power-law fits.
"""
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import least_squares, minimize, minimize_scalar

from systems.dynamics import theta_profile
from utils.config import (
    FIT_MAX_ITERATIONS, FIT_MAX_NBAR, FIT_SIGMA_FLOOR, FIT_TABLE_NODES, FIT_XATOL,
    RABI_BRACKET, RABI_BRACKET_SAMPLES, RABI_XTOL, THERMAL_TAIL_TOLERANCE,
)
from utils.errors import BracketError, ConvergenceError, DataError
from utils.types import FitResult, HeatingModel, PowerLawFit, ThermalState

logger = logging.getLogger(__name__)

NEWTON_MAX_STEPS = 30
SEED_GRID_POINTS = 48


class RabiOptimizer:
    """
    Thermal bright population as a function of pulse area for fixed η, ξ.

    Holds one Θ_n/Ω₀t profile that grows on demand, so sweeps over n̄ reuse it.
    """

    def __init__(self, eta: float, xi: float = 0.0, tail: float = THERMAL_TAIL_TOLERANCE, xtol: float = RABI_XTOL):
        if eta < 0:
            raise ValueError(f"eta must be non-negative, got {eta}")
        self.eta = eta
        self.xi = xi
        self.tail = tail
        self.xtol = xtol
        self._profile = theta_profile(64, eta, xi)

    def profile(self, n_max: int) -> np.ndarray:
        """Θ_n/Ω₀t for n ≤ n_max; grows the held profile, never shrinks it."""
        profile = self._profile
        if n_max >= len(profile):
            size = max(n_max + 1, 2 * len(profile))
            profile = theta_profile(size - 1, self.eta, self.xi)
            if len(profile) > len(self._profile):
                self._profile = profile
        return profile[: n_max + 1]

    def thermal(self, nbar: float) -> Tuple[np.ndarray, np.ndarray]:
        """Weights and Θ_n/Ω₀t of the truncated thermal state."""
        state = ThermalState.with_tail(nbar, self.tail)
        return state.weights(), self.profile(state.cutoff)

    def p_up(self, nbar: float, pulse_area: float) -> float:
        weights, g = self.thermal(nbar)
        return float(np.sum(weights * np.sin(pulse_area * g) ** 2))

    def _derivatives(self, weights, g, area) -> Tuple[float, float]:
        first = float(np.sum(weights * g * np.sin(2.0 * area * g)))
        second = float(np.sum(2.0 * weights * g ** 2 * np.cos(2.0 * area * g)))
        return first, second

    def newton(self, nbar: float, start: float) -> Optional[float]:
        """Polish a maximum of P↑ from start; None when the iteration leaves a maximum."""
        weights, g = self.thermal(nbar)
        area = start
        for _ in range(NEWTON_MAX_STEPS):
            first, second = self._derivatives(weights, g, area)
            if second >= 0:
                return None
            step = first / second
            area -= step
            if abs(step) <= 1e-14 * max(1.0, abs(area)):
                return area
        return area if abs(step) <= self.xtol else None

    def optimize(self, nbar: float) -> float:
        """
        Pulse area Ω₀t maximising P↑ at mean phonon number nbar.

        Args:
            nbar: Mean phonon number

        Returns:
            float: Ω₀t_opt at the first maximum of P↑ inside RABI_BRACKET

        Raises:
            BracketError: P↑ has no interior maximum before the bracket edge
        """
        if self.eta == 0:
            return math.pi / 2.0
        weights, g = self.thermal(nbar)
        if nbar == 0:
            return (math.pi / 2.0) / float(g[0])

        # first maximum: the sample before the first fall
        lo, hi = RABI_BRACKET
        samples = np.linspace(lo, hi, RABI_BRACKET_SAMPLES)
        values = np.array([np.sum(weights * np.sin(a * g) ** 2) for a in samples])
        falling = np.flatnonzero(np.diff(values) < -1e-12)
        if falling.size == 0:
            raise BracketError(f"P↑ at n̄={nbar} still rises at the bracket edge {hi:.4g}", partial=float(hi))
        peak = int(falling[0])
        if peak == 0:
            raise BracketError(f"P↑ at n̄={nbar} falls from the bracket edge {lo:.4g}", partial=float(lo))

        result = minimize_scalar(
            lambda a: -float(np.sum(weights * np.sin(a * g) ** 2)),
            bracket=(samples[peak - 1], samples[peak], samples[peak + 1]),
            method="golden",
            options={"xtol": 1e-10},
        )
        polished = self.newton(nbar, float(result.x))
        return float(result.x) if polished is None else polished


def optimize_rabi(nbar: float, eta: float, xi: float = 0.0, tail: float = THERMAL_TAIL_TOLERANCE) -> float:
    """Ω₀t maximising the thermally averaged bright population at nbar."""
    return RabiOptimizer(eta, xi, tail).optimize(nbar)


def static_rabi(nbar0: float, eta: float, xi: float = 0.0, tail: float = THERMAL_TAIL_TOLERANCE) -> float:
    """Pulse area calibrated without delay, i.e. optimized at the initial temperature."""
    return optimize_rabi(nbar0, eta, xi, tail)


@dataclass
class Curve:
    """One measured series against the heating delay."""
    delay: np.ndarray
    values: np.ndarray
    sigma: Optional[np.ndarray] = None

    def __post_init__(self):
        self.delay = np.asarray(self.delay, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.sigma is not None:
            self.sigma = np.asarray(self.sigma, dtype=float)
        if self.delay.shape != self.values.shape:
            raise DataError("delay and value columns differ in length")

    def weights(self) -> np.ndarray:
        if self.sigma is None:
            return np.full(self.values.shape, 1.0 / FIT_SIGMA_FLOOR)
        return 1.0 / np.maximum(self.sigma, FIT_SIGMA_FLOOR)


@dataclass
class OptimalCurves:
    """Splines of Ω₀t_opt and P↑^opt in log(1+n̄) between nbar0 and max_nbar."""
    nbar_min: float
    nbar_max: float
    rabi: CubicSpline
    p_up: CubicSpline

    def __call__(self, nbar) -> Tuple[np.ndarray, np.ndarray]:
        x = np.log1p(np.asarray(nbar, dtype=float))
        return self.rabi(x), self.p_up(x)


def optimal_curves(optimizer: RabiOptimizer, nbar0: float, nbar_max: float, nodes: int = FIT_TABLE_NODES) -> OptimalCurves:
    """Tabulate the optimized rate and population on a geometric n̄ grid, warm-starting Newton."""
    grid = np.expm1(np.linspace(np.log1p(nbar0), np.log1p(nbar_max), nodes))
    rabi = np.empty(nodes)
    population = np.empty(nodes)
    previous = None
    for i, nbar in enumerate(grid):
        area = optimizer.newton(nbar, previous) if previous is not None else None
        if area is None:
            area = optimizer.optimize(nbar)
        rabi[i] = area
        population[i] = optimizer.p_up(nbar, area)
        previous = area
    x = np.log1p(grid)
    return OptimalCurves(float(grid[0]), float(grid[-1]), CubicSpline(x, rabi), CubicSpline(x, population))


@lru_cache(maxsize=16)
def _cached_model(nbar0: float, eta: float, xi: float, nbar_max: float, tail: float) -> "HeatingFitModel":
    return HeatingFitModel(nbar0, eta, xi, nbar_max, tail)


class HeatingFitModel:
    """Simulated delayed-gate curves for a heating rate and a bright-population offset."""

    def __init__(self, nbar0: float, eta: float, xi: float = 0.0, nbar_max: float = FIT_MAX_NBAR,
                 tail: float = THERMAL_TAIL_TOLERANCE):
        if nbar_max <= nbar0:
            raise ValueError(f"max n̄ {nbar_max} must exceed n̄₀ {nbar0}")
        self.nbar0 = nbar0
        self.nbar_max = nbar_max
        self.optimizer = RabiOptimizer(eta, xi, tail)
        self.static_area = self.optimizer.optimize(nbar0)
        self.curves = optimal_curves(self.optimizer, nbar0, nbar_max)

    @classmethod
    def cached(cls, nbar0: float, eta: float, xi: float = 0.0, nbar_max: float = FIT_MAX_NBAR,
               tail: float = THERMAL_TAIL_TOLERANCE) -> "HeatingFitModel":
        return _cached_model(float(nbar0), float(eta), float(xi), float(nbar_max), float(tail))

    def static_p_up(self, nbar: np.ndarray) -> np.ndarray:
        return np.array([self.optimizer.p_up(n, self.static_area) for n in np.atleast_1d(nbar)])

    def simulate(self, delay: np.ndarray, rate: float, offset: float = 0.0) -> dict:
        """Static and optimized P↑ (minus offset) and the optimized rate relative to the first delay."""
        heating = HeatingModel(self.nbar0, rate)
        nbar = heating.nbar(delay)
        rabi, optimized = self.curves(nbar)
        first = float(self.curves(heating.nbar(np.min(delay)))[0])
        return {
            "nbar": nbar,
            "p_up_static": self.static_p_up(nbar) - offset,
            "p_up_optimized": optimized - offset,
            "rabi": rabi,
            "rabi_ratio": rabi / first,
        }


def _check_curves(static: Curve, optimized: Optional[Curve], rabi: Optional[Curve]) -> None:
    curves = [c for c in (static, optimized, rabi) if c is not None]
    for curve in curves:
        if len(curve.delay) < 3:
            raise DataError(f"at least 3 delay points are required, got {len(curve.delay)}")
        if np.any(curve.delay < 0):
            raise DataError("delays must be non-negative")
        if np.ptp(curve.delay) == 0:
            raise DataError("delays span no interval; the heating rate is not identifiable")
    if all(np.ptp(c.values) < 1e-12 for c in curves):
        raise DataError("measured curves are constant; the heating rate is not identifiable")


def fit_heating(
    static: Curve,
    nbar0: float,
    eta: float,
    xi: float = 0.0,
    optimized: Optional[Curve] = None,
    rabi: Optional[Curve] = None,
    nbar_max: float = FIT_MAX_NBAR,
    xatol: float = FIT_XATOL,
    model: Optional[HeatingFitModel] = None,
) -> FitResult:
    """
    Joint fit of the heating rate ṅ and the population offset δP↑.

    Args:
        static: Measured P↑ with the static rate
        nbar0: Initial mean phonon number (held fixed)
        eta: Lamb-Dicke-like parameter
        xi: Misalignment parameter
        optimized: Measured P↑ with the per-delay optimized rate
        rabi: Measured optimal pulse area (any units; compared as a ratio to its first delay)
        nbar_max: Largest n̄ the tabulated model covers
        xatol: Simplex size at convergence, in scaled parameters
        model: Prebuilt simulation model

    Returns:
        FitResult
    """
    _check_curves(static, optimized, rabi)
    model = model or HeatingFitModel.cached(nbar0, eta, xi, nbar_max)
    max_delay = max(float(np.max(c.delay)) for c in (static, optimized, rabi) if c is not None)
    rate_limit = (model.nbar_max - nbar0) / max_delay

    def p_residuals(rate):
        """Unweighted simulated-minus-measured P↑ residuals and their weights, before the offset."""
        parts, weights = [], []
        for curve, key in ((static, "p_up_static"), (optimized, "p_up_optimized")):
            if curve is not None:
                parts.append(model.simulate(curve.delay, rate)[key] - curve.values)
                weights.append(curve.weights())
        return np.concatenate(parts), np.concatenate(weights)

    def residuals(params) -> np.ndarray:
        rate, offset = params
        diff, weights = p_residuals(rate)
        blocks = [(diff - offset) * weights]
        if rabi is not None:
            measured = rabi.values / rabi.values[np.argmin(rabi.delay)]
            simulated = model.simulate(rabi.delay, rate)["rabi_ratio"]
            blocks.append((simulated - measured) / FIT_SIGMA_FLOOR)
        return np.concatenate(blocks)

    def best_offset(rate) -> float:
        diff, weights = p_residuals(rate)
        return float(np.clip(np.sum(weights ** 2 * diff) / np.sum(weights ** 2), 0.0, 1.0 - 1e-12))

    # coarse seed with the offset solved in closed form for each candidate rate
    candidates = np.concatenate([[0.0], np.geomspace(rate_limit * 1e-6, rate_limit, SEED_GRID_POINTS)])
    costs = []
    for rate in candidates:
        offset = best_offset(rate)
        costs.append(float(np.sum(residuals((rate, offset)) ** 2)))
    seed_rate = float(candidates[int(np.argmin(costs))])
    seed_offset = best_offset(seed_rate)
    rate_scale = seed_rate if seed_rate > 0 else rate_limit * 1e-6
    offset_scale = FIT_SIGMA_FLOOR
    logger.debug("heating fit seed ṅ=%.6g δP=%.3g", seed_rate, seed_offset)

    def scaled_cost(z) -> float:
        rate, offset = z[0] * rate_scale, z[1] * offset_scale
        if rate < 0 or rate > rate_limit or offset < 0 or offset >= 1:
            return 1e30
        return float(np.sum(residuals((rate, offset)) ** 2))

    # converged on simplex diameter only
    simplex = minimize(
        scaled_cost,
        x0=np.array([seed_rate / rate_scale, seed_offset / offset_scale]),
        method="Nelder-Mead",
        options={"xatol": xatol, "fatol": np.inf, "maxiter": FIT_MAX_ITERATIONS, "maxfev": 4 * FIT_MAX_ITERATIONS},
    )
    if not simplex.success:
        raise ConvergenceError(f"heating fit did not converge: {simplex.message}",
                               partial=(simplex.x[0] * rate_scale, simplex.x[1] * offset_scale),
                               iterations=int(simplex.nit))

    start = np.array([simplex.x[0] * rate_scale, simplex.x[1] * offset_scale])
    polish = least_squares(
        residuals,
        x0=np.clip(start, [0.0, 0.0], [rate_limit, 1.0 - 1e-9]),
        bounds=([0.0, 0.0], [rate_limit, 1.0 - 1e-12]),
        x_scale=[rate_scale, offset_scale],
        xtol=1e-12,
        ftol=1e-12,
        gtol=1e-12,
    )
    if not polish.success:
        logger.warning("least-squares polish stopped early: %s", polish.message)
    final = polish.x if polish.cost <= 0.5 * scaled_cost(simplex.x) else start
    res = residuals(final)
    covariance = _covariance(polish.jac, res)
    return FitResult(
        rate=float(final[0]),
        offset=float(final[1]),
        residual_norm=float(np.linalg.norm(res)),
        iterations=int(simplex.nit + polish.nfev),
        covariance=covariance,
        converged=bool(polish.success),
    )


def _covariance(jac: np.ndarray, res: np.ndarray) -> List[List[float]]:
    """(JᵀJ)⁻¹ scaled by the reduced residual variance."""
    dof = max(1, len(res) - jac.shape[1])
    s2 = float(np.sum(res ** 2)) / dof
    try:
        cov = np.linalg.inv(jac.T @ jac) * s2
    except np.linalg.LinAlgError:
        cov = np.full((jac.shape[1], jac.shape[1]), np.inf)
    return cov.tolist()


def fit_power_law(omegas: Sequence[float], rates: Sequence[float]) -> PowerLawFit:
    """
    Least-squares fit of log ṅ = log c − α log ω.

    Args:
        omegas: Axial mode frequencies (any consistent unit)
        rates: Heating rates

    Returns:
        PowerLawFit with α positive for a decreasing law
    """
    omegas = np.asarray(omegas, dtype=float)
    rates = np.asarray(rates, dtype=float)
    if omegas.shape != rates.shape:
        raise DataError("frequency and rate columns differ in length")
    if len(omegas) < 2:
        raise DataError(f"a power law needs at least 2 points, got {len(omegas)}")
    if np.any(omegas <= 0) or np.any(rates <= 0):
        raise DataError("frequencies and rates must be positive")
    x, y = np.log(omegas), np.log(rates)
    slope, intercept = np.polyfit(x, y, 1)
    residual = y - (slope * x + intercept)
    return PowerLawFit(prefactor=float(np.exp(intercept)), exponent=float(-slope),
                       residual_norm=float(np.linalg.norm(residual)))
