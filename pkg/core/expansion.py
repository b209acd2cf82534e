"""
Ladder-operator series of the spatial field factors.

The product of the two beam fields splits into amplitude factors
A1(p) = (1+p²)^(−1/4) and A2(p, q) = exp(−q²/(1+p²)) and phase factors
B0±(β) = exp(∓iβ), B1±(p) = exp(±(i/2)·arctan p) and
B2±(p, q) = exp(∓i·p·q²/(1+p²)), where p = p₀ + p̂₁ and q = q₀ + q̂₁ are the
dimensionless defocus and transverse-offset variables. Each factor is
expanded into SeriesTerm monomials c·p̂₁^i·q̂₁^j around the static offsets.
"""
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Dict, List, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sparse
from scipy.linalg import eigvalsh_tridiagonal

from utils.config import SERIES_ITERATION_CAP, SERIES_RTOL
from utils.errors import ConvergenceError
from utils.types import FockSpace, FunctionId, SeriesTerm

Caps = Union[int, Tuple[int, int]]


def hermite(n: int, x):
    """
    Physicists' Hermite polynomial by three-term recurrence.

    Args:
        n: Order, n ≥ 0
        x: Real or complex argument, scalar or array

    Returns:
        H_n(x)
    """
    if n < 0:
        raise ValueError(f"Hermite order must be non-negative, got {n}")
    h_prev = np.ones_like(x) if isinstance(x, np.ndarray) else 1.0
    if n == 0:
        return h_prev
    h = 2.0 * x
    for k in range(1, n):
        h_prev, h = h, 2.0 * x * h - 2.0 * k * h_prev
    return h


def hermite_all(n_max: int, x) -> list:
    """H_0(x) … H_{n_max}(x) as a list."""
    values = [1.0 + 0.0 * x]
    if n_max >= 1:
        values.append(2.0 * x)
    for k in range(1, n_max):
        values.append(2.0 * x * values[k] - 2.0 * k * values[k - 1])
    return values


def _sum_series(term: Callable[[int], complex], start: int, label: str, min_terms: int = 2) -> complex:
    """Sum term(start), term(start+1), … until two consecutive terms fall below the relative tolerance."""
    total = 0.0
    quiet = 0
    for count, index in enumerate(range(start, start + SERIES_ITERATION_CAP)):
        value = term(index)
        total += value
        if count + 1 >= min_terms and abs(value) <= SERIES_RTOL * abs(total):
            quiet += 1
            if quiet == 2:
                return total
        else:
            quiet = 0
    raise ConvergenceError(f"{label} series did not converge in {SERIES_ITERATION_CAP} terms",
                           partial=total, iterations=SERIES_ITERATION_CAP)


def _check_p0(p0: float) -> None:
    if not abs(p0) < 1.0:
        raise ValueError(f"|p0| must be below 1 for the series to converge, got {p0!r}")


def _caps(caps: Caps) -> Tuple[int, int]:
    if isinstance(caps, int):
        caps = (caps, caps)
    cap_p, cap_q = caps
    if cap_p < 0 or cap_q < 0:
        raise ValueError(f"caps must be non-negative, got {caps!r}")
    return cap_p, cap_q


def _inverse_power_coefficient(n: int, lp: int, p0: float) -> float:
    """[p̂₁^lp] of (1 + (p₀+p̂₁)²)^(−n)."""
    if n == 0:
        return 1.0 if lp == 0 else 0.0
    return _sum_series(
        lambda m: (-1) ** m * math.comb(n + m - 1, m) * math.comb(2 * m, lp) * p0 ** (2 * m - lp),
        (lp + 1) // 2,
        "inverse power",
    )


def a1_terms(p0: float, cap: int) -> List[SeriesTerm]:
    """
    Series of A1 = (1+(p₀+p̂₁)²)^(−1/4) up to p̂₁^cap.

    Args:
        p0: Static defocus λ⁽⁰⁾, |p0| < 1
        cap: Highest power of p̂₁

    Returns:
        list of SeriesTerm ordered by power
    """
    _check_p0(p0)
    if cap < 0:
        raise ValueError(f"cap must be non-negative, got {cap}")
    terms = []
    for lp in range(cap + 1):
        coefficient = _sum_series(
            lambda n: _binom_quarter(n) * math.comb(2 * n, lp) * p0 ** (2 * n - lp),
            (lp + 1) // 2,
            "A1",
        )
        terms.append(SeriesTerm(complex(coefficient), lp, 0))
    return terms


@lru_cache(maxsize=None)
def _binom_quarter(n: int) -> float:
    """Generalised binomial C(−1/4, n) = (−1)^n (4n−3)!!!!/(4n)!!!!."""
    value = 1.0
    for k in range(n):
        value *= (-0.25 - k) / (k + 1)
    return value


def a2_terms(p0: float, q0: float, caps: Caps) -> List[SeriesTerm]:
    """Series of A2 = exp(−(q₀+q̂₁)²/(1+(p₀+p̂₁)²)); caps are (p̂₁, q̂₁) maximal powers."""
    _check_p0(p0)
    cap_p, cap_q = _caps(caps)
    cache: Dict[Tuple[int, int], float] = {}

    def inverse(n, lp):
        if (n, lp) not in cache:
            cache[n, lp] = _inverse_power_coefficient(n, lp, p0)
        return cache[n, lp]

    terms = []
    for lq in range(cap_q + 1):
        for lp in range(cap_p + 1):
            coefficient = _sum_series(
                lambda n: (-1) ** n / math.factorial(n) * math.comb(2 * n, lq) * q0 ** (2 * n - lq) * inverse(n, lp),
                (lq + 1) // 2,
                "A2",
                min_terms=lp + 2,
            )
            terms.append(SeriesTerm(complex(coefficient), lp, lq))
    return terms


def b0_terms(cap: int, sign: int = 1) -> List[SeriesTerm]:
    """Exact series of B0± = exp(∓iβ̂): coefficients (∓i)^n/n!."""
    if cap < 0:
        raise ValueError(f"cap must be non-negative, got {cap}")
    unit = -1j * sign
    return [SeriesTerm(unit ** n / math.factorial(n), n, 0) for n in range(cap + 1)]


def arctan_coefficients(p0: float, cap: int) -> List[float]:
    """Taylor coefficients g_l of arctan(p₀+p̂₁) in p̂₁, l = 0 … cap."""
    _check_p0(p0)
    return [
        _sum_series(
            lambda m: (-1) ** m / (2 * m + 1) * math.comb(2 * m + 1, l) * p0 ** (2 * m + 1 - l),
            max(0, l // 2),
            "arctan",
        )
        for l in range(cap + 1)
    ]


def b1_terms(p0: float, cap: int, sign: int = 1) -> List[SeriesTerm]:
    """
    Series of B1± = exp(±(i/2)·arctan(p₀+p̂₁)).

    The exponential of the arctan power series G is summed with the
    power-series recurrence f_k = (a/k)·Σ_j j·g_j·f_{k−j}, a = ±i/2, which
    resums the Σ_n (±i)^n G^n / (2^n n!) expansion exactly.
    """
    if cap < 0:
        raise ValueError(f"cap must be non-negative, got {cap}")
    g = arctan_coefficients(p0, cap)
    a = 0.5j * sign
    f = [np.exp(a * g[0])]
    for k in range(1, cap + 1):
        f.append(a / k * sum(j * g[j] * f[k - j] for j in range(1, k + 1)))
    return [SeriesTerm(complex(c), lp, 0) for lp, c in enumerate(f)]


@dataclass(frozen=True)
class B2Block:
    """
    One n-term of B2±: coefficient · q̂₁^power_q · (p₀+p̂₁)^n · (1+(p₀+p̂₁)²)^(−n).

    sqrt_power counts the √(p₀+p̂₁) factors carried by the block.
    """
    n: int
    power_q: int
    coefficient: complex

    @property
    def sqrt_power(self) -> int:
        return 2 * self.n


def b2_blocks(p0: float, q0: float, lq: int, sign: int = 1) -> List[B2Block]:
    """n-blocks contributing to the q̂₁^lq part of B2±, truncated once converged."""
    _check_p0(p0)
    unit = -1j * sign
    blocks = []
    start = (lq + 1) // 2
    total = 0.0
    quiet = 0
    for n in range(start, start + SERIES_ITERATION_CAP):
        coefficient = unit ** n / math.factorial(n) * math.comb(2 * n, lq) * q0 ** (2 * n - lq)
        blocks.append(B2Block(n, lq, coefficient))
        total += abs(coefficient)
        if n > start and abs(coefficient) <= SERIES_RTOL * total:
            quiet += 1
            if quiet == 2:
                return blocks
        else:
            quiet = 0
    raise ConvergenceError("B2 block series did not converge", partial=blocks, iterations=SERIES_ITERATION_CAP)


def b2_terms(p0: float, q0: float, caps: Caps, sign: int = 1) -> List[SeriesTerm]:
    """Series of B2± = exp(∓i(p₀+p̂₁)(q₀+q̂₁)²/(1+(p₀+p̂₁)²)); caps are (p̂₁, q̂₁) maximal powers."""
    _check_p0(p0)
    cap_p, cap_q = _caps(caps)
    unit = -1j * sign
    cache: Dict[Tuple[int, int], float] = {}

    def inverse(n, j):
        if (n, j) not in cache:
            cache[n, j] = _inverse_power_coefficient(n, j, p0)
        return cache[n, j]

    def p_part(n, lp):
        # [p̂₁^lp] of (p₀+p̂₁)^n (1+(p₀+p̂₁)²)^(−n)
        return sum(math.comb(n, k) * p0 ** (n - k) * inverse(n, lp - k) for k in range(min(n, lp) + 1))

    terms = []
    for lq in range(cap_q + 1):
        for lp in range(cap_p + 1):
            coefficient = _sum_series(
                lambda n: unit ** n / math.factorial(n) * math.comb(2 * n, lq) * q0 ** (2 * n - lq) * p_part(n, lp),
                (lq + 1) // 2,
                "B2",
                min_terms=lp + 2,
            )
            terms.append(SeriesTerm(complex(coefficient), lp, lq))
    return terms


def evaluate_terms(terms: Sequence[SeriesTerm], p1: complex, q1: complex = 0.0) -> complex:
    """Scalar substitution of p̂₁ → p1 and q̂₁ → q1."""
    return sum(t.coefficient * p1 ** t.power_p * q1 ** t.power_q for t in terms)


def closed_form(function: FunctionId, p, q=0.0, sign: int = 1) -> complex:
    """Closed scalar form of each A/B factor; p and q are the full (static + fluctuation) values."""
    if function is FunctionId.A1:
        return (1.0 + p ** 2) ** -0.25
    if function is FunctionId.A2:
        return np.exp(-q ** 2 / (1.0 + p ** 2))
    if function is FunctionId.B0:
        return np.exp(-1j * sign * p)
    if function is FunctionId.B1:
        return np.exp(0.5j * sign * np.arctan(p))
    if function is FunctionId.B2:
        return np.exp(-1j * sign * p * q ** 2 / (1.0 + p ** 2))
    raise ValueError(f"unknown function {function!r}")


@dataclass(frozen=True)
class OrderedForm:
    """
    Second-order expansion of one factor in p̂₁ with the full q̂₁ series.

    coefficient(order, lq) is the factor multiplying p̂₁^order q̂₁^lq,
    order ∈ {0, 1, 2}. A1 and B1 do not depend on q̂₁ and only have lq = 0.
    """
    function: FunctionId
    p0: float
    q0: float = 0.0
    sign: int = 1

    @property
    def s0(self) -> float:
        return 1.0 / math.sqrt(1.0 + self.p0 ** 2)

    def coefficient(self, order: int, lq: int = 0) -> complex:
        if order not in (0, 1, 2):
            raise ValueError(f"ordered forms stop at second order, got {order}")
        if lq < 0:
            raise ValueError(f"q power must be non-negative, got {lq}")
        s0, p0 = self.s0, self.p0
        if self.function in (FunctionId.A1, FunctionId.B1, FunctionId.B0) and lq > 0:
            return 0.0
        if self.function is FunctionId.A1:
            return math.sqrt(s0) * (1.0, -p0 * s0 ** 2 / 2.0, (3.0 * p0 ** 2 - 2.0) * s0 ** 4 / 8.0)[order]
        if self.function is FunctionId.B1:
            phase = np.exp(0.5j * self.sign * math.atan(p0))
            return phase * (1.0, 0.5j * self.sign * s0 ** 2, -(1.0 + 4j * self.sign * p0) * s0 ** 4 / 8.0)[order]
        if self.function is FunctionId.B0:
            return (-1j * self.sign) ** order / math.factorial(order)
        if self.function is FunctionId.A2:
            return self._a2(order, lq)
        return self._b2(order, lq)

    def _a2(self, order: int, lq: int) -> float:
        s0, p0 = self.s0, self.p0
        u = s0 * self.q0
        h_l, h_next = hermite(lq, u), hermite(lq + 1, u)
        prefactor = math.exp(-u ** 2) * (-s0) ** lq / math.factorial(lq)
        if order == 0:
            return prefactor * h_l
        if order == 1:
            return -prefactor * s0 ** 2 * p0 * (lq * h_l - u * h_next)
        return prefactor * s0 ** 4 * (
            (p0 ** 2 / 2.0 * (lq - 2.0 * u ** 2) * (lq + 1) - lq / 2.0) * h_l
            + (p0 ** 2 * u * (u ** 2 - lq - 1) + u / 2.0) * h_next
        )

    def _b2(self, order: int, lq: int) -> complex:
        s0, p0 = self.s0, self.p0
        total = 0.0
        for block in b2_blocks(p0, self.q0, lq, self.sign):
            n = block.n
            # (1+p²)^(−n) to second order around p₀, times (p₀+p̂₁)^n
            inverse = (1.0, -2.0 * n * s0 ** 2 * p0, ((2.0 * n ** 2 + n) * p0 ** 2 - n) * s0 ** 4)
            value = 0.0
            for k in range(min(n, order) + 1):
                value += math.comb(n, k) * p0 ** (n - k) * inverse[order - k]
            total += block.coefficient * s0 ** (2 * n) * value
        return total

    def q_series(self, order: int, cap: int) -> np.ndarray:
        return np.array([self.coefficient(order, lq) for lq in range(cap + 1)], dtype=complex)

    def evaluate(self, p1: complex, q1: complex = 0.0, cap_q: int = 40) -> complex:
        total = 0.0
        for order in range(3):
            total += p1 ** order * np.polyval(self.q_series(order, cap_q)[::-1], q1)
        return total


def ordered_p1_forms(function: FunctionId, p0: float, q0: float = 0.0, sign: int = 1) -> OrderedForm:
    """Closed second-order-in-p̂₁ forms of one factor."""
    _check_p0(p0)
    return OrderedForm(function, p0, q0, sign)


def terms_for(function: FunctionId, p0: float, q0: float, caps: Caps, sign: int = 1) -> List[SeriesTerm]:
    """Dispatch to the series of one factor."""
    cap_p, _ = _caps(caps)
    if function is FunctionId.A1:
        return a1_terms(p0, cap_p)
    if function is FunctionId.A2:
        return a2_terms(p0, q0, caps)
    if function is FunctionId.B0:
        return b0_terms(cap_p, sign)
    if function is FunctionId.B1:
        return b1_terms(p0, cap_p, sign)
    return b2_terms(p0, q0, caps, sign)


def position_operator(space: FockSpace) -> sparse.csr_matrix:
    """Truncated (â + â†) as a sparse tridiagonal matrix."""
    off = np.sqrt(np.arange(1, space.dimension, dtype=float))
    return sparse.diags([off, off], [-1, 1], format="csr")


def ladder_monomial_matrix(power: int, space: FockSpace) -> sparse.csr_matrix:
    """
    (â + â†)^power on the truncated space, banded with bandwidth power.

    Args:
        power: Exponent k ≥ 0, below the space dimension
        space: Single-mode Fock space

    Returns:
        scipy.sparse.csr_matrix
    """
    if power < 0:
        raise ValueError(f"power must be non-negative, got {power}")
    if power >= space.dimension:
        raise ValueError(f"power {power} overflows the {space.dimension}-level cutoff")
    x = position_operator(space)
    result = sparse.identity(space.dimension, format="csr")
    for _ in range(power):
        result = x @ result
    return result


@lru_cache(maxsize=256)
def ladder_norm(cutoff: int) -> float:
    """Spectral norm of the truncated (â + â†), from its largest tridiagonal eigenvalue."""
    if cutoff < 1:
        raise ValueError(f"cutoff must be at least 1, got {cutoff}")
    dimension = cutoff + 1
    off = np.sqrt(np.arange(1, dimension, dtype=float))
    top = eigvalsh_tridiagonal(np.zeros(dimension), off, select="i", select_range=(dimension - 1, dimension - 1))
    return float(top[0])

