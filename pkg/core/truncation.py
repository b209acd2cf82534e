"""
Operator-norm truncation of the A/B series.

A monomial c·p̂₁^i·q̂₁^j is bounded by |c|·‖p̂₁‖^i·‖q̂₁‖^j on the truncated
Fock spaces of a heating scenario, with every multi-mode operator
Σ_p c_p(â_p+â_p†) bounded by the triangle inequality Σ_p |c_p|·‖â_p+â_p†‖.
A term is dropped only when its contribution, relative to the constant term
of the same factor, stays below the threshold in every scenario.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from core.expansion import ladder_norm, terms_for
from utils.types import (
    ChainModes, CouplingParams, Direction, FunctionId, SeriesTerm, ThermalState,
    TruncationPolicy, TruncationScenario,
)
from utils.config import TRUNCATION_TAIL_TOLERANCE
from utils.errors import ConfigError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Substitution:
    """A fluctuation operator Σ_p c_p(â_p + â_p†) over the chain's modes."""
    coefficients: np.ndarray
    directions: Tuple[Direction, ...]

    def __post_init__(self):
        if len(self.coefficients) != len(self.directions):
            raise ValueError("one direction per coefficient is required")

    @classmethod
    def single(cls, coefficient: float, direction: Direction = Direction.AXIAL) -> "Substitution":
        return cls(np.array([coefficient], dtype=float), (direction,))

    def bound(self, scenario: TruncationScenario, n_ions: int = 1) -> float:
        """Triangle-inequality bound of the operator norm under one scenario."""
        magnitudes = np.abs(self.coefficients)
        cutoffs = np.array([scenario.cutoffs[d] for d in self.directions], dtype=int)
        if scenario.dominant:
            for direction in set(self.directions):
                members = [p for p, d in enumerate(self.directions) if d is direction]
                strongest = max(members, key=lambda p: magnitudes[p])
                cutoffs[strongest] *= n_ions
        total = 0.0
        for c, cutoff in zip(magnitudes, cutoffs):
            if c > 0:
                total += c * ladder_norm(int(cutoff))
        return total


@dataclass
class FunctionTerms:
    """Series of one factor of one beam together with its operator substitutions."""
    function: FunctionId
    beam: int
    axis: str
    terms: List[SeriesTerm]
    p_substitution: Optional[Substitution] = None
    q_substitution: Optional[Substitution] = None

    @property
    def label(self) -> str:
        return self.function.value

    @property
    def exact(self) -> bool:
        return self.function is FunctionId.B0

    @property
    def constant(self) -> complex:
        for term in self.terms:
            if term.power_p == 0 and term.power_q == 0:
                return term.coefficient
        raise ValueError(f"{self.label} series has no constant term")


@dataclass
class ReportRow:
    function: str
    beam: int
    axis: str
    power_p: int
    power_q: int
    coefficient_abs: float
    contributions: Dict[str, float] = field(default_factory=dict)
    kept: bool = True


def fractional_contribution(
    term: SeriesTerm,
    substitutions: Tuple[Optional[Substitution], Optional[Substitution]],
    policy: TruncationPolicy,
    constant: complex = 1.0,
    n_ions: int = 1,
) -> Dict[str, float]:
    """
    ‖Ô_ij‖ / ‖Ô_00‖ of one monomial in every scenario of the policy.

    Args:
        term: Monomial c·p̂₁^i·q̂₁^j
        substitutions: Operators standing for p̂₁ and q̂₁ (None when the power is zero)
        policy: Scenarios to evaluate
        constant: Constant term c₀₀ of the same factor
        n_ions: Ion count used by dominant-mode scenarios

    Returns:
        dict: Scenario name to contribution
    """
    if not policy.scenarios:
        raise ValueError("truncation policy has no scenarios")
    if constant == 0:
        raise ValueError("constant term of a factor must be non-zero")
    p_sub, q_sub = substitutions
    result = {}
    for scenario in policy.scenarios:
        norm = abs(term.coefficient)
        if term.power_p:
            norm *= (p_sub.bound(scenario, n_ions) if p_sub is not None else 0.0) ** term.power_p
        if term.power_q:
            norm *= (q_sub.bound(scenario, n_ions) if q_sub is not None else 0.0) ** term.power_q
        result[scenario.name] = norm / abs(constant)
    return result


def truncation_report(
    term_sets: Iterable[FunctionTerms],
    policy: TruncationPolicy,
    n_ions: int = 1,
) -> List[ReportRow]:
    """
    Keep/drop table over all factors.

    A term is dropped only if its contribution is below the threshold in all
    scenarios. Constant terms are always kept; terms of the exact B0 factor are
    kept whenever their contribution is non-zero.
    """
    if n_ions > policy.n_ions_max:
        raise ConfigError(f"{n_ions} ions exceed the supported chain length {policy.n_ions_max}", "truncation.n_ions_max")
    rows = []
    for function_terms in term_sets:
        constant = function_terms.constant
        for term in function_terms.terms:
            contributions = fractional_contribution(
                term,
                (function_terms.p_substitution, function_terms.q_substitution),
                policy,
                constant=constant,
                n_ions=n_ions,
            )
            if term.power_p == 0 and term.power_q == 0:
                kept = True
            elif function_terms.exact:
                kept = any(v > 0 for v in contributions.values())
            else:
                kept = not all(v < policy.threshold for v in contributions.values())
            rows.append(ReportRow(
                function=function_terms.label,
                beam=function_terms.beam,
                axis=function_terms.axis,
                power_p=term.power_p,
                power_q=term.power_q,
                coefficient_abs=abs(term.coefficient),
                contributions=contributions,
                kept=kept,
            ))
    dropped = sum(1 for r in rows if not r.kept)
    logger.info("truncation kept %d of %d terms at threshold %g", len(rows) - dropped, len(rows), policy.threshold)
    return rows


def build_term_sets(coupling: CouplingParams, chain: ChainModes, caps: Dict[str, int]) -> List[FunctionTerms]:
    """
    All A/B series of both beams with their operator substitutions.

    Beam 1 enters the field product directly and beam 2 conjugated, so beam 2
    carries the lower sign of every B± factor.
    """
    cap_p, cap_q = caps["p"], caps["q"]
    directions = chain.directions
    sets = []
    for b in range(2):
        sign = 1 if b == 0 else -1
        beta = Substitution(coupling.c_beta[b], directions)
        sets.append(FunctionTerms(FunctionId.B0, b + 1, "-", terms_for(FunctionId.B0, 0.0, 0.0, (cap_p, 0), sign), beta))
        for a, axis in enumerate("xz"):
            p0 = float(coupling.lambda0[b, a])
            q0 = float(coupling.gamma0[b, a])
            lam = Substitution(coupling.c_lambda[b, a], directions)
            gam = Substitution(coupling.c_gamma[b, a], directions)
            sets.append(FunctionTerms(FunctionId.A1, b + 1, axis, terms_for(FunctionId.A1, p0, q0, (cap_p, 0)), lam))
            sets.append(FunctionTerms(FunctionId.A2, b + 1, axis, terms_for(FunctionId.A2, p0, q0, (cap_p, cap_q)), lam, gam))
            sets.append(FunctionTerms(FunctionId.B1, b + 1, axis, terms_for(FunctionId.B1, p0, q0, (cap_p, 0), sign), lam))
            sets.append(FunctionTerms(FunctionId.B2, b + 1, axis,
                                      terms_for(FunctionId.B2, p0, q0, (cap_p, cap_q), sign), lam, gam))
    return sets


def kept_structure(rows: Sequence[ReportRow]) -> Dict[Tuple[str, int, str], frozenset]:
    """Kept (power_p, power_q) pairs per (function, beam, axis)."""
    structure: Dict[Tuple[str, int, str], set] = {}
    for row in rows:
        key = (row.function, row.beam, row.axis)
        structure.setdefault(key, set())
        if row.kept:
            structure[key].add((row.power_p, row.power_q))
    return {key: frozenset(value) for key, value in structure.items()}


def thermal_cutoff(nbar: float, tolerance: float = TRUNCATION_TAIL_TOLERANCE) -> int:
    """Smallest cutoff whose thermal tail is below tolerance."""
    return ThermalState.with_tail(nbar, tolerance).cutoff


def scenarios_from(entries: Sequence[dict], with_dominant: bool = True) -> Tuple[TruncationScenario, ...]:
    """Even-heating scenarios and, optionally, their dominant-mode twins."""
    scenarios = []
    for entry in entries:
        cutoffs = {Direction(d): int(entry[d]) for d in ("axial", "horizontal", "vertical")}
        scenarios.append(TruncationScenario(entry["name"], cutoffs))
        if with_dominant:
            scenarios.append(TruncationScenario(entry["name"] + "-dominant", cutoffs, dominant=True))
    return tuple(scenarios)
