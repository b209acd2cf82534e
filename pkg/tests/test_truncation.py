import numpy as np
import pytest

from core.expansion import b0_terms, ladder_norm
from core.truncation import (
    FunctionTerms, Substitution, fractional_contribution, kept_structure, scenarios_from, truncation_report,
)
from states.truncation_state import report_table, run_truncation_report, truncation_policy
from utils.errors import ConfigError
from utils.settings_manager import load_scenario
from utils.types import Direction, FunctionId, SeriesTerm, TruncationPolicy, TruncationScenario


@pytest.fixture
def single_ion_config():
    return load_scenario("section4_truncation")


def _scenario(cutoff=100, dominant=False):
    return TruncationScenario("even", {d: cutoff for d in Direction}, dominant)


def test_single_ion_kept_structure(single_ion_config):
    structure = kept_structure(run_truncation_report(single_ion_config))
    constant_only = frozenset({(0, 0)})
    for beam in (1, 2):
        assert structure["A2", beam, "x"] == frozenset((0, q) for q in range(9))
        assert structure["A2", beam, "z"] == constant_only
        assert structure["B0", beam, "-"] == frozenset((p, 0) for p in range(5))
        # p̂₁q̂₁² is the one B2 term the 10⁴-quanta axial cutoff lifts above 1%
        assert structure["B2", beam, "x"] == frozenset({(0, 0), (1, 2)})
        assert structure["B2", beam, "z"] == constant_only
        for axis in "xz":
            assert structure["A1", beam, axis] == constant_only
            assert structure["B1", beam, axis] == constant_only


def test_hundred_quanta_axial_cutoff_truncates_a2(single_ion_config):
    single_ion_config["truncation"]["scenarios"] = [
        {"name": "doppler", "axial": 100, "horizontal": 100, "vertical": 100},
    ]
    structure = kept_structure(run_truncation_report(single_ion_config))
    assert structure["A2", 1, "x"] == frozenset({(0, 0), (0, 1), (0, 2)})
    assert structure["B2", 1, "x"] == frozenset({(0, 0)})


def test_lower_threshold_keeps_more_terms(single_ion_config):
    coarse = sum(r.kept for r in run_truncation_report(single_ion_config))
    single_ion_config["truncation"]["threshold"] = 1e-6
    fine = sum(r.kept for r in run_truncation_report(single_ion_config))
    assert fine > coarse


def test_vanishing_couplings_leave_constants():
    terms = [SeriesTerm(1.0, 0, 0), SeriesTerm(0.4, 1, 0), SeriesTerm(-0.2, 0, 2), SeriesTerm(0.1, 1, 1)]
    zero = Substitution.single(0.0)
    function_terms = FunctionTerms(FunctionId.A2, 1, "x", terms, zero, zero)
    rows = truncation_report([function_terms], TruncationPolicy(0.01, (_scenario(),)))
    assert [r.kept for r in rows] == [True, False, False, False]
    assert all(r.contributions["even"] == 0.0 for r in rows[1:])


def test_exact_factor_keeps_every_non_zero_term():
    beta = Substitution.single(1e-6, Direction.HORIZONTAL)
    function_terms = FunctionTerms(FunctionId.B0, 1, "-", b0_terms(4), beta)
    rows = truncation_report([function_terms], TruncationPolicy(0.5, (_scenario(),)))
    assert all(r.kept for r in rows)


def test_contribution_is_relative_to_the_constant():
    scenario = _scenario(10)
    policy = TruncationPolicy(0.01, (scenario,))
    p_sub = Substitution.single(0.02)
    contributions = fractional_contribution(SeriesTerm(0.5, 2, 0), (p_sub, None), policy, constant=2.0)
    assert contributions["even"] == pytest.approx(0.5 * (0.02 * ladder_norm(10)) ** 2 / 2.0)
    with pytest.raises(ValueError):
        fractional_contribution(SeriesTerm(0.5, 2, 0), (p_sub, None), policy, constant=0.0)


def test_dominant_mode_bound():
    sub = Substitution(np.array([0.1, 0.05, 0.3]), (Direction.AXIAL, Direction.AXIAL, Direction.VERTICAL))
    even = sub.bound(_scenario(10), n_ions=5)
    dominant = sub.bound(_scenario(10, dominant=True), n_ions=5)
    assert even == pytest.approx(0.45 * ladder_norm(10))
    assert dominant == pytest.approx(0.1 * ladder_norm(50) + 0.05 * ladder_norm(10) + 0.3 * ladder_norm(50))
    with pytest.raises(ValueError):
        Substitution(np.array([0.1]), (Direction.AXIAL, Direction.VERTICAL))


def test_scenarios_with_dominant_twins():
    entries = [{"name": "doppler", "axial": 100, "horizontal": 20, "vertical": 30}]
    scenarios = scenarios_from(entries)
    assert [s.name for s in scenarios] == ["doppler", "doppler-dominant"]
    assert scenarios[1].dominant and not scenarios[0].dominant
    assert scenarios[0].cutoffs[Direction.HORIZONTAL] == 20
    assert len(scenarios_from(entries, with_dominant=False)) == 1


def test_policy_validation():
    with pytest.raises(ConfigError, match="truncation.threshold"):
        TruncationPolicy(1.5, (_scenario(),))
    with pytest.raises(ConfigError, match="truncation.scenarios"):
        TruncationPolicy(0.01, ())
    with pytest.raises(ConfigError, match="truncation.n_ions_max"):
        TruncationPolicy(0.01, (_scenario(),), n_ions_max=0)


def test_chain_longer_than_supported_is_rejected():
    terms = [SeriesTerm(1.0, 0, 0), SeriesTerm(0.4, 1, 0)]
    beta = Substitution.single(0.01)
    function_terms = FunctionTerms(FunctionId.A2, 1, "x", terms, beta, beta)
    policy = TruncationPolicy(0.01, (_scenario(dominant=True),), n_ions_max=4)
    assert len(truncation_report([function_terms], policy, n_ions=4)) == 2
    with pytest.raises(ConfigError, match="truncation.n_ions_max"):
        truncation_report([function_terms], policy, n_ions=5)


def test_policy_reads_the_chain_cap(single_ion_config):
    assert truncation_policy(single_ion_config).n_ions_max == 50
    single_ion_config["truncation"]["n_ions_max"] = 3
    assert truncation_policy(single_ion_config).n_ions_max == 3


def test_report_table_columns(single_ion_config):
    header, rows = report_table(run_truncation_report(single_ion_config))
    assert header == [
        "function", "beam", "axis", "power_p", "power_q", "coefficient_abs",
        "contribution_doppler", "contribution_doppler-dominant", "kept",
    ]
    assert all(len(row) == len(header) for row in rows)
    assert {row[-1] for row in rows} == {0, 1}
