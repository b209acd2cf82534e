import logging
import math

import numpy as np
import pytest
from scipy.optimize import least_squares

import systems.calibration as calibration

from systems.calibration import (
    Curve, HeatingFitModel, RabiOptimizer, fit_heating, fit_power_law, optimize_rabi, static_rabi,
)
from utils.errors import BracketError, DataError

ETA = 0.014
NBAR0 = 64.05
DELAYS = np.linspace(0.0, 5e-3, 11)


@pytest.fixture(scope="module")
def model():
    return HeatingFitModel(NBAR0, ETA, nbar_max=2000.0)


def test_uncoupled_optimum_is_a_quarter_turn():
    assert optimize_rabi(300.0, 0.0) == math.pi / 2


@pytest.mark.parametrize("eta", [0.005, 0.014, 0.1])
def test_ground_state_optimum(eta):
    assert optimize_rabi(0.0, eta) == pytest.approx(math.pi / 2 * math.sqrt(1 + 2 * eta ** 2), rel=1e-12)


def test_optimal_rate_grows_with_temperature():
    optimizer = RabiOptimizer(ETA)
    areas = [optimizer.optimize(nbar) for nbar in (64.0, 200.0, 500.0)]
    assert areas[0] < areas[1] < areas[2]
    static = static_rabi(64.0, ETA)
    assert static == pytest.approx(areas[0])
    for nbar, area in zip((64.0, 200.0, 500.0), areas):
        assert optimizer.p_up(nbar, area) >= optimizer.p_up(nbar, static) - 1e-12


def test_optimum_is_stationary():
    optimizer = RabiOptimizer(ETA)
    area = optimizer.optimize(200.0)
    weights, g = optimizer.thermal(200.0)
    first = np.sum(weights * g * np.sin(2 * area * g))
    assert abs(first) < 1e-9


def test_profile_only_grows():
    optimizer = RabiOptimizer(ETA)
    assert len(optimizer.profile(1000)) == 1001
    assert len(optimizer.profile(10)) == 11
    assert len(optimizer._profile) >= 1001


def test_optimum_outside_the_bracket():
    # at η = 2 the occupied levels have |Θ_n/Ω₀t| ≤ 0.41, so P↑ still rises at 3π/2
    with pytest.raises(BracketError, match="edge"):
        optimize_rabi(0.01, 2.0)


def test_hot_optimum_beyond_three_quarter_pi():
    optimizer = RabiOptimizer(0.014)
    area = optimizer.optimize(5000.0)
    assert 0.75 * np.pi < area < 1.5 * np.pi
    weights, g = optimizer.thermal(5000.0)
    assert abs(np.sum(weights * g * np.sin(2 * area * g))) < 1e-9
    assert optimizer.p_up(5000.0, area) > optimizer.p_up(5000.0, 0.75 * np.pi)


def test_small_eta_infidelity_scaling():
    etas = np.array([0.01, 0.014, 0.02])
    infidelity = []
    for eta in etas:
        optimizer = RabiOptimizer(eta, tail=1e-12)
        infidelity.append(1 - optimizer.p_up(64.0, optimizer.optimize(64.0)))
    slope = np.polyfit(np.log(etas), np.log(infidelity), 1)[0]
    assert slope == pytest.approx(4.0, abs=0.3)


def test_doubling_the_axial_frequency_quarters_the_infidelity():
    def infidelity(eta):
        optimizer = RabiOptimizer(eta, tail=1e-12)
        return 1 - optimizer.p_up(64.0, optimizer.optimize(64.0))

    assert infidelity(ETA) / infidelity(ETA / math.sqrt(2)) == pytest.approx(4.0, rel=0.15)


def test_simulated_curves(model):
    curves = model.simulate(DELAYS, 96e3, offset=0.02)
    assert curves["nbar"][-1] == pytest.approx(NBAR0 + 480.0)
    assert curves["rabi_ratio"][0] == pytest.approx(1.0)
    assert np.all(np.diff(curves["rabi_ratio"]) > 0)
    assert np.all(curves["p_up_optimized"] >= curves["p_up_static"] - 1e-9)
    assert curves["p_up_static"][0] == pytest.approx(model.optimizer.p_up(NBAR0, model.static_area) - 0.02)


def test_fit_recovers_rate_and_offset(model):
    truth = model.simulate(DELAYS, 96e3, offset=0.02)
    result = fit_heating(Curve(DELAYS, truth["p_up_static"]), NBAR0, ETA, model=model)
    assert result.rate == pytest.approx(96e3, rel=1e-6)
    assert result.offset == pytest.approx(0.02, abs=1e-8)
    assert result.converged
    assert np.shape(result.covariance) == (2, 2)


def test_polish_status_reaches_the_result(model, monkeypatch, caplog):
    monkeypatch.setattr(calibration, "least_squares", lambda *args, **kwargs: least_squares(*args, **kwargs, max_nfev=1))
    truth = model.simulate(DELAYS, 96e3, offset=0.02)
    with caplog.at_level(logging.WARNING):
        result = fit_heating(Curve(DELAYS, truth["p_up_static"]), NBAR0, ETA, model=model)
    assert not result.converged
    assert "polish stopped early" in caplog.text
    assert result.rate == pytest.approx(96e3, rel=1e-3)


def test_joint_fit_with_optimized_curves(model):
    truth = model.simulate(DELAYS, 96e3, offset=0.02)
    result = fit_heating(
        Curve(DELAYS, truth["p_up_static"]),
        NBAR0,
        ETA,
        optimized=Curve(DELAYS, truth["p_up_optimized"]),
        rabi=Curve(DELAYS, truth["rabi"]),
        model=model,
    )
    assert result.rate == pytest.approx(96e3, rel=1e-6)
    assert result.offset == pytest.approx(0.02, abs=1e-8)


def test_fit_rejects_degenerate_data(model):
    with pytest.raises(DataError, match="at least 3"):
        fit_heating(Curve([0.0, 1e-3], [0.9, 0.8]), NBAR0, ETA, model=model)
    with pytest.raises(DataError, match="constant"):
        fit_heating(Curve(DELAYS, np.full(11, 0.9)), NBAR0, ETA, model=model)
    with pytest.raises(DataError, match="non-negative"):
        fit_heating(Curve(DELAYS - 1e-3, np.linspace(0.9, 0.5, 11)), NBAR0, ETA, model=model)
    with pytest.raises(DataError):
        Curve([0.0, 1.0], [0.5])


@pytest.mark.slow
def test_fit_recovers_heating_rate_under_measurement_noise(model):
    delays = np.linspace(0.0, 15e-3, 31)
    truth = model.simulate(delays, 96e3, offset=0.02)["p_up_static"]
    rng = np.random.default_rng(2024)
    errors = []
    for _ in range(100):
        noisy = truth + rng.normal(0.0, 0.01, truth.shape)
        result = fit_heating(Curve(delays, noisy), NBAR0, ETA, model=model)
        errors.append(abs(result.rate / 96e3 - 1.0))
    assert max(errors) < 0.05


def test_fit_rejects_delays_without_spread(model):
    with pytest.raises(DataError, match="span"):
        fit_heating(Curve(np.zeros(5), np.linspace(0.9, 0.5, 5)), NBAR0, ETA, model=model)


def test_measurement_sigma_is_floored():
    curve = Curve([0.0, 1.0], [0.9, 0.8], sigma=[0.001, 0.05])
    assert np.allclose(curve.weights(), [100.0, 20.0])


def test_power_law_is_exact_for_clean_data():
    omegas = 2 * math.pi * np.array([100e3, 200e3, 400e3, 800e3])
    rates = 3.0e12 * omegas ** -1.8
    fit = fit_power_law(omegas, rates)
    assert fit.exponent == pytest.approx(1.8, rel=1e-12)
    assert fit.prefactor == pytest.approx(3.0e12, rel=1e-9)
    assert fit.residual_norm < 1e-10


def test_power_law_from_two_points():
    assert fit_power_law([1.0, 2.0], [4.0, 1.0]).exponent == pytest.approx(2.0)


def test_power_law_is_scale_equivariant():
    omegas = np.array([150e3, 300e3, 450e3])
    rates = np.array([9.6e4, 3.1e4, 1.5e4])
    assert fit_power_law(omegas * 7.3, rates).exponent == pytest.approx(fit_power_law(omegas, rates).exponent)


@pytest.mark.parametrize("omegas, rates", [
    ([1.0, 2.0], [1.0, -1.0]),
    ([0.0, 2.0], [1.0, 1.0]),
    ([1.0], [1.0]),
    ([1.0, 2.0, 3.0], [1.0, 2.0]),
])
def test_power_law_rejects_bad_input(omegas, rates):
    with pytest.raises(DataError):
        fit_power_law(omegas, rates)


def test_power_law_coverage_under_log_normal_noise():
    rng = np.random.default_rng(11)
    omegas = 2 * math.pi * np.geomspace(184e3, 513e3, 8)
    clean = 3.0e12 * omegas ** -1.8
    hits = 0
    for _ in range(1000):
        rates = clean * np.exp(rng.normal(0.0, 0.1, omegas.shape))
        hits += abs(fit_power_law(omegas, rates).exponent - 1.8) <= 0.2
    assert hits >= 900
