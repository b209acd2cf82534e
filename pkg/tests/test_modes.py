import logging
import math

import numpy as np
import pytest

from core.modes import (
    alignment_violations, chain_normal_modes, coupling_estimates, coupling_params, doppler_nbar,
    equilibrium_positions, misaligned, mode_table_chain, zero_point_spread,
)
from utils.config import GAMMA_DOPPLER
from utils.errors import ConfigError
from utils.types import AlignmentError, Axis, BeamFramePoint, BeamGeometry, Direction


TWO_PI = 2 * math.pi

# |c|·√N bounds quoted for w_x = 1 μm, w_z = 5 μm, 355 nm and ε = 0.05
QUOTED_BOUNDS = {
    "c_beta_y": [1e-2, 6e-3, 3e-3, 6e-2, 3e-3],
    "c_gamma_x": [1e-2, 7e-3, 4e-3, 2e-4, 2e-4],
    "c_gamma_z": [1e-4, 7e-5, 4e-5, 3e-5, 7e-4],
    "c_lambda_x": [7e-5, 4e-5, 2e-5, 3e-4, 2e-5],
    "c_lambda_z": [4e-6, 2e-6, 1e-6, 2e-5, 9e-7],
}


def test_zero_point_spread(yb_mass):
    assert zero_point_spread(yb_mass, TWO_PI * 153e3) == pytest.approx(13.9e-9, rel=0.01)
    assert zero_point_spread(yb_mass, TWO_PI * 3.0e6) == pytest.approx(3.1e-9, rel=0.02)
    assert zero_point_spread(yb_mass, 4 * 1e6) == pytest.approx(zero_point_spread(yb_mass, 1e6) / 2)
    with pytest.raises(ConfigError):
        zero_point_spread(yb_mass, 0.0)


def test_doppler_limits():
    assert doppler_nbar(GAMMA_DOPPLER, TWO_PI * 153e3) == pytest.approx(64, abs=1)
    assert doppler_nbar(GAMMA_DOPPLER, TWO_PI * 2.5e6) == pytest.approx(3.9, abs=0.1)
    assert doppler_nbar(2.0, 1.0) == 1.0


def test_two_ion_equilibrium_balances_forces():
    u = equilibrium_positions(2)
    assert u[1] == pytest.approx(4 ** (-1 / 3), rel=1e-10)
    assert u[0] == pytest.approx(-u[1], rel=1e-10)


def test_single_ion_modes_are_trap_frequencies(single_ion):
    assert single_ion.frequencies == pytest.approx(TWO_PI * np.array([153e3, 3.0e6, 2.5e6]))
    assert np.allclose(single_ion.mode_matrix, np.eye(3))
    assert single_ion.directions == (Direction.AXIAL, Direction.HORIZONTAL, Direction.VERTICAL)


def test_two_ion_stretch_mode(yb_mass):
    chain = chain_normal_modes(2, TWO_PI * 200e3, TWO_PI * 3e6, TWO_PI * 2.5e6, yb_mass)
    axial = chain.frequencies[chain.modes_in(Direction.AXIAL)]
    assert axial[1] / axial[0] == pytest.approx(math.sqrt(3), rel=1e-10)


def test_mode_matrix_is_orthonormal(five_ions):
    m = five_ions.mode_matrix
    assert np.allclose(m.T @ m, np.eye(15), atol=1e-10)


def test_com_mode_of_25_ions(yb_mass):
    chain = chain_normal_modes(25, TWO_PI * 148e3, TWO_PI * 3e6, TWO_PI * 2.5e6, yb_mass)
    com = chain.modes_in(Direction.AXIAL)[0]
    assert chain.frequencies[com] == pytest.approx(TWO_PI * 148e3, rel=1e-9)
    assert np.allclose(chain.projections("x", 12)[com], 0.2, atol=1e-9)
    assert np.allclose(chain.mode_matrix[:25, com], 0.2, atol=1e-9)


def test_zigzag_is_rejected(yb_mass):
    with pytest.raises(ConfigError, match="zigzag|exceed"):
        chain_normal_modes(25, TWO_PI * 500e3, TWO_PI * 1.0e6, TWO_PI * 2.5e6, yb_mass)


def test_mode_table_chain_orders_and_orthonormalises(yb_mass):
    table = [
        {"frequency_hz": 2.5e6, "direction": "vertical", "vector": [0, 0, 1]},
        {"frequency_hz": 153e3, "direction": "axial", "vector": [1, 0, 0]},
        {"frequency_hz": 3.0e6, "direction": "horizontal", "vector": [0, 2, 0]},
    ]
    chain = mode_table_chain(1, yb_mass, table)
    assert chain.directions == (Direction.AXIAL, Direction.HORIZONTAL, Direction.VERTICAL)
    assert np.allclose(chain.mode_matrix, np.eye(3))
    with pytest.raises(ConfigError):
        mode_table_chain(2, yb_mass, table)


def test_alignment_violations(five_ions):
    alignment = AlignmentError(0.05)
    assert alignment_violations(five_ions, alignment) == []
    assert alignment_violations(misaligned(five_ions, [0, 0, 0.005]), alignment) == []

    tilted = misaligned(five_ions, [0, 0, 0.2])
    assert alignment_violations(tilted, alignment, reading="element")
    assert alignment_violations(tilted, alignment, reading="vector")
    assert np.allclose(tilted.mode_matrix.T @ tilted.mode_matrix, np.eye(15), atol=1e-10)
    with pytest.raises(ValueError):
        alignment_violations(five_ions, alignment, reading="diagonal")


def test_alignment_error_range():
    with pytest.raises(ConfigError):
        AlignmentError(1.0)


def test_coupling_estimates_match_quoted_magnitudes(yb_mass):
    beam = BeamGeometry(power=1e-3, wavelength=355e-9, waist_x=1e-6, waist_z=5e-6)
    rows = coupling_estimates(yb_mass, beam, epsilon=0.05)
    for name, bounds in QUOTED_BOUNDS.items():
        for row, bound in zip(rows, bounds):
            assert 0.5 <= row[name] / bound <= 2.0, (name, row["omega"] / TWO_PI)


def _params(chain, beam, point=BeamFramePoint(0.0, 0.0, 0.0)):
    return coupling_params((beam, beam), (point, point), chain, 0)


def test_coupling_params_single_ion(single_ion, tight_beam):
    params = _params(single_ion, tight_beam)
    zeta = [zero_point_spread(single_ion.mass, w) for w in single_ion.frequencies]
    # axial mode moves along x only, horizontal along y
    assert params.c_gamma[0, 0, 0] == pytest.approx(zeta[0] / tight_beam.waist_x)
    assert params.c_beta[0, 1] == pytest.approx(tight_beam.wavevector * zeta[1])
    assert params.c_beta[0, 0] == 0.0
    assert params.c_lambda[0, 1, 1] == pytest.approx(zeta[1] / tight_beam.rayleigh_range(Axis.Z))
    assert np.all(params.gamma0 == 0) and np.all(params.lambda0 == 0)


def test_coupling_params_offsets(single_ion, tight_beam):
    point = BeamFramePoint(0.14e-6, 1e-6, 0.5e-6)
    params = _params(single_ion, tight_beam, point)
    assert params.gamma0[0, 0] == pytest.approx(0.1)
    assert params.gamma0[0, 1] == pytest.approx(0.05)
    assert params.lambda0[0, 0] == pytest.approx(1e-6 / (math.pi * 1.4e-6 ** 2 / 355e-9))


def test_c_coefficients_scale_with_inverse_root_frequency(yb_mass, tight_beam):
    low = chain_normal_modes(1, TWO_PI * 150e3, TWO_PI * 3e6, TWO_PI * 2.5e6, yb_mass)
    high = chain_normal_modes(1, TWO_PI * 600e3, TWO_PI * 12e6, TWO_PI * 10e6, yb_mass)
    a, b = _params(low, tight_beam), _params(high, tight_beam)
    assert np.allclose(b.c_beta, a.c_beta / 2, rtol=1e-12, atol=0)
    assert np.allclose(b.c_gamma, a.c_gamma / 2, rtol=1e-12, atol=0)
    assert np.allclose(b.c_lambda, a.c_lambda / 2, rtol=1e-12, atol=0)


def test_equilibrium_outside_rayleigh_range(single_ion, tight_beam, caplog):
    y_r = tight_beam.rayleigh_range(Axis.X)
    with pytest.raises(ConfigError, match="addressing.y0_m"):
        _params(single_ion, tight_beam, BeamFramePoint(0.0, 0.6 * y_r, 0.0))
    with caplog.at_level(logging.WARNING):
        _params(single_ion, tight_beam, BeamFramePoint(0.0, 0.2 * y_r, 0.0))
    assert "exceeds" in caplog.text


def test_ion_index_is_checked(single_ion, tight_beam):
    point = BeamFramePoint(0.0, 0.0, 0.0)
    with pytest.raises(ConfigError, match="addressing.ion"):
        coupling_params((tight_beam, tight_beam), (point, point), single_ion, 1)
