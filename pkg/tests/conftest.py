"""Pytest configuration and fixtures."""

import math

import pytest

from sled_qubit.core.bath import BathSpec, rates
from sled_qubit.core.qubit_algebra import DensityMatrix, from_bloch


# Default parameter set (cyclic frequencies converted to rad/s)
TWO_PI = 2.0 * math.pi
OMEGA_Q = TWO_PI * 5e9  # qubit
OMEGA_R = TWO_PI * 7e9  # readout resonator
CHI = TWO_PI * -5e6  # dispersive shift
OMEGA_D = TWO_PI * 50e6  # drive Rabi frequency
OMEGA_P = TWO_PI * 5e6  # probe amplitude
OMEGA_M = TWO_PI * 250e3  # measurement drive amplitude
KAPPA = TWO_PI * 250e3  # resonator decay
GAMMA = TWO_PI * 50e6  # dissipation rate
OMEGA_C = TWO_PI * 250e9  # bath cutoff
HBAR_BETA_OMEGA_Q = 5.0  # hbar beta w_q at 48 mK


@pytest.fixture
def table_bath():
    """Bath of the default parameter set, eta = gamma / (2 w_q)."""
    return BathSpec.from_gamma(GAMMA, OMEGA_Q, OMEGA_C, HBAR_BETA_OMEGA_Q / OMEGA_Q)


@pytest.fixture
def unit_bath():
    """Same bath in units of w_q = 1 (gamma = 0.01, w_c = 50, hbar beta = 5)."""
    return BathSpec(eta=5e-3, omega_c=50.0, hbar_beta=5.0, omega_q=1.0)


@pytest.fixture
def unit_rates(unit_bath):
    """Lindblad rates of the unit bath."""
    return rates(unit_bath)


@pytest.fixture
def ground_state():
    """|0><0|, Bloch (0, 0, 1)."""
    return DensityMatrix.pure(0)


@pytest.fixture
def excited_state():
    """|1><1|, Bloch (0, 0, -1)."""
    return DensityMatrix.pure(1)


@pytest.fixture
def plus_x_state():
    """+1 eigenstate of sigma_x."""
    return from_bloch((1.0, 0.0, 0.0))


# Configure pytest to show full diffs
def pytest_configure(config):
    """Configure pytest options."""
    config.option.verbose = 2
