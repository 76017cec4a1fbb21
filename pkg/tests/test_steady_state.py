"""Unit tests for closed-form steady states and derived measures."""

import math

import numpy as np
import pytest

from sled_qubit.core.bath import rates
from sled_qubit.core.qubit_algebra import fidelity, from_bloch
from sled_qubit.core.steady_state import (
    SteadyParams,
    critical_ratio,
    delta_sigma,
    failure_measure,
    fit_alpha,
    lme_detuning_fidelity,
    scan_critical_ratio,
    steady_bloch_rwa,
    witness_curve,
)
from sled_qubit.exceptions import DomainError, FitError
from tests.conftest import GAMMA, OMEGA_D


class TestSteadyParams:
    """Tests for SteadyParams validation."""

    def test_rejects_small_gamma_beta(self) -> None:
        """Test gamma_beta below gamma is rejected."""
        with pytest.raises(ValueError, match="at least gamma"):
            SteadyParams(Omega_d=1.0, gamma=1.0, gamma_beta=0.5)

    def test_rejects_negative_drive(self) -> None:
        """Test a negative Rabi frequency is rejected."""
        with pytest.raises(ValueError, match="non-negative"):
            SteadyParams(Omega_d=-1.0, gamma=1.0, gamma_beta=1.0)

    def test_from_alpha(self) -> None:
        """Test Delta_q = -alpha gamma."""
        params = SteadyParams.from_alpha(0.5, 2.0, 1.0)
        assert params.Delta_q == -1.0
        assert params.gamma_beta == 2.0


class TestSteadyBloch:
    """Tests for the stationary Bloch vector."""

    def test_default_parameters(self, table_bath) -> None:
        """Test resonant z at the default drive and bath."""
        params = SteadyParams.from_rates(rates(table_bath), OMEGA_D)
        assert steady_bloch_rwa(params).z == pytest.approx(0.3348, abs=1e-4)

    def test_undriven_is_thermal(self) -> None:
        """Test W = 0 gives (0, 0, gamma / gamma_beta)."""
        v = steady_bloch_rwa(SteadyParams(Omega_d=0.0, gamma=1.0, gamma_beta=1.25, Delta_q=0.3))
        assert v.as_tuple() == pytest.approx((0.0, 0.0, 0.8))

    def test_physical(self) -> None:
        """Test |v| <= 1 over a parameter sweep."""
        for w in (0.01, 0.3, 3.0):
            for d in (-2.0, 0.0, 0.7):
                v = steady_bloch_rwa(SteadyParams(Omega_d=w, gamma=0.1, gamma_beta=0.11, Delta_q=d))
                assert v.is_physical()


class TestDeltaSigma:
    """Tests for detuned-minus-resonant differences."""

    @pytest.fixture
    def params(self):
        return SteadyParams(Omega_d=1.0, gamma=0.2, gamma_beta=0.21)

    def test_zero_at_resonance(self, params) -> None:
        """Test all differences vanish at Delta_q = 0."""
        assert delta_sigma(params) == (0.0, 0.0, 0.0)

    def test_parity(self, params) -> None:
        """Test dx is odd while dy and dz are even in the detuning."""
        plus = delta_sigma(params.with_detuning(0.4))
        minus = delta_sigma(params.with_detuning(-0.4))
        assert plus[0] == pytest.approx(-minus[0])
        assert plus[1] == pytest.approx(minus[1])
        assert plus[2] == pytest.approx(minus[2])
        assert plus[2] >= 0.0

    def test_matches_difference(self, params) -> None:
        """Test the closed forms against the difference of steady vectors."""
        for detuning in np.linspace(-3.0, 3.0, 13):
            detuned = steady_bloch_rwa(params.with_detuning(detuning))
            resonant = steady_bloch_rwa(params)
            expected = (detuned - resonant).as_tuple()
            assert delta_sigma(params.with_detuning(detuning)) == pytest.approx(expected, abs=1e-12)


class TestDetuningFidelity:
    """Tests for the shifted-vs-resonant Lindblad fidelity."""

    def test_matches_state_fidelity(self) -> None:
        """Test the closed form against the fidelity of the two steady states."""
        for gamma, delta in ((0.1, -0.1), (1.0, -0.5), (2.0, 1.3)):
            resonant = steady_bloch_rwa(SteadyParams(Omega_d=1.0, gamma=gamma, gamma_beta=gamma))
            shifted = steady_bloch_rwa(SteadyParams(Omega_d=1.0, gamma=gamma, gamma_beta=gamma, Delta_q=delta))
            expected = fidelity(from_bloch(resonant), from_bloch(shifted))
            assert lme_detuning_fidelity(delta, 1.0, gamma) == pytest.approx(expected, abs=1e-12)

    def test_no_shift(self) -> None:
        """Test F = 1 without a shift."""
        assert lme_detuning_fidelity(0.0, 1.0, 0.3) == 1.0


class TestCriticalRatio:
    """Tests for the location of the fidelity minimum."""

    def test_alpha_one(self) -> None:
        """Test sqrt(2) / 5^(1/4) for alpha = 1."""
        assert critical_ratio(1.0) == pytest.approx(0.9457, abs=1e-4)

    def test_domain(self) -> None:
        """Test alpha <= 0 raises DomainError."""
        with pytest.raises(DomainError, match="alpha > 0"):
            critical_ratio(0.0)

    @pytest.mark.parametrize("alpha", [0.25, 1.0, 4.0])
    def test_scan_agrees(self, alpha) -> None:
        """Test a brute-force scan finds the closed-form minimum within one grid step."""
        ratios = np.linspace(0.01, 3.0, 2991)
        step = ratios[1] - ratios[0]
        assert abs(scan_critical_ratio(alpha, ratios) - critical_ratio(alpha)) <= step


class TestShiftFit:
    """Tests for the linear shift fit."""

    def test_exact_line(self) -> None:
        """Test alpha and R^2 for noiseless data in rad/s."""
        gammas = GAMMA * np.linspace(0.1, 1.0, 10)
        fit = fit_alpha(gammas, -0.98 * gammas)
        assert fit.alpha == pytest.approx(0.98, rel=1e-10)
        assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
        assert abs(fit.intercept) < 1e-6 * GAMMA
        assert set(fit.to_dict()) == {"slope", "intercept", "r_squared", "alpha"}

    def test_ignores_non_finite(self) -> None:
        """Test NaN points are dropped before fitting."""
        fit = fit_alpha([1.0, 2.0, 3.0, 4.0], [-1.0, -2.0, math.nan, -4.0])
        assert fit.alpha == pytest.approx(1.0)

    def test_too_few_points(self) -> None:
        """Test a single finite point raises FitError."""
        with pytest.raises(FitError, match="at least two"):
            fit_alpha([1.0, 2.0], [-1.0, math.nan])


class TestWitness:
    """Tests for the Lindblad failure witness."""

    def test_zero_for_lindblad_prediction(self) -> None:
        """Test a measured value equal to the resonant prediction gives zero."""
        params = SteadyParams(Omega_d=1.0, gamma=0.5, gamma_beta=0.55)
        prediction = steady_bloch_rwa(params).z
        assert failure_measure(prediction, params.with_detuning(0.2)) == pytest.approx(0.0)

    def test_curve(self) -> None:
        """Test witness_curve builds one point per gamma and keeps errors."""
        points = witness_curve([0.1, 0.2], [0.0, 0.1], 1.0, [0.1, 0.2], "sled", stderrs=[0.01, 0.02])
        assert [p.gamma for p in points] == [0.1, 0.2]
        assert points[1].stderr == 0.02
        assert points[0].solver == "sled"
        resonant = steady_bloch_rwa(SteadyParams(Omega_d=1.0, gamma=0.1, gamma_beta=0.1)).z
        assert points[0].witness == pytest.approx(-resonant)
