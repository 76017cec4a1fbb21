"""Unit tests for the Ohmic bath model."""

import logging
import math

import numpy as np
import pytest

from sled_qubit.core.bath import (
    BathSpec,
    bath_correlation_real,
    bose_occupation,
    coth_minus_inverse,
    energy_shift,
    energy_shift_time_domain,
    power_spectrum,
    rates,
    real_correlation_reduced,
    reduced_spectrum,
    spectral_density,
    symmetrized_spectrum,
)
from sled_qubit.exceptions import DomainError


class TestBathSpec:
    """Tests for BathSpec construction."""

    def test_from_gamma(self) -> None:
        """Test eta = gamma / (2 w_q)."""
        spec = BathSpec.from_gamma(0.02, 2.0, 100.0, 1.0)
        assert spec.eta == pytest.approx(5e-3)
        assert spec.gamma == pytest.approx(0.02)

    def test_with_gamma(self, unit_bath) -> None:
        """Test with_gamma keeps cutoff and temperature."""
        other = unit_bath.with_gamma(0.1)
        assert other.gamma == pytest.approx(0.1)
        assert other.omega_c == unit_bath.omega_c
        assert other.hbar_beta == unit_bath.hbar_beta

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"eta": -1e-3},
            {"omega_c": 0.0},
            {"hbar_beta": -1.0},
            {"omega_q": 0.0},
        ],
    )
    def test_invalid_parameters(self, kwargs) -> None:
        """Test out-of-range parameters are rejected."""
        params = {"eta": 1e-3, "omega_c": 50.0, "hbar_beta": 5.0, "omega_q": 1.0}
        params.update(kwargs)
        with pytest.raises(ValueError):
            BathSpec(**params)

    def test_low_cutoff_warning(self, caplog) -> None:
        """Test a warning is logged for w_c < 10 w_q."""
        with caplog.at_level(logging.WARNING):
            BathSpec(eta=1e-3, omega_c=5.0, hbar_beta=5.0, omega_q=1.0)
        assert "Cutoff" in caplog.text


class TestSpectra:
    """Tests for spectral functions."""

    def test_spectral_density_at_cutoff(self, unit_bath) -> None:
        """Test J(w_c) = eta w_c / 2 and oddness."""
        assert spectral_density(unit_bath, 50.0) == pytest.approx(2 * 5e-3 * 50.0 / 4.0)
        assert spectral_density(unit_bath, -3.0) == pytest.approx(-spectral_density(unit_bath, 3.0))

    def test_bose_occupation(self, unit_bath) -> None:
        """Test n(w_q) at hbar beta w_q = 5."""
        assert bose_occupation(unit_bath, 1.0) == pytest.approx(6.7837e-3, rel=1e-4)

    def test_bose_occupation_domain(self, unit_bath) -> None:
        """Test n(w) is undefined for w <= 0."""
        with pytest.raises(DomainError, match="omega > 0"):
            bose_occupation(unit_bath, 0.0)

    def test_power_spectrum_detailed_balance(self, unit_bath) -> None:
        """Test S(w) / S(-w) = exp(hbar beta w)."""
        for omega in (0.1, 1.0, 3.0):
            ratio = power_spectrum(unit_bath, omega) / power_spectrum(unit_bath, -omega)
            assert ratio == pytest.approx(math.exp(5.0 * omega), rel=1e-10)

    def test_power_spectrum_zero_limit(self, unit_bath) -> None:
        """Test S(0) = 2 eta / (hbar beta)."""
        assert power_spectrum(unit_bath, 0.0) == pytest.approx(2 * 5e-3 / 5.0)
        assert power_spectrum(unit_bath, 1e-9) == pytest.approx(2 * 5e-3 / 5.0, rel=1e-6)

    def test_symmetrized_spectrum(self, unit_bath) -> None:
        """Test J coth = S(w) + S(-w) and its value at zero."""
        omega = np.array([0.05, 0.5, 2.0, 40.0])
        expected = power_spectrum(unit_bath, omega) + power_spectrum(unit_bath, -omega)
        assert np.allclose(symmetrized_spectrum(unit_bath, omega), expected, rtol=1e-12)
        assert symmetrized_spectrum(unit_bath, 0.0) == pytest.approx(4 * 5e-3 / 5.0)

    def test_reduced_spectrum_non_negative(self, unit_bath) -> None:
        """Test the white-noise-deducted spectrum is even, >= 0 and zero at 0."""
        omega = np.linspace(-200.0, 200.0, 4001)
        values = reduced_spectrum(unit_bath, omega)
        assert np.all(values >= 0.0)
        assert reduced_spectrum(unit_bath, 0.0) == 0.0
        assert np.allclose(values, values[::-1])

    def test_coth_series_is_continuous(self) -> None:
        """Test the series branch matches the closed form near the threshold."""
        below = coth_minus_inverse(0.999e-3)
        above = coth_minus_inverse(1.001e-3)
        assert below == pytest.approx(0.999e-3 / 3.0, rel=1e-6)
        assert above == pytest.approx(1.001e-3 / 3.0, rel=1e-6)


class TestRates:
    """Tests for Lindblad rates."""

    def test_thermal_enhancement(self, unit_rates) -> None:
        """Test gamma_beta / gamma = 2 n + 1."""
        assert unit_rates.gamma_beta / unit_rates.gamma == pytest.approx(1.01357, rel=1e-5)

    def test_detailed_balance(self, unit_rates) -> None:
        """Test Gamma_down / Gamma_up = exp(hbar beta w_q)."""
        assert unit_rates.Gamma_down / unit_rates.Gamma_up == pytest.approx(math.exp(5.0), rel=1e-10)

    def test_physical_units(self, table_bath) -> None:
        """Test the default bath gives the same ratios in rad/s."""
        bath_rates = rates(table_bath)
        assert bath_rates.gamma == pytest.approx(2 * math.pi * 50e6)
        assert bath_rates.gamma_beta / bath_rates.gamma == pytest.approx(1.01357, rel=1e-5)


class TestEnergyShift:
    """Tests for the bath-induced energy shift."""

    def test_negative_and_of_order_gamma(self, unit_bath) -> None:
        """Test Delta_s < 0 with alpha = -Delta_s / gamma close to one."""
        shift = energy_shift(unit_bath)
        assert shift < 0.0
        assert 0.5 < -shift / unit_bath.gamma < 1.5

    def test_linear_in_coupling(self, unit_bath) -> None:
        """Test Delta_s scales linearly with eta."""
        single = energy_shift(unit_bath)
        double = energy_shift(unit_bath.with_gamma(2.0 * unit_bath.gamma))
        assert double == pytest.approx(2.0 * single, rel=1e-9)

    def test_uncoupled_bath(self, unit_bath) -> None:
        """Test Delta_s = 0 for eta = 0."""
        assert energy_shift(unit_bath.with_gamma(0.0)) == 0.0

    def test_time_domain_agreement(self, unit_bath) -> None:
        """Test the damped time-domain form approaches the principal value."""
        assert energy_shift_time_domain(unit_bath) == pytest.approx(energy_shift(unit_bath), rel=1e-3)

    def test_scale_invariance(self, unit_bath, table_bath) -> None:
        """Test Delta_s / w_q depends only on dimensionless ratios."""
        assert energy_shift(table_bath) / table_bath.omega_q == pytest.approx(
            energy_shift(unit_bath), rel=1e-7
        )


class TestCorrelations:
    """Tests for bath correlation functions."""

    def test_reduced_correlation_even(self, unit_bath) -> None:
        """Test L'_r(tau) = L'_r(-tau)."""
        assert real_correlation_reduced(unit_bath, 0.3) == pytest.approx(
            real_correlation_reduced(unit_bath, -0.3), rel=1e-12
        )

    def test_reduced_correlation_peak_at_zero(self, unit_bath) -> None:
        """Test |L'_r(tau)| <= L'_r(0)."""
        peak = real_correlation_reduced(unit_bath, 0.0)
        assert peak > 0.0
        for tau in (0.01, 0.1, 1.0):
            assert abs(real_correlation_reduced(unit_bath, tau)) <= peak

    def test_full_correlation_exceeds_reduced(self, unit_bath) -> None:
        """Test L_r(0) contains the white part on top of L'_r(0)."""
        assert bath_correlation_real(unit_bath, 0.0) > real_correlation_reduced(unit_bath, 0.0)
