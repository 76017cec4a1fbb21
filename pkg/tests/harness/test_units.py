"""Tests for unit-tagged quantities."""

import math

import pytest

from sled_qubit.exceptions import ConfigurationError, UnitError
from sled_qubit.harness.units import (
    ALL_UNITS,
    Quantity,
    from_internal,
    hbar_beta_from_temperature,
    parse_quantity,
    temperature_from_hbar_beta,
    to_internal,
)


class TestParseQuantity:
    """Tests for parse_quantity."""

    def test_valid(self) -> None:
        """Test a frequency object parses."""
        quantity = parse_quantity({"value": 5, "unit": "GHz"}, "frequency", "qubit.omega_q")
        assert quantity == Quantity(5.0, "GHz")

    def test_unknown_unit(self) -> None:
        """Test units outside the whitelist raise UnitError with the field path."""
        with pytest.raises(UnitError, match="qubit.omega_q") as excinfo:
            parse_quantity({"value": 5, "unit": "Hz"}, "frequency", "qubit.omega_q")
        assert excinfo.value.unit == "Hz"
        assert excinfo.value.field_path == "qubit.omega_q"
        assert excinfo.value.allowed == ALL_UNITS

    def test_wrong_kind(self) -> None:
        """Test a temperature unit is rejected for a frequency."""
        with pytest.raises(UnitError, match="Allowed: GHz, MHz, kHz, rad_per_s"):
            parse_quantity({"value": 48, "unit": "mK"}, "frequency", "bath.gamma")

    @pytest.mark.parametrize(
        "raw",
        [
            5.0,
            {"value": 5.0},
            {"value": 5.0, "unit": "GHz", "extra": 1},
            {"value": True, "unit": "GHz"},
            {"value": "5", "unit": "GHz"},
            {"value": float("inf"), "unit": "GHz"},
        ],
    )
    def test_malformed(self, raw) -> None:
        """Test malformed objects raise ConfigurationError."""
        with pytest.raises(ConfigurationError, match="drive.Omega_d"):
            parse_quantity(raw, "frequency", "drive.Omega_d")


class TestConversions:
    """Tests for internal-unit conversions."""

    def test_cyclic_to_angular(self) -> None:
        """Test GHz, MHz and kHz carry a factor 2 pi."""
        assert to_internal(Quantity(5.0, "GHz")) == pytest.approx(2 * math.pi * 5e9)
        assert to_internal(Quantity(50.0, "MHz")) == pytest.approx(2 * math.pi * 5e7)
        assert to_internal(Quantity(250.0, "kHz")) == pytest.approx(2 * math.pi * 2.5e5)
        assert to_internal(Quantity(3.0, "rad_per_s")) == 3.0

    def test_round_trip(self) -> None:
        """Test every unit survives to_internal followed by from_internal."""
        for unit in ALL_UNITS:
            back = from_internal(to_internal(Quantity(0.123456789, unit)), unit)
            assert back.unit == unit
            assert back.value == pytest.approx(0.123456789, rel=1e-12)

    def test_unknown_unit(self) -> None:
        """Test conversions reject unknown units."""
        with pytest.raises(UnitError):
            to_internal(Quantity(1.0, "Hz"))
        with pytest.raises(UnitError):
            from_internal(1.0, "Hz")

    def test_default_temperature(self) -> None:
        """Test 48 mK gives hbar beta w_q close to 5 at 5 GHz."""
        hbar_beta = hbar_beta_from_temperature(to_internal(Quantity(48.0, "mK")))
        assert hbar_beta * 2 * math.pi * 5e9 == pytest.approx(5.0, abs=1e-2)

    def test_temperature_round_trip(self) -> None:
        """Test temperature_from_hbar_beta inverts hbar_beta_from_temperature."""
        assert temperature_from_hbar_beta(hbar_beta_from_temperature(0.048)) == pytest.approx(0.048, rel=1e-12)

    def test_non_positive_temperature(self) -> None:
        """Test T <= 0 is rejected."""
        with pytest.raises(ConfigurationError, match="temperature must be positive"):
            hbar_beta_from_temperature(0.0)
