"""
Unit-tagged quantities for run configuration.

Every physical value in a configuration document is an object
``{"value": x, "unit": u}``. Cyclic frequencies (GHz, MHz, kHz) are converted
to angular frequency with 2 pi; temperatures in mK are kept in kelvin and
turned into hbar / (k_B T) where needed.
"""

import math
from dataclasses import dataclass
from typing import Any, Dict, Mapping

from scipy import constants

from sled_qubit.exceptions import ConfigurationError, UnitError

# Conversion factor to the internal unit for each whitelisted unit
FREQUENCY_UNITS: Dict[str, float] = {
    "GHz": 2.0 * math.pi * 1e9,
    "MHz": 2.0 * math.pi * 1e6,
    "kHz": 2.0 * math.pi * 1e3,
    "rad_per_s": 1.0,
}
TEMPERATURE_UNITS: Dict[str, float] = {"mK": 1e-3}
DIMENSIONLESS_UNITS: Dict[str, float] = {"dimensionless": 1.0}

UNIT_KINDS: Dict[str, Dict[str, float]] = {
    "frequency": FREQUENCY_UNITS,
    "temperature": TEMPERATURE_UNITS,
    "dimensionless": DIMENSIONLESS_UNITS,
}
ALL_UNITS = sorted({unit for table in UNIT_KINDS.values() for unit in table})


@dataclass(frozen=True)
class Quantity:
    """A value together with its unit as written in the configuration."""

    value: float
    unit: str

    def to_dict(self) -> Dict[str, Any]:
        return {"value": self.value, "unit": self.unit}


def parse_quantity(raw: Any, kind: str, field_path: str) -> Quantity:
    """
    Validate a ``{"value", "unit"}`` object.

    Raises:
        ConfigurationError: If the object is malformed
        UnitError: If the unit is unknown or of the wrong kind
    """
    if not isinstance(raw, Mapping) or set(raw) != {"value", "unit"}:
        raise ConfigurationError('expected an object {"value": number, "unit": string}', field_path)
    value, unit = raw["value"], raw["unit"]
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigurationError(f"value must be a finite number, got {value!r}", field_path)
    if unit not in ALL_UNITS:
        raise UnitError(str(unit), ALL_UNITS, field_path)
    if unit not in UNIT_KINDS[kind]:
        raise UnitError(str(unit), sorted(UNIT_KINDS[kind]), field_path)
    return Quantity(float(value), unit)


def to_internal(quantity: Quantity) -> float:
    """Value in internal units: rad/s, kelvin or plain number."""
    for table in UNIT_KINDS.values():
        if quantity.unit in table:
            return quantity.value * table[quantity.unit]
    raise UnitError(quantity.unit, ALL_UNITS)


def from_internal(value: float, unit: str) -> Quantity:
    """Express an internal value in ``unit``."""
    for table in UNIT_KINDS.values():
        if unit in table:
            return Quantity(value / table[unit], unit)
    raise UnitError(unit, ALL_UNITS)


def hbar_beta_from_temperature(kelvin: float) -> float:
    """Inverse temperature hbar / (k_B T) in seconds."""
    if kelvin <= 0:
        raise ConfigurationError(f"temperature must be positive, got {kelvin} K")
    return constants.hbar / (constants.k * kelvin)


def temperature_from_hbar_beta(hbar_beta: float) -> float:
    """Temperature in kelvin for a given hbar / (k_B T)."""
    return constants.hbar / (constants.k * hbar_beta)
