"""Spectroscopy, curve fitting and dispersive readout."""

from sled_qubit.analysis.fitting import FitResult, fit_damped_cosine, fit_lorentzian_pair
from sled_qubit.analysis.readout import ResonatorSpec, readout_scan, transmitted_amplitude
from sled_qubit.analysis.spectroscopy import ProbeScan, pump_probe_scan, shift_scan

__all__ = [
    "FitResult",
    "fit_damped_cosine",
    "fit_lorentzian_pair",
    "ResonatorSpec",
    "readout_scan",
    "transmitted_amplitude",
    "ProbeScan",
    "pump_probe_scan",
    "shift_scan",
]
