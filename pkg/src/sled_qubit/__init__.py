"""
sled-qubit - Driven two-level system in an Ohmic bath.

Compares the Lindblad master equation (with and without the bath-induced
energy shift) against the numerically exact stochastic Liouville equation
with dissipation (SLED), and provides steady-state analytics, pump-probe
spectroscopy and a semiclassical dispersive-readout model.
"""

__version__ = "0.1.0"

from sled_qubit.core.qubit_algebra import (
    BlochVector,
    DensityMatrix,
    fidelity,
    from_bloch,
    to_bloch,
)
from sled_qubit.core.bath import BathRates, BathSpec, energy_shift, rates
from sled_qubit.core.noise import NoiseGrid, NoiseKernel, NoiseTrajectory, build_kernel, synthesize
from sled_qubit.core.propagators import (
    DriveSpec,
    DriveTone,
    EnsemblePlan,
    EnsembleSeries,
    LindbladModel,
    SledModel,
    StepPlan,
    TrajectorySeries,
    avg_fidelity_over_window,
    lme_steady_state,
    propagate_lme,
    propagate_sled_ensemble,
    propagate_sled_trajectory,
)
from sled_qubit.core.steady_state import SteadyParams, critical_ratio, delta_sigma, steady_bloch_rwa

# Export exceptions for user error handling
from sled_qubit.exceptions import (
    SledQubitError,
    ConfigurationError,
    UnitError,
    GridMismatchError,
    StateError,
    InvalidStateError,
    UnphysicalVectorError,
    OperatorError,
    NonHermitianError,
    NonFiniteError,
    BathError,
    DomainError,
    SpectralNegativityError,
    NumericalError,
    QuadratureError,
    PositivityViolationError,
    CircularCorrelationError,
    FitError,
    ContractError,
)

__all__ = [
    # Qubit algebra
    "BlochVector",
    "DensityMatrix",
    "fidelity",
    "from_bloch",
    "to_bloch",
    # Bath
    "BathRates",
    "BathSpec",
    "energy_shift",
    "rates",
    # Noise
    "NoiseGrid",
    "NoiseKernel",
    "NoiseTrajectory",
    "build_kernel",
    "synthesize",
    # Propagation
    "DriveSpec",
    "DriveTone",
    "EnsemblePlan",
    "EnsembleSeries",
    "LindbladModel",
    "SledModel",
    "StepPlan",
    "TrajectorySeries",
    "avg_fidelity_over_window",
    "lme_steady_state",
    "propagate_lme",
    "propagate_sled_ensemble",
    "propagate_sled_trajectory",
    # Steady state
    "SteadyParams",
    "critical_ratio",
    "delta_sigma",
    "steady_bloch_rwa",
    # Exceptions
    "SledQubitError",
    "ConfigurationError",
    "UnitError",
    "GridMismatchError",
    "StateError",
    "InvalidStateError",
    "UnphysicalVectorError",
    "OperatorError",
    "NonHermitianError",
    "NonFiniteError",
    "BathError",
    "DomainError",
    "SpectralNegativityError",
    "NumericalError",
    "QuadratureError",
    "PositivityViolationError",
    "CircularCorrelationError",
    "FitError",
    "ContractError",
]
