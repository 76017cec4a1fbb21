"""
Custom exceptions for sled-qubit.

This module provides one exception hierarchy for the whole library so that
callers (and the command-line harness) can tell configuration mistakes apart
from numerical failures.
"""

from typing import Any, Dict, List, Optional


class SledQubitError(Exception):
    """Base exception for all sled-qubit errors."""

    pass


class ConfigurationError(SledQubitError):
    """Raised when configuration is invalid."""

    def __init__(self, message: str, field_path: Optional[str] = None) -> None:
        self.field_path = field_path
        if field_path:
            message = f"{field_path}: {message}"
        super().__init__(message)


class UnitError(ConfigurationError):
    """Raised when a quantity carries an unknown or inappropriate unit."""

    def __init__(self, unit: str, allowed: List[str], field_path: Optional[str] = None) -> None:
        self.unit = unit
        self.allowed = allowed
        super().__init__(
            f"Unsupported unit '{unit}'. Allowed: {', '.join(sorted(allowed))}.",
            field_path=field_path,
        )


class GridMismatchError(ConfigurationError):
    """Raised when a noise record does not fit the integration plan."""

    pass


class StateError(SledQubitError):
    """Base class for density-matrix and Bloch-vector errors."""

    pass


class InvalidStateError(StateError):
    """Raised when a matrix is not a valid density matrix."""

    pass


class UnphysicalVectorError(StateError):
    """Raised when a Bloch vector lies outside the unit ball."""

    def __init__(self, norm: float) -> None:
        self.norm = norm
        super().__init__(f"Bloch vector norm {norm:.12g} exceeds 1.")


class OperatorError(SledQubitError):
    """Base class for operator construction errors."""

    pass


class NonHermitianError(OperatorError):
    """Raised when a Hamiltonian is not Hermitian."""

    def __init__(self, deviation: float) -> None:
        self.deviation = deviation
        super().__init__(f"Operator is not Hermitian (max |H - H^dagger| = {deviation:.3e}).")


class NonFiniteError(OperatorError):
    """Raised when an operator contains NaN or infinite entries."""

    pass


class BathError(SledQubitError):
    """Base class for bath-model errors."""

    pass


class DomainError(BathError):
    """Raised when a function is evaluated outside its domain."""

    pass


class SpectralNegativityError(BathError):
    """Raised when the reduced noise spectrum turns negative."""

    def __init__(self, omega: float, value: float) -> None:
        self.omega = omega
        self.value = value
        super().__init__(
            f"Reduced spectrum is negative ({value:.3e}) at omega={omega:.6e} rad/s."
        )


class NumericalError(SledQubitError):
    """Base class for numerical failures."""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None) -> None:
        self.diagnostics = diagnostics or {}
        super().__init__(message)


class QuadratureError(NumericalError):
    """Raised when an adaptive quadrature does not converge."""

    pass


class PositivityViolationError(NumericalError):
    """Raised when a Lindblad-propagated state loses positivity."""

    def __init__(self, time: float, eigenvalue: float, dt: float) -> None:
        self.time = time
        self.eigenvalue = eigenvalue
        self.dt = dt
        super().__init__(
            f"Negative eigenvalue {eigenvalue:.3e} at t={time:.6e} s. "
            f"Reduce the time step (dt={dt:.3e} s).",
            diagnostics={"time": time, "eigenvalue": eigenvalue, "dt": dt},
        )


class CircularCorrelationError(NumericalError):
    """Raised when a lag would wrap around a periodic noise record."""

    def __init__(self, lag: float, limit: float) -> None:
        self.lag = lag
        self.limit = limit
        super().__init__(
            f"Lag {lag:.6e} s exceeds the usable half duration {limit:.6e} s.",
            diagnostics={"lag": lag, "limit": limit},
        )


class FitError(NumericalError):
    """Raised when a least-squares fit fails or is rejected."""

    pass


class ContractError(SledQubitError):
    """Raised when an operation is called outside its declared domain."""

    pass
