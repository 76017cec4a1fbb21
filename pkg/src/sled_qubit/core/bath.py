"""
Ohmic bath with a quartic Drude cutoff.

Spectral density J(w) = 2 eta w / (1 + w^2 / w_c^2)^2, occupation numbers,
transition rates, the bath-induced energy shift of the qubit and the
white-noise-deducted spectrum that feeds noise synthesis.

Internal units: angular frequencies in rad/s, ``hbar_beta`` in seconds
(hbar / k_B T), hbar = k_B = 1.
"""

import logging
import math
import warnings
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Any, Callable, Dict, List, Optional, Sequence, Union

import numpy as np
from scipy import integrate

from sled_qubit.exceptions import DomainError, QuadratureError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

CUTOFF_WARNING_RATIO = 10.0  # warn when omega_c < ratio * omega_q
UPPER_LIMIT_FACTOR = 50.0  # quadratures run up to 50 * omega_c
QUAD_TOLERANCE = 1e-10  # absolute tolerance in units of gamma
QUAD_LIMIT = 400  # max adaptive subintervals
SERIES_THRESHOLD = 1e-3  # coth(y) - 1/y switches to its series below |y| < threshold


@dataclass(frozen=True)
class BathSpec:
    """
    Ohmic bath parameters.

    Attributes:
        eta: Dimensionless coupling strength
        omega_c: Cutoff angular frequency (rad/s)
        hbar_beta: Inverse temperature hbar / (k_B T) in seconds
        omega_q: Reference qubit angular frequency (rad/s)

    Raises:
        ValueError: If a parameter is out of range
    """

    eta: float
    omega_c: float
    hbar_beta: float
    omega_q: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.eta) or self.eta < 0:
            raise ValueError(f"eta must be non-negative, got {self.eta}")
        if self.omega_c <= 0:
            raise ValueError(f"omega_c must be positive, got {self.omega_c}")
        if self.hbar_beta <= 0:
            raise ValueError(f"hbar_beta must be positive, got {self.hbar_beta}")
        if self.omega_q <= 0:
            raise ValueError(f"omega_q must be positive, got {self.omega_q}")
        if self.omega_c < CUTOFF_WARNING_RATIO * self.omega_q:
            logger.warning(
                "Cutoff omega_c=%.3e is below %.0f x omega_q=%.3e; "
                "the Markovian rate mapping gamma = 2 eta omega_q degrades",
                self.omega_c,
                CUTOFF_WARNING_RATIO,
                self.omega_q,
            )

    @classmethod
    def from_gamma(
        cls, gamma: float, omega_q: float, omega_c: float, hbar_beta: float
    ) -> "BathSpec":
        """Build a bath from the qubit dissipation rate, eta = gamma / (2 omega_q)."""
        return cls(eta=gamma / (2.0 * omega_q), omega_c=omega_c, hbar_beta=hbar_beta, omega_q=omega_q)

    @property
    def gamma(self) -> float:
        """Effective dissipation rate gamma = 2 eta omega_q."""
        return 2.0 * self.eta * self.omega_q

    def with_gamma(self, gamma: float) -> "BathSpec":
        """Same bath at another coupling strength."""
        return replace(self, eta=gamma / (2.0 * self.omega_q))


@dataclass(frozen=True)
class BathRates:
    """
    Rates entering the Lindblad equation.

    Attributes:
        gamma: 2 eta omega_q
        gamma_beta: gamma (2 n + 1)
        Gamma_down: Emission rate gamma (n + 1)
        Gamma_up: Absorption rate gamma n
        delta_s: Bath-induced energy shift (rad/s)
    """

    gamma: float
    gamma_beta: float
    Gamma_down: float
    Gamma_up: float
    delta_s: float

    def to_dict(self) -> Dict[str, float]:
        return {
            "gamma": self.gamma,
            "gamma_beta": self.gamma_beta,
            "Gamma_down": self.Gamma_down,
            "Gamma_up": self.Gamma_up,
            "delta_s": self.delta_s,
        }


def spectral_density(spec: BathSpec, omega: ArrayLike) -> ArrayLike:
    """
    Ohmic spectral density with quartic Drude cutoff, odd in omega.

    Example:
        >>> spec = BathSpec(eta=0.1, omega_c=1.0, hbar_beta=1.0, omega_q=0.1)
        >>> spectral_density(spec, 1.0)
        0.05
    """
    omega = np.asarray(omega, dtype=float)
    value = 2.0 * spec.eta * omega / (1.0 + (omega / spec.omega_c) ** 2) ** 2
    return float(value) if value.ndim == 0 else value


def bose_occupation(spec: BathSpec, omega: ArrayLike) -> ArrayLike:
    """
    Mean excitation number 1 / (exp(hbar beta omega) - 1).

    Raises:
        DomainError: If any omega <= 0
    """
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise DomainError("bose_occupation is defined for omega > 0 only")
    value = 1.0 / np.expm1(spec.hbar_beta * omega)
    return float(value) if value.ndim == 0 else value


def power_spectrum(spec: BathSpec, omega: ArrayLike) -> ArrayLike:
    """
    Noise power spectrum S(w) = J(w) [n(w) + 1] for all real w.

    At w = 0 the analytic limit 2 eta / (hbar beta) is used.
    """
    omega = np.asarray(omega, dtype=float)
    x = spec.hbar_beta * omega
    safe = np.where(omega == 0.0, 1.0, omega)
    value = spectral_density(spec, safe) / (-np.expm1(-spec.hbar_beta * safe))
    value = np.where(x == 0.0, 2.0 * spec.eta / spec.hbar_beta, value)
    return float(value) if value.ndim == 0 else value


def coth_minus_inverse(y: ArrayLike) -> ArrayLike:
    """coth(y) - 1/y, using its series y/3 - y^3/45 for |y| < 1e-3."""
    y = np.asarray(y, dtype=float)
    small = np.abs(y) < SERIES_THRESHOLD
    safe = np.where(small, 1.0, y)
    value = np.where(small, y / 3.0 - y**3 / 45.0, 1.0 / np.tanh(safe) - 1.0 / safe)
    return float(value) if value.ndim == 0 else value


def symmetrized_spectrum(spec: BathSpec, omega: ArrayLike) -> ArrayLike:
    """
    J(w) coth(hbar beta w / 2) = S(w) + S(-w); even, equals 4 eta / (hbar beta) at 0.
    """
    omega = np.asarray(omega, dtype=float)
    y = 0.5 * spec.hbar_beta * omega
    # J(w) coth(y) = J(w) / y + J(w) (coth y - 1/y); the first term is regular at w = 0
    regular = 2.0 * spec.eta * 2.0 / spec.hbar_beta / (1.0 + (omega / spec.omega_c) ** 2) ** 2
    value = regular + spectral_density(spec, omega) * coth_minus_inverse(y)
    return float(value) if np.ndim(value) == 0 else value


def reduced_spectrum(spec: BathSpec, omega: ArrayLike) -> ArrayLike:
    """
    White-noise-deducted spectrum J(w) [coth(hbar beta w / 2) - 2 / (hbar beta w)] / 2.

    Even and non-negative, zero at w = 0.
    """
    omega = np.asarray(omega, dtype=float)
    y = 0.5 * spec.hbar_beta * omega
    value = 0.5 * spectral_density(spec, omega) * coth_minus_inverse(y)
    return float(value) if np.ndim(value) == 0 else value


def _quad(
    func: Callable[[float], float],
    a: float,
    b: float,
    epsabs: float,
    label: str,
    **kwargs: Any,
) -> float:
    """scipy quad wrapper raising QuadratureError on genuine non-convergence."""
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", integrate.IntegrationWarning)
        value, abserr = integrate.quad(
            func, a, b, epsabs=epsabs, epsrel=1e-10, limit=QUAD_LIMIT, **kwargs
        )
    if not math.isfinite(value) or (
        caught and abserr > max(1e-6 * abs(value), 100.0 * epsabs)
    ):
        diagnostics = {
            "integral": label,
            "interval": (a, b),
            "value": value,
            "abserr": abserr,
            "messages": [str(w.message) for w in caught],
        }
        raise QuadratureError(f"Quadrature '{label}' did not converge", diagnostics)
    if caught:
        logger.debug("Quadrature '%s' warned but abserr=%.3e is acceptable", label, abserr)
    return float(value)


def _breakpoints(lower: float, upper: float, candidates: Sequence[float]) -> List[float]:
    return sorted({p for p in candidates if lower < p < upper})


def rates(spec: BathSpec) -> BathRates:
    """
    Lindblad rates of the bath at the qubit frequency.

    Example:
        >>> r = rates(BathSpec(eta=5e-3, omega_c=50.0, hbar_beta=5.0, omega_q=1.0))
        >>> round(r.gamma_beta / r.gamma, 5)
        1.01357
    """
    gamma = spec.gamma
    n_bar = bose_occupation(spec, spec.omega_q)
    return BathRates(
        gamma=gamma,
        gamma_beta=gamma * (2.0 * n_bar + 1.0),
        Gamma_down=gamma * (n_bar + 1.0),
        Gamma_up=gamma * n_bar,
        delta_s=energy_shift(spec),
    )


def energy_shift(spec: BathSpec) -> float:
    """
    Bath-induced energy shift of the qubit.

    Evaluated as the frequency-domain principal value
    (1/pi) PV int_0^inf J(w) coth(hbar beta w / 2) w_q / (w_q^2 - w^2) dw.
    The pole at w_q is handled by QUADPACK's Cauchy-weight rule on
    [0, 2 w_q]; the remainder up to 50 w_c is a regular adaptive quadrature.

    Returns:
        Delta_s in rad/s (negative for a high cutoff)

    Raises:
        QuadratureError: If a quadrature fails to converge
    """
    if spec.eta == 0.0:
        return 0.0
    return _energy_shift_cached(spec)


@lru_cache(maxsize=512)
def _energy_shift_cached(spec: BathSpec) -> float:
    omega_q = spec.omega_q
    cutoff = spec.omega_c / omega_q
    upper = UPPER_LIMIT_FACTOR * cutoff
    epsabs = QUAD_TOLERANCE * spec.gamma * math.pi

    def numerator(u: float) -> float:
        return symmetrized_spectrum(spec, omega_q * u) / (1.0 + u)

    def regular(u: float) -> float:
        return numerator(u) / (u - 1.0)

    principal = _quad(
        numerator, 0.0, 2.0, epsabs, "energy_shift:cauchy", weight="cauchy", wvar=1.0
    )
    tail = 0.0
    edges = [2.0] + _breakpoints(2.0, upper, [cutoff, 5.0 * cutoff]) + [upper]
    for lower, higher in zip(edges[:-1], edges[1:]):
        tail += _quad(regular, lower, higher, epsabs, "energy_shift:tail")
    shift = -(principal + tail) / math.pi
    logger.debug("Energy shift for eta=%.3e: %.6e rad/s", spec.eta, shift)
    return shift


def energy_shift_time_domain(spec: BathSpec, damping: Optional[float] = None) -> float:
    """
    Energy shift from the time-domain form 2 int_0^inf sin(w_q t) L_r(t) e^{-eps t} dt.

    The time integral is done in closed form for every bath mode, leaving a
    smooth frequency integral with a Lorentzian-regularized pole. Converges
    to :func:`energy_shift` as the damping goes to zero.

    Args:
        spec: Bath parameters
        damping: Exponential damper eps in rad/s (default 1e-4 * omega_q)

    Returns:
        Regularized Delta_s in rad/s
    """
    if spec.eta == 0.0:
        return 0.0
    omega_q = spec.omega_q
    eps = (damping if damping is not None else 1e-4 * omega_q) / omega_q
    cutoff = spec.omega_c / omega_q
    upper = UPPER_LIMIT_FACTOR * cutoff
    epsabs = QUAD_TOLERANCE * spec.gamma * math.pi

    def integrand(u: float) -> float:
        plus = 1.0 + u
        minus = 1.0 - u
        kernel = 0.5 * (plus / (plus**2 + eps**2) + minus / (minus**2 + eps**2))
        return symmetrized_spectrum(spec, omega_q * u) * kernel

    points = [1.0 - 100 * eps, 1.0 - 10 * eps, 1.0, 1.0 + 10 * eps, 1.0 + 100 * eps, 2.0]
    edges = [0.0] + _breakpoints(0.0, upper, points + [cutoff, 5.0 * cutoff]) + [upper]
    total = 0.0
    for lower, higher in zip(edges[:-1], edges[1:]):
        total += _quad(integrand, lower, higher, epsabs, "energy_shift_time_domain")
    return total / math.pi


def _cosine_transform(
    spec: BathSpec, density: Callable[[np.ndarray], ArrayLike], tau: float, label: str
) -> float:
    """(omega_q / pi) int_0^{50 w_c / w_q} density(w_q u) cos(w_q tau u) du."""
    omega_q = spec.omega_q
    cutoff = spec.omega_c / omega_q
    upper = UPPER_LIMIT_FACTOR * cutoff
    epsabs = QUAD_TOLERANCE * spec.gamma

    def integrand(u: float) -> float:
        return float(density(omega_q * u))

    edges = [0.0] + _breakpoints(0.0, upper, [1.0, cutoff, 5.0 * cutoff]) + [upper]
    total = 0.0
    for lower, higher in zip(edges[:-1], edges[1:]):
        if tau == 0.0:
            total += _quad(integrand, lower, higher, epsabs, label)
        else:
            total += _quad(
                integrand, lower, higher, epsabs, label, weight="cos", wvar=omega_q * abs(tau)
            )
    return omega_q * total / math.pi


def real_correlation_reduced(spec: BathSpec, tau: float) -> float:
    """
    Autocorrelation of the synthesized noise,
    L'_r(tau) = (1/2 pi) int_0^inf J(w) [coth(hbar beta w / 2) - 2 / (hbar beta w)] cos(w tau) dw.

    Even in tau; zero for eta = 0.

    Raises:
        QuadratureError: If the quadrature fails to converge
    """
    if spec.eta == 0.0:
        return 0.0
    return _cosine_transform(
        spec, lambda w: reduced_spectrum(spec, w), float(tau), "real_correlation_reduced"
    )


def bath_correlation_real(spec: BathSpec, tau: float) -> float:
    """
    Real part of the full bath correlation function,
    L_r(tau) = (1/2 pi) int_0^inf J(w) coth(hbar beta w / 2) cos(w tau) dw.
    """
    if spec.eta == 0.0:
        return 0.0
    return 0.5 * _cosine_transform(
        spec, lambda w: symmetrized_spectrum(spec, w), float(tau), "bath_correlation_real"
    )
