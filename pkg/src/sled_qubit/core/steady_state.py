"""
Closed-form steady states of the RWA Lindblad equation and derived measures.

The rotating-frame Bloch equations with H = -Delta_q sigma_z / 2 + W_d sigma_x / 2
have the stationary solution

    x = -4 g W D_q / (g_b D),  y = -2 g W / D,  z = g (g_b^2 + 4 D_q^2) / (g_b D),
    D = 2 W^2 + g_b^2 + 4 D_q^2,

with g = gamma and g_b = gamma_beta. Everything else in this module is built
from it.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
from sklearn.linear_model import LinearRegression

from sled_qubit.core.bath import BathRates
from sled_qubit.core.qubit_algebra import BlochVector
from sled_qubit.exceptions import DomainError, FitError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SteadyParams:
    """
    Parameters of the RWA steady state.

    Attributes:
        Omega_d: Drive Rabi frequency (rad/s)
        gamma: Dissipation rate (rad/s)
        gamma_beta: Thermal decay rate gamma (2 n + 1) (rad/s)
        Delta_q: Detuning w_q + Delta_s - w_d (rad/s)
    """

    Omega_d: float
    gamma: float
    gamma_beta: float
    Delta_q: float = 0.0

    def __post_init__(self) -> None:
        if self.Omega_d < 0:
            raise ValueError(f"Omega_d must be non-negative, got {self.Omega_d}")
        if self.gamma <= 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.gamma_beta < self.gamma * (1.0 - 1e-12):
            raise ValueError(
                f"gamma_beta ({self.gamma_beta}) must be at least gamma ({self.gamma})"
            )

    @classmethod
    def from_rates(cls, bath_rates: BathRates, Omega_d: float, Delta_q: float = 0.0) -> "SteadyParams":
        return cls(
            Omega_d=Omega_d,
            gamma=bath_rates.gamma,
            gamma_beta=bath_rates.gamma_beta,
            Delta_q=Delta_q,
        )

    @classmethod
    def from_alpha(
        cls, alpha: float, gamma: float, Omega_d: float, gamma_beta: Optional[float] = None
    ) -> "SteadyParams":
        """Detuning set by a linear shift Delta_s = -alpha gamma."""
        return cls(
            Omega_d=Omega_d,
            gamma=gamma,
            gamma_beta=gamma if gamma_beta is None else gamma_beta,
            Delta_q=-alpha * gamma,
        )

    def at_resonance(self) -> "SteadyParams":
        return replace(self, Delta_q=0.0)

    def with_detuning(self, Delta_q: float) -> "SteadyParams":
        return replace(self, Delta_q=Delta_q)


def _denominator(p: SteadyParams, detuning: float) -> float:
    return 2.0 * p.Omega_d**2 + p.gamma_beta**2 + 4.0 * detuning**2


def steady_bloch_rwa(p: SteadyParams) -> BlochVector:
    """
    Stationary rotating-frame Bloch vector of the RWA Lindblad equation.

    Example:
        >>> steady_bloch_rwa(SteadyParams(Omega_d=0.0, gamma=1.0, gamma_beta=2.0)).z
        0.5
    """
    g, gb, w, d = p.gamma, p.gamma_beta, p.Omega_d, p.Delta_q
    den = _denominator(p, d)
    return BlochVector(
        x=-4.0 * g * w * d / (gb * den),
        y=-2.0 * g * w / den,
        z=g * (gb**2 + 4.0 * d**2) / (gb * den),
    )


def delta_sigma(p: SteadyParams) -> Tuple[float, float, float]:
    """
    Detuned minus resonant steady-state Bloch components.

    Returns:
        (dx, dy, dz) with dz >= 0; dx is odd and dy, dz are even in Delta_q
    """
    g, gb, w, d = p.gamma, p.gamma_beta, p.Omega_d, p.Delta_q
    den = _denominator(p, d)
    den0 = _denominator(p, 0.0)
    dx = -4.0 * g * w * d / (gb * den)
    dy = 8.0 * g * w * d**2 / (den * den0)
    dz = 8.0 * g * w**2 * d**2 / (gb * den * den0)
    return dx, dy, dz


def failure_measure(measured_sigma_z: float, p_at_resonance: SteadyParams) -> float:
    """
    Lindblad failure witness: measured steady sigma_z minus the resonant
    Lindblad prediction. Negative values certify a breakdown of the
    time-local Lindblad description.
    """
    return measured_sigma_z - steady_bloch_rwa(p_at_resonance.at_resonance()).z


def lme_detuning_fidelity(Delta_s: float, Omega_d: float, gamma: float) -> float:
    """
    Fidelity between shifted and resonant RWA steady states for gamma_beta = gamma,
    F = 1 - 4 D^2 W^2 / [(2 W^2 + g^2 + 4 D^2)(2 W^2 + g^2)].
    """
    base = 2.0 * Omega_d**2 + gamma**2
    return 1.0 - 4.0 * Delta_s**2 * Omega_d**2 / ((base + 4.0 * Delta_s**2) * base)


def critical_ratio(alpha: float) -> float:
    """
    gamma / Omega_d at which the shifted-vs-resonant fidelity is smallest,
    sqrt(2) / (1 + 4 alpha^2)^(1/4).

    Raises:
        DomainError: If alpha <= 0
    """
    if alpha <= 0:
        raise DomainError(f"critical_ratio needs alpha > 0, got {alpha}")
    return math.sqrt(2.0) / (1.0 + 4.0 * alpha**2) ** 0.25


def scan_critical_ratio(alpha: float, ratios: Sequence[float], Omega_d: float = 1.0) -> float:
    """Brute-force argmin of the detuning fidelity over gamma / Omega_d with Delta_s = -alpha gamma."""
    values = [lme_detuning_fidelity(-alpha * r * Omega_d, Omega_d, r * Omega_d) for r in ratios]
    return float(ratios[int(np.argmin(values))])


@dataclass(frozen=True)
class ShiftFit:
    """Linear fit Delta_s = slope * gamma + intercept."""

    slope: float
    intercept: float
    r_squared: float

    @property
    def alpha(self) -> float:
        """alpha with Delta_s = -alpha gamma."""
        return -self.slope

    def to_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "alpha": self.alpha,
        }


def fit_alpha(gammas: Sequence[float], shifts: Sequence[float]) -> ShiftFit:
    """
    Ordinary least-squares line through (gamma, Delta_s) pairs.

    Raises:
        FitError: If fewer than two finite points are given
    """
    x = np.asarray(gammas, dtype=float)
    y = np.asarray(shifts, dtype=float)
    finite = np.isfinite(x) & np.isfinite(y)
    if finite.sum() < 2:
        raise FitError("linear shift fit needs at least two finite points", {"points": int(finite.sum())})
    # Scale to O(1) so the regression is well conditioned in rad/s units
    scale = float(np.max(np.abs(x[finite])))
    features = (x[finite] / scale).reshape(-1, 1)
    targets = y[finite] / scale
    regression = LinearRegression().fit(features, targets)
    r_squared = float(regression.score(features, targets)) if finite.sum() > 2 else 1.0
    fit = ShiftFit(
        slope=float(regression.coef_[0]),
        intercept=float(regression.intercept_) * scale,
        r_squared=r_squared,
    )
    logger.info("Shift fit: alpha=%.6f, R^2=%.12f", fit.alpha, fit.r_squared)
    return fit


@dataclass(frozen=True)
class WitnessPoint:
    """One point of the Lindblad-failure witness curve."""

    gamma: float
    sigma_z: float
    stderr: float
    witness: float
    solver: str


def witness_curve(
    gammas: Sequence[float],
    sigma_z_measured: Sequence[float],
    Omega_d: float,
    gamma_betas: Sequence[float],
    solver: str,
    stderrs: Optional[Sequence[float]] = None,
) -> List[WitnessPoint]:
    """Failure witness for a list of (gamma, measured steady sigma_z) pairs."""
    stderrs = [0.0] * len(gammas) if stderrs is None else list(stderrs)
    points = []
    for gamma, measured, gamma_beta, err in zip(gammas, sigma_z_measured, gamma_betas, stderrs):
        resonant = SteadyParams(Omega_d=Omega_d, gamma=gamma, gamma_beta=gamma_beta)
        points.append(
            WitnessPoint(
                gamma=gamma,
                sigma_z=measured,
                stderr=err,
                witness=failure_measure(measured, resonant),
                solver=solver,
            )
        )
    return points
