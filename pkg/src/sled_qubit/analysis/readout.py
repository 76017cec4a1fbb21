"""
Semiclassical dispersive readout.

The resonator field obeys

    da/dt = -i W_m / 2 - [i D_rm + i chi sigma_z(t) + kappa / 2] a,

driven by the qubit population only through its (time-averaged) sigma_z.
The qubit is never co-propagated: sigma_z comes from a finished simulation.
"""

import cmath
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Sequence, Tuple

import numpy as np

from sled_qubit.exceptions import ConfigurationError, ContractError

logger = logging.getLogger(__name__)

MAX_KAPPA_DT = 0.5  # RK4 step limit kappa * dt


@dataclass(frozen=True)
class ResonatorSpec:
    """
    Readout resonator.

    Attributes:
        omega_r: Resonator frequency (rad/s)
        kappa: Field decay rate (rad/s)
        chi: Dispersive shift (rad/s), may be negative
        Omega_m: Measurement drive amplitude (rad/s)
        omega_m: Measurement drive frequency (rad/s)
        metadata: Coupling g, qubit-resonator detuning and dressed qubit
            frequency, recorded but never used to derive chi
    """

    omega_r: float
    kappa: float
    chi: float
    Omega_m: float
    omega_m: float
    metadata: Dict[str, float] = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self) -> None:
        if self.kappa <= 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if self.Omega_m < 0:
            raise ValueError(f"Omega_m must be non-negative, got {self.Omega_m}")

    @property
    def Delta_rm(self) -> float:
        return self.omega_r - self.omega_m

    @property
    def normalization(self) -> float:
        """Field unit W_m / kappa."""
        return self.Omega_m / self.kappa

    def decay_constant(self, sigma_z_bar: float) -> complex:
        """k = kappa / 2 + i (D_rm + chi sigma_z)."""
        return complex(0.5 * self.kappa, self.Delta_rm + self.chi * sigma_z_bar)

    def steady_field(self, sigma_z_bar: float) -> complex:
        """Fixed point a = -i W_m / [kappa + 2 i (D_rm + chi sigma_z)]."""
        return -0.5j * self.Omega_m / self.decay_constant(sigma_z_bar)


@dataclass(frozen=True)
class FieldPoint:
    """Cavity field with its quadratures, amplitude and phase in (-pi, pi]."""

    a: complex
    I: float
    Q: float
    A: float
    phi: float

    @classmethod
    def from_field(cls, a: complex) -> "FieldPoint":
        I, Q, A, phi = quadratures_phase(a)
        return cls(a=complex(a), I=I, Q=Q, A=A, phi=phi)

    def normalized(self, res: ResonatorSpec) -> "FieldPoint":
        """Same point in units of W_m / kappa."""
        return FieldPoint.from_field(self.a / res.normalization)


def quadratures_phase(a: complex) -> Tuple[float, float, float, float]:
    """
    (I, Q, A, phi) of a complex field with phi on the branch (-pi, pi].

    Example:
        >>> quadratures_phase(1j)
        (0.0, 1.0, 1.0, 1.5707963267948966)
    """
    a = complex(a)
    if not (math.isfinite(a.real) and math.isfinite(a.imag)):
        raise ValueError(f"field must be finite, got {a}")
    phi = cmath.phase(a)
    if phi == -math.pi:
        phi = math.pi
    return a.real, a.imag, abs(a), phi


def cavity_field_closed_form(
    res: ResonatorSpec, sigma_z_bar: float, a0: complex, t: float
) -> FieldPoint:
    """
    Exact field for constant sigma_z,
    a(t) = a_inf + (a0 - a_inf) exp(-k t) with k = kappa / 2 + i (D_rm + chi sigma_z).
    """
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    if t == 0:
        return FieldPoint.from_field(a0)
    steady = res.steady_field(sigma_z_bar)
    value = steady + (complex(a0) - steady) * cmath.exp(-res.decay_constant(sigma_z_bar) * t)
    return FieldPoint.from_field(value)


def cavity_field_ode(
    res: ResonatorSpec,
    sigma_z_of_t: Callable[[float], float],
    a0: complex,
    dt: float,
    t_final: float,
) -> List[Tuple[float, FieldPoint]]:
    """
    Classical fourth-order Runge-Kutta integration of the field equation.

    Args:
        res: Resonator
        sigma_z_of_t: Qubit population as a function of time
        a0: Initial field
        dt: Step size
        t_final: Horizon

    Returns:
        List of (t, FieldPoint) including t = 0

    Raises:
        ConfigurationError: If kappa * dt > 0.5
    """
    if res.kappa * dt > MAX_KAPPA_DT:
        raise ConfigurationError(
            f"kappa*dt={res.kappa * dt:.3f} exceeds {MAX_KAPPA_DT}; reduce the readout step",
            field_path="readout.dt",
        )
    drive = -0.5j * res.Omega_m

    def rhs(t: float, a: complex) -> complex:
        return drive - complex(0.5 * res.kappa, res.Delta_rm + res.chi * sigma_z_of_t(t)) * a

    n_steps = int(math.ceil(t_final / dt - 1e-9))
    a = complex(a0)
    t = 0.0
    series = [(t, FieldPoint.from_field(a))]
    for step in range(n_steps):
        k1 = rhs(t, a)
        k2 = rhs(t + 0.5 * dt, a + 0.5 * dt * k1)
        k3 = rhs(t + 0.5 * dt, a + 0.5 * dt * k2)
        k4 = rhs(t + dt, a + dt * k3)
        a = a + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = (step + 1) * dt
        series.append((t, FieldPoint.from_field(a)))
    return series


def transmitted_amplitude(res: ResonatorSpec, sigma_z_bar: float) -> float:
    """
    Long-time transmitted amplitude (W_m / kappa) / sqrt(1 + (2 chi sigma_z / kappa)^2).

    Raises:
        ContractError: If the measurement drive is detuned from the resonator
    """
    if res.Delta_rm != 0.0:
        raise ContractError(
            f"transmitted_amplitude needs Delta_rm = 0 (got {res.Delta_rm:.3e} rad/s); "
            "use cavity_field_closed_form for detuned readout"
        )
    ratio = 2.0 * res.chi * sigma_z_bar / res.kappa
    return res.normalization / math.sqrt(1.0 + ratio**2)


@dataclass(frozen=True)
class ReadoutRow:
    """Readout of one sigma_z value, normalized by W_m / kappa."""

    sigma_z_bar: float
    point: FieldPoint
    raw: FieldPoint
    ode_deviation: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "sigma_z_bar": self.sigma_z_bar,
            "A": self.point.A,
            "I": self.point.I,
            "Q": self.point.Q,
            "phi": self.point.phi,
            "A_raw": self.raw.A,
            "ode_deviation": self.ode_deviation,
        }


def readout_scan(
    res: ResonatorSpec,
    sigma_z_bars: Sequence[float],
    settle_decays: float = 20.0,
    ode_step: float = 0.005,
) -> List[ReadoutRow]:
    """
    Asymptotic readout for a series of sigma_z values.

    The reported field is the fixed point a_inf. RK4 integration from the
    empty cavity over settle_decays / kappa, with steps of ode_step / |k|, is
    checked against the closed form and its deviation kept per row.
    """
    t_read = settle_decays / res.kappa
    rows = []
    for value in np.asarray(sigma_z_bars, dtype=float):
        dt = ode_step / abs(res.decay_constant(float(value)))
        steady = FieldPoint.from_field(res.steady_field(float(value)))
        t_end, numeric = cavity_field_ode(res, lambda _t, v=float(value): v, 0j, dt, t_read)[-1]
        reference = cavity_field_closed_form(res, float(value), 0j, t_end)
        deviation = abs(numeric.a - reference.a) / max(abs(reference.a), 1e-300)
        rows.append(
            ReadoutRow(
                sigma_z_bar=float(value),
                point=steady.normalized(res),
                raw=steady,
                ode_deviation=deviation,
            )
        )
    logger.info("Computed readout for %d sigma_z values", len(rows))
    return rows
