"""
Nonlinear least-squares fits used for signal extraction.

Both fits run Levenberg-Marquardt (``scipy.optimize.least_squares`` with
``method="lm"`` and a finite-difference Jacobian) on rescaled, O(1)
variables and report 1-sigma uncertainties from the Gauss-Newton covariance.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize, signal

from sled_qubit.exceptions import FitError

logger = logging.getLogger(__name__)

MIN_PERIODS = 8  # damped-cosine data must cover this many oscillations
MAX_RELATIVE_RESIDUAL = 0.05
MIN_POINTS_PER_WIDTH = 5
FFT_PADDING = 8


@dataclass
class FitResult:
    """
    Parameter estimates of a least-squares fit.

    Attributes:
        kind: "damped_cosine" or "lorentzian_pair"
        params: Best-fit values in physical units
        errors: 1-sigma uncertainties, same keys as ``params``
        residual_norm: Euclidean norm of the residual vector
        relative_residual: Residual norm over the norm of the demeaned data
        flags: Diagnostic flags (e.g. ``overlap`` for merged Lorentzians)
        diagnostics: Optimizer status information
    """

    kind: str
    params: Dict[str, float]
    errors: Dict[str, float]
    residual_norm: float
    relative_residual: float
    flags: Dict[str, bool] = field(default_factory=dict)
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    def __getitem__(self, key: str) -> float:
        return self.params[key]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "params": dict(self.params),
            "errors": dict(self.errors),
            "residual_norm": self.residual_norm,
            "relative_residual": self.relative_residual,
            "flags": dict(self.flags),
        }


def _solve(
    residuals: Callable[[np.ndarray], np.ndarray], initial: np.ndarray, label: str
) -> Tuple[np.ndarray, np.ndarray, optimize.OptimizeResult]:
    """Run LM and return (parameters, 1-sigma errors, raw result)."""
    try:
        result = optimize.least_squares(residuals, initial, method="lm", x_scale="jac")
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise FitError(f"{label} fit failed: {exc}", {"initial": initial.tolist()}) from exc
    if not result.success or not np.all(np.isfinite(result.x)):
        raise FitError(
            f"{label} fit did not converge: {result.message}",
            {"status": int(result.status), "nfev": int(result.nfev), "x": result.x.tolist()},
        )
    dof = max(result.fun.size - result.x.size, 1)
    variance = float(result.fun @ result.fun) / dof
    covariance = np.linalg.pinv(result.jac.T @ result.jac) * variance
    errors = np.sqrt(np.clip(np.diag(covariance), 0.0, None))
    return result.x, errors, result


def _fft_peak(times: np.ndarray, values: np.ndarray) -> float:
    """Angular frequency of the largest zero-padded spectral peak (parabolic refinement)."""
    dt = float(np.mean(np.diff(times)))
    n = FFT_PADDING * values.size
    spectrum = np.abs(np.fft.rfft(values - values.mean(), n=n))
    spectrum[0] = 0.0
    k = int(np.argmax(spectrum))
    offset = 0.0
    if 0 < k < spectrum.size - 1:
        left, mid, right = spectrum[k - 1], spectrum[k], spectrum[k + 1]
        curvature = left - 2.0 * mid + right
        if curvature != 0.0:
            offset = 0.5 * (left - right) / curvature
    return 2.0 * math.pi * (k + offset) / (n * dt)


def fit_damped_cosine(
    times: Sequence[float], values: Sequence[float], frequency_guess: Optional[float] = None
) -> FitResult:
    """
    Fit A exp(-lambda t) cos(w t + phi) + c.

    Initial frequency from the discrete-Fourier peak, decay and amplitude from
    a linear regression of the log Hilbert envelope.

    Args:
        times: Uniformly spaced sample times
        values: Signal samples
        frequency_guess: Optional override of the Fourier-peak guess (rad/s)

    Returns:
        FitResult with params amplitude, decay, frequency, phase, offset

    Raises:
        FitError: If the data spans fewer than 8 periods, the optimizer does not
            converge or the relative residual exceeds 5%
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if t.size < 16:
        raise FitError("damped-cosine fit needs at least 16 samples", {"samples": int(t.size)})
    omega0 = frequency_guess if frequency_guess is not None else _fft_peak(t, y)
    span = float(t[-1] - t[0])
    periods = span * omega0 / (2.0 * math.pi)
    if periods < MIN_PERIODS:
        raise FitError(
            f"data covers {periods:.2f} periods, at least {MIN_PERIODS} are required",
            {"periods": periods, "frequency_guess": omega0},
        )

    # Dimensionless time s = w0 (t - t0)
    s = omega0 * (t - t[0])
    offset0 = float(y.mean())
    centred = y - offset0
    scale = float(np.max(np.abs(centred))) or 1.0
    envelope = np.abs(signal.hilbert(centred / scale))
    inner = slice(y.size // 10, y.size - y.size // 10 or None)
    usable = envelope[inner] > 1e-3
    if usable.sum() >= 2:
        slope, intercept = np.polyfit(s[inner][usable], np.log(envelope[inner][usable]), 1)
        decay0 = max(-float(slope), 0.0)
        amplitude0 = float(np.exp(intercept))
    else:
        decay0, amplitude0 = 0.0, 1.0
    demodulated = np.mean(centred / scale * np.exp(-1j * s + decay0 * s))
    phase0 = float(np.angle(demodulated))

    def residuals(p: np.ndarray) -> np.ndarray:
        amplitude, decay, frequency, phase, offset = p
        model = amplitude * np.exp(-decay * s) * np.cos(frequency * s + phase) + offset
        return model - y / scale

    initial = np.array([amplitude0, decay0, 1.0, phase0, offset0 / scale])
    x, err, result = _solve(residuals, initial, "damped-cosine")
    amplitude, decay, frequency, phase, offset = x
    if amplitude < 0:
        amplitude, phase = -amplitude, phase + math.pi
    phase = math.pi - (math.pi - phase) % (2.0 * math.pi)
    residual_norm = float(np.linalg.norm(result.fun)) * scale
    relative = residual_norm / max(float(np.linalg.norm(centred)), 1e-300)

    if decay < 0:
        if -decay > 3.0 * err[1]:
            raise FitError("fitted oscillation grows in time", {"decay": decay * omega0})
        decay = 0.0
    # Undo the time rescaling; the phase refers to t = times[0]
    fit = FitResult(
        kind="damped_cosine",
        params={
            "amplitude": amplitude * scale,
            "decay": decay * omega0,
            "frequency": frequency * omega0,
            "phase": phase,
            "offset": offset * scale,
        },
        errors={
            "amplitude": err[0] * scale,
            "decay": err[1] * omega0,
            "frequency": err[2] * omega0,
            "phase": err[3],
            "offset": err[4] * scale,
        },
        residual_norm=residual_norm,
        relative_residual=relative,
        diagnostics={"nfev": int(result.nfev), "frequency_guess": omega0, "t0": float(t[0])},
    )
    if relative > MAX_RELATIVE_RESIDUAL:
        raise FitError(
            f"damped-cosine fit rejected: relative residual {relative:.3f} exceeds "
            f"{MAX_RELATIVE_RESIDUAL:.2f}",
            {"fit": fit.to_dict()},
        )
    logger.debug("Damped cosine: w=%.9e rad/s, lambda=%.3e 1/s", fit["frequency"], fit["decay"])
    return fit


def extracted_shift(fit: FitResult, omega_q: float) -> Tuple[float, float]:
    """Energy shift w_fit - w_q and its uncertainty from a damped-cosine fit."""
    return fit["frequency"] - omega_q, fit.errors["frequency"]


def _lorentzian(x: np.ndarray, center: float, width: float, height: float) -> np.ndarray:
    return height / (1.0 + ((x - center) / width) ** 2)


def _pair_guess(x: np.ndarray, y: np.ndarray) -> Tuple[float, float, float, float]:
    """Centers and heights of the strongest extremum in each half of the grid."""
    middle = 0.5 * (x[0] + x[-1])
    guesses = []
    for mask in (x < middle, x >= middle):
        xs, ys = x[mask], y[mask]
        k = int(np.argmax(np.abs(ys)))
        guesses.append((float(xs[k]), float(ys[k])))
    (c1, h1), (c2, h2) = guesses
    return c1, c2, h1, h2


def fit_lorentzian_pair(
    omega_p_grid: Sequence[float],
    sigma_z_bar: Sequence[float],
    centers_guess: Optional[Tuple[float, float]] = None,
    width_guess: Optional[float] = None,
) -> FitResult:
    """
    Fit a baseline plus two Lorentzians (signed heights, half widths).

    Args:
        omega_p_grid: Probe frequencies (rad/s), increasing
        sigma_z_bar: Time-averaged sigma_z per probe frequency
        centers_guess: Optional initial centers (rad/s)
        width_guess: Optional initial half width (rad/s)

    Returns:
        FitResult with params center_1 < center_2, width_1, width_2,
        height_1, height_2, baseline; ``flags["overlap"]`` is set when the
        two peaks are closer than the sum of their half widths

    Raises:
        FitError: If the optimizer does not converge
    """
    omega = np.asarray(omega_p_grid, dtype=float)
    values = np.asarray(sigma_z_bar, dtype=float)
    if omega.size < 7:
        raise FitError("Lorentzian-pair fit needs at least 7 grid points", {"points": int(omega.size)})
    middle = 0.5 * (omega[0] + omega[-1])
    half_span = 0.5 * (omega[-1] - omega[0])
    x = (omega - middle) / half_span
    baseline0 = float(np.median(values))
    scale = float(np.max(np.abs(values - baseline0))) or 1.0
    y = (values - baseline0) / scale

    c1, c2, h1, h2 = _pair_guess(x, y)
    if centers_guess is not None:
        c1, c2 = ((np.asarray(centers_guess, dtype=float) - middle) / half_span).tolist()
        h1 = float(np.interp(c1, x, y))
        h2 = float(np.interp(c2, x, y))
    step = float(np.min(np.diff(x)))
    w0 = width_guess / half_span if width_guess is not None else 3.0 * step
    if w0 < MIN_POINTS_PER_WIDTH * step / 2.0:
        logger.warning("Probe grid resolves the expected linewidth with fewer than %d points", MIN_POINTS_PER_WIDTH)

    def residuals(p: np.ndarray) -> np.ndarray:
        ca, cb, wa, wb, ha, hb, base = p
        model = _lorentzian(x, ca, wa, ha) + _lorentzian(x, cb, wb, hb) + base
        return model - y

    initial = np.array([c1, c2, w0, w0, h1, h2, 0.0])
    p, err, result = _solve(residuals, initial, "Lorentzian-pair")
    ca, cb, wa, wb, ha, hb, base = p
    wa, wb = abs(wa), abs(wb)
    if ca > cb:
        ca, cb, wa, wb, ha, hb = cb, ca, wb, wa, hb, ha
        err = err[[1, 0, 3, 2, 5, 4, 6]]
    if min(wa, wb) <= 0.0:
        raise FitError("Lorentzian-pair fit returned a zero width", {"x": p.tolist()})

    residual_norm = float(np.linalg.norm(result.fun)) * scale
    overlap = (cb - ca) < (wa + wb)
    fit = FitResult(
        kind="lorentzian_pair",
        params={
            "center_1": middle + ca * half_span,
            "center_2": middle + cb * half_span,
            "width_1": wa * half_span,
            "width_2": wb * half_span,
            "height_1": ha * scale,
            "height_2": hb * scale,
            "baseline": baseline0 + base * scale,
        },
        errors={
            "center_1": err[0] * half_span,
            "center_2": err[1] * half_span,
            "width_1": err[2] * half_span,
            "width_2": err[3] * half_span,
            "height_1": err[4] * scale,
            "height_2": err[5] * scale,
            "baseline": err[6] * scale,
        },
        residual_norm=residual_norm,
        relative_residual=residual_norm / max(float(np.linalg.norm(values - baseline0)), 1e-300),
        flags={"overlap": bool(overlap)},
        diagnostics={"nfev": int(result.nfev)},
    )
    if overlap:
        logger.warning("Lorentzian pair is not resolved: peaks overlap within their widths")
    return fit


def sideband_separation(fit: FitResult) -> Tuple[float, float]:
    """|center_2 - center_1| and its propagated uncertainty."""
    if fit.kind != "lorentzian_pair":
        raise ValueError(f"expected a Lorentzian-pair fit, got {fit.kind}")
    separation = abs(fit["center_2"] - fit["center_1"])
    uncertainty = math.hypot(fit.errors["center_1"], fit.errors["center_2"])
    return separation, uncertainty
