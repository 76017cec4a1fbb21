"""
Pump-probe spectroscopy and energy-shift extraction.

A weak probe tone is swept across the strongly driven qubit; the time
averaged population sigma_z and the amplitude h_z of its oscillation at the
pump-probe beat frequency map the dressed (Mollow) spectrum. The energy shift
is extracted either from the bath model directly or by fitting the free
decay of a SLED ensemble.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import trapezoid

from sled_qubit.analysis.fitting import MIN_PERIODS, extracted_shift, fit_damped_cosine
from sled_qubit.core.bath import BathSpec, energy_shift, rates
from sled_qubit.core.propagators import (
    EnsemblePlan,
    LindbladModel,
    SledModel,
    StepPlan,
    TrajectorySeries,
    default_step,
    propagate_lme_batch,
    propagate_sled_ensemble,
    thermal_state,
)
from sled_qubit.core.qubit_algebra import from_bloch
from sled_qubit.core.steady_state import ShiftFit, fit_alpha
from sled_qubit.exceptions import ConfigurationError, ContractError, FitError, NumericalError

logger = logging.getLogger(__name__)

SOLVERS = ("lme", "lme-nes", "sled")
SHIFT_METHODS = ("lme-analytic", "sled-fit")

DEFAULT_N_P = 20
TRANSIENT_DECAYS = 10.0  # transient guard 10 / gamma
FALLBACK_RABI_PERIODS = 20.0  # resonant-probe window 20 / Omega_d
PROBE_CHUNK_SIZE = 8  # probe frequencies per batched propagation
PROBE_RATIO_WARNING = 0.2
SAMPLES_PER_DRIVE_PERIOD = 8
SHIFT_SCAN_RANGE = (5e-4, 1e-1)  # gamma / omega_q
SHIFT_DECAYS = 4.0  # free-decay horizon in units of 1 / gamma
SHIFT_SAMPLES_PER_PERIOD = 16
SHIFT_EXTRA_PERIODS = 2  # margin over the fit minimum at large gamma

Model = Union[LindbladModel, SledModel]


@dataclass
class ProbeScan:
    """
    Result of a pump-probe sweep.

    Attributes:
        omega_p_grid: Probe frequencies (rad/s)
        n_p: Requested number of beat periods per averaging window
        t_f: Final time of each run (s)
        sigma_z_bar: Time-averaged sigma_z per probe frequency
        h_z: Half peak-to-peak oscillation of sigma_z per probe frequency
        periods: Beat periods actually averaged per point (0 marks the
            resonant fallback window)
        stderr: Statistical uncertainty of sigma_z_bar (SLED only)
        solver: Solver name
        metadata: Drive frequency, initial state and other run information
    """

    omega_p_grid: np.ndarray
    n_p: int
    t_f: float
    sigma_z_bar: np.ndarray
    h_z: np.ndarray
    periods: np.ndarray
    stderr: Optional[np.ndarray] = None
    solver: str = "lme"
    metadata: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "solver": self.solver,
            "n_p": self.n_p,
            "t_f": self.t_f,
            "omega_p": self.omega_p_grid.tolist(),
            "sigma_z_bar": self.sigma_z_bar.tolist(),
            "h_z": self.h_z.tolist(),
            "periods": self.periods.tolist(),
            "stderr": None if self.stderr is None else self.stderr.tolist(),
            "metadata": self.metadata,
        }


def _window_samples(
    times: np.ndarray, values: np.ndarray, t0: float, t1: float
) -> Tuple[np.ndarray, np.ndarray]:
    """Samples inside [t0, t1] with linearly interpolated end points."""
    slack = 1e-9 * max(abs(t1), 1e-300)
    if t1 <= t0 or t0 < times[0] - slack or t1 > times[-1] + slack:
        raise ContractError(
            f"window [{t0:.6e}, {t1:.6e}] s is empty or outside the series "
            f"[{times[0]:.6e}, {times[-1]:.6e}] s"
        )
    t0, t1 = max(t0, times[0]), min(t1, times[-1])
    inside = (times > t0) & (times < t1)
    window_t = np.concatenate([[t0], times[inside], [t1]])
    window_v = np.concatenate(
        [[np.interp(t0, times, values)], values[inside], [np.interp(t1, times, values)]]
    )
    return window_t, window_v


def _sigma_z(series: TrajectorySeries) -> np.ndarray:
    return series.bloch()[:, 2]


def averaging_window(
    omega_d: float, omega_p: float, n_p: int, t_f: float, Omega_d: Optional[float] = None
) -> Tuple[float, float]:
    """
    Window [t_f - n_p t_p, t_f] with t_p = 2 pi / |w_p - w_d|.

    For a resonant probe the window is the final 20 / Omega_d of the run.
    """
    detuning = abs(omega_p - omega_d)
    if detuning <= 1e-12 * max(abs(omega_d), 1.0):
        if not Omega_d:
            raise ContractError("a resonant probe needs Omega_d for the fallback window")
        return t_f - FALLBACK_RABI_PERIODS / Omega_d, t_f
    return t_f - n_p * 2.0 * math.pi / detuning, t_f


def time_average_sigma_z(
    series: TrajectorySeries,
    omega_d: float,
    omega_p: float,
    n_p: int,
    t_f: float,
    Omega_d: Optional[float] = None,
) -> float:
    """
    Time average of sigma_z over the last n_p beat periods before ``t_f``.

    Trapezoidal rule on the recorded grid, divided by the window length.

    Raises:
        ContractError: If the window lies outside the series
    """
    t0, t1 = averaging_window(omega_d, omega_p, n_p, t_f, Omega_d)
    window_t, window_v = _window_samples(series.times, _sigma_z(series), t0, t1)
    return float(trapezoid(window_v, window_t) / (window_t[-1] - window_t[0]))


def oscillation_amplitude(series: TrajectorySeries, window: Tuple[float, float]) -> float:
    """
    Oscillation amplitude h_z of sigma_z: half its peak-to-peak range over ``window``.

    Raises:
        ContractError: If the window is empty or outside the series
    """
    window_t, window_v = _window_samples(series.times, _sigma_z(series), window[0], window[1])
    return 0.5 * float(window_v.max() - window_v.min())


def transient_guard(gamma: float) -> float:
    return TRANSIENT_DECAYS / gamma


def scan_horizon(gamma: float, Omega_d: float, n_p: int = DEFAULT_N_P) -> float:
    """Run length: transient guard plus n_p beat periods at |w_p - w_d| = Omega_d / 2."""
    return transient_guard(gamma) + n_p * 2.0 * math.pi / (0.5 * Omega_d)


def _periods_for(
    omega_d: float, omega_p: float, n_p: int, t_f: float, guard: float
) -> int:
    """Beat periods that fit between the transient guard and t_f (at most n_p)."""
    detuning = abs(omega_p - omega_d)
    if detuning <= 1e-12 * max(abs(omega_d), 1.0):
        return 0
    return int(min(n_p, math.floor((t_f - guard) * detuning / (2.0 * math.pi))))


def _summarize_point(
    series: TrajectorySeries,
    omega_d: float,
    omega_p: float,
    periods: int,
    t_f: float,
    Omega_d: float,
) -> Tuple[float, float, Tuple[float, float]]:
    window = averaging_window(omega_d, omega_p, periods, t_f, Omega_d) if periods else (
        t_f - FALLBACK_RABI_PERIODS / Omega_d,
        t_f,
    )
    if periods:
        sigma_bar = time_average_sigma_z(series, omega_d, omega_p, periods, t_f, Omega_d)
    else:
        window_t, window_v = _window_samples(series.times, _sigma_z(series), *window)
        sigma_bar = float(trapezoid(window_v, window_t) / (window_t[-1] - window_t[0]))
    return sigma_bar, oscillation_amplitude(series, window), window


def pump_probe_scan(
    solver: str,
    model: Model,
    omega_p_grid: Sequence[float],
    n_p: int = DEFAULT_N_P,
    t_f: Optional[float] = None,
    dt: Optional[float] = None,
    ensemble: Optional[EnsemblePlan] = None,
    workers: int = 1,
    match_drive: bool = True,
) -> ProbeScan:
    """
    Sweep the probe frequency and record sigma_z_bar and h_z per point.

    The model's drive must be a two-tone pump-probe drive; its probe tone is
    moved across ``omega_p_grid``. With ``match_drive`` the primary drive is
    retuned to w_q + Delta_s (w_q for LME-nES). Runs start in the thermal
    state of the bare qubit.

    Args:
        solver: "lme", "lme-nes" or "sled"
        model: LindbladModel (lme, lme-nes) or SledModel (sled)
        omega_p_grid: Probe frequencies (rad/s)
        n_p: Beat periods per averaging window
        t_f: Run length (default: transient guard plus n_p periods at Omega_d / 2)
        dt: Step size (default from :func:`default_step`)
        ensemble: Trajectory plan for the SLED solver
        workers: Worker threads
        match_drive: Retune the primary drive as described above

    Returns:
        ProbeScan ordered like ``omega_p_grid``
    """
    if solver not in SOLVERS:
        raise ConfigurationError(f"unknown solver '{solver}'", field_path="solver")
    grid = np.asarray(omega_p_grid, dtype=float)
    drive = model.drive
    if len(drive.tones) < 2:
        raise ContractError("pump_probe_scan needs a drive with a probe tone")
    Omega_d, Omega_p = drive.tones[0].amplitude, drive.tones[1].amplitude
    if Omega_p > PROBE_RATIO_WARNING * Omega_d:
        logger.warning("Probe amplitude %.3e exceeds %.1f x drive amplitude", Omega_p, PROBE_RATIO_WARNING)

    if isinstance(model, SledModel):
        if solver != "sled":
            raise ContractError("a SledModel requires solver 'sled'")
        bath_rates = rates(model.bath)
        omega_c: Optional[float] = model.bath.omega_c
    else:
        if solver == "sled":
            raise ContractError("solver 'sled' requires a SledModel")
        model = replace(model, include_shift=solver == "lme")
        bath_rates = model.bath_rates
        omega_c = None
    if match_drive:
        shift = bath_rates.delta_s if solver != "lme-nes" else 0.0
        model = replace(model, drive=drive.with_frequency(model.omega_q + shift))
    omega_d = model.drive.frequency

    gamma = bath_rates.gamma
    guard = transient_guard(gamma)
    t_f = scan_horizon(gamma, Omega_d, n_p) if t_f is None else t_f
    if t_f - FALLBACK_RABI_PERIODS / max(Omega_d, 1e-300) < guard and Omega_d > 0:
        raise ConfigurationError(
            f"t_f={t_f:.3e} s leaves no averaging window after the transient guard {guard:.3e} s",
            field_path="plan.t_final",
        )
    step = dt if dt is not None else default_step(model.omega_q, omega_c)
    stride = max(1, int(round(2.0 * math.pi / omega_d / (SAMPLES_PER_DRIVE_PERIOD * step))))
    plan = StepPlan(dt=step, t_final=t_f, record_stride=stride)
    t_end = plan.record_times()[-1]
    rho0 = thermal_state(bath_rates)
    periods = np.array([_periods_for(omega_d, w, n_p, t_end, guard) for w in grid])
    logger.info(
        "Scanning %d probe frequencies with %s (t_f=%.3e s, %d steps)",
        grid.size,
        solver,
        t_end,
        plan.n_steps,
    )

    sigma_bar = np.zeros(grid.size)
    h_z = np.zeros(grid.size)
    stderr: Optional[np.ndarray] = None
    if isinstance(model, SledModel):
        stderr = np.zeros(grid.size)
        ensemble = ensemble or EnsemblePlan()
        for index, omega_p in enumerate(grid):
            point = replace(model, drive=model.drive.with_probe_frequency(float(omega_p)))
            series = propagate_sled_ensemble(point, rho0, plan, ensemble, workers=workers)
            sigma_bar[index], h_z[index], window = _summarize_point(
                series, omega_d, float(omega_p), int(periods[index]), t_end, Omega_d
            )
            inside = series.window_indices(*window)
            stderr[index] = float(series.stderr[inside, 2].mean()) if inside.size else 0.0
    else:
        lme_model = model
        chunks = [list(range(s, min(s + PROBE_CHUNK_SIZE, grid.size))) for s in range(0, grid.size, PROBE_CHUNK_SIZE)]

        def run_chunk(indices: List[int]) -> List[TrajectorySeries]:
            drives = [lme_model.drive.with_probe_frequency(float(grid[i])) for i in indices]
            return propagate_lme_batch(lme_model, drives, rho0, plan)

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(run_chunk, chunks))
        else:
            results = [run_chunk(chunk) for chunk in chunks]
        for indices, batch in zip(chunks, results):
            for index, series in zip(indices, batch):
                sigma_bar[index], h_z[index], _ = _summarize_point(
                    series, omega_d, float(grid[index]), int(periods[index]), t_end, Omega_d
                )

    return ProbeScan(
        omega_p_grid=grid,
        n_p=n_p,
        t_f=t_end,
        sigma_z_bar=sigma_bar,
        h_z=h_z,
        periods=periods,
        stderr=stderr,
        solver=solver,
        metadata={
            "omega_d": omega_d,
            "Omega_d": Omega_d,
            "Omega_p": Omega_p,
            "gamma": gamma,
            "dt": plan.dt,
            "record_stride": plan.record_stride,
            "initial_state": "thermal",
        },
    )


def hz_map(
    solver: str,
    models: Sequence[Model],
    omega_p_grid: Sequence[float],
    n_p: int = DEFAULT_N_P,
    ensemble: Optional[EnsemblePlan] = None,
    workers: int = 1,
) -> List[ProbeScan]:
    """One pump-probe scan per model (typically a sweep of gamma)."""
    return [
        pump_probe_scan(solver, model, omega_p_grid, n_p=n_p, ensemble=ensemble, workers=workers)
        for model in models
    ]


@dataclass
class ShiftPoint:
    """Energy shift extracted at one dissipation rate."""

    gamma: float
    delta_s: float
    stderr: float = 0.0
    error: Optional[str] = None


@dataclass
class ShiftScan:
    """Energy shift versus gamma with its linear fit."""

    method: str
    points: List[ShiftPoint]
    fit: Optional[ShiftFit]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "method": self.method,
            "points": [vars(p) for p in self.points],
            "fit": None if self.fit is None else self.fit.to_dict(),
        }


def free_decay_plan(bath: BathSpec, dt: Optional[float] = None, decays: float = SHIFT_DECAYS) -> StepPlan:
    """
    Free-decay plan lasting decays / gamma, but never fewer than
    MIN_PERIODS + SHIFT_EXTRA_PERIODS qubit periods.
    """
    omega_q = bath.omega_q
    period = 2.0 * math.pi / omega_q
    step = dt if dt is not None else default_step(omega_q, bath.omega_c)
    stride = max(1, int(round(period / (SHIFT_SAMPLES_PER_PERIOD * step))))
    t_final = max(decays / bath.gamma, (MIN_PERIODS + SHIFT_EXTRA_PERIODS) * period)
    return StepPlan(dt=step, t_final=t_final, record_stride=stride)


def sled_free_decay_shift(
    bath: BathSpec,
    ensemble: EnsemblePlan,
    dt: Optional[float] = None,
    workers: int = 1,
    decays: float = SHIFT_DECAYS,
) -> Tuple[float, float]:
    """
    Energy shift from the free decay of a SLED ensemble started in the +1
    eigenstate of sigma_x: the lab-frame <sigma_x> oscillates at w_q + Delta_s.

    Returns:
        (Delta_s, 1-sigma uncertainty) in rad/s

    Raises:
        FitError: If the damped-cosine fit fails
    """
    omega_q = bath.omega_q
    model = SledModel(omega_q=omega_q, bath=bath)
    plan = free_decay_plan(bath, dt=dt, decays=decays)
    series = propagate_sled_ensemble(
        model, from_bloch((1.0, 0.0, 0.0)), plan, ensemble, workers=workers, stats_frequency=0.0
    )
    fit = fit_damped_cosine(series.times, series.bloch(0.0)[:, 0], frequency_guess=omega_q)
    return extracted_shift(fit, omega_q)


def shift_scan(
    gamma_grid: Sequence[float],
    method: str,
    bath: BathSpec,
    ensemble: Optional[EnsemblePlan] = None,
    dt: Optional[float] = None,
    workers: int = 1,
) -> ShiftScan:
    """
    Energy shift Delta_s(gamma) and its linear fit.

    Args:
        gamma_grid: Dissipation rates (rad/s)
        method: "lme-analytic" (bath-model quadrature) or "sled-fit"
            (free decay plus damped-cosine fit)
        bath: Bath whose coupling is swept
        ensemble: Trajectory plan for "sled-fit"

    Returns:
        ShiftScan; rows whose fit failed carry the error and a NaN shift
    """
    if method not in SHIFT_METHODS:
        raise ConfigurationError(f"unknown shift method '{method}'", field_path="method")
    low, high = SHIFT_SCAN_RANGE
    for gamma in gamma_grid:
        ratio = gamma / bath.omega_q
        if not low * (1 - 1e-9) <= ratio <= high * (1 + 1e-9):
            logger.warning("gamma/omega_q=%.3e lies outside the scan range [%.0e, %.0e]", ratio, low, high)

    points = []
    for gamma in gamma_grid:
        spec = bath.with_gamma(gamma)
        if method == "lme-analytic":
            points.append(ShiftPoint(gamma=gamma, delta_s=energy_shift(spec)))
            continue
        try:
            shift, err = sled_free_decay_shift(spec, ensemble or EnsemblePlan(), dt=dt, workers=workers)
            points.append(ShiftPoint(gamma=gamma, delta_s=shift, stderr=err))
        except NumericalError as exc:
            logger.warning("Shift extraction failed at gamma=%.3e: %s", gamma, exc)
            points.append(ShiftPoint(gamma=gamma, delta_s=float("nan"), error=str(exc)))

    fit: Optional[ShiftFit]
    try:
        fit = fit_alpha([p.gamma for p in points], [p.delta_s for p in points])
    except FitError as exc:
        logger.warning("Linear shift fit unavailable: %s", exc)
        fit = None
    return ShiftScan(method=method, points=points, fit=fit)
