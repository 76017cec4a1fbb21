"""
Experiment commands.

Each command runs one family of experiments for a :class:`RunConfig`, writes
its tables into ``<out>/<command>/`` and finishes with ``manifest.json``.
"""

import itertools
import logging
import math
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np

from sled_qubit.analysis.fitting import fit_lorentzian_pair, sideband_separation
from sled_qubit.analysis.readout import readout_scan
from sled_qubit.analysis.spectroscopy import pump_probe_scan, shift_scan
from sled_qubit.core.bath import BathSpec, bose_occupation, rates, real_correlation_reduced
from sled_qubit.core.noise import NoiseGrid, build_kernel, dump_csv, estimate_autocorrelation, synthesize
from sled_qubit.core.propagators import (
    DriveSpec,
    EnsemblePlan,
    LindbladModel,
    SledModel,
    StepPlan,
    TrajectorySeries,
    avg_fidelity_over_window,
    default_step,
    lme_steady_state,
    propagate_lme,
    propagate_sled_ensemble,
    thermal_state,
)
from sled_qubit.core.qubit_algebra import DensityMatrix, from_bloch, to_bloch
from sled_qubit.core.steady_state import SteadyParams, delta_sigma, witness_curve
from sled_qubit.exceptions import ConfigurationError, FitError
from sled_qubit.harness.config import RunConfig
from sled_qubit.harness.manifest import ResultWriter, RunManifest, read_column
from sled_qubit.harness.units import to_internal

logger = logging.getLogger(__name__)

SAMPLES_PER_PERIOD = 8  # recorded states per drive period
FIDELITY_WINDOW_DECAYS = 10.0  # fidelity averaged over [0, 10 / gamma]
STEADY_WINDOW_FRACTION = 0.25  # trailing fraction of a run averaged as steady state
NOISE_RECORD_BETAS = 50.0  # noise-check record length in units of hbar beta
NOISE_DUMPS = 1  # trajectories written to CSV by noise-check
DEFAULT_DRIVE_POLICIES = {"dynamics": "bare", "pump-probe": "shifted"}

Command = Callable[[RunConfig, Path], RunManifest]


def _open_run(command: str, config: RunConfig, out_dir: Union[str, Path]) -> Tuple[ResultWriter, RunManifest]:
    writer = ResultWriter(Path(out_dir) / command, config.output.formats)
    manifest = RunManifest(command=command, config=config.to_dict())
    manifest.resolved = resolved_parameters(config)
    manifest.derived = derived_quantities(config)
    if command in DEFAULT_DRIVE_POLICIES:
        manifest.resolved["omega_d_policy"] = drive_policy(config, command)
    manifest.seeds = {"base_seed": config.plan.base_seed, "n_traj": config.plan.n_traj}
    if config.profile:
        manifest.seeds["profile"] = config.profile
    logger.info("Running '%s' into %s", command, writer.directory)
    return writer, manifest.start()


def resolved_parameters(config: RunConfig) -> Dict[str, Any]:
    """Configuration values in internal units (rad/s, s)."""
    bath = config.bath_spec()
    return {
        "omega_q": config.omega_q,
        "eta": bath.eta,
        "gamma": bath.gamma,
        "gammas": config.bath.gamma_values(config.omega_q),
        "omega_c": bath.omega_c,
        "hbar_beta": bath.hbar_beta,
        "Omega_d": to_internal(config.drive.Omega_d),
        "Omega_p": to_internal(config.drive.Omega_p),
        "omega_d_policy": config.drive.omega_d_policy,
        "rwa": config.drive.rwa,
        "solvers": list(config.solvers),
        "dt": _step(config),
        "workers": config.plan.workers,
    }


def derived_quantities(config: RunConfig) -> Dict[str, Any]:
    """Bath quantities derived from the configuration."""
    bath = config.bath_spec()
    bath_rates = rates(bath)
    return {
        "eta": bath.eta,
        "n_bar": float(bose_occupation(bath, bath.omega_q)),
        "hbar_beta_omega_q": bath.hbar_beta * bath.omega_q,
        "gamma_beta": bath_rates.gamma_beta,
        "Gamma_down": bath_rates.Gamma_down,
        "Gamma_up": bath_rates.Gamma_up,
        "delta_s": {solver: _solver_shift(solver, bath_rates.delta_s) for solver in config.solvers},
    }


def _solver_shift(solver: str, delta_s: float) -> float:
    return 0.0 if solver == "lme-nes" else delta_s


def _step(config: RunConfig, with_cutoff: Optional[bool] = None) -> float:
    if config.plan.dt_omega_q is not None:
        return config.plan.dt_omega_q / config.omega_q
    if with_cutoff is None:
        with_cutoff = "sled" in config.solvers
    return default_step(config.omega_q, to_internal(config.bath.omega_c) if with_cutoff else None)


def drive_policy(config: RunConfig, command: str) -> str:
    """Configured drive-frequency policy, or the command default."""
    return config.drive.omega_d_policy or DEFAULT_DRIVE_POLICIES[command]


def _drive_frequency(config: RunConfig, delta_s: float) -> float:
    if drive_policy(config, "dynamics") == "bare":
        return config.omega_q
    return config.omega_q + delta_s


def _stride(config: RunConfig, dt: float, frequency: float) -> int:
    if config.plan.record_stride is not None:
        return config.plan.record_stride
    return max(1, int(round(2.0 * math.pi / frequency / (SAMPLES_PER_PERIOD * dt))))


def _ensemble(config: RunConfig) -> EnsemblePlan:
    return EnsemblePlan(n_traj=config.plan.n_traj, base_seed=config.plan.base_seed)


def _require_lab_frame(config: RunConfig, solvers: Any, command: str) -> None:
    if config.drive.rwa and ("sled" in solvers or command == "pump-probe"):
        raise ConfigurationError(
            f"'{command}' with these solvers needs a lab-frame drive; set rwa to false",
            field_path="drive.rwa",
        )


def _run_solver(
    solver: str,
    config: RunConfig,
    bath: BathSpec,
    drive: DriveSpec,
    rho0: DensityMatrix,
    plan: StepPlan,
) -> TrajectorySeries:
    if solver == "sled":
        model = SledModel(omega_q=config.omega_q, bath=bath, drive=drive)
        return propagate_sled_ensemble(model, rho0, plan, _ensemble(config), workers=config.plan.workers)
    lindblad = LindbladModel(
        omega_q=config.omega_q,
        bath_rates=rates(bath),
        drive=drive,
        include_shift=solver == "lme",
    )
    return propagate_lme(lindblad, rho0, plan)


def cmd_dynamics(config: RunConfig, out_dir: Union[str, Path]) -> RunManifest:
    """
    Bloch-vector dynamics from the excited state, one table per solver and gamma.

    The drive is resonant with the bare qubit unless omega_d_policy is
    "shifted". Columns t, sx, sy, sz in the frame rotating at the drive
    frequency (plus sz_stderr for SLED). Runs last at least 10 / gamma; with a
    gamma list, a fidelity summary averages the pairwise solver fidelities
    over [0, 10 / gamma].
    """
    writer, manifest = _open_run("dynamics", config, out_dir)
    _require_lab_frame(config, config.solvers, "dynamics")
    base = config.bath_spec()
    Omega_d = to_internal(config.drive.Omega_d)
    dt = _step(config)
    summary: Dict[str, List[Any]] = {"gamma": [], "solver_a": [], "solver_b": [], "fidelity": []}

    for index, gamma in enumerate(config.bath.gamma_values(config.omega_q)):
        bath = base.with_gamma(gamma)
        omega_d = _drive_frequency(config, rates(bath).delta_s)
        drive = DriveSpec.monochromatic(Omega_d, omega_d, rwa=config.drive.rwa)
        plan = StepPlan(
            dt=dt,
            t_final=max(config.plan.horizon_decays, FIDELITY_WINDOW_DECAYS) / gamma,
            record_stride=_stride(config, dt, omega_d),
        )
        runs: Dict[str, TrajectorySeries] = {}
        for solver in config.solvers:
            series = _run_solver(solver, config, bath, drive, from_bloch((0.0, 0.0, -1.0)), plan)
            bloch = series.bloch(omega_d)
            table = {"t": series.times, "sx": bloch[:, 0], "sy": bloch[:, 1], "sz": bloch[:, 2]}
            if solver == "sled":
                table["sz_stderr"] = series.stderr[:, 2]
            writer.write_table(f"dynamics_{solver}_g{index}", table)
            runs[solver] = series

        if config.bath.gammas:
            window = (0.0, FIDELITY_WINDOW_DECAYS / gamma)
            for first, second in itertools.combinations(config.solvers, 2):
                summary["gamma"].append(gamma)
                summary["solver_a"].append(first)
                summary["solver_b"].append(second)
                summary["fidelity"].append(avg_fidelity_over_window(runs[first], runs[second], window))

    if config.bath.gammas:
        writer.write_table("fidelity_summary", summary)
    manifest.derived["dt"] = dt
    manifest.finish(writer)
    return manifest


def _sled_steady_sigma_z(
    config: RunConfig, bath: BathSpec, drive: DriveSpec, rho0: DensityMatrix
) -> Tuple[float, float]:
    """Time-averaged sigma_z and its error over the last quarter of a SLED run."""
    dt = _step(config, with_cutoff=True)
    plan = StepPlan(
        dt=dt,
        t_final=config.plan.horizon_decays / bath.gamma,
        record_stride=_stride(config, dt, drive.frequency),
    )
    model = SledModel(omega_q=config.omega_q, bath=bath, drive=drive)
    series = propagate_sled_ensemble(model, rho0, plan, _ensemble(config), workers=config.plan.workers)
    t_end = float(series.times[-1])
    inside = series.window_indices((1.0 - STEADY_WINDOW_FRACTION) * t_end, t_end)
    z = series.bloch()[inside, 2]
    return float(z.mean()), float(series.stderr[inside, 2].mean())


def cmd_steady(config: RunConfig, out_dir: Union[str, Path]) -> RunManifest:
    """
    Steady-state analytics and the Lindblad-failure witness.

    Writes one long-format table per Bloch component of the analytic
    deviation map over (gamma, Delta_q), the energy-shift markers of the
    gamma grid, and a witness table at Delta_q = Delta_s per solver.
    """
    writer, manifest = _open_run("steady", config, out_dir)
    _require_lab_frame(config, config.solvers, "steady")
    base = config.bath_spec()
    Omega_d = to_internal(config.drive.Omega_d)
    if Omega_d <= 0:
        raise ConfigurationError("steady maps need a driven qubit", field_path="drive.Omega_d")

    gammas = [r * config.omega_q for r in config.sweep.gamma_ratios]
    detunings = [r * Omega_d for r in config.sweep.delta_ratios]
    maps: Dict[str, Dict[str, List[float]]] = {
        name: {"gamma": [], "Delta_q": [], "value": []} for name in ("sx", "sy", "sz")
    }
    markers: Dict[str, List[float]] = {"gamma": [], "delta_s": []}
    for gamma in gammas:
        bath_rates = rates(base.with_gamma(gamma))
        markers["gamma"].append(gamma)
        markers["delta_s"].append(bath_rates.delta_s)
        for detuning in detunings:
            components = delta_sigma(SteadyParams.from_rates(bath_rates, Omega_d, detuning))
            for name, value in zip(("sx", "sy", "sz"), components):
                maps[name]["gamma"].append(gamma)
                maps[name]["Delta_q"].append(detuning)
                maps[name]["value"].append(value)
    for name, table in maps.items():
        writer.write_table(f"delta_sigma_{name}", table)
    writer.write_table("shift_markers", markers)

    witness: Dict[str, List[Any]] = {"gamma": [], "witness": [], "stderr": [], "solver": [], "sigma_z": []}
    for solver in config.solvers:
        gamma_list = config.bath.gamma_values(config.omega_q)
        measured, errors, gamma_betas = [], [], []
        for gamma in gamma_list:
            bath = base.with_gamma(gamma)
            bath_rates = rates(bath)
            gamma_betas.append(bath_rates.gamma_beta)
            if solver == "sled":
                drive = DriveSpec.monochromatic(Omega_d, config.omega_q)
                value, err = _sled_steady_sigma_z(config, bath, drive, thermal_state(bath_rates))
            else:
                model = LindbladModel(
                    omega_q=config.omega_q,
                    bath_rates=bath_rates,
                    drive=DriveSpec.monochromatic(Omega_d, config.omega_q, rwa=True),
                    include_shift=solver == "lme",
                )
                value, err = to_bloch(lme_steady_state(model)).z, 0.0
            measured.append(value)
            errors.append(err)
        for point in witness_curve(gamma_list, measured, Omega_d, gamma_betas, solver, errors):
            witness["gamma"].append(point.gamma)
            witness["witness"].append(point.witness)
            witness["stderr"].append(point.stderr)
            witness["solver"].append(point.solver)
            witness["sigma_z"].append(point.sigma_z)
    writer.write_table("witness", witness)
    manifest.finish(writer)
    return manifest


def cmd_shift(config: RunConfig, out_dir: Union[str, Path]) -> RunManifest:
    """Energy shift versus gamma from the bath model and, with SLED, from free-decay fits."""
    writer, manifest = _open_run("shift", config, out_dir)
    base = config.bath_spec()
    gammas = config.bath.gamma_values(config.omega_q)
    analytic = shift_scan(gammas, "lme-analytic", base)
    fitted = None
    if "sled" in config.solvers:
        fitted = shift_scan(
            gammas,
            "sled-fit",
            base,
            ensemble=_ensemble(config),
            dt=_step(config, with_cutoff=True),
            workers=config.plan.workers,
        )
    nan = float("nan")
    table: Dict[str, List[Any]] = {
        "gamma": gammas,
        "delta_s_lme": [p.delta_s for p in analytic.points],
        "delta_s_sled": [p.delta_s for p in fitted.points] if fitted else [nan] * len(gammas),
        "stderr": [p.stderr for p in fitted.points] if fitted else [nan] * len(gammas),
        "error": [p.error or "" for p in fitted.points] if fitted else [""] * len(gammas),
    }
    writer.write_table("shift", table)
    writer.write_json(
        "shift_fit",
        {
            "lme": None if analytic.fit is None else analytic.fit.to_dict(),
            "sled": None if fitted is None or fitted.fit is None else fitted.fit.to_dict(),
        },
    )
    manifest.finish(writer)
    return manifest


def _sideband_summary(scan: Any) -> Dict[str, Any]:
    try:
        fit = fit_lorentzian_pair(scan.omega_p_grid, scan.sigma_z_bar)
    except FitError as exc:
        logger.warning("Sideband fit failed for %s: %s", scan.solver, exc)
        return {"error": str(exc)}
    separation, uncertainty = sideband_separation(fit)
    return {**fit.to_dict(), "separation": separation, "separation_stderr": uncertainty}


def cmd_pump_probe(config: RunConfig, out_dir: Union[str, Path]) -> RunManifest:
    """
    Pump-probe scans per solver and gamma.

    Columns omega_p, sigma_z_bar, h_z, A (readout amplitude in units of
    W_m / kappa), periods and, for SLED, stderr. A Lorentzian-pair fit of
    each scan goes to ``sidebands.json`` and, for several gammas, the h_z
    values are collected in ``hz_map``.
    """
    writer, manifest = _open_run("pump-probe", config, out_dir)
    _require_lab_frame(config, config.solvers, "pump-probe")
    base = config.bath_spec()
    resonator = config.resonator()
    Omega_d = to_internal(config.drive.Omega_d)
    Omega_p = to_internal(config.drive.Omega_p)
    match = drive_policy(config, "pump-probe") == "shifted"
    gammas = config.bath.gamma_values(config.omega_q)
    dt = _step(config)

    sidebands: Dict[str, Any] = {}
    hz_table: Dict[str, List[Any]] = {"gamma": [], "solver": [], "omega_p": [], "h_z": []}
    for index, gamma in enumerate(gammas):
        bath = base.with_gamma(gamma)
        bath_rates = rates(bath)
        for solver in config.solvers:
            omega_d = config.omega_q + _solver_shift(solver, bath_rates.delta_s) if match else config.omega_q
            grid = config.drive.omega_p_grid.resolve(omega_d, Omega_d)
            drive = DriveSpec.pump_probe(Omega_d, omega_d, Omega_p, float(grid[0]))
            if solver == "sled":
                model: Union[LindbladModel, SledModel] = SledModel(omega_q=config.omega_q, bath=bath, drive=drive)
            else:
                model = LindbladModel(omega_q=config.omega_q, bath_rates=bath_rates, drive=drive)
            scan = pump_probe_scan(
                solver,
                model,
                grid,
                n_p=config.drive.n_p,
                dt=dt,
                ensemble=_ensemble(config),
                workers=config.plan.workers,
                match_drive=match,
            )
            table: Dict[str, Any] = {
                "omega_p": scan.omega_p_grid,
                "sigma_z_bar": scan.sigma_z_bar,
                "h_z": scan.h_z,
                "A": [abs(resonator.steady_field(float(s))) / resonator.normalization for s in scan.sigma_z_bar],
                "periods": scan.periods,
            }
            if scan.stderr is not None:
                table["stderr"] = scan.stderr
            writer.write_table(f"pump_probe_{solver}_g{index}", table)
            sidebands[f"{solver}_g{index}"] = {"gamma": gamma, **_sideband_summary(scan), "metadata": scan.metadata}
            for omega_p, h_z in zip(scan.omega_p_grid, scan.h_z):
                hz_table["gamma"].append(gamma)
                hz_table["solver"].append(solver)
                hz_table["omega_p"].append(float(omega_p))
                hz_table["h_z"].append(float(h_z))

    writer.write_json("sidebands", sidebands)
    if len(gammas) > 1:
        writer.write_table("hz_map", hz_table)
    manifest.derived["dt"] = dt
    manifest.finish(writer)
    return manifest


def cmd_noise_check(config: RunConfig, out_dir: Union[str, Path], dump: int = NOISE_DUMPS) -> RunManifest:
    """
    Compare the sampled noise autocorrelation with the bath-model target.

    Lags are given in units of the propagation step dt; the noise grid has
    spacing dt / 2 as in SLED propagation. The first ``dump`` trajectories
    are written to ``noise/``.
    """
    writer, manifest = _open_run("noise-check", config, out_dir)
    bath = config.bath_spec()
    if bath.eta <= 0:
        raise ConfigurationError("noise-check needs a coupled bath", field_path="bath.eta")
    dt = _step(config, with_cutoff=True)
    lags = [lag * dt for lag in config.plan.lags]
    horizon = max(NOISE_RECORD_BETAS * bath.hbar_beta, 4.0 * max(abs(lag) for lag in lags + [dt]))
    grid = NoiseGrid.for_horizon(0.5 * dt, horizon)
    kernel = build_kernel(bath, grid)
    ensemble = _ensemble(config)
    if ensemble.n_traj < 2:
        raise ConfigurationError("noise-check needs at least two trajectories", field_path="plan.n_traj")
    logger.info("Sampling %d noise records of n=%d", ensemble.n_traj, grid.n)
    trajectories = [synthesize(kernel, seed) for seed in ensemble.seeds()]
    estimates = estimate_autocorrelation(trajectories, lags)

    table: Dict[str, List[float]] = {"tau": [], "L_prime_target": [], "estimate": [], "stderr": []}
    for estimate in estimates:
        table["tau"].append(estimate.lag)
        table["L_prime_target"].append(real_correlation_reduced(bath, estimate.lag))
        table["estimate"].append(estimate.mean)
        table["stderr"].append(estimate.stderr)
    writer.write_table("autocorrelation", table)
    for trajectory in trajectories[:dump]:
        writer.register(dump_csv(trajectory, writer.directory / "noise" / f"xi_{trajectory.seed}.csv", bath))
    manifest.derived.update({"dt": dt, "noise_dt": grid.dt, "noise_n": grid.n})
    manifest.finish(writer)
    return manifest


def _readout_inputs(config: RunConfig) -> np.ndarray:
    source = config.readout.source
    if source is None:
        return np.asarray(config.readout.sigma_z_bars, dtype=float)
    path = Path(source)
    if not path.exists():
        raise ConfigurationError(f"file not found: {path}", field_path="readout.source")
    values = read_column(path, "sigma_z_bar")
    if values is None:
        raise ConfigurationError(f"{path} has no sigma_z_bar column", field_path="readout.source")
    return values


def cmd_readout(config: RunConfig, out_dir: Union[str, Path]) -> RunManifest:
    """Dispersive readout (A, I, Q, phi) for sigma_z values, with the ODE-oracle deviation."""
    writer, manifest = _open_run("readout", config, out_dir)
    resonator = config.resonator()
    rows = readout_scan(resonator, _readout_inputs(config))
    table = {
        key: [row.to_dict()[key] for row in rows]
        for key in ("sigma_z_bar", "A", "I", "Q", "phi", "A_raw", "ode_deviation")
    }
    writer.write_table("readout", table)
    manifest.derived["resonator"] = {
        "Delta_rm": resonator.Delta_rm,
        "normalization": resonator.normalization,
        **resonator.metadata,
    }
    manifest.finish(writer)
    return manifest


COMMANDS: Dict[str, Command] = {
    "dynamics": cmd_dynamics,
    "steady": cmd_steady,
    "shift": cmd_shift,
    "pump-probe": cmd_pump_probe,
    "noise-check": cmd_noise_check,
    "readout": cmd_readout,
}
