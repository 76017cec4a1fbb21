"""
Time propagation of the driven qubit.

Two generators are assembled in Liouville space:

* the Lindblad equation with thermal emission/absorption rates and an
  optional bath-induced energy shift (without it: "LME-nES");
* the stochastic Liouville equation with dissipation (SLED), which is
  deterministic for a fixed noise realization xi(t) and exact on average.

Both are stepped with the second-order Magnus propagator
exp(dt * L(t + dt/2)). Every lab-frame generator used here has the form
L(t) = L_static + c(t) * C_x with C_x = -i[sigma_x, .], so a batch of drives or
noise realizations is advanced with one batched matrix exponential per step.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import torch

from sled_qubit.core.bath import BathRates, BathSpec
from sled_qubit.core.noise import NoiseGrid, NoiseTrajectory, build_kernel, synthesize
from sled_qubit.core.qubit_algebra import (
    DTYPE,
    REAL_DTYPE,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    TRACE_ROW,
    DensityMatrix,
    anticommutator_superop,
    bloch_components,
    commutator_superop,
    devectorize,
    dissipator_superop,
    fidelity_batch,
    from_bloch,
    hermiticity_deviation,
    matrix_exp,
    outer,
    plain_commutator_superop,
    rotate_to_frame,
    vectorize,
)
from sled_qubit.exceptions import (
    ContractError,
    GridMismatchError,
    InvalidStateError,
    PositivityViolationError,
)

logger = logging.getLogger(__name__)

SERIES_TOLERANCE = 1e-9  # trace / Hermiticity tolerance of recorded states
POSITIVITY_TOLERANCE = 1e-8  # Lindblad states: eigenvalues >= -tolerance
ENSEMBLE_CLIP = 1e-4  # statistical negativity clipped before fidelities
ENSEMBLE_CHUNK_SIZE = 32  # trajectories per batched job, independent of workers
DEFAULT_N_TRAJ = 10_000
PROBE_PHASE = math.pi / 2


def default_step(omega_q: float, omega_c: Optional[float] = None) -> float:
    """Default Magnus step min(2 pi / (64 w_q), pi / (8 w_c))."""
    dt = 2.0 * math.pi / (64.0 * omega_q)
    if omega_c is not None:
        dt = min(dt, math.pi / (8.0 * omega_c))
    return dt


@dataclass(frozen=True)
class DriveTone:
    """One cosine tone amplitude * cos(frequency * t + phase)."""

    amplitude: float
    frequency: float
    phase: float = 0.0

    def __post_init__(self) -> None:
        if self.amplitude < 0:
            raise ValueError(f"amplitude must be non-negative, got {self.amplitude}")


@dataclass(frozen=True)
class DriveSpec:
    """
    Classical transverse drive f(t) sigma_x.

    Attributes:
        tones: Cosine tones summed into f(t)
        rwa: Use the rotating-wave approximation (exactly one tone)
    """

    tones: Tuple[DriveTone, ...] = ()
    rwa: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "tones", tuple(self.tones))
        if self.rwa and len(self.tones) != 1:
            raise ValueError(f"rwa drive needs exactly one tone, got {len(self.tones)}")

    @classmethod
    def monochromatic(
        cls, amplitude: float, frequency: float, phase: float = 0.0, rwa: bool = False
    ) -> "DriveSpec":
        return cls(tones=(DriveTone(amplitude, frequency, phase),), rwa=rwa)

    @classmethod
    def pump_probe(
        cls,
        amplitude: float,
        frequency: float,
        probe_amplitude: float,
        probe_frequency: float,
        probe_phase: float = PROBE_PHASE,
    ) -> "DriveSpec":
        """Primary drive plus a weak probe, f = W_d cos(w_d t) + W_p cos(w_p t + phase)."""
        return cls(
            tones=(
                DriveTone(amplitude, frequency),
                DriveTone(probe_amplitude, probe_frequency, probe_phase),
            )
        )

    @property
    def frequency(self) -> float:
        """Frequency of the primary tone (0 for an undriven qubit)."""
        return self.tones[0].frequency if self.tones else 0.0

    @property
    def amplitude(self) -> float:
        return self.tones[0].amplitude if self.tones else 0.0

    @property
    def is_silent(self) -> bool:
        return all(tone.amplitude == 0.0 for tone in self.tones)

    def with_probe_frequency(self, probe_frequency: float) -> "DriveSpec":
        """Copy with the second tone moved to ``probe_frequency``."""
        if len(self.tones) < 2:
            raise ContractError("drive has no probe tone")
        probe = replace(self.tones[1], frequency=probe_frequency)
        return replace(self, tones=(self.tones[0], probe) + self.tones[2:])

    def with_frequency(self, frequency: float) -> "DriveSpec":
        """Copy with the primary tone moved to ``frequency``."""
        if not self.tones:
            return self
        primary = replace(self.tones[0], frequency=frequency)
        return replace(self, tones=(primary,) + self.tones[1:])


def drive_value(drive: DriveSpec, t: Any) -> Any:
    """
    Lab-frame drive field f(t) = sum_k W_k cos(w_k t + phi_k).

    Args:
        drive: Non-RWA drive
        t: Time or numpy array of times

    Raises:
        ContractError: For an RWA drive, which has no scalar lab-frame field
    """
    if drive.rwa:
        raise ContractError("drive_value is undefined in RWA mode; use rwa_drive_hamiltonian")
    t = np.asarray(t, dtype=float)
    value = np.zeros_like(t)
    for tone in drive.tones:
        value = value + tone.amplitude * np.cos(tone.frequency * t + tone.phase)
    return float(value) if value.ndim == 0 else value


def rwa_drive_hamiltonian(drive: DriveSpec, t: float) -> torch.Tensor:
    """Lab-frame RWA drive (W/2)(|0><1| e^{i(w t + phi)} + h.c.)."""
    if not drive.rwa:
        raise ContractError("rwa_drive_hamiltonian needs an RWA drive")
    tone = drive.tones[0]
    phase = complex(math.cos(tone.frequency * t + tone.phase), math.sin(tone.frequency * t + tone.phase))
    lowering = 0.5 * tone.amplitude * phase * outer(0, 1)
    return lowering + lowering.conj().T


@dataclass(frozen=True)
class LindbladModel:
    """
    Lindblad master equation of the driven qubit.

    Attributes:
        omega_q: Bare qubit frequency (rad/s)
        bath_rates: Rates and energy shift of the bath
        drive: Classical drive
        include_shift: Add H_s = -Delta_s sigma_z / 2 (False gives LME-nES)
    """

    omega_q: float
    bath_rates: BathRates
    drive: DriveSpec = field(default_factory=DriveSpec)
    include_shift: bool = True

    def __post_init__(self) -> None:
        if self.bath_rates.Gamma_down < 0 or self.bath_rates.Gamma_up < 0:
            raise ValueError("Lindblad rates must be non-negative")

    @property
    def qubit_frequency(self) -> float:
        """Frequency of the sigma_z term, w_q (+ Delta_s with the shift)."""
        shift = self.bath_rates.delta_s if self.include_shift else 0.0
        return self.omega_q + shift

    def dissipator(self) -> torch.Tensor:
        return (
            self.bath_rates.Gamma_down * dissipator_superop(0, 1)
            + self.bath_rates.Gamma_up * dissipator_superop(1, 0)
        )

    def static_generator(self) -> torch.Tensor:
        """Undriven part of the lab-frame Liouvillian."""
        return commutator_superop(-0.5 * self.qubit_frequency * SIGMA_Z) + self.dissipator()

    def rotating_generator(self) -> torch.Tensor:
        """
        Time-independent RWA Liouvillian in the frame rotating at the drive
        frequency, H = -Delta_q sigma_z / 2 + W (cos phi sigma_x - sin phi sigma_y) / 2.
        """
        if not self.drive.rwa and not self.drive.is_silent:
            raise ContractError("rotating_generator needs an RWA or silent drive")
        detuning = self.qubit_frequency - self.drive.frequency
        hamiltonian = -0.5 * detuning * SIGMA_Z
        if self.drive.tones:
            tone = self.drive.tones[0]
            hamiltonian = hamiltonian + 0.5 * tone.amplitude * (
                math.cos(tone.phase) * SIGMA_X - math.sin(tone.phase) * SIGMA_Y
            )
        return commutator_superop(hamiltonian) + self.dissipator()


@dataclass(frozen=True)
class SledModel:
    """
    Stochastic Liouville equation with dissipation.

    Attributes:
        omega_q: Bare qubit frequency (rad/s)
        bath: Ohmic bath (eta, hbar beta, omega_c)
        drive: Lab-frame drive (RWA not allowed)
    """

    omega_q: float
    bath: BathSpec
    drive: DriveSpec = field(default_factory=DriveSpec)

    def __post_init__(self) -> None:
        if self.bath.eta <= 0:
            raise ValueError(f"SLED needs eta > 0, got {self.bath.eta}")
        if self.drive.rwa:
            raise ValueError("SLED is defined for lab-frame drives only")

    def static_generator(self) -> torch.Tensor:
        """-i[H_S, .] - (eta / hbar beta)[sx, [sx, .]] - i (eta w_q / 2)[sx, {sy, .}]."""
        eta = self.bath.eta
        commutator_x = plain_commutator_superop(SIGMA_X)
        double = commutator_x @ commutator_x
        friction = commutator_x @ anticommutator_superop(SIGMA_Y)
        return (
            commutator_superop(-0.5 * self.omega_q * SIGMA_Z)
            - (eta / self.bath.hbar_beta) * double
            - 0.5j * eta * self.omega_q * friction
        )


def coupling_generator() -> torch.Tensor:
    """C_x = -i[sigma_x, .], multiplied by f(t) (minus xi(t) for SLED)."""
    return commutator_superop(SIGMA_X)


def lme_liouvillian(model: LindbladModel, t: float) -> torch.Tensor:
    """
    Lab-frame Lindblad generator at time ``t``.

    -i[H_S + H_s + H_d(t), .] + Gamma_down D_01 + Gamma_up D_10
    """
    if model.drive.rwa:
        drive = commutator_superop(rwa_drive_hamiltonian(model.drive, t))
    else:
        drive = drive_value(model.drive, t) * coupling_generator()
    return model.static_generator() + drive


def sled_liouvillian(model: SledModel, t: float, xi: float) -> torch.Tensor:
    """SLED generator for one noise value xi(t) (rad/s)."""
    if not math.isfinite(xi):
        raise ValueError(f"noise value must be finite, got {xi}")
    return model.static_generator() + (drive_value(model.drive, t) - xi) * coupling_generator()


def magnus2_step(
    generator: Callable[[float], torch.Tensor], t: float, dt: float, state: torch.Tensor
) -> torch.Tensor:
    """
    One second-order Magnus step, state <- exp(dt L(t + dt/2)) state.

    Args:
        generator: Callable returning the Liouvillian at a given time
        t: Start of the step
        dt: Step size
        state: Liouville vector (..., 4)
    """
    propagator = matrix_exp(dt * generator(t + 0.5 * dt))
    return (propagator @ state.unsqueeze(-1)).squeeze(-1)


@dataclass(frozen=True)
class StepPlan:
    """
    Fixed-step integration plan.

    Attributes:
        dt: Step size (s)
        t_final: Horizon (s), rounded to a whole number of steps
        record_stride: Keep every k-th state
    """

    dt: float
    t_final: float
    record_stride: int = 1

    def __post_init__(self) -> None:
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.t_final < 0:
            raise ValueError(f"t_final must be non-negative, got {self.t_final}")
        if self.record_stride < 1:
            raise ValueError(f"record_stride must be >= 1, got {self.record_stride}")

    @classmethod
    def default(
        cls, omega_q: float, t_final: float, omega_c: Optional[float] = None, record_stride: int = 1
    ) -> "StepPlan":
        return cls(dt=default_step(omega_q, omega_c), t_final=t_final, record_stride=record_stride)

    @property
    def n_steps(self) -> int:
        return int(math.ceil(self.t_final / self.dt - 1e-9))

    @property
    def n_records(self) -> int:
        return self.n_steps // self.record_stride + 1

    def record_times(self) -> np.ndarray:
        return self.dt * self.record_stride * np.arange(self.n_records)

    def midpoints(self) -> np.ndarray:
        return self.dt * (np.arange(self.n_steps) + 0.5)

    def check_resolution(self, *frequencies: float) -> None:
        """Warn when dt * max(frequency) exceeds 2 pi / 16."""
        fastest = max((abs(f) for f in frequencies), default=0.0)
        if fastest * self.dt > 2.0 * math.pi / 16.0:
            logger.warning(
                "Step dt=%.3e s resolves frequency %.3e rad/s with fewer than 16 steps per period",
                self.dt,
                fastest,
            )


@dataclass(frozen=True)
class EnsemblePlan:
    """Monte-Carlo ensemble: trajectory k uses seed base_seed + k."""

    n_traj: int = DEFAULT_N_TRAJ
    base_seed: int = 0

    def __post_init__(self) -> None:
        if self.n_traj < 1:
            raise ValueError(f"n_traj must be >= 1, got {self.n_traj}")

    def seeds(self) -> range:
        return range(self.base_seed, self.base_seed + self.n_traj)


@dataclass
class TrajectorySeries:
    """
    Recorded states of one propagation.

    Attributes:
        times: Record times (s)
        states: Complex tensor (n_records, 2, 2)
        frame_frequency: Angular frequency of the frame the states are stored in
            (0 for the lab frame)
        metadata: Free-form run information
    """

    times: np.ndarray
    states: torch.Tensor
    frame_frequency: float = 0.0
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.states.ndim != 3 or tuple(self.states.shape[1:]) != (2, 2):
            raise ValueError(f"states must have shape (n, 2, 2), got {tuple(self.states.shape)}")
        if len(self.times) != self.states.shape[0]:
            raise ValueError("times and states must have equal length")
        traces = torch.diagonal(self.states, dim1=-2, dim2=-1).sum(-1)
        drift = float((traces - 1.0).abs().max().item()) if len(self.times) else 0.0
        if drift > SERIES_TOLERANCE:
            raise InvalidStateError(f"recorded trace drifts by {drift:.3e}")
        if len(self.times) and hermiticity_deviation(self.states) > SERIES_TOLERANCE:
            raise InvalidStateError("recorded states are not Hermitian")

    def __len__(self) -> int:
        return len(self.times)

    def state(self, index: int) -> DensityMatrix:
        return DensityMatrix(self.states[index], atol=SERIES_TOLERANCE)

    def states_in_frame(self, omega: float) -> torch.Tensor:
        """States in the frame rotating at ``omega``."""
        if omega == self.frame_frequency:
            return self.states
        times = torch.as_tensor(self.times, dtype=REAL_DTYPE)
        return rotate_to_frame(self.states, omega - self.frame_frequency, times)

    def bloch(self, rotating_omega: Optional[float] = None) -> np.ndarray:
        """
        Bloch components (n_records, 3).

        Args:
            rotating_omega: Frame frequency; defaults to the storage frame
        """
        omega = self.frame_frequency if rotating_omega is None else rotating_omega
        return bloch_components(self.states_in_frame(omega)).numpy()

    def window_indices(self, t0: float, t1: float) -> np.ndarray:
        slack = 1e-9 * max(abs(t1), 1e-300)
        return np.nonzero((self.times >= t0 - slack) & (self.times <= t1 + slack))[0]

    def min_eigenvalue(self) -> Tuple[float, float]:
        """Most negative eigenvalue over the records and its time."""
        values = torch.linalg.eigvalsh(0.5 * (self.states + self.states.conj().transpose(-1, -2)))
        lowest = values[:, 0]
        index = int(torch.argmin(lowest).item())
        return float(lowest[index].item()), float(self.times[index])


@dataclass
class EnsembleSeries(TrajectorySeries):
    """
    Ensemble mean of SLED trajectories.

    Standard errors are given for the Bloch components in the frame rotating
    at ``stats_frequency``.
    """

    n_traj: int = 1
    stats_frequency: float = 0.0
    stderr: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    half_bloch: np.ndarray = field(default_factory=lambda: np.zeros((2, 0, 3)))
    half_stderr: np.ndarray = field(default_factory=lambda: np.zeros((2, 0, 3)))

    def half_split(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """
        Bloch means and standard errors of two disjoint half-ensembles.

        Returns:
            (mean_first, mean_second, stderr_first, stderr_second), each
            (n_records, 3) in the statistics frame
        """
        return self.half_bloch[0], self.half_bloch[1], self.half_stderr[0], self.half_stderr[1]


def _run_engine(
    static: torch.Tensor,
    coupling: Optional[torch.Tensor],
    coefficients: Optional[torch.Tensor],
    initial: torch.Tensor,
    plan: StepPlan,
) -> torch.Tensor:
    """
    Batched Magnus-2 integration of L_b(t) = static + c_b(t) coupling.

    Args:
        static: (4, 4) generator part shared by the batch
        coupling: (4, 4) generator multiplied by the coefficients
        coefficients: Real (batch, n_steps) values of c_b at step midpoints,
            or None for a time-independent generator
        initial: (batch, 4) Liouville vectors

    Returns:
        Records (batch, n_records, 4)
    """
    batch = initial.shape[0]
    n_steps, stride = plan.n_steps, plan.record_stride
    records = torch.empty((batch, plan.n_records, 4), dtype=DTYPE)
    state = initial.clone()
    records[:, 0] = state
    if coefficients is None or coupling is None:
        propagator_t = matrix_exp(plan.dt * static).transpose(0, 1)
        for step in range(1, n_steps + 1):
            state = state @ propagator_t
            if step % stride == 0:
                records[:, step // stride] = state
        return records

    if not torch.isfinite(coefficients).all():
        raise ValueError("drive/noise coefficients contain non-finite values")
    base = (plan.dt * static).expand(batch, 4, 4)
    unit = plan.dt * coupling
    scaled = coefficients.to(DTYPE)
    for step in range(n_steps):
        propagators = torch.linalg.matrix_exp(base + scaled[:, step, None, None] * unit)
        state = (propagators @ state.unsqueeze(-1)).squeeze(-1)
        if (step + 1) % stride == 0:
            records[:, (step + 1) // stride] = state
    return records


def _records_to_states(records: torch.Tensor) -> torch.Tensor:
    states = devectorize(records)
    return 0.5 * (states + states.conj().transpose(-1, -2))


def _check_positive(series: TrajectorySeries, dt: float) -> None:
    lowest, when = series.min_eigenvalue()
    if lowest < -POSITIVITY_TOLERANCE:
        raise PositivityViolationError(when, lowest, dt)


def propagate_lme(model: LindbladModel, rho0: DensityMatrix, plan: StepPlan) -> TrajectorySeries:
    """
    Integrate the Lindblad equation.

    Lab-frame drives are stepped with Magnus-2; RWA (and undriven) models use
    the exact propagator of their time-independent rotating-frame generator,
    and the states are stored in that frame.

    Raises:
        PositivityViolationError: If a recorded state has an eigenvalue below -1e-8
    """
    plan.check_resolution(model.qubit_frequency, *(t.frequency for t in model.drive.tones))
    initial = vectorize(rho0).unsqueeze(0)
    frame = 0.0
    if model.drive.rwa:
        frame = model.drive.frequency
        records = _run_engine(model.rotating_generator(), None, None, initial, plan)
    elif model.drive.is_silent:
        records = _run_engine(model.static_generator(), None, None, initial, plan)
    else:
        coefficients = torch.from_numpy(drive_value(model.drive, plan.midpoints())).unsqueeze(0)
        records = _run_engine(model.static_generator(), coupling_generator(), coefficients, initial, plan)
    series = TrajectorySeries(
        times=plan.record_times(),
        states=_records_to_states(records[0]),
        frame_frequency=frame,
        metadata={"solver": "lme" if model.include_shift else "lme-nes"},
    )
    _check_positive(series, plan.dt)
    return series


def propagate_lme_batch(
    model: LindbladModel, drives: Sequence[DriveSpec], rho0: DensityMatrix, plan: StepPlan
) -> List[TrajectorySeries]:
    """
    Propagate one Lindblad model under several lab-frame drives at once.

    Returns:
        One series per drive, in input order
    """
    if any(drive.rwa for drive in drives):
        raise ContractError("propagate_lme_batch supports lab-frame drives only")
    if not drives:
        return []
    midpoints = plan.midpoints()
    coefficients = torch.from_numpy(np.stack([drive_value(d, midpoints) for d in drives]))
    initial = vectorize(rho0).unsqueeze(0).expand(len(drives), 4).clone()
    records = _run_engine(model.static_generator(), coupling_generator(), coefficients, initial, plan)
    results = []
    for index in range(len(drives)):
        series = TrajectorySeries(
            times=plan.record_times(),
            states=_records_to_states(records[index]),
            metadata={"solver": "lme" if model.include_shift else "lme-nes"},
        )
        _check_positive(series, plan.dt)
        results.append(series)
    return results


def noise_grid_for(plan: StepPlan) -> NoiseGrid:
    """Noise grid of spacing dt/2 whose exposed half covers the plan."""
    return NoiseGrid.for_horizon(0.5 * plan.dt, plan.n_steps * plan.dt)


def _noise_midpoints(noise: NoiseTrajectory, plan: StepPlan) -> np.ndarray:
    """Noise samples at the step midpoints, i.e. odd half-step indices."""
    if not math.isclose(noise.grid.dt, 0.5 * plan.dt, rel_tol=1e-12):
        raise GridMismatchError(
            f"noise spacing {noise.grid.dt:.6e} s must be half the step {plan.dt:.6e} s"
        )
    needed = 2 * plan.n_steps
    if noise.grid.exposed < needed:
        raise GridMismatchError(
            f"noise record exposes {noise.exposed_duration:.6e} s, plan needs {plan.n_steps * plan.dt:.6e} s"
        )
    return noise.exposed[1:needed:2]


def propagate_sled_batch(
    model: SledModel,
    rho0: DensityMatrix,
    plan: StepPlan,
    noises: Sequence[NoiseTrajectory],
) -> torch.Tensor:
    """
    Propagate several SLED trajectories in one batch.

    Returns:
        Hermitian-symmetrized states (n_traj, n_records, 2, 2)
    """
    drive = drive_value(model.drive, plan.midpoints())
    coefficients = torch.from_numpy(np.stack([drive - _noise_midpoints(n, plan) for n in noises]))
    initial = vectorize(rho0).unsqueeze(0).expand(len(noises), 4).clone()
    records = _run_engine(model.static_generator(), coupling_generator(), coefficients, initial, plan)
    return _records_to_states(records)


def propagate_sled_trajectory(
    model: SledModel, rho0: DensityMatrix, plan: StepPlan, noise: NoiseTrajectory
) -> TrajectorySeries:
    """
    Integrate the SLED for one noise realization.

    Positivity is not checked; single trajectories may leave the physical
    state space.

    Raises:
        GridMismatchError: If the noise spacing is not dt/2 or the record is too short
    """
    states = propagate_sled_batch(model, rho0, plan, [noise])[0]
    return TrajectorySeries(
        times=plan.record_times(),
        states=states,
        metadata={"solver": "sled", "seed": noise.seed},
    )


@dataclass
class _ChunkSums:
    """Per-half accumulators of one chunk of trajectories."""

    states: torch.Tensor  # (2, n_records, 2, 2)
    bloch_sq: torch.Tensor  # (2, n_records, 3)
    counts: Tuple[int, int]


def _iter_chunks(ensemble: EnsemblePlan) -> Iterator[Tuple[int, int]]:
    for start in range(0, ensemble.n_traj, ENSEMBLE_CHUNK_SIZE):
        yield start, min(start + ENSEMBLE_CHUNK_SIZE, ensemble.n_traj)


def propagate_sled_ensemble(
    model: SledModel,
    rho0: DensityMatrix,
    plan: StepPlan,
    ensemble: EnsemblePlan,
    workers: int = 1,
    stats_frequency: Optional[float] = None,
) -> EnsembleSeries:
    """
    Average SLED trajectories over noise realizations.

    Trajectory k is driven by the noise drawn from seed base_seed + k.
    Trajectories are processed in fixed chunks and reduced in index order,
    so the result does not depend on ``workers``.

    Args:
        model: SLED model
        rho0: Initial state
        plan: Step plan
        ensemble: Trajectory count and base seed
        workers: Thread-pool size
        stats_frequency: Frame of the reported standard errors (default:
            the primary drive frequency)

    Returns:
        EnsembleSeries with mean states and per-record standard errors
    """
    grid = noise_grid_for(plan)
    kernel = build_kernel(model.bath, grid)
    frame = model.drive.frequency if stats_frequency is None else stats_frequency
    times = torch.as_tensor(plan.record_times(), dtype=REAL_DTYPE)
    split = ensemble.n_traj // 2 if ensemble.n_traj > 1 else 1
    logger.info(
        "Propagating %d SLED trajectories (%d steps, noise record n=%d) on %d worker(s)",
        ensemble.n_traj,
        plan.n_steps,
        grid.n,
        workers,
    )

    def run_chunk(bounds: Tuple[int, int]) -> _ChunkSums:
        start, stop = bounds
        seeds = [ensemble.base_seed + index for index in range(start, stop)]
        states = propagate_sled_batch(model, rho0, plan, [synthesize(kernel, s) for s in seeds])
        bloch = bloch_components(rotate_to_frame(states, frame, times))
        halves = torch.tensor([0 if index < split else 1 for index in range(start, stop)])
        sums = torch.zeros((2,) + tuple(states.shape[1:]), dtype=DTYPE)
        squares = torch.zeros((2, states.shape[1], 3), dtype=REAL_DTYPE)
        for half in (0, 1):
            mask = halves == half
            if mask.any():
                sums[half] = states[mask].sum(dim=0)
                squares[half] = (bloch[mask] ** 2).sum(dim=0)
        counts = (int((halves == 0).sum()), int((halves == 1).sum()))
        logger.debug("Finished trajectories %d-%d", start, stop - 1)
        return _ChunkSums(sums, squares, counts)

    chunks = list(_iter_chunks(ensemble))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            partials = list(pool.map(run_chunk, chunks))
    else:
        partials = [run_chunk(bounds) for bounds in chunks]

    state_sums = torch.zeros_like(partials[0].states)
    square_sums = torch.zeros_like(partials[0].bloch_sq)
    counts = [0, 0]
    for partial in partials:
        state_sums = state_sums + partial.states
        square_sums = square_sums + partial.bloch_sq
        counts[0] += partial.counts[0]
        counts[1] += partial.counts[1]

    mean_states = state_sums.sum(dim=0) / ensemble.n_traj
    half_bloch = np.zeros((2, plan.n_records, 3))
    half_stderr = np.zeros((2, plan.n_records, 3))
    for half in (0, 1):
        if counts[half]:
            half_bloch[half], half_stderr[half] = _mean_and_stderr(
                bloch_components(rotate_to_frame(state_sums[half] / counts[half], frame, times)),
                square_sums[half],
                counts[half],
            )
    mean_bloch = bloch_components(rotate_to_frame(mean_states, frame, times))
    _, stderr = _mean_and_stderr(mean_bloch, square_sums.sum(dim=0), ensemble.n_traj)
    return EnsembleSeries(
        times=plan.record_times(),
        states=0.5 * (mean_states + mean_states.conj().transpose(-1, -2)),
        metadata={"solver": "sled", "n_traj": ensemble.n_traj, "base_seed": ensemble.base_seed},
        n_traj=ensemble.n_traj,
        stats_frequency=frame,
        stderr=stderr,
        half_bloch=half_bloch,
        half_stderr=half_stderr,
    )


def _mean_and_stderr(
    mean: torch.Tensor, square_sum: torch.Tensor, count: int
) -> Tuple[np.ndarray, np.ndarray]:
    """Sample mean and standard error of the mean from first and second moments."""
    mean_np = mean.numpy()
    if count < 2:
        return mean_np, np.zeros_like(mean_np)
    variance = (square_sum.numpy() - count * mean_np**2) / (count - 1)
    return mean_np, np.sqrt(np.clip(variance, 0.0, None) / count)


def thermal_state(bath_rates: BathRates) -> DensityMatrix:
    """Thermal state of the bare qubit, Bloch (0, 0, gamma / gamma_beta)."""
    return from_bloch((0.0, 0.0, bath_rates.gamma / bath_rates.gamma_beta))


def lme_steady_state(model: LindbladModel) -> DensityMatrix:
    """
    Stationary state of the rotating-frame RWA Lindblad generator.

    Solved from L vec(rho) = 0 with the redundant first equation replaced by
    the trace condition.

    Raises:
        ContractError: For a lab-frame (non-RWA) drive
    """
    generator = model.rotating_generator()
    system = generator.clone()
    system[0] = TRACE_ROW
    rhs = torch.zeros(4, dtype=DTYPE)
    rhs[0] = 1.0
    solution = torch.linalg.solve(system, rhs)
    matrix = devectorize(solution)
    return DensityMatrix(0.5 * (matrix + matrix.conj().T), atol=SERIES_TOLERANCE)


def avg_fidelity_over_window(
    series_a: TrajectorySeries,
    series_b: TrajectorySeries,
    window: Tuple[float, float],
    clip: float = ENSEMBLE_CLIP,
) -> float:
    """
    Mean fidelity of two series over the records inside ``window``.

    Eigenvalue residues in [-clip, 0) are clipped and the trace renormalized
    before each fidelity.

    Raises:
        ContractError: If the window holds no records
        GridMismatchError: If the two series use different time grids
    """
    t0, t1 = window
    if len(series_a) != len(series_b) or not np.allclose(series_a.times, series_b.times, rtol=1e-12, atol=0.0):
        raise GridMismatchError("series must share one time grid")
    indices = series_a.window_indices(t0, t1)
    if indices.size == 0:
        raise ContractError(f"no recorded states in window [{t0:.6e}, {t1:.6e}]")
    selected = torch.as_tensor(indices)
    frame = series_a.frame_frequency
    values, clipped = fidelity_batch(
        series_a.states_in_frame(frame)[selected],
        series_b.states_in_frame(frame)[selected],
        clip,
    )
    if clipped > 0.0:
        logger.info("Clipped eigenvalues up to %.3e before fidelity averaging", clipped)
    return float(values.mean().item())
