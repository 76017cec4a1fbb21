"""
Colored Gaussian noise for the stochastic Liouville equation.

Realizations of the real stationary process xi(t) whose autocorrelation is
L'_r(tau) are drawn in the frequency domain: complex Gaussian bins weighted
by the kernel G(w) = sqrt(L'_r(w)) are transformed back with an inverse
real FFT. Records are periodic, so only their first half is ever handed to
consumers.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import torch

from sled_qubit.core.bath import BathSpec, reduced_spectrum
from sled_qubit.exceptions import (
    CircularCorrelationError,
    GridMismatchError,
    SpectralNegativityError,
)

logger = logging.getLogger(__name__)

NYQUIST_CUTOFF_FACTOR = 8.0  # pi / dt must reach 8 * omega_c
NEGATIVITY_TOLERANCE = 1e-15


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based Philox generator; one independent stream per seed."""
    return np.random.Generator(np.random.Philox(int(seed) % 2**64))


def _is_power_of_two(n: int) -> bool:
    return n >= 2 and (n & (n - 1)) == 0


def next_power_of_two(n: int) -> int:
    return 1 << max(1, math.ceil(math.log2(max(n, 2))))


@dataclass(frozen=True)
class NoiseGrid:
    """
    Uniform sample grid of a noise record.

    Attributes:
        dt: Sample spacing (s)
        n: Number of samples (power of two)
    """

    dt: float
    n: int

    def __post_init__(self) -> None:
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not _is_power_of_two(self.n):
            raise ValueError(f"n must be a power of two >= 2, got {self.n}")

    @classmethod
    def for_horizon(cls, spacing: float, horizon: float) -> "NoiseGrid":
        """Smallest grid of the given spacing whose first half covers ``horizon``."""
        needed = 2 * (int(math.ceil(horizon / spacing)) + 2)
        return cls(dt=spacing, n=next_power_of_two(needed))

    @property
    def duration(self) -> float:
        return self.n * self.dt

    @property
    def nyquist(self) -> float:
        """Nyquist angular frequency pi / dt."""
        return math.pi / self.dt

    @property
    def exposed(self) -> int:
        """Number of samples handed to consumers (first half of the record)."""
        return self.n // 2

    @property
    def d_omega(self) -> float:
        return 2.0 * math.pi / self.duration

    def frequencies(self) -> np.ndarray:
        """Non-negative bin frequencies w_m = 2 pi m / (n dt), m = 0..n/2."""
        return self.d_omega * np.arange(self.n // 2 + 1)

    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.n)


@dataclass(frozen=True)
class NoiseKernel:
    """
    Frequency-domain kernel G(w_m) >= 0 on the non-negative bins.

    Negative-frequency bins follow from evenness, G(-w) = G(w).
    """

    grid: NoiseGrid
    g_tilde: np.ndarray

    def __post_init__(self) -> None:
        expected = self.grid.n // 2 + 1
        if self.g_tilde.shape != (expected,):
            raise ValueError(f"g_tilde must have shape ({expected},), got {self.g_tilde.shape}")
        if np.any(self.g_tilde < 0) or not np.all(np.isfinite(self.g_tilde)):
            raise ValueError("g_tilde must be finite and non-negative")

    def full(self) -> np.ndarray:
        """Kernel on all n bins in FFT order (upper half = negative frequencies)."""
        return np.concatenate([self.g_tilde, self.g_tilde[1:-1][::-1]])


@dataclass(frozen=True)
class NoiseTrajectory:
    """
    One realization of xi(t) on a noise grid.

    Attributes:
        grid: Sample grid of the full periodic record
        samples: Real samples of the full record (rad/s)
        seed: Seed the record was drawn from
    """

    grid: NoiseGrid
    samples: np.ndarray
    seed: int
    metadata: Dict[str, float] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if self.samples.shape != (self.grid.n,):
            raise ValueError(f"samples must have shape ({self.grid.n},), got {self.samples.shape}")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("noise samples must be finite")

    @property
    def exposed(self) -> np.ndarray:
        """First half of the record, free of circular wrap-around."""
        return self.samples[: self.grid.exposed]

    @property
    def exposed_duration(self) -> float:
        return self.grid.exposed * self.grid.dt


@dataclass(frozen=True)
class AutocorrelationEstimate:
    """Cross-trajectory estimate of E[xi(t0) xi(t0 + lag)]."""

    lag: float
    mean: float
    stderr: float


def build_kernel(bath: BathSpec, grid: NoiseGrid) -> NoiseKernel:
    """
    Kernel G = sqrt(L'_r) sampled on the grid's frequency bins.

    Args:
        bath: Bath parameters
        grid: Target noise grid

    Returns:
        NoiseKernel with g_tilde[m] = sqrt(L'_r(w_m))

    Raises:
        GridMismatchError: If the Nyquist frequency is below 8 * omega_c
        SpectralNegativityError: If the reduced spectrum is negative at a bin
    """
    if grid.nyquist < NYQUIST_CUTOFF_FACTOR * bath.omega_c:
        raise GridMismatchError(
            f"Noise grid Nyquist frequency {grid.nyquist:.3e} rad/s is below "
            f"{NYQUIST_CUTOFF_FACTOR:.0f} x omega_c = {NYQUIST_CUTOFF_FACTOR * bath.omega_c:.3e} rad/s"
        )
    omega = grid.frequencies()
    spectrum = np.asarray(reduced_spectrum(bath, omega), dtype=float)
    worst = int(np.argmin(spectrum))
    if spectrum[worst] < -NEGATIVITY_TOLERANCE:
        raise SpectralNegativityError(float(omega[worst]), float(spectrum[worst]))
    kernel = NoiseKernel(grid=grid, g_tilde=np.sqrt(np.clip(spectrum, 0.0, None)))
    logger.debug("Built noise kernel on %d bins (dt=%.3e s)", omega.size, grid.dt)
    return kernel


def draw_bins(kernel: NoiseKernel, seed: int) -> np.ndarray:
    """
    Hermitian-symmetric frequency draws z_m for m = 0..n/2.

    Interior bins are complex with E|z_m|^2 = G^2 dw / (2 pi); the zero and
    Nyquist bins are real with the same variance.
    """
    grid = kernel.grid
    half = grid.n // 2
    rng = make_rng(seed)
    draws = rng.standard_normal((2, half + 1))
    weight = kernel.g_tilde * math.sqrt(grid.d_omega / (2.0 * math.pi))
    bins = (draws[0] + 1j * draws[1]) / math.sqrt(2.0)
    bins[0] = draws[0, 0]
    bins[half] = draws[0, half]
    return weight * bins


def synthesize(kernel: NoiseKernel, seed: int) -> NoiseTrajectory:
    """
    Draw one noise realization.

    The result is a deterministic function of (kernel, seed).

    Example:
        >>> grid = NoiseGrid(dt=1e-13, n=1024)
        >>> trajectory = synthesize(build_kernel(bath, grid), seed=7)
        >>> trajectory.exposed.shape
        (512,)
    """
    bins = torch.from_numpy(draw_bins(kernel, seed))
    samples = torch.fft.irfft(bins, n=kernel.grid.n) * kernel.grid.n
    return NoiseTrajectory(grid=kernel.grid, samples=samples.numpy().astype(np.float64), seed=int(seed))


def synthesize_many(kernel: NoiseKernel, seeds: Sequence[int]) -> List[NoiseTrajectory]:
    """Independent realizations for a list of seeds, in seed-list order."""
    return [synthesize(kernel, seed) for seed in seeds]


def estimate_autocorrelation(
    trajectories: Sequence[NoiseTrajectory],
    lags: Sequence[float],
    anchor_index: Optional[int] = None,
) -> List[AutocorrelationEstimate]:
    """
    Cross-trajectory estimator of E[xi(t0) xi(t0 + tau)].

    Args:
        trajectories: At least two realizations on a shared grid
        lags: Lags in seconds, multiples of the grid spacing (may be negative)
        anchor_index: Sample index of t0, default n/8 (first quarter)

    Returns:
        One (mean, standard error) estimate per lag

    Raises:
        ValueError: If fewer than two trajectories or mixed grids are given
        CircularCorrelationError: If a lag leaves the exposed half of the record
    """
    if len(trajectories) < 2:
        raise ValueError("at least two trajectories are required")
    grid = trajectories[0].grid
    if any(t.grid != grid for t in trajectories):
        raise GridMismatchError("trajectories must share one noise grid")
    anchor = grid.n // 8 if anchor_index is None else int(anchor_index)
    exposed = np.stack([t.exposed for t in trajectories])
    count = exposed.shape[0]

    estimates = []
    for lag in lags:
        steps = int(round(lag / grid.dt))
        if abs(steps * grid.dt - lag) > 1e-6 * grid.dt:
            raise ValueError(f"lag {lag:.6e} s is not a multiple of dt={grid.dt:.6e} s")
        index = anchor + steps
        if abs(lag) > 0.5 * grid.duration or not 0 <= index < grid.exposed:
            limit = (grid.exposed - 1 - anchor) * grid.dt if steps >= 0 else anchor * grid.dt
            raise CircularCorrelationError(lag, limit)
        products = exposed[:, anchor] * exposed[:, index]
        mean = float(products.mean())
        stderr = float(products.std(ddof=1) / math.sqrt(count))
        estimates.append(AutocorrelationEstimate(lag=float(lag), mean=mean, stderr=stderr))
    return estimates


def dump_csv(
    trajectory: NoiseTrajectory, path: Union[str, Path], bath: Optional[BathSpec] = None
) -> Path:
    """
    Write the exposed part of a trajectory as CSV (t, xi).

    Header records carry dt, n, seed and, when given, the bath parameters.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    grid = trajectory.grid
    header = [f"dt={grid.dt:.16e}", f"n={grid.n}", f"seed={trajectory.seed}"]
    if bath is not None:
        header += [
            f"eta={bath.eta:.16e}",
            f"omega_c={bath.omega_c:.16e}",
            f"hbar_beta={bath.hbar_beta:.16e}",
        ]
    times = grid.times()[: grid.exposed]
    data = np.column_stack([times, trajectory.exposed])
    np.savetxt(
        path,
        data,
        delimiter=",",
        fmt="%.16e",
        header="\n".join(header) + "\nt,xi",
        comments="# ",
    )
    logger.info("Wrote noise trajectory (seed %d) to %s", trajectory.seed, path)
    return path
