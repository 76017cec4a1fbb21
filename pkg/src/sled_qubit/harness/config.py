"""
Run configuration.

A run is described by one JSON document. Physical quantities are
unit-tagged objects (see :mod:`sled_qubit.harness.units`); counts, flags and
names are plain JSON values. Missing entries fall back to the default
parameter set of a 5 GHz transmon-like qubit in a 48 mK Ohmic bath.
"""

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from sled_qubit.analysis.readout import ResonatorSpec
from sled_qubit.core.bath import BathSpec
from sled_qubit.exceptions import ConfigurationError
from sled_qubit.harness.units import (
    Quantity,
    hbar_beta_from_temperature,
    parse_quantity,
    to_internal,
)

logger = logging.getLogger(__name__)

SOLVER_NAMES = ("lme", "lme-nes", "sled")
DRIVE_POLICIES = ("bare", "shifted")
OUTPUT_FORMATS = ("csv", "json")
PROFILES = {
    "fast": {"n_traj": 500, "horizon_scale": 0.5},
    "paper": {"n_traj": 10_000, "horizon_scale": 1.0},
}


def _freq(value: float, unit: str) -> Quantity:
    return Quantity(value, unit)


def _section(raw: Mapping[str, Any], key: str) -> Mapping[str, Any]:
    value = raw.get(key, {})
    if not isinstance(value, Mapping):
        raise ConfigurationError("expected an object", key)
    return value


def _check_keys(raw: Mapping[str, Any], allowed: Sequence[str], path: str) -> None:
    unknown = sorted(set(raw) - set(allowed))
    if unknown:
        raise ConfigurationError(f"unknown keys {unknown}; allowed: {sorted(allowed)}", path)


def _quantity(
    raw: Mapping[str, Any], key: str, kind: str, default: Optional[Quantity], path: str
) -> Optional[Quantity]:
    if key not in raw or raw[key] is None:
        return default
    return parse_quantity(raw[key], kind, f"{path}.{key}")


def _quantity_list(raw: Mapping[str, Any], key: str, kind: str, path: str) -> List[Quantity]:
    values = raw.get(key, [])
    if not isinstance(values, list):
        raise ConfigurationError("expected a list", f"{path}.{key}")
    return [parse_quantity(v, kind, f"{path}.{key}[{i}]") for i, v in enumerate(values)]


def _number(
    raw: Mapping[str, Any],
    key: str,
    default: Any,
    path: str,
    integer: bool = False,
    minimum: Optional[float] = None,
) -> Any:
    value = raw.get(key, default)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigurationError(f"expected a number, got {value!r}", f"{path}.{key}")
    if integer and int(value) != value:
        raise ConfigurationError(f"expected an integer, got {value!r}", f"{path}.{key}")
    if minimum is not None and value < minimum:
        raise ConfigurationError(f"must be >= {minimum}, got {value}", f"{path}.{key}")
    return int(value) if integer else float(value)


def _numbers(raw: Mapping[str, Any], key: str, default: Sequence[float], path: str) -> List[float]:
    values = raw.get(key, list(default))
    if not isinstance(values, list) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in values
    ):
        raise ConfigurationError("expected a list of numbers", f"{path}.{key}")
    return [float(v) for v in values]


def _emit(quantity: Optional[Quantity]) -> Optional[Dict[str, Any]]:
    if quantity is None:
        return None
    return quantity.to_dict()


@dataclass
class QubitConfig:
    """Bare qubit frequency."""

    omega_q: Quantity = field(default_factory=lambda: _freq(5.0, "GHz"))

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "QubitConfig":
        _check_keys(raw, ["omega_q"], "qubit")
        return cls(omega_q=_quantity(raw, "omega_q", "frequency", cls().omega_q, "qubit"))

    @property
    def omega(self) -> float:
        value = to_internal(self.omega_q)
        if value <= 0:
            raise ConfigurationError("must be positive", "qubit.omega_q")
        return value

    def to_dict(self) -> Dict[str, Any]:
        return {"omega_q": _emit(self.omega_q)}


@dataclass
class BathConfig:
    """
    Ohmic bath: coupling as gamma or eta, cutoff, temperature.

    ``gammas`` lists dissipation rates for sweeps; the single ``gamma`` is used
    by commands that need one bath.
    """

    gamma: Optional[Quantity] = field(default_factory=lambda: _freq(50.0, "MHz"))
    eta: Optional[Quantity] = None
    omega_c: Quantity = field(default_factory=lambda: _freq(250.0, "GHz"))
    temperature: Optional[Quantity] = field(default_factory=lambda: Quantity(48.0, "mK"))
    hbar_beta_omega_q: Optional[Quantity] = None
    gammas: List[Quantity] = field(default_factory=list)

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "BathConfig":
        path = "bath"
        _check_keys(raw, ["gamma", "eta", "omega_c", "temperature", "hbar_beta_omega_q", "gammas"], path)
        defaults = cls()
        if "gamma" in raw and "eta" in raw:
            raise ConfigurationError("give either gamma or eta, not both", path)
        if "temperature" in raw and "hbar_beta_omega_q" in raw:
            raise ConfigurationError("give either temperature or hbar_beta_omega_q, not both", path)
        eta = _quantity(raw, "eta", "dimensionless", None, path)
        beta = _quantity(raw, "hbar_beta_omega_q", "dimensionless", None, path)
        return cls(
            gamma=None if eta is not None else _quantity(raw, "gamma", "frequency", defaults.gamma, path),
            eta=eta,
            omega_c=_quantity(raw, "omega_c", "frequency", defaults.omega_c, path),
            temperature=None if beta is not None else _quantity(raw, "temperature", "temperature", defaults.temperature, path),
            hbar_beta_omega_q=beta,
            gammas=_quantity_list(raw, "gammas", "frequency", path),
        )

    def hbar_beta(self, omega_q: float) -> float:
        if self.hbar_beta_omega_q is not None:
            value = to_internal(self.hbar_beta_omega_q)
            if value <= 0:
                raise ConfigurationError("must be positive", "bath.hbar_beta_omega_q")
            return value / omega_q
        assert self.temperature is not None
        return hbar_beta_from_temperature(to_internal(self.temperature))

    def spec(self, omega_q: float) -> BathSpec:
        """Bath parameters in internal units."""
        omega_c = to_internal(self.omega_c)
        if omega_c <= 0:
            raise ConfigurationError("must be positive", "bath.omega_c")
        hbar_beta = self.hbar_beta(omega_q)
        if self.eta is not None:
            eta = to_internal(self.eta)
            if eta < 0:
                raise ConfigurationError("must be non-negative", "bath.eta")
            return BathSpec(eta=eta, omega_c=omega_c, hbar_beta=hbar_beta, omega_q=omega_q)
        assert self.gamma is not None
        gamma = to_internal(self.gamma)
        if gamma <= 0:
            raise ConfigurationError("must be positive", "bath.gamma")
        return BathSpec.from_gamma(gamma, omega_q, omega_c, hbar_beta)

    def gamma_values(self, omega_q: float) -> List[float]:
        """Sweep rates in rad/s, or the single configured rate."""
        if self.gammas:
            return [to_internal(q) for q in self.gammas]
        return [self.spec(omega_q).gamma]

    def to_dict(self) -> Dict[str, Any]:
        data = {
            "omega_c": _emit(self.omega_c),
            "gammas": [_emit(q) for q in self.gammas],
        }
        if self.eta is not None:
            data["eta"] = _emit(self.eta)
        else:
            data["gamma"] = _emit(self.gamma)
        if self.hbar_beta_omega_q is not None:
            data["hbar_beta_omega_q"] = _emit(self.hbar_beta_omega_q)
        else:
            data["temperature"] = _emit(self.temperature)
        return data


@dataclass
class ProbeGrid:
    """Probe frequencies, either explicit or as a linear range."""

    start: Optional[Quantity] = None
    stop: Optional[Quantity] = None
    points: int = 41
    values: List[Quantity] = field(default_factory=list)

    @classmethod
    def from_dict(cls, raw: Any) -> "ProbeGrid":
        path = "drive.omega_p_grid"
        if isinstance(raw, list):
            return cls(values=[parse_quantity(v, "frequency", f"{path}[{i}]") for i, v in enumerate(raw)])
        if not isinstance(raw, Mapping):
            raise ConfigurationError("expected a list or {start, stop, points}", path)
        _check_keys(raw, ["start", "stop", "points"], path)
        grid = cls(
            start=_quantity(raw, "start", "frequency", None, path),
            stop=_quantity(raw, "stop", "frequency", None, path),
            points=_number(raw, "points", 41, path, integer=True, minimum=2),
        )
        if grid.start is None or grid.stop is None:
            raise ConfigurationError("start and stop are required", path)
        return grid

    def resolve(self, omega_d: float, Omega_d: float) -> np.ndarray:
        """Grid in rad/s; defaults to w_d +- 1.6 Omega_d."""
        if self.values:
            return np.array([to_internal(v) for v in self.values])
        if self.start is None or self.stop is None:
            return np.linspace(omega_d - 1.6 * Omega_d, omega_d + 1.6 * Omega_d, self.points)
        return np.linspace(to_internal(self.start), to_internal(self.stop), self.points)

    def to_dict(self) -> Any:
        if self.values:
            return [_emit(v) for v in self.values]
        return {"start": _emit(self.start), "stop": _emit(self.stop), "points": self.points}


@dataclass
class DriveConfig:
    """Primary drive, probe and pump-probe averaging."""

    Omega_d: Quantity = field(default_factory=lambda: _freq(50.0, "MHz"))
    omega_d_policy: Optional[str] = None  # None: the command default
    Omega_p: Quantity = field(default_factory=lambda: _freq(5.0, "MHz"))
    omega_p_grid: ProbeGrid = field(default_factory=ProbeGrid)
    n_p: int = 20
    rwa: bool = False

    def __post_init__(self) -> None:
        if self.omega_d_policy is not None and self.omega_d_policy not in DRIVE_POLICIES:
            raise ConfigurationError(
                f"must be one of {DRIVE_POLICIES}, got {self.omega_d_policy!r}", "drive.omega_d_policy"
            )

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "DriveConfig":
        path = "drive"
        _check_keys(raw, ["Omega_d", "omega_d_policy", "Omega_p", "omega_p_grid", "n_p", "rwa"], path)
        defaults = cls()
        rwa = raw.get("rwa", False)
        if not isinstance(rwa, bool):
            raise ConfigurationError("expected true or false", f"{path}.rwa")
        return cls(
            Omega_d=_quantity(raw, "Omega_d", "frequency", defaults.Omega_d, path),
            omega_d_policy=raw.get("omega_d_policy", defaults.omega_d_policy),
            Omega_p=_quantity(raw, "Omega_p", "frequency", defaults.Omega_p, path),
            omega_p_grid=ProbeGrid.from_dict(raw["omega_p_grid"]) if "omega_p_grid" in raw else ProbeGrid(),
            n_p=_number(raw, "n_p", defaults.n_p, path, integer=True, minimum=1),
            rwa=rwa,
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "Omega_d": _emit(self.Omega_d),
            "omega_d_policy": self.omega_d_policy,
            "Omega_p": _emit(self.Omega_p),
            "omega_p_grid": self.omega_p_grid.to_dict(),
            "n_p": self.n_p,
            "rwa": self.rwa,
        }


@dataclass
class PlanConfig:
    """
    Integration and ensemble settings.

    Attributes:
        dt_omega_q: Step size in units of 1 / omega_q (default: automatic)
        horizon_decays: Run length in units of 1 / gamma
        n_traj: SLED trajectories per ensemble
        base_seed: Seed of trajectory 0
        record_stride: Keep every k-th state (default: automatic)
        workers: Worker threads
        lags: Noise-check lags in units of the noise spacing
    """

    dt_omega_q: Optional[float] = None
    horizon_decays: float = 10.0
    n_traj: int = 10_000
    base_seed: int = 0
    record_stride: Optional[int] = None
    workers: int = 1
    lags: List[float] = field(default_factory=lambda: [0.0, 1.0, 2.0, 5.0, 10.0])

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "PlanConfig":
        path = "plan"
        _check_keys(
            raw,
            ["dt_omega_q", "horizon_decays", "n_traj", "base_seed", "record_stride", "workers", "lags"],
            path,
        )
        defaults = cls()
        return cls(
            dt_omega_q=_number(raw, "dt_omega_q", None, path, minimum=0.0),
            horizon_decays=_number(raw, "horizon_decays", defaults.horizon_decays, path, minimum=0.0),
            n_traj=_number(raw, "n_traj", defaults.n_traj, path, integer=True, minimum=1),
            base_seed=_number(raw, "base_seed", defaults.base_seed, path, integer=True, minimum=0),
            record_stride=_number(raw, "record_stride", None, path, integer=True, minimum=1),
            workers=_number(raw, "workers", defaults.workers, path, integer=True, minimum=1),
            lags=_numbers(raw, "lags", defaults.lags, path),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "dt_omega_q": self.dt_omega_q,
            "horizon_decays": self.horizon_decays,
            "n_traj": self.n_traj,
            "base_seed": self.base_seed,
            "record_stride": self.record_stride,
            "workers": self.workers,
            "lags": list(self.lags),
        }


@dataclass
class SweepConfig:
    """Grids of the steady-state maps (ratios to omega_q and Omega_d)."""

    gamma_ratios: List[float] = field(
        default_factory=lambda: list(np.round(np.logspace(-4, np.log10(0.2), 25), 12))
    )
    delta_ratios: List[float] = field(default_factory=lambda: list(np.linspace(-10.0, 10.0, 41)))

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "SweepConfig":
        path = "sweep"
        _check_keys(raw, ["gamma_ratios", "delta_ratios"], path)
        defaults = cls()
        return cls(
            gamma_ratios=_numbers(raw, "gamma_ratios", defaults.gamma_ratios, path),
            delta_ratios=_numbers(raw, "delta_ratios", defaults.delta_ratios, path),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {"gamma_ratios": list(self.gamma_ratios), "delta_ratios": list(self.delta_ratios)}


@dataclass
class ReadoutConfig:
    """Readout resonator and the sigma_z values to read out."""

    omega_r: Quantity = field(default_factory=lambda: _freq(7.0, "GHz"))
    kappa: Quantity = field(default_factory=lambda: _freq(250.0, "kHz"))
    chi: Quantity = field(default_factory=lambda: _freq(-5.0, "MHz"))
    Omega_m: Quantity = field(default_factory=lambda: _freq(250.0, "kHz"))
    omega_m: Optional[Quantity] = None
    g: Quantity = field(default_factory=lambda: _freq(100.0, "MHz"))
    sigma_z_bars: List[float] = field(default_factory=lambda: list(np.linspace(-1.0, 1.0, 21)))
    source: Optional[str] = None

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "ReadoutConfig":
        path = "readout"
        _check_keys(raw, ["omega_r", "kappa", "chi", "Omega_m", "omega_m", "g", "sigma_z_bars", "source"], path)
        defaults = cls()
        source = raw.get("source")
        if source is not None and not isinstance(source, str):
            raise ConfigurationError("expected a file path", f"{path}.source")
        return cls(
            omega_r=_quantity(raw, "omega_r", "frequency", defaults.omega_r, path),
            kappa=_quantity(raw, "kappa", "frequency", defaults.kappa, path),
            chi=_quantity(raw, "chi", "frequency", defaults.chi, path),
            Omega_m=_quantity(raw, "Omega_m", "frequency", defaults.Omega_m, path),
            omega_m=_quantity(raw, "omega_m", "frequency", None, path),
            g=_quantity(raw, "g", "frequency", defaults.g, path),
            sigma_z_bars=_numbers(raw, "sigma_z_bars", defaults.sigma_z_bars, path),
            source=source,
        )

    def spec(self, omega_q: float) -> ResonatorSpec:
        omega_r = to_internal(self.omega_r)
        kappa = to_internal(self.kappa)
        if kappa <= 0:
            raise ConfigurationError("must be positive", "readout.kappa")
        chi = to_internal(self.chi)
        return ResonatorSpec(
            omega_r=omega_r,
            kappa=kappa,
            chi=chi,
            Omega_m=to_internal(self.Omega_m),
            omega_m=omega_r if self.omega_m is None else to_internal(self.omega_m),
            metadata={
                "g": to_internal(self.g),
                "Delta_qr": omega_q - omega_r,
                "dressed_omega_q": omega_q + chi,
            },
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "omega_r": _emit(self.omega_r),
            "kappa": _emit(self.kappa),
            "chi": _emit(self.chi),
            "Omega_m": _emit(self.Omega_m),
            "omega_m": _emit(self.omega_m),
            "g": _emit(self.g),
            "sigma_z_bars": list(self.sigma_z_bars),
            "source": self.source,
        }


@dataclass
class OutputConfig:
    """Output directory and file formats."""

    directory: str = "runs"
    formats: Tuple[str, ...] = OUTPUT_FORMATS

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "OutputConfig":
        path = "output"
        _check_keys(raw, ["directory", "formats"], path)
        formats = tuple(raw.get("formats", OUTPUT_FORMATS))
        bad = [f for f in formats if f not in OUTPUT_FORMATS]
        if bad or "csv" not in formats:
            raise ConfigurationError(f"formats must include 'csv' and be drawn from {OUTPUT_FORMATS}", f"{path}.formats")
        return cls(directory=str(raw.get("directory", cls.directory)), formats=formats)

    def to_dict(self) -> Dict[str, Any]:
        return {"directory": self.directory, "formats": list(self.formats)}


@dataclass
class RunConfig:
    """
    Complete run configuration.

    Example:
        >>> config = RunConfig.from_dict({"bath": {"gamma": {"value": 2.5, "unit": "MHz"}}})
        >>> round(config.bath_spec().eta, 6)
        0.00025
    """

    qubit: QubitConfig = field(default_factory=QubitConfig)
    bath: BathConfig = field(default_factory=BathConfig)
    drive: DriveConfig = field(default_factory=DriveConfig)
    solvers: Tuple[str, ...] = SOLVER_NAMES
    plan: PlanConfig = field(default_factory=PlanConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    readout: ReadoutConfig = field(default_factory=ReadoutConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    profile: Optional[str] = None

    def __post_init__(self) -> None:
        bad = [s for s in self.solvers if s not in SOLVER_NAMES]
        if bad or not self.solvers:
            raise ConfigurationError(f"solvers must be a non-empty subset of {SOLVER_NAMES}, got {list(self.solvers)}", "solvers")

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "RunConfig":
        if not isinstance(raw, Mapping):
            raise ConfigurationError("configuration must be a JSON object", "<root>")
        _check_keys(raw, ["qubit", "bath", "drive", "solvers", "plan", "sweep", "readout", "output"], "<root>")
        solvers = raw.get("solvers", list(SOLVER_NAMES))
        if not isinstance(solvers, list):
            raise ConfigurationError("expected a list of solver names", "solvers")
        return cls(
            qubit=QubitConfig.from_dict(_section(raw, "qubit")),
            bath=BathConfig.from_dict(_section(raw, "bath")),
            drive=DriveConfig.from_dict(_section(raw, "drive")),
            solvers=tuple(str(s) for s in solvers),
            plan=PlanConfig.from_dict(_section(raw, "plan")),
            sweep=SweepConfig.from_dict(_section(raw, "sweep")),
            readout=ReadoutConfig.from_dict(_section(raw, "readout")),
            output=OutputConfig.from_dict(_section(raw, "output")),
        )

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "RunConfig":
        """
        Load a configuration document.

        Raises:
            ConfigurationError: If the file is missing, not JSON or invalid
        """
        path = Path(path)
        if not path.exists():
            raise ConfigurationError(f"configuration file not found: {path}", "--config")
        try:
            with open(path, "r", encoding="utf-8") as f:
                raw = json.load(f)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"invalid JSON: {exc}", "--config") from exc
        return cls.from_dict(raw)

    def with_profile(self, name: str) -> "RunConfig":
        """Apply a desk-scale preset ("fast" or "paper")."""
        if name not in PROFILES:
            raise ConfigurationError(f"unknown profile '{name}', expected one of {sorted(PROFILES)}", "--profile")
        preset = PROFILES[name]
        plan = replace(
            self.plan,
            n_traj=int(preset["n_traj"]),
            horizon_decays=self.plan.horizon_decays * float(preset["horizon_scale"]),
        )
        drive = replace(self.drive, n_p=max(1, int(round(self.drive.n_p * float(preset["horizon_scale"])))))
        logger.info("Applied profile '%s' (n_traj=%d)", name, plan.n_traj)
        return replace(self, plan=plan, drive=drive, profile=name)

    def with_overrides(self, seed: Optional[int] = None, workers: Optional[int] = None) -> "RunConfig":
        plan = self.plan
        if seed is not None:
            plan = replace(plan, base_seed=int(seed))
        if workers is not None:
            if workers < 1:
                raise ConfigurationError("must be >= 1", "--workers")
            plan = replace(plan, workers=int(workers))
        return replace(self, plan=plan)

    @property
    def omega_q(self) -> float:
        return self.qubit.omega

    def bath_spec(self) -> BathSpec:
        return self.bath.spec(self.omega_q)

    def resonator(self) -> ResonatorSpec:
        return self.readout.spec(self.omega_q)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "qubit": self.qubit.to_dict(),
            "bath": self.bath.to_dict(),
            "drive": self.drive.to_dict(),
            "solvers": list(self.solvers),
            "plan": self.plan.to_dict(),
            "sweep": self.sweep.to_dict(),
            "readout": self.readout.to_dict(),
            "output": self.output.to_dict(),
        }
