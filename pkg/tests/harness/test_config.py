"""Tests for run configuration."""

import json
import math

import numpy as np
import pytest

from sled_qubit.exceptions import ConfigurationError, UnitError
from sled_qubit.harness.config import (
    PROFILES,
    DriveConfig,
    OutputConfig,
    ProbeGrid,
    RunConfig,
    SweepConfig,
)
from sled_qubit.harness.units import Quantity


def _q(value, unit="rad_per_s"):
    return {"value": value, "unit": unit}


class TestDefaults:
    """Tests for the built-in parameter set."""

    def test_qubit_and_bath(self) -> None:
        """Test the default qubit and bath in internal units."""
        config = RunConfig()
        assert config.omega_q == pytest.approx(2 * math.pi * 5e9)
        bath = config.bath_spec()
        assert bath.eta == pytest.approx(5e-3, rel=1e-12)
        assert bath.gamma == pytest.approx(2 * math.pi * 50e6)
        assert bath.hbar_beta * bath.omega_q == pytest.approx(5.0, abs=1e-2)

    def test_resonator(self) -> None:
        """Test the default resonator is driven on resonance."""
        config = RunConfig()
        resonator = config.resonator()
        assert resonator.omega_m == resonator.omega_r
        assert resonator.chi == pytest.approx(-2 * math.pi * 5e6)
        assert resonator.metadata["Delta_qr"] == pytest.approx(-2 * math.pi * 2e9)

    def test_sweep_grids(self) -> None:
        """Test the default gamma and detuning grids."""
        sweep = SweepConfig()
        assert len(sweep.gamma_ratios) == 25
        assert sweep.gamma_ratios[0] == pytest.approx(1e-4)
        assert sweep.gamma_ratios[-1] == pytest.approx(0.2)
        assert len(sweep.delta_ratios) == 41

    def test_solvers(self) -> None:
        """Test all three solvers run by default."""
        assert RunConfig().solvers == ("lme", "lme-nes", "sled")


class TestFromDict:
    """Tests for parsing configuration documents."""

    def test_dimensionless_bath(self) -> None:
        """Test eta and hbar beta w_q given directly."""
        config = RunConfig.from_dict(
            {
                "qubit": {"omega_q": _q(1.0)},
                "bath": {"eta": _q(0.01, "dimensionless"), "omega_c": _q(50.0), "hbar_beta_omega_q": _q(5.0, "dimensionless")},
            }
        )
        bath = config.bath_spec()
        assert bath.eta == 0.01
        assert bath.hbar_beta == 5.0
        assert bath.gamma == pytest.approx(0.02)

    def test_unit_error_path(self) -> None:
        """Test a bad unit reports the offending field."""
        with pytest.raises(UnitError) as excinfo:
            RunConfig.from_dict({"bath": {"gamma": _q(1.0, "Hz")}})
        assert excinfo.value.field_path == "bath.gamma"

    def test_gamma_and_eta(self) -> None:
        """Test gamma and eta are mutually exclusive."""
        with pytest.raises(ConfigurationError, match="either gamma or eta"):
            RunConfig.from_dict({"bath": {"gamma": _q(1.0), "eta": _q(0.1, "dimensionless")}})

    def test_unknown_root_key(self) -> None:
        """Test unknown top-level keys are rejected."""
        with pytest.raises(ConfigurationError) as excinfo:
            RunConfig.from_dict({"qubits": {}})
        assert excinfo.value.field_path == "<root>"

    def test_unknown_solver(self) -> None:
        """Test solver names are validated."""
        with pytest.raises(ConfigurationError, match="solvers"):
            RunConfig.from_dict({"solvers": ["lme", "rk4"]})

    def test_plan_bounds(self) -> None:
        """Test integer and minimum checks of the plan section."""
        with pytest.raises(ConfigurationError, match="plan.n_traj"):
            RunConfig.from_dict({"plan": {"n_traj": 0}})
        with pytest.raises(ConfigurationError, match="plan.workers"):
            RunConfig.from_dict({"plan": {"workers": 1.5}})

    def test_rwa_flag(self) -> None:
        """Test drive.rwa must be a boolean."""
        with pytest.raises(ConfigurationError, match="drive.rwa"):
            RunConfig.from_dict({"drive": {"rwa": "yes"}})

    def test_drive_policy(self) -> None:
        """Test the drive-frequency policy is validated."""
        with pytest.raises(ConfigurationError, match="omega_d_policy"):
            DriveConfig(omega_d_policy="detuned")
        assert DriveConfig().omega_d_policy is None
        assert DriveConfig.from_dict({"omega_d_policy": "bare"}).omega_d_policy == "bare"
        assert DriveConfig.from_dict(DriveConfig().to_dict()).omega_d_policy is None

    def test_output_formats(self) -> None:
        """Test csv is mandatory and only known formats are accepted."""
        assert OutputConfig.from_dict({"formats": ["csv"]}).formats == ("csv",)
        with pytest.raises(ConfigurationError, match="output.formats"):
            OutputConfig.from_dict({"formats": ["json"]})

    def test_round_trip(self) -> None:
        """Test to_dict feeds back into from_dict."""
        config = RunConfig.from_dict({"bath": {"gammas": [_q(10.0, "MHz"), _q(20.0, "MHz")]}, "solvers": ["lme"]})
        again = RunConfig.from_dict(config.to_dict())
        assert again.bath.gamma_values(again.omega_q) == pytest.approx(config.bath.gamma_values(config.omega_q))
        assert again.solvers == ("lme",)
        assert again.bath_spec() == config.bath_spec()


class TestProbeGrid:
    """Tests for probe-frequency grids."""

    def test_default(self) -> None:
        """Test the default grid spans w_d +- 1.6 Omega_d."""
        grid = ProbeGrid().resolve(10.0, 1.0)
        assert grid.size == 41
        assert grid[0] == pytest.approx(8.4)
        assert grid[-1] == pytest.approx(11.6)

    def test_range(self) -> None:
        """Test start, stop and points."""
        grid = ProbeGrid.from_dict({"start": _q(1.0), "stop": _q(2.0), "points": 11}).resolve(0.0, 1.0)
        assert np.allclose(grid, np.linspace(1.0, 2.0, 11))

    def test_explicit_values(self) -> None:
        """Test an explicit list of frequencies."""
        grid = ProbeGrid.from_dict([_q(1.0, "GHz"), _q(2.0, "GHz")]).resolve(0.0, 1.0)
        assert grid.tolist() == pytest.approx([2 * math.pi * 1e9, 2 * math.pi * 2e9])

    def test_missing_stop(self) -> None:
        """Test a range needs both ends."""
        with pytest.raises(ConfigurationError, match="start and stop"):
            ProbeGrid.from_dict({"start": _q(1.0)})


class TestFile:
    """Tests for loading configuration files."""

    def test_missing_file(self, tmp_path) -> None:
        """Test a missing file is a configuration error."""
        with pytest.raises(ConfigurationError, match="--config"):
            RunConfig.from_file(tmp_path / "absent.json")

    def test_invalid_json(self, tmp_path) -> None:
        """Test malformed JSON is a configuration error."""
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ConfigurationError, match="invalid JSON"):
            RunConfig.from_file(path)

    def test_load(self, tmp_path) -> None:
        """Test a document on disk."""
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"plan": {"n_traj": 64, "base_seed": 7}}))
        config = RunConfig.from_file(path)
        assert config.plan.n_traj == 64
        assert config.plan.base_seed == 7


class TestProfilesAndOverrides:
    """Tests for presets and CLI overrides."""

    def test_fast_profile(self) -> None:
        """Test the fast preset shrinks the ensemble and halves horizons."""
        config = RunConfig().with_profile("fast")
        assert config.plan.n_traj == PROFILES["fast"]["n_traj"] == 500
        assert config.plan.horizon_decays == pytest.approx(5.0)
        assert config.drive.n_p == 10
        assert config.profile == "fast"

    def test_paper_profile(self) -> None:
        """Test the reference-scale preset."""
        config = RunConfig().with_profile("paper")
        assert config.plan.n_traj == 10_000
        assert config.plan.horizon_decays == pytest.approx(10.0)

    def test_unknown_profile(self) -> None:
        """Test unknown presets are rejected."""
        with pytest.raises(ConfigurationError, match="--profile"):
            RunConfig().with_profile("huge")

    def test_overrides(self) -> None:
        """Test seed and worker overrides."""
        config = RunConfig().with_overrides(seed=11, workers=4)
        assert config.plan.base_seed == 11
        assert config.plan.workers == 4
        with pytest.raises(ConfigurationError, match="--workers"):
            RunConfig().with_overrides(workers=0)

    def test_quantity_serialization(self) -> None:
        """Test quantities keep their original unit in to_dict."""
        data = RunConfig().to_dict()
        assert data["qubit"]["omega_q"] == Quantity(5.0, "GHz").to_dict()
        assert data["bath"]["temperature"]["unit"] == "mK"
