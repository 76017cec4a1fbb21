"""Unit tests for Lindblad and SLED propagation."""

import math

import numpy as np
import pytest
import torch

from sled_qubit.core.bath import BathRates
from sled_qubit.core.noise import NoiseGrid, NoiseTrajectory
from sled_qubit.core.propagators import (
    DriveSpec,
    EnsemblePlan,
    LindbladModel,
    SledModel,
    StepPlan,
    TrajectorySeries,
    avg_fidelity_over_window,
    default_step,
    drive_value,
    lme_liouvillian,
    lme_steady_state,
    noise_grid_for,
    propagate_lme,
    propagate_lme_batch,
    propagate_sled_ensemble,
    propagate_sled_trajectory,
    sled_liouvillian,
    thermal_state,
)
from sled_qubit.core.qubit_algebra import (
    IDENTITY,
    apply_superop,
    to_bloch,
    trace_annihilation_residual,
)
from sled_qubit.core.steady_state import SteadyParams, steady_bloch_rwa
from sled_qubit.exceptions import ContractError, GridMismatchError


def _rates(gamma: float, n_bar: float, delta_s: float = 0.0) -> BathRates:
    return BathRates(
        gamma=gamma,
        gamma_beta=gamma * (2.0 * n_bar + 1.0),
        Gamma_down=gamma * (n_bar + 1.0),
        Gamma_up=gamma * n_bar,
        delta_s=delta_s,
    )


def _smooth_noise(plan: StepPlan, amplitude: float = 0.05, frequency: float = 0.7) -> NoiseTrajectory:
    """Deterministic 'realization' sampled on the grid a plan requires."""
    grid = noise_grid_for(plan)
    samples = amplitude * np.cos(frequency * grid.times())
    return NoiseTrajectory(grid=grid, samples=samples, seed=0)


class TestDriveSpec:
    """Tests for drive construction."""

    def test_drive_value(self) -> None:
        """Test f(t) sums cosine tones."""
        drive = DriveSpec.pump_probe(1.0, 2.0, 0.1, 3.0, probe_phase=0.0)
        assert drive_value(drive, 0.0) == pytest.approx(1.1)
        assert drive_value(drive, np.array([0.0, 1.0])).shape == (2,)

    def test_rwa_has_no_scalar_field(self) -> None:
        """Test drive_value refuses RWA drives."""
        with pytest.raises(ContractError, match="RWA"):
            drive_value(DriveSpec.monochromatic(1.0, 1.0, rwa=True), 0.0)

    def test_rwa_needs_single_tone(self) -> None:
        """Test an RWA drive must have exactly one tone."""
        with pytest.raises(ValueError, match="exactly one tone"):
            DriveSpec(tones=(), rwa=True)

    def test_probe_retuning(self) -> None:
        """Test with_probe_frequency only moves the second tone."""
        drive = DriveSpec.pump_probe(1.0, 2.0, 0.1, 3.0).with_probe_frequency(2.5)
        assert drive.tones[0].frequency == 2.0
        assert drive.tones[1].frequency == 2.5
        with pytest.raises(ContractError, match="probe"):
            DriveSpec.monochromatic(1.0, 1.0).with_probe_frequency(2.0)


class TestStepPlan:
    """Tests for StepPlan."""

    def test_records(self) -> None:
        """Test step and record counts."""
        plan = StepPlan(dt=0.1, t_final=1.0, record_stride=2)
        assert plan.n_steps == 10
        assert plan.n_records == 6
        assert np.allclose(plan.record_times(), 0.2 * np.arange(6))

    def test_invalid_step(self) -> None:
        """Test non-positive steps are rejected."""
        with pytest.raises(ValueError, match="dt must be positive"):
            StepPlan(dt=0.0, t_final=1.0)

    def test_default_step(self) -> None:
        """Test dt = min(2 pi / (64 w_q), pi / (8 w_c))."""
        assert default_step(1.0) == pytest.approx(2 * math.pi / 64)
        assert default_step(1.0, 50.0) == pytest.approx(math.pi / 400)


class TestGenerators:
    """Tests for the Liouvillians."""

    def test_lme_trace_preserving(self, unit_rates) -> None:
        """Test the LME generator annihilates the trace."""
        model = LindbladModel(1.0, unit_rates, DriveSpec.monochromatic(0.1, 1.0))
        assert trace_annihilation_residual(lme_liouvillian(model, 0.3)) < 1e-14

    def test_sled_trace_preserving(self, unit_bath) -> None:
        """Test the SLED generator annihilates the trace for any noise value."""
        model = SledModel(1.0, unit_bath, DriveSpec.monochromatic(0.1, 1.0))
        assert trace_annihilation_residual(sled_liouvillian(model, 0.3, 2.5)) < 1e-14

    def test_sled_friction_relaxes_toward_ground(self, unit_bath) -> None:
        """Test the SLED generator pulls I/2 toward sigma_z = +1."""
        model = SledModel(1.0, unit_bath)
        derivative = apply_superop(model.static_generator(), IDENTITY / 2)
        dz = (derivative[0, 0] - derivative[1, 1]).real.item()
        assert dz == pytest.approx(2.0 * unit_bath.eta, rel=1e-12)

    def test_sled_rejects_uncoupled_bath(self, unit_bath) -> None:
        """Test SLED needs eta > 0."""
        with pytest.raises(ValueError, match="eta > 0"):
            SledModel(1.0, unit_bath.with_gamma(0.0))

    def test_sled_rejects_rwa(self, unit_bath) -> None:
        """Test SLED is defined for lab-frame drives only."""
        with pytest.raises(ValueError, match="lab-frame"):
            SledModel(1.0, unit_bath, DriveSpec.monochromatic(0.1, 1.0, rwa=True))

    def test_nes_drops_shift(self, unit_rates) -> None:
        """Test include_shift controls the qubit frequency."""
        with_shift = LindbladModel(1.0, unit_rates)
        without = LindbladModel(1.0, unit_rates, include_shift=False)
        assert with_shift.qubit_frequency == pytest.approx(1.0 + unit_rates.delta_s)
        assert without.qubit_frequency == 1.0


class TestLindbladPropagation:
    """Tests for LME propagation."""

    def test_thermal_fixed_point(self, unit_bath, unit_rates, excited_state) -> None:
        """Test an undriven qubit relaxes to z = tanh(hbar beta w_q / 2)."""
        model = LindbladModel(1.0, unit_rates)
        plan = StepPlan.default(1.0, t_final=20.0 / unit_bath.gamma, record_stride=1000)
        series = propagate_lme(model, excited_state, plan)
        assert series.bloch()[-1, 2] == pytest.approx(math.tanh(2.5), abs=1e-6)

    def test_thermal_state(self, unit_rates) -> None:
        """Test thermal_state has z = gamma / gamma_beta."""
        assert to_bloch(thermal_state(unit_rates)).z == pytest.approx(math.tanh(2.5), rel=1e-9)

    def test_steady_state_matches_closed_form(self) -> None:
        """Test the RWA null space against the closed-form steady state."""
        rng = np.random.default_rng(11)
        for _ in range(200):
            gamma = 10 ** rng.uniform(-3, -1)
            n_bar = rng.uniform(0.0, 0.2)
            Omega_d = 10 ** rng.uniform(-3, -1)
            Delta_q = rng.uniform(-0.05, 0.05)
            rates = _rates(gamma, n_bar)
            model = LindbladModel(1.0, rates, DriveSpec.monochromatic(Omega_d, 1.0 - Delta_q, rwa=True))
            numeric = to_bloch(lme_steady_state(model))
            expected = steady_bloch_rwa(SteadyParams.from_rates(rates, Omega_d, Delta_q))
            assert numeric.x == pytest.approx(expected.x, abs=1e-9)
            assert numeric.y == pytest.approx(expected.y, abs=1e-9)
            assert numeric.z == pytest.approx(expected.z, abs=1e-9)

    def test_rwa_propagation_reaches_steady_state(self, unit_rates, excited_state) -> None:
        """Test long RWA propagation converges to the stationary state."""
        drive = DriveSpec.monochromatic(0.02, 1.0 + unit_rates.delta_s, rwa=True)
        model = LindbladModel(1.0, unit_rates, drive)
        plan = StepPlan(dt=1.0, t_final=30.0 / unit_rates.gamma, record_stride=100)
        series = propagate_lme(model, excited_state, plan)
        final = series.bloch()[-1]
        expected = to_bloch(lme_steady_state(model))
        assert np.allclose(final, expected.as_tuple(), atol=1e-6)
        assert series.frame_frequency == drive.frequency

    def test_lab_frame_agrees_with_rwa(self, unit_rates, excited_state) -> None:
        """Test weak lab-frame driving is close to its RWA counterpart."""
        omega_d = 1.0 + unit_rates.delta_s
        plan = StepPlan.default(1.0, t_final=200.0, record_stride=8)
        lab = propagate_lme(
            LindbladModel(1.0, unit_rates, DriveSpec.monochromatic(0.01, omega_d)), excited_state, plan
        )
        rwa = propagate_lme(
            LindbladModel(1.0, unit_rates, DriveSpec.monochromatic(0.01, omega_d, rwa=True)),
            excited_state,
            plan,
        )
        assert np.max(np.abs(lab.bloch(omega_d)[:, 2] - rwa.bloch(omega_d)[:, 2])) < 1e-2

    def test_batch_matches_single(self, unit_rates, ground_state) -> None:
        """Test batched drives reproduce individual propagations."""
        plan = StepPlan(dt=0.05, t_final=5.0, record_stride=10)
        model = LindbladModel(1.0, unit_rates)
        drives = [DriveSpec.pump_probe(0.2, 1.0, 0.02, w) for w in (0.9, 1.1)]
        batch = propagate_lme_batch(model, drives, ground_state, plan)
        for drive, series in zip(drives, batch):
            single = propagate_lme(LindbladModel(1.0, unit_rates, drive), ground_state, plan)
            assert torch.allclose(series.states, single.states, atol=1e-13)

    def test_magnus_second_order(self, unit_rates, ground_state) -> None:
        """Test the error falls by four when the step is halved."""
        model = LindbladModel(1.0, unit_rates, DriveSpec.monochromatic(0.5, 1.0))
        finals = [
            propagate_lme(model, ground_state, StepPlan(dt=dt, t_final=10.0, record_stride=1)).states[-1]
            for dt in (0.05, 0.025, 0.0125)
        ]
        ratio = float((finals[0] - finals[1]).abs().max() / (finals[1] - finals[2]).abs().max())
        assert 3.2 < ratio < 4.8


class TestSledPropagation:
    """Tests for SLED trajectories and ensembles."""

    @pytest.fixture
    def sled_model(self, unit_bath):
        return SledModel(1.0, unit_bath, DriveSpec.monochromatic(0.1, 1.0))

    @pytest.fixture
    def short_plan(self):
        return StepPlan.default(1.0, t_final=1.0, omega_c=50.0, record_stride=4)

    def test_trajectory_preserves_trace(self, sled_model, short_plan, excited_state) -> None:
        """Test a single realization keeps unit trace and Hermiticity."""
        series = propagate_sled_trajectory(sled_model, excited_state, short_plan, _smooth_noise(short_plan))
        traces = torch.diagonal(series.states, dim1=-2, dim2=-1).sum(-1)
        assert torch.allclose(traces, torch.ones_like(traces), atol=1e-12)

    def test_noise_spacing_must_be_half_step(self, sled_model, short_plan, excited_state) -> None:
        """Test a noise grid with the wrong spacing is rejected."""
        grid = NoiseGrid(dt=short_plan.dt, n=1024)
        noise = NoiseTrajectory(grid=grid, samples=np.zeros(1024), seed=0)
        with pytest.raises(GridMismatchError, match="half the step"):
            propagate_sled_trajectory(sled_model, excited_state, short_plan, noise)

    def test_magnus_second_order(self, unit_bath, ground_state) -> None:
        """Test second-order convergence on a fixed smooth noise signal."""
        model = SledModel(1.0, unit_bath, DriveSpec.monochromatic(0.5, 1.0))
        finals = []
        for dt in (0.05, 0.025, 0.0125):
            plan = StepPlan(dt=dt, t_final=10.0)
            finals.append(propagate_sled_trajectory(model, ground_state, plan, _smooth_noise(plan)).states[-1])
        ratio = float((finals[0] - finals[1]).abs().max() / (finals[1] - finals[2]).abs().max())
        assert 3.2 < ratio < 4.8

    def test_single_member_ensemble(self, sled_model, short_plan, excited_state, unit_bath) -> None:
        """Test n_traj = 1 reproduces the trajectory of the base seed."""
        from sled_qubit.core.noise import build_kernel, synthesize

        ensemble = propagate_sled_ensemble(sled_model, excited_state, short_plan, EnsemblePlan(1, base_seed=9))
        kernel = build_kernel(unit_bath, noise_grid_for(short_plan))
        single = propagate_sled_trajectory(sled_model, excited_state, short_plan, synthesize(kernel, 9))
        assert torch.allclose(ensemble.states, single.states, atol=1e-14)
        assert np.all(ensemble.stderr == 0.0)

    def test_worker_count_does_not_change_result(self, sled_model, short_plan, excited_state) -> None:
        """Test the reduction is independent of the thread count."""
        plan = EnsemblePlan(n_traj=70, base_seed=3)
        serial = propagate_sled_ensemble(sled_model, excited_state, short_plan, plan, workers=1)
        threaded = propagate_sled_ensemble(sled_model, excited_state, short_plan, plan, workers=3)
        assert torch.equal(serial.states, threaded.states)
        assert np.array_equal(serial.stderr, threaded.stderr)

    def test_half_split(self, sled_model, short_plan, excited_state) -> None:
        """Test the two half-ensemble means average to the full mean."""
        series = propagate_sled_ensemble(sled_model, excited_state, short_plan, EnsemblePlan(40, 0))
        first, second, err_first, err_second = series.half_split()
        full = series.bloch(series.stats_frequency)
        assert np.allclose(0.5 * (first + second), full, atol=1e-12)
        assert np.all(err_first >= 0.0) and np.all(err_second >= 0.0)


class TestFidelityWindow:
    """Tests for windowed fidelity averages."""

    @pytest.fixture
    def series(self, unit_rates, excited_state):
        model = LindbladModel(1.0, unit_rates, DriveSpec.monochromatic(0.1, 1.0))
        return propagate_lme(model, excited_state, StepPlan(dt=0.1, t_final=5.0))

    def test_self_fidelity(self, series) -> None:
        """Test a series has unit fidelity with itself."""
        assert avg_fidelity_over_window(series, series, (0.0, 5.0)) == pytest.approx(1.0, abs=1e-12)

    def test_empty_window(self, series) -> None:
        """Test a window without records raises."""
        with pytest.raises(ContractError, match="no recorded states"):
            avg_fidelity_over_window(series, series, (6.0, 7.0))

    def test_grid_mismatch(self, series, unit_rates, excited_state) -> None:
        """Test series on different grids are rejected."""
        other = propagate_lme(LindbladModel(1.0, unit_rates), excited_state, StepPlan(dt=0.2, t_final=5.0))
        with pytest.raises(GridMismatchError):
            avg_fidelity_over_window(series, other, (0.0, 5.0))

    def test_series_rejects_bad_trace(self) -> None:
        """Test TrajectorySeries validates recorded states."""
        from sled_qubit.exceptions import InvalidStateError

        states = torch.stack([IDENTITY, IDENTITY])
        with pytest.raises(InvalidStateError, match="trace"):
            TrajectorySeries(times=np.array([0.0, 1.0]), states=states)
