"""Run driver: diagnostics files, checkpointing, restart exactness, failure paths."""

import json
import math
import struct

import numpy as np
import pytest

from slipflow.model import ChannelConfig, ModeProblem, SlipPair, ValidationError
from slipflow.modes import build_packet, packet_streamfunction_profile
from slipflow.spectrum import assemble, solve_spectrum
from slipflow.sim import (
    SimConfig,
    SimulationBlowupError,
    check_boundary_conditions,
    diagnostics_to_csv,
    energy_to_csv,
    field_from_mode_profile,
    read_checkpoint,
    run,
    write_checkpoint,
)
from slipflow.sim.run import CHECKPOINT_HEADER_BYTES, CHECKPOINT_MAGIC
from slipflow.sim.field import SpectralField2D, cgl_nodes, cheb_coeffs_from_values


def _mode_field(channel, basis, k=1.0, M=16, P=56, amplitude=1.0):
    problem = ModeProblem(k=k, mu=channel.mu, slip=channel.slip)
    spectrum = solve_spectrum(assemble(problem, basis))
    profile = packet_streamfunction_profile(build_packet(spectrum, count=1))
    n_mode = int(round(k * channel.L))
    field = field_from_mode_profile(profile, n_mode=n_mode, M=M, P=P,
                                    L=channel.L, kind="sin")
    return field * amplitude, spectrum.lambda1


@pytest.fixture(scope="module")
def channel():
    return ChannelConfig(L=1.0, mu=0.5, slip=SlipPair(1.0, 1.0))


@pytest.fixture(scope="module")
def growing_run(channel, basis48):
    field, lam = _mode_field(channel, basis48, M=8, P=56, amplitude=1.0e-3)
    cfg = SimConfig(channel=channel, M=8, P=56, dt=2.0e-3, t_end=0.5,
                    linearized=True, diagnostics_stride=10)
    return run(field, cfg), cfg, lam


class TestDiagnostics:
    def test_time_axis_and_lengths(self, growing_run):
        result, cfg, _ = growing_run
        diag = result.diagnostics
        n_records = cfg.n_steps // cfg.diagnostics_stride + 1
        assert diag.times.shape == (n_records,)
        assert diag.times[0] == 0.0
        assert diag.times[-1] == pytest.approx(cfg.n_steps * cfg.dt, rel=1.0e-12)
        for col in (diag.l2_norm, diag.h1_norm, diag.h2_norm,
                    diag.boundary_production, diag.dissipation,
                    diag.growth_rate_estimate, diag.nonlinear_flux,
                    diag.energy_rate, diag.energy_residual):
            assert col.shape == diag.times.shape

    def test_growth_rate_estimate_tracks_eigenvalue(self, growing_run):
        result, _, lam = growing_run
        rates = result.diagnostics.growth_rate_estimate
        assert rates[-1] == pytest.approx(lam, rel=1.0e-3)

    def test_linearized_run_has_zero_nonlinear_flux(self, growing_run):
        result, _, _ = growing_run
        flux = result.diagnostics.nonlinear_flux
        scale = result.diagnostics.dissipation.max()
        assert np.abs(flux).max() <= 1.0e-10 * scale

    def test_diagnostics_csv_round_trips(self, growing_run, tmp_path):
        result, _, _ = growing_run
        path = diagnostics_to_csv(result.diagnostics, tmp_path / "diag.csv")
        lines = path.read_text().splitlines()
        assert lines[0] == "t,l2,h1,h2,boundary_production,dissipation,growth_rate"
        arr = np.loadtxt(path, delimiter=",", skiprows=1)
        assert arr.shape == (result.diagnostics.times.size, 7)
        np.testing.assert_array_equal(arr[:, 0], result.diagnostics.times)
        np.testing.assert_array_equal(arr[:, 1], result.diagnostics.l2_norm)

    def test_energy_csv_round_trips(self, growing_run, tmp_path):
        result, _, _ = growing_run
        path = energy_to_csv(result.diagnostics, tmp_path / "energy.csv")
        lines = path.read_text().splitlines()
        assert lines[0] == ("t,dEdt,boundary_production,dissipation,"
                            "nonlinear_flux,residual")
        arr = np.loadtxt(path, delimiter=",", skiprows=1)
        assert arr.shape == (result.diagnostics.times.size, 6)
        np.testing.assert_array_equal(arr[:, 1], result.diagnostics.energy_rate)


class TestCheckpointing:
    def test_checkpoints_written_at_stride_and_final_step(
        self, channel, basis48, tmp_path
    ):
        field, _ = _mode_field(channel, basis48, M=8, P=56, amplitude=1.0e-3)
        cfg = SimConfig(channel=channel, M=8, P=56, dt=2.0e-3, t_end=0.05,
                        linearized=True, diagnostics_stride=5)
        result = run(field, cfg, out_dir=tmp_path, checkpoint_stride=10)
        names = [p.name for p in result.checkpoints]
        assert names == ["checkpoint_00000010.bin", "checkpoint_00000020.bin",
                         "checkpoint_00000025.bin"]
        assert all(p.exists() for p in result.checkpoints)

    def test_restart_is_bit_exact(self, channel, basis48, tmp_path):
        field, _ = _mode_field(channel, basis48, M=8, P=56, amplitude=1.0e-3)
        cfg = SimConfig(channel=channel, M=8, P=56, dt=2.0e-3, t_end=0.1,
                        linearized=True, diagnostics_stride=10)
        reference = run(field, cfg, out_dir=tmp_path, checkpoint_stride=20)
        mid = tmp_path / "checkpoint_00000020.bin"
        stepper = read_checkpoint(mid, cfg)
        assert stepper.t == pytest.approx(20 * cfg.dt, rel=1.0e-12)
        for _ in range(cfg.n_steps - 20):
            stepper.step()
        resumed = stepper.streamfunction()
        assert np.array_equal(resumed.coefficients,
                              reference.final_state.coefficients)

    def test_write_read_checkpoint_preserves_state(self, channel, basis48, tmp_path):
        field, _ = _mode_field(channel, basis48, M=8, P=56, amplitude=1.0e-3)
        cfg = SimConfig(channel=channel, M=8, P=56, dt=2.0e-3, t_end=0.1)
        from slipflow.sim import ChannelStepper

        stepper = ChannelStepper(cfg, field)
        stepper.step()
        stepper.step()
        path = write_checkpoint(tmp_path / "state.bin", stepper)
        clone = read_checkpoint(path, cfg)
        assert clone.t == stepper.t
        assert np.array_equal(clone.streamfunction().coefficients,
                              stepper.streamfunction().coefficients)

    def test_read_checkpoint_rejects_garbage(self, channel, tmp_path):
        cfg = SimConfig(channel=channel, M=8, P=56)
        bad = tmp_path / "junk.bin"
        bad.write_bytes(b"NOTACKPT" + b"\x00" * 80)
        with pytest.raises(ValidationError, match="not a checkpoint"):
            read_checkpoint(bad, cfg)

    def test_read_checkpoint_rejects_truncated_body(self, channel, tmp_path):
        cfg = SimConfig(channel=channel, M=8, P=56)
        header = CHECKPOINT_MAGIC + struct.pack(
            "<QQQddddd", 1, 8, 56, 1.0, 0.5, 1.0, 1.0, 0.0
        )
        assert len(header) == CHECKPOINT_HEADER_BYTES
        short = tmp_path / "short.bin"
        short.write_bytes(header + b"\x00" * 64)
        with pytest.raises(ValidationError, match="truncated"):
            read_checkpoint(short, cfg)

    def test_read_checkpoint_rejects_mismatched_config(
        self, channel, basis48, tmp_path
    ):
        field, _ = _mode_field(channel, basis48, M=8, P=56, amplitude=1.0e-3)
        cfg = SimConfig(channel=channel, M=8, P=56, dt=2.0e-3, t_end=0.1)
        from slipflow.sim import ChannelStepper

        path = write_checkpoint(tmp_path / "s.bin", ChannelStepper(cfg, field))
        other = ChannelConfig(L=1.0, mu=0.25, slip=channel.slip)
        with pytest.raises(ValidationError, match="differs"):
            read_checkpoint(path, SimConfig(channel=other, M=8, P=56))


class TestFailurePaths:
    def test_boundary_check_rejects_incompatible_initial_data(self, channel):
        P = 56
        x2 = cgl_nodes(P)
        rows = np.zeros((9, P), dtype=complex)
        rows[1] = -0.5j * (1.0 - x2**2)
        bad = SpectralField2D(cheb_coeffs_from_values(rows, axis=1), 1.0)
        cfg = SimConfig(channel=channel, M=8, P=P, dt=1.0e-3, t_end=0.1)
        with pytest.raises(ValidationError):
            check_boundary_conditions(bad, cfg)
        with pytest.raises(ValidationError):
            run(bad, cfg)

    def test_dt_above_stability_bound_is_rejected(self, basis48):
        channel = ChannelConfig(L=1.0, mu=0.1, slip=SlipPair(1.0, 1.0))
        field, _ = _mode_field(channel, basis48, amplitude=5.0)
        cfg = SimConfig(channel=channel, M=16, P=56, dt=1.0e-3, t_end=1.0,
                        linearized=True)
        with pytest.raises(ValidationError, match="stability bound"):
            run(field, cfg)

    def test_midrun_blowup_writes_failure_manifest(self, basis48, tmp_path):
        # A linearized run deep in the unstable regime grows like
        # exp(8.53 t); starting just inside the advective stability bound
        # it must cross CFL 1 mid-run, deterministically.
        channel = ChannelConfig(L=1.0, mu=0.1, slip=SlipPair(1.0, 1.0))
        field, lam = _mode_field(channel, basis48, amplitude=1.0)
        cfg = SimConfig(channel=channel, M=16, P=56, dt=1.0e-3, t_end=1.0,
                        linearized=True, diagnostics_stride=10)
        with pytest.raises(SimulationBlowupError, match="CFL"):
            run(field, cfg, out_dir=tmp_path)
        manifest = json.loads((tmp_path / "failure_manifest.json").read_text())
        assert manifest["status"] == "failed"
        assert manifest["error"].startswith("SimulationBlowupError")
        assert 0.0 < manifest["t_reached"] < cfg.t_end
        assert manifest["steps_completed"] == round(manifest["t_reached"] / cfg.dt)
        # the crossing time is set by the exponential growth rate
        expected = math.log(1.0 / 0.2) / lam
        assert manifest["t_reached"] == pytest.approx(expected, abs=0.1)
        truncated = (tmp_path / "diagnostics_truncated.csv").read_text().splitlines()
        assert truncated[0].startswith("t,")
        assert len(truncated) > 2

    def test_failed_run_without_out_dir_writes_nothing(self, basis48, tmp_path,
                                                       monkeypatch):
        channel = ChannelConfig(L=1.0, mu=0.1, slip=SlipPair(1.0, 1.0))
        field, _ = _mode_field(channel, basis48, amplitude=1.0)
        cfg = SimConfig(channel=channel, M=16, P=56, dt=1.0e-3, t_end=1.0,
                        linearized=True, diagnostics_stride=10)
        monkeypatch.chdir(tmp_path)
        with pytest.raises(SimulationBlowupError):
            run(field, cfg)
        assert list(tmp_path.iterdir()) == []
