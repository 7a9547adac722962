"""Command line interface: exit codes, outputs, config resolution, determinism."""

import json
import subprocess
import sys
from types import SimpleNamespace

import numpy as np
import pytest

from slipflow.cli import main
from slipflow.critical import mu_c_global
from slipflow.model import SlipPair


def run_cli(*args):
    return main([str(a) for a in args])


def read_manifest(out):
    return json.loads((out / "run_manifest.json").read_text())


class TestCritical:
    def test_writes_curve_and_global_threshold(self, tmp_path):
        rc = run_cli("--out", tmp_path, "critical", "--k", "0.5", "4", "--points", "7")
        assert rc == 0
        lines = (tmp_path / "critical.csv").read_text().splitlines()
        assert lines[0] == "k,mu_c"
        assert len(lines) == 9  # header + 7 samples + footer
        footer = lines[-1]
        assert footer.startswith("# mu_c_global = ")
        assert float(footer.split("=")[1]) == mu_c_global(SlipPair(1.0, 1.0))
        ks = [float(row.split(",")[0]) for row in lines[1:8]]
        assert ks[0] == 0.5 and ks[-1] == 4.0
        manifest = read_manifest(tmp_path)
        assert manifest["command"] == "critical"
        assert manifest["outputs"] == ["critical.csv"]
        assert len(manifest["config_digest"]) == 64
        assert int(manifest["config_digest"], 16) >= 0

    def test_reruns_are_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert run_cli("--out", out, "critical", "--k", "0.5", "4",
                           "--points", "7") == 0
        assert (a / "critical.csv").read_bytes() == (b / "critical.csv").read_bytes()
        assert (a / "run_manifest.json").read_bytes() == \
            (b / "run_manifest.json").read_bytes()


class TestSpectrum:
    def test_matches_oracle_and_reports(self, tmp_path):
        rc = run_cli("--out", tmp_path, "spectrum", "--k", "1.0", "--mu", "0.5")
        assert rc == 0
        lines = (tmp_path / "spectrum.csv").read_text().splitlines()
        assert lines[0] == "n,lambda"
        first = lines[1].split(",")
        assert first[0] == "1"
        assert float(first[1]) > 0.0
        report = json.loads((tmp_path / "spectrum_report.json").read_text())
        assert report["positive_count_galerkin"] == report["positive_count_oracle"]
        assert report["positive_count_galerkin"] == 1
        assert report["max_rel_mismatch"] < 1.0e-8

    def test_oracle_mismatch_fails_the_run(self, tmp_path, monkeypatch):
        import slipflow.spectrum

        monkeypatch.setattr(
            slipflow.spectrum,
            "determinant_roots",
            lambda prob: SimpleNamespace(roots=np.array([])),
        )
        rc = run_cli("--out", tmp_path, "spectrum", "--k", "1.0", "--mu", "0.5")
        assert rc == 1
        report = json.loads((tmp_path / "spectrum_report.json").read_text())
        assert report["positive_count_galerkin"] == 1
        assert report["positive_count_oracle"] == 0


class TestDispersion:
    def test_lattice_table(self, tmp_path):
        rc = run_cli("--out", tmp_path, "dispersion", "--mu", "0.5", "--n-max", "4")
        assert rc == 0
        lines = (tmp_path / "dispersion.csv").read_text().splitlines()
        assert lines[0] == "k,lambda1,mu_c"
        assert len(lines) == 5
        rows = [list(map(float, r.split(","))) for r in lines[1:]]
        assert [r[0] for r in rows] == [1.0, 2.0, 3.0, 4.0]
        # growth at k = 1 and decay at k = 4 at mu = 0.5
        assert rows[0][1] > 0.0 > rows[3][1]


class TestModes:
    def test_grid_samples_and_packet_report(self, tmp_path):
        rc = run_cli("--out", tmp_path, "modes", "--mu", "0.5",
                     "--grid", "16", "17", "--delta", "1e-6")
        assert rc == 0
        lines = (tmp_path / "modes.csv").read_text().splitlines()
        assert lines[0] == "x1,x2,u1,u2,q"
        assert len(lines) == 1 + 16 * 17
        packet = json.loads((tmp_path / "packet.json").read_text())
        assert packet["k"] == 1.0
        assert len(packet["lambdas"]) == 1
        assert packet["lambdas"][0] > 0.0
        assert packet["delta"] == 1.0e-6
        assert packet["T_delta"] > 0.0

    def test_stable_channel_has_no_packet(self, tmp_path, capsys):
        rc = run_cli("--out", tmp_path, "modes", "--mu", "2.0")
        assert rc == 2
        assert "error:" in capsys.readouterr().err


class TestSimulate:
    def test_smoke_run_writes_diagnostics(self, tmp_path):
        rc = run_cli("--out", tmp_path, "simulate", "--mu", "0.5",
                     "--amplitude", "1e-3", "--m", "8", "--p", "56",
                     "--dt", "2e-3", "--t-end", "0.05", "--stride", "5",
                     "--linearized")
        assert rc == 0
        diag = (tmp_path / "diagnostics.csv").read_text().splitlines()
        assert diag[0].startswith("t,l2,h1,h2")
        assert len(diag) == 7  # header + records at steps 0,5,10,15,20,25
        assert (tmp_path / "energy.csv").exists()
        assert (tmp_path / "checkpoint_00000025.bin").exists()
        manifest = read_manifest(tmp_path)
        assert "diagnostics.csv" in manifest["outputs"]

    def test_blowup_maps_to_exit_code_one(self, tmp_path, capsys):
        rc = run_cli("--out", tmp_path, "simulate", "--mu", "0.1",
                     "--amplitude", "0.5", "--m", "16", "--p", "56",
                     "--dt", "1e-3", "--t-end", "1.0", "--stride", "10",
                     "--linearized")
        assert rc == 1
        assert "run failed:" in capsys.readouterr().err
        assert (tmp_path / "failure_manifest.json").exists()


class TestVerify:
    def test_full_battery_via_cli(self, tmp_path, capsys):
        rc = run_cli("--out", tmp_path, "verify")
        assert rc == 0
        out = capsys.readouterr().out
        assert out.count("PASS") == 14
        assert "FAIL" not in out
        report = json.loads((tmp_path / "verify_report.json").read_text())
        assert report["all_passed"] is True
        assert len(report["checks"]) == 14


class TestExperimentCommand:
    def test_stable_regime_reports_and_exits_cleanly(self, tmp_path, capsys):
        rc = run_cli("--out", tmp_path, "experiment", "--mu", "2.0")
        assert rc == 0
        assert "stable" in capsys.readouterr().out.lower()
        manifest = read_manifest(tmp_path)
        assert manifest["outputs"] == []


class TestConfigResolution:
    def test_config_file_sets_the_channel(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "viscosity": 0.25,
            "slip": {"xi_minus": 0.5, "xi_plus": 3.0},
        }))
        out = tmp_path / "out"
        rc = run_cli("--config", cfg, "--out", out, "critical",
                     "--k", "1", "2", "--points", "3")
        assert rc == 0
        footer = (out / "critical.csv").read_text().splitlines()[-1]
        assert float(footer.split("=")[1]) == mu_c_global(SlipPair(0.5, 3.0))

    def test_env_overrides_config_file(self, tmp_path, monkeypatch):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"slip": {"xi_minus": 1.0, "xi_plus": 1.0}}))
        monkeypatch.setenv("SLIPFLOW_SLIP__XI_PLUS", "3.0")
        out = tmp_path / "out"
        rc = run_cli("--config", cfg, "--out", out, "critical",
                     "--k", "1", "2", "--points", "3")
        assert rc == 0
        footer = (out / "critical.csv").read_text().splitlines()[-1]
        assert float(footer.split("=")[1]) == mu_c_global(SlipPair(1.0, 3.0))

    def test_flags_override_everything(self, tmp_path, monkeypatch):
        monkeypatch.setenv("SLIPFLOW_SLIP__XI_PLUS", "3.0")
        out = tmp_path / "out"
        rc = run_cli("--out", out, "critical", "--xi", "2.0", "2.0",
                     "--k", "1", "2", "--points", "3")
        assert rc == 0
        footer = (out / "critical.csv").read_text().splitlines()[-1]
        assert float(footer.split("=")[1]) == mu_c_global(SlipPair(2.0, 2.0))

    def test_digest_tracks_the_resolved_config(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        run_cli("--out", a, "critical", "--k", "1", "2", "--points", "3")
        run_cli("--out", b, "--seed", "1", "critical", "--k", "1", "2",
                "--points", "3")
        assert (read_manifest(a)["config_digest"]
                != read_manifest(b)["config_digest"])


class TestUsageErrors:
    def test_missing_config_file(self, tmp_path, capsys):
        rc = run_cli("--config", tmp_path / "nope.json", "--out", tmp_path,
                     "critical")
        assert rc == 2
        assert "error:" in capsys.readouterr().err

    def test_invalid_json_config(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        rc = run_cli("--config", bad, "--out", tmp_path, "critical")
        assert rc == 2
        assert "error:" in capsys.readouterr().err

    def test_negative_slip_rejected(self, tmp_path, capsys):
        rc = run_cli("--out", tmp_path, "critical", "--xi", "-1", "0")
        assert rc == 2
        assert "error:" in capsys.readouterr().err

    def test_nonpositive_threads_rejected(self, tmp_path, capsys):
        rc = run_cli("--threads", "0", "--out", tmp_path, "critical")
        assert rc == 2

    def test_unknown_command_exits_via_argparse(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            run_cli("--out", tmp_path, "frobnicate")
        assert exc.value.code == 2

    def test_unknown_top_level_section_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"simulation": {"dt": 1.0e-3}}))
        rc = run_cli("--config", cfg, "--out", tmp_path, "critical")
        assert rc == 2
        assert "simulation" in capsys.readouterr().err

    def test_misspelled_env_override_rejected(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("SLIPFLOW_SLIP_XI_PLUS", "3.0")  # single underscore
        rc = run_cli("--out", tmp_path, "critical")
        assert rc == 2
        assert "slip_xi_plus" in capsys.readouterr().err

    def test_unknown_simulation_key_in_config(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"sim": {"bogus": 3}}))
        rc = run_cli("--config", cfg, "--out", tmp_path, "simulate",
                     "--t-end", "0.01")
        assert rc == 2
        assert "bogus" in capsys.readouterr().err


class TestModuleInvocation:
    def test_python_dash_m_entry_point(self, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "slipflow.cli", "--out", str(tmp_path),
             "critical", "--k", "0.5", "2", "--points", "3"],
            capture_output=True, text=True, timeout=120,
        )
        assert proc.returncode == 0
        assert "mu_c_global" in proc.stdout
        assert (tmp_path / "critical.csv").exists()
