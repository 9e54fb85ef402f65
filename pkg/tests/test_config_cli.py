from pathlib import Path

import numpy as np
import pytest

from nch import ConfigError, Grid, parse_config, render_config, write_snapshot
from nch.cli import main
from nch.config import InitialSpec, SimulationConfig
from nch.grid import read_snapshot

REPO = Path(__file__).resolve().parent.parent


class TestParse:
    def test_minimal_config_fills_defaults(self):
        cfg = parse_config("scheme = p-etd1\nM = 64\n")
        assert cfg.scheme == "p-etd1"
        assert cfg.M == 64
        assert cfg.delta == 0.05
        assert cfg.kappa == 2.0
        assert cfg.mass_target == "predictor"
        assert cfg.projection_tol == 1e-13

    def test_comments_and_blank_lines(self):
        cfg = parse_config("# full-line comment\n\nM = 32  # trailing comment\n")
        assert cfg.M == 32

    def test_temperature_invariant_violation(self):
        with pytest.raises(ConfigError, match="theta"):
            parse_config("theta_c = 0.5\ntheta = 0.8\n")

    def test_unknown_key_reports_line_number(self):
        with pytest.raises(ConfigError, match="line 2"):
            parse_config("M = 16\nbogus = 1\n")

    def test_duplicate_key_rejected(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config("M = 16\nM = 32\n")

    def test_malformed_line_reports_line_number(self):
        with pytest.raises(ConfigError, match="line 1"):
            parse_config("this is not a key value pair\n")

    def test_bad_value_reports_key(self):
        with pytest.raises(ConfigError, match="tau"):
            parse_config("tau = fast\n")

    def test_snapshot_times_must_lie_in_the_horizon(self):
        with pytest.raises(ConfigError, match="snapshot"):
            parse_config("T_final = 1.0\nsnapshot_times = 0.5, 2.0\n")

    def test_initial_spec_forms(self):
        sine = parse_config("initial = sine(0.1)\n").initial
        assert sine == InitialSpec("sine", 0.1)
        rand = parse_config("initial = random(0.2, 0.05, 42)\n").initial
        assert rand == InitialSpec("random", 0.05, offset=0.2, seed=42)
        with pytest.raises(ConfigError):
            parse_config("initial = random(0.2)\n")

    def test_shipped_configs_parse(self):
        for name in ("convergence", "comparison", "coarsening", "sweep"):
            text = (REPO / "configs" / f"{name}.cfg").read_text()
            cfg = parse_config(text)
            assert cfg.model_params() is not None

    def test_convergence_config_reproduces_table_parameters(self):
        cfg = parse_config((REPO / "configs" / "convergence.cfg").read_text())
        assert (cfg.epsilon, cfg.theta, cfg.theta_c, cfg.delta, cfg.kappa) == (
            0.02,
            0.8,
            1.6,
            0.05,
            1.0,
        )

    def test_round_trip(self):
        cfg = SimulationConfig(
            scheme="p-etdrk2",
            M=48,
            tau=0.025,
            T_final=1.5,
            initial=InitialSpec("random", 0.05, offset=0.3, seed=9),
            snapshot_times=(0.5, 1.0),
            output_dir="somewhere",
            mass_target="initial",
            structure_threshold=0.125,
        )
        assert parse_config(render_config(cfg)) == cfg

    def test_override_wins_over_file(self):
        cfg = parse_config("M = 16\n", {"M": "64", "tau": "0.5"})
        assert cfg.M == 64 and cfg.tau == 0.5
        with pytest.raises(ConfigError, match="unknown key"):
            parse_config("", {"nope": "1"})


class TestCli:
    def test_run_on_zero_data_exits_clean(self, tmp_path, capsys):
        cfg = tmp_path / "zero.cfg"
        out = tmp_path / "out"
        cfg.write_text(
            "scheme = p-etd1\nM = 16\ntau = 0.01\nT_final = 0.05\n"
            f"initial = sine(0.0)\nsnapshot_times = 0.05\noutput_dir = {out}\n"
        )
        assert main(["run", str(cfg)]) == 0
        grid, u, t = read_snapshot(out / "snapshot_t0.05.grid")
        assert np.max(np.abs(u)) == 0.0
        assert (out / "diagnostics.csv").exists()

    def test_run_override_changes_the_mesh(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        out = tmp_path / "o"
        cfg.write_text("M = 16\ntau = 0.01\nT_final = 0.02\ninitial = sine(0.0)\n")
        code = main(
            ["run", str(cfg), "--M=8", f"--output_dir={out}", "--snapshot_times=0.02"]
        )
        assert code == 0
        grid, _, _ = read_snapshot(out / "snapshot_t0.02.grid")
        assert grid.M == 8

    def test_config_errors_exit_2(self, tmp_path):
        bad = tmp_path / "bad.cfg"
        bad.write_text("theta = 2.0\ntheta_c = 1.0\n")
        assert main(["run", str(bad)]) == 2
        assert main(["run", str(tmp_path / "missing.cfg")]) == 2
        good = tmp_path / "good.cfg"
        good.write_text("M = 8\n")
        assert main(["run", str(good), "--bogus=1"]) == 2

    def test_blowup_exits_4(self, tmp_path):
        cfg = tmp_path / "blow.cfg"
        cfg.write_text(
            "scheme = etd1\nM = 64\ntau = 0.1\nkappa = 2.0\nT_final = 100.0\n"
            f"initial = random(0.2, 0.05, 7)\noutput_dir = {tmp_path / 'b'}\n"
        )
        assert main(["run", str(cfg)]) == 4

    def test_count_subcommand(self, tmp_path, capsys):
        grid = Grid(32)
        u = np.full((32, 32), -0.9)
        X, Y = grid.mesh()
        for cx, cy in ((0.25, 0.25), (0.75, 0.75)):
            u[(X - cx) ** 2 + (Y - cy) ** 2 <= 0.01] = 0.9
        snap = tmp_path / "two_discs.grid"
        write_snapshot(snap, grid, u, t=0.0)
        assert main(["count", str(snap)]) == 0
        assert capsys.readouterr().out.strip() == "2"

    def test_converge_subcommand_writes_reports(self, tmp_path, capsys):
        out = tmp_path / "rep"
        code = main(
            [
                "converge",
                "--scheme=p-etdrk2",
                "--M=8",
                "--T_final=0.01",
                "--tau-list=2e-3,1e-3",
                "--benchmark-tau=1e-4",
                f"--out={out}",
            ]
        )
        assert code == 0
        assert (out / "convergence_p-etdrk2.csv").exists()
        assert (out / "convergence_p-etdrk2.txt").exists()
        assert "Rate" in capsys.readouterr().out

    def test_sweep_subcommand_writes_report(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("NCH_THREADS", "1")
        out = tmp_path / "sw"
        code = main(
            [
                "sweep",
                "--M=16",
                "--tau=0.1",
                "--T_final=0.5",
                "--sigma-list=5,20",
                "--seed=3",
                f"--out={out}",
            ]
        )
        assert code == 0
        assert (out / "sigma_sweep.csv").exists()
        assert "sigma=5" in capsys.readouterr().out

    def test_pgm_export(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        out = tmp_path / "o"
        cfg.write_text(
            "M = 8\ntau = 0.01\nT_final = 0.01\ninitial = sine(0.1)\n"
            f"snapshot_times = 0.01\noutput_dir = {out}\n"
        )
        assert main(["run", str(cfg), "--pgm"]) == 0
        assert (out / "snapshot_t0.01.pgm").exists()
