from __future__ import annotations

import os
from pathlib import Path

import numpy as np
import pytest

from boundhit import io
from boundhit.cli import main
from boundhit.fd import gamma_num, Grid
from boundhit.model import ModelParams, rho


def read_table(path):
    config, header, rows = {}, None, []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            k, _, v = line[1:].strip().partition("=")
            config[k.strip()] = v.strip()
        elif header is None:
            header = line.split(",")
        else:
            rows.append(line.split(","))
    return config, header, rows


def row_dict(header, row):
    return dict(zip(header, row))


class TestSolveCommand:
    def test_outputs_and_field_structure(self, tmp_path):
        out = tmp_path / "run"
        rc = main(["solve", "--N", "20", "--eta", "0.1", "--out", str(out)])
        assert rc == 0
        field_path = out / "field_f1_monotone_N20.csv"
        assert field_path.exists()
        assert (out / "solve_report_f1_monotone_N20.csv").exists()
        assert (out / "field_f1_monotone_N20.png").exists()
        field, config = io.read_field(str(field_path))
        assert config["eta"] == "0.1"
        assert config["N"] == "20"
        assert config["command"] == "solve"
        params = ModelParams(eta=0.1)
        for i, j in gamma_num(params, Grid(20)):
            assert field.values[i, j] == 1.0
        r = rho(params)
        for j in range(21):
            if j / 20 <= r:
                assert np.all(field.values[:, j] == 0.0)

    def test_deterministic_bytes(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert main(["solve", "--N", "20", "--eta", "0.1",
                         "--out", str(out), "--no-figures"]) == 0
        name = "field_f1_monotone_N20.csv"
        assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_no_figures(self, tmp_path):
        out = tmp_path / "run"
        assert main(["solve", "--N", "10", "--eta", "0.1",
                     "--out", str(out), "--no-figures"]) == 0
        assert not list(out.glob("*.png"))

    def test_report_table(self, tmp_path):
        out = tmp_path / "run"
        assert main(["solve", "--N", "10", "--eta", "0.1",
                     "--out", str(out), "--no-figures"]) == 0
        config, header, rows = read_table(
            out / "solve_report_f1_monotone_N10.csv")
        assert header == ["j", "iterations", "residual"]
        assert len(rows) == 11
        assert "wall_time_s" in config
        assert int(config["total_iterations"]) == sum(
            int(r[1]) for r in rows)


class TestErrorPaths:
    def test_invalid_parameter_writes_nothing(self, tmp_path):
        out = tmp_path / "run"
        rc = main(["solve", "--N", "10", "--c", "1.5", "--out", str(out)])
        assert rc == 1
        assert not out.exists()

    def test_unknown_flag(self):
        assert main(["solve", "--bogus"]) == 1

    def test_help_exits_zero(self, capsys):
        assert main(["--help"]) == 0
        assert "solve" in capsys.readouterr().out

    def test_non_convergence_exit_code(self, tmp_path):
        out = tmp_path / "run"
        rc = main(["solve", "--N", "50", "--eta", "0", "--max-iters", "200",
                   "--check-every", "100", "--out", str(out)])
        assert rc == 2
        assert not out.exists()

    def test_missing_field_file(self, tmp_path):
        rc = main(["mc", "--field", str(tmp_path / "nope.csv"),
                   "--out", str(tmp_path / "run")])
        assert rc == 1

    def test_plain_stderr_without_tty(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("NO_COLOR", "1")
        main(["solve", "--N", "10", "--eta", "0.1",
              "--out", str(tmp_path / "run"), "--no-figures"])
        assert "\x1b" not in capsys.readouterr().err


class TestMcCommand:
    def test_immediate_hit_estimate(self, tmp_path):
        out = tmp_path / "run"
        rc = main(["mc", "--x0", "1", "--z0", "0.9", "--paths", "50",
                   "--t-max", "0.5", "--out", str(out), "--no-figures"])
        assert rc == 0
        config, header, rows = read_table(out / "mc_estimate.csv")
        d = row_dict(header, rows[0])
        assert float(d["mean"]) == 1.0
        assert float(d["std_error"]) == 0.0
        assert d["n_hits"] == d["n_paths"] == "50"
        assert config["command"] == "mc"

    def test_payoff_zero_below_threshold(self, tmp_path):
        out = tmp_path / "run"
        rc = main(["mc", "--x0", "1", "--z0", "0.2", "--f", "f2",
                   "--paths", "20", "--t-max", "0.5",
                   "--out", str(out), "--no-figures"])
        assert rc == 0
        _, header, rows = read_table(out / "mc_estimate.csv")
        d = row_dict(header, rows[0])
        assert float(d["mean"]) == 0.0
        assert d["n_hits"] == "20"

    def test_feedback_field_smoke(self, tmp_path):
        out = tmp_path / "run"
        assert main(["solve", "--N", "20", "--eta", "0.1", "--omega", "tanh",
                     "--out", str(out), "--no-figures"]) == 0
        field_path = out / "field_f1_monotone_N20.csv"
        rc = main(["mc", "--field", str(field_path), "--omega", "tanh",
                   "--x0", "0.9", "--z0", "0.9", "--paths", "50",
                   "--t-max", "0.5", "--out", str(out), "--no-figures"])
        assert rc == 0
        _, header, rows = read_table(out / "mc_estimate.csv")
        d = row_dict(header, rows[0])
        assert 0.0 <= float(d["mean"]) <= 1.0


class TestConvergenceCommand:
    def test_pair_differencing(self, tmp_path):
        out = tmp_path / "run"
        rc = main(["convergence", "--N-list", "25,50", "--eta", "0.1",
                   "--out", str(out), "--no-figures"])
        assert rc == 0
        config, header, rows = read_table(
            out / "convergence_f1_monotone_pair.csv")
        assert header == ["N", "error_l1", "rate_l1", "error_linf",
                          "rate_linf"]
        assert [r[0] for r in rows] == ["25", "50"]
        first, last = (row_dict(header, r) for r in rows)
        assert float(first["error_l1"]) > float(last["error_l1"]) > 0.0
        assert first["rate_l1"] != ""
        assert last["rate_l1"] == "" and last["rate_linf"] == ""
        assert config["reference"] == "pair"

    def test_rejects_non_doubling(self, tmp_path):
        rc = main(["convergence", "--N-list", "25,60",
                   "--out", str(tmp_path / "run")])
        assert rc == 1

    def test_mc_reference_probe(self, tmp_path):
        out = tmp_path / "run"
        rc = main(["convergence", "--N-list", "10,20", "--reference", "mc",
                   "--eta", "0.1", "--probe", "0.9,0.9", "--paths", "500",
                   "--t-max", "2", "--out", str(out), "--no-figures"])
        assert rc == 0
        config, header, rows = read_table(
            out / "convergence_f1_monotone_mc.csv")
        assert header == ["N", "error", "rate"]
        assert len(rows) == 2
        assert 0.0 < float(config["mc_mean"]) <= 1.0
        assert "mc_std_error" in config

    def test_mc_reference_linear_only(self, tmp_path):
        rc = main(["convergence", "--N-list", "10,20", "--reference", "mc",
                   "--omega", "tanh", "--out", str(tmp_path / "run")])
        assert rc == 1


class TestFicheraCommand:
    def test_edge_classification(self, tmp_path):
        out = tmp_path / "run"
        rc = main(["fichera", "--out", str(out), "--no-figures"])
        assert rc == 0
        config, header, rows = read_table(out / "fichera_summary.csv")
        by_edge = {r[0]: row_dict(header, r) for r in rows}
        assert set(by_edge) == {"x=0", "x=1", "z=0", "z=1"}
        flip = float(by_edge["x=1"]["flip_coord"])
        assert abs(flip - 0.42) <= 1e-8
        assert float(config["rho"]) == 0.42
        for edge in ("x=0", "z=0", "z=1"):
            assert by_edge[edge]["flip_coord"] == ""
            assert float(by_edge[edge]["bc_fraction"]) == 0.0
        assert 0.5 < float(by_edge["x=1"]["bc_fraction"]) < 0.6

    def test_edges_table_sampling(self, tmp_path):
        out = tmp_path / "run"
        assert main(["fichera", "--samples", "11", "--out", str(out),
                     "--no-figures"]) == 0
        _, header, rows = read_table(out / "fichera_edges.csv")
        assert header == ["edge", "coord", "value", "needs_bc"]
        assert len(rows) == 4 * 11
        wall = [r for r in rows if r[0] == "x=1"]
        # classification follows the sign of the flux along the wall
        for d in (row_dict(header, r) for r in wall):
            assert (d["needs_bc"] == "1") == (float(d["value"]) < 0.0)

    def test_sample_validation(self, tmp_path):
        assert main(["fichera", "--samples", "1",
                     "--out", str(tmp_path / "run")]) == 1


class TestCrossvalCommand:
    def test_boundary_probe_agrees_exactly(self, tmp_path):
        out = tmp_path / "run"
        rc = main(["crossval", "--N", "20", "--eta", "0.1",
                   "--probe", "1,0.9", "--paths", "400", "--t-max", "0.5",
                   "--out", str(out), "--no-figures"])
        assert rc == 0
        _, header, rows = read_table(out / "crossval.csv")
        d = row_dict(header, rows[0])
        # the probe sits on the data boundary: both sides return the payoff
        assert float(d["fd"]) == 1.0
        assert float(d["mc_mean"]) == 1.0
        assert float(d["z_score"]) == 0.0

    def test_interior_probe_finite_z(self, tmp_path):
        out = tmp_path / "run"
        rc = main(["crossval", "--N", "50", "--eta", "0.1",
                   "--probe", "0.9,0.9", "--paths", "2000", "--t-max", "5",
                   "--out", str(out), "--no-figures"])
        assert rc == 0
        _, header, rows = read_table(out / "crossval.csv")
        d = row_dict(header, rows[0])
        assert float(d["std_error"]) > 0.0
        # coarse grid and unbridged stepping both bias mildly; just ask for
        # statistical sanity, the tight comparison runs in the slow suite
        assert abs(float(d["z_score"])) < 20.0


class TestSweepCommand:
    def test_presets_and_summary(self, tmp_path):
        out = tmp_path / "run"
        rc = main(["sweep", "--N", "10", "--preset", "nominal",
                   "--preset", "highc", "--out", str(out), "--no-figures"])
        assert rc == 0
        assert (out / "sweep_nominal_N10.csv").exists()
        assert (out / "sweep_highc_N10.csv").exists()
        config, header, rows = read_table(out / "sweep_summary.csv")
        by_preset = {r[0]: row_dict(header, r) for r in rows}
        assert float(by_preset["nominal"]["rho"]) == 0.42
        assert float(by_preset["highc"]["rho"]) == 0.32
        assert config["scheme"] == "filtered"
        assert config["f"] == "f3"
        assert config["presets"] == "nominal,highc"

    def test_explicit_scheme_respected(self, tmp_path):
        out = tmp_path / "run"
        rc = main(["sweep", "--N", "10", "--preset", "nominal",
                   "--scheme", "monotone", "--f", "f1",
                   "--out", str(out), "--no-figures"])
        assert rc == 0
        config, _, _ = read_table(out / "sweep_summary.csv")
        assert config["scheme"] == "monotone"
        assert config["f"] == "f1"

    def test_unknown_preset_from_config(self, tmp_path):
        cfgfile = tmp_path / "cfg.ini"
        cfgfile.write_text("preset=bogus\n")
        rc = main(["sweep", "--config", str(cfgfile),
                   "--out", str(tmp_path / "run")])
        assert rc == 1


class TestConfigFile:
    def test_flags_override_file(self, tmp_path):
        cfgfile = tmp_path / "cfg.ini"
        cfgfile.write_text("delta=0.75\n# comment line\nsamples=101\n")
        out = tmp_path / "run"
        rc = main(["fichera", "--config", str(cfgfile), "--delta", "0.5",
                   "--out", str(out), "--no-figures"])
        assert rc == 0
        config, _, _ = read_table(out / "fichera_summary.csv")
        assert config["delta"] == "0.5"
        assert float(config["rho"]) == 0.42
        assert config["samples"] == "101"

    def test_file_overrides_defaults(self, tmp_path):
        cfgfile = tmp_path / "cfg.ini"
        cfgfile.write_text("delta=0.75\n")
        out = tmp_path / "run"
        rc = main(["fichera", "--config", str(cfgfile),
                   "--out", str(out), "--no-figures"])
        assert rc == 0
        config, header, rows = read_table(out / "fichera_summary.csv")
        assert config["delta"] == "0.75"
        assert float(config["rho"]) == 0.44666666666666666
        by_edge = {r[0]: row_dict(header, r) for r in rows}
        flip = float(by_edge["x=1"]["flip_coord"])
        assert abs(flip - 0.44666666666666666) <= 1e-8

    def test_unknown_key_rejected(self, tmp_path):
        cfgfile = tmp_path / "cfg.ini"
        cfgfile.write_text("dleta=0.75\n")
        rc = main(["fichera", "--config", str(cfgfile),
                   "--out", str(tmp_path / "run")])
        assert rc == 1
