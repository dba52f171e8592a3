import os

import numpy as np
import pytest

from gridfield.cli import main
from gridfield.config import (ConfigError, echo_config, parse_config,
                              parse_override)


def test_defaults():
    cfg = parse_config()
    assert cfg.solver.tau == 10.0
    assert cfg.solver.B == 3.0
    assert cfg.grid.n == 64
    assert cfg.grid.n_s == 64
    assert cfg.grid.s_max == 1.3
    assert cfg.kernel.A == pytest.approx(0.005 * 128**2)


def test_empty_file_gives_defaults(tmp_path):
    path = tmp_path / "empty.toml"
    path.write_text("")
    cfg = parse_config(path)
    assert cfg.solver.tau == 10.0
    assert cfg.grid.n == 64


def test_file_values_and_unknown_key(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text("[solver]\nsigma = 0.005\n[grid]\nn = 32\n")
    cfg = parse_config(path)
    assert cfg.solver.sigma == 0.005
    assert cfg.grid.n == 32

    bad = tmp_path / "bad.toml"
    bad.write_text("[solver]\nsgima = 0.005\n")
    with pytest.raises(ConfigError, match="solver.sgima"):
        parse_config(bad)


def test_range_error_names_key(tmp_path):
    path = tmp_path / "r.toml"
    path.write_text("[solver]\ntau = -1\n")
    with pytest.raises(ConfigError, match="solver.tau"):
        parse_config(path)


def test_cross_field_validation():
    with pytest.raises(ConfigError, match="t_max"):
        parse_config(overrides=[("solver.t_min", 100.0), ("solver.t_max", 50.0)])
    with pytest.raises(ConfigError, match="z_cells"):
        parse_config(overrides=[("grid.n", 8), ("shift.z_cells", 8)])


def test_override_beats_file(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text("[solver]\nsigma = 0.005\n")
    cfg = parse_config(path, overrides=[("solver.sigma", 0.02)])
    assert cfg.solver.sigma == 0.02
    echo = echo_config(cfg)
    assert "sigma = 0.02" in echo


def test_parse_override_literals():
    assert parse_override("solver.sigma=0.01") == ("solver.sigma", 0.01)
    assert parse_override("activation.kind='relu'") == ("activation.kind", "relu")
    assert parse_override('refine.n_list=[8, 16]') == ("refine.n_list", [8, 16])
    with pytest.raises(ConfigError):
        parse_override("no-equals-sign")


def test_echo_roundtrip(tmp_path):
    cfg = parse_config(overrides=[("solver.sigma", 0.025), ("grid.n", 16),
                                  ("activation.kind", "sigmoid")])
    path = tmp_path / "echo.toml"
    path.write_text(echo_config(cfg))
    back = parse_config(path)
    assert back == cfg


def run_cli(args, tmp_path, extra=()):
    out = tmp_path / "out"
    argv = [*args, "--output-dir", str(out), *extra]
    code = main(argv)
    return code, out


def test_cli_stationary(tmp_path, capsys):
    code, out = run_cli(["stationary", "--sigma-lo", "0.01", "--sigma-hi", "0.03",
                         "--points", "3", "--set", "grid.n=16"], tmp_path)
    assert code == 0
    lines = (out / "stationary.csv").read_text().strip().split("\n")
    assert lines[0] == "sigma,m,phi0,Z,M_inf"
    assert len(lines) == 4
    printed = capsys.readouterr().out.strip().split("\n")
    assert printed[0] == "sigma,m,phi0,Z,M_inf"
    assert (out / "config.echo.toml").exists()
    manifest = (out / "manifest.csv").read_text()
    assert "stationary.csv" in manifest
    assert "config.echo.toml" in manifest


def test_cli_config_error_exit_code(tmp_path):
    code = main(["stationary", "--set", "solver.tau=-1",
                 "--output-dir", str(tmp_path / "x")])
    assert code == 2


def test_cli_unknown_key_exit_code(tmp_path):
    code = main(["stationary", "--set", "solver.bogus=1",
                 "--output-dir", str(tmp_path / "x")])
    assert code == 2


def test_cli_stability(tmp_path):
    code, out = run_cli(["stability", "--set", "grid.n=32", "--sigma", "0.01",
                         "--sigma-lo", "0.005", "--sigma-hi", "0.05",
                         "--set", "sweep.points=20"], tmp_path)
    assert code == 0
    disp = (out / "dispersion.csv").read_text().strip().split("\n")
    assert disp[0] == "k1,k2,What,shift,F"
    assert len(disp) == 1 + 21 * 21
    summary = (out / "stability_summary.csv").read_text()
    sigma_c = float(summary.strip().split("\n")[1])
    assert 0.005 < sigma_c < 0.05


def test_cli_stability_no_crossing_exit_code(tmp_path):
    # kernel too weak to destabilise anything: exit 4
    code, _ = run_cli(["stability", "--set", "grid.n=16", "--k-max", "6",
                       "--set", "kernel.A=0.01",
                       "--sigma-lo", "0.01", "--sigma-hi", "0.02"], tmp_path)
    assert code == 4


def test_cli_simulate_and_dumps(tmp_path):
    code, out = run_cli(["simulate", "--sigma", "0.03", "--n", "16",
                         "--set", "grid.n_s=32", "--t-min", "4", "--t-max", "8",
                         "--init", "perturbed_homogeneous",
                         "--dump-every", "2"], tmp_path)
    assert code == 0
    assert (out / "state_final.gcnf").exists()
    assert (out / "state_0001.gcnf").exists()
    report = (out / "run_report.csv").read_text().strip().split("\n")
    assert report[0] == "final_time,final_rate,stop_reason,steps"
    manifest = (out / "manifest.csv").read_text()
    assert "state_final.gcnf" in manifest


def test_cli_reproducible_outputs(tmp_path):
    args = ["particles", "--M", "200", "--dt", "0.5", "--T", "20",
            "--set", "grid.n=16", "--seed", "9"]
    _, out1 = run_cli(args, tmp_path / "a")
    _, out2 = run_cli(args, tmp_path / "b")
    assert (out1 / "particle_means.csv").read_bytes() == \
        (out2 / "particle_means.csv").read_bytes()
    assert (out1 / "particle_histogram.csv").read_bytes() == \
        (out2 / "particle_histogram.csv").read_bytes()


def test_cli_bifurcate_desk(tmp_path):
    code, out = run_cli(["bifurcate", "--direction", "r2l", "--n", "16",
                         "--set", "grid.n_s=32", "--sigma-lo", "0.02",
                         "--sigma-hi", "0.04", "--points", "3",
                         "--set", "solver.t_min=20", "--set", "solver.t_max=40",
                         "--init", "perturbed_homogeneous", "--dump-states"],
                        tmp_path)
    assert code == 0
    branch = (out / "branch_r2l.csv").read_text().strip().split("\n")
    assert branch[0] == "sigma,max_mean,min_mean,pattern,stop_reason,final_time"
    assert len(branch) == 4
    dumps = [a for a in os.listdir(out) if a.startswith("state_sigma_")]
    assert len(dumps) == 3


def test_cli_relax_smoke(tmp_path):
    code, out = run_cli(["relax", "--runs", "2", "--set", "relax.n_s=128",
                         "--set", "relax.t_end=120"], tmp_path)
    assert code == 0
    lines = (out / "relaxation.csv").read_text().strip().split("\n")
    assert lines[0] == "run,slope_mean_diff,slope_l1"
    assert len(lines) == 3


def test_cli_refine_smoke(tmp_path):
    code, out = run_cli(["refine", "--n-list", "8,16", "--t-eval", "2",
                         "--set", "refine.z=0.125"], tmp_path)
    assert code == 0
    lines = (out / "refinement.csv").read_text().strip().split("\n")
    assert lines[0] == "n,L1,L2,OOC_L1,OOC_L2"


def test_cli_replay_smoke(tmp_path):
    code, out = run_cli(["replay", "--sigma", "0.02", "--n", "16",
                         "--set", "grid.n_s=32", "--alpha", "0.3",
                         "--set", "replay.duration_ms=400",
                         "--set", "replay.stabilize_ms=10",
                         "--set", "solver.t_min=10",
                         "--set", "solver.t_max=20"], tmp_path)
    assert code == 0
    assert (out / "events.csv").exists()
    assert (out / "trajectory.csv").exists()
    assert (out / "state_stabilized.gcnf").exists()
