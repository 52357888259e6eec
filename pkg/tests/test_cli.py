import json
import os
import subprocess
import sys

import pytest

from logvisc import cli
from logvisc import config as cf

SMALL = """model = fluid
scenario = rest_strained
t_end = 0.05
nx = 16
ny = 16
tau_r = 1
velocity = 0.5
checkpoint_every = 3
"""


@pytest.fixture
def cfg_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(SMALL + f"output_dir = {tmp_path / 'out'}\n")
    return path


def test_no_command_is_usage_error(capsys):
    assert cli.main([]) == cli.EXIT_USAGE


def test_unknown_suite(capsys):
    assert cli.main(["verify", "nonsense"]) == cli.EXIT_USAGE
    assert "unknown suite" in capsys.readouterr().err


def test_missing_config_file(tmp_path, capsys):
    assert cli.main(["simulate", str(tmp_path / "absent.cfg")]) == cli.EXIT_USAGE


def test_bad_config_reports_line(tmp_path, capsys):
    path = tmp_path / "bad.cfg"
    path.write_text("model = fluid\nscenario = rest_strained\nt_end = 1\n")
    assert cli.main(["simulate", str(path)]) == cli.EXIT_USAGE
    assert "line 1: tau_r is required" in capsys.readouterr().err


def test_dump_config_round_trip(cfg_file, capsys):
    assert cli.main(["dump-config", str(cfg_file)]) == 0
    out = capsys.readouterr().out
    assert out == cf.dump_config(cf.parse_config(cfg_file))
    assert cf.dump_config(cf.parse_config_text(out)) == out


def test_simulate_writes_outputs(cfg_file, tmp_path, capsys):
    assert cli.main(["simulate", str(cfg_file)]) == 0
    out = tmp_path / "out"
    assert (out / "diagnostics.csv").read_text().startswith("t,kinetic,elastic")
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config_hash"] == cf.config_hash(cf.parse_config(cfg_file))
    assert (out / "checkpoint.npz").exists()


def test_simulate_output_dir_override(cfg_file, tmp_path, capsys):
    other = tmp_path / "elsewhere"
    assert cli.main(["simulate", str(cfg_file), "--output-dir", str(other)]) == 0
    assert (other / "diagnostics.csv").exists()


def test_resume_matches_and_refuses_foreign_config(cfg_file, tmp_path, capsys):
    assert cli.main(["simulate", str(cfg_file)]) == 0
    out = tmp_path / "out"
    full = (out / "diagnostics.csv").read_bytes()
    assert cli.main(["resume", str(out / "checkpoint.npz"), "--config", str(cfg_file)]) == 0
    assert (out / "diagnostics.csv").read_bytes() == full
    foreign = tmp_path / "foreign.cfg"
    foreign.write_text(SMALL.replace("velocity = 0.5", "velocity = 0.6"))
    assert cli.main(["resume", str(out / "checkpoint.npz"), "--config", str(foreign)]) == cli.EXIT_USAGE
    assert "different configuration" in capsys.readouterr().err


def test_corrupt_checkpoint(tmp_path, capsys):
    bad = tmp_path / "checkpoint.npz"
    bad.write_bytes(b"not a checkpoint")
    assert cli.main(["resume", str(bad)]) == cli.EXIT_USAGE


def test_solver_failure_exit_code(tmp_path, capsys):
    path = tmp_path / "huge.cfg"
    path.write_text(f"model = solid\nscenario = rest_strained\nt_end = 0.1\nnx = 16\nny = 16\n"
                    f"amplitude = 500\noutput_dir = {tmp_path / 'o'}\n")
    assert cli.main(["simulate", str(path)]) == cli.EXIT_SOLVER
    assert "solver failure" in capsys.readouterr().err


def test_verify_writes_manifest(tmp_path, capsys):
    manifest = tmp_path / "m.json"
    assert cli.main(["verify", "cli", "--manifest", str(manifest)]) == 0
    data = json.loads(manifest.read_text())
    assert data["code_version"]
    assert all(row["passed"] for row in data["suites"]["cli"])


def test_mollify_rejects_coupled_flow(cfg_file, capsys):
    assert cli.main(["mollify-exp", str(cfg_file)]) == cli.EXIT_USAGE


def test_mollify_small_experiment(tmp_path, capsys):
    path = tmp_path / "m.cfg"
    path.write_text("model = transport_only\nscenario = uniform_shear_prescribed\nt_end = 0.1\n"
                    "nx = 16\nny = 16\n")
    code = cli.main(["mollify-exp", str(path), "--scales", "2", "1", "0.5"])
    out = capsys.readouterr().out
    assert "scale 2" in out and "bounds hold" in out
    assert code == 0 and "differences decrease" in out


def test_thread_variable_validation(cfg_file):
    env = dict(os.environ, LOGVISC_THREADS="zero")
    proc = subprocess.run([sys.executable, "-m", "logvisc.cli", "dump-config", str(cfg_file)],
                          env=env, capture_output=True, text=True)
    assert proc.returncode == 1
    assert "LOGVISC_THREADS" in proc.stderr
    env["LOGVISC_THREADS"] = "2"
    proc = subprocess.run([sys.executable, "-c", "import logvisc, os; print(os.environ['OPENBLAS_NUM_THREADS'])"],
                          env={k: v for k, v in env.items() if k not in ("OPENBLAS_NUM_THREADS",)},
                          capture_output=True, text=True)
    assert proc.stdout.strip() == "2"
