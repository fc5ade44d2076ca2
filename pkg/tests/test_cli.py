import csv
import math
import os
import subprocess
import sys

import pytest

from tmlab.cli import (COMMANDS, EXIT_INPUT, EXIT_NUMERICAL, EXIT_PRECONDITION, ConfigError,
                       main, parse_mesh_spec, resolve_config, run)
from tmlab.export import read_record

from conftest import GENUS2

SMALL = {
    "mesh": {"mesh": "icosphere:2", "save_off": "true"},
    "eigen": {"mesh": "icosphere:2"},
    "maximize": {"mesh": "icosphere:2", "eps": "2"},
    "sweep": {"mesh": "icosphere:2", "eps_grid": "2,1,0.5"},
    "sharpness": {"mesh": "icosphere:3", "eps_stop": "0.01"},
    "green": {"mesh": "icosphere:3"},
    "phi-eps": {"mesh": "icosphere:4", "eps_multiples": "1,2"},
    "probe-cc": {"log_inv_eps": "5,50,400"},
    "probe-bubble": {},
    "liouville": {"mesh": "icosphere:2", "samples": "5"},
    "verify-t4": {"mesh": "icosphere:2", "samples": "20", "eps_grid": "2,1,0.5"},
}


def rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_every_command_has_a_small_case():
    assert set(SMALL) == set(COMMANDS)


@pytest.mark.parametrize("command", sorted(SMALL))
def test_command_writes_outputs(command, tmp_path):
    out = tmp_path / command
    assert main([command, "--out", str(out)] + [f"--set={k}={v}" for k, v in SMALL[command].items()]) == 0
    names = set(os.listdir(out))
    assert {"manifest.txt", "results.csv", "summary.txt"} <= names
    assert not any(n.startswith(".") or n.endswith(".tmp") for n in names)
    man = read_record(out / "manifest.txt")
    assert man["command"] == command
    assert set(man) == {"command"} | set(resolve_config(command, {}))
    assert rows(out / "results.csv")


@pytest.mark.parametrize("command", ["sweep", "verify-t4", "green", "probe-cc"])
def test_manifest_rerun_is_bit_exact(command, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main([command, "--out", str(a)] + [f"--set={k}={v}" for k, v in SMALL[command].items()]) == 0
    assert main([command, "--config", str(a / "manifest.txt"), "--out", str(b)]) == 0
    for name in os.listdir(a):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_eigen_on_torus_reports_dichotomy(tmp_path):
    run("eigen", {"mesh": "torus:8"}, tmp_path)
    res = {r["kind"]: float(r["value"]) for r in rows(tmp_path / "results.csv")}
    assert res["curvature_zero"] == 0.0
    summary = (tmp_path / "summary.txt").read_text()
    assert "lambda_g (curvature zero) = 0" in summary
    assert "chi = 0" in summary


def test_sweep_csv_has_monotone_flag(tmp_path):
    run("sweep", SMALL["sweep"], tmp_path)
    data = rows(tmp_path / "results.csv")
    assert [float(r["eps"]) for r in data] == [2.0, 1.0, 0.5]
    vals = [float(r["value"]) for r in data]
    assert vals == sorted(vals)
    assert all(r["monotone"] == "true" for r in data)


def test_summary_cites_reference_constants(tmp_path):
    run("probe-cc", SMALL["probe-cc"], tmp_path / "cc")
    assert "8.53973" in (tmp_path / "cc" / "summary.txt").read_text()
    run("green", SMALL["green"], tmp_path / "g")
    s = (tmp_path / "g" / "summary.txt").read_text()
    assert "12.5664" in s or "4 pi" in s


def test_malformed_off_is_input_error_without_outputs(tmp_path):
    bad = tmp_path / "bad.off"
    bad.write_text("OFF\n4 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n")
    out = tmp_path / "out"
    assert main(["mesh", "--set", f"mesh=off:{bad}", "--out", str(out)]) == EXIT_INPUT
    assert not out.exists()


def test_missing_config_file_is_input_error(tmp_path):
    out = tmp_path / "out"
    assert main(["mesh", "--config", str(tmp_path / "nope.txt"), "--out", str(out)]) == EXIT_INPUT
    assert not out.exists()


def test_green_on_torus_is_precondition_error(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["green", "--set", "mesh=torus:8", "--out", str(out)]) == EXIT_PRECONDITION
    assert "TildeUndefined" in capsys.readouterr().err
    assert not out.exists()


def test_alpha_above_lambda_g_is_precondition_error(tmp_path):
    out = tmp_path / "out"
    assert main(["maximize", "--set", "mesh=icosphere:1", "--set", "alpha=50",
                 "--out", str(out)]) == EXIT_PRECONDITION


def test_unknown_key_and_bad_values(tmp_path):
    with pytest.raises(ConfigError):
        resolve_config("eigen", {"beta": "3"})
    with pytest.raises(ConfigError):
        resolve_config("maximize", {"eps": "abc"})
    with pytest.raises(ConfigError):
        resolve_config("eigen", {"command": "green"})
    assert main(["eigen", "--set", "nonsense", "--out", str(tmp_path / "o")]) == EXIT_INPUT


def test_mesh_specs():
    assert parse_mesh_spec("icosphere:1").vertex_count == 42
    assert parse_mesh_spec("icosphere:0:2.0").total_area() == pytest.approx(
        parse_mesh_spec("icosphere:0").total_area() * 4.0)
    assert parse_mesh_spec("torus:4:6").vertex_count == 24
    assert parse_mesh_spec(f"off:{GENUS2}").euler_characteristic == -2
    for bad in ("icosphere:x", "torus", "cube:3", "off:/no/such/file"):
        with pytest.raises(ConfigError):
            parse_mesh_spec(bad)


def test_resolved_off_path_is_absolute(tmp_path, monkeypatch):
    monkeypatch.chdir(os.path.dirname(GENUS2))
    cfg = resolve_config("mesh", {"mesh": "off:genus2.off"})
    assert cfg["mesh"] == "off:" + GENUS2


def test_console_entry_point(tmp_path):
    out = tmp_path / "o"
    res = subprocess.run([sys.executable, "-m", "tmlab.cli", "probe-bubble", "--out", str(out)],
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    (row,) = rows(out / "results.csv")
    assert abs(float(row["error"])) < 1e-6
