import json
import os
import pathlib
import subprocess
import sys

import pytest
import yaml

from cfran.cli import main

GOLDEN = pathlib.Path(__file__).parent / "golden"
SMALL = ["--set", "num_rrus=12", "--set", "antennas_per_rru=2", "--set", "num_ues=4",
         "--set", "num_pilots=4", "--set", "num_edus=2", "--set", "trials=10", "--workers", "1"]


def test_help_golden():
    env = {**os.environ, "COLUMNS": "80"}
    out = subprocess.run([sys.executable, "-m", "cfran.cli", "--help"], env=env,
                         capture_output=True, text=True, check=True).stdout
    assert out == (GOLDEN / "help.txt").read_text()


def test_fbl_calc(capsys):
    assert main(["fbl-calc", "--gamma", "1", "--n", "100", "--eps", "1e-5"]) == 0
    assert capsys.readouterr().out == "0.4671\n"
    assert main(["fbl-calc", "--gamma", "1", "1", "--n", "100", "--eps", "1e-5",
                 "--target", "1.2455"]) == 0
    lines = capsys.readouterr().out.split()
    assert lines[0] == "1.2464" and float(lines[1]) < 1e-5


def test_fbl_calc_unachievable(capsys):
    assert main(["fbl-calc", "--gamma", "1", "--n", "100", "--eps", "1e-5", "--target", "5"]) == 1
    assert "unachievable" in capsys.readouterr().err


def test_missing_config(tmp_path, capsys):
    assert main(["sweep", "--config", str(tmp_path / "nope.yaml"), "--out", str(tmp_path)]) == 1
    assert "config not found" in capsys.readouterr().err


def test_invalid_override(tmp_path, capsys):
    assert main(["sweep", "--set", "num_edus=0", "--out", str(tmp_path)]) == 1
    assert "num_edus >= 1" in capsys.readouterr().err


def test_degenerate_exit(tmp_path):
    args = ["validate-bounds", "--out", str(tmp_path), "--workers", "1",
            "--set", "num_rrus=4", "--set", "antennas_per_rru=1", "--set", "num_ues=6",
            "--set", "num_pilots=6", "--set", "csi_mode=perfect", "--set", "combiner=zf",
            "--set", "correlation.model=iid", "--set", "trials=3"]
    assert main(args) == 2


def test_infeasible_coloring_exit(tmp_path, monkeypatch, capsys):
    from cfran import cli
    from cfran.errors import InfeasibleColoringError

    def refuse(*a, **k):
        raise InfeasibleColoringError("no threshold gives 3 colors", target=3, nearest=(2, 4))

    monkeypatch.setattr(cli, "graph_color_associate", refuse)
    assert main(["associate", "--out", str(tmp_path)]) == 2
    assert "degenerate geometry" in capsys.readouterr().err


def test_internal_error_exit(tmp_path, monkeypatch, capsys):
    from cfran import cli
    monkeypatch.setattr(cli, "generate_geometry", lambda *a: 1 / 0)
    assert main(["associate", "--out", str(tmp_path)]) == 3
    assert "internal error: ZeroDivisionError" in capsys.readouterr().err


def test_sweep_outputs_and_manifest_round_trip(tmp_path):
    out = tmp_path / "run"
    assert main(["sweep", "--out", str(out), "--sweep", "num_edus=1,2", *SMALL]) == 0
    csv1 = (out / "sweep.csv").read_text()
    manifest = yaml.safe_load((out / "sweep.manifest.yaml").read_text())
    assert manifest["seed"] == 2024 and manifest["versions"]["kernels"] in ("cython", "python")
    assert json.loads((out / "sweep.json").read_text())["columns"][1] == "num_edus"
    again = tmp_path / "again"
    assert main(["sweep", "--config", str(out / "sweep.manifest.yaml"), "--out", str(again),
                 "--workers", "1"]) == 0
    assert (again / "sweep.csv").read_text() == csv1


def test_env_seed(tmp_path, monkeypatch):
    monkeypatch.setenv("CFRAN_MASTER_SEED", "99")
    assert main(["sweep", "--out", str(tmp_path), *SMALL]) == 0
    assert "# seed: 99" in (tmp_path / "sweep.csv").read_text()


def test_kind_mismatch(tmp_path):
    cfg = tmp_path / "e.yaml"
    cfg.write_text("kind: error_sweep\nbase: {num_ues: 4}\n")
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path)]) == 1


def test_preset_smoke(tmp_path):
    args = ["preset", "fig9", "--out", str(tmp_path), "--workers", "1", "--set", "trials=10",
            "--set", "num_rrus=20", "--set", "antennas_per_rru=2",
            "--sweep", "num_edus=1,2", "--sweep", "block_length=10,100"]
    assert main(args) == 0
    assert (tmp_path / "fig9.csv").exists()


def test_associate_writes_groups(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("num_rrus: 30\nnum_edus: 3\n")
    for algo in ("graphcolor", "kmeans"):
        assert main(["associate", "--config", str(cfg), "--algorithm", algo, "--out", str(tmp_path)]) == 0
        doc = json.loads((tmp_path / f"partition_{algo}.json").read_text())
        assert sorted(i for g in doc["groups"] for i in g) == list(range(30))
        assert doc["num_edus"] == 3


def test_unknown_preset(tmp_path, capsys):
    assert main(["preset", "fig99", "--out", str(tmp_path)]) == 1
    assert "unknown preset" in capsys.readouterr().err
