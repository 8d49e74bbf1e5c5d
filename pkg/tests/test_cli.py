import csv
import json
import math
import subprocess
import sys

import pytest

from robinspec.cli import main

ROOT = __import__("pathlib").Path(__file__).resolve().parents[1]


def run(*args):
    return subprocess.run([sys.executable, "-m", "robinspec.cli", *args], capture_output=True, text=True, cwd=ROOT)


def test_predict_square(capsys):
    assert main(["predict", "--polygon", "square(1)", "--alpha", "20", "-n", "1"]) == 0
    cap = capsys.readouterr()
    rows = list(csv.DictReader(cap.out.splitlines()))
    assert [r["formula"] for r in rows] == ["corner"] * 4 + ["thm1"]
    assert float(rows[-1]["predicted"]) == pytest.approx(-400 + math.pi**2, abs=1e-12)
    assert "verified" in cap.err


def test_sector_writes_csv_and_manifest(tmp_path):
    rc = main(["--out", str(tmp_path), "sector", "--theta", str(math.pi / 4), "--r", "5", "--ext", "N", "-n", "2"])
    assert rc == 0
    rows = list(csv.DictReader((tmp_path / "sector.csv").open()))
    assert len(rows) == 2
    assert float(rows[0]["E_k"]) == pytest.approx(-2.0, abs=1e-2)
    man = json.loads((tmp_path / "sector.manifest.json").read_text())
    assert "versions" in man


def test_kappa_obtuse(capsys):
    assert main(["kappa", "--theta", "2.0"]) == 0
    assert json.loads(capsys.readouterr().out)["kappa"] == 0


def test_bad_input_exit_code():
    r = run("predict", "--polygon", "nope(1)", "--alpha", "20")
    assert r.returncode == 2
    assert r.stderr.startswith("error: KeyError")
    r = run("predict", "--polygon", "half-disk(1)", "--alpha", "20", "--formula", "thm1")
    assert r.returncode == 2 and "FormulaInapplicable" in r.stderr


def test_verify_small(tmp_path):
    cfg = ROOT / "configs" / "verify_small.yaml"
    r = run("--out", str(tmp_path), "verify", "--config", str(cfg))
    assert r.returncode == 0, r.stderr
    csvs = sorted(tmp_path.glob("*.csv"))
    assert csvs and csvs[0].read_text().startswith("alpha,k,cluster,E_fem")
