import csv
import json

import pytest
from click.testing import CliRunner

from gmn_forge.cli import main

OV = {"multi_ov": {"m": [[0.0, 0.0]], "y": [0.0], "p": 1}}
SPLIT = {"multi_ov": {"m": [[0.5, 0.0], [-0.5, 0.0]], "y": [0.25, 0.75], "p": 1}}
UNBALANCED = {"multi_ov": {"m": [[0.3, 0.0], [0.2, 0.0]], "y": [0.0, 0.0], "p": 1}}


@pytest.fixture
def runner():
    return CliRunner()


def _write(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return str(path)


@pytest.mark.parametrize("pairing,divisors", [
    ([[0, 2, 0, 0], [-2, 0, 0, 0], [0, 0, 0, 3], [0, 0, -3, 0]], [1, 6]),
    ([[0, 1], [-1, 0]], [1]),
])
def test_frobenius(runner, tmp_path, pairing, divisors):
    path = _write(tmp_path, "lat.json", {"pairing": pairing})
    res = runner.invoke(main, ["frobenius", path, "--out", str(tmp_path)])
    assert res.exit_code == 0, res.output
    out = json.loads((tmp_path / "basis.json").read_text())
    assert out["divisors"] == divisors
    assert out["violations"] == []


def test_frobenius_malformed(runner, tmp_path):
    path = _write(tmp_path, "bad.json", '{"pairing": [[0, 1],\n [-1, 0]')
    res = runner.invoke(main, ["frobenius", path])
    assert res.exit_code != 0
    assert "bad.json:2:" in res.output


def test_frobenius_degenerate(runner, tmp_path):
    path = _write(tmp_path, "deg.json", {"pairing": [[0, 0], [0, 0]]})
    assert runner.invoke(main, ["frobenius", path]).exit_code != 0


def test_check_data(runner, tmp_path):
    res = runner.invoke(main, ["check-data", "--model", _write(tmp_path, "ov.json", OV)])
    assert res.exit_code == 0, res.output
    res = runner.invoke(main, ["check-data", "--model", _write(tmp_path, "bad.json", UNBALANCED)])
    assert res.exit_code == 2
    assert "A3" in res.output


def test_region(runner, tmp_path):
    res = runner.invoke(main, ["region", "--model", _write(tmp_path, "ov.json", OV), "--out", str(tmp_path)])
    assert res.exit_code == 0, res.output
    rep = json.loads((tmp_path / "region.json").read_text())
    assert 0.41 < rep["r0"] < 0.43
    assert abs(rep["r0"] - rep["r0_newton"]) < 1e-10


def _eval(runner, tmp_path, model, sub, *extra):
    out = tmp_path / sub
    res = runner.invoke(main, ["eval", "--model", model, "--out", str(out), "--grid", "-1:1:3,-1:1:3",
                               "--zeta", "0.5+0.5j,1"] + list(extra))
    return res, out / "eval.csv"


def test_eval_deterministic_across_jobs(runner, tmp_path):
    model = _write(tmp_path, "split.json", SPLIT)
    r1, f1 = _eval(runner, tmp_path, model, "a")
    r2, f2 = _eval(runner, tmp_path, model, "b", "--jobs", "3")
    assert r1.exit_code == 0 and r2.exit_code == 0, r1.output + r2.output
    assert f1.read_bytes() == f2.read_bytes()
    assert b"\r\n" in f1.read_bytes()
    rows = list(csv.reader(f1.open(newline="")))
    assert len(rows) > 1 and len({len(r) for r in rows}) == 1


def test_eval_zero_zeta(runner, tmp_path):
    model = _write(tmp_path, "ov.json", OV)
    res = runner.invoke(main, ["eval", "--model", model, "--out", str(tmp_path / "z"), "--zeta", "0"])
    assert res.exit_code == 2
    res = runner.invoke(main, ["eval", "--model", model, "--out", str(tmp_path / "z"), "--zeta", "0",
                               "--form", "omega_plus", "--grid", "0.5:1:2,0.5:1:2"])
    assert res.exit_code == 0, res.output


def test_verify_command(runner, tmp_path):
    model = _write(tmp_path, "ov.json", OV)
    res = runner.invoke(main, ["verify", "--model", model, "--out", str(tmp_path), "--points", "3",
                               "--tn-points", "1", "--family", "both"])
    assert res.exit_code == 0, res.output
    rep = json.loads((tmp_path / "certificates.json").read_text())
    assert rep["ok"] is True
    assert any(c["name"].startswith("rh.") for c in rep["certificates"])


def test_export(runner, tmp_path):
    res = runner.invoke(main, ["export", "--model", _write(tmp_path, "ov.json", OV), "--out", str(tmp_path),
                               "--n", "20"])
    assert res.exit_code == 0, res.output
    for name in ("f_curve.csv", "potential_radial.csv", "model.json"):
        assert (tmp_path / name).exists()
    assert json.loads((tmp_path / "model.json").read_text()) == OV
