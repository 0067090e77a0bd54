import json
import subprocess
import sys

import pytest

from qbplab.cli import main
from qbplab.model import load_program


@pytest.fixture
def fig1(tmp_path):
    path = tmp_path / "fig1.json"
    assert main(["build", "--family", "fig1", "--out", str(path)]) == 0
    return str(path)


def test_eval_fig1(fig1, capsys):
    capsys.readouterr()
    assert main(["eval", fig1, "--input", "00", "--steps", "3"]) == 0
    out = capsys.readouterr().out
    assert "p_1 = 1" in out and "halting at steps 2" in out


def test_eval_json(fig1, capsys):
    capsys.readouterr()
    assert main(["eval", fig1, "--input", "01", "--steps", "4", "--json"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["p"]["0"] == pytest.approx(0.5) and data["p"]["1"] == pytest.approx(0.5)


def test_eval_wrong_length(fig1, capsys):
    assert main(["eval", fig1, "--input", "000"]) == 2
    assert "2 variables" in capsys.readouterr().err


def test_missing_file_and_bad_json(tmp_path, capsys):
    assert main(["validate", str(tmp_path / "none.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"n_vars": 1,\n "mode": }')
    assert main(["validate", str(bad)]) == 2
    assert "line 2" in capsys.readouterr().err


def test_bad_arguments():
    assert main(["frobnicate"]) == 2
    assert main([]) == 2


def test_validate_exit_codes(fig1, tmp_path, capsys):
    assert main(["validate", fig1]) == 0
    doc = json.loads(open(fig1).read())
    doc["edges"][0]["amp"] = [0.9, 0]
    broken = tmp_path / "broken.json"
    broken.write_text(json.dumps(doc))
    capsys.readouterr()
    assert main(["validate", str(broken), "--json"]) == 1
    assert json.loads(capsys.readouterr().out)["violations"]


def test_abs(fig1, capsys):
    capsys.readouterr()
    assert main(["abs", fig1, "--input", "10", "--json"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["p"]["0"] == pytest.approx(1) and data["worst_case"] == 2
    assert main(["abs", fig1, "--input", "10", "--method", "damped"]) == 0


@pytest.mark.parametrize("family, extra", [("disj", ["--n", "4"]), ("gm-ip", ["--n", "4"]),
                                           ("perm", ["--n", "2"]), ("ind", ["--n", "4"]),
                                           ("isa", ["--n", "4"]), ("parity", ["--n", "3"]),
                                           ("tree", ["--n", "2"]), ("min-rev", ["--n", "4", "--function", "DISJ"])])
def test_build_and_validate(tmp_path, family, extra):
    out = tmp_path / f"{family}.json"
    assert main(["build", "--family", family, "--out", str(out)] + extra) == 0
    assert main(["validate", str(out)]) == 0


def test_build_needs_n(tmp_path):
    assert main(["build", "--family", "disj", "--out", str(tmp_path / "x.json")]) == 2
    assert main(["build", "--family", "disj", "--n", "3", "--out", str(tmp_path / "x.json")]) == 2


@pytest.mark.parametrize("kind, extra", [("levelize", ["--t", "3"]), ("realify", []), ("clock", ["--t", "2"])])
def test_transforms(fig1, tmp_path, kind, extra):
    out = tmp_path / "out.json"
    assert main(["transform", kind, fig1, str(out)] + extra) == 0
    assert load_program(out).mode == "quantum"


def test_transform_wrong_mode(fig1, tmp_path):
    assert main(["transform", "rand2gm", fig1, str(tmp_path / "o.json")]) == 2


def test_gatesearch(tmp_path, capsys):
    s = 5 ** -0.5
    target = tmp_path / "t.json"
    target.write_text(json.dumps([[[s, 0], [2 * s, 0]], [[-2 * s, 0], [s, 0]]]))
    capsys.readouterr()
    assert main(["gatesearch", "--dim", "2", "--target", str(target), "--eps", "1e-9", "--json"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["gates"] == [[2, 1]] and data["error"] <= 1e-12
    assert main(["gatesearch", "--dim", "3", "--target", str(target), "--eps", "0.1"]) == 2


def test_qtm(tmp_path, capsys):
    capsys.readouterr()
    assert main(["qtm", "simulate", "bundled:parity-4", "--input", "1101", "--json"]) == 0
    assert json.loads(capsys.readouterr().out)["p"]["1"] == pytest.approx(1)
    out = tmp_path / "c.json"
    assert main(["qtm", "compile", "bundled:or-3", "--out", str(out)]) == 0
    assert load_program(out).n_vars == 3
    assert main(["qtm", "compile", "bundled:bidirectional"]) == 1
    assert main(["qtm", "simulate", "bundled:nope", "--input", "1"]) == 2


def test_experiments(tmp_path, capsys):
    csv_path = tmp_path / "k.csv"
    assert main(["experiment", "kstable", "--csv", str(csv_path)]) == 0
    assert csv_path.read_text().splitlines()[1] == "DET_Z2,9,2,1"
    assert main(["experiment", "perturbation", "--trials", "20", "--seed", "3"]) == 0
    assert main(["experiment", "scheme", "--function", "IND", "--n", "4"]) == 0
    assert main(["experiment", "entropy", "--n", "4"]) == 0
    capsys.readouterr()
    assert main(["experiment", "perm-error", "--n", "2", "--json"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["ok"] and len(data["rows"]) == 16


def test_oracle(capsys):
    capsys.readouterr()
    assert main(["oracle", "min-obdd", "--family", "IP", "--n", "4", "--json"]) == 0
    assert json.loads(capsys.readouterr().out)["min_obdd_size"] == 8
    assert main(["oracle", "min-obdd", "--family", "DISJ", "--n", "4", "--order", "0,1"]) == 2


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "qbplab", "oracle", "min-obdd", "--family", "DISJ", "--n", "4"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0 and "minimal OBDD size 6" in res.stdout
