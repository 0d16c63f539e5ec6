import json
import subprocess
import sys

import pytest

from meanking.bases import pauli_bases
from meanking.cli import main


def run(*args, stdin=None):
    proc = subprocess.run(
        [sys.executable, "-m", "meanking", *args],
        input=stdin,
        capture_output=True,
        text=True,
        timeout=600,
    )
    return proc.returncode, proc.stdout, proc.stderr


def test_sample_and_classify(tmp_path):
    code, out, _ = run("sample", "--pauli")
    assert code == 0
    code, out, _ = run("classify", "--in", "-", stdin=out)
    assert code == 0
    assert json.loads(out)["label"] == "tomographically-complete"


def test_classify_repeated_basis(tmp_path):
    path = tmp_path / "rep.json"
    path.write_text(pauli_bases().with_bases([0, 1, 0]).to_json())
    code, out, _ = run("classify", "--in", str(path))
    assert code == 0
    assert json.loads(out)["label"] == "degenerate"


def test_strategy_then_simulate():
    code, strat, _ = run("strategy", "--mub", "--dim", "3")
    assert code == 0
    code, out, _ = run("simulate", "--rounds", "10000", stdin=strat)
    assert code == 0
    assert "failures=0" in out


def test_strategy_infeasible_exit_1():
    # seed 0 at d=2 has no classical model
    code, out, err = run("model", "--dim", "2", "--seed", "0")
    assert code == 1 and json.loads(out)["status"] == "infeasible"
    code, out, err = run("strategy", "--dim", "2", "--seed", "0")
    assert code == 1 and out == "" and "no classical model" in err


def test_malformed_json_exit_2():
    code, out, err = run("classify", "--in", "-", stdin="{not json")
    assert code == 2 and "malformed JSON" in err
    bad = json.loads(pauli_bases().to_json())
    bad["bases"][0][1] = bad["bases"][0][0]
    code, _, err = run("classify", "--in", "-", stdin=json.dumps(bad))
    assert code == 2 and "orthonormal" in err


def test_usage_errors():
    assert main(["table"]) == 2
    assert main(["nosuch"]) == 2
    assert main(["sample", "--dim", "0"]) == 2
    assert main(["sample", "--mub", "--dim", "6"]) == 2


def test_missing_output_directory(tmp_path):
    assert main(["sample", "--pauli", "--out", str(tmp_path / "no" / "x.json")]) == 2


def test_out_file(tmp_path):
    path = tmp_path / "bs.json"
    assert main(["sample", "--dim", "3", "--seed", "4", "--out", str(path)]) == 0
    assert json.loads(path.read_text())["d"] == 3


@pytest.mark.parametrize(
    "args",
    [
        ("sample", "--dim", "3", "--seed", "5"),
        ("model", "--pauli", "--fit"),
        ("value", "--dim", "2", "--seed", "3"),
        ("bell", "--samples", "2000", "--seed", "2"),
        ("bell", "--fig1", "--samples", "20", "--seed", "2"),
        ("debias", "--dim", "3", "--seed", "1", "--steps", "50"),
    ],
)
def test_byte_identical(args):
    a, b = run(*args), run(*args)
    assert a[0] in (0, 1)
    assert a[1] == b[1] and a[1]


def test_table_reproducible_apart_from_timing():
    a = run("table", "--dim", "2", "--samples", "40", "--seed", "7")[1].splitlines()
    b = run("table", "--dim", "2", "--samples", "40", "--seed", "7", "--jobs", "2")[1].splitlines()
    assert a[0] == b[0] == "d,k,N,p_s,p_s_lo,p_s_hi,e_s,e_s_stderr,seed,seconds"
    assert a[1].rsplit(",", 1)[0] == b[1].rsplit(",", 1)[0]


def test_value_json():
    code, out, _ = run("value", "--mub", "--dim", "3")
    assert code == 0 and abs(json.loads(out)["value"] - 1) < 1e-6


@pytest.mark.slow
def test_table_example_row():
    code, out, _ = run("table", "--dim", "2", "--samples", "10000", "--seed", "7")
    row = dict(zip(*[line.split(",") for line in out.strip().split("\n")]))
    assert code == 0 and abs(float(row["p_s"]) - 0.3334) < 0.015
