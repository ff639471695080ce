import csv
import json
import math
import subprocess
import sys

import pytest

from conftest import FIXTURES, INVALID
from hybridid.cli import main

ENTREPRENEUR = str(FIXTURES / "entrepreneur.yaml")
PUT = str(FIXTURES / "put_option.yaml")


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def read_csv(path):
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    return rows[0], [[float(x) for x in r] for r in rows[1:]]


def test_check_ok(capsys):
    code, out, err = run(capsys, "check", ENTREPRENEUR)
    assert code == 0 and out == ""
    assert "ok" in err


def test_check_invalid_names_cycle(capsys):
    code, _, err = run(capsys, "check", str(INVALID / "cycle.yaml"))
    assert code == 1
    assert "cycle A -> B -> A" in err


def test_missing_file_exits_two(capsys, tmp_path):
    code, _, err = run(capsys, "solve", str(tmp_path / "absent.yaml"))
    assert code == 2 and err


def test_bad_order_exits_one(capsys):
    code, _, err = run(capsys, "solve", ENTREPRENEUR, "--order", "P,Ca,Z2,Cn,Qa,Z1,Qn")
    assert code == 1
    assert "P is eliminated before Ca" in err


def test_solve_report(capsys):
    code, out, err = run(capsys, "solve", ENTREPRENEUR)
    assert code == 0
    rep = json.loads(out)
    assert rep["rootValue"] == pytest.approx(194.8649, abs=1e-3)
    assert rep["decisions"]["P"]["rules"][0]["argmax"] == pytest.approx(24.4038, abs=1e-3)
    assert [s["variable"] for s in rep["steps"]][-1] == "P"
    # timings are kept out of the report so it is reproducible
    assert "seconds" not in out and "solved in" in err


def test_reports_and_csvs_are_byte_identical(capsys, tmp_path):
    for i in (1, 2):
        code, _, _ = run(capsys, "solve", ENTREPRENEUR, "--report", str(tmp_path / f"r{i}.json"),
                         "--plot", "P", str(tmp_path / f"p{i}.csv"))
        assert code == 0
    for stem in ("r{}.json", "p{}.csv"):
        a = (tmp_path / stem.format(1)).read_bytes()
        assert a and a == (tmp_path / stem.format(2)).read_bytes()


def test_entrepreneur_plot_peak(capsys, tmp_path):
    path = tmp_path / "p.csv"
    assert run(capsys, "solve", ENTREPRENEUR, "--report", str(tmp_path / "r.json"),
               "--plot", "P", str(path))[0] == 0
    header, rows = read_csv(path)
    assert header == ["x", "value"] and len(rows) == 1000
    x, v = max(rows, key=lambda r: r[1])
    assert x == pytest.approx(24.40, abs=0.05)
    assert v == pytest.approx(194.87, abs=0.05)
    assert rows[0][0] == 1.0 and rows[-1][0] < 47


def test_put_plot_crosses_near_threshold(capsys, tmp_path):
    path = tmp_path / "s2.csv"
    code, _, _ = run(capsys, "solve", PUT, "--report", str(tmp_path / "r.json"),
                     "--plot", "S2", str(path), "--when", "D1=h1")
    assert code == 0
    header, rows = read_csv(path)
    assert header == ["x", "e2", "h2"]
    best = [header[1 + r[1:].index(max(r[1:]))] for r in rows]
    cross = [rows[i][0] for i in range(1, len(rows))
             if best[i - 1] == "e2" and best[i] == "h2" and 5 <= rows[i][0] < 35]
    assert len(cross) == 1
    assert cross[0] == pytest.approx(30.14, abs=0.3)


def test_plot_range_and_bad_variable(capsys, tmp_path):
    path = tmp_path / "p.csv"
    code, _, _ = run(capsys, "solve", ENTREPRENEUR, "--report", str(tmp_path / "r.json"),
                     "--plot", "P", str(path), "--range", "20", "30")
    assert code == 0
    _, rows = read_csv(path)
    assert rows[0][0] == 20.0 and rows[-1][0] == math.nextafter(30.0, -math.inf)
    code, _, err = run(capsys, "solve", ENTREPRENEUR, "--plot", "Nope", str(path))
    assert code == 1 and "Nope" in err


def test_validate(capsys, tmp_path):
    report = tmp_path / "r.json"
    assert run(capsys, "solve", PUT, "--report", str(report))[0] == 0
    outs = []
    for _ in range(2):
        code, out, _ = run(capsys, "validate", PUT, "--strategy", str(report),
                           "--samples", "20000", "--seed", "4")
        assert code == 0
        outs.append(out)
    assert outs[0] == outs[1]
    est = json.loads(outs[0])
    assert est["n"] == 20000 and est["seed"] == 4
    assert abs(est["z"]) < 4


def test_console_entry_point():
    r = subprocess.run([sys.executable, "-m", "hybridid.cli", "check", ENTREPRENEUR],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "ok" in r.stderr
