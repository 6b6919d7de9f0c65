import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from rsvd_lab.cli import main
from rsvd_lab.densela import read_matrix, write_matrix


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out


def report(argv, capsys):
    code, out = run(argv + ["--no-timing"], capsys)
    assert code == 0, out.err
    rep = json.loads(out.out)
    assert rep["schema_version"] == "1"
    assert "timing" not in rep
    return rep


def test_gen_and_sketch_identity(tmp_path, capsys):
    f = str(tmp_path / "eye.csv")
    rep = report(["gen", "identity", "--n", "10", "--out", f], capsys)
    assert rep["results"]["shape"] == [10, 10]
    np.testing.assert_array_equal(read_matrix(f), np.eye(10))
    rep = report(["sketch", "--in", f, "--algo", "rsi", "--k", "2"], capsys)
    assert rep["results"]["errors"]["two"] == pytest.approx(1.0, abs=1e-12)
    assert rep["results"]["matvec_count"] == 2 * 7
    assert rep["params"]["ell"] == 7


@pytest.mark.parametrize("algo", ["basic", "rsi", "small-k", "adaptive"])
def test_sketch_audit(algo, tmp_path, capsys):
    f = str(tmp_path / "a.bin")
    report(["gen", "decay", "--n", "60", "--rate", "0.7", "--out", f], capsys)
    args = ["sketch", "--in", f, "--algo", algo, "--k", "3", "--q", "1", "--audit", "--out", str(tmp_path / "fac")]
    rep = report(args, capsys)
    assert rep["results"]["deterministic_violations"] == []
    left = read_matrix(str(tmp_path / "fac.left.bin"))
    assert left.shape == (60, 3)


def test_sketch_wide(tmp_path, capsys, rng):
    f = str(tmp_path / "w.csv")
    a = rng.standard_normal((8, 20))
    write_matrix(f, a)
    rep = report(["sketch", "--in", f, "--k", "2", "--ell", "5", "--q", "2", "--audit"], capsys)
    assert rep["results"]["deterministic_violations"] == []
    assert rep["results"]["errors"]["two"] >= np.linalg.svd(a, compute_uv=False)[2] * (1 - 1e-12)


def test_no_timing_is_byte_identical(tmp_path, capsys):
    f = str(tmp_path / "g.bin")
    report(["gen", "log-gaussian", "--n", "50", "--seed", "3", "--out", f], capsys)
    outs = []
    for _ in range(2):
        code, out = run(["sketch", "--in", f, "--k", "4", "--q", "1", "--seed", "9", "--no-timing"], capsys)
        outs.append(out.out)
    assert outs[0] == outs[1]
    code, out = run(["sketch", "--in", f, "--k", "4"], capsys)
    assert "wall_seconds" in json.loads(out.out)["timing"]


def test_report_file(tmp_path, capsys):
    f = str(tmp_path / "e.csv")
    rpt = tmp_path / "r.json"
    code, out = run(["gen", "identity", "--n", "4", "--out", f, "--report", str(rpt)], capsys)
    assert code == 0 and out.out == ""
    assert json.loads(rpt.read_text())["command"] == "gen"


def test_bounds_delta_sets_p(capsys):
    rep = report(["bounds", "--gen", "exponential", "--n", "60", "--k", "3", "--ell", "25", "--delta", "1e-16"], capsys)
    assert rep["params"]["p"] == 16
    assert "hmt" in rep["results"]


def test_bounds_spectrum_file(tmp_path, capsys):
    f = tmp_path / "s.csv"
    f.write_text("\n".join(str(0.5**j) for j in range(30)) + "\n")
    rep = report(["bounds", "--spectrum", str(f), "--k", "2", "--ell", "6", "--q", "1", "--w", "2.0"], capsys)
    r = rep["results"]
    assert r["optimum"]["two"] == pytest.approx(0.25)
    assert {"average", "deviation", "deterministic"} <= set(r)


def test_estimate_norm(tmp_path, capsys):
    f = str(tmp_path / "eye.csv")
    report(["gen", "identity", "--n", "6", "--out", f], capsys)
    rep = report(["estimate-norm", "--in", f, "--one", "--exact"], capsys)
    assert rep["results"]["one"]["plain"] == 1.0
    assert rep["results"]["one"]["randomized"] == 1.0
    d = str(tmp_path / "d.csv")
    report(["gen", "diag", "--values", "5", "3", "1", "--out", d], capsys)
    rep = report(["estimate-norm", "--in", d, "--two", "--q", "10", "--exact", "--cond"], capsys)
    assert rep["results"]["two"]["estimate"] == pytest.approx(5.0, rel=1e-6)
    assert rep["results"]["cond"]["kappa1_est"] == pytest.approx(5.0)


def test_errors(tmp_path, capsys):
    code, out = run(["sketch", "--in", str(tmp_path / "missing.csv"), "--k", "2"], capsys)
    assert code == 1 and out.err.startswith("rsvd-lab: error:")
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"RSIM\x00")
    code, out = run(["estimate-norm", "--in", str(bad), "--one"], capsys)
    assert code == 1
    f = str(tmp_path / "eye.csv")
    report(["gen", "identity", "--n", "6", "--out", f], capsys)
    assert run(["estimate-norm", "--in", f], capsys)[0] == 1
    assert run(["sketch", "--in", f, "--k", "7"], capsys)[0] == 1
    assert run(["experiment", "tail-mc", "--mu", "1.0"], capsys)[0] == 1
    with pytest.raises(SystemExit):
        main(["gen", "nonsense", "--out", f])


def test_experiment_csv(tmp_path, capsys):
    c = tmp_path / "curves.csv"
    rep = report(["experiment", "power-compare", "--n", "60", "--seeds", "2", "--csv", str(c)], capsys)
    assert len(rep["results"]) == 2
    assert rep["aggregate"]["median_power_matvecs"] is not None
    rows = list(csv.reader(c.open()))
    assert rows[0] == ["method", "seed", "q", "matvecs", "rel_sigma1_error"]
    assert len(rows) > 3


@pytest.mark.parametrize(
    "argv",
    [
        ["hager-adversarial", "--n", "30", "--seeds", "2"],
        ["deviation-mc", "--seeds", "5"],
        ["deterministic-audit", "--triples", "4"],
        ["rank-revealing", "--seeds", "5"],
        ["matvec-table", "--n", "80", "--k", "5", "--tols", "1e-6", "--qs", "0", "2"],
        ["tail-mc", "--trials", "1000"],
    ],
)
def test_experiment_smoke(argv, capsys):
    rep = report(["experiment", *argv], capsys)
    assert rep["command"] == f"experiment {argv[0]}"


def test_module_entry_point(tmp_path):
    f = str(tmp_path / "eye.csv")
    res = subprocess.run([sys.executable, "-m", "rsvd_lab", "gen", "identity", "--n", "3", "--out", f,
                          "--no-timing"], capture_output=True, text=True, check=True)
    assert json.loads(res.stdout)["results"]["shape"] == [3, 3]
