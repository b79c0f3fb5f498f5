import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from sparseqst import __version__
from sparseqst.cli import bench_rows, main
from sparseqst.tomography import SparseState


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_gen_state_single_term(capsys):
    code, out, _ = run(capsys, "gen-state", "--n", "4", "--k", "1")
    assert code == 0
    s = SparseState.from_json(json.loads(out))
    assert s.K == 1 and abs(abs(s.terms[0][1]) - 1) < 1e-12


def test_gen_state_constraints_and_determinism(tmp_path, capsys):
    paths = [tmp_path / "a.json", tmp_path / "b.json"]
    for p in paths:
        assert main(["gen-state", "--n", "6", "--k", "4", "--min-prob", "0.05", "--seed", "7", "--out", str(p)]) == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()
    s = SparseState.load(paths[0])
    assert len(s.support) == 4
    assert s.min_prob() >= 0.05 - 1e-12
    assert abs(sum(abs(c) ** 2 for _, c in s.terms) - 1) < 1e-12


def test_gen_state_infeasible(capsys):
    code, _, err = run(capsys, "gen-state", "--n", "2", "--k", "3", "--min-prob", "0.5")
    assert code == 2 and "error" in err


def test_verify_unitary_passes(capsys):
    code, out, _ = run(capsys, "verify-unitary", "--n", "3", "--trials", "10")
    rep = json.loads(out)
    assert code == 0 and rep["passed"]
    assert max(rep["checks"].values()) < 1e-10
    assert rep["checks"]["golden_n1"] < 1e-15
    assert rep["seed"] == 0 and rep["version"] == __version__


def test_verify_unitary_zero_tolerance_fails(capsys):
    code, out, _ = run(capsys, "verify-unitary", "--n", "2", "--trials", "1", "--tol", "0")
    assert code == 1 and not json.loads(out)["passed"]


def test_conjecture_scan_report(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("QST_THREADS", "2")
    out = tmp_path / "scan.json"
    code, stdout, _ = run(capsys, "conjecture-scan", "--n", "3", "--trials", "8", "--seed", "4", "--out", str(out))
    rep = json.loads(out.read_text())
    assert code == 0
    assert rep["seed"] == 4 and rep["config"]["trials"] == 8
    assert len(rep["records"]) == 8
    assert "conforming_fraction" in stdout
    monkeypatch.setenv("QST_THREADS", "1")
    run(capsys, "conjecture-scan", "--n", "3", "--trials", "8", "--seed", "4", "--out", str(tmp_path / "serial.json"))
    assert json.loads((tmp_path / "serial.json").read_text())["records"] == rep["records"]


def test_tomography_single_basis_state(tmp_path, capsys):
    state = tmp_path / "s.json"
    SparseState(3, (("101", 1j),)).dump(state)
    out = tmp_path / "r.json"
    code, stdout, _ = run(capsys, "tomography", "--state", str(state), "--t", "4", "--out", str(out))
    rep = json.loads(out.read_text())
    assert code == 0
    assert rep["report"]["fidelity"] == pytest.approx(1, abs=1e-12)
    assert "fidelity=1.000000" in stdout and "settings=1" in stdout


def test_tomography_generated_instance(capsys):
    code, out, err = run(capsys, "tomography", "--n", "4", "--k", "3", "--min-prob", "0.1", "--t", "6", "--seed", "3")
    assert code == 0
    rep = json.loads(out)
    assert rep["report"]["support_exact"]
    assert "repetitions=" in err


def test_tomography_threshold_controls_exit(capsys):
    code, _, _ = run(
        capsys, "tomography", "--n", "3", "--k", "2", "--t", "4", "--shots-mag", "10", "--shots-phase", "10",
        "--fidelity-threshold", "1.5",
    )
    assert code == 1


def test_tomography_missing_file(capsys):
    code, _, err = run(capsys, "tomography", "--state", "/nonexistent/state.json")
    assert code == 2 and "cannot read" in err


def test_tomography_needs_input(capsys):
    code, _, _ = run(capsys, "tomography")
    assert code == 2


def test_usage_error_exit_code(capsys):
    with pytest.raises(SystemExit) as info:
        main(["gen-state", "--n", "x"])
    assert info.value.code == 2


def test_bench_csv_header(capsys):
    code, out, _ = run(capsys, "bench", "--n-min", "2", "--n-max", "3", "--reps", "3")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "n,op,mean_ns,stddev"
    rows = list(csv.DictReader(io.StringIO(out)))
    assert {r["op"] for r in rows} == {"uphi_element", "dense_apply"}


def test_bench_json(capsys):
    code, out, _ = run(capsys, "bench", "--n-min", "2", "--n-max", "2", "--reps", "2", "--format", "json")
    assert code == 0 and json.loads(out)["rows"]


def min_time(rows, op, n):
    return next(r["mean_ns"] for r in rows if r["op"] == op and r["n"] == n)


def test_element_cost_grows_slowly():
    ratios = []
    for attempt in range(3):
        rows = bench_rows(10, 20, reps=30, dense_max=0, seed=attempt)
        ratios.append(min_time(rows, "uphi_element", 20) / min_time(rows, "uphi_element", 10))
    assert min(ratios) < 4


def test_dense_apply_doubles_at_larger_n():
    # below n ~ 10 fixed per-gate overhead hides the 2^n growth
    ratios = []
    for attempt in range(3):
        rows = bench_rows(12, 13, reps=20, dense_max=13, seed=attempt)
        ratios.append(min_time(rows, "dense_apply", 13) / min_time(rows, "dense_apply", 12))
    assert 1.6 <= float(np.median(ratios)) <= 3.0


def test_console_script_help():
    res = subprocess.run([sys.executable, "-m", "sparseqst.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for sub in ("gen-state", "verify-unitary", "conjecture-scan", "tomography", "bench"):
        assert sub in res.stdout
