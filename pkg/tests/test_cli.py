import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from chshrand import cli
from chshrand.profile import SettingSet, write_setting_set


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def run_json(argv, capsys):
    code, out, _ = run(argv, capsys)
    return code, json.loads(out)


def test_bound(capsys):
    code, rep = run_json(["bound", "--c", "0.146446609406726"], capsys)
    assert code == 0 and rep["schema"] == 1
    assert rep["independent"] == pytest.approx(0.26428, abs=5e-5)
    assert rep["correlated"] == pytest.approx(0.25815, abs=5e-5)


def test_c_preset(capsys):
    _, a = run_json(["bound", "--c-preset", "cq"], capsys)
    _, b = run_json(["bound"], capsys)
    assert a == b and a["c"] == "0.146446609406726"


def test_table1(capsys):
    code, rep = run_json(["table1"], capsys)
    assert code == 0
    assert rep["n1_correlated"] == pytest.approx((2 * 2 ** 0.5 + 4) / 24, abs=1e-12)
    assert rep["n1_independent"] == pytest.approx(0.353553, abs=1e-6)


def test_solve_uniform(capsys):
    code, rep = run_json(["solve-uniform", "--n", "2"], capsys)
    assert code == 0
    assert rep["value"] == pytest.approx(1 / 3)
    assert len(rep["witness_x"]) == 3 and len(rep["witness_y"]) == 3


def test_solve_dist(capsys):
    code, rep = run_json(["solve-dist", "--n", "1"], capsys)
    assert code == 0
    assert rep["value"] == pytest.approx(0.353553, abs=1e-6)


def test_construct_table_csv(capsys):
    code, out, _ = run(["construct", "--n-list", "2,8,1024", "--format", "csv"], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [int(r["n"]) for r in rows] == [2, 8, 1024]
    assert float(rows[0]["objective"]) == 1.0
    assert float(rows[1]["objective"]) == pytest.approx(93 ** -0.25, abs=1e-15)
    assert abs(float(rows[2]["objective"]) - 0.26428) < 0.01


def test_certify(tmp_path, capsys):
    p = tmp_path / "a.txt"
    write_setting_set(SettingSet.threshold(8, 3), p)
    code, rep = run_json(["certify", "--x", str(p), "--m", "8"], capsys)
    assert code == 0 and rep["sound"]


def test_certify_infeasible(tmp_path, capsys):
    p = tmp_path / "full.txt"
    write_setting_set(SettingSet.full(2), p)
    code, _, err = run(["certify", "--x", str(p)], capsys)
    assert code == 1 and "infeasible" in err


def test_invalid_inputs(tmp_path, capsys):
    assert run(["bound", "--c", "0.5"], capsys)[0] == 2
    assert run(["bound", "--c", "zzz"], capsys)[0] == 2
    assert run(["solve-uniform", "--n", "7"], capsys)[0] == 2
    assert run(["certify", "--x", str(tmp_path / "missing")], capsys)[0] == 2
    assert run(["nonsense"], capsys)[0] == 2
    bad = tmp_path / "bad.txt"
    bad.write_text("01\n1\n")
    assert run(["certify", "--x", str(bad)], capsys)[0] == 2
    assert run(["construct"], capsys)[0] == 2


def test_infeasible_construct(capsys):
    assert run(["construct", "--n", "8", "--l", "6"], capsys)[0] == 1


def test_verify_deterministic(capsys):
    argv = ["verify", "--suite", "lemmas", "--samples", "40", "--seed", "3"]
    code1, out1, _ = run(argv, capsys)
    code2, out2, _ = run(argv, capsys)
    assert code1 == 0 and out1 == out2
    names = [r["name"] for r in json.loads(out1)["rows"]]
    assert "ceil reciprocal bound" in names and "discretization gap below 2/m" in names


def test_verify_profiles_has_entropy_row(capsys):
    _, rep = run_json(["verify", "--suite", "profiles", "--samples", "20"], capsys)
    assert any("entropy volume bound" in r["name"] for r in rep["rows"])


def test_simulate_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert cli.main(["simulate", "--runs", "100000", "--seed", "4", "-o", str(a)]) == 0
    assert cli.main(["simulate", "--runs", "100000", "--seed", "4", "--workers", "3", "-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_simulate_strategy_file(tmp_path, capsys):
    p = tmp_path / "s.json"
    p.write_text(json.dumps({"n": 1, "lambdas": [{"weight": "1", "settings": {"joint": {
        "0,0": "1/4", "0,1": "1/4", "1,0": "1/4", "1,1": "1/4"}}}]}))
    code, rep = run_json(["simulate", "--strategy", str(p), "--runs", "20000", "--seed", "1"], capsys)
    assert code == 0 and rep["analytic_s"] == 2.0
    p.write_text("{}")
    assert run(["simulate", "--strategy", str(p)], capsys)[0] == 2


def test_workers_env(monkeypatch):
    args = cli.build_parser().parse_args(["simulate"])
    monkeypatch.setenv(cli.WORKERS_ENV, "3")
    assert cli.resolve_workers(args) == 3
    monkeypatch.setenv(cli.WORKERS_ENV, "x")
    with pytest.raises(cli.UsageError):
        cli.resolve_workers(args)
    args = cli.build_parser().parse_args(["simulate", "--workers", "2"])
    assert cli.resolve_workers(args) == 2


def _parse_sim_row(row):
    return {
        "tests": int(row["tests"]),
        "n": int(row["n"]),
        "empirical_s": float(row["empirical_s"]),
        "standard_error": float(row["standard_error"]),
        "empirical_p": float(row["empirical_p"]),
        "seed": int(row["seed"]),
        "shards": int(row["shards"]),
    }


def test_csv_round_trip_random_reports():
    rng = np.random.default_rng(99)
    cols = ["tests", "n", "empirical_s", "standard_error", "empirical_p", "seed", "shards"]
    for _ in range(100):
        rec = {
            "tests": int(rng.integers(1, 10**9)),
            "n": int(rng.integers(1, 31)),
            "empirical_s": float(rng.uniform(-4, 4)),
            "standard_error": float(rng.random() * 1e-3),
            "empirical_p": float(rng.uniform(0.25, 1)),
            "seed": int(rng.integers(0, 2**62)),
            "shards": int(rng.integers(1, 1000)),
        }
        text = cli.render({}, [rec], cols, "csv")
        back = _parse_sim_row(next(csv.DictReader(io.StringIO(text))))
        assert back == rec


def test_console_script_entry():
    out = subprocess.run([sys.executable, "-m", "chshrand.cli", "table1", "--format", "csv"],
                         capture_output=True, text=True, check=True).stdout
    assert out.splitlines()[0] == "setting,correlated,independent"
