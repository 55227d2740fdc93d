import csv
import io
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from minegames import io as mio
from minegames.cli import main
from minegames.core import GameParams, Policy
from minegames.errors import IllegalActionError
from minegames.immediate import iter_compact_policies, solve
from minegames.simulate import load_builtin
from minegames.strategic import solve_strategic


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.mark.parametrize(
    "params,name",
    [(GameParams("immediate", 0.3, 3), "deviator-d3"), (GameParams("immediate", 0.3, 7), "frontier"),
     (GameParams("strategic", 0.3, 5), "frontier"), (GameParams("immediate", 0.3, 6), "never-capitulate")],
)
def test_policy_round_trip_builtins(params, name):
    pol = load_builtin(name, params)
    text = mio.dump_policy(pol)
    again = mio.load_policy(text)
    assert again == pol
    assert mio.dump_policy(again) == text


def test_policy_round_trip_solver_outputs():
    for rep in (solve(GameParams("immediate", 0.455, 5)), solve_strategic(GameParams("strategic", 0.4, 6))):
        assert mio.load_policy(mio.dump_policy(rep.policy)) == rep.policy


@settings(max_examples=30, deadline=None)
@given(st.data())
def test_policy_round_trip_compact(data):
    params = GameParams("immediate", 0.3, 3)
    mining, s = data.draw(st.sampled_from(list(iter_compact_policies(params))))
    pol = Policy.from_mining_set(params, mining, s)
    assert mio.load_policy(mio.dump_policy(pol)) == pol


def test_policy_default_fill(tmp_path):
    doc = {"format": "minegames-policy", "version": 1, "model": "immediate", "d": 4, "a_max": None,
           "default_landing_s": 1, "entries": [{"a": 1, "b": 1, "action": "mine"}]}
    path = tmp_path / "p.json"
    path.write_text(json.dumps(doc))
    pol = mio.load_policy(path)
    assert pol[(0, 0)].kind == 0
    assert pol[(0, 1)].s == 0  # landing 1 is not below b = 1
    assert pol[(0, 3)].s == 1
    assert pol[(1, 1)].kind == 0


@pytest.mark.parametrize(
    "entry",
    [{"a": 0, "b": 2, "action": "capitulate", "s": 2}, {"a": 0, "b": 1, "action": "release"},
     {"a": 3, "b": 1, "action": "mine"}, {"a": 0, "b": 1, "action": "fly"}, {"a": 0, "b": 1, "action": "capitulate"}],
)
def test_policy_rejects_bad_entries(entry):
    doc = {"format": "minegames-policy", "version": 1, "model": "immediate", "d": 4, "a_max": None,
           "default_landing_s": 0, "entries": [entry]}
    with pytest.raises(ValueError):
        mio.policy_from_dict(doc)


def test_solve_json(capsys):
    code, out, _ = run(capsys, "solve", "--model", "immediate", "--p", "0.3", "--d", "10")
    assert code == 0
    doc = json.loads(out)
    res = doc["result"]
    assert abs(res["g_star"] - 0.3) < 1e-8
    assert doc["manifest"]["command"] == "solve" and "duration_s" not in doc["manifest"]
    assert [0, 0, 0.0] in res["potential"]
    assert len(res["potential"]) == sum(b + 2 for b in range(11))
    assert mio.policy_from_dict(res["policy"]) == solve(GameParams("immediate", 0.3, 10)).policy


def test_solve_strategic_and_csv(capsys):
    code, out, _ = run(capsys, "solve", "--model", "strategic", "--p", "0.25", "--d", "20")
    assert code == 0 and abs(json.loads(out)["result"]["g_star"] - 0.25) < 1e-8
    code, out, _ = run(capsys, "solve", "--p", "0.3", "--d", "3", "--format", "csv")
    rows = mio.read_csv_rows(out)
    assert out.startswith("# manifest: ")
    assert rows[0] == {"a": "0", "b": "0", "phi": "0.0", "action": "mine", "s": ""}


def test_usage_errors(capsys):
    code, _, err = run(capsys, "solve", "--model", "immediate", "--p", "1.5", "--d", "10")
    assert code == 2 and "p out of range" in err
    code, _, err = run(capsys, "solve", "--model", "immediate", "--p", "0.3", "--d", "10", "--a-max", "30")
    assert code == 2
    assert run(capsys, "solve", "--p", "0.3")[0] == 2
    assert run(capsys, "frobnicate")[0] == 2
    assert run(capsys, "table", "--d-list", "1,3")[0] == 2


def test_numeric_failure_exit(capsys):
    code, _, err = run(capsys, "solve", "--p", "0.4", "--d", "10", "--max-iters", "2")
    assert code == 1 and "did not converge" in err
    code, _, err = run(capsys, "threshold", "--d", "3", "--bracket", "0.46", "0.6")
    assert code == 1 and "0.46" in err


def test_threshold_and_table_csv(capsys):
    code, out, _ = run(capsys, "threshold", "--model", "immediate", "--d", "2")
    rows = mio.read_csv_rows(out)
    assert code == 0 and list(rows[0]) == ["d", "threshold", "bracket_low", "bracket_high"]
    assert abs(float(rows[0]["threshold"]) - 0.5) <= 0.002
    code, out, _ = run(capsys, "table", "--d-list", "2,3", "--format", "json")
    assert [r["d"] for r in json.loads(out)["result"]["rows"]] == [2, 3]


def test_simulate_outputs(tmp_path, capsys):
    plot = tmp_path / "trials.csv"
    argv = ["simulate", "--p", "0.455", "--d", "3", "--policy", "deviator-d3", "--levels", "10000",
            "--trials", "3", "--seed", "7", "--emit-plot-data", str(plot)]
    code, out1, _ = run(capsys, *argv)
    code2, out2, _ = run(capsys, *argv)
    assert code == code2 == 0 and out1 == out2
    res = json.loads(out1)["result"]
    assert res["horizon_convention"] == "forced-capitulation" and len(res["per_trial"]) == 3
    rows = mio.read_csv_rows(plot.read_text())
    assert [float(r["gain"]) for r in rows] == res["per_trial"]


def test_simulate_policy_file(tmp_path, capsys):
    pol = tmp_path / "opt.json"
    assert run(capsys, "solve", "--p", "0.455", "--d", "3", "--policy-out", str(pol))[0] == 0
    base = ["simulate", "--p", "0.455", "--policy", str(pol), "--levels", "10000", "--trials", "2"]
    assert run(capsys, *base, "--d", "3")[0] == 0
    code, _, err = run(capsys, *base, "--d", "4")
    assert code == 2 and "policy file" in err
    assert run(capsys, *base[:-4], "--d", "3", "--policy", str(tmp_path / "missing.json"))[0] == 2


def test_record_timing(capsys):
    code, out, _ = run(capsys, "solve", "--p", "0.3", "--d", "3", "--record-timing")
    assert json.loads(out)["manifest"]["duration_s"] >= 0


def test_verify(tmp_path, capsys):
    code, out, _ = run(capsys, "verify", "--suite", "sol", "--p", "0.30")
    assert code == 0 and out.strip().endswith("PASS")
    summary = tmp_path / "v.json"
    code, out, _ = run(capsys, "verify", "--suite", "sol", "--p", "0.32", "--out", str(summary))
    assert code == 1 and "(1, 0)" in out
    sol = json.loads(summary.read_text())["result"]["suites"]["sol"][0]
    assert sol["state"] == [1, 0] and abs(sol["margin"] + 0.0184) < 1e-4
    code, out, _ = run(capsys, "verify", "--suite", "all", "--p", "0.3", "--d", "30")
    assert code == 0 and "FAIL" not in out
    assert run(capsys, "verify", "--suite", "rinf")[0] == 0


def test_log_env(monkeypatch, capsys):
    monkeypatch.setenv("MINEGAMES_LOG", "DEBUG")
    code, out, err = run(capsys, "solve", "--p", "0.3", "--d", "3")
    assert code == 0 and json.loads(out)
    assert "DEBUG minegames.immediate" in err and "g* =" in err
    monkeypatch.setenv("MINEGAMES_LOG", "WARNING")
    code, out, err = run(capsys, "solve", "--p", "0.3", "--d", "3")
    assert err == ""
