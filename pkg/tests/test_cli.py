import csv
import json

import pytest

from transit_so import io as tio
from transit_so.benchmarks import toy_2line
from transit_so.cli import main


def _run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_validate(capsys):
    code, out, _ = _run(capsys, "validate", "--instance", "hk-lite")
    assert code == 0
    info = json.loads(out)
    assert info["total_demand"] == 52_717 and info["trains"] == 120


def test_usage_errors(capsys):
    assert _run(capsys, "frobnicate")[0] == 2
    assert _run(capsys, "validate", "--routes", "sideways")[0] == 2
    code, _, err = _run(capsys, "assign", "--instance", "toy-2line", "--solver", "ue", "--solver", "exact-so")
    assert code == 2 and json.loads(err)["error"] == "usage"


def test_missing_and_malformed_files(capsys, tmp_path):
    code, _, err = _run(capsys, "validate", "--instance", str(tmp_path / "absent.json"))
    assert code == 1 and json.loads(err)["error"] == "input"
    bad = tmp_path / "bad.json"
    bad.write_text('{"stations": []}')
    code, _, err = _run(capsys, "validate", "--instance", str(bad))
    assert code == 1
    payload = json.loads(err)
    assert payload["error"] == "invalid-instance" and payload["violations"]


def test_invalid_topology_reports_violations(capsys, tmp_path):
    doc = tio.instance_to_dict(toy_2line())
    doc["routes"][0]["segments"][0][1] = "nowhere"
    p = tmp_path / "broken.json"
    p.write_text(json.dumps(doc))
    code, _, err = _run(capsys, "validate", "--instance", str(p))
    assert code == 1
    assert json.loads(err)["error"] == "invalid-instance"


@pytest.mark.parametrize("solver", ["ue", "approx-so", "exact-so"])
def test_assign_writes_outputs(capsys, tmp_path, solver):
    code, _, _ = _run(capsys, "assign", "--instance", "toy-2line", "--solver", solver, "--out", str(tmp_path))
    assert code == 0
    for f in ("assignment.csv", "od_costs.csv", "events.csv", "summary.json", "progress.jsonl"):
        assert (tmp_path / f).exists(), f
    rows = list(csv.DictReader(open(tmp_path / "assignment.csv")))
    assert sum(float(r["passengers"]) for r in rows) == toy_2line().total_demand
    assert json.loads((tmp_path / "summary.json").read_text())["solver"] == solver


def test_infeasible_instance_exit_1(capsys, tmp_path):
    code, _, err = _run(capsys, "assign", "--instance", "toy-1line", "--solver", "exact-so",
                        "--demand-scale", "400", "--out", str(tmp_path))
    assert code == 1
    assert json.loads(err)["error"] in ("infeasible", "SetupError")


def test_scenario_matrix(capsys, tmp_path):
    code, out, _ = _run(capsys, "scenario", "--instance", "toy-2line", "--demand-scale", "100", "200",
                        "--out", str(tmp_path))
    rows = list(csv.DictReader(open(tmp_path / "scenarios.csv")))
    assert len(rows) == 6
    assert code == (0 if all(r["status"] == "ok" for r in rows) else 1)


def test_compare_outputs(capsys, tmp_path):
    code, out, _ = _run(capsys, "compare", "--instance", "toy-2line", "--out", str(tmp_path))
    assert code == 0
    for f in ("comparison.csv", "shift_histogram.csv", "link_flows.csv", "assignment_ue.csv",
              "assignment_approx_so.csv", "assignment_exact_so.csv", "summary.json"):
        assert (tmp_path / f).exists(), f
    s = json.loads(out)
    assert s["totals"]["exact_so"] <= s["totals"]["approx_so"] + 1e-6 <= s["totals"]["ue"] + 2e-6


def test_export_lp_is_byte_stable(capsys, tmp_path):
    for suffix in ("lp", "mps"):
        a, b = tmp_path / f"a.{suffix}", tmp_path / f"b.{suffix}"
        assert _run(capsys, "export-lp", "--instance", "toy-2line", "--export-lp", str(a))[0] == 0
        assert _run(capsys, "export-lp", "--instance", "toy-2line", "--export-lp", str(b))[0] == 0
        assert a.read_bytes() == b.read_bytes()
    assert (tmp_path / "a.mps").read_text().startswith("NAME")


def test_demand_csv_flag(capsys, tmp_path):
    inst = toy_2line()
    k = inst.od_pairs[0]
    p = tmp_path / "d.csv"
    p.write_text(f"origin,destination,count\n{k.origin},{k.destination},1\n")
    code, out, _ = _run(capsys, "validate", "--instance", "toy-2line", "--demand-csv", str(p))
    assert code == 0 and json.loads(out)["total_demand"] == 1
