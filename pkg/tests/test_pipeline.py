import json

import pytest

from metastab.cli import validate_results
from metastab.config import config_from_dict
from metastab.errors import MissingData
from metastab.pipeline import compare_report, run


def _cfg(**kw):
    d = {"potential": "double_well_2d", "eps": [0.1, 0.07], "lattice": {"h": 0.04},
         "tasks": ["critical_points", "network", "d_eps", "v_eps", "capacity_geometric",
                   "capacity_pde", "ek_classical", "exit_bound", "convex_checks"]}
    d.update(kw)
    return config_from_dict(d)


@pytest.fixture(scope="module")
def bundle(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    return run(_cfg(), out=out), out


def test_critical_points_of_double_well():
    b = run(_cfg(tasks=["critical_points"]), out=False)
    pts = b.records[0]["values"]["points"]
    assert sorted(p["kind"] for p in pts) == ["minimum", "minimum", "saddle"]


def test_all_tasks_ok_and_schema_valid(bundle):
    b, out = bundle
    assert b.ok
    doc = json.loads((out / "results.json").read_text())
    validate_results(doc)
    for name in ("critical_points", "network", "geometry", "capacity", "ek_classical",
                 "convex_checks", "compare"):
        assert (out / f"{name}.csv").exists()


def test_geometric_and_pde_values_close(bundle):
    b, _ = bundle
    table = compare_report(b)
    assert [r["eps"] for r in table.rows] == [0.1, 0.07]
    for r in table.rows:
        assert 0.5 < r["ratio"] < 2.0
        assert "eta_hat_C1" in r and "within_assumptions_C10" in r


def test_rerun_is_identical(bundle, tmp_path):
    b, out = bundle
    again = run(_cfg(), out=tmp_path)
    first = json.loads((out / "results.json").read_text())
    second = json.loads((tmp_path / "results.json").read_text())
    first.pop("timings"), second.pop("timings")
    assert first == second
    assert (out / "capacity.csv").read_text() == (tmp_path / "capacity.csv").read_text()
    assert again.config_sha256 == b.config_sha256


def test_task_error_is_recorded_and_siblings_continue():
    # x_b on a non-minimum still runs the eps-free tasks
    b = run(_cfg(tasks=["critical_points", "capacity_pde"], x_a=[-1.0, 0.0], x_b=[5.0, 5.0]),
            out=False)
    status = {r["task"]: r["status"] for r in b.records}
    assert status["critical_points"] == "ok" and status["capacity_pde"] == "error"
    assert not b.ok


def _fake(values):
    recs = []
    for eps, g, p in values:
        recs.append({"task": "capacity_geometric", "eps": eps, "status": "ok",
                     "values": {"mantissa": g, "shift": 0.0}})
        recs.append({"task": "capacity_pde", "eps": eps, "status": "ok",
                     "values": {"mantissa": p, "shift": 0.0}})
    return {"records": recs, "landscape": {"dim": 2, "omega": {"K": 1.0, "power": 1.5}}}


def test_compare_identical_estimates():
    t = compare_report(_fake([(0.1, 2.0, 2.0), (0.05, 3.0, 3.0)]))
    assert all(r["ratio"] == 1.0 for r in t.rows) and t.trend


def test_compare_trend_false_when_error_grows():
    t = compare_report(_fake([(0.1, 1.1, 1.0), (0.05, 1.5, 1.0)]))
    assert not t.trend


def test_compare_needs_two_levels():
    with pytest.raises(MissingData):
        compare_report(_fake([(0.1, 1.0, 1.0)]))
