import json
from pathlib import Path

import pytest

from metastab.cli import load_schema, main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def _write(tmp_path, text):
    p = tmp_path / "c.toml"
    p.write_text(text)
    return str(p)


def test_run_ok(tmp_path, capsys):
    cfg = _write(tmp_path, 'potential = "double_well_2d"\neps = [0.1]\n'
                 'tasks = ["critical_points", "network"]\n')
    assert main(["run", cfg, "--out", str(tmp_path / "o")]) == 0
    assert "network: ok" in capsys.readouterr().out
    doc = json.loads((tmp_path / "o" / "results.json").read_text())
    assert doc["schema_version"] == load_schema()["properties"]["schema_version"]["const"]


def test_run_task_failure_exit_one(tmp_path):
    cfg = _write(tmp_path, 'potential = "double_well_2d"\neps = [0.1]\n'
                 'tasks = ["capacity_pde"]\nx_a = [-1.0, 0.0]\nx_b = [5.0, 5.0]\n'
                 '[lattice]\nh = 0.05\n')
    assert main(["run", cfg, "--out", str(tmp_path / "o")]) == 1


@pytest.mark.parametrize("text,args", [
    ('potential = "double_well_2d"\neps = [0.1]\ntasks = []\n', []),
    ('potential = "double_well_2d"\neps = [0.05, 0.1]\ntasks = ["network"]\n', []),
    ('potential = "double_well_2d"\neps = [0.1]\ntasks = ["network"]\n', ["--seed", "-1"]),
    ('potential = "double_well_2d"\neps = [0.1]\ntasks = ["network"]\n', ["--threads", "0"]),
])
def test_config_errors_exit_two(tmp_path, capsys, text, args):
    assert main(["run", _write(tmp_path, text), "--out", str(tmp_path / "o")] + args) == 2
    assert "config error" in capsys.readouterr().err


def test_list_catalog(capsys):
    assert main(["list-catalog"]) == 0
    out = capsys.readouterr().out
    for name in ("double_well_2d", "triple_parallel", "chain_series_3", "degenerate_p4"):
        assert name in out


def test_schema(capsys):
    assert main(["schema"]) == 0
    assert json.loads(capsys.readouterr().out)["$schema"].startswith("https://json-schema.org")


def test_shipped_configs_parse():
    from metastab.config import load_config

    files = sorted(CONFIGS.glob("*.toml"))
    assert files
    for f in files:
        load_config(f)
