import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from metastab.config import TASKS, config_from_dict, load_config, parse_polynomial
from metastab.errors import ConfigInvalid


def _doc(**kw):
    d = {"potential": "double_well_2d", "eps": [0.1, 0.05], "tasks": ["critical_points"]}
    d.update(kw)
    return d


def test_minimal_config():
    cfg = config_from_dict(_doc())
    assert cfg.eps_list == (0.1, 0.05) and cfg.tasks == ("critical_points",)
    assert cfg.sim.paths == 500 and cfg.seed == 0


def test_tasks_sorted_in_dependency_order():
    cfg = config_from_dict(_doc(tasks=["simulate", "network", "capacity_pde"]))
    assert cfg.tasks == ("network", "capacity_pde", "simulate")
    assert list(cfg.tasks) == [t for t in TASKS if t in cfg.tasks]


@pytest.mark.parametrize("doc,path", [
    (_doc(tasks=[]), "tasks"),
    (_doc(tasks=["nonsense"]), "tasks[0]"),
    (_doc(eps=[0.05, 0.1]), "eps"),
    (_doc(eps=[0.1, 0.1]), "eps"),
    (_doc(eps=[0.1, -0.2]), "eps[1]"),
    (_doc(eps=[]), "eps"),
    (_doc(potential="no_such_thing"), "potential"),
    (_doc(colour="red"), "colour"),
    (_doc(lattice={"h": -0.1}), "lattice.h"),
    (_doc(lattice={"h": 1e-5}), "lattice.h"),
    (_doc(lattice={"box": [[1, 0], [0, 1]]}), "lattice.box"),
    (_doc(lattice={"box": [[0, 1]]}), "lattice.box"),
    (_doc(lattice={"spacing": 0.1}), "lattice.spacing"),
    (_doc(sim={"paths": 0}), "sim.paths"),
    (_doc(sim={"paths": 1.5}), "sim.paths"),
    (_doc(sim={"dt": 0}), "sim.dt"),
    (_doc(sim={"threads": 0}), "sim.threads"),
    (_doc(delta=-1.0), "delta"),
    (_doc(seed=-3), "seed"),
    (_doc(potential="poly: x^4 - x^2"), "lattice.box"),
])
def test_invalid_configs_name_the_field(doc, path):
    with pytest.raises(ConfigInvalid) as info:
        config_from_dict(doc)
    assert info.value.path == path


def test_sha_ignores_output_and_threads():
    a = config_from_dict(_doc(output="a", sim={"threads": 1}))
    b = config_from_dict(_doc(output="b", sim={"threads": 4}))
    c = config_from_dict(_doc(seed=1))
    assert a.sha256() == b.sha256() != c.sha256()


def test_load_config(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text('potential = "double_well_1d"\neps = [0.2]\ntasks = ["network"]\n'
                 '[sim]\npaths = 10\n')
    cfg = load_config(p)
    assert cfg.potential == "double_well_1d" and cfg.sim.paths == 10
    p.write_text("potential = \n")
    with pytest.raises(ConfigInvalid):
        load_config(p)
    with pytest.raises(ConfigInvalid):
        load_config(tmp_path / "missing.toml")


def test_parse_polynomial_values():
    F = parse_polynomial("poly: 0.25*x^4 - 0.5*x^2 + 0.5*y**2")
    pts = np.array([[0.3, -0.7], [1.0, 0.0], [-1.2, 2.0]])
    x, y = pts.T
    np.testing.assert_allclose(F.eval(pts), 0.25 * x**4 - 0.5 * x**2 + 0.5 * y**2, rtol=1e-14)
    assert F.dim == 2


def test_parse_polynomial_indexed_and_padding():
    F = parse_polynomial("poly: x1^2 + x3^2", dim=4)
    assert F.dim == 4
    assert F.eval(np.array([1.0, 5.0, 2.0, 7.0])) == pytest.approx(5.0)


@pytest.mark.parametrize("text", ["poly: sin(x)", "poly: x^-1", "poly: import os",
                                  "poly: x + q", "poly: 0", "poly: x; y", "poly: sqrt(x)"])
def test_parse_polynomial_rejects(text):
    with pytest.raises(ConfigInvalid):
        parse_polynomial(text)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=3, max_size=3), st.floats(-2, 2), st.floats(-2, 2))
def test_parse_polynomial_roundtrip(c, x, y):
    text = f"poly: {c[0]!r}*x^2 + {c[1]!r}*x*y + {c[2]!r}*y^4 + 1"
    F = parse_polynomial(text)
    expect = c[0] * x * x + c[1] * x * y + c[2] * y**4 + 1
    assert F.eval(np.array([x, y])) == pytest.approx(expect, abs=1e-12)
