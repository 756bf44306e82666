import math
import types

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from metastab import profiles as pr
from metastab.capacity import (CapacityEstimate, assemble_capacity, capacity_geometric,
                               classical_eyring_kramers, reduce_parallel, reduce_series,
                               saddle_geometry)
from metastab.catalog import catalog_names, get_entry
from metastab.errors import (MissingProfile, ShiftMismatch, SpectrumInvalid, TopologyGeneral,
                             ZeroCapacity)
from metastab.landscape import extract_network
from metastab.lattice import build_lattice
from metastab.potential import CriticalPoint
from metastab.scaled import ScaledValue
from metastab.transport import solve_capacity_pde


def test_geometric_capacity_unit_case():
    cap = capacity_geometric(ScaledValue(1.0, 0.0), ScaledValue(1.0, 0.0), 0.0, 0.1)
    assert cap.at(0.1) == pytest.approx(0.1, rel=1e-15)


def test_geometric_capacity_double_well():
    z = get_entry("double_well_2d").saddles[0]
    eps = 0.05
    cap = capacity_geometric(*saddle_geometry(z, eps), eps)
    assert cap.value.shift == pytest.approx(-0.25)
    assert cap.at(eps) == pytest.approx(0.05 * math.exp(-5), rel=1e-10)
    assert cap.at(eps) == pytest.approx(3.369e-4, rel=1e-3)


def test_shift_mismatch():
    with pytest.raises(ShiftMismatch):
        capacity_geometric(ScaledValue(1.0, 0.25), ScaledValue(1.0, -0.2), 0.25, 0.1)


def test_zero_distance():
    with pytest.raises(ZeroCapacity):
        capacity_geometric(ScaledValue(0.0, 0.0), ScaledValue(1.0, 0.0), 0.0, 0.1)


@pytest.mark.parametrize("hs,hm,lam1,expect", [
    ([-1.0, 1.0], [2.0, 1.0], 1.0, 2 * math.pi / math.sqrt(2)),
    ([-1.0], [2.0], 1.0, 2 * math.pi / math.sqrt(2)),
    ([-2.0, 3.0], [1.0, 1.0], 2.0, math.pi * math.sqrt(6)),
])
def test_eyring_kramers_prefactor(hs, hm, lam1, expect):
    t = classical_eyring_kramers(lam1, hs, hm, 0.25)
    assert t.mantissa == pytest.approx(expect, rel=1e-14)
    assert t.shift == 0.25


def test_eyring_kramers_double_well_value():
    t = classical_eyring_kramers(1.0, [-1.0, 1.0], [2.0, 1.0], 0.25)
    assert t.value_at(0.05) == pytest.approx(659.377, rel=1e-5)


def test_eyring_kramers_accepts_matrices():
    e = get_entry("double_well_2d")
    Hz = e.potential.hessian(np.zeros(2))
    Hx = e.potential.hessian(np.array([-1.0, 0.0]))
    t = classical_eyring_kramers(1.0, Hz, Hx, 0.25)
    assert t.mantissa == pytest.approx(2 * math.pi / math.sqrt(2), rel=1e-12)


@pytest.mark.parametrize("hs,hm", [([1.0, 1.0], [1.0, 1.0]), ([-1.0, -1.0], [1.0, 1.0]),
                                   ([-1.0, 1.0], [-1.0, 1.0]), ([-1.0, 0.0], [1.0, 1.0])])
def test_eyring_kramers_rejects_bad_spectra(hs, hm):
    with pytest.raises(SpectrumInvalid):
        classical_eyring_kramers(1.0, hs, hm, 0.25)


def _est(m, s):
    return CapacityEstimate(ScaledValue(m, s), "geometric")


@settings(max_examples=50)
@given(st.lists(st.tuples(st.floats(1e-3, 1e3), st.floats(-1, 1)), min_size=1, max_size=5),
       st.floats(0.05, 1.0))
def test_network_rules_bracket_components(items, eps):
    parts = [_est(m, s) for m, s in items]
    vals = [p.at(eps) for p in parts]
    par = reduce_parallel(parts, eps).at(eps)
    ser = reduce_series(parts, eps).at(eps)
    assert par >= max(vals) * (1 - 1e-12)
    assert ser <= min(vals) * (1 + 1e-12)
    assert par == pytest.approx(sum(vals), rel=1e-10)
    assert ser == pytest.approx(1 / sum(1 / v for v in vals), rel=1e-10)


def test_series_with_zero_capacity():
    with pytest.raises(ZeroCapacity):
        reduce_series([_est(1.0, 0.0), _est(0.0, 0.0)], 0.1)


def _net(topology, n, order=()):
    return types.SimpleNamespace(topology=topology, bridges=[None] * n, bridge_order=order)


def test_assemble_identical_parallel_and_series():
    eps = 0.05
    one = (ScaledValue(0.7, 0.25), ScaledValue(0.7, -0.25), 0.25)
    single = assemble_capacity(_net("parallel", 1), [one], eps).at(eps)
    par = assemble_capacity(_net("parallel", 3), [one] * 3, eps).at(eps)
    ser = assemble_capacity(_net("series", 3, (0, 1, 2)), {0: one, 1: one, 2: one}, eps).at(eps)
    assert par / single == pytest.approx(3.0, rel=1e-12)
    assert ser / single == pytest.approx(1 / 3, rel=1e-12)


def test_assemble_general_refused():
    with pytest.raises(TopologyGeneral):
        assemble_capacity(_net("general", 2), [], 0.1)


def test_saddle_geometry_needs_profile():
    cp = CriticalPoint(np.zeros(2), 0.0, "saddle", np.array([-1.0, 1.0]), None)
    with pytest.raises(MissingProfile):
        saddle_geometry(cp, 0.1)


def test_degenerate_capacity_scaling_exponent():
    z = get_entry("degenerate_p4").saddles[0]
    eps = np.array([0.1, 0.07, 0.05])
    caps = [capacity_geometric(*saddle_geometry(z, e), e).value.mantissa for e in eps]
    slope = np.polyfit(np.log(eps), np.log(caps), 1)[0]
    assert slope == pytest.approx(1.25, abs=1e-6)


def test_to_dict():
    c = reduce_parallel([_est(0.1, -0.25), _est(0.2, -0.25)], 0.1)
    d = c.to_dict(0.1)
    assert set(d) >= {"mantissa", "shift", "value_at_eps", "method", "components"}
    assert len(d["components"]) == 2 and d["topology"] == "parallel"


def _trend_case(name):
    if name == "triple_parallel_staggered":
        # |ratio - 1| is 0.035, 0.064, 0.098 and only turns back below eps = 0.05
        return pytest.param(name, marks=pytest.mark.xfail(strict=True,
                                                          reason="finite-eps dip"))
    return name


@pytest.mark.slow
@pytest.mark.parametrize("name", [_trend_case(n) for n in catalog_names() if n != "harmonic_2d"])
def test_network_capacity_approaches_pde(name):
    e = get_entry(name)
    L = build_lattice(e.potential, e.box, e.h)
    net = extract_network(e.potential, e.x_a, e.x_b, e.delta, L, e.critical_points)
    dev = []
    for eps in (0.1, 0.07, 0.05):
        geo = assemble_capacity(net, [saddle_geometry(b.saddle, eps) for b in net.bridges], eps)
        pde = solve_capacity_pde(L, L.ball(e.x_a, eps), L.ball(e.x_b, eps), eps).energy
        dev.append(abs(geo.at(eps) / pde.value_at(eps) - 1))
    assert dev[0] >= dev[1] >= dev[2]
