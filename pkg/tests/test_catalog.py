import numpy as np
import pytest
from scipy import optimize

from metastab.catalog import (catalog_names, get_entry, is_saddle_like,
                              make_degenerate_saddle, make_quadratic_double_well)

COUNTS = {
    "double_well_1d": (2, 1),
    "double_well_2d": (2, 1),
    "double_well_3d": (2, 1),
    "degenerate_p4": (2, 1),
    "degenerate_p6": (2, 1),
    "triple_parallel": (6, 7),
    "triple_parallel_staggered": (6, 7),
    "chain_series_2": (3, 2),
    "chain_series_3": (4, 3),
    "harmonic_2d": (1, 0),
}


def test_names():
    assert sorted(catalog_names()) == sorted(COUNTS)
    with pytest.raises(KeyError):
        get_entry("nope")


@pytest.mark.parametrize("name", sorted(COUNTS))
def test_critical_point_counts(name):
    e = get_entry(name)
    assert (len(e.minima), len(e.saddles)) == COUNTS[name]


@pytest.mark.parametrize("name", sorted(COUNTS))
def test_critical_points_are_stationary(name):
    e = get_entry(name)
    for cp in e.critical_points:
        assert np.linalg.norm(e.potential.grad(cp.location)) < 1e-12
        assert e.potential.eval(cp.location) == pytest.approx(cp.value, abs=1e-14)


def _value_grad(F, x, h=1e-5):
    # central differences of the value kernel, independent of the gradient kernel
    g = np.empty(F.dim)
    for j in range(F.dim):
        e = np.zeros(F.dim)
        e[j] = h
        g[j] = (F.eval(x + e) - F.eval(x - e)) / (2 * h)
    return g


@pytest.mark.parametrize("name,heights", [
    ("triple_parallel", [0.25, 0.25, 0.25]),
    ("triple_parallel_staggered", [0.2495, 0.2957, 0.3874]),
    ("chain_series_3", [0.0, 0.0, 0.0]),
])
def test_bridge_saddle_heights(name, heights):
    e = get_entry(name)
    F = e.potential
    found = []
    for cp in e.saddles:
        x = optimize.fsolve(lambda x: _value_grad(F, x), cp.location + 0.01, xtol=1e-12)
        found.append(float(F.eval(x)))
    top = sorted(found)[-len(heights):]
    np.testing.assert_allclose(top, heights, atol=5e-4)


def test_triple_saddles_identical():
    e = get_entry("triple_parallel")
    bridge = sorted(e.saddles, key=lambda c: c.value)[-3:]
    spectra = np.array([c.spectrum for c in bridge])
    np.testing.assert_allclose(spectra, np.broadcast_to(spectra[0], spectra.shape), rtol=1e-10)


def test_degenerate_saddle_profile():
    e = get_entry("degenerate_p4")
    z = e.saddles[0]
    assert z.kind == "degenerate" and is_saddle_like(z)
    s = np.linspace(-0.3, 0.3, 7)
    np.testing.assert_allclose(z.profile.g(s), s ** 4, atol=1e-15)


@pytest.mark.parametrize("n", [1, 2, 4])
def test_make_quadratic_double_well(n):
    F = make_quadratic_double_well(n)
    assert F.dim == n and len(F.known) == 3


def test_make_degenerate_saddle():
    F = make_degenerate_saddle(8)
    z = [c for c in F.known if c.kind == "degenerate"][0]
    assert z.value == 0.0
