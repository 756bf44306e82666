import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from metastab.catalog import get_entry
from metastab.potential import (Modulus, chain, degenerate, double_well, fit_modulus,
                                polynomial_potential, quadratic_potential, triple_saddle,
                                verify_structural_assumptions)

POTENTIALS = {
    "double_well_1d": double_well(1),
    "double_well_3d": double_well(3),
    "degenerate_p4": degenerate(4),
    "triple": triple_saddle(1.6, (1.0, -0.2, 0.4)),
    "chain": chain((-0.3, 0.0, -0.25, 0.0, -0.3)),
    "poly": polynomial_potential([0.25, -0.5, 0.5, 0.1], [[4, 0], [2, 0], [0, 2], [1, 1]]),
}


def _fd_grad(F, x, h=1e-6):
    out = np.empty(F.dim)
    for j in range(F.dim):
        e = np.zeros(F.dim)
        e[j] = h
        out[j] = (F.eval(x + e) - F.eval(x - e)) / (2 * h)
    return out


@pytest.mark.parametrize("name", sorted(POTENTIALS))
def test_gradient_matches_finite_differences(name):
    F = POTENTIALS[name]
    rng = np.random.default_rng(7)
    for x in rng.uniform(-1.5, 1.5, size=(20, F.dim)):
        np.testing.assert_allclose(F.grad(x), _fd_grad(F, x), rtol=1e-6, atol=1e-6)


@pytest.mark.parametrize("name", sorted(POTENTIALS))
def test_hessian_symmetric_and_matches_gradient(name):
    F = POTENTIALS[name]
    rng = np.random.default_rng(8)
    X = rng.uniform(-1.5, 1.5, size=(10, F.dim))
    H = F.hessian(X)
    np.testing.assert_allclose(H, np.swapaxes(H, -1, -2), atol=1e-10)
    h = 1e-6
    for x, Hx in zip(X, H):
        for j in range(F.dim):
            e = np.zeros(F.dim)
            e[j] = h
            col = (F.grad(x + e) - F.grad(x - e)) / (2 * h)
            np.testing.assert_allclose(Hx[:, j], col, rtol=1e-5, atol=1e-5)


def test_batched_shapes():
    F = double_well(2)
    X = np.zeros((4, 3, 2))
    assert F.eval(X).shape == (4, 3)
    assert F.grad(X).shape == (4, 3, 2)
    assert F.hessian(X).shape == (4, 3, 2, 2)
    assert isinstance(F.eval(np.zeros(2)), float)
    with pytest.raises(ValueError):
        F.eval(np.zeros((5, 3)))


def test_double_well_values():
    F = double_well(2)
    assert F.eval(np.array([1.0, 0.0])) == 0.0
    assert F.eval(np.zeros(2)) == pytest.approx(0.25)


@settings(max_examples=40)
@given(st.lists(st.floats(-2, 2), min_size=3, max_size=3),
       st.lists(st.floats(-1.5, 1.5), min_size=2, max_size=2))
def test_polynomial_matches_direct_evaluation(c, x):
    F = polynomial_potential(c, [[2, 0], [1, 3], [0, 4]])
    direct = c[0] * x[0] ** 2 + c[1] * x[0] * x[1] ** 3 + c[2] * x[1] ** 4
    assert F.eval(np.array(x)) == pytest.approx(direct, rel=1e-12, abs=1e-12)


def test_polynomial_rejects_bad_exponents():
    with pytest.raises(ValueError):
        polynomial_potential([1.0], [[1.5]])
    with pytest.raises(ValueError):
        polynomial_potential([1.0, 2.0], [[1]])


def test_quadratic_potential_center():
    F = quadratic_potential(np.diag([1.0, 2.0]), [0.3, -0.2])
    assert F.eval(np.array([0.3, -0.2])) == 0.0
    np.testing.assert_allclose(F.hessian(np.zeros(2)), np.diag([1.0, 2.0]))


def test_modulus_delta0_closed_form_matches_bisection():
    om = Modulus(2.0, 1.5)
    generic = Modulus(fn=lambda s: 2.0 * np.maximum(s, 0) ** 1.5)
    assert om.delta0 == pytest.approx(generic.delta0, rel=1e-6)
    assert om.satisfies_delta(0.99 * om.delta0)
    assert not om.satisfies_delta(1.5 * om.delta0)


@settings(max_examples=30)
@given(st.floats(0.01, 100.0), st.floats(1.1, 3.0))
def test_modulus_delta0_boundary(K, p):
    om = Modulus(K, p)
    d = om.delta0
    if d < 10.0:
        assert om(4 * d) == pytest.approx(4 * d / 8, rel=1e-9)


@pytest.mark.parametrize("name", ["double_well_2d", "degenerate_p4", "triple_parallel",
                                  "chain_series_3"])
def test_structural_assumptions_hold_on_catalog(name):
    e = get_entry(name)
    for cp in e.critical_points:
        if cp.profile is None:
            continue
        rep = verify_structural_assumptions(e.potential, cp, e.delta, samples=2000)
        assert rep.passed, (name, cp.location, rep.max_violation)


def test_fit_modulus_dominates_remainders():
    e = get_entry("double_well_2d")
    om = fit_modulus(e.potential, e.critical_points, e.delta, samples=1000, seed=5)
    for cp in e.critical_points:
        assert verify_structural_assumptions(e.potential, cp, e.delta, 1000, om, seed=5).passed


def test_structural_violation_detected():
    e = get_entry("double_well_2d")
    tiny = Modulus(1e-9, 1.5)
    rep = verify_structural_assumptions(e.potential, e.saddles[0], e.delta, 2000, tiny)
    assert not rep.passed
