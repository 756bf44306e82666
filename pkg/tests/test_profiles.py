import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from metastab import profiles as pr
from metastab.errors import NotProper


@pytest.mark.parametrize("dim", [1, 2])
def test_reference_profiles_vanish_at_origin(dim):
    origin = np.zeros(1) if dim == 1 else np.zeros((1, dim))
    for name, G in pr.catalog_profiles(dim).items():
        assert G(origin)[0] == 0.0, name


@pytest.mark.parametrize("dim", [1, 2])
def test_reference_profiles_are_convex(dim):
    rng = np.random.default_rng(1)
    for name, G in pr.catalog_profiles(dim).items():
        shape = (2000,) if dim == 1 else (2000, dim)
        a, b = rng.normal(size=shape) * 2, rng.normal(size=shape) * 2
        assert pr.is_midpoint_convex(G, a, b).all(), name


def test_radial_root_of_quadratic():
    G = pr.quadratic_form(np.diag([2.0, 0.5]))
    u = pr.unit_directions(2, 64)
    r = pr.radial_root(G, 1.0, u)
    # r^2 (2 u1^2 + 0.5 u2^2)/2 = 1
    expect = np.sqrt(2.0 / (2 * u[:, 0] ** 2 + 0.5 * u[:, 1] ** 2))
    np.testing.assert_allclose(r, expect, rtol=1e-12)


def test_radial_root_flat_profile_is_not_proper():
    flat = pr.Profile(lambda y: np.zeros(y.shape[:-1]), 2, "flat")
    with pytest.raises(NotProper):
        pr.radial_root(flat, 1.0, pr.unit_directions(2, 8))


def test_separable_keeps_factors():
    G = pr.separable(pr.quadratic(1.0), pr.power(4.0))
    assert G.separable and G.dim == 2
    y = np.array([[1.0, 2.0]])
    assert G(y)[0] == pytest.approx(0.5 + 16.0)


def test_quadratic_form_diagonal_is_separable():
    assert pr.quadratic_form(np.diag([1.0, 3.0])).separable
    assert not pr.quadratic_form([[3.0, 1.0], [1.0, 0.5]]).separable


def test_rescaled():
    G = pr.quadratic(2.0).rescaled(4.0)
    assert G(np.array([2.0]))[0] == pytest.approx(1.0)


@settings(max_examples=30)
@given(st.floats(1.0, 6.0), st.floats(0.2, 5.0), st.floats(0.01, 2.0))
def test_power_profile_sublevel_halfwidth(p, c, t):
    G = pr.power(p, c)
    r = pr.radial_root(G, t, np.array([[1.0], [-1.0]]), iters=200)
    np.testing.assert_allclose(r, (t / c) ** (1 / p), rtol=1e-9)


def test_sample_sublevel_lies_inside():
    G = pr.conical(1.0, 2)
    pts = pr.sample_sublevel(G, 0.5, 500, np.random.default_rng(0))
    assert pts.shape == (500, 2)
    assert np.all(G(pts) < 0.5)
