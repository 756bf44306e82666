import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from metastab import profiles as pr
from metastab.asymptotics import (check_convex_profile, d_eps_formula, error_scale, eta,
                                  laplace_1d, laplace_nd, levelset_volume, localization_check,
                                  sandwich_constant, tail_constant, v_eps_formula)
from metastab.errors import BoxTooSmall, NoRoot, NotProper
from metastab.potential import Modulus


@pytest.mark.parametrize("a", [0.5, 1.0, 2.0, 4.0])
@pytest.mark.parametrize("eps", [0.01, 0.1])
def test_laplace_quadratic(a, eps):
    got = laplace_1d(pr.quadratic(a), eps).value
    assert got == pytest.approx(math.sqrt(2 * math.pi * eps / a), rel=1e-8)


@pytest.mark.parametrize("eps", [0.01, 0.05, 0.1])
def test_laplace_quartic(eps):
    got = laplace_1d(pr.power(4.0), eps).value
    assert got == pytest.approx(eps ** 0.25 * special.gamma(0.25) / 2, rel=1e-6)


def test_laplace_not_proper():
    shifted = pr.Profile(lambda s: 0.5 * s * s + 1.0, 1, "shifted")
    with pytest.raises(NotProper):
        laplace_1d(shifted, 0.1)


def test_laplace_nd_none_is_one():
    assert laplace_nd(None, 0.3).value == 1.0


def test_laplace_nd_anisotropic_quadratic():
    H = np.array([[3.0, 1.0], [1.0, 0.5]])
    eps = 0.1
    expect = 2 * math.pi * eps / math.sqrt(np.linalg.det(H))
    assert laplace_nd(pr.quadratic_form(H), eps).value == pytest.approx(expect, rel=1e-6)


def test_laplace_nd_quadrature_agrees_with_monte_carlo():
    G = pr.max_of(pr.quadratic_form(np.eye(2)), pr.quadratic_form(np.diag([4.0, 0.25])))
    q = laplace_nd(G, 0.1).value
    mc = laplace_nd(G, 0.1, method="mc", samples=400_000, seed=3)
    assert abs(q - mc.value) < 4 * mc.stderr


def test_levelset_ellipse_area():
    # {(2x^2 + y^2)/2 < eps} is an ellipse with semi-axes sqrt(eps), sqrt(2 eps)
    G = pr.quadratic_form(np.diag([2.0, 1.0]))
    got = levelset_volume(G, 0.1).value
    assert got == pytest.approx(math.pi * 0.1 * math.sqrt(2), rel=1e-6)
    assert got == pytest.approx(0.4443, abs=1e-4)


def test_levelset_monte_carlo_cross_check():
    G = pr.quadratic_form([[3.0, 1.0], [1.0, 0.5]])
    exact = levelset_volume(G, 0.2).value
    mc = levelset_volume(G, 0.2, method="mc", samples=400_000, seed=1)
    assert abs(exact - mc.value) < 4 * mc.stderr


def test_levelset_box_too_small():
    with pytest.raises(BoxTooSmall):
        levelset_volume(pr.quadratic_form(np.eye(2)), 1.0, method="mc", box=0.5)


@settings(max_examples=25)
@given(st.floats(0.3, 5.0), st.floats(0.3, 5.0), st.floats(0.01, 1.0))
def test_quadratic_levelset_scales_linearly_in_2d(a, b, t):
    G = pr.quadratic_form(np.diag([a, b]))
    v1 = levelset_volume(G, t).value
    v4 = levelset_volume(G, t / 4).value
    assert v4 == pytest.approx(v1 / 4, rel=1e-9)


@settings(max_examples=25)
@given(st.floats(1.0, 6.0), st.floats(0.01, 1.0))
def test_doubling_inequality_in_1d(p, t):
    G = pr.power(p)
    assert levelset_volume(G, 2 * t).value <= 2 * levelset_volume(G, t).value * (1 + 1e-9)


@pytest.mark.parametrize("k,expect", [(1, 5.0053), (2, 21.662)])
def test_sandwich_constant(k, expect):
    assert sandwich_constant(k) == pytest.approx(expect, rel=1e-4)
    assert tail_constant(k) == pytest.approx(math.e ** 2 * 2 ** k * expect, rel=1e-4)


@pytest.mark.parametrize("dim", [1, 2])
@pytest.mark.parametrize("name", ["quadratic", "quartic", "conical", "anisotropic",
                                  "max_quadratics"])
def test_convex_profile_inequalities(dim, name):
    rep = check_convex_profile(pr.catalog_profiles(dim)[name], 0.05)
    assert rep.ratio_ok and rep.doubling_ok and rep.tail_ok


def test_eta():
    assert eta(0.0, 2) == 0.0
    assert eta(0.5, 2) == pytest.approx(math.exp(-2) * 0.25)


def test_error_scale_root():
    om = Modulus(1.0, 1.5)
    es = error_scale(om, 1e-4, 2, strict=False)
    assert math.sqrt(om(es.eps1) * es.eps1) == pytest.approx(1e-4, rel=1e-9)
    assert es.eps1 > 1e-4


def test_error_scale_strict_raises_outside_bracket():
    with pytest.raises(NoRoot):
        error_scale(Modulus(1.0, 1.5), 0.05, 2, strict=True)
    es = error_scale(Modulus(1.0, 1.5), 0.05, 2, strict=False)
    assert not es.within_assumptions


def test_error_scale_tends_to_zero():
    om = Modulus(1.0, 1.5)
    etas = [error_scale(om, e, 2, strict=False).eta_hat for e in (1e-2, 1e-4, 1e-6)]
    assert etas[0] > etas[1] > etas[2]


def test_formulas_carry_opposite_shifts():
    d = d_eps_formula(pr.quadratic(1.0), 0.25, 0.1)
    V = v_eps_formula(pr.quadratic(1.0), 0.25, 0.1)
    assert d.shift == -V.shift == 0.25
    assert d.mantissa == pytest.approx(math.sqrt(2 * math.pi * 0.1), rel=1e-9)
    assert v_eps_formula(None, 0.25, 0.1).mantissa == 1.0


def test_localization_check_small_modulus():
    rep = localization_check(pr.quadratic(1.0), Modulus(0.05, 1.5), 0.3, 0.02)
    assert rep.ratio_lower <= 1.0 <= rep.ratio_upper
