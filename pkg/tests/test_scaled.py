import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from metastab.scaled import (MANTISSA_BAND, ScaledValue, scaled_add, scaled_div, scaled_inv,
                             scaled_mul, scaled_ratio, scaled_scale, scaled_sum)

mantissas = st.floats(1e-6, 1e6)
shifts = st.floats(-2.0, 2.0)
eps_values = st.floats(0.02, 1.0)


def test_value_and_log():
    v = ScaledValue(2.0, 0.5)
    assert v.value_at(0.1) == pytest.approx(2.0 * math.exp(5.0), rel=1e-15)
    assert v.log_value(0.1) == pytest.approx(math.log(2.0) + 5.0)


def test_overflowing_value_is_inf():
    assert ScaledValue(1.0, 100.0).value_at(0.01) == math.inf


@pytest.mark.parametrize("bad", [-1.0, math.nan, math.inf])
def test_rejects_bad_mantissa(bad):
    with pytest.raises(ValueError):
        ScaledValue(bad, 0.0)


def test_sum_of_equal_shifts_adds_mantissas():
    s = scaled_add(ScaledValue(0.05, -0.25), ScaledValue(0.05, -0.25), 0.05)
    assert s.shift == -0.25
    assert s.mantissa == pytest.approx(0.1, rel=1e-15)


def test_division_example():
    mass, cap = ScaledValue(1.0, -0.0), ScaledValue(0.05, -0.25)
    t = scaled_div(mass, cap, 0.05)
    assert t.value_at(0.05) == pytest.approx(20 * math.exp(5), rel=1e-12)
    assert t.value_at(0.05) == pytest.approx(2968.26, rel=1e-5)


def test_underflow_is_counted():
    big, tiny = ScaledValue(1.0, 1.0), ScaledValue(1.0, -30.0)
    s = scaled_add(big, tiny, 0.01)
    assert s.dropped == 1
    assert s.value_at(0.01) == big.value_at(0.01)


def test_normalized_band():
    v = ScaledValue(1e8, 0.0).normalized(0.1)
    lo, hi = MANTISSA_BAND
    assert lo <= v.mantissa <= hi
    assert v.log_value(0.1) == pytest.approx(math.log(1e8), rel=1e-12)
    inside = ScaledValue(5.0, 0.3)
    assert inside.normalized(0.1) is inside


@given(mantissas, shifts, mantissas, shifts, eps_values)
def test_addition_commutes_exactly(m1, s1, m2, s2, eps):
    a, b = ScaledValue(m1, s1), ScaledValue(m2, s2)
    assert scaled_add(a, b, eps) == scaled_add(b, a, eps)


@given(mantissas, shifts, mantissas, shifts, eps_values)
def test_addition_matches_logsumexp(m1, s1, m2, s2, eps):
    a, b = ScaledValue(m1, s1), ScaledValue(m2, s2)
    expect = np.logaddexp(a.log_value(eps), b.log_value(eps))
    assert scaled_add(a, b, eps).log_value(eps) == pytest.approx(expect, rel=1e-12, abs=1e-12)


@given(mantissas, shifts, mantissas, shifts, eps_values)
def test_mul_div_inverse(m1, s1, m2, s2, eps):
    a, b = ScaledValue(m1, s1), ScaledValue(m2, s2)
    back = scaled_div(scaled_mul(a, b, eps), b, eps)
    assert back.log_value(eps) == pytest.approx(a.log_value(eps), rel=1e-12, abs=1e-10)
    assert scaled_ratio(a, a, eps) == pytest.approx(1.0)


@given(mantissas, shifts, st.floats(1e-3, 1e3), eps_values)
def test_scale_and_inverse(m, s, c, eps):
    a = ScaledValue(m, s)
    assert scaled_scale(a, c, eps).log_value(eps) == pytest.approx(
        a.log_value(eps) + math.log(c), rel=1e-12, abs=1e-10)
    assert scaled_inv(scaled_inv(a, eps), eps).log_value(eps) == pytest.approx(
        a.log_value(eps), rel=1e-12, abs=1e-10)


@settings(max_examples=50)
@given(st.lists(st.tuples(mantissas, shifts), min_size=1, max_size=6), eps_values)
def test_sum_is_order_independent(items, eps):
    vals = [ScaledValue(m, s) for m, s in items]
    fwd = scaled_sum(vals, eps).log_value(eps)
    rev = scaled_sum(vals[::-1], eps).log_value(eps)
    assert fwd == pytest.approx(rev, rel=1e-12, abs=1e-12)
