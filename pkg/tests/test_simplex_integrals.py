import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from mimc.simplex_integrals import (
    SERIES_THRESHOLD,
    bias_bound,
    bias_bound_constant,
    exp_simplex_integral,
    work_bound,
    work_bound_constant,
)
from mimc.verification import (
    appendix_grid,
    rows_to_csv,
    simplex_quadrature,
    simplex_tail_quadrature,
    straddle_rows,
)


def t_form(d, a, L):
    # (1/(d-1)!) int_0^L e^{at} t^{d-1} dt, the one-dimensional form
    val, _ = integrate.quad(lambda t: math.exp(a * t) * t ** (d - 1), 0, L, epsabs=0, epsrel=1e-13)
    return val / math.factorial(d - 1)


@pytest.mark.parametrize(
    "d,a,L,expected",
    [
        (1, 1.0, 1.0, math.e - 1),
        (3, 0.0, 2.0, 8 / 6),
        (2, -1.0, 1.0, 1 - 2 / math.e),
    ],
)
def test_closed_form_examples(d, a, L, expected):
    assert exp_simplex_integral(d, a, L) == pytest.approx(expected, rel=1e-12)


def test_closed_form_2d_against_nquad():
    val, _ = integrate.dblquad(lambda y, x: math.exp(-(x + y)), 0, 1, 0, lambda x: 1 - x, epsabs=1e-14)
    assert exp_simplex_integral(2, -1.0, 1.0) == pytest.approx(val, rel=1e-10)


@pytest.mark.parametrize("d", [1, 2, 3, 4, 5])
@pytest.mark.parametrize("a", [-5.0, -2.0, -0.3, 0.3, 2.0, 5.0])
@pytest.mark.parametrize("L", [0.3, 1.0, 5.0])
def test_closed_form_matches_t_integral(d, a, L):
    assert exp_simplex_integral(d, a, L) == pytest.approx(t_form(d, a, L), rel=1e-12)


def test_errors():
    with pytest.raises(ValueError):
        exp_simplex_integral(0, 1.0, 1.0)
    with pytest.raises(ValueError):
        exp_simplex_integral(2, 1.0, 0.0)
    with pytest.raises(ValueError):
        work_bound_constant([-1.0, 0.0])
    with pytest.raises(ValueError):
        bias_bound_constant([1.0, 0.0])


@settings(max_examples=60, deadline=None)
@given(
    d=st.integers(1, 5),
    a=st.floats(-5, 5),
    L=st.floats(0.05, 5),
    dL=st.floats(0.01, 1),
    da=st.floats(0.01, 1),
)
def test_monotone_in_L_and_a(d, a, L, dL, da):
    v = exp_simplex_integral(d, a, L)
    assert exp_simplex_integral(d, a, L + dL) > v
    assert exp_simplex_integral(d, a + da, L) > v


@pytest.mark.parametrize("d", [1, 2, 3, 5])
@pytest.mark.parametrize("sign", [-1, 1])
def test_series_switch_is_continuous(d, sign):
    below = exp_simplex_integral(d, sign * SERIES_THRESHOLD * (1 - 1e-9), 1.0)
    above = exp_simplex_integral(d, sign * SERIES_THRESHOLD * (1 + 1e-9), 1.0)
    assert above == pytest.approx(below, rel=1e-10)


def test_work_constant_examples():
    k = work_bound_constant([2.0])
    assert k.c_w == 0.5 and k.a1 == 1
    for L in (0.5, 1.0, 3.0):
        assert work_bound([2.0], L) >= (math.exp(2 * L) - 1) / 2
    assert work_bound_constant([1.0, 1.0]).c_w == pytest.approx(1.0)
    k = work_bound_constant([2.0, 1.0])
    assert (k.A, k.a1, k.a2) == (2.0, 1, 1)
    assert k.eps == pytest.approx(0.5)
    for L in (0.5, 1, 2, 4):
        assert simplex_quadrature([2.0, 1.0], L) <= work_bound([2.0, 1.0], L)


def test_bias_constant_examples():
    k = bias_bound_constant([3.0])
    assert k.c_b == pytest.approx(1 / 3)
    # d = 1: the bound is an equality
    assert bias_bound([3.0], 2.0) == pytest.approx(math.exp(-6) / 3, rel=1e-14)
    assert simplex_tail_quadrature([3.0], 2.0) == pytest.approx(math.exp(-6) / 3, rel=1e-12)
    assert bias_bound_constant([1.0, 1.0]).c_b == pytest.approx(2.0)
    k = bias_bound_constant([1.0, 2.0])
    assert (k.A, k.a1, k.a2, k.eps) == (1.0, 1, 1, 1.0)
    for L in (1, 2, 4):
        assert simplex_tail_quadrature([1.0, 2.0], L) <= bias_bound([1.0, 2.0], L)


def test_tail_oracle_against_full_minus_simplex():
    # independent route for the tail: full orthant integral minus simplex part
    a = np.array([1.0, 2.0])
    full = 1 / np.prod(a)
    inside, _ = integrate.dblquad(lambda y, x: math.exp(-(a[0] * x + a[1] * y)), 0, 2.0, 0, lambda x: 2.0 - x,
                                  epsabs=1e-14)
    assert simplex_tail_quadrature(a, 2.0) == pytest.approx(full - inside, rel=1e-9)


def test_quadrature_oracle_against_nquad():
    a = [1.0, 2.0]
    val, _ = integrate.dblquad(lambda y, x: math.exp(x + 2 * y), 0, 1.5, 0, lambda x: 1.5 - x, epsabs=1e-13)
    assert simplex_quadrature(a, 1.5) == pytest.approx(val, rel=1e-10)


def test_small_grid_and_csv():
    rows = appendix_grid(dims=(1, 2), rates=(-1.0, 1.0), levels=(1.0,))
    assert rows and all(r.passed for r in rows)
    text = rows_to_csv(rows + straddle_rows(d_max=2))
    header = text.splitlines()[0].split(",")
    assert header[:3] == ["check", "d", "a"]
    assert "straddle" in text


def test_d1_tail_row_has_zero_slack():
    rows = [r for r in appendix_grid(dims=(1,), rates=(1.0,), levels=(2.0,)) if r.check == "tail_bound"]
    assert rows and abs(rows[0].slack) < 1e-12
