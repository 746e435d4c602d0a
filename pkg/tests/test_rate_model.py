import math

import numpy as np
import pytest

from mimc.index_sets import full_tensor_set, optimal_weights, td_set
from mimc.rate_model import (
    BoxTooSmallError,
    RateParameters,
    c_epsilon,
    classify_directions,
    collapse_rates,
    complexity_class,
    derived_rates,
    ft_complexity,
    ft_levels_for_tol,
    mlmc_complexity,
    predicted_bias_bound,
    predicted_work_bound,
    td_bias_constant,
    td_level_for_tol,
    _lemma_case,
    _theorem_case,
)

LN2 = math.log(2)


def random_rates(rng, d):
    w = rng.uniform(0.3, 3, d)
    return RateParameters(
        d=d,
        beta=rng.uniform(1.2, 4, d),
        w=w,
        s=w * 2 * rng.uniform(0.05, 1, d),
        gamma=rng.uniform(0.2, 5, d),
    )


def test_invalid_rates():
    with pytest.raises(ValueError):
        RateParameters(1, beta=1.0, w=1, s=1, gamma=1)
    with pytest.raises(ValueError):
        RateParameters(1, beta=2, w=1, s=2.5, gamma=1)
    with pytest.raises(ValueError):
        RateParameters(2, beta=2, w=[1, 1, 1], s=1, gamma=1)
    with pytest.raises(ValueError):
        RateParameters(1, beta=2, w=1, s=1, gamma=1, Q_W=0)


def test_classify_examples(iso3):
    c = classify_directions(iso3)
    assert c.I1 == (0, 1, 2) and c.sizes == (3, 0, 0)
    assert classify_directions(RateParameters.isotropic(2, 2, 1, 1, 1)).I2 == (0, 1)
    c = classify_directions(RateParameters(3, 2, w=[2, 1, 1], s=[4, 1, 1], gamma=[2, 1, 2]))
    assert (c.I1, c.I2, c.I3) == ((0,), (1,), (2,))


def test_derived_rates_examples(iso3):
    dr = derived_rates(iso3, [1 / 3] * 3)
    assert dr.eta == pytest.approx(6 * LN2) and dr.e_mult == 3
    assert dr.Gamma == pytest.approx(6 * LN2) and dr.g_mult == 3
    assert dr.chi == pytest.approx(-3 * LN2) and dr.x_mult == 3
    assert dr.zeta == pytest.approx(-0.5) and dr.z_mult == 3
    assert dr.xi == 0.0
    dr = derived_rates(RateParameters(1, math.e, 1, 1, 1), [1.0])
    assert (dr.eta, dr.Gamma, dr.chi, dr.zeta, dr.xi) == pytest.approx((1, 1, 0, 0, 1))


def test_identities_on_random_rates(rng):
    for _ in range(1000):
        r = random_rates(rng, int(rng.integers(1, 6)))
        delta = optimal_weights(r)
        dr = derived_rates(r, delta)
        assert dr.chi / dr.eta == pytest.approx(dr.zeta, rel=1e-12, abs=1e-15)
        assert dr.Gamma / (2 * dr.eta) == pytest.approx((1 + dr.zeta) / (1 + dr.xi), rel=1e-12)
        assert dr.e_mult == dr.x_mult == dr.z_mult
        assert dr.d1 + dr.d2 + dr.d3 == r.d
        if dr.zeta <= 0:
            assert dr.chi <= 0
        assert np.all(delta > 0) and delta.sum() == pytest.approx(1.0)


def test_g_mult_equals_d_for_isotropic_xi_zero():
    dr = derived_rates(RateParameters.isotropic(4, 2, 1, 2, 3), [0.25] * 4)
    assert dr.xi == 0 and dr.g_mult == 4


def test_lemma_and_theorem_agree_under_optimal_weights(rng):
    # random draws rarely hit the boundary cases, so mix in isotropic ones
    cases = [random_rates(rng, int(rng.integers(1, 5))) for _ in range(300)]
    for d in (1, 2, 3, 4):
        for w, s, g in [(2, 4, 2), (1, 1, 1), (1, 1, 2), (1, 2, 2), (1, 2, 3), (2, 3, 1)]:
            cases.append(RateParameters.isotropic(d, 2, w, s, g))
    cases.append(RateParameters(2, 2, w=[1, 1], s=[2, 1], gamma=[2, 1]))
    cases.append(RateParameters(3, 2, w=[1, 1, 1], s=[2, 2, 2], gamma=[2, 1, 3]))
    for r in cases:
        dr = derived_rates(r, optimal_weights(r))
        c1, p1 = _lemma_case(dr)
        c2, p2 = _theorem_case(dr, r.d)
        assert c1 == c2, (r, c1, c2)
        assert p1 == pytest.approx(p2, abs=1e-9)


def test_complexity_examples(iso3):
    rep = complexity_class(iso3)
    assert (rep.case, rep.tol_exponent, rep.log_power) == ("A", 2.0, 0.0)
    rep = complexity_class(RateParameters.isotropic(2, 2, 1, 1, 1))
    assert (rep.case, rep.tol_exponent, rep.log_power) == ("A", 2.0, 4.0)
    rep = complexity_class(RateParameters.isotropic(2, 2, 1, 1, 2))
    assert rep.case == "B" and rep.tol_exponent == pytest.approx(3.0) and rep.log_power == pytest.approx(3.0)
    assert rep.details["zeta"] == pytest.approx(0.5) and rep.details["xi"] == pytest.approx(0.5)
    # cases C and D
    rep = complexity_class(RateParameters.isotropic(3, 2, 1, 2, 2))
    # all directions have s = gamma, so d2 = 3 and the power is 2 d2 + d - 3
    assert (rep.case, rep.log_power) == ("C", 6.0)
    rep = complexity_class(RateParameters.isotropic(2, 2, 1, 2, 3))
    assert rep.case == "D" and rep.tol_exponent == pytest.approx(3.0)
    assert rep.log_power == pytest.approx(1 + 2 * 1 * 1.5)


def test_general_weights_use_lemma(iso3):
    rep = complexity_class(iso3, [0.5, 0.25, 0.25])
    assert not rep.details["optimal_weights"]
    dr = derived_rates(iso3, [0.5, 0.25, 0.25])
    expected = 2 * (1 + max(0, dr.chi / dr.eta, (dr.Gamma - 2 * dr.eta) / (2 * dr.eta)))
    assert rep.tol_exponent == pytest.approx(expected)
    assert rep.tol_exponent >= 2
    with pytest.raises(ValueError):
        complexity_class(iso3, [0.5, 0.5, 0.5])


def test_constants_are_finite(iso3):
    for r in (iso3, RateParameters.isotropic(2, 2, 1, 1, 2), RateParameters.isotropic(3, 2, 1, 2, 2)):
        rep = complexity_class(r)
        assert rep.constants["leading"] > 0 and np.isfinite(rep.constants["leading"])
    # case A isotropic constant: Q_S C_eps^2 theta^-2 C_A^-2 with C_A = prod(1 - 2^-1)
    rep = complexity_class(iso3)
    assert rep.constants["C_A"] == pytest.approx(0.125)
    assert rep.constants["leading"] == pytest.approx(c_epsilon(0.05) ** 2 / 0.25 / 0.125**2)


def test_ft_complexity_examples(iso3):
    rep = ft_complexity(iso3)
    assert not rep.applicable and rep.details["dominance_sum"] == pytest.approx(3.0)
    rep = ft_complexity(RateParameters.isotropic(2, 2, 2, 4, 1))
    assert rep.applicable and rep.tol_exponent == 2 and rep.log_power == 0
    rep = ft_complexity(RateParameters.isotropic(3, 2, 2, 1, 1))
    assert rep.log_power == 6 and rep.applicable
    rep = ft_complexity(RateParameters.isotropic(2, 2, 2, 1, 2))
    assert rep.tol_exponent == pytest.approx(3.0)


def test_one_direction_methods_agree():
    for w, s, g in [(1, 2, 1), (1, 1, 1), (1, 1, 2), (2, 3, 4)]:
        r = RateParameters(1, 2, w, s, g)
        a, b, c = mlmc_complexity(r), ft_complexity(r), complexity_class(r)
        assert a.tol_exponent == pytest.approx(b.tol_exponent) == pytest.approx(c.tol_exponent)
        assert a.log_power == pytest.approx(b.log_power) == pytest.approx(c.log_power)


def test_mlmc_examples(iso3):
    assert mlmc_complexity(iso3).tol_exponent == pytest.approx(3.0)
    assert mlmc_complexity(RateParameters(1, 2, 2, 4, 1)).tol_exponent == 2
    rep = mlmc_complexity(RateParameters.isotropic(2, 2, 1, 2, 1))
    assert (rep.tol_exponent, rep.log_power) == (2, 2)
    with pytest.raises(ValueError):
        mlmc_complexity(RateParameters(2, 2, [1, 2], 1, 1))
    assert collapse_rates(iso3).gamma[0] == 6


def test_ft_levels():
    r = RateParameters(1, 2, 1, 1, 1)
    # TOL_B = 0.04 with theta = 0.5
    assert ft_levels_for_tol(r, 0.08)[0] == pytest.approx(math.log(100) / LN2)
    assert ft_levels_for_tol(r, 8.0)[0] == 0.0


@pytest.mark.parametrize("tol", [1e-1, 1e-2, 1e-3])
def test_ft_levels_meet_bias_budget(iso3, tol):
    L = ft_levels_for_tol(iso3, tol)
    assert predicted_bias_bound(full_tensor_set(L), iso3) <= 0.5 * tol


def test_td_level_examples():
    r = RateParameters(1, 2, 1, 1, 1)
    c_bias = 2 / LN2
    assert td_bias_constant(r, [1.0]) == pytest.approx(c_bias)
    # TOL_B = c_bias gives L = 0, TOL_B = c_bias / 2 gives one level
    assert td_level_for_tol(r, [1.0], 2 * c_bias) == pytest.approx(0.0, abs=1e-12)
    assert td_level_for_tol(r, [1.0], c_bias) == pytest.approx(1.0)
    # multiplicity > 1 with TOL_B >= 1 drops the iterated log term
    assert td_level_for_tol(RateParameters.isotropic(2, 2, 1, 1, 1), [0.5, 0.5], 10.0) >= 0


@pytest.mark.parametrize(
    "rates",
    [
        RateParameters.isotropic(3, 2, 2, 4, 2),
        RateParameters(2, [2, 3], [1, 2], [2, 3], [1, 2.5]),
        RateParameters(1, 2, 1, 2, 1),
    ],
)
def test_td_bias_asymptotics(rates):
    delta = optimal_weights(rates)
    dr = derived_rates(rates, delta)
    c_bias = td_bias_constant(rates, delta)
    ratios = []
    for tol in [1e-2, 1e-4, 1e-6, 1e-8]:
        tol_b = 0.5 * tol
        L = td_level_for_tol(rates, delta, tol)
        ratio = predicted_bias_bound(td_set(delta, L), rates) / tol_b
        li = math.log(1 / tol_b)
        finite_bound = (1 + ((dr.e_mult - 1) * math.log(li / dr.eta) + math.log(c_bias)) / li) ** (dr.e_mult - 1)
        assert ratio <= finite_bound
        ratios.append(ratio)
    assert ratios[-1] <= 1.0


def test_predicted_work_bound():
    r = RateParameters(1, 2, 1, 1, 1)  # gamma = s, so g_bar = 0
    w_tilde, w_one, bound = predicted_work_bound(td_set([1.0], 2), r, 0.1)
    assert (w_tilde, w_one) == pytest.approx((3.0, 7.0))
    tol_s = 0.5 * 0.1 / c_epsilon(0.05)
    assert bound == pytest.approx(9 / tol_s**2 + 7)
    assert predicted_work_bound([(0, 0)], RateParameters.isotropic(2, 2, 1, 1, 1), 1.0)[:2] == (1.0, 1.0)


def test_predicted_bias_bound():
    r = RateParameters(1, 2, 1, 2, 1)
    for L in range(5):
        assert predicted_bias_bound([(a,) for a in range(L + 1)], r) == pytest.approx(2.0**-L, rel=1e-12)
    r2 = RateParameters.isotropic(2, 2, 1, 2, 1)
    assert predicted_bias_bound([(0, 0)], r2) == pytest.approx(3.0, rel=1e-12)
    small = predicted_bias_bound(td_set([0.5, 0.5], 1), r2)
    big = predicted_bias_bound(td_set([0.5, 0.5], 2), r2)
    assert big < small
    with pytest.raises(BoxTooSmallError):
        predicted_bias_bound([(0, 0)], r2, box=(1, 1))
    with pytest.raises(BoxTooSmallError):
        predicted_bias_bound([(3, 0)], r2, box=(2, 2))


def test_c_epsilon():
    assert c_epsilon(0.05) == pytest.approx(1.959964, abs=1e-6)
    assert c_epsilon(0.31731050786291415) == pytest.approx(1.0, abs=1e-12)
    assert c_epsilon(1 - 1e-12) == pytest.approx(0.0, abs=1e-11)
    for bad in (0.0, 1.0, -0.1):
        with pytest.raises(ValueError):
            c_epsilon(bad)


@pytest.mark.parametrize("d", [1, 2, 3, 4])
def test_td_exponent_never_exceeds_mlmc(d):
    # Under optimal TD weights the TOL exponent is 2 + max(0, (gamma - s) / w),
    # which is never larger than the MLMC one, 2 + max(0, (d gamma - s) / w).
    for w in (0.5, 1.0, 2.0):
        for s in (0.5, 1.0, 2.0, 4.0):
            if s > 2 * w:
                continue
            for gamma in (0.5, 1.0, 2.0, 3.0):
                rates = RateParameters.isotropic(d, 2.0, w, s, gamma)
                td = complexity_class(rates)
                ml = mlmc_complexity(rates)
                assert td.tol_exponent == pytest.approx(2 + max(0.0, (gamma - s) / w))
                assert ml.tol_exponent == pytest.approx(2 + max(0.0, (d * gamma - s) / w))
                assert td.tol_exponent <= ml.tol_exponent + 1e-12
