import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mimc.index_sets import (
    IndexSet,
    distinct_profit_levels,
    full_tensor_set,
    outer_boundary,
    optimal_weights,
    profit,
    profit_level_set,
    profit_table_csv,
    td_set,
)
from mimc.rate_model import BoxTooSmallError, RateParameters


def brute_td(delta, L, box=12):
    d = len(delta)
    return {a for a in itertools.product(range(box), repeat=d) if np.dot(delta, a) <= L + 1e-12}


def test_full_tensor_examples():
    assert list(full_tensor_set((1, 1))) == [(0, 0), (0, 1), (1, 0), (1, 1)]
    assert list(full_tensor_set((0, 0, 0))) == [(0, 0, 0)]
    assert len(full_tensor_set((2, 1, 0))) == 6
    # real levels are floored
    assert len(full_tensor_set((2.7, 1.2))) == 6
    with pytest.raises(ValueError):
        full_tensor_set((-1, 2))


def test_td_examples():
    I = td_set([1 / 3] * 3, 1)
    assert len(I) == 20
    assert set(I) == {a for a in itertools.product(range(4), repeat=3) if sum(a) <= 3}
    assert list(td_set([1.0], 2)) == [(0,), (1,), (2,)]
    assert list(td_set([0.25, 0.75], 0)) == [(0, 0)]
    assert set(td_set([0.3, 0.7], 1.7)) == brute_td([0.3, 0.7], 1.7)
    with pytest.raises(ValueError):
        td_set([0.5, 0.6], 1)


def test_optimal_weights_examples(iso3):
    assert optimal_weights(iso3) == pytest.approx([1 / 3] * 3)
    r = RateParameters(d=2, beta=[2, 2], w=[1, 2], s=[2, 4], gamma=[1, 2])
    assert optimal_weights(r) == pytest.approx([1 / 3, 2 / 3], rel=1e-14)
    assert optimal_weights(RateParameters(1, 3.0, 1.0, 0.5, 4.0)) == pytest.approx([1.0])


def test_profit_examples(iso3):
    assert profit((0, 0, 0), iso3) == 1.0
    assert profit((1, 0, 0), iso3) == pytest.approx(0.5, rel=1e-14)
    assert profit((1, 1, 1), iso3) == pytest.approx(0.125, rel=1e-14)


def test_profit_level_examples(iso3):
    assert len(profit_level_set(0.2, iso3)) == 10
    assert set(profit_level_set(0.2, iso3)) == {a for a in itertools.product(range(3), repeat=3) if sum(a) <= 2}
    assert list(profit_level_set(1.0, iso3)) == [(0, 0, 0)]
    # tie at exactly 0.5 is included
    assert len(profit_level_set(0.5, iso3)) == 4
    assert list(profit_level_set(0.5 * (1 + 1e-9), iso3)) == [(0, 0, 0)]


def test_profit_level_box_too_small(iso3):
    with pytest.raises(BoxTooSmallError):
        profit_level_set(0.2, iso3, box=(2, 2, 2))
    assert len(profit_level_set(0.2, iso3, box=(3, 3, 3))) == 10


def test_outer_boundary_examples():
    assert list(outer_boundary(full_tensor_set((1, 1)))) == [(0, 1), (1, 0), (1, 1)]
    assert list(outer_boundary(IndexSet([(0, 0, 0)]))) == [(0, 0, 0)]
    B = outer_boundary(td_set([1 / 3] * 3, 1))
    assert len(B) == 10 and all(sum(a) == 3 for a in B)
    with pytest.raises(ValueError):
        outer_boundary(IndexSet([], d=2))


def test_index_set_basics():
    I = IndexSet([(1, 0), (0, 0), (0, 1), (0, 0)])
    assert len(I) == 3 and (1, 0) in I and (1, 1) not in I
    assert list(I) == [(0, 0), (0, 1), (1, 0)]
    assert I.is_downward_closed()
    assert not IndexSet([(0, 0), (1, 1)]).is_downward_closed()
    with pytest.raises(ValueError):
        IndexSet([(0, 0), (1,)])
    with pytest.raises(ValueError):
        IndexSet([(0, -1)])
    back = IndexSet.from_json(I.to_json())
    assert back == I
    assert json.loads(I.to_json()) == [[0, 0], [0, 1], [1, 0]]


def test_iteration_order_is_construction_independent():
    members = [(2, 0), (0, 1), (1, 1), (0, 0), (1, 0)]
    a = IndexSet(members)
    b = IndexSet(reversed(members))
    assert list(a) == list(b) == sorted(members)


def test_profit_csv(iso3):
    text = profit_table_csv(profit_level_set(0.5, iso3), iso3)
    lines = text.strip().splitlines()
    assert lines[0] == "alpha_1,alpha_2,alpha_3,profit"
    assert lines[1] == "0,0,0,1"
    assert len(lines) == 5


def test_distinct_profit_levels(iso3):
    assert distinct_profit_levels(iso3, 4) == pytest.approx([1, 0.5, 0.25, 0.125])


rates_strategy = st.builds(
    lambda d, beta, w, frac, gamma: RateParameters(
        d=d, beta=beta[:d], w=w[:d], s=[f * 2 * x for f, x in zip(frac[:d], w[:d])], gamma=gamma[:d]
    ),
    st.integers(1, 3),
    st.lists(st.floats(1.2, 4), min_size=3, max_size=3),
    st.lists(st.floats(0.3, 3), min_size=3, max_size=3),
    st.lists(st.floats(0.1, 1), min_size=3, max_size=3),
    st.lists(st.floats(0.3, 4), min_size=3, max_size=3),
)


@settings(max_examples=40, deadline=None)
@given(rates=rates_strategy, nu1=st.floats(0.02, 1), nu2=st.floats(0.02, 1))
def test_profit_sets_closed_and_monotone(rates, nu1, nu2):
    hi, lo = max(nu1, nu2), min(nu1, nu2)
    A, B = profit_level_set(hi, rates), profit_level_set(lo, rates)
    assert A.is_downward_closed() and B.is_downward_closed()
    assert A.issubset(B)
    d = optimal_weights(rates)
    assert np.all(d > 0) and d.sum() == pytest.approx(1.0)


@settings(max_examples=40, deadline=None)
@given(
    raw=st.lists(st.floats(0.1, 1), min_size=1, max_size=3),
    L1=st.floats(0, 4),
    L2=st.floats(0, 4),
)
def test_td_sets_closed_and_monotone(raw, L1, L2):
    delta = np.array(raw) / np.sum(raw)
    small, big = td_set(delta, min(L1, L2)), td_set(delta, max(L1, L2))
    assert small.is_downward_closed() and big.is_downward_closed()
    assert small.issubset(big)
    assert set(big) == brute_td(delta, max(L1, L2), box=int(4 / delta.min()) + 2)


@settings(max_examples=30, deadline=None)
@given(L=st.lists(st.integers(0, 3), min_size=1, max_size=3), extra=st.lists(st.integers(0, 2), min_size=3, max_size=3))
def test_full_tensor_monotone(L, extra):
    L2 = [a + b for a, b in zip(L, extra)]
    A, B = full_tensor_set(L), full_tensor_set(L2)
    assert A.is_downward_closed() and A.issubset(B)
    assert len(A) == int(np.prod([x + 1 for x in L]))


@settings(max_examples=50, deadline=None)
@given(rates=rates_strategy, data=st.data())
def test_profit_multiplicative(rates, data):
    a = tuple(data.draw(st.lists(st.integers(0, 4), min_size=rates.d, max_size=rates.d)))
    b = tuple(data.draw(st.lists(st.integers(0, 4), min_size=rates.d, max_size=rates.d)))
    ab = tuple(x + y for x, y in zip(a, b))
    assert profit(ab, rates) == pytest.approx(profit(a, rates) * profit(b, rates), rel=1e-12)
