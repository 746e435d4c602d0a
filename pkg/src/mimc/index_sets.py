"""Multi-index sets: full-tensor boxes, weighted total-degree simplices and
profit level sets.

A multi-index is a plain tuple of non-negative ints.  Sets are materialized
and kept sorted lexicographically, so iteration order never depends on how a
set was built.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
import math
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

from .rate_model import BoxTooSmallError, RateParameters, optimal_delta

MultiIndex = tuple

KINDS = ("full-tensor", "total-degree", "profit", "explicit")

# membership slack for real-valued levels and profit ties
LEVEL_TOL = 1e-12


class IndexSet:
    """Immutable, sorted collection of multi-indices of one dimension."""

    __slots__ = ("_members", "_lookup", "d", "kind")

    def __init__(self, members: Iterable[Sequence[int]], d: Optional[int] = None, kind: str = "explicit"):
        if kind not in KINDS:
            raise ValueError(f"unknown kind {kind!r}")
        items = sorted({tuple(int(x) for x in m) for m in members})
        if d is None:
            if not items:
                raise ValueError("dimension required for an empty set")
            d = len(items[0])
        for m in items:
            if len(m) != d:
                raise ValueError(f"index {m} does not have dimension {d}")
            if min(m) < 0:
                raise ValueError(f"negative component in {m}")
        self._members = tuple(items)
        self._lookup = frozenset(items)
        self.d = d
        self.kind = kind

    def __contains__(self, alpha) -> bool:
        return tuple(alpha) in self._lookup

    def __iter__(self) -> Iterator[tuple]:
        return iter(self._members)

    def __len__(self) -> int:
        return len(self._members)

    def __eq__(self, other) -> bool:
        if not isinstance(other, IndexSet):
            return NotImplemented
        return self.d == other.d and self._members == other._members

    def __hash__(self):
        return hash((self.d, self._members))

    def __repr__(self) -> str:
        return f"IndexSet(kind={self.kind!r}, d={self.d}, size={len(self)})"

    def issubset(self, other: "IndexSet") -> bool:
        return self._lookup <= other._lookup

    def as_array(self) -> np.ndarray:
        return np.array(self._members, dtype=np.int64).reshape(-1, self.d)

    def is_downward_closed(self) -> bool:
        for alpha in self._members:
            for i, a in enumerate(alpha):
                if a > 0 and alpha[:i] + (a - 1,) + alpha[i + 1:] not in self._lookup:
                    return False
        return True

    def max_index(self) -> tuple:
        return tuple(int(x) for x in self.as_array().max(axis=0))

    def to_json(self) -> str:
        return json.dumps([list(m) for m in self._members])

    @classmethod
    def from_json(cls, text: str, d: Optional[int] = None, kind: str = "explicit") -> "IndexSet":
        return cls(json.loads(text), d=d, kind=kind)


def _unit(d: int, i: int) -> tuple:
    return tuple(1 if j == i else 0 for j in range(d))


def full_tensor_set(L: Sequence[float]) -> IndexSet:
    """``{alpha : alpha_i <= L_i}``; real ``L_i`` are floored."""
    L = np.atleast_1d(np.asarray(L, dtype=float))
    if L.ndim != 1 or L.size < 1:
        raise ValueError("L must be a non-empty vector")
    if np.any(L < 0):
        raise ValueError("levels must be non-negative")
    tops = [int(math.floor(x + LEVEL_TOL)) for x in L]
    members = itertools.product(*(range(t + 1) for t in tops))
    return IndexSet(members, d=len(tops), kind="full-tensor")


def _check_delta(delta: Sequence[float]) -> np.ndarray:
    delta = np.atleast_1d(np.asarray(delta, dtype=float))
    if np.any(delta <= 0) or np.any(delta > 1) or not math.isclose(delta.sum(), 1.0, rel_tol=1e-12):
        raise ValueError("weights must lie in (0, 1] and sum to one")
    return delta


def td_set(delta: Sequence[float], L: float) -> IndexSet:
    """``{alpha : delta . alpha <= L}`` with a 1e-12 tolerance on the level."""
    delta = _check_delta(delta)
    if L < 0:
        raise ValueError("level must be non-negative")
    d = delta.size
    limit = L + LEVEL_TOL * max(1.0, L)
    tops = np.floor(limit / delta).astype(int)
    members = []
    # depth-first enumeration, pruning on the partial weighted sum
    def rec(prefix: list, used: float, i: int):
        if i == d:
            members.append(tuple(prefix))
            return
        k = 0
        while k <= tops[i] and used + k * delta[i] <= limit:
            prefix.append(k)
            rec(prefix, used + k * delta[i], i + 1)
            prefix.pop()
            k += 1

    rec([], 0.0, 0)
    return IndexSet(members, d=d, kind="total-degree")


def optimal_weights(rates: RateParameters) -> np.ndarray:
    """Weights proportional to ``log(beta_i) (w_i + (gamma_i - s_i)/2)``."""
    return optimal_delta(rates)


def profit_exponents(rates: RateParameters) -> np.ndarray:
    return rates.log_beta * (rates.w + (rates.gamma - rates.s) / 2)


def profit(alpha: Sequence[int], rates: RateParameters) -> float:
    """``prod_i beta_i^(-alpha_i (w_i + (gamma_i - s_i)/2))``."""
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (rates.d,):
        raise ValueError("index dimension does not match rates")
    return float(np.exp(-alpha @ profit_exponents(rates)))


def profit_level_set(nu: float, rates: RateParameters, box: Optional[Sequence[int]] = None) -> IndexSet:
    """``{alpha : profit(alpha) >= nu}`` searched inside ``alpha_i <= box_i``.

    Ties are included.  Without an explicit box one is derived that is just
    large enough; an explicit box raises :class:`BoxTooSmallError` if some
    member sits on its outer face.
    """
    if not 0 < nu <= 1:
        raise ValueError("nu must lie in (0, 1]")
    c = profit_exponents(rates)
    log_inv = math.log(1 / nu)
    if box is None:
        box = [int(math.ceil(log_inv / ci)) + 1 for ci in c]
    box = [int(b) for b in box]
    if len(box) != rates.d:
        raise ValueError("box dimension does not match rates")
    limit = log_inv * (1 + LEVEL_TOL) + LEVEL_TOL
    grid = np.indices([b + 1 for b in box]).reshape(rates.d, -1).T
    keep = grid[grid @ c <= limit]
    for i, b in enumerate(box):
        if np.any(keep[:, i] == b):
            raise BoxTooSmallError(f"profit level set reaches box face in direction {i + 1}")
    return IndexSet(map(tuple, keep), d=rates.d, kind="profit")


def distinct_profit_levels(rates: RateParameters, count: int) -> list[float]:
    """The ``count`` largest distinct profit values, in decreasing order."""
    c = profit_exponents(rates)
    levels: list[float] = []
    radius = 1
    while True:
        box = [int(math.ceil(radius * c.max() / ci)) for ci in c]
        grid = np.indices([b + 1 for b in box]).reshape(rates.d, -1).T
        expo = np.sort(grid @ c)
        levels = []
        for e in expo:
            if not levels or not math.isclose(e, levels[-1], rel_tol=LEVEL_TOL, abs_tol=LEVEL_TOL):
                levels.append(float(e))
        # every exponent up to radius * max(c) is captured by this box
        if len(levels) >= count and levels[count - 1] <= radius * c.max():
            return [math.exp(-e) for e in levels[:count]]
        radius *= 2


def outer_boundary(index_set: IndexSet) -> IndexSet:
    """Members with at least one forward neighbour outside the set."""
    if len(index_set) == 0:
        raise ValueError("boundary of an empty set")
    d = index_set.d
    members = [
        alpha
        for alpha in index_set
        if any(tuple(a + u for a, u in zip(alpha, _unit(d, j))) not in index_set for j in range(d))
    ]
    return IndexSet(members, d=d, kind="explicit")


def profit_table_csv(index_set: IndexSet, rates: RateParameters) -> str:
    """CSV with columns ``alpha_1..alpha_d, profit``."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow([f"alpha_{i + 1}" for i in range(index_set.d)] + ["profit"])
    for alpha in index_set:
        writer.writerow(list(alpha) + [f"{profit(alpha, rates):.17g}"])
    return buf.getvalue()
