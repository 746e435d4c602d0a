"""Exponential integrals over the positive simplex and their bound constants.

All integrals are over ``{x in R_+^d : |x| <= L}`` (or its complement in
``R_+^d`` for the tail bound), where ``|x|`` is the l1 norm.  These feed the
level-selection constants of total-degree index sets and the work constants
of the complexity classifier.
"""
from __future__ import annotations

import math
from typing import NamedTuple, Sequence

import numpy as np

# Below this |aL| the closed form is replaced by its Taylor expansion.
SERIES_THRESHOLD = 1e-6
_TAYLOR_TERMS = 10


class WorkBoundConstant(NamedTuple):
    c_w: float
    eps: float
    A: float
    a1: int
    a2: int


class BiasBoundConstant(NamedTuple):
    c_b: float
    A: float
    a1: int
    a2: int
    eps: float


def _taylor_simplex(d: int, x: float, L: float) -> float:
    # (1/(d-1)!) int_0^L e^{at} t^{d-1} dt = L^d sum_k x^k / (k! (d+k) (d-1)!)
    total = 0.0
    term = 1.0
    for k in range(_TAYLOR_TERMS):
        total += term / (d + k)
        term *= x / (k + 1)
    return L**d * total / math.factorial(d - 1)


def exp_simplex_integral(d: int, a: float, L: float) -> float:
    """Integral of ``exp(a |x|)`` over the d-dimensional simplex of size L.

    Uses ``(-a)^-d (1 - e^{La} sum_{j<d} (-La)^j / j!)``.  For ``|aL| < 1`` the
    bracket is evaluated as the tail of the exponential series, which is the
    same expression without the cancellation; below ``SERIES_THRESHOLD`` the
    Taylor expansion of the equivalent one-dimensional form is used.
    """
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if not L > 0:
        raise ValueError(f"L must be positive, got {L}")
    x = a * L
    if abs(x) < SERIES_THRESHOLD:
        return _taylor_simplex(d, x, L)
    if abs(x) < 1.0:
        # 1 - e^x sum_{j<d} (-x)^j/j! = e^x sum_{j>=d} (-x)^j/j!
        # so the integral is L^d e^x sum_{k>=0} (-x)^k/(k+d)!
        total = 0.0
        term = 1.0 / math.factorial(d)
        k = 0
        while True:
            total += term
            k += 1
            term *= -x / (k + d)
            if abs(term) < 1e-18 * abs(total):
                break
        return L**d * math.exp(x) * total
    partial = sum((-x) ** j / math.factorial(j) for j in range(d))
    return (-a) ** (-d) * (1.0 - math.exp(x) * partial)


def _split_by_extreme(a: np.ndarray, A: float) -> tuple[int, int]:
    tie = np.isclose(a, A, rtol=1e-12, atol=0.0)
    a1 = int(tie.sum())
    return a1, a.size - a1


def work_bound_constant(a: Sequence[float]) -> WorkBoundConstant:
    """Constant ``c_W`` with ``int_{|x|<=L} e^{a.x} dx <= c_W e^{AL} L^{a1-1}``.

    ``A`` is the largest entry of ``a`` (must be positive) and ``a1`` its
    multiplicity.  In the mixed case the free parameter ``eps`` is fixed at half
    of its admissible upper bound ``A - max(0, max_{a_i < A} a_i)``.
    """
    a = np.asarray(a, dtype=float)
    d = a.size
    A = float(a.max())
    if not A > 0:
        raise ValueError("work bound requires max(a) > 0")
    a1, a2 = _split_by_extreme(a, A)
    if a1 == d:
        return WorkBoundConstant(1.0 / (A * math.factorial(d - 1)), float("nan"), A, a1, a2)
    below = a[~np.isclose(a, A, rtol=1e-12, atol=0.0)]
    eps = 0.5 * (A - max(0.0, float(below.max())))
    c = (
        math.exp(1 - a2)
        / (math.factorial(a1 - 1) * math.factorial(a2 - 1))
        * (2 * (a2 - 1) / eps) ** (a2 - 1)
    )
    return WorkBoundConstant(4 * c / (eps * (2 * A - eps)), eps, A, a1, a2)


def bias_bound_constant(a: Sequence[float]) -> BiasBoundConstant:
    """Constant ``c_B`` with ``int_{|x|>L} e^{-a.x} dx <= c_B e^{-AL} L^{a1-1}``, L >= 1.

    ``A`` is the smallest entry of ``a`` and ``eps`` the gap to the next
    distinct entry.
    """
    a = np.asarray(a, dtype=float)
    if np.any(a <= 0):
        raise ValueError("tail bound requires strictly positive components")
    d = a.size
    A = float(a.min())
    a1, a2 = _split_by_extreme(a, A)
    if a1 == d:
        c_b = sum(A ** (j - d) / math.factorial(j) for j in range(d))
        return BiasBoundConstant(c_b, A, a1, a2, float("nan"))
    eps = float(a[~np.isclose(a, A, rtol=1e-12, atol=0.0)].min()) - A
    B = A + eps
    first = B ** (-a2) * sum(A ** (j - a1) / math.factorial(j) for j in range(a1))
    # j = 0 term uses 0^0 = 1
    second = sum(
        math.exp(-j) * (2 * j / eps) ** j * B ** (j - a2) / math.factorial(j)
        for j in range(a2)
    )
    second *= 2 / (math.factorial(a1 - 1) * eps)
    return BiasBoundConstant(first + second, A, a1, a2, eps)


def work_bound(a: Sequence[float], L: float) -> float:
    """Right-hand side ``c_W e^{AL} L^{a1-1}`` of the work bound."""
    k = work_bound_constant(a)
    return k.c_w * math.exp(k.A * L) * L ** (k.a1 - 1)


def bias_bound(a: Sequence[float], L: float) -> float:
    """Right-hand side ``c_B e^{-AL} L^{a1-1}`` of the tail bound."""
    k = bias_bound_constant(a)
    return k.c_b * math.exp(-k.A * L) * L ** (k.a1 - 1)
