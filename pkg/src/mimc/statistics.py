"""Rate fits, complexity slopes and a normality check for estimator errors."""
from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

KS_LEVEL = 0.01


@dataclass
class RateFit:
    slope: float
    intercept: float
    r2: float
    n: int

    def to_dict(self) -> dict:
        return asdict(self)


def rate_fit(pairs: Iterable[tuple[float, float]], base: float = 2.0) -> RateFit:
    """Least-squares fit of ``log_base(value)`` against level.

    A slope of ``-w`` means the values decay like ``base^(-w level)``.
    """
    pairs = list(pairs)
    if len(pairs) < 3:
        raise ValueError("rate fit needs at least 3 points")
    x = np.array([p[0] for p in pairs], dtype=float)
    v = np.array([p[1] for p in pairs], dtype=float)
    if np.any(~(v > 0)):
        raise ValueError("rate fit needs strictly positive values")
    y = np.log(v) / math.log(base)
    res = stats.linregress(x, y)
    r2 = res.rvalue**2 if np.ptp(y) > 0 else 1.0
    return RateFit(float(res.slope), float(res.intercept), float(r2), len(pairs))


@dataclass
class ComplexityFit:
    slope: float
    intercept: float
    half_width: float
    n: int
    log_power: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def _check_sweep(tol: np.ndarray, work: np.ndarray):
    if tol.size < 4:
        raise ValueError("complexity fit needs at least 4 tolerances")
    if np.any(tol <= 0) or np.any(work <= 0):
        raise ValueError("tolerances and work must be positive")
    if np.log10(tol.max() / tol.min()) < 1.0 - 1e-12:
        raise ValueError("tolerances must span at least one decade")


def complexity_fit(
    pairs: Iterable[tuple[float, float]], log_power: float = 0.0, confidence: float = 0.95
) -> ComplexityFit:
    """Slope of ``log(work / log(1/TOL)^p)`` against ``log(TOL)``.

    ``log_power = p`` removes a known logarithmic factor before fitting.  The
    half-width is the Student-t confidence interval of the slope.
    """
    pairs = list(pairs)
    tol = np.array([p[0] for p in pairs], dtype=float)
    work = np.array([p[1] for p in pairs], dtype=float)
    _check_sweep(tol, work)
    if log_power and np.any(tol >= 1):
        raise ValueError("log correction needs TOL < 1")
    y = np.log(work) - log_power * np.log(np.log(1 / tol)) if log_power else np.log(work)
    res = stats.linregress(np.log(tol), y)
    q = stats.t.ppf(0.5 + confidence / 2, tol.size - 2)
    return ComplexityFit(float(res.slope), float(res.intercept), float(q * res.stderr), int(tol.size), float(log_power))


def fixed_slope_residual(pairs, slope: float, log_power: float = 0.0) -> float:
    """Residual sum of squares of ``log work = c + slope log TOL + p log log(1/TOL)``
    with only ``c`` free."""
    tol = np.array([p[0] for p in pairs], dtype=float)
    work = np.array([p[1] for p in pairs], dtype=float)
    _check_sweep(tol, work)
    r = np.log(work) - slope * np.log(tol) - log_power * np.log(np.log(1 / tol))
    return float(np.sum((r - r.mean()) ** 2))


def ks_critical_value(n: int, level: float = KS_LEVEL) -> float:
    """Asymptotic Kolmogorov critical value ``K_{1-level} / sqrt(n)``."""
    return float(stats.kstwobign.ppf(1 - level) / math.sqrt(n))


@dataclass
class NormalityResult:
    statistic: float
    critical_value: float
    passed: bool
    n: int

    def to_dict(self) -> dict:
        return asdict(self)


def normality_check(values: Sequence[float], level: float = KS_LEVEL) -> NormalityResult:
    """One-sample Kolmogorov-Smirnov test against the standard normal."""
    values = np.asarray(values, dtype=float)
    if values.size < 50:
        raise ValueError("normality check needs at least 50 values")
    stat = float(stats.kstest(values, "norm").statistic)
    crit = ks_critical_value(values.size, level)
    return NormalityResult(stat, crit, stat < crit, int(values.size))
