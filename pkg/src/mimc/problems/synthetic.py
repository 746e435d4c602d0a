"""Separable random model with known rates and moments.

    S_alpha(omega) = G(omega) * prod_i (1 + kappa_i(omega) beta_i^(-w_i alpha_i))

with ``G`` and ``kappa_i`` independent uniforms.  Mixed differences factor
direction by direction, so their means and variances are available in closed
form and decay exactly like ``beta^(-w alpha)`` and ``beta^(-2 w alpha)``.
Work per sample is simulated as ``prod beta_i^(gamma_i alpha_i)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from ..estimator import Sampler, mixed_difference_combination
from ..rate_model import RateParameters
from ..rng import uniforms


def _vec(x, d):
    arr = np.asarray(x, dtype=float)
    return np.full(d, float(arr)) if arr.ndim == 0 else arr


@dataclass
class SyntheticModelParams:
    d: int = 3
    beta: Sequence[float] | float = 2.0
    w: Sequence[float] | float = 2.0
    gamma: Sequence[float] | float = 2.0
    g_bounds: tuple[float, float] = (0.8, 1.2)
    kappa_bounds: tuple[float, float] = (0.1, 0.3)

    def __post_init__(self):
        self.beta = _vec(self.beta, self.d)
        self.w = _vec(self.w, self.d)
        self.gamma = _vec(self.gamma, self.d)
        for name in ("beta", "w", "gamma"):
            if getattr(self, name).shape != (self.d,):
                raise ValueError(f"{name} must have length {self.d}")
        if np.any(self.beta <= 1) or np.any(self.w <= 0) or np.any(self.gamma <= 0):
            raise ValueError("need beta > 1, w > 0, gamma > 0")
        lo, hi = self.kappa_bounds
        if not lo <= hi or lo + hi == 0:
            raise ValueError("kappa bounds must be ordered with nonzero mean")
        if not self.g_bounds[0] <= self.g_bounds[1]:
            raise ValueError("G bounds must be ordered")

    def rates(self) -> RateParameters:
        """Rates of the model: ``s = 2 w``, constants from the first moments."""
        return RateParameters(d=self.d, beta=self.beta, w=self.w, s=2 * self.w, gamma=self.gamma)


def _uniform_moments(lo, hi):
    m1 = (lo + hi) / 2
    m2 = (lo * lo + lo * hi + hi * hi) / 3
    return m1, m2


class SyntheticSampler(Sampler):
    """Exact mixed differences of the separable model."""

    def __init__(self, params: SyntheticModelParams):
        self.params = params
        self.d = params.d
        self._log_beta = np.log(params.beta)

    def _draws(self, sample_ids, seed, key):
        p = self.params
        u = uniforms(seed, key, sample_ids, 1 + self.d)
        g = p.g_bounds[0] + (p.g_bounds[1] - p.g_bounds[0]) * u[:, 0]
        k = p.kappa_bounds[0] + (p.kappa_bounds[1] - p.kappa_bounds[0]) * u[:, 1:]
        return g, k

    def qoi(self, corners, sample_ids, seed, key):
        g, k = self._draws(sample_ids, seed, key)
        out = np.empty((g.size, len(corners)))
        for c, alpha in enumerate(corners):
            decay = np.exp(-self.params.w * self._log_beta * np.asarray(alpha, dtype=float))
            out[:, c] = g * np.prod(1 + k * decay, axis=1)
        return out

    def _factors(self, alpha) -> tuple[np.ndarray, np.ndarray]:
        """Per-direction ``(a_i, b_i)`` with difference factor ``a_i + b_i kappa_i``."""
        alpha = np.asarray(alpha, dtype=float)
        bw = self.params.beta ** self.params.w
        decay = np.exp(-self.params.w * self._log_beta * alpha)
        a = np.where(alpha == 0, 1.0, 0.0)
        b = np.where(alpha == 0, 1.0, (1 - bw) * decay)
        return a, b

    def difference(self, terms, key, sample_ids, seed):
        key = tuple(key)
        if len(key) == self.d and list(terms) == mixed_difference_combination(key):
            g, k = self._draws(np.asarray(sample_ids, dtype=np.uint64), seed, key)
            a, b = self._factors(key)
            y = g * np.prod(a + b * k, axis=1)
            return y, self.work([c for c, _ in terms])
        return super().difference(terms, key, sample_ids, seed)

    def work(self, corners):
        finest = np.max(np.asarray(corners, dtype=float), axis=0)
        return float(np.exp(np.sum(self.params.gamma * self._log_beta * finest)))

    def dof(self, corners):
        finest = np.max(np.asarray(corners, dtype=float), axis=0)
        return float(np.exp(np.sum(self._log_beta * finest)))

    # closed-form moments -------------------------------------------------

    def exact_limit(self) -> float:
        """``E[S]`` of the exact solution."""
        return _uniform_moments(*self.params.g_bounds)[0]

    def exact_mean(self, alpha) -> float:
        a, b = self._factors(alpha)
        gm, _ = _uniform_moments(*self.params.g_bounds)
        km, _ = _uniform_moments(*self.params.kappa_bounds)
        return float(gm * np.prod(a + b * km))

    def exact_variance(self, alpha) -> float:
        a, b = self._factors(alpha)
        gm, g2 = _uniform_moments(*self.params.g_bounds)
        km, k2 = _uniform_moments(*self.params.kappa_bounds)
        second = g2 * np.prod(a * a + 2 * a * b * km + b * b * k2)
        return float(second - self.exact_mean(alpha) ** 2)

    def exact_estimator_mean(self, index_set) -> float:
        """``E[A]`` for the estimator built on ``index_set``."""
        return float(sum(self.exact_mean(a) for a in index_set))


class DeterministicSampler(Sampler):
    """Zero-variance sampler wrapping a deterministic function of the index."""

    def __init__(self, d: int, func: Callable[[tuple], float], gamma: Optional[Sequence[float]] = None):
        self.d = d
        self.func = func
        self.gamma = np.ones(d) if gamma is None else np.asarray(gamma, dtype=float)

    def qoi(self, corners, sample_ids, seed, key):
        row = np.array([self.func(tuple(c)) for c in corners], dtype=float)
        return np.broadcast_to(row, (len(sample_ids), len(corners))).copy()

    def work(self, corners):
        finest = np.max(np.asarray(corners, dtype=float), axis=0)
        return float(np.exp2(np.sum(self.gamma * finest)))
