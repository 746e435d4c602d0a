"""The multi-index Monte Carlo estimator and its adaptive driver.

The estimator is ``A = sum_{alpha in I} mean_m Y_alpha(omega_m)`` where each
``Y_alpha`` is one realization of the mixed difference of the quantity of
interest.  :func:`run_mimc` grows ``I`` step by step, allocates samples by
the variance/work optimum and stops once the boundary bias estimate fits in
its share of the tolerance.  A sequence of larger tolerances is solved first
so that variance estimates are already stable at the target tolerance.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
import logging
import math
import time
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .index_sets import (
    IndexSet,
    distinct_profit_levels,
    full_tensor_set,
    outer_boundary,
    profit_level_set,
    td_set,
)
from .rate_model import RateParameters, c_epsilon

log = logging.getLogger(__name__)

VARIANCE_FLOOR = 1e-30

__all__ = [
    "Sampler",
    "SamplerError",
    "IndexRecord",
    "RunConfig",
    "RunResult",
    "mixed_difference_combination",
    "c_epsilon",
    "optimal_sample_counts",
    "allocate_samples",
    "estimate_bias",
    "run_mimc",
    "run_mlmc",
]


def mixed_difference_combination(alpha: Sequence[int]) -> list[tuple[tuple, int]]:
    """Corner indices and signs of the tensorized first-order difference at ``alpha``."""
    alpha = tuple(int(a) for a in alpha)
    choices = [(0, 1) if a > 0 else (0,) for a in alpha]
    terms = []
    for j in itertools.product(*choices):
        corner = tuple(a - ji for a, ji in zip(alpha, j))
        terms.append((corner, -1 if sum(j) % 2 else 1))
    return terms


def level_difference_combination(level: int, d: int) -> list[tuple[tuple, int]]:
    """Terms of the single-level difference used by MLMC on the diagonal."""
    fine = (int(level),) * d
    if level == 0:
        return [(fine, 1)]
    return [(fine, 1), ((int(level) - 1,) * d, -1)]


class SamplerError(RuntimeError):
    def __init__(self, key, sample_ids, cause):
        ids = np.asarray(sample_ids)
        super().__init__(
            f"sampler failed at index {tuple(key)} for samples {int(ids.min())}..{int(ids.max())}: {cause}"
        )
        self.key = tuple(key)
        self.sample_ids = ids


class Sampler(ABC):
    """Produces realizations of differences of the quantity of interest.

    Subclasses implement :meth:`qoi`, which evaluates the quantity of interest
    at several discretization indices for a batch of samples.  Every corner in
    one call must use the same random input, derived from ``(seed, key,
    sample_id)``.  Implementations must be safe to call from several threads.
    """

    d: int

    @abstractmethod
    def qoi(self, corners: Sequence[tuple], sample_ids: np.ndarray, seed: int, key: tuple) -> np.ndarray:
        """Array ``(len(sample_ids), len(corners))`` of QoI values."""

    @abstractmethod
    def work(self, corners: Sequence[tuple]) -> float:
        """Abstract work of one sample of a difference over ``corners``."""

    def dof(self, corners: Sequence[tuple]) -> float:
        """Largest per-sample degrees of freedom among ``corners``."""
        return 1.0

    def difference(self, terms, key, sample_ids, seed) -> tuple[np.ndarray, float]:
        corners = [c for c, _ in terms]
        signs = np.array([s for _, s in terms], dtype=float)
        values = self.qoi(corners, np.asarray(sample_ids, dtype=np.uint64), seed, tuple(key))
        y = values[:, 0] * signs[0]
        for c in range(1, len(terms)):
            y = y + values[:, c] * signs[c]
        return y, self.work(corners)

    def evaluate_batch(self, alpha, sample_ids, seed) -> tuple[np.ndarray, float]:
        """Mixed differences at ``alpha`` for several sample ids."""
        return self.difference(mixed_difference_combination(alpha), alpha, sample_ids, seed)

    def evaluate(self, alpha, sample_id: int, seed: int) -> tuple[float, float]:
        y, w = self.evaluate_batch(alpha, np.array([sample_id], dtype=np.uint64), seed)
        return float(y[0]), float(w)


# ---------------------------------------------------------------------------
# per-index accumulation


@dataclass
class IndexRecord:
    """Sample accumulators of one index.

    ``m2`` is the centered sum of squares, merged chunk by chunk; it gives the
    same variance as ``sum_y2`` but without cancellation when the mean is
    large compared with the spread.
    """

    key: tuple
    M: int = 0
    sum_y: float = 0.0
    sum_y2: float = 0.0
    m2: float = 0.0
    total_work: float = 0.0
    work_per_sample: float = 0.0
    dof: float = 0.0

    @property
    def mean(self) -> float:
        return self.sum_y / self.M if self.M else float("nan")

    @property
    def variance(self) -> float:
        if self.M < 2:
            return float("nan")
        v = max(self.m2 / (self.M - 1), 0.0)
        return 0.0 if v < VARIANCE_FLOOR else v

    @property
    def mean_work(self) -> float:
        return self.total_work / self.M if self.M else self.work_per_sample

    def merge(self, n: int, s: float, s2: float, m2: float, work: float) -> None:
        if n == 0:
            return
        if self.M == 0:
            self.m2 = m2
        else:
            delta = s / n - self.sum_y / self.M
            self.m2 += m2 + delta * delta * self.M * n / (self.M + n)
        self.M += n
        self.sum_y += s
        self.sum_y2 += s2
        self.total_work += work

    def to_dict(self) -> dict:
        return {
            "alpha": list(self.key),
            "M": self.M,
            "sum_y": self.sum_y,
            "sum_y2": self.sum_y2,
            "mean": self.mean,
            "variance": self.variance,
            "work_per_sample": self.work_per_sample,
            "total_work": self.total_work,
            "dof": self.dof,
        }


# ---------------------------------------------------------------------------
# allocation and bias


def _clean_variances(V) -> np.ndarray:
    V = np.asarray(V, dtype=float).copy()
    if np.any(V < 0) or np.any(~np.isfinite(V)):
        raise ValueError("variances must be finite and non-negative")
    V[V < VARIANCE_FLOOR] = 0.0
    return V


def optimal_sample_counts(V, W, tol_s: float) -> np.ndarray:
    """Real-valued minimizer of ``sum M W`` subject to ``sum V/M = tol_s^2``."""
    V = _clean_variances(V)
    W = np.asarray(W, dtype=float)
    if not tol_s > 0:
        raise ValueError("statistical tolerance must be positive")
    if np.any(W <= 0):
        raise ValueError("work per sample must be positive")
    return np.sum(np.sqrt(V * W)) * np.sqrt(V / W) / tol_s**2


def allocate_samples(V, W, tol_s: float, m0: int = 5) -> np.ndarray:
    """Integer sample counts ``max(m0, ceil(M*))`` meeting the variance budget.

    If rounding leaves ``sum V/M`` above ``tol_s^2`` (it can only do so by
    floating point error), the index with the largest ``V/M`` gets one more
    sample until the budget holds.
    """
    V = _clean_variances(V)
    M = np.full(V.shape, int(m0), dtype=np.int64)
    if not np.any(V > 0):
        return M
    m_star = optimal_sample_counts(V, W, tol_s)
    M = np.maximum(M, np.ceil(m_star).astype(np.int64))
    target = tol_s**2
    while np.sum(V / M) > target:
        M[np.argmax(V / M)] += 1
    return M


def estimate_bias(records: dict, boundary: IndexSet) -> float:
    """``|sum of sample means over the boundary|``."""
    total = 0.0
    for alpha in boundary:
        rec = records.get(tuple(alpha))
        if rec is None or rec.M == 0:
            raise ValueError(f"boundary index {alpha} has no samples")
        total += rec.mean
    return abs(total)


# ---------------------------------------------------------------------------
# index-set policies


class SetPolicy(ABC):
    """Sequence of nested index sets ``I_1 within I_2 within ...``."""

    name: str
    key_dim: int

    @abstractmethod
    def index_set(self, k: int) -> IndexSet: ...

    def terms(self, key: tuple, d: int):
        return mixed_difference_combination(key)


class TotalDegreePolicy(SetPolicy):
    """``I_k = {delta . alpha <= k min(delta)}``; uniform weights give ``|alpha| <= k``."""

    name = "mimc-td"

    def __init__(self, delta: Sequence[float]):
        self.delta = np.asarray(delta, dtype=float)
        self.key_dim = self.delta.size
        self.step = float(self.delta.min())

    def index_set(self, k: int) -> IndexSet:
        return td_set(self.delta, k * self.step)


class FullTensorPolicy(SetPolicy):
    """Box levels raised one direction at a time in order 1, 2, ..., d."""

    name = "mimc-ft"

    def __init__(self, d: int):
        self.key_dim = d

    def index_set(self, k: int) -> IndexSet:
        d = self.key_dim
        L = [k // d + (1 if i < k % d else 0) for i in range(d)]
        return full_tensor_set(L)


class ProfitPolicy(SetPolicy):
    """``I_k`` is the super-level set of the k-th largest distinct profit."""

    name = "mimc-profit"

    def __init__(self, rates: RateParameters):
        self.rates = rates
        self.key_dim = rates.d
        self._levels: list[float] = []

    def index_set(self, k: int) -> IndexSet:
        # k = 1 admits the second distinct profit value, matching I_1 of the
        # other policies which already go one step beyond the origin
        if len(self._levels) < k + 1:
            self._levels = distinct_profit_levels(self.rates, max(k + 1, 2 * len(self._levels)))
        return profit_level_set(self._levels[k], self.rates)


class LevelPolicy(SetPolicy):
    """MLMC: keys are scalar levels, each refining all directions together."""

    name = "mlmc"
    key_dim = 1

    def index_set(self, k: int) -> IndexSet:
        return full_tensor_set([k])

    def terms(self, key: tuple, d: int):
        return level_difference_combination(key[0], d)


# ---------------------------------------------------------------------------
# configuration and result


@dataclass
class RunConfig:
    tol: float
    eps: float = 0.05
    theta: float = 0.5
    m0: int = 5
    policy: str = "mimc-td"
    delta: Optional[Sequence[float]] = None
    r: float = 2.0
    stages: int = 4
    seed: int = 0
    workers: int = 1
    max_iter: int = 60
    chunk_size: int = 256
    max_realloc: int = 50

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tolerance must be positive")
        if not 0 < self.eps < 1:
            raise ValueError("eps must lie in (0, 1)")
        if not 0 < self.theta < 1:
            raise ValueError("theta must lie in (0, 1)")
        if self.m0 < 2:
            raise ValueError("m0 must be at least 2 so that variances exist")
        if not self.r > 1 or self.stages < 0:
            raise ValueError("continuation needs r > 1 and stages >= 0")
        if self.workers < 1 or self.chunk_size < 1 or self.max_iter < 1:
            raise ValueError("workers, chunk_size and max_iter must be positive")

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        if out["delta"] is not None:
            out["delta"] = [float(x) for x in out["delta"]]
        return out


@dataclass
class RunResult:
    estimate: float
    tol: float
    bias: float
    stat_error: float
    variance: float
    records: dict
    index_set: IndexSet
    total_work: float
    wall_time: float
    history: list = field(default_factory=list)
    converged: bool = True
    max_dof: float = 0.0
    method: str = ""
    config: dict = field(default_factory=dict)

    @property
    def table(self) -> list[IndexRecord]:
        return [self.records[a] for a in self.index_set]

    def to_dict(self, include_timing: bool = True) -> dict:
        out = {
            "method": self.method,
            "estimate": self.estimate,
            "tol": self.tol,
            "bias": self.bias,
            "stat_error": self.stat_error,
            "variance": self.variance,
            "total_work": self.total_work,
            "max_dof": self.max_dof,
            "converged": self.converged,
            "index_set": [list(a) for a in self.index_set],
            "records": [r.to_dict() for r in self.table],
            "history": self.history,
            "config": self.config,
        }
        if include_timing:
            out["wall_time"] = self.wall_time
        return out

    def to_json(self, include_timing: bool = True) -> str:
        return json.dumps(self.to_dict(include_timing), indent=2, default=_json_default)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        k = self.index_set.d
        writer.writerow([f"alpha_{i + 1}" for i in range(k)] + ["M", "mean", "variance", "work"])
        for rec in self.table:
            writer.writerow(
                list(rec.key)
                + [rec.M]
                + [f"{x:.17g}" for x in (rec.mean, rec.variance, rec.work_per_sample)]
            )
        return buf.getvalue()


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(type(obj))


# ---------------------------------------------------------------------------
# driver


class _Engine:
    """Sampling and bookkeeping shared by all stages of one run."""

    def __init__(self, config: RunConfig, sampler: Sampler, policy: SetPolicy, pool):
        self.config = config
        self.sampler = sampler
        self.policy = policy
        self.pool = pool
        self.records: dict[tuple, IndexRecord] = {}

    def _record(self, key: tuple) -> IndexRecord:
        rec = self.records.get(key)
        if rec is None:
            terms = self.policy.terms(key, self.sampler.d)
            corners = [c for c, _ in terms]
            rec = IndexRecord(
                key=key,
                work_per_sample=float(self.sampler.work(corners)),
                dof=float(self.sampler.dof(corners)),
            )
            self.records[key] = rec
        return rec

    def _chunk(self, key: tuple, ids: np.ndarray):
        terms = self.policy.terms(key, self.sampler.d)
        try:
            y, w = self.sampler.difference(terms, key, ids, self.config.seed)
        except Exception as exc:  # report which samples failed
            raise SamplerError(key, ids, exc) from exc
        y = np.asarray(y, dtype=float)
        if y.shape != ids.shape or not np.all(np.isfinite(y)):
            raise SamplerError(key, ids, "non-finite or misshaped output")
        s = float(np.sum(y))
        mean = s / y.size
        return y.size, s, float(np.sum(y * y)), float(np.sum((y - mean) ** 2)), float(np.sum(np.broadcast_to(w, y.shape)))

    def sample_to(self, targets: dict[tuple, int]) -> None:
        """Bring every ``key`` up to ``targets[key]`` samples."""
        jobs = []
        cs = self.config.chunk_size
        for key in sorted(targets):
            rec = self._record(key)
            start, stop = rec.M, int(targets[key])
            for lo in range(start, stop, cs):
                jobs.append((key, np.arange(lo, min(lo + cs, stop), dtype=np.uint64)))
        if not jobs:
            return
        if self.pool is None:
            results = [self._chunk(k, ids) for k, ids in jobs]
        else:
            results = list(self.pool.map(lambda job: self._chunk(*job), jobs))
        for (key, _), res in zip(jobs, results):
            self.records[key].merge(*res)

    def allocate(self, index_set: IndexSet, tol_s: float) -> float:
        """Steps 2-4 of one iteration; returns ``sum V/M`` after sampling."""
        cfg = self.config
        keys = list(index_set)
        self.sample_to({k: max(cfg.m0, self._record(k).M) for k in keys})
        for _ in range(cfg.max_realloc):
            V = np.array([self.records[k].variance for k in keys])
            W = np.array([self.records[k].mean_work for k in keys])
            M = allocate_samples(V, W, tol_s, cfg.m0)
            assert np.sum(_clean_variances(V) / M) <= tol_s**2
            current = np.array([self.records[k].M for k in keys])
            need = {k: int(m) for k, m, c in zip(keys, M, current) if m > c}
            if not need:
                break
            self.sample_to(need)
        else:
            log.warning("sample allocation did not settle after %d rounds", cfg.max_realloc)
        return float(sum(self.records[k].variance / self.records[k].M for k in keys))


def _make_policy(config: RunConfig, sampler: Sampler, rates: Optional[RateParameters]) -> SetPolicy:
    d = sampler.d
    if config.policy == "mimc-td":
        delta = config.delta if config.delta is not None else np.full(d, 1.0 / d)
        return TotalDegreePolicy(delta)
    if config.policy == "mimc-ft":
        return FullTensorPolicy(d)
    if config.policy == "mimc-profit":
        if rates is None:
            raise ValueError("profit policy needs rate parameters")
        return ProfitPolicy(rates)
    if config.policy == "mlmc":
        return LevelPolicy()
    raise ValueError(f"unknown policy {config.policy!r}")


def run_mimc(
    config: RunConfig,
    sampler: Sampler,
    policy: Optional[SetPolicy] = None,
    rates: Optional[RateParameters] = None,
) -> RunResult:
    """Adaptive estimator with continuation over ``TOL_j = r^(J-j) TOL``."""
    t0 = time.perf_counter()
    if policy is None:
        policy = _make_policy(config, sampler, rates)
    c_eps = c_epsilon(config.eps)
    history = []
    converged = True
    pool = ThreadPoolExecutor(config.workers) if config.workers > 1 else None
    try:
        engine = _Engine(config, sampler, policy, pool)
        k = 1
        index_set = policy.index_set(k)
        bias = stat_var = float("nan")
        for j in range(config.stages + 1):
            tol_j = config.r ** (config.stages - j) * config.tol
            tol_s = config.theta * tol_j / c_eps
            while True:
                index_set = policy.index_set(k)
                stat_var = engine.allocate(index_set, tol_s)
                bias = estimate_bias(engine.records, outer_boundary(index_set))
                estimate = math.fsum(engine.records[a].mean for a in index_set)
                history.append({
                    "stage": j, "tol": tol_j, "k": k, "size": len(index_set),
                    "bias": bias, "stat_error": c_eps * math.sqrt(stat_var),
                    "estimate": estimate,
                })
                log.debug("stage %d k=%d |I|=%d bias=%.3g", j, k, len(index_set), bias)
                if bias <= (1 - config.theta) * tol_j:
                    break
                if k >= config.max_iter:
                    converged = False
                    break
                k += 1
            if not converged:
                break
    finally:
        if pool is not None:
            pool.shutdown()

    records = {a: engine.records[a] for a in index_set}
    estimate = math.fsum(records[a].mean for a in index_set)
    total_work = math.fsum(r.total_work for r in engine.records.values())
    return RunResult(
        estimate=estimate,
        tol=config.tol,
        bias=bias,
        stat_error=c_eps * math.sqrt(stat_var),
        variance=stat_var,
        records=records,
        index_set=index_set,
        total_work=total_work,
        wall_time=time.perf_counter() - t0,
        history=history,
        converged=converged,
        max_dof=max(r.dof for r in records.values()),
        method=policy.name,
        config=config.to_dict(),
    )


def run_mlmc(config: RunConfig, sampler: Sampler) -> RunResult:
    """MLMC on the diagonal ``l -> (l, ..., l)`` with first differences in ``l``."""
    return run_mimc(config, sampler, policy=LevelPolicy())
