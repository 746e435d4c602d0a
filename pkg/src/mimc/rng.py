"""Counter-based uniform draws keyed by (seed, index, sample id, draw).

Each draw is a pure function of its coordinates, so the random input of a
sample never depends on which thread produced it or on how many samples were
requested before.  The mixer is the splitmix64 finalizer applied to a chained
hash of the coordinates.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def stream_key(seed: int, key: Sequence[int]) -> np.uint64:
    """Fold the master seed and an index tuple into one 64-bit word."""
    with np.errstate(over="ignore"):
        h = _mix(np.uint64(int(seed) & _MASK) + _GOLDEN)
        h = _mix(h ^ np.uint64(len(key)))
        for k in key:
            h = _mix((h + _GOLDEN) ^ np.uint64(int(k) & _MASK))
    return h


def uniforms(seed: int, key: Sequence[int], sample_ids, n_draws: int) -> np.ndarray:
    """Array of shape ``(len(sample_ids), n_draws)`` of uniforms in ``[0, 1)``."""
    ids = np.asarray(sample_ids, dtype=np.uint64).reshape(-1)
    h = stream_key(seed, key)
    with np.errstate(over="ignore"):
        base = _mix(_mix(ids * _GOLDEN + h))
        j = np.arange(1, n_draws + 1, dtype=np.uint64) * _GOLDEN
        bits = _mix(base[:, None] ^ j[None, :])
    return (bits >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))
