"""Samplers implementing the :class:`mimc.estimator.Sampler` contract."""
from .synthetic import SyntheticModelParams, SyntheticSampler, DeterministicSampler
from .elliptic import EllipticProblemParams, EllipticSampler

__all__ = [
    "SyntheticModelParams",
    "SyntheticSampler",
    "DeterministicSampler",
    "EllipticProblemParams",
    "EllipticSampler",
]
