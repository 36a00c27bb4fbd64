"""Entropies and KL divergence on probabilities and discretized distributions."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .betafit import ElicitedDistribution, beta_cdf
from .errors import DataError, DomainError, ShapeError, SupportError
from .sampling import ProbabilitySample

DEFAULT_ENTROPY_BINS = 10


def point_entropy(q: float) -> float:
    """Shannon entropy, in bits, of a single Bernoulli probability."""
    if not (0.0 <= q <= 1.0):
        raise DomainError(f"probability must lie in [0, 1], got {q}")
    h = 0.0
    if 0.0 < q:
        h -= q * math.log2(q)
    if q < 1.0:
        h -= (1.0 - q) * math.log2(1.0 - q)
    return h


def _sample_values(sample) -> np.ndarray:
    values = np.asarray(getattr(sample, "values", sample), dtype=np.float64)
    if values.ndim != 1 or values.size == 0:
        raise ShapeError(f"need a 1-d sample, got shape {values.shape}")
    return values


def distribution_entropy(sample, bins: int = DEFAULT_ENTROPY_BINS) -> float:
    """Normalized entropy of the sample's histogram on [0, 1].

    Counts go into ``bins`` equal-width bins; the entropy of the bin
    frequencies is divided by ln(bins), so the result lies in [0, 1]
    (0 when one bin holds everything, 1 when all bins are equally full).
    """
    if bins < 2:
        raise DomainError(f"need at least 2 bins, got {bins}")
    values = _sample_values(sample)
    counts, _ = np.histogram(values, bins=bins, range=(0.0, 1.0))
    n = counts.sum()
    nz = counts[counts > 0]
    # counts form of the histogram entropy: ln n - sum (c/n) ln c; exact 1.0
    # when every bin holds one value, exact 0.0 when one bin holds them all
    h = math.log(n) - float((nz / n * np.log(nz)).sum())
    return min(1.0, max(0.0, h / math.log(bins)))


@dataclass(frozen=True)
class DiscreteDistribution:
    """Probability masses on the equal-width bins of [0, 1]."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)
        if p.ndim != 1 or p.size < 2:
            raise ShapeError(f"need at least 2 bins, got shape {p.shape}")
        if np.any(p < 0.0):
            raise DomainError("bin masses must be nonnegative")
        if abs(float(p.sum()) - 1.0) > 1e-9:
            raise DomainError(f"bin masses must sum to 1, got {float(p.sum())!r}")

    @property
    def bins(self) -> int:
        return int(self.probs.size)


def discretize(dist, bins: int = 20) -> DiscreteDistribution:
    """Project a fit or sample onto ``bins`` equal-width bins of [0, 1].

    A proper Beta fit uses exact CDF differences at the bin edges. A raw
    sample, or a degenerate fit (whose alpha/beta are a spike surrogate,
    not a description of the data), uses the sample histogram instead.
    """
    if bins < 2:
        raise DomainError(f"need at least 2 bins, got {bins}")
    edges = np.linspace(0.0, 1.0, bins + 1)
    if isinstance(dist, ElicitedDistribution):
        if not dist.degenerate:
            return DiscreteDistribution(np.diff(beta_cdf(dist.alpha, dist.beta, edges)))
        if dist.sample is None:
            raise DataError("degenerate fit without its sample cannot be discretized")
        dist = dist.sample
    if isinstance(dist, ProbabilitySample):
        values = dist.values
    else:
        values = _sample_values(dist)
    counts, _ = np.histogram(values, bins=bins, range=(0.0, 1.0))
    return DiscreteDistribution(counts / counts.sum())


def kl_divergence(q: DiscreteDistribution, p: DiscreteDistribution) -> float:
    """KL(Q || P) = sum Q ln(Q/P) in nats, on a shared bin grid."""
    if q.bins != p.bins:
        raise ShapeError(f"bin grids differ: {q.bins} vs {p.bins}")
    qp, pp = q.probs, p.probs
    support = qp > 0.0
    if np.any(pp[support] == 0.0):
        raise SupportError("Q puts mass where P has none; KL is infinite")
    return float(np.sum(qp[support] * np.log(qp[support] / pp[support])))
