"""Summary statistics with exactly rounded sums.

``math.fsum`` is correctly rounded, so every sum here is independent of the
order in which terms arrive. That is what makes summaries reproducible across
worker counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np


def mean(xs: np.ndarray) -> float:
    return math.fsum(xs) / len(xs)


def variance(xs: np.ndarray) -> float:
    """Unbiased (n - 1) sample variance, two-pass; 0.0 when n == 1."""
    n = len(xs)
    if n < 2:
        return 0.0
    d = np.asarray(xs, dtype=np.float64) - mean(xs)
    return math.fsum(d * d) / (n - 1)


def _unit_scale(a: np.ndarray) -> np.ndarray:
    peak = float(np.max(np.abs(a)))
    return a / peak if peak > 0.0 else a


def pearson(xs: Sequence[float], ys: Sequence[float]) -> Optional[float]:
    """Sample Pearson correlation, or ``None`` when either input is constant."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("pearson needs two 1-d sequences of equal length")
    if len(x) < 2:
        raise ValueError("pearson needs at least two points")
    # r is scale-invariant; unit-scaling keeps squares and products in range
    x = _unit_scale(x)
    y = _unit_scale(y)
    dx = x - mean(x)
    dy = y - mean(y)
    sxx = math.fsum(dx * dx)
    syy = math.fsum(dy * dy)
    if sxx == 0.0 or syy == 0.0:
        return None
    r = math.fsum(dx * dy) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


@dataclass
class Moments:
    """Mergeable running mean/variance (Chan et al. pairwise update).

    Used where data arrives in chunks that are never held together; results
    agree with the two-pass functions above to ~1e-15 relative.
    """

    n: int = 0
    mean: float = 0.0
    m2: float = 0.0

    @classmethod
    def of(cls, xs: np.ndarray) -> "Moments":
        xs = np.asarray(xs, dtype=np.float64)
        if len(xs) == 0:
            return cls()
        mu = mean(xs)
        d = xs - mu
        return cls(len(xs), mu, math.fsum(d * d))

    def merge(self, other: "Moments") -> "Moments":
        if other.n == 0:
            return Moments(self.n, self.mean, self.m2)
        if self.n == 0:
            return Moments(other.n, other.mean, other.m2)
        n = self.n + other.n
        delta = other.mean - self.mean
        mu = self.mean + delta * other.n / n
        m2 = self.m2 + other.m2 + delta * delta * self.n * other.n / n
        return Moments(n, mu, m2)

    @property
    def variance(self) -> float:
        return self.m2 / (self.n - 1) if self.n > 1 else 0.0
