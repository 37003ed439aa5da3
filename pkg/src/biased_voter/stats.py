"""Order-insensitive moment accumulation for replica-parallel estimators.

Batches contribute (count, mean, sum of squared deviations) per grid time
and are merged with the pairwise update, which avoids the catastrophic
cancellation of naive sum-of-squares accumulation: estimators whose path
weight is deterministic really do report a vanishing standard error.
Merging in a fixed batch order keeps results bitwise reproducible for any
worker count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Moments"]


@dataclass
class Moments:
    """Per-time running moments: count, mean, and sum of squared deviations."""

    n: int
    mean: np.ndarray
    m2: np.ndarray

    @classmethod
    def of(cls, values: np.ndarray) -> "Moments":
        """Moments of a (replicas, n_times) batch of samples."""
        values = np.atleast_2d(np.asarray(values, dtype=np.float64))
        mean = values.mean(axis=0)
        m2 = ((values - mean) ** 2).sum(axis=0)
        return cls(n=values.shape[0], mean=mean, m2=m2)

    @classmethod
    def zeros(cls, n_times: int) -> "Moments":
        return cls(n=0, mean=np.zeros(n_times), m2=np.zeros(n_times))

    def merge(self, other: "Moments") -> "Moments":
        if self.n == 0:
            return other
        if other.n == 0:
            return self
        n = self.n + other.n
        delta = other.mean - self.mean
        mean = self.mean + delta * (other.n / n)
        m2 = self.m2 + other.m2 + delta ** 2 * (self.n * other.n / n)
        return Moments(n=n, mean=mean, m2=m2)

    @property
    def variance(self) -> np.ndarray:
        if self.n < 2:
            return np.full_like(self.mean, np.nan)
        return self.m2 / (self.n - 1)

    @property
    def stderr(self) -> np.ndarray:
        return np.sqrt(self.variance / self.n)
