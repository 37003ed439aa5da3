"""Visited-site statistics and the stretched-exponential rate constant.

The asymptotic decay rate of E^0 exp(-nu |R_t|) in units of t^(d/(d+alpha))
is c(nu) = (d+alpha) * ((lam/d)^d (nu/alpha)^alpha)^(1/(d+alpha)), where lam
is the smallest Dirichlet eigenvalue of the negated walk generator over
unit-volume domains. For the isotropic nearest-neighbor kernels the
generator is Laplacian/(2d) and the optimal domain is the unit-volume ball,
so lam has a closed form in d = 1..3.

Plain Monte Carlo for E exp(-nu |R_t|) is reliable only at moderate times
(the mean is carried by rare small-range paths); the exact 1-d solver is
the instrument for large t.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import jn_zeros

from .kernel import Kernel
from .walks import walk_curve

__all__ = [
    "DVConstant",
    "RangeCurve",
    "lambda_nn",
    "dv_constant",
    "mc_range_functional",
    "effective_exponent",
]


def lambda_nn(d: int) -> float:
    """Unit-volume Dirichlet principal eigenvalue of -(Laplacian)/(2d).

    The minimizing domain is the unit-volume ball, so the value is the
    ball eigenvalue of the negated Laplacian divided by 2d:
    d=1: pi^2 / 2;  d=2: pi * j01^2 / 4;  d=3: pi^2 (4 pi / 3)^(2/3) / 6.
    """
    if d == 1:
        return math.pi ** 2 / 2.0
    if d == 2:
        j01 = float(jn_zeros(0, 1)[0])
        return math.pi * j01 ** 2 / 4.0
    if d == 3:
        return math.pi ** 2 * (4.0 * math.pi / 3.0) ** (2.0 / 3.0) / 6.0
    raise ValueError("closed-form eigenvalue available only for d in 1..3 "
                     "nearest-neighbor kernels")


def dv_constant(d: int, alpha: float, lam: float, nu: float) -> float:
    """Asymptotic rate constant c(nu); increasing in nu with c(0) = 0."""
    if lam <= 0:
        raise ValueError("the eigenvalue must be positive")
    if nu < 0:
        raise ValueError("nu must be nonnegative")
    return (d + alpha) * ((lam / d) ** d * (nu / alpha) ** alpha) ** (1.0 / (d + alpha))


@dataclass(frozen=True)
class DVConstant:
    """Rate-constant bundle for one kernel class: dimension, index, eigenvalue."""

    d: int
    alpha: float
    lam: float

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("the eigenvalue must be positive")

    @classmethod
    def nearest_neighbor(cls, d: int) -> "DVConstant":
        return cls(d=d, alpha=2.0, lam=lambda_nn(d))

    def of_nu(self, nu: float) -> float:
        return dv_constant(self.d, self.alpha, self.lam, nu)

    @property
    def exponent(self) -> float:
        """Predicted stretch exponent d/(d+alpha)."""
        return self.d / (self.d + self.alpha)


@dataclass
class RangeCurve:
    t_grid: np.ndarray
    mean: np.ndarray        # E exp(-nu |R_t|)
    stderr: np.ndarray
    mean_range: np.ndarray  # E |R_t|
    replicas: int
    max_abs_position: int


def mc_range_functional(kernel: Kernel, nu: float, t_grid, replicas: int,
                        seed: int, threads: int = 1) -> RangeCurve:
    """Plain Monte Carlo of exp(-nu |R_t|) along single-walk paths.

    Unbiased at any t, but the relative error grows quickly with t; keep
    the grid at moderate times and use the exact 1-d solver beyond.
    """
    if nu < 0:
        raise ValueError("nu must be nonnegative")
    stats = walk_curve(kernel, t_grid, replicas, seed, exponents=(nu,),
                       threads=threads)
    return RangeCurve(
        t_grid=stats.t_grid,
        mean=stats.exp_means[nu],
        stderr=stats.exp_stderrs[nu],
        mean_range=stats.range_mean,
        replicas=replicas,
        max_abs_position=stats.max_abs_position)


def effective_exponent(series) -> list[tuple[float, float]]:
    """Local slope of log(-log F) against log t, by centered differences.

    ``series`` is a sequence of (t, F(t)) pairs with F strictly inside
    (0, 1) and t positive increasing; the endpoints carry no slope. For a
    pure stretched exponential exp(-c t^gamma) every slope equals gamma.
    """
    pts = [(float(t), float(fv)) for t, fv in series]
    if any(not (0.0 < fv < 1.0) for _, fv in pts):
        raise ValueError("F values must lie strictly inside (0, 1)")
    if any(t <= 0.0 for t, _ in pts):
        raise ValueError("times must be positive")
    x = np.log([t for t, _ in pts])
    y = np.log(-np.log([fv for _, fv in pts]))
    out = []
    for i in range(1, len(pts) - 1):
        slope = (y[i + 1] - y[i - 1]) / (x[i + 1] - x[i - 1])
        out.append((pts[i][0], float(slope)))
    return out
