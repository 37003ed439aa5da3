"""Site-independent random bias laws and the constants they induce.

The bias of a site is a nonnegative number drawn i.i.d. from an atomic law.
All disorder averages used by the estimators reduce to two ingredients of the
law: the decay constants ``nu1`` (minus the log of the mean of 1/(1+bias))
and ``nu2`` (minus the log of the mass at bias zero), and the Laplace
transform of a single atom evaluated at a local time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DisorderLaw",
    "BiasField",
    "LazyBiasField",
    "nu1",
    "nu2",
    "laplace",
    "sample_field",
    "bernoulli_law",
    "deterministic_law",
]

_PROB_TOL = 1e-12


@dataclass(frozen=True)
class DisorderLaw:
    """Finitely supported law of the per-site bias: pairs (bias, probability)."""

    atoms: tuple[tuple[float, float], ...]

    def __post_init__(self):
        atoms = tuple((float(b), float(p)) for b, p in self.atoms)
        for b, p in atoms:
            if not (b >= 0.0 and math.isfinite(b)):
                raise ValueError(f"bias values must be finite and >= 0, got {b}")
            if not (0.0 <= p <= 1.0):
                raise ValueError(f"atom probabilities must lie in [0, 1], got {p}")
        total = sum(p for _, p in atoms)
        if abs(total - 1.0) > _PROB_TOL:
            raise ValueError(f"atom probabilities sum to {total!r}, not 1")
        object.__setattr__(self, "atoms", atoms)

    @property
    def bias_values(self) -> np.ndarray:
        return np.array([b for b, _ in self.atoms])

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([p for _, p in self.atoms])

    @property
    def mean_bias(self) -> float:
        return float(sum(b * p for b, p in self.atoms))

    @property
    def mass_at_zero(self) -> float:
        return float(sum(p for b, p in self.atoms if b == 0.0))

    @property
    def max_bias(self) -> float:
        return float(max(b for b, _ in self.atoms))


def bernoulli_law(q: float, b: float) -> DisorderLaw:
    """Bias 0 with probability q, bias b with probability 1 - q."""
    return DisorderLaw(atoms=((0.0, q), (b, 1.0 - q)))


def deterministic_law(b: float) -> DisorderLaw:
    return DisorderLaw(atoms=((b, 1.0),))


def nu1(law: DisorderLaw) -> float:
    """-log of the mean of 1/(1+bias); rate constant of the upper bound.

    Nonnegative, zero exactly when all mass sits at bias 0.
    """
    return -math.log(sum(p / (1.0 + b) for b, p in law.atoms))


def nu2(law: DisorderLaw) -> float:
    """-log of the mass at bias 0; rate constant of the lower bound.

    Returns ``math.inf`` when the law has no mass at 0. Callers relying on
    the lower bound must check for the infinite sentinel.
    """
    mass0 = law.mass_at_zero
    if mass0 == 0.0:
        return math.inf
    return -math.log(mass0)


def laplace(law: DisorderLaw, u):
    """Laplace transform E[exp(-bias * u)] of a single atom; u may be an array.

    Decreasing in u, equal to 1 at u = 0, with limit mass_at_zero as u grows.
    """
    u_arr = np.asarray(u, dtype=np.float64)
    if np.any(u_arr < 0):
        raise ValueError("laplace transform argument must be >= 0")
    out = np.zeros_like(u_arr, dtype=np.float64)
    for b, p in law.atoms:
        out = out + p * np.exp(-b * u_arr)
    if np.isscalar(u) or u_arr.ndim == 0:
        return float(out)
    return out


def _draw_values(law: DisorderLaw, n: int, rng: np.random.Generator) -> np.ndarray:
    cum = np.cumsum(law.probabilities)
    cum[-1] = 1.0
    idx = np.searchsorted(cum, rng.random(n), side="right")
    return law.bias_values[idx]


class BiasField:
    """One realization of the bias: a nonnegative value per site.

    Sites are tuples of ints. ``seed_info`` records how the field was drawn
    so a run can be reproduced.
    """

    def __init__(self, values: dict[tuple[int, ...], float], seed_info=None):
        self.values = dict(values)
        self.seed_info = seed_info

    @property
    def sites(self):
        return self.values.keys()

    def value(self, site: tuple[int, ...]) -> float:
        return self.values[site]

    @classmethod
    def constant(cls, b: float, sites) -> "BiasField":
        return cls({tuple(s): float(b) for s in sites}, seed_info="constant")


class LazyBiasField(BiasField):
    """Bias field on all of Z^d, materialized site by site on first access.

    The value at a site depends only on (disorder_seed, site), so replicas
    sharing a disorder seed see the same field regardless of query order.
    """

    def __init__(self, law: DisorderLaw, disorder_seed: int):
        super().__init__({}, seed_info=("lazy", disorder_seed))
        self.law = law
        self.disorder_seed = int(disorder_seed)

    def value(self, site: tuple[int, ...]) -> float:
        site = tuple(int(c) for c in site)
        cached = self.values.get(site)
        if cached is not None:
            return cached
        # zig-zag map coordinates to nonnegative ints for SeedSequence entropy
        coded = [2 * c if c >= 0 else -2 * c - 1 for c in site]
        rng = np.random.default_rng(
            np.random.SeedSequence([self.disorder_seed, len(coded), *coded]))
        val = float(_draw_values(self.law, 1, rng)[0])
        self.values[site] = val
        return val


def sample_field(law: DisorderLaw, sites, rng: np.random.Generator,
                 seed_info=None) -> BiasField:
    """Draw an i.i.d. bias value for each listed site."""
    site_list = [tuple(int(c) for c in s) for s in sites]
    vals = _draw_values(law, len(site_list), rng)
    return BiasField(dict(zip(site_list, vals.tolist())), seed_info=seed_info)
