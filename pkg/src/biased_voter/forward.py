"""Event-driven simulation of the biased voter dynamics on a finite torus.

Every site carries a rate-1 resampling clock (copy the opinion of a partner
drawn from the folded kernel) and a rate-beta(x) reset clock (opinion set to
0). The superposition of all clocks is a Poisson stream whose rate does not
depend on the configuration, so events can be drawn directly in time order
and one stream can drive several coupled copies. This realizes the exact
flip rates: a 1-site flips at rate beta(x) plus the kernel mass on 0-valued
partners, a 0-site at the kernel mass on 1-valued partners.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .disorder import BiasField
from .kernel import TorusKernel
from .localfn import LocalFunction
from .stats import Moments

__all__ = [
    "Configuration",
    "Event",
    "EventLog",
    "ForwardSimulation",
    "CoupledForwardSimulation",
    "all_ones",
    "all_zeros",
    "evolve",
    "coupled_evolve",
    "forward_relaxation",
    "first_flip_site",
]

RESAMPLE = "resample"
KILL = "kill"


@dataclass
class Configuration:
    """Opinions on a d-dimensional torus, one bit per site.

    ``opinions`` is a flat uint8 array in row-major site order: the site
    (c_0, ..., c_{d-1}) has flat index ((c_0 * L + c_1) * L + ...), i.e.
    axis 0 varies slowest.
    """

    side: int
    dim: int
    opinions: np.ndarray

    def __post_init__(self):
        self.opinions = np.asarray(self.opinions, dtype=np.uint8).reshape(-1)
        if self.opinions.shape[0] != self.side ** self.dim:
            raise ValueError("opinion array does not match torus size")
        if np.any(self.opinions > 1):
            raise ValueError("opinions must be 0 or 1")

    @property
    def n_sites(self) -> int:
        return self.side ** self.dim

    def copy(self) -> "Configuration":
        return Configuration(self.side, self.dim, self.opinions.copy())

    def site_index(self, site) -> int:
        coords = tuple(int(c) % self.side for c in site)
        return int(np.ravel_multi_index(coords, (self.side,) * self.dim))

    def get(self, site) -> int:
        return int(self.opinions[self.site_index(site)])

    def as_mask(self) -> int:
        """Configuration as a bit mask (bit i = opinion of flat site i)."""
        return int(np.dot(self.opinions.astype(object), 1 << np.arange(self.n_sites, dtype=object)))


def all_ones(side: int, dim: int) -> Configuration:
    return Configuration(side, dim, np.ones(side ** dim, dtype=np.uint8))


def all_zeros(side: int, dim: int) -> Configuration:
    return Configuration(side, dim, np.zeros(side ** dim, dtype=np.uint8))


@dataclass(frozen=True)
class Event:
    time: float
    site: int
    kind: str                 # RESAMPLE or KILL
    partner: int | None = None  # flat partner index, resample events only


@dataclass
class EventLog:
    """Time-ordered record of the graphical construction."""

    events: list[Event] = field(default_factory=list)

    def append(self, event: Event):
        if self.events and event.time <= self.events[-1].time:
            raise ValueError("event times must be strictly increasing")
        if (event.kind == RESAMPLE) != (event.partner is not None):
            raise ValueError("partner must be present exactly for resample events")
        self.events.append(event)

    def __len__(self):
        return len(self.events)


class _EventStream:
    """Draws the configuration-independent event stream for one torus."""

    def __init__(self, bias, tk: TorusKernel, rng: np.random.Generator):
        self.rng = rng
        self.side = tk.side
        self.dim = tk.dim
        n = tk.n_sites
        shape = (tk.side,) * tk.dim
        if isinstance(bias, BiasField):
            try:
                beta = np.array([bias.value(tuple(int(c) for c in np.unravel_index(i, shape)))
                                 for i in range(n)])
            except KeyError as exc:
                raise ValueError(f"bias field does not cover torus site {exc}") from exc
        else:
            beta = np.asarray(bias, dtype=np.float64).reshape(-1)
            if beta.shape[0] != n:
                raise ValueError("bias array does not match torus size")
        if np.any(beta < 0):
            raise ValueError("bias values must be nonnegative")
        self.beta = beta
        self.total_rate = n + float(beta.sum())
        weights = np.concatenate([np.ones(n), beta])
        self.event_cum = np.cumsum(weights / weights.sum())
        self.event_cum[-1] = 1.0
        disp, cum = tk.sampling_arrays()
        coords = np.array(np.unravel_index(np.arange(n), shape)).T
        self.partner_cum = cum
        # partner_table[x, j] = flat index of site x shifted by displacement j
        self.partner_table = np.empty((n, disp.shape[0]), dtype=np.int64)
        for j in range(disp.shape[0]):
            shifted = (coords + disp[j]) % tk.side
            self.partner_table[:, j] = np.ravel_multi_index(shifted.T, shape)
        self.n_sites = n
        self.time = 0.0
        self.next_time = self.time + rng.exponential(1.0 / self.total_rate)

    def pop_if_before(self, t: float) -> Event | None:
        """Consume the pending event if it happens before time t."""
        if self.next_time > t:
            return None
        time = self.next_time
        e = int(np.searchsorted(self.event_cum, self.rng.random()))
        if e < self.n_sites:
            j = int(np.searchsorted(self.partner_cum, self.rng.random()))
            event = Event(time, e, RESAMPLE, int(self.partner_table[e, j]))
        else:
            event = Event(time, e - self.n_sites, KILL)
        self.time = time
        self.next_time = time + self.rng.exponential(1.0 / self.total_rate)
        return event


def _apply_event(opinions: np.ndarray, event: Event) -> bool:
    """Apply one event in place; return whether the configuration changed."""
    if event.kind == KILL:
        changed = opinions[event.site] != 0
        opinions[event.site] = 0
    else:
        new = opinions[event.partner]
        changed = opinions[event.site] != new
        opinions[event.site] = new
    return bool(changed)


class ForwardSimulation:
    """One trajectory of the dynamics, advanced event by event.

    Snapshots at increasing times reuse the same trajectory (the pending
    event is held across calls), which is what the relaxation estimator
    needs to evaluate a whole time grid on one replica.
    """

    def __init__(self, config: Configuration, bias, tk: TorusKernel,
                 rng: np.random.Generator, log: EventLog | None = None):
        if config.n_sites != tk.n_sites or config.dim != tk.dim:
            raise ValueError("configuration does not match the torus kernel")
        self.config = config.copy()
        self.stream = _EventStream(bias, tk, rng)
        self.log = log
        self.ones_count = int(self.config.opinions.sum())

    @property
    def time(self) -> float:
        return self.stream.time

    def advance_to(self, t: float):
        if t < self.stream.time:
            raise ValueError("cannot advance backwards")
        while True:
            event = self.stream.pop_if_before(t)
            if event is None:
                break
            was_absorbed = self.ones_count == 0
            changed = _apply_event(self.config.opinions, event)
            if changed:
                self.ones_count += 1 if self.config.opinions[event.site] else -1
            # the all-zeros configuration is a trap for these dynamics
            assert not (was_absorbed and self.ones_count != 0), \
                "absorbing state was left"
            if self.log is not None:
                self.log.append(event)
        self.stream.time = t


class CoupledForwardSimulation:
    """Two ordered trajectories driven by the identical event stream.

    Both copies see the same clocks and the same partner draws; each event
    preserves the sitewise order, which is asserted after every event.
    """

    def __init__(self, low: Configuration, high: Configuration, bias,
                 tk: TorusKernel, rng: np.random.Generator):
        if np.any(low.opinions > high.opinions):
            raise ValueError("initial configurations must satisfy low <= high")
        self.low = low.copy()
        self.high = high.copy()
        self.stream = _EventStream(bias, tk, rng)

    @property
    def time(self) -> float:
        return self.stream.time

    def advance_to(self, t: float):
        while True:
            event = self.stream.pop_if_before(t)
            if event is None:
                break
            _apply_event(self.low.opinions, event)
            _apply_event(self.high.opinions, event)
            assert not np.any(self.low.opinions > self.high.opinions), \
                "monotone coupling violated the sitewise order"
        self.stream.time = t


def evolve(config: Configuration, bias, tk: TorusKernel, t: float,
           rng: np.random.Generator, log: EventLog | None = None) -> Configuration:
    """Sample the configuration at time t from the given start."""
    sim = ForwardSimulation(config, bias, tk, rng, log=log)
    sim.advance_to(t)
    return sim.config


def coupled_evolve(low: Configuration, high: Configuration, bias,
                   tk: TorusKernel, t: float,
                   rng: np.random.Generator) -> tuple[Configuration, Configuration]:
    """Evolve an ordered pair under the common event stream."""
    sim = CoupledForwardSimulation(low, high, bias, tk, rng)
    sim.advance_to(t)
    return sim.low, sim.high


def first_flip_site(config: Configuration, bias, tk: TorusKernel,
                    rng: np.random.Generator, t_max: float = np.inf) -> int | None:
    """Flat index of the site whose opinion changes first, for rate audits."""
    opinions = config.opinions.copy()
    stream = _EventStream(bias, tk, rng)
    while stream.next_time <= t_max:
        event = stream.pop_if_before(t_max)
        if _apply_event(opinions, event):
            return event.site
    return None


def _support_indices(f: LocalFunction, side: int, dim: int) -> list[int]:
    shape = (side,) * dim
    idx = []
    for s in f.support:
        if len(s) != dim:
            raise ValueError(f"support site {s} has wrong dimension")
        idx.append(int(np.ravel_multi_index(tuple(c % side for c in s), shape)))
    if len(set(idx)) != len(idx):
        raise ValueError("observable support does not fit in the torus "
                         "(distinct sites collide after wrapping)")
    return idx


def _relaxation_chunk(args):
    f, bias, tk, t_grid, start, stop, seed = args
    idx = _support_indices(f, tk.side, tk.dim)
    values = np.empty((stop - start, len(t_grid)))
    for r in range(start, stop):
        rng = np.random.default_rng(np.random.SeedSequence([seed, r]))
        sim = ForwardSimulation(all_ones(tk.side, tk.dim), bias, tk, rng)
        for j, t in enumerate(t_grid):
            sim.advance_to(t)
            mask = 0
            for i, flat in enumerate(idx):
                if sim.config.opinions[flat]:
                    mask |= 1 << i
            values[r - start, j] = f.value_on_mask(mask)
    return Moments.of(values)


def forward_relaxation(f: LocalFunction, bias, tk: TorusKernel, t_grid,
                       replicas: int, seed: int,
                       threads: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Monte Carlo estimate of E[f(eta_t)] - f(all zeros) from all ones.

    Returns (means, standard errors) over the time grid. Each replica is
    one trajectory evaluated at every grid time; replica r uses the seed
    stream (seed, r), so results do not depend on the thread count.

    For monotone f the all-ones start realizes the worst case over initial
    configurations (attractiveness); for non-monotone f the measured curve
    is only a lower bound on that worst case.
    """
    if replicas < 2:
        raise ValueError("at least 2 replicas are required")
    t_grid = [float(t) for t in t_grid]
    if sorted(t_grid) != t_grid:
        raise ValueError("t_grid must be nondecreasing")
    chunk = 2048
    bounds = [(b, min(b + chunk, replicas)) for b in range(0, replicas, chunk)]
    jobs = [(f, bias, tk, t_grid, b0, b1, seed) for b0, b1 in bounds]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(_relaxation_chunk, jobs))
    else:
        parts = [_relaxation_chunk(job) for job in jobs]
    moments = Moments.zeros(len(t_grid))
    for p in parts:
        moments = moments.merge(p)
    return moments.mean - f.value_all_zeros(), moments.stderr
