"""Experiment orchestration: relaxation curves, bounds, fits, persistence.

An experiment is described by a plain-text ``key = value`` config (or an
``ExperimentConfig`` built in code) and produces one curve record per grid
time. The disorder-averaged relaxation is measured through the annealed
dual route: for an observable with expansion f = sum_A fhat(A) H(., A) the
estimate at time t is sum over nonempty A of fhat(A) times the annealed
dual expectation started from A. The two bound curves are

    upper(t) = Sigma(f) * |support(f)| * E[ exp(-nu1 |R_t|) ]
    lower(t) = gap(f) * E[ exp(-nu2 |R_t|) ] ** |support(f)|

with |R_t| the visited-site count of a single walk. For single-site
observables the same walker paths provide the estimate and both bounds
(shared range samples), which removes most of the relative noise between
the three curves. The upper bound is an asymptotic-regime curve: at times
of order one it can dip below the estimate (its derivation replaces
occupation times by visit counts), so audits are meaningful on the grids
actually used here, t >= O(10).

Replicas are split into fixed-size batches with per-batch seed streams and
merged in batch order, so a rerun with a different thread count writes a
byte-identical CSV.
"""

from __future__ import annotations

import hashlib
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import t as _student_t

from .disorder import DisorderLaw, LazyBiasField, nu1, nu2, sample_field
from .dual import dual_curve
from .forward import ForwardSimulation, all_ones
from .kernel import Kernel, TorusKernel, fold_to_torus, make_nn_kernel, make_power_kernel
from .localfn import (LocalFunction, gap, hat_coeffs, is_monotone,
                      parse_localfn_text, sigma_and_support, site_indicator)
from .rangestats import dv_constant, effective_exponent, lambda_nn, mc_range_functional
from .stats import Moments
from .walks import walk_curve

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "CurveRecord",
    "RecordList",
    "SandwichReport",
    "parse_config_text",
    "parse_t_grid",
    "parse_sites",
    "config_hash",
    "run",
    "fit_stretch_exponent",
    "sandwich_report",
    "write_records_csv",
    "write_sandwich_csv",
    "read_curve_csv",
]

MODES = ("forward", "dual-quenched", "dual-annealed", "range")
SIGMA_BAND = 4.0        # audit tolerance in combined standard errors
CI_LEVEL = 0.99         # two-sided confidence level of exponent fits


class ConfigError(ValueError):
    """Invalid experiment description; message carries the config line."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Complete description of one measurement run."""

    mode: str
    t_grid: tuple[float, ...]
    replicas: int
    seed: int = 0
    dim: int = 1
    side: int = 16
    kernel_name: str = "nn"
    alpha: float | None = None
    cutoff: int = 100
    law: DisorderLaw | None = None
    observable: LocalFunction | None = None
    sites: tuple[tuple[int, ...], ...] | None = None
    nu: float | None = None
    lam: float | None = None          # user-supplied eigenvalue for alpha < 2
    threads: int = 1
    fit_window: tuple[float, float] | None = None
    disorder_seed: int | None = None

    def validate(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.replicas < 2:
            raise ConfigError("replicas must be at least 2")
        if len(self.t_grid) == 0:
            raise ConfigError("t_grid must not be empty")
        if any(b <= a for a, b in zip(self.t_grid, self.t_grid[1:])):
            raise ConfigError("t_grid must be strictly increasing")
        if any(t < 0 for t in self.t_grid):
            raise ConfigError("t_grid times must be nonnegative")
        if not 0 <= self.seed < 2 ** 63:
            raise ConfigError("seed must be a nonnegative 63-bit integer")
        if self.kernel_name not in ("nn", "power"):
            raise ConfigError(f"kernel must be 'nn' or 'power', got {self.kernel_name!r}")
        if self.kernel_name == "power":
            if self.dim != 1:
                raise ConfigError("power-law kernels are one-dimensional")
            if self.alpha is None:
                raise ConfigError("power kernel needs alpha in (0, 2)")
        if self.mode == "range":
            if self.nu is None or self.nu < 0:
                raise ConfigError("range mode needs nu >= 0")
        else:
            if self.law is None:
                raise ConfigError(f"mode {self.mode!r} needs a disorder law")
        if self.mode == "dual-annealed" and self.observable is not None:
            if not is_monotone(self.observable):
                raise ConfigError("the bound pipeline needs a monotone observable")
            if gap(self.observable) <= 0:
                raise ConfigError("the bound pipeline needs a non-constant observable")
        if self.mode == "forward":
            for s in self.observable_or_default().support:
                if len(s) != self.dim:
                    raise ConfigError(f"observable site {s} has wrong dimension")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")

    def build_kernel(self) -> Kernel:
        if self.kernel_name == "nn":
            return make_nn_kernel(self.dim)
        return make_power_kernel(self.alpha, self.cutoff)

    def build_torus(self) -> TorusKernel:
        return fold_to_torus(self.build_kernel(), self.side)

    @property
    def alpha_effective(self) -> float:
        return 2.0 if self.kernel_name == "nn" else float(self.alpha)

    @property
    def target_exponent(self) -> float:
        return self.dim / (self.dim + self.alpha_effective)

    def observable_or_default(self) -> LocalFunction:
        """Explicit observable, or the origin-site indicator."""
        if self.observable is not None:
            return self.observable
        return site_indicator((0,) * self.dim)

    def start_sites(self) -> tuple[tuple[int, ...], ...]:
        if self.sites:
            return self.sites
        if self.observable is not None and self.observable.support:
            return tuple(self.observable.support)
        return ((0,) * self.dim,)

    def canonical_items(self) -> list[tuple[str, str]]:
        items = [
            ("mode", self.mode),
            ("dim", str(self.dim)),
            ("L", str(self.side)),
            ("kernel", self.kernel_name),
            ("alpha", repr(self.alpha) if self.alpha is not None else ""),
            ("cutoff", str(self.cutoff)),
            ("t_grid", ",".join(repr(t) for t in self.t_grid)),
            ("replicas", str(self.replicas)),
            ("seed", str(self.seed)),
            ("nu", repr(self.nu) if self.nu is not None else ""),
            ("lam", repr(self.lam) if self.lam is not None else ""),
            ("fit_window", ",".join(repr(x) for x in self.fit_window) if self.fit_window else ""),
            ("disorder_seed", str(self.disorder_seed) if self.disorder_seed is not None else ""),
        ]
        if self.law is not None:
            items.append(("disorder", " ".join(f"{b!r}:{p!r}" for b, p in self.law.atoms)))
        if self.observable is not None:
            f = self.observable
            sites = ";".join(",".join(str(c) for c in s) for s in f.support)
            table = ",".join(repr(float(v)) for v in f.table)
            items.append(("observable", f"{sites}|{table}"))
        if self.sites:
            items.append(("sites", ";".join(",".join(str(c) for c in s) for s in self.sites)))
        return items


def config_hash(config: ExperimentConfig) -> str:
    text = "\n".join(f"{k} = {v}" for k, v in config.canonical_items())
    return hashlib.sha256(text.encode()).hexdigest()


# ---------------------------------------------------------------------------
# Config file grammar
# ---------------------------------------------------------------------------


def parse_t_grid(text: str) -> tuple[float, ...]:
    """Time grids: ``a:b:n`` (log-spaced), ``lin:a:b:n``, or a comma list."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        linear = False
        if parts[0] == "lin":
            linear = True
            parts = parts[1:]
        elif parts[0] == "log":
            parts = parts[1:]
        if len(parts) != 3:
            raise ConfigError(f"bad t_grid {text!r}: expected a:b:n")
        a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
        if n < 1:
            raise ConfigError("t_grid needs at least one point")
        if linear:
            return tuple(float(x) for x in np.linspace(a, b, n))
        if a <= 0:
            raise ConfigError("log-spaced t_grid needs a > 0 (use lin:a:b:n)")
        return tuple(float(x) for x in np.geomspace(a, b, n))
    return tuple(float(x) for x in text.split(",") if x.strip())


def parse_sites(text: str) -> tuple[tuple[int, ...], ...]:
    """Semicolon-separated sites, each a comma-separated integer tuple."""
    out = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if chunk:
            out.append(tuple(int(c) for c in chunk.split(",")))
    if not out:
        raise ConfigError(f"no sites in {text!r}")
    return tuple(out)


def _parse_observable(text: str) -> LocalFunction:
    text = text.strip()
    if text.startswith("site "):
        return site_indicator(tuple(int(c) for c in text[5:].split(",")))
    if text.startswith("file "):
        with open(text[5:].strip()) as fh:
            return parse_localfn_text(fh.read())
    raise ConfigError(f"observable must be 'site <coords>' or 'file <path>', got {text!r}")


def _parse_law(kind: str, fields: dict) -> DisorderLaw:
    if kind == "bernoulli":
        if "q" not in fields or "b" not in fields:
            raise ConfigError("bernoulli disorder needs q and b")
        q, b = float(fields["q"]), float(fields["b"])
        return DisorderLaw(atoms=((0.0, q), (b, 1.0 - q)))
    if kind == "deterministic":
        if "b" not in fields:
            raise ConfigError("deterministic disorder needs b")
        return DisorderLaw(atoms=((float(fields["b"]), 1.0),))
    if kind == "table":
        if "atoms" not in fields:
            raise ConfigError("table disorder needs atoms = b:p, b:p, ...")
        atoms = []
        for chunk in fields["atoms"].split(","):
            chunk = chunk.strip()
            if chunk:
                b, _, p = chunk.partition(":")
                atoms.append((float(b), float(p)))
        return DisorderLaw(atoms=tuple(atoms))
    raise ConfigError(f"disorder must be bernoulli, deterministic or table, got {kind!r}")


_CONFIG_KEYS = {
    "mode", "dim", "L", "kernel", "alpha", "cutoff", "disorder", "q", "b",
    "atoms", "observable", "sites", "t_grid", "replicas", "seed", "nu",
    "lam", "threads", "fit_window", "disorder_seed",
}


def parse_config_text(text: str, name: str = "<config>") -> ExperimentConfig:
    """Parse the ``key = value`` grammar; errors carry the offending line."""
    raw: dict[str, str] = {}
    lines: dict[str, int] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{name}:{lineno}: expected 'key = value'")
        key, _, value = stripped.partition("=")
        key = key.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{name}:{lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"{name}:{lineno}: duplicate key {key!r}")
        raw[key] = value.strip()
        lines[key] = lineno

    def fail(key, msg):
        raise ConfigError(f"{name}:{lines.get(key, 0)}: {msg}")

    def get(key, cast, default=None):
        if key not in raw:
            return default
        try:
            return cast(raw[key])
        except ConfigError:
            raise
        except ValueError as exc:
            fail(key, f"bad value for {key!r}: {exc}")

    if "mode" not in raw:
        raise ConfigError(f"{name}: missing required key 'mode'")
    if "t_grid" not in raw:
        raise ConfigError(f"{name}: missing required key 't_grid'")
    if "replicas" not in raw:
        raise ConfigError(f"{name}: missing required key 'replicas'")

    law = None
    if "disorder" in raw:
        try:
            law = _parse_law(raw["disorder"], raw)
        except ConfigError as exc:
            fail("disorder", str(exc))
        except ValueError as exc:
            fail("disorder", str(exc))
    observable = None
    if "observable" in raw:
        try:
            observable = _parse_observable(raw["observable"])
        except ConfigError as exc:
            fail("observable", str(exc))

    window = None
    if "fit_window" in raw:
        parts = raw["fit_window"].replace(":", ",").split(",")
        if len(parts) != 2:
            fail("fit_window", "expected 'a:b'")
        window = (float(parts[0]), float(parts[1]))

    config = ExperimentConfig(
        mode=raw["mode"],
        t_grid=get("t_grid", parse_t_grid),
        replicas=get("replicas", int),
        seed=get("seed", int, 0),
        dim=get("dim", int, 1),
        side=get("L", int, 16),
        kernel_name=raw.get("kernel", "nn"),
        alpha=get("alpha", float),
        cutoff=get("cutoff", int, 100),
        law=law,
        observable=observable,
        sites=get("sites", parse_sites),
        nu=get("nu", float),
        lam=get("lam", float),
        threads=get("threads", int, 1),
        fit_window=window,
        disorder_seed=get("disorder_seed", int),
    )
    try:
        config.validate()
    except ConfigError as exc:
        raise ConfigError(f"{name}: {exc}") from exc
    return config


# ---------------------------------------------------------------------------
# Curve records and the measurement pipelines
# ---------------------------------------------------------------------------


class RecordList(list):
    """Records plus run-level metadata (largest dual-walk coordinate seen)."""

    max_abs_position: int | None = None


@dataclass
class CurveRecord:
    """One grid time of an experiment, with optional bound curves."""

    t: float
    estimate: float
    stderr: float
    lower_bound: float | None = None
    lower_stderr: float | None = None
    upper_bound: float | None = None
    upper_stderr: float | None = None
    sandwich_ok: bool | None = None
    mean_range: float | None = None
    mean_particles: float | None = None
    local_exponent: float | None = None


def _audit(estimate, stderr, lower, lower_se, upper, upper_se) -> bool:
    ok = True
    if lower is not None:
        ok &= lower - estimate <= SIGMA_BAND * math.sqrt(stderr ** 2 + (lower_se or 0.0) ** 2)
    if upper is not None:
        ok &= estimate - upper <= SIGMA_BAND * math.sqrt(stderr ** 2 + (upper_se or 0.0) ** 2)
    return bool(ok)


def _derived_seeds(seed: int, count: int) -> list[int]:
    state = np.random.SeedSequence(seed).generate_state(count, dtype=np.uint64)
    return [int(x) % (2 ** 63) for x in state]


def _forward_chunk(args):
    f, law, tk, t_grid, b0, b1, seed = args
    shape = (tk.side,) * tk.dim
    torus_sites = [tuple(int(c) for c in np.unravel_index(i, shape))
                   for i in range(tk.n_sites)]
    values = np.empty((b1 - b0, len(t_grid)))
    flat_support = []
    for s in f.support:
        flat_support.append(int(np.ravel_multi_index(tuple(c % tk.side for c in s), shape)))
    if len(set(flat_support)) != len(flat_support):
        raise ConfigError("observable support does not fit in the torus")
    for r in range(b0, b1):
        field_rng = np.random.default_rng(np.random.SeedSequence([seed, r, 1]))
        bias = sample_field(law, torus_sites, field_rng, seed_info=(seed, r))
        rng = np.random.default_rng(np.random.SeedSequence([seed, r, 0]))
        sim = ForwardSimulation(all_ones(tk.side, tk.dim), bias, tk, rng)
        for j, t in enumerate(t_grid):
            sim.advance_to(t)
            mask = 0
            for i, flat in enumerate(flat_support):
                if sim.config.opinions[flat]:
                    mask |= 1 << i
            values[r - b0, j] = f.value_on_mask(mask)
    return Moments.of(values)


def _run_forward(config: ExperimentConfig) -> list[CurveRecord]:
    tk = config.build_torus()
    f = config.observable_or_default()
    chunk = 2048
    bounds = [(b, min(b + chunk, config.replicas))
              for b in range(0, config.replicas, chunk)]
    jobs = [(f, config.law, tk, config.t_grid, b0, b1, config.seed)
            for b0, b1 in bounds]
    if config.threads > 1:
        with ProcessPoolExecutor(max_workers=config.threads) as pool:
            parts = list(pool.map(_forward_chunk, jobs))
    else:
        parts = [_forward_chunk(job) for job in jobs]
    moments = Moments.zeros(len(config.t_grid))
    for p in parts:
        moments = moments.merge(p)
    mean = moments.mean - f.value_all_zeros()
    stderr = moments.stderr
    return [CurveRecord(t=t, estimate=float(mean[j]), stderr=float(stderr[j]))
            for j, t in enumerate(config.t_grid)]


def _run_dual_quenched(config: ExperimentConfig) -> list[CurveRecord]:
    kern = config.build_kernel()
    dseed = config.disorder_seed if config.disorder_seed is not None else config.seed
    bias = LazyBiasField(config.law, dseed)
    curve = dual_curve(config.start_sites(), kern, config.t_grid, config.replicas,
                       config.seed, "quenched", bias=bias, threads=config.threads)
    records = RecordList(
        CurveRecord(t=float(t), estimate=float(curve.mean[j]),
                    stderr=float(curve.stderr[j]),
                    mean_range=float(curve.mean_range[j]),
                    mean_particles=float(curve.mean_particles[j]))
        for j, t in enumerate(curve.t_grid))
    records.max_abs_position = curve.max_abs_position
    return records


def _run_dual_annealed(config: ExperimentConfig) -> list[CurveRecord]:
    kern = config.build_kernel()
    law = config.law
    if config.observable is None:
        # plain annealed estimator on the start set, no bound curves
        curve = dual_curve(config.start_sites(), kern, config.t_grid,
                           config.replicas, config.seed, "annealed", law=law,
                           threads=config.threads)
        records = RecordList(
            CurveRecord(t=float(t), estimate=float(curve.mean[j]),
                        stderr=float(curve.stderr[j]),
                        mean_range=float(curve.mean_range[j]),
                        mean_particles=float(curve.mean_particles[j]))
            for j, t in enumerate(curve.t_grid))
        records.max_abs_position = curve.max_abs_position
        return records
    f = config.observable
    coeffs = hat_coeffs(f)
    sigma, support = sigma_and_support(f)
    gap_f = gap(f)
    lam_size = len(support)
    n1 = nu1(law)
    n2 = nu2(law)
    exponents = [n1] + ([n2] if math.isfinite(n2) else [])

    nonempty = sorted((A for A in coeffs if A and coeffs[A] != 0.0),
                      key=lambda A: sorted(A))
    if lam_size == 1 and len(nonempty) == 1:
        # single-walker route: estimate and bounds share the same paths
        stats = walk_curve(kern, config.t_grid, config.replicas, config.seed,
                           law=law, exponents=exponents,
                           floor_nu=n2 if math.isfinite(n2) else None,
                           threads=config.threads)
        coeff = coeffs[nonempty[0]]
        est = coeff * stats.weight_mean
        est_se = abs(coeff) * stats.weight_stderr
        mean_range = stats.range_mean
        mean_particles = np.ones_like(mean_range)
    else:
        seeds = _derived_seeds(config.seed, len(nonempty) + 1)
        est = np.zeros(len(config.t_grid))
        var = np.zeros(len(config.t_grid))
        mean_range = np.zeros(len(config.t_grid))
        for i, A in enumerate(nonempty):
            curve = dual_curve(sorted(A), kern, config.t_grid, config.replicas,
                               seeds[i], "annealed", law=law, threads=config.threads)
            est += coeffs[A] * curve.mean
            var += (coeffs[A] * curve.stderr) ** 2
            mean_range = np.maximum(mean_range, curve.mean_range)
        est_se = np.sqrt(var)
        mean_particles = np.full(len(config.t_grid), float("nan"))
        stats = walk_curve(kern, config.t_grid, config.replicas, seeds[-1],
                           exponents=exponents, threads=config.threads)

    upper = sigma * lam_size * stats.exp_means[n1]
    upper_se = sigma * lam_size * stats.exp_stderrs[n1]
    if math.isfinite(n2):
        base = stats.exp_means[n2]
        base_se = stats.exp_stderrs[n2]
        lower = gap_f * base ** lam_size
        lower_se = gap_f * lam_size * base ** max(lam_size - 1, 0) * base_se
    else:
        # no mass at zero bias: the floor degenerates to zero information
        lower = np.zeros(len(config.t_grid))
        lower_se = np.zeros(len(config.t_grid))

    records = RecordList()
    records.max_abs_position = stats.max_abs_position
    for j, t in enumerate(config.t_grid):
        records.append(CurveRecord(
            t=float(t),
            estimate=float(est[j]), stderr=float(est_se[j]),
            lower_bound=float(lower[j]), lower_stderr=float(lower_se[j]),
            upper_bound=float(upper[j]), upper_stderr=float(upper_se[j]),
            sandwich_ok=_audit(float(est[j]), float(est_se[j]),
                               float(lower[j]), float(lower_se[j]),
                               float(upper[j]), float(upper_se[j])),
            mean_range=float(mean_range[j]),
            mean_particles=float(mean_particles[j])))
    return records


def _run_range(config: ExperimentConfig) -> list[CurveRecord]:
    kern = config.build_kernel()
    curve = mc_range_functional(kern, config.nu, config.t_grid,
                                config.replicas, config.seed,
                                threads=config.threads)
    slopes = {}
    if np.all((curve.mean > 0.0) & (curve.mean < 1.0)) and len(curve.t_grid) >= 3:
        slopes = dict(effective_exponent(list(zip(curve.t_grid, curve.mean))))
    records = RecordList(
        CurveRecord(t=float(t), estimate=float(curve.mean[j]),
                    stderr=float(curve.stderr[j]),
                    mean_range=float(curve.mean_range[j]),
                    local_exponent=slopes.get(float(t)))
        for j, t in enumerate(curve.t_grid))
    records.max_abs_position = curve.max_abs_position
    return records


def run(config: ExperimentConfig) -> list[CurveRecord]:
    """Execute one experiment; see the module docstring for the pipelines."""
    config.validate()
    if config.mode == "forward":
        return _run_forward(config)
    if config.mode == "dual-quenched":
        return _run_dual_quenched(config)
    if config.mode == "dual-annealed":
        return _run_dual_annealed(config)
    return _run_range(config)


# ---------------------------------------------------------------------------
# Exponent fits and the two-sided bound report
# ---------------------------------------------------------------------------


def fit_stretch_exponent(curve, window: tuple[float, float] | None = None
                         ) -> tuple[float, float]:
    """Least-squares slope of log(-log m) against log t.

    ``curve`` is a sequence of (t, m) pairs with m strictly inside (0, 1).
    ``window`` restricts to window[0] <= t <= window[1]; the default is the
    last decade of the grid (the prediction is asymptotic, early times are
    transient). Returns the slope and the half-width of its two-sided 99%
    confidence interval computed from the residual variance.
    """
    pts = sorted((float(t), float(m)) for t, m in curve)
    if not pts:
        raise ValueError("empty curve")
    if window is None:
        tmax = pts[-1][0]
        window = (tmax / 10.0, tmax)
    sel = [(t, m) for t, m in pts if window[0] <= t <= window[1]]
    if len(sel) < 5:
        raise ValueError(f"need at least 5 points in the fit window, got {len(sel)}")
    if any(not 0.0 < m < 1.0 for _, m in sel):
        raise ValueError("curve values must lie strictly inside (0, 1)")
    x = np.log([t for t, _ in sel])
    y = np.log(-np.log([m for _, m in sel]))
    xbar, ybar = x.mean(), y.mean()
    sxx = float(((x - xbar) ** 2).sum())
    if sxx == 0.0:
        raise ValueError("degenerate fit window: identical times")
    slope = float(((x - xbar) * (y - ybar)).sum() / sxx)
    resid = y - (ybar + slope * (x - xbar))
    dof = len(sel) - 2
    s2 = float((resid ** 2).sum()) / dof
    half = float(_student_t.ppf(0.5 + CI_LEVEL / 2.0, dof) * math.sqrt(s2 / sxx))
    return slope, half


@dataclass
class SandwichReport:
    """Two-sided bound audit plus exponent fits for one annealed experiment."""

    records: list[CurveRecord]
    hypothesis_upper_ok: bool       # some mass off zero bias
    hypothesis_lower_ok: bool       # some mass at zero bias
    gamma_target: float
    gamma_estimate: tuple[float, float] | None
    gamma_lower: tuple[float, float] | None
    gamma_upper: tuple[float, float] | None
    ordering_ok: bool
    gamma_bracket_ok: bool | None
    constants: dict = field(default_factory=dict)

    @property
    def hypotheses_ok(self) -> bool:
        return self.hypothesis_upper_ok and self.hypothesis_lower_ok


def _try_fit(ts, values, window):
    try:
        return fit_stretch_exponent(zip(ts, values), window)
    except ValueError:
        return None


def sandwich_report(config: ExperimentConfig) -> SandwichReport:
    """Run the annealed pipeline and audit the two-sided bounds.

    The per-time audit requires lower <= estimate <= upper within the
    combined error band; the exponent audit fits all three curves on the
    window and checks that the estimate's interval overlaps the interval
    spanned by the two bound exponents. Hypothesis failures (a law with no
    mass at zero, or none off zero) are reported, not raised.
    """
    config = replace(config, mode="dual-annealed")
    if config.observable is None:
        config = replace(config, observable=site_indicator((0,) * config.dim))
    config.validate()
    law = config.law
    n1 = nu1(law)
    n2 = nu2(law)
    hyp_upper = law.mass_at_zero < 1.0   # bias present with positive probability
    hyp_lower = law.mass_at_zero > 0.0
    records = run(config)

    window = config.fit_window
    if window is None:
        tmax = max(config.t_grid)
        window = (tmax / 10.0, tmax)
    ts = [r.t for r in records]
    g_est = _try_fit(ts, [r.estimate for r in records], window)
    g_up = _try_fit(ts, [r.upper_bound for r in records], window) if hyp_upper else None
    g_low = _try_fit(ts, [r.lower_bound for r in records], window) if hyp_lower else None

    bracket = None
    if g_est and g_up and g_low:
        lo_g, hi_g = sorted((g_low, g_up), key=lambda g: g[0])
        bracket = (g_est[0] + g_est[1] >= lo_g[0] - lo_g[1]) and \
                  (g_est[0] - g_est[1] <= hi_g[0] + hi_g[1])

    lam = config.lam
    if lam is None and config.kernel_name == "nn" and 1 <= config.dim <= 3:
        lam = lambda_nn(config.dim)
    constants = {
        "nu1": n1, "nu2": n2, "m1": math.exp(-n1),
        "sigma_f": sigma_and_support(config.observable)[0],
        "gap_f": gap(config.observable),
        "support_size": len(sigma_and_support(config.observable)[1]),
        "lambda": lam,
        "c_upper": dv_constant(config.dim, config.alpha_effective, lam, n1) if lam else None,
        "c_lower": (dv_constant(config.dim, config.alpha_effective, lam, n2)
                    if lam and math.isfinite(n2) else None),
    }
    return SandwichReport(
        records=records,
        hypothesis_upper_ok=hyp_upper,
        hypothesis_lower_ok=hyp_lower,
        gamma_target=config.target_exponent,
        gamma_estimate=g_est, gamma_lower=g_low, gamma_upper=g_up,
        ordering_ok=all(r.sandwich_ok is not False for r in records),
        gamma_bracket_ok=bracket,
        constants=constants)


# ---------------------------------------------------------------------------
# CSV persistence
# ---------------------------------------------------------------------------


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return repr(float(value))
    return str(value)


def _header_lines(config: ExperimentConfig, extra: list[str] = ()) -> list[str]:
    lines = [f"# biased-voter {config.mode}",
             f"# config-hash: {config_hash(config)}"]
    for k, v in config.canonical_items():
        lines.append(f"# {k} = {v}")
    lines.extend(extra)
    return lines


_MODE_COLUMNS = {
    "forward": ("t", "mean", "stderr", "replicas"),
    "dual-quenched": ("t", "mean", "stderr", "mean_range", "mean_particles"),
    "dual-annealed": ("t", "mean", "stderr", "mean_range", "mean_particles"),
    "range": ("t", "mean", "stderr", "mean_range", "local_exponent"),
}


def _record_row(record: CurveRecord, columns, replicas) -> list[str]:
    mapping = {
        "t": record.t, "mean": record.estimate, "stderr": record.stderr,
        "replicas": replicas, "mean_range": record.mean_range,
        "mean_particles": record.mean_particles,
        "local_exponent": record.local_exponent,
    }
    return [_fmt(mapping[c]) for c in columns]


def write_records_csv(path, records: list[CurveRecord], config: ExperimentConfig):
    """Write per-mode CSV columns under a header embedding the config hash.

    Dual and range runs also record the largest walk coordinate seen, which
    is what a forward cross-check needs to pick a torus side with
    negligible wrap probability.
    """
    columns = _MODE_COLUMNS[config.mode]
    extra = []
    max_pos = getattr(records, "max_abs_position", None)
    if max_pos is not None:
        extra.append(f"# max_walk_displacement = {max_pos}")
    buf = io.StringIO()
    for line in _header_lines(config, extra):
        buf.write(line + "\n")
    buf.write(",".join(columns) + "\n")
    for r in records:
        buf.write(",".join(_record_row(r, columns, config.replicas)) + "\n")
    _write_text(path, buf.getvalue())


def write_sandwich_csv(path, report: SandwichReport, config: ExperimentConfig):
    extra = [
        f"# gamma_target = {_fmt(report.gamma_target)}",
        f"# gamma_estimate = {_fmt(report.gamma_estimate[0]) if report.gamma_estimate else ''}"
        f" ci = {_fmt(report.gamma_estimate[1]) if report.gamma_estimate else ''}",
        f"# gamma_lower = {_fmt(report.gamma_lower[0]) if report.gamma_lower else ''}"
        f" ci = {_fmt(report.gamma_lower[1]) if report.gamma_lower else ''}",
        f"# gamma_upper = {_fmt(report.gamma_upper[0]) if report.gamma_upper else ''}"
        f" ci = {_fmt(report.gamma_upper[1]) if report.gamma_upper else ''}",
        f"# hypothesis_upper_ok = {_fmt(report.hypothesis_upper_ok)}",
        f"# hypothesis_lower_ok = {_fmt(report.hypothesis_lower_ok)}",
        f"# ordering_ok = {_fmt(report.ordering_ok)}",
        f"# gamma_bracket_ok = {_fmt(report.gamma_bracket_ok)}",
    ]
    for k, v in sorted(report.constants.items()):
        extra.append(f"# constant {k} = {_fmt(v)}")
    columns = ("t", "estimate", "stderr", "lower", "lower_stderr",
               "upper", "upper_stderr", "sandwich_ok")
    buf = io.StringIO()
    for line in _header_lines(config, extra):
        buf.write(line + "\n")
    buf.write(",".join(columns) + "\n")
    for r in report.records:
        row = [r.t, r.estimate, r.stderr, r.lower_bound, r.lower_stderr,
               r.upper_bound, r.upper_stderr, r.sandwich_ok]
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    _write_text(path, buf.getvalue())


def _write_text(path, text: str):
    if hasattr(path, "write"):
        path.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def read_curve_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Read (t, mean-or-estimate) columns back from any output CSV."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    rows = [ln for ln in lines if not ln.startswith("#")]
    header = rows[0].split(",")
    t_idx = header.index("t")
    m_idx = next(header.index(c) for c in ("mean", "estimate", "value")
                 if c in header)
    ts, ms = [], []
    for row in rows[1:]:
        cells = row.split(",")
        ts.append(float(cells[t_idx]))
        ms.append(float(cells[m_idx]))
    return np.asarray(ts), np.asarray(ms)
