"""Displacement kernels for the voter dynamics and their dual walks.

A kernel is a symmetric probability distribution p on Z^d with p(0) = 0.
It drives both the forward resampling dynamics and the dual random walks.
Two families are provided: nearest-neighbor kernels in d = 1..3 (Gaussian
attraction, index alpha = 2) and truncated power-law kernels in d = 1
(stable attraction of index alpha < 2).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Kernel",
    "TorusKernel",
    "AssumptionReport",
    "make_nn_kernel",
    "make_power_kernel",
    "char_fn",
    "verify_assumption",
    "fold_to_torus",
]

_WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class Kernel:
    """Symmetric displacement distribution on Z^d with no mass at the origin.

    ``dmatrix`` is the quadratic coefficient of 1 - p_hat(k) near k = 0 and is
    only meaningful for ``alpha == 2``; ``tail_constant`` is the fitted
    coefficient c in p_hat(k) ~ 1 - c |k|^alpha and is only meaningful for
    ``alpha < 2`` (one-dimensional kernels).
    """

    dim: int
    displacements: np.ndarray  # (n, dim) int64
    weights: np.ndarray        # (n,) float64, sums to 1
    alpha: float
    dmatrix: np.ndarray | None = None
    tail_constant: float | None = None

    def __post_init__(self):
        disp = np.asarray(self.displacements, dtype=np.int64).reshape(-1, self.dim)
        w = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if disp.shape[0] != w.shape[0]:
            raise ValueError("displacements and weights must have equal length")
        if np.any(np.all(disp == 0, axis=1)):
            raise ValueError("kernel must not place mass at displacement 0")
        if np.any(w < 0):
            raise ValueError("kernel weights must be nonnegative")
        if abs(w.sum() - 1.0) > _WEIGHT_TOL:
            raise ValueError(f"kernel weights sum to {w.sum()!r}, not 1")
        table = {tuple(x): wt for x, wt in zip(disp, w)}
        for x, wt in table.items():
            mirror = tuple(-c for c in x)
            if abs(table.get(mirror, 0.0) - wt) > _WEIGHT_TOL:
                raise ValueError(f"kernel not symmetric at displacement {x}")
        if not (0.0 < self.alpha <= 2.0):
            raise ValueError("alpha must lie in (0, 2]")
        if self.alpha == 2.0 and self.dmatrix is not None:
            dm = np.asarray(self.dmatrix, dtype=np.float64)
            if dm.shape != (self.dim, self.dim) or not np.allclose(dm, dm.T):
                raise ValueError("dmatrix must be a symmetric (d, d) matrix")
            if np.any(np.linalg.eigvalsh(dm) <= 0):
                raise ValueError("dmatrix must be positive definite")
            dm.setflags(write=False)
            object.__setattr__(self, "dmatrix", dm)
        disp.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "displacements", disp)
        object.__setattr__(self, "weights", w)

    @property
    def support(self) -> list[tuple[tuple[int, ...], float]]:
        return [(tuple(x), float(w)) for x, w in zip(self.displacements, self.weights)]


@dataclass(frozen=True)
class TorusKernel:
    """A kernel folded onto a periodic box of side ``side`` per axis.

    ``folded`` maps each torus displacement (tuple of ints in [0, side)) to
    the total base probability of displacements congruent to it mod side.
    Folding can create mass at displacement 0 (a no-op move); it is kept so
    that folded weights still sum to 1.
    """

    base: Kernel
    side: int
    folded: dict[tuple[int, ...], float] = field(default_factory=dict)

    def __post_init__(self):
        total = sum(self.folded.values())
        if abs(total - 1.0) > _WEIGHT_TOL:
            raise ValueError(f"folded weights sum to {total!r}, not 1")

    @property
    def dim(self) -> int:
        return self.base.dim

    @property
    def n_sites(self) -> int:
        return self.side ** self.base.dim

    def sampling_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Displacements and cumulative weights in canonical (sorted) order."""
        items = sorted(self.folded.items())
        disp = np.array([x for x, _ in items], dtype=np.int64).reshape(len(items), self.dim)
        cum = np.cumsum([w for _, w in items])
        cum[-1] = 1.0
        return disp, cum


@dataclass(frozen=True)
class AssumptionReport:
    """Result of the small-k stability check for a kernel."""

    max_residual: float
    aperiodic_ok: bool


def make_nn_kernel(d: int) -> Kernel:
    """Uniform nearest-neighbor kernel in d = 1, 2 or 3.

    p_hat(k) = (1/d) sum_i cos(k_i) = 1 - |k|^2/(2d) + O(|k|^4), so the
    Gaussian coefficient matrix is I/(2d).
    """
    if not 1 <= d <= 3:
        raise ValueError("nearest-neighbor kernels are supported for d in 1..3")
    eye = np.eye(d, dtype=np.int64)
    disp = np.vstack([eye, -eye])
    w = np.full(2 * d, 1.0 / (2 * d))
    return Kernel(dim=d, displacements=disp, weights=w, alpha=2.0,
                  dmatrix=np.eye(d) / (2 * d))


def make_power_kernel(alpha: float, cutoff: int) -> Kernel:
    """One-dimensional kernel with p(x) proportional to |x|^-(1+alpha).

    The support is truncated at |x| <= cutoff. ``tail_constant`` is fitted by
    least squares so that 1 - p_hat(k) ~ c |k|^alpha on k in [0.01, 0.1];
    for small cutoffs the fit is recorded but not meaningful.
    """
    if not (0.0 < alpha < 2.0):
        raise ValueError("alpha must lie in (0, 2) for power-law kernels")
    if cutoff < 1:
        raise ValueError("cutoff must be at least 1")
    x = np.arange(1, cutoff + 1, dtype=np.int64)
    raw = x.astype(float) ** (-(1.0 + alpha))
    w_half = raw / (2.0 * raw.sum())
    kgrid = np.linspace(0.01, 0.1, 40)
    one_minus = np.array([2.0 * np.sum(w_half * (1.0 - np.cos(k * x))) for k in kgrid])
    c = float(np.sum(one_minus * kgrid ** alpha) / np.sum(kgrid ** (2 * alpha)))
    disp = np.concatenate([x, -x]).reshape(-1, 1)
    w = np.concatenate([w_half, w_half])
    return Kernel(dim=1, displacements=disp, weights=w, alpha=alpha,
                  tail_constant=c)


def char_fn(kernel: Kernel, k) -> float:
    """Characteristic function p_hat(k) = sum_x p(x) cos(<k, x>).

    Real-valued by symmetry, equal to 1 at k = 0 and bounded in [-1, 1].
    """
    k = np.asarray(k, dtype=np.float64).reshape(kernel.dim)
    return float(np.dot(kernel.weights, np.cos(kernel.displacements @ k)))


def _stable_exponent(kernel: Kernel, k: np.ndarray) -> float:
    """D(k), the leading term of 1 - p_hat(k) for small k."""
    if kernel.alpha == 2.0:
        if kernel.dmatrix is None:
            raise ValueError("kernel has alpha=2 but no dmatrix")
        return float(k @ kernel.dmatrix @ k)
    if kernel.tail_constant is None:
        raise ValueError("kernel has alpha<2 but no fitted tail constant")
    return float(kernel.tail_constant * np.linalg.norm(k) ** kernel.alpha)


def verify_assumption(kernel: Kernel, kgrid, tol: float = 1e-9) -> AssumptionReport:
    """Check the small-k expansion p_hat(k) = 1 - D(k) + o(|k|^alpha).

    ``max_residual`` is max_k |p_hat(k) - 1 + D(k)| / |k|^alpha over the grid.
    ``aperiodic_ok`` requires p_hat(k) < 1 - tol at every grid point that is
    not congruent to 0 mod 2*pi (tol is the numerical margin of the strict
    inequality).
    """
    max_res = 0.0
    aperiodic = True
    for k in kgrid:
        k = np.asarray(k, dtype=np.float64).reshape(kernel.dim)
        norm = np.linalg.norm(k)
        phat = char_fn(kernel, k)
        if norm > 0:
            res = abs(phat - 1.0 + _stable_exponent(kernel, k)) / norm ** kernel.alpha
            max_res = max(max_res, res)
        frac = k / (2 * np.pi) - np.round(k / (2 * np.pi))
        on_lattice = np.all(np.abs(frac) < 1e-12)
        if not on_lattice and phat >= 1.0 - tol:
            aperiodic = False
    return AssumptionReport(max_residual=max_res, aperiodic_ok=aperiodic)


def fold_to_torus(kernel: Kernel, side: int) -> TorusKernel:
    """Fold a kernel onto the torus (Z / side Z)^d by summing congruent mass."""
    if side < 2:
        raise ValueError("torus side must be at least 2")
    folded: dict[tuple[int, ...], float] = {}
    for x, w in zip(kernel.displacements, kernel.weights):
        key = tuple(int(c) % side for c in x)
        folded[key] = folded.get(key, 0.0) + float(w)
    return TorusKernel(base=kernel, side=side, folded=folded)
