"""High-level drivers: deterministic master equations and trajectory ensembles.

A :class:`Problem` fixes the system, bath, initial state, truncation and
time grid.  Every driver returns a :class:`Solution` holding the reduced
density matrix at the stored times (``n_store + 1`` points including
``t = 0``) and, for stochastic methods, entrywise standard errors.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from . import _kernels
from .bcf import BathModel, SystemModel
from .ensemble import (
    BlochObserver,
    EnsembleAccumulator,
    accumulate_linear,
    accumulate_normalized,
    standard_error,
)
from .exceptions import CapacityError, ModelDomainError, NumericalError, UnsupportedModelError
from .fock import DEFAULT_CAPACITY, TruncationScheme, build_basis, vacuum_embed
from .noise import bcf_factor, complex_normal, ou_path, real_factor, substream
from .propagators import EffectiveHamiltonianContext, kernel_args, substep_tables

log = logging.getLogger(__name__)

METHODS = ("hops-linear", "hops-nonlinear", "hme", "pme", "psse-linear", "psse-nonlinear")
STOCHASTIC = {"hops-linear", "hops-nonlinear", "psse-linear", "psse-nonlinear"}


@dataclass
class Problem:
    """Everything but the method: dynamics, initial state and time grid."""

    system: SystemModel
    bath: BathModel
    psi0: np.ndarray
    truncation: TruncationScheme
    T: float
    n_steps: int
    n_store: int = 1000
    omega0: Optional[float] = None
    capacity: int = DEFAULT_CAPACITY

    def __post_init__(self):
        self.psi0 = np.asarray(self.psi0, dtype=complex)
        if self.psi0.shape != (self.system.dim,):
            raise ModelDomainError(f"initial state has shape {self.psi0.shape}, expected ({self.system.dim},)")
        norm = np.linalg.norm(self.psi0)
        if not np.isfinite(norm) or norm == 0:
            raise ModelDomainError("initial state must be finite and nonzero")
        if not self.T > 0:
            raise ModelDomainError("horizon T must be positive")
        if self.n_steps < 1 or self.n_store < 1 or self.n_steps % self.n_store:
            raise ModelDomainError(
                f"stored points ({self.n_store}) must divide the step count ({self.n_steps})"
            )

    @property
    def h(self) -> float:
        return self.T / self.n_steps

    @property
    def store_every(self) -> int:
        return self.n_steps // self.n_store

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_store + 1) * (self.store_every * self.h)

    def context(self) -> EffectiveHamiltonianContext:
        basis = build_basis(self.truncation, capacity=self.capacity)
        if basis.dimension(self.system.dim) > self.capacity:
            raise CapacityError(
                f"extended dimension {basis.dimension(self.system.dim)} exceeds capacity {self.capacity}"
            )
        return EffectiveHamiltonianContext(self.system, self.bath, basis)

    def observer(self):
        if self.system.dim == 2:
            return BlochObserver(self.times, 0.0 if self.omega0 is None else float(self.omega0))
        return None


@dataclass
class Solution:
    method: str
    times: np.ndarray
    rho: np.ndarray
    se_re: Optional[np.ndarray] = None
    se_im: Optional[np.ndarray] = None
    observables: dict = field(default_factory=dict)
    observable_se: dict = field(default_factory=dict)
    count: int = 0
    discarded: int = 0

    @property
    def stochastic(self) -> bool:
        return self.method in STOCHASTIC


def _deterministic_observables(problem, rho):
    obs = problem.observer()
    if obs is None:
        return {}
    vals = obs.evaluate(rho)
    return {n: vals[i] for i, n in enumerate(obs.names)}


# --------------------------------------------------------------------------
# master equations
# --------------------------------------------------------------------------


def solve_density(problem: Problem, method: str = "hme") -> Solution:
    """Integrate the hierarchy (``hme``) or pseudomode (``pme``) master equation."""
    if method not in ("hme", "pme"):
        raise ModelDomainError(f"unknown density-matrix method {method!r}")
    pme = method == "pme"
    if pme and not problem.bath.pseudomode_ok:
        raise UnsupportedModelError("pme requires f_j = g_j for all modes")
    ctx = problem.context()
    d = ctx.dim
    if d * d > problem.capacity:
        raise CapacityError(f"density matrix of {d * d} entries exceeds capacity {problem.capacity}")
    psi = vacuum_embed(problem.psi0 / np.linalg.norm(problem.psi0), ctx.basis).reshape(-1)
    R0 = np.outer(psi, psi.conj())
    F, Gc, D = substep_tables(ctx, problem.T, problem.n_steps)
    rho, _, status = _kernels.density_rk4(
        R0, *kernel_args(ctx), ctx.rates, F, Gc, D, problem.h, problem.store_every, pme
    )
    if status:
        raise NumericalError(f"{method}: non-finite extended density matrix")
    return Solution(method, problem.times, rho, observables=_deterministic_observables(problem, rho))


def solve_hme(problem: Problem) -> Solution:
    return solve_density(problem, "hme")


def solve_pme(problem: Problem) -> Solution:
    return solve_density(problem, "pme")


# --------------------------------------------------------------------------
# trajectory noise
# --------------------------------------------------------------------------


@dataclass
class NoiseSource:
    """Per-trajectory noise on the step grid, drawn from ``substream(seed, k)``.

    ``route`` is ``"ou"`` (requires f_j = g_j) or ``"eigen"``.  Step ``n``
    uses the value at its left end point ``t_n``.
    """

    problem: Problem
    route: str = "auto"
    energy_threshold: Optional[float] = None
    _factor: object = field(default=None, init=False, repr=False)
    _thermal: object = field(default=None, init=False, repr=False)

    def __post_init__(self):
        bath = self.problem.bath
        if self.route == "auto":
            self.route = "ou" if bath.pseudomode_ok else "eigen"
        if self.route not in ("ou", "eigen"):
            raise ModelDomainError(f"unknown noise route {self.route!r}")
        if self.route == "ou" and not bath.pseudomode_ok:
            raise UnsupportedModelError("OU noise requires f_j = g_j for all modes")
        grid = np.arange(self.problem.n_steps) * self.problem.h
        self.grid = grid
        if self.route == "eigen":
            self._factor = _cached_factor(bath, self.problem.n_steps, self.problem.h, self.energy_threshold)
        if bath.thermal_cov is not None:
            self._thermal = real_factor(bath.thermal_cov, grid)
        F, _ = bath.coefficients(grid)
        self._F = F

    def z_conj(self, rng: np.random.Generator) -> np.ndarray:
        """``Z*(t_n)`` for one trajectory."""
        if self.route == "ou":
            z = ou_path(self.problem.bath.rates, self.problem.n_steps, self.problem.h, rng)
            Z = np.sum(self._F * z[:-1], axis=-1)
        else:
            eps = complex_normal(rng, self._factor.rank)
            Z = self._factor.factor @ eps
        return np.conj(Z)

    def thermal(self, rng: np.random.Generator) -> np.ndarray:
        if self._thermal is None:
            return np.zeros(self.problem.n_steps)
        eps = rng.standard_normal(self._thermal.rank)
        return self._thermal.factor @ eps


@lru_cache(maxsize=2)
def _cached_factor(bath, n_steps, h, energy_threshold):
    # scans rerun the same bath on the same grid; the factorization dominates setup time
    return bcf_factor(bath, np.arange(n_steps) * h, energy_threshold)


def _chunks(n_traj, chunk):
    return [(a, min(a + chunk, n_traj)) for a in range(0, n_traj, chunk)]


def _run_chunks(work, n_traj, chunk, threads):
    spans = _chunks(n_traj, chunk)
    if threads <= 1 or len(spans) == 1:
        return [work(a, b) for a, b in spans]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda ab: work(*ab), spans))


def _collect(problem, method, results, reduce_fn) -> Solution:
    acc = EnsembleAccumulator(problem.times, problem.system.dim, problem.observer())
    for block, status in results:
        ok = status == 0
        acc.discarded += int(np.sum(~ok))
        if np.any(ok):
            reduce_fn(acc, block[ok])
    if acc.discarded:
        log.warning("%s: discarded %d of %d trajectories", method, acc.discarded, acc.discarded + acc.count)
    if acc.count == 0:
        raise NumericalError(f"{method}: every trajectory was discarded")
    se_re, se_im = standard_error(acc)
    return Solution(
        method, problem.times, acc.mean(), se_re, se_im, acc.observable_means(), acc.observable_errors(),
        acc.count, acc.discarded,
    )


def run_hops(problem: Problem, n_traj: int, seed: int, nonlinear: bool = True, noise: str = "auto",
             threads: int = 1, chunk: int = 256, energy_threshold: Optional[float] = None) -> Solution:
    """Monte-Carlo average of linear or nonlinear (Girsanov) HOPS trajectories.

    The linear ensemble averages ``|psi><psi|``; the nonlinear one averages
    normalized projectors.
    """
    if n_traj < 1:
        raise ModelDomainError("at least one trajectory is required")
    ctx = problem.context()
    src = NoiseSource(problem, noise, energy_threshold)
    psi0 = vacuum_embed(problem.psi0 / np.linalg.norm(problem.psi0), ctx.basis)
    args = kernel_args(ctx)
    F, Gc, D = substep_tables(ctx, problem.T, problem.n_steps)

    def work(a, b):
        zstep = np.empty((problem.n_steps, b - a), dtype=complex)
        for i, k in enumerate(range(a, b)):
            rng = substream(seed, k)
            zstep[:, i] = src.z_conj(rng) + src.thermal(rng)
        return _kernels.hops_trajectories(
            psi0, *args, ctx.rates, F, Gc, D, zstep, problem.h, problem.store_every, nonlinear
        )

    results = _run_chunks(work, n_traj, chunk, threads)
    method = "hops-nonlinear" if nonlinear else "hops-linear"
    return _collect(problem, method, results, accumulate_normalized if nonlinear else accumulate_linear)


def run_psse(problem: Problem, n_traj: int, seed: int, nonlinear: bool = True, threads: int = 1,
             chunk: int = 256) -> Solution:
    """Monte-Carlo average of pseudomode SSE trajectories (Ito, white noise)."""
    if not problem.bath.pseudomode_ok:
        raise UnsupportedModelError("psse requires f_j = g_j for all modes")
    if n_traj < 1:
        raise ModelDomainError("at least one trajectory is required")
    ctx = problem.context()
    psi0 = vacuum_embed(problem.psi0 / np.linalg.norm(problem.psi0), ctx.basis)
    args = kernel_args(ctx)
    F, Gc, D = substep_tables(ctx, problem.T, problem.n_steps)
    thermal = None
    if problem.bath.thermal_cov is not None:
        thermal = real_factor(problem.bath.thermal_cov, np.arange(problem.n_steps) * problem.h)
    N = problem.bath.n_modes

    def work(a, b):
        incr = np.empty((problem.n_steps, N, b - a), dtype=complex)
        ystep = np.zeros((problem.n_steps, b - a))
        for i, k in enumerate(range(a, b)):
            rng = substream(seed, k)
            incr[:, :, i] = complex_normal(rng, (problem.n_steps, N)) * np.sqrt(problem.h)
            if thermal is not None:
                ystep[:, i] = thermal.factor @ rng.standard_normal(thermal.rank)
        return _kernels.psse_trajectories(
            psi0, *args, ctx.rates, F, Gc, D, incr, ystep, problem.h, problem.store_every, nonlinear
        )

    results = _run_chunks(work, n_traj, chunk, threads)
    method = "psse-nonlinear" if nonlinear else "psse-linear"
    return _collect(problem, method, results, lambda acc, rho: acc.add_densities(rho))


def solve(problem: Problem, method: str, n_traj: int = 1, seed: int = 0, threads: int = 1, **kw) -> Solution:
    """Dispatch by method name."""
    if method in ("hme", "pme"):
        return solve_density(problem, method)
    if method in ("hops-linear", "hops-nonlinear"):
        return run_hops(problem, n_traj, seed, nonlinear=method.endswith("nonlinear"), threads=threads, **kw)
    if method in ("psse-linear", "psse-nonlinear"):
        return run_psse(problem, n_traj, seed, nonlinear=method.endswith("nonlinear"), threads=threads, **kw)
    raise ModelDomainError(f"unknown method {method!r}; expected one of {', '.join(METHODS)}")
