"""Stochastic drivers: colored bath noise, OU processes, white noise, thermal noise.

Every trajectory ``k`` of a run draws from its own stream
``substream(master_seed, k)`` so results do not depend on how trajectories
are batched or scheduled.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.signal import lfilter

from .bcf import BathModel, bcf_matrix
from .exceptions import InvalidBCFError, ModelDomainError, UnsupportedModelError

log = logging.getLogger(__name__)

NEGATIVE_EIG_TOL = 1e-6
# relative size of deviations treated as floating-point noise in covariance checks
ROUNDOFF = 1e-12


def substream(master_seed: int, k: int) -> np.random.Generator:
    """Independent generator for trajectory ``k`` of a run seeded with ``master_seed``."""
    return np.random.default_rng(np.random.SeedSequence(int(master_seed), spawn_key=(int(k),)))


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Circular complex Gaussians with ``E[x x*] = 1`` and ``E[x x] = 0``."""
    shape = (shape,) if np.isscalar(shape) else tuple(shape)
    xy = rng.standard_normal(shape + (2,))
    return (xy[..., 0] + 1j * xy[..., 1]) * np.sqrt(0.5)


@dataclass(frozen=True)
class NoisePath:
    grid: np.ndarray
    samples: np.ndarray

    def __post_init__(self):
        if self.grid.shape != self.samples.shape:
            raise ModelDomainError("noise path grid and samples differ in length")


@dataclass(frozen=True)
class EigenFactor:
    """Factorization ``C = F F^dagger`` of a discretized covariance matrix.

    ``factor`` has shape ``(M_g, K)`` with columns ``sqrt(lambda_k) Y^(k)``;
    ``clipped_mass`` is the magnitude of negative eigenvalues that were set
    to zero, relative to the trace.
    """

    grid: np.ndarray
    factor: np.ndarray
    eigenvalues: np.ndarray
    clipped_mass: float

    @property
    def rank(self) -> int:
        return self.factor.shape[1]


def eigen_factor(matrix: np.ndarray, grid, energy_threshold: Optional[float] = None) -> EigenFactor:
    """Diagonalize a Hermitian (or real symmetric) covariance matrix.

    Eigenvalues more negative than ``-1e-6 * max(diag)`` mean the matrix is
    not a valid covariance and raise :class:`InvalidBCFError`; smaller
    negative values are round-off and clipped to zero.  With
    ``energy_threshold`` (e.g. ``1e-10``) only the leading eigenvectors
    carrying a ``1 - energy_threshold`` fraction of the trace are kept.
    """
    matrix = np.asarray(matrix)
    scale = float(np.max(np.abs(np.diag(matrix)), initial=0.0))
    if scale == 0.0:
        grid = np.asarray(grid, dtype=float)
        return EigenFactor(grid, np.zeros((matrix.shape[0], 0), dtype=matrix.dtype), np.zeros(0), 0.0)
    lam, vec = np.linalg.eigh(matrix)
    if lam[0] < -NEGATIVE_EIG_TOL * scale:
        raise InvalidBCFError(
            f"covariance matrix has eigenvalue {lam[0]:.3e} below -{NEGATIVE_EIG_TOL:g} x max diagonal"
        )
    neg = lam < 0
    trace = float(np.sum(lam[~neg]))
    clipped = float(-np.sum(lam[neg])) / trace if trace > 0 else 0.0
    lam = np.where(neg, 0.0, lam)
    order = np.argsort(lam)[::-1]
    lam, vec = lam[order], vec[:, order]
    keep = lam > 0
    if energy_threshold is not None and trace > 0:
        cum = np.cumsum(lam) / trace
        n_keep = int(np.searchsorted(cum, 1.0 - energy_threshold) + 1)
        keep &= np.arange(lam.size) < n_keep
    lam, vec = lam[keep], vec[:, keep]
    factor = vec * np.sqrt(lam)[None, :]
    return EigenFactor(np.asarray(grid, dtype=float), factor, lam, clipped)


def bcf_factor(model: BathModel, grid, energy_threshold: Optional[float] = None) -> EigenFactor:
    """Eigen-factorization of the BCF matrix ``alpha(t_n, t_m)`` on ``grid``."""
    grid = np.asarray(grid, dtype=float)
    fac = eigen_factor(bcf_matrix(model, grid), grid, energy_threshold)
    if fac.clipped_mass:
        log.debug("clipped eigenvalue mass %.3e of trace", fac.clipped_mass)
    return fac


def draw_from_factor(fac: EigenFactor, rng: np.random.Generator) -> np.ndarray:
    """One complex path ``Z(t_n) = sum_k sqrt(lambda_k) Y_n^(k) eps_k``."""
    eps = complex_normal(rng, fac.rank)
    return fac.factor @ eps


def sample_noise_eigen(model: BathModel, grid, rng: np.random.Generator, count: int,
                       energy_threshold: Optional[float] = None) -> list[NoisePath]:
    """Sample ``count`` paths of the colored noise ``Z`` by BCF diagonalization."""
    grid = np.asarray(grid, dtype=float)
    if grid.size < 1:
        raise ModelDomainError("noise grid must contain at least one point")
    fac = bcf_factor(model, grid, energy_threshold)
    eps = complex_normal(rng, (fac.rank, count))
    Z = fac.factor @ eps
    return [NoisePath(grid, Z[:, i].copy()) for i in range(count)]


# --------------------------------------------------------------------------
# Ornstein-Uhlenbeck route (f_j = g_j)
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class OUState:
    """Per-mode OU values ``z_j``; ``z`` may carry leading batch axes."""

    z: np.ndarray
    rates: np.ndarray


def _check_rates(rates) -> np.ndarray:
    rates = np.atleast_1d(np.asarray(rates, dtype=float))
    if np.any(~(rates > 0)):
        raise ModelDomainError(f"OU rates must be positive, got {rates}")
    return rates


def ou_init(rates, rng: np.random.Generator) -> OUState:
    """Stationary start ``z_j(0) = xi_j sqrt(Gamma_j / 2)``."""
    rates = _check_rates(rates)
    xi = complex_normal(rng, rates.shape)
    return OUState(xi * np.sqrt(rates / 2), rates)


def white_noise_increment(rng: np.random.Generator, dt: float, n_modes: int = 1) -> np.ndarray:
    """Complex Wiener increments with ``E[dW dW*] = dt`` and ``E[dW dW] = 0``."""
    if dt < 0:
        raise ModelDomainError("dt must be non-negative")
    return complex_normal(rng, n_modes) * np.sqrt(dt)


def ou_step(state: OUState, dt: float, rng: Optional[np.random.Generator] = None,
            increment: Optional[np.ndarray] = None) -> OUState:
    """Euler-Maruyama update ``z <- z - Gamma z dt + Gamma dW``.

    Pass either a generator or a pre-drawn ``increment`` (same shape as ``z``).
    """
    if not dt > 0:
        raise ModelDomainError("dt must be positive")
    if increment is None:
        increment = complex_normal(rng, state.z.shape) * np.sqrt(dt)
    z = state.z - state.rates * state.z * dt + state.rates * increment
    return OUState(z, state.rates)


def ou_path(rates, n_steps: int, dt: float, rng: np.random.Generator) -> np.ndarray:
    """OU values on ``n_steps + 1`` grid points, shape ``(n_steps + 1, N)``.

    Same recursion as :func:`ou_step`, evaluated as a first-order linear
    filter.  Draw order (initial values, then one increment block) is fixed
    so a path is reproducible from its stream alone.
    """
    state = ou_init(rates, rng)
    if not dt > 0:
        raise ModelDomainError("dt must be positive")
    dW = complex_normal(rng, (n_steps, state.rates.size)) * np.sqrt(dt)
    x = np.empty((n_steps + 1, state.rates.size), dtype=complex)
    x[0] = state.z
    x[1:] = state.rates * dW
    out = np.empty_like(x)
    for j, g in enumerate(state.rates):
        out[:, j] = lfilter([1.0], [1.0, -(1.0 - g * dt)], x[:, j])
    return out


def assemble_Z_from_ou(model: BathModel, state: OUState, t) -> np.ndarray:
    """``Z(t) = sum_j f_j(t) z_j(t)``; valid only when every mode has ``f_j = g_j``."""
    if not model.pseudomode_ok:
        raise UnsupportedModelError("OU noise assembly requires f_j = g_j for every mode")
    F, _ = model.coefficients(np.asarray(t, dtype=float))
    return np.sum(F * state.z, axis=-1)


# --------------------------------------------------------------------------
# real thermal noise
# --------------------------------------------------------------------------


def real_factor(cov, grid) -> EigenFactor:
    grid = np.asarray(grid, dtype=float)
    C = np.real(np.asarray(cov(grid[:, None], grid[None, :]), dtype=float))
    C = np.broadcast_to(C, (grid.size, grid.size))
    if np.max(np.abs(C - C.T), initial=0.0) > 1e-12 * max(1.0, float(np.max(np.abs(C), initial=0.0))):
        raise InvalidBCFError("thermal covariance is not symmetric")
    return eigen_factor(np.array(C), grid)


def sample_real_process(cov, grid, rng: np.random.Generator, count: int) -> np.ndarray:
    """Real zero-mean Gaussian paths with covariance ``cov(t, s)``, shape ``(count, M_g)``."""
    fac = real_factor(cov, grid)
    eps = rng.standard_normal((fac.rank, count))
    return (fac.factor @ eps).T


# --------------------------------------------------------------------------
# sampling on coarse grids and covariance validation
# --------------------------------------------------------------------------


def ou_sample(model: BathModel, grid, rng: np.random.Generator, count: int, dt: float) -> np.ndarray:
    """``count`` paths of ``Z`` on an equispaced ``grid`` via the OU route.

    The OU recursion runs with a fine step of at most ``dt`` and is read off
    at the grid points.  Returns shape ``(count, M_g)``.
    """
    if not model.pseudomode_ok:
        raise UnsupportedModelError("OU noise requires f_j = g_j for all modes")
    grid = np.asarray(grid, dtype=float)
    if grid.size > 1:
        spacing = np.diff(grid)
        if np.max(np.abs(spacing - spacing[0])) > 1e-12 * max(1.0, abs(grid[-1])):
            raise ModelDomainError("OU sampling needs an equispaced grid")
        sub = max(1, int(np.ceil(spacing[0] / dt - 1e-9)))
        fine_dt = spacing[0] / sub
    else:
        sub, fine_dt = 1, dt
    rates = _check_rates(model.rates)
    n_fine = (grid.size - 1) * sub
    x = np.empty((count, n_fine + 1, rates.size), dtype=complex)
    x[:, 0] = complex_normal(rng, (count, rates.size)) * np.sqrt(rates / 2)
    x[:, 1:] = complex_normal(rng, (count, n_fine, rates.size)) * np.sqrt(fine_dt) * rates
    z = np.empty_like(x)
    for j, g in enumerate(rates):
        z[:, :, j] = lfilter([1.0], [1.0, -(1.0 - g * fine_dt)], x[:, :, j], axis=1)
    F, _ = model.coefficients(grid)
    return np.sum(F[None] * z[:, ::sub], axis=-1)


class CovarianceStats:
    """Streaming first and second moments of ``Z_n Z_m^*`` and ``Z_n Z_m``.

    Real and imaginary parts of every product are treated as separate
    sample means, each with its own standard error.
    """

    def __init__(self, n_points: int):
        shape = (n_points, n_points)
        self.count = 0
        self._sum = {k: np.zeros(shape) for k in ("cr", "ci", "pr", "pi")}
        self._sq = {k: np.zeros(shape) for k in ("cr", "ci", "pr", "pi")}
        self._mean = np.zeros(n_points, dtype=complex)

    def add(self, Z: np.ndarray) -> "CovarianceStats":
        Z = np.asarray(Z, dtype=complex)
        C = Z[:, :, None] * Z[:, None, :].conj()
        P = Z[:, :, None] * Z[:, None, :]
        for key, part in (("cr", C.real), ("ci", C.imag), ("pr", P.real), ("pi", P.imag)):
            self._sum[key] += part.sum(axis=0)
            self._sq[key] += (part**2).sum(axis=0)
        self._mean += Z.sum(axis=0)
        self.count += Z.shape[0]
        return self

    def _scale(self) -> float:
        return float(np.max(np.diag(self._sum["cr"]), initial=0.0)) / max(self.count, 1)

    def _moments(self, key):
        n = self.count
        mean = self._sum[key] / n
        var = np.maximum(self._sq[key] / n - mean**2, 0.0) * n / max(n - 1, 1)
        return mean, np.sqrt(var / n)

    @property
    def covariance(self) -> np.ndarray:
        return (self._sum["cr"] + 1j * self._sum["ci"]) / self.count

    @property
    def pseudo_covariance(self) -> np.ndarray:
        return (self._sum["pr"] + 1j * self._sum["pi"]) / self.count

    def zscores(self, analytic: np.ndarray) -> dict:
        """Max deviation in standard-error units for ``E[Z Z*]`` and ``E[Z Z]``."""
        analytic = np.asarray(analytic, dtype=complex)
        atol = ROUNDOFF * self._scale()
        out = {}
        for name, keys, target in (("covariance", ("cr", "ci"), analytic),
                                   ("pseudo_covariance", ("pr", "pi"), np.zeros_like(analytic))):
            worst = 0.0
            for key, ref in zip(keys, (target.real, target.imag)):
                mean, se = self._moments(key)
                worst = max(worst, _max_z(mean - ref, se, atol))
            out[name] = worst
        return out

    def cross_zscore(self, other: "CovarianceStats") -> float:
        """Max ``|C_1 - C_2| / sqrt(se_1^2 + se_2^2)`` over covariance entries."""
        worst = 0.0
        atol = ROUNDOFF * max(self._scale(), other._scale())
        for key in ("cr", "ci"):
            m1, s1 = self._moments(key)
            m2, s2 = other._moments(key)
            worst = max(worst, _max_z(m1 - m2, np.hypot(s1, s2), atol))
        return worst


def _max_z(diff, se, atol=0.0) -> float:
    diff = np.abs(diff)
    # agreement to round-off counts as zero even where the standard error vanishes
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(diff <= atol, 0.0, diff / se)
    return float(np.max(z, initial=0.0))


def ou_autocorrelation_check(rate: float, lags, rng: np.random.Generator, count: int, dt: float,
                             batch: int = 10000) -> list[tuple[float, float, float, float]]:
    """Sample a stationary OU mode and compare ``E[z(tau) z*(0)]`` with ``(rate/2) e^{-rate tau}``.

    Returns ``(lag, empirical, analytic, z)`` rows, with ``z`` the real-part
    deviation in standard errors.
    """
    rate = float(_check_rates([rate])[0])
    lags = np.asarray(lags, dtype=float)
    idx = np.rint(lags / dt).astype(int)
    if np.any(np.abs(idx * dt - lags) > 1e-9 * max(1.0, float(np.max(lags, initial=0.0)))):
        raise ModelDomainError("OU check lags must be multiples of dt")
    n_fine = int(np.max(idx, initial=0))
    s = np.zeros(lags.size)
    sq = np.zeros(lags.size)
    done = 0
    while done < count:
        m = min(batch, count - done)
        x = np.empty((m, n_fine + 1), dtype=complex)
        x[:, 0] = complex_normal(rng, m) * np.sqrt(rate / 2)
        x[:, 1:] = complex_normal(rng, (m, n_fine)) * np.sqrt(dt) * rate
        z = lfilter([1.0], [1.0, -(1.0 - rate * dt)], x, axis=1)
        prod = (z[:, idx] * np.conj(z[:, :1])).real
        s += prod.sum(axis=0)
        sq += (prod**2).sum(axis=0)
        done += m
    mean = s / count
    se = np.sqrt(np.maximum(sq / count - mean**2, 0.0) / (count - 1))
    analytic = 0.5 * rate * np.exp(-rate * lags)
    return [(float(t), float(e), float(a), _max_z(e - a, s_)) for t, e, a, s_ in zip(lags, mean, analytic, se)]
