"""Ensemble reduction of trajectories and reduced-state observables."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PAULI = {
    "sx": np.array([[0, 1], [1, 0]], dtype=complex),
    "sy": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "sz": np.array([[1, 0], [0, -1]], dtype=complex),
}
# basis order is (|e>, |g>)
SIGMA_PLUS = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_MINUS = SIGMA_PLUS.T.copy()


@dataclass
class ObservableSet:
    """Named Hermitian system operators tracked per trajectory."""

    ops: dict

    def __post_init__(self):
        for name, op in self.ops.items():
            op = np.asarray(op, dtype=complex)
            if np.max(np.abs(op - op.conj().T)) > 1e-12:
                raise ValueError(f"observable {name!r} is not Hermitian")
            self.ops[name] = op

    @property
    def names(self):
        return tuple(self.ops)

    @classmethod
    def pauli(cls):
        return cls(dict(PAULI))

    def evaluate(self, rho):
        """``Tr(O rho)`` for every operator, shape ``(n_obs,) + rho.shape[:-2]``."""
        return np.stack([np.einsum("ab,...ba->...", op, rho).real for op in self.ops.values()])


@dataclass(frozen=True)
class BlochObserver:
    """Bloch components of a two-level series on a fixed time grid."""

    times: np.ndarray
    omega0: float

    names = ("sx", "sy", "sz", "sx_rot", "sy_rot")

    def evaluate(self, rho):
        cols = bloch_observables(rho, self.times, self.omega0)
        return np.stack([cols[n] for n in self.names])


@dataclass
class EnsembleAccumulator:
    """Running sums over trajectories at the stored times.

    Trajectories are added one at a time in the order given, so two
    accumulators filled with the same sequence are bit-identical.
    """

    grid: np.ndarray
    d_system: int
    observables: ObservableSet | BlochObserver | None = None
    count: int = 0
    discarded: int = 0
    sum_rho: np.ndarray = field(default=None, repr=False)
    sum_sq_re: np.ndarray = field(default=None, repr=False)
    sum_sq_im: np.ndarray = field(default=None, repr=False)
    obs_sum: np.ndarray = field(default=None, repr=False)
    obs_sq: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        shape = (self.grid.size, self.d_system, self.d_system)
        if self.sum_rho is None:
            self.sum_rho = np.zeros(shape, dtype=complex)
            self.sum_sq_re = np.zeros(shape)
            self.sum_sq_im = np.zeros(shape)
        n_obs = len(self.observables.names) if self.observables else 0
        if self.obs_sum is None:
            self.obs_sum = np.zeros((n_obs, self.grid.size))
            self.obs_sq = np.zeros((n_obs, self.grid.size))

    def add_densities(self, rhos: np.ndarray) -> "EnsembleAccumulator":
        """Add per-trajectory reduced matrices, shape ``(M, n_t, d, d)``."""
        rhos = np.asarray(rhos)
        if rhos.shape[1:] != self.sum_rho.shape:
            raise ValueError(f"trajectory block {rhos.shape[1:]} does not match {self.sum_rho.shape}")
        for rho in rhos:
            self.sum_rho += rho
            self.sum_sq_re += rho.real**2
            self.sum_sq_im += rho.imag**2
            if self.observables:
                vals = self.observables.evaluate(rho)
                self.obs_sum += vals
                self.obs_sq += vals**2
            self.count += 1
        return self

    def merge(self, other: "EnsembleAccumulator") -> "EnsembleAccumulator":
        if other.sum_rho.shape != self.sum_rho.shape or not np.array_equal(other.grid, self.grid):
            raise ValueError("cannot merge accumulators on different grids")
        return EnsembleAccumulator(
            self.grid,
            self.d_system,
            self.observables,
            self.count + other.count,
            self.discarded + other.discarded,
            self.sum_rho + other.sum_rho,
            self.sum_sq_re + other.sum_sq_re,
            self.sum_sq_im + other.sum_sq_im,
            self.obs_sum + other.obs_sum,
            self.obs_sq + other.obs_sq,
        )

    def mean(self) -> np.ndarray:
        if self.count == 0:
            raise ValueError("empty ensemble")
        return self.sum_rho / self.count

    def observable_means(self) -> dict:
        names = self.observables.names if self.observables else []
        return {n: self.obs_sum[i] / self.count for i, n in enumerate(names)}

    def observable_errors(self) -> dict:
        names = self.observables.names if self.observables else []
        return {n: _se(self.obs_sum[i], self.obs_sq[i], self.count) for i, n in enumerate(names)}


def _se(s, sq, n):
    if n < 2:
        return np.full(np.shape(s), np.nan)
    var = (sq - s * s / n) / (n - 1)
    return np.sqrt(np.maximum(var, 0.0) / n)


def accumulate_linear(acc: EnsembleAccumulator, states: np.ndarray) -> EnsembleAccumulator:
    """Add ``|psi><psi|`` for physical states of shape ``(M, n_t, d)``."""
    states = np.asarray(states)
    return acc.add_densities(states[..., :, None] * states[..., None, :].conj())


def accumulate_normalized(acc: EnsembleAccumulator, states: np.ndarray) -> EnsembleAccumulator:
    """Add ``|psi><psi| / <psi|psi>``; each trajectory contributes unit trace."""
    states = np.asarray(states)
    norm = np.sum(np.abs(states) ** 2, axis=-1)
    rho = states[..., :, None] * states[..., None, :].conj() / norm[..., None, None]
    return acc.add_densities(rho)


def standard_error(acc: EnsembleAccumulator):
    """Entrywise standard errors ``(se_re, se_im)`` of the mean; NaN when count < 2."""
    s = acc.sum_rho
    return _se(s.real, acc.sum_sq_re, acc.count), _se(s.imag, acc.sum_sq_im, acc.count)


def reduce_hme(rho: np.ndarray, d_system: int) -> np.ndarray:
    """Vacuum block ``<0| rho |0>`` of a flat extended density matrix."""
    return np.asarray(rho)[..., :d_system, :d_system].copy()


def reduce_pme(rho: np.ndarray, d_system: int) -> np.ndarray:
    """Trace over all pseudo-Fock states: ``sum_n <n| rho' |n>``."""
    rho = np.asarray(rho)
    K = rho.shape[-1] // d_system
    blocks = rho.reshape(rho.shape[:-2] + (K, d_system, K, d_system))
    return np.einsum("...kakb->...ab", blocks)


def bloch_observables(rho: np.ndarray, times, omega0: float) -> dict:
    """Lab-frame Bloch components and rotating-frame transverse components.

    ``sx_rot = <s+> e^{-i w0 t} + c.c.`` and ``sy_rot = -i <s+> e^{-i w0 t} + c.c.``
    """
    rho = np.asarray(rho)
    times = np.asarray(times, dtype=float)
    splus = np.einsum("ab,...ba->...", SIGMA_PLUS, rho)
    rot = splus * np.exp(-1j * omega0 * times)
    out = {name: np.einsum("ab,...ba->...", op, rho).real for name, op in PAULI.items()}
    out["sx_rot"] = 2 * rot.real
    out["sy_rot"] = 2 * rot.imag
    return out
