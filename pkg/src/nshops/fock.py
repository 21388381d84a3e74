"""Pseudo-Fock space of the effective bath modes.

Extended states are stored as complex arrays of shape ``(..., K, d_S)``
where ``K`` is the number of multi-indices in the truncated basis.  The
system index is the fastest-varying one, so ``psi.reshape(..., K * d_S)``
is the flat extended vector and system operators act on contiguous blocks.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import comb, prod

import numpy as np

from .exceptions import CapacityError, ModelDomainError

DEFAULT_CAPACITY = 10**7


@dataclass(frozen=True)
class Rectangular:
    """Per-mode truncation ``0 <= n_j <= nmax[j]``."""

    nmax: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "nmax", tuple(int(n) for n in self.nmax))
        if len(self.nmax) == 0:
            raise ModelDomainError("rectangular truncation needs at least one mode")
        if any(n < 0 for n in self.nmax):
            raise ModelDomainError(f"nmax entries must be >= 0, got {self.nmax}")

    @property
    def n_modes(self) -> int:
        return len(self.nmax)

    def size(self) -> int:
        return prod(n + 1 for n in self.nmax)

    def admits(self, n) -> bool:
        return all(0 <= k <= m for k, m in zip(n, self.nmax))


@dataclass(frozen=True)
class Triangular:
    """Total-occupation truncation ``n_1 + ... + n_N <= nsum``."""

    nsum: int
    n_modes: int

    def __post_init__(self):
        object.__setattr__(self, "nsum", int(self.nsum))
        object.__setattr__(self, "n_modes", int(self.n_modes))
        if self.nsum < 0:
            raise ModelDomainError(f"nsum must be >= 0, got {self.nsum}")
        if self.n_modes < 1:
            raise ModelDomainError(f"need at least one mode, got {self.n_modes}")

    def size(self) -> int:
        return comb(self.nsum + self.n_modes, self.nsum)

    def admits(self, n) -> bool:
        return min(n) >= 0 and sum(n) <= self.nsum


TruncationScheme = Rectangular | Triangular


@dataclass(frozen=True, eq=False)
class FockBasis:
    """Enumerated multi-indices of a truncated pseudo-Fock space.

    Attributes
    ----------
    indices : ndarray of int, shape (K, N)
        Multi-indices in lexicographic order; row 0 is the vacuum.
    up, down : ndarray of int, shape (K, N)
        Flat position of ``n + e_j`` / ``n - e_j``, or ``-1`` if that
        multi-index is outside the basis.
    """

    scheme: TruncationScheme
    indices: np.ndarray
    flat_of: dict = field(repr=False)
    up: np.ndarray = field(repr=False)
    down: np.ndarray = field(repr=False)

    @property
    def n_modes(self) -> int:
        return self.indices.shape[1]

    def __len__(self) -> int:
        return self.indices.shape[0]

    def occupation(self, j: int) -> np.ndarray:
        return self.indices[:, self._check_mode(j)]

    def _check_mode(self, j: int) -> int:
        if not 0 <= j < self.n_modes:
            raise ModelDomainError(f"mode index {j} outside 0..{self.n_modes - 1}")
        return j

    def dimension(self, d_system: int) -> int:
        """Hilbert-space dimension of system plus truncated modes."""
        return d_system * len(self)

    def boundary_mask(self) -> np.ndarray:
        """True for multi-indices with at least one neighbour ``n + e_j`` missing."""
        return (self.up < 0).any(axis=1)


def build_basis(scheme: TruncationScheme, capacity: int = DEFAULT_CAPACITY) -> FockBasis:
    """Enumerate the truncated pseudo-Fock basis for ``scheme``.

    Raises
    ------
    CapacityError
        If the number of basis states exceeds ``capacity``.
    """
    size = scheme.size()
    if size > capacity:
        raise CapacityError(f"basis of {size} states exceeds capacity {capacity}")

    if isinstance(scheme, Rectangular):
        ranges = [range(n + 1) for n in scheme.nmax]
        idx = list(itertools.product(*ranges))
    elif isinstance(scheme, Triangular):
        idx = [
            n
            for n in itertools.product(range(scheme.nsum + 1), repeat=scheme.n_modes)
            if sum(n) <= scheme.nsum
        ]
    else:
        raise TypeError(f"unknown truncation scheme {scheme!r}")

    indices = np.array(idx, dtype=np.int64).reshape(len(idx), -1)
    flat_of = {n: k for k, n in enumerate(idx)}
    n_modes = indices.shape[1]
    up = np.full((len(idx), n_modes), -1, dtype=np.int64)
    down = np.full((len(idx), n_modes), -1, dtype=np.int64)
    for k, n in enumerate(idx):
        for j in range(n_modes):
            shifted = n[:j] + (n[j] + 1,) + n[j + 1 :]
            up[k, j] = flat_of.get(shifted, -1)
            if n[j] > 0:
                down[k, j] = flat_of[n[:j] + (n[j] - 1,) + n[j + 1 :]]
    for a in (indices, up, down):
        a.setflags(write=False)
    return FockBasis(scheme, indices, flat_of, up, down)


def apply_annihilation(basis: FockBasis, j: int, psi: np.ndarray) -> np.ndarray:
    """Apply ``c_j`` to extended state(s) ``psi`` of shape ``(..., K, d_S)``.

    The amplitude at ``n`` becomes ``sqrt(n_j + 1)`` times the amplitude at
    ``n + e_j``, or zero when ``n + e_j`` is truncated away.
    """
    j = basis._check_mode(j)
    psi = np.asarray(psi)
    _check_state(basis, psi)
    up = basis.up[:, j]
    ok = up >= 0
    out = np.zeros(psi.shape, dtype=np.result_type(psi, complex))
    weight = np.sqrt(basis.indices[ok, j] + 1.0)[:, None]
    out[..., ok, :] = weight * psi[..., up[ok], :]
    return out


def apply_creation(basis: FockBasis, j: int, psi: np.ndarray) -> np.ndarray:
    """Apply ``c_j^dagger``; amplitudes pushed past the truncation are dropped."""
    j = basis._check_mode(j)
    psi = np.asarray(psi)
    _check_state(basis, psi)
    down = basis.down[:, j]
    ok = down >= 0
    out = np.zeros(psi.shape, dtype=np.result_type(psi, complex))
    weight = np.sqrt(basis.indices[ok, j].astype(float))[:, None]
    out[..., ok, :] = weight * psi[..., down[ok], :]
    return out


def vacuum_embed(psi_system, basis: FockBasis) -> np.ndarray:
    """Return ``psi_system (x) |0>`` as an array of shape ``(K, d_S)``."""
    psi_system = np.asarray(psi_system, dtype=complex)
    if psi_system.ndim != 1:
        raise ModelDomainError(f"system state must be a vector, got shape {psi_system.shape}")
    if not np.all(np.isfinite(psi_system)):
        raise ModelDomainError("system state has non-finite entries")
    out = np.zeros((len(basis), psi_system.shape[0]), dtype=complex)
    out[0] = psi_system
    return out


def project_vacuum(psi: np.ndarray) -> np.ndarray:
    """The system block at multi-index ``0`` (the physical state)."""
    return np.asarray(psi)[..., 0, :]


def _check_state(basis: FockBasis, psi: np.ndarray) -> None:
    if psi.ndim < 2 or psi.shape[-2] != len(basis):
        raise ModelDomainError(
            f"state shape {psi.shape} incompatible with basis of {len(basis)} states"
        )
