"""Right-hand sides of the four dynamical formulations and the fixed-step integrator.

The functions here are straightforward numpy transcriptions of the
equations of motion.  They are used directly by :func:`propagate` and
serve as the reference the compiled kernels in :mod:`nshops._kernels`
are tested against.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .bcf import BathModel, SystemModel
from .exceptions import (
    DegenerateTrajectoryError,
    ModelDomainError,
    NumericalError,
    UnsupportedModelError,
)
from .fock import FockBasis, apply_annihilation, apply_creation, project_vacuum

log = logging.getLogger(__name__)

VACUUM_NORM_FLOOR = 1e-30


@dataclass(eq=False)
class EffectiveHamiltonianContext:
    """System, bath and truncated basis, plus the index tables the kernels need."""

    system: SystemModel
    bath: BathModel
    basis: FockBasis
    damp: np.ndarray = field(init=False, repr=False)
    kappa: np.ndarray = field(init=False, repr=False)
    squp: np.ndarray = field(init=False, repr=False)
    sqdn: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.basis.n_modes != self.bath.n_modes:
            raise ModelDomainError(
                f"basis has {self.basis.n_modes} modes but bath model has {self.bath.n_modes}"
            )
        rates = self.bath.rates
        occ = self.basis.indices.astype(float)
        self.damp = occ @ rates
        self.kappa = np.sqrt(rates / 2)
        self.squp = np.where(self.basis.up >= 0, np.sqrt(occ + 1), 0.0)
        self.sqdn = np.where(self.basis.down >= 0, np.sqrt(occ), 0.0)

    @property
    def rates(self) -> np.ndarray:
        return self.bath.rates

    @property
    def d_system(self) -> int:
        return self.system.dim

    @property
    def dim(self) -> int:
        return self.system.dim * len(self.basis)

    def coefficients(self, t):
        F, G = self.bath.coefficients(np.asarray(t, dtype=float))
        return F, np.conj(G), self.bath.drive_values(t)

    # dense operators on the flat extended space, built lazily for the
    # reference density-matrix right-hand sides
    def dense_ops(self):
        if not hasattr(self, "_dense"):
            K, dS = len(self.basis), self.system.dim
            eye = np.eye(K * dS, dtype=complex).reshape(K * dS, K, dS)
            C = [apply_annihilation(self.basis, j, eye).reshape(K * dS, K * dS).T
                 for j in range(self.basis.n_modes)]
            I_K = np.eye(K)
            self._dense = {
                "C": C,
                "L": np.kron(I_K, self.system.coupling),
                "H": np.kron(I_K, self.system.hamiltonian),
                "N": np.diag(np.repeat(self.damp, dS)).astype(complex),
            }
        return self._dense


# --------------------------------------------------------------------------
# pure states
# --------------------------------------------------------------------------


def _system_op(M, psi):
    # (..., K, dS) <- M acting on every system block
    return psi @ M.T


def apply_effective_hamiltonian(ctx: EffectiveHamiltonianContext, t: float, psi: np.ndarray) -> np.ndarray:
    """``H_eff(t) psi`` without building the operator."""
    F, Gc, drive = ctx.coefficients(t)
    Lpsi = _system_op(ctx.system.coupling, psi)
    out = _system_op(ctx.system.hamiltonian, psi) + drive * Lpsi
    for j in range(ctx.bath.n_modes):
        out = out + ctx.kappa[j] * (
            F[j] * apply_annihilation(ctx.basis, j, Lpsi) + Gc[j] * apply_creation(ctx.basis, j, Lpsi)
        )
    return out


def _damping(ctx, psi):
    return -ctx.damp[:, None] * psi


def hops_linear_rhs(ctx: EffectiveHamiltonianContext, t: float, zc: complex, psi: np.ndarray) -> np.ndarray:
    """Linear HOPS: ``-sum Gamma_j n_j psi - i H_eff psi - i Z* L psi``.

    ``zc`` is the value of ``Z*(t)`` (plus any real thermal noise).
    """
    noise = -1j * zc * _system_op(ctx.system.coupling, psi)
    return _damping(ctx, psi) - 1j * apply_effective_hamiltonian(ctx, t, psi) + noise


def girsanov_L(psi: np.ndarray, L: np.ndarray) -> float:
    """Normalized expectation of ``L`` in the vacuum block of ``psi``."""
    phys = project_vacuum(psi)
    norm = float(np.vdot(phys, phys).real)
    if not norm > VACUUM_NORM_FLOOR:
        raise DegenerateTrajectoryError(f"vacuum norm {norm:.3e} below {VACUUM_NORM_FLOOR:g}")
    return float(np.vdot(phys, L @ phys).real) / norm


def memory_rhs(bath: BathModel, t: float, L_val: float, m: np.ndarray) -> np.ndarray:
    """``dm_j/dt = -Gamma_j m_j + (Gamma_j/2) g_j*(t) L(t)``.

    ``sum_j f_j(t) m_j(t)`` then equals ``int_0^t alpha(t, s) L(s) ds``.
    """
    _, G = bath.coefficients(t)
    rates = bath.rates
    return -rates * m + 0.5 * rates * np.conj(G) * L_val


def memory_shift(bath: BathModel, t: float, m: np.ndarray) -> complex:
    F, _ = bath.coefficients(t)
    return complex(np.sum(F * m))


def hops_nonlinear_rhs(ctx: EffectiveHamiltonianContext, t: float, zc: complex, m: np.ndarray,
                       psi: np.ndarray):
    """Girsanov-transformed HOPS; returns ``(dpsi/dt, dm/dt)``.

    The shifted noise is ``Z~* = Z* + i conj(sum_j f_j m_j)``.
    """
    Lt = girsanov_L(psi, ctx.system.coupling)
    F, _, _ = ctx.coefficients(t)
    shifted = zc + 1j * np.conj(memory_shift(ctx.bath, t, m))
    dpsi = hops_linear_rhs(ctx, t, shifted, psi)
    for j in range(ctx.bath.n_modes):
        dpsi = dpsi + 1j * Lt * ctx.kappa[j] * F[j] * apply_annihilation(ctx.basis, j, psi)
    return dpsi, memory_rhs(ctx.bath, t, Lt, m)


def psse_rhs(ctx: EffectiveHamiltonianContext, t: float, psi: np.ndarray, increments=None,
             nonlinear: bool = False):
    """Pseudomode SSE split into ``(drift, noise)``.

    ``drift`` is the deterministic derivative (including the Girsanov shift
    ``sum_j 2 Gamma_j <c_j^+> c_j psi`` for the nonlinear equation) and
    ``noise`` is ``sum_j sqrt(2 Gamma_j) dS_j* c_j psi`` for the given Wiener
    increments (zero if ``increments`` is None).
    """
    if not ctx.bath.pseudomode_ok:
        raise UnsupportedModelError("psse requires f_j = g_j for all modes")
    drift = _damping(ctx, psi) - 1j * apply_effective_hamiltonian(ctx, t, psi)
    noise = np.zeros_like(drift)
    norm2 = float(np.vdot(psi, psi).real)
    for j in range(ctx.bath.n_modes):
        cpsi = apply_annihilation(ctx.basis, j, psi)
        if nonlinear:
            c_dag = np.vdot(cpsi, psi) / norm2
            drift = drift + 2 * ctx.rates[j] * c_dag * cpsi
        if increments is not None:
            noise = noise + np.sqrt(2 * ctx.rates[j]) * np.conj(increments[j]) * cpsi
    return drift, noise


# --------------------------------------------------------------------------
# extended density matrices
# --------------------------------------------------------------------------


def heff_matrix(ctx: EffectiveHamiltonianContext, t: float) -> np.ndarray:
    ops = ctx.dense_ops()
    F, Gc, drive = ctx.coefficients(t)
    H = ops["H"] + drive * ops["L"]
    for j, C in enumerate(ops["C"]):
        H = H + ctx.kappa[j] * (F[j] * C + Gc[j] * C.conj().T) @ ops["L"]
    return H


def hme_rhs(ctx: EffectiveHamiltonianContext, t: float, rho: np.ndarray) -> np.ndarray:
    """Hierarchy of master equations for the extended density matrix (flat ``d x d``)."""
    ops = ctx.dense_ops()
    H = heff_matrix(ctx, t)
    F, _, _ = ctx.coefficients(t)
    L, N = ops["L"], ops["N"]
    out = -(N @ rho + rho @ N) - 1j * H @ rho + 1j * rho @ H.conj().T
    for j, C in enumerate(ops["C"]):
        out -= 1j * ctx.kappa[j] * (np.conj(F[j]) * L @ rho @ C.conj().T - F[j] * C @ rho @ L)
    return out


def pme_rhs(ctx: EffectiveHamiltonianContext, t: float, rho: np.ndarray) -> np.ndarray:
    """Pseudomode master equation (Lindblad form) for the flat ``d x d`` matrix."""
    if not ctx.bath.pseudomode_ok:
        raise UnsupportedModelError("pme requires f_j = g_j for all modes")
    ops = ctx.dense_ops()
    H = heff_matrix(ctx, t)
    out = -1j * (H @ rho - rho @ H)
    for j, C in enumerate(ops["C"]):
        Cd = C.conj().T
        n = Cd @ C
        out += ctx.rates[j] * (2 * C @ rho @ Cd - n @ rho - rho @ n)
    return out


# --------------------------------------------------------------------------
# integration
# --------------------------------------------------------------------------


def rk4_step(rhs: Callable, t: float, h: float, y):
    """Classical fourth-order Runge-Kutta step for ``dy/dt = rhs(t, y)``."""
    if not h > 0:
        raise ModelDomainError("step size must be positive")
    k1 = rhs(t, y)
    k2 = rhs(t + h / 2, y + h / 2 * k1)
    k3 = rhs(t + h / 2, y + h / 2 * k2)
    k4 = rhs(t + h, y + h * k3)
    return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def propagate(rhs: Callable, y0, T: float, n_steps: int, store_every: int = 1,
              observer: Optional[Callable] = None, post_step: Optional[Callable] = None):
    """Fixed-step RK4 from ``t = 0`` to ``T``.

    ``post_step(n, t_new, y_old, y_new)`` may return a modified ``y_new``;
    stochastic problems use it to add the step's noise contribution once
    after the deterministic update.  ``observer(t, y)`` is sampled at
    ``t = 0`` and every ``store_every`` steps.

    Returns ``(times, observations)``.
    """
    if n_steps % store_every:
        raise ModelDomainError("store_every must divide n_steps")
    observer = observer or (lambda t, y: np.array(y, copy=True))
    h = T / n_steps
    y = y0
    times, obs = [0.0], [observer(0.0, y)]
    for n in range(n_steps):
        t = n * h
        y_new = rk4_step(rhs, t, h, y)
        if post_step is not None:
            y_new = post_step(n, (n + 1) * h, y, y_new)
        if not np.all(np.isfinite(np.asarray(y_new, dtype=complex))):
            raise NumericalError(f"non-finite state after step {n + 1} (t={(n + 1) * h:.6g})")
        y = y_new
        if (n + 1) % store_every == 0:
            times.append((n + 1) * h)
            obs.append(observer((n + 1) * h, y))
    return np.array(times), obs


# --------------------------------------------------------------------------
# kernel argument packing
# --------------------------------------------------------------------------


def substep_tables(ctx: EffectiveHamiltonianContext, T: float, n_steps: int):
    """f_j, conj(g_j) and drive at (t_n, t_n + h/2, t_n + h) for every step."""
    h = T / n_steps
    n = np.arange(n_steps)[:, None]
    times = np.concatenate([n * h, (n + 0.5) * h, (n + 1) * h], axis=1)
    F, Gc, drive = ctx.coefficients(times)
    return (np.ascontiguousarray(F), np.ascontiguousarray(Gc),
            np.ascontiguousarray(drive, dtype=float))


def kernel_args(ctx: EffectiveHamiltonianContext):
    """Static arrays shared by every compiled kernel call."""
    return (
        np.ascontiguousarray(ctx.system.hamiltonian),
        np.ascontiguousarray(ctx.system.coupling),
        ctx.damp,
        ctx.kappa,
        np.ascontiguousarray(ctx.basis.up),
        np.ascontiguousarray(ctx.basis.down),
        ctx.squp,
        ctx.sqdn,
    )
