"""Bath correlation functions of the form ``sum_j alpha_j(t-s) f_j(t) g_j(s)^*``.

All frequencies and rates share one reciprocal-time unit and hbar = 1.
Time coefficients are small frozen dataclasses evaluated on scalars or
numpy arrays; a bath model is a tuple of :class:`BathMode` plus optional
classical drive and thermal-noise covariance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .exceptions import ModelDomainError

HERMITIAN_TOL = 1e-12


# --------------------------------------------------------------------------
# time coefficients
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Stationary:
    """``amp * exp(-i freq t)``."""

    amp: complex
    freq: float

    def __call__(self, t):
        return self.amp * np.exp(-1j * self.freq * np.asarray(t, dtype=float))

    def to_dict(self):
        return {"type": "stationary", "amp": _cplx_out(self.amp), "freq": self.freq}


@dataclass(frozen=True)
class UniformSqueezed:
    """Bogoliubov-dressed oscillation

    ``amplitude * (u e^{-i(w0 t - phi/2)} - v e^{i(w0 t - phi/2)}) e^{-i detuning t}``

    with ``u = cosh(squeeze)`` and ``v = sinh(squeeze)``.  ``amplitude`` is
    the already-resolved square root of the coupling (``sqrt(gamma)`` for
    ``f``, ``sqrt(conj(gamma))`` for ``g``), principal branch.
    """

    amplitude: complex
    center: float
    squeeze: float = 0.0
    phase: float = 0.0
    detuning: float = 0.0

    @property
    def u(self) -> float:
        return math.cosh(self.squeeze)

    @property
    def v(self) -> float:
        return math.sinh(self.squeeze)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.squeeze == 0 and self.phase == 0 and self.detuning == 0:
            # same expression as Stationary so r = 0 runs are bit-identical to it
            return self.amplitude * np.exp(-1j * self.center * t)
        arg = self.center * t - self.phase / 2
        val = self.u * np.exp(-1j * arg) - self.v * np.exp(1j * arg)
        if self.detuning:
            val = val * np.exp(-1j * self.detuning * t)
        return self.amplitude * val

    def to_dict(self):
        return {
            "type": "uniform_squeezed",
            "amplitude": _cplx_out(self.amplitude),
            "center": self.center,
            "squeeze": self.squeeze,
            "phase": self.phase,
            "detuning": self.detuning,
        }


@dataclass(frozen=True)
class Harmonic:
    """``prefactor * cos(w0 t - phi/2)`` or the ``sin`` counterpart."""

    prefactor: float
    kind: str
    center: float
    phase: float = 0.0

    def __post_init__(self):
        if self.kind not in ("cos", "sin"):
            raise ModelDomainError(f"harmonic kind must be 'cos' or 'sin', got {self.kind!r}")

    def __call__(self, t):
        arg = self.center * np.asarray(t, dtype=float) - self.phase / 2
        trig = np.cos(arg) if self.kind == "cos" else np.sin(arg)
        return (self.prefactor * trig).astype(complex)

    def to_dict(self):
        return {
            "type": "harmonic",
            "prefactor": self.prefactor,
            "kind": self.kind,
            "center": self.center,
            "phase": self.phase,
        }


@dataclass(frozen=True, eq=False)
class Tabulated:
    """Piecewise-linear interpolation of sampled complex values."""

    grid: np.ndarray
    values: np.ndarray
    source: Optional[str] = None

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=complex)
        if grid.ndim != 1 or grid.shape != values.shape or grid.size < 2:
            raise ModelDomainError("tabulated coefficient needs matching 1-D grid/values (>= 2 points)")
        if np.any(np.diff(grid) <= 0):
            raise ModelDomainError("tabulated grid must be strictly increasing")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        lo, hi = self.grid[0], self.grid[-1]
        if np.any(t < lo - 1e-12 * max(1.0, abs(lo))) or np.any(t > hi + 1e-12 * max(1.0, abs(hi))):
            raise ModelDomainError(f"time outside tabulated window [{lo}, {hi}]")
        re = np.interp(t, self.grid, self.values.real)
        im = np.interp(t, self.grid, self.values.imag)
        return re + 1j * im

    def __eq__(self, other):
        return (
            isinstance(other, Tabulated)
            and np.array_equal(self.grid, other.grid)
            and np.array_equal(self.values, other.values)
        )

    def __hash__(self):
        return hash((self.grid.tobytes(), self.values.tobytes()))

    @classmethod
    def from_csv(cls, path):
        """Read a two-or-three column CSV ``t, re[, im]`` (header optional)."""
        data = np.genfromtxt(path, delimiter=",", comments="#")
        if np.isnan(data[0]).any():
            data = data[1:]
        values = data[:, 1] + (1j * data[:, 2] if data.shape[1] > 2 else 0)
        return cls(data[:, 0], values, source=str(path))

    def to_dict(self):
        if self.source is None:
            raise ModelDomainError("tabulated coefficient without a CSV source cannot be serialized")
        return {"type": "tabulated", "csv": self.source}


TimeCoefficient = Stationary | UniformSqueezed | Harmonic | Tabulated


def coefficient_from_dict(d: dict) -> TimeCoefficient:
    d = dict(d)
    kind = d.pop("type")
    if kind == "stationary":
        return Stationary(_cplx_in(d["amp"]), float(d["freq"]))
    if kind == "uniform_squeezed":
        return UniformSqueezed(
            _cplx_in(d["amplitude"]),
            float(d["center"]),
            float(d.get("squeeze", 0.0)),
            float(d.get("phase", 0.0)),
            float(d.get("detuning", 0.0)),
        )
    if kind == "harmonic":
        return Harmonic(float(d["prefactor"]), d["kind"], float(d["center"]), float(d.get("phase", 0.0)))
    if kind == "tabulated":
        return Tabulated.from_csv(d["csv"])
    raise ModelDomainError(f"unknown time coefficient type {kind!r}")


def _cplx_out(z):
    z = complex(z)
    return z.real if z.imag == 0 else [z.real, z.imag]


def _cplx_in(x):
    if isinstance(x, (list, tuple)):
        return complex(x[0], x[1])
    return complex(x)


# --------------------------------------------------------------------------
# modes, baths, systems
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class BathMode:
    """One exponential term: rate ``Gamma_j`` and time coefficients ``f_j``, ``g_j``."""

    rate: float
    f: TimeCoefficient
    g: TimeCoefficient

    def __post_init__(self):
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise ModelDomainError(f"mode rate must be positive, got {self.rate}")

    @property
    def pseudomode_ok(self) -> bool:
        return self.f == self.g


@dataclass(frozen=True)
class BathModel:
    modes: tuple[BathMode, ...]
    drive: Optional[Callable] = field(default=None, compare=False)
    thermal_cov: Optional[Callable] = field(default=None, compare=False)
    name: str = field(default="modes", compare=False)
    params: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        if not self.modes:
            raise ModelDomainError("bath model needs at least one mode")

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    @property
    def rates(self) -> np.ndarray:
        return np.array([m.rate for m in self.modes])

    @property
    def pseudomode_ok(self) -> bool:
        return all(m.pseudomode_ok for m in self.modes)

    def coefficients(self, times):
        """Return ``(F, G)`` of shape ``times.shape + (N,)`` with ``f_j``/``g_j`` values."""
        times = np.asarray(times, dtype=float)
        F = np.stack([np.broadcast_to(m.f(times), times.shape) for m in self.modes], axis=-1)
        G = np.stack([np.broadcast_to(m.g(times), times.shape) for m in self.modes], axis=-1)
        return F.astype(complex), G.astype(complex)

    def drive_values(self, times) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        if self.drive is None:
            return np.zeros(times.shape)
        return np.broadcast_to(np.real(self.drive(times)), times.shape).astype(float)


@dataclass(frozen=True, eq=False)
class SystemModel:
    """System Hamiltonian and (Hermitian) coupling operator ``L``."""

    hamiltonian: np.ndarray
    coupling: np.ndarray

    def __post_init__(self):
        H = np.array(self.hamiltonian, dtype=complex)
        L = np.array(self.coupling, dtype=complex)
        for name, M in (("hamiltonian", H), ("coupling", L)):
            if M.ndim != 2 or M.shape[0] != M.shape[1]:
                raise ModelDomainError(f"{name} must be square, got shape {M.shape}")
            if np.max(np.abs(M - M.conj().T), initial=0.0) > HERMITIAN_TOL:
                raise ModelDomainError(f"{name} is not Hermitian")
        if H.shape != L.shape:
            raise ModelDomainError(f"hamiltonian {H.shape} and coupling {L.shape} differ in shape")
        H.setflags(write=False)
        L.setflags(write=False)
        object.__setattr__(self, "hamiltonian", H)
        object.__setattr__(self, "coupling", L)

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]


# --------------------------------------------------------------------------
# evaluation
# --------------------------------------------------------------------------


def kernel(rate, tau):
    """Exponential memory kernel ``(rate/2) exp(-rate |tau|)``."""
    if np.any(np.asarray(rate) <= 0):
        raise ModelDomainError(f"kernel rate must be positive, got {rate}")
    return 0.5 * rate * np.exp(-rate * np.abs(tau))


def eval_bcf(model: BathModel, t, s):
    """Evaluate ``alpha(t, s)``; ``t`` and ``s`` broadcast against each other."""
    t, s = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(s, dtype=float))
    out = np.zeros(t.shape, dtype=complex)
    for m in model.modes:
        out += kernel(m.rate, t - s) * m.f(t) * np.conj(m.g(s))
    return out


def bcf_matrix(model: BathModel, grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    return eval_bcf(model, grid[:, None], grid[None, :])


# --------------------------------------------------------------------------
# benchmark models
# --------------------------------------------------------------------------


def uniform_squeezed_multimode(terms: Sequence, r: float, phi: float, omega0: float,
                               name: str = "uniform_squeezed_multimode") -> BathModel:
    """Uniformly squeezed bath whose unsqueezed BCF is a sum of exponentials.

    Parameters
    ----------
    terms : sequence of (gamma_j, omega_j, Gamma_j)
        Complex weight, centre frequency and rate of each exponential term.
    r, phi : float
        Squeezing parameter and phase.
    omega0 : float
        Squeezing centre frequency; each term carries detuning ``omega_j - omega0``.
    """
    if r < 0:
        raise ModelDomainError(f"squeezing parameter must be >= 0, got {r}")
    modes = []
    for gamma, omega, rate in terms:
        gamma = complex(gamma)
        common = dict(center=omega0, squeeze=float(r), phase=float(phi), detuning=float(omega - omega0))
        f = UniformSqueezed(np.sqrt(gamma), **common)
        g = UniformSqueezed(np.sqrt(np.conj(gamma)), **common)
        modes.append(BathMode(float(rate), f, g))
    params = {
        "terms": [[_cplx_out(gm), float(om), float(rt)] for gm, om, rt in terms],
        "r": float(r),
        "phi": float(phi),
        "omega0": float(omega0),
    }
    return BathModel(tuple(modes), name=name, params=params)


def single_mode_squeezed(gamma: float, omega0: float, r: float, phi: float, Gamma: float) -> BathModel:
    """Single exponential mode under uniform squeezing (``f = g``)."""
    if gamma < 0:
        raise ModelDomainError(f"coupling gamma must be >= 0, got {gamma}")
    if not Gamma > 0:
        raise ModelDomainError(f"spectral half-width Gamma must be > 0, got {Gamma}")
    model = uniform_squeezed_multimode([(gamma, omega0, Gamma)], r, phi, omega0)
    params = dict(gamma=float(gamma), omega0=float(omega0), r=float(r), phi=float(phi), Gamma=float(Gamma))
    return BathModel(model.modes, name="single_mode_squeezed", params=params)


def dpa_bogoliubov(Gamma0: float, Gamma: float, eps: float) -> tuple[float, float]:
    """Bogoliubov coefficients ``(u, v)`` of the broadband input mode."""
    gp, gm = Gamma + eps, Gamma - eps
    root = math.sqrt((Gamma0**2 - gp**2) * (Gamma0**2 - gm**2))
    u = (Gamma0**2 - Gamma**2 - eps**2) / root
    v = 2 * Gamma * eps / root
    return u, v


def _check_dpa_domain(Gamma0, Gamma, eps):
    if not eps > 0:
        raise ModelDomainError(f"pump strength must satisfy eps > 0, got eps={eps}")
    if not eps < Gamma:
        raise ModelDomainError(f"below-threshold condition eps < Gamma violated (eps={eps}, Gamma={Gamma})")
    if not Gamma0 > Gamma + eps:
        raise ModelDomainError(
            f"bandwidth condition Gamma0 > Gamma + eps violated (Gamma0={Gamma0}, Gamma+eps={Gamma + eps})"
        )


def dpa_three_mode(gamma: float, omega0: float, Gamma0: float, Gamma: float, eps: float,
                   phi: float) -> BathModel:
    """Output field of a degenerate parametric amplifier as three effective modes.

    Mode rates are ``Gamma0``, ``Gamma - eps`` and ``Gamma + eps``; the third
    mode has ``g = -f`` so the model has no pseudomode representation.
    """
    if gamma < 0:
        raise ModelDomainError(f"coupling gamma must be >= 0, got {gamma}")
    _check_dpa_domain(Gamma0, Gamma, eps)
    u, v = dpa_bogoliubov(Gamma0, Gamma, eps)
    gp, gm = Gamma + eps, Gamma - eps
    f1 = UniformSqueezed(complex(math.sqrt(gamma)), omega0, math.asinh(v), phi)
    pre2 = math.sqrt(4 * gamma * Gamma * eps / gm**2 * Gamma0**2 / (Gamma0**2 - gm**2))
    pre3 = math.sqrt(4 * gamma * Gamma * eps / gp**2 * Gamma0**2 / (Gamma0**2 - gp**2))
    f2 = Harmonic(pre2, "cos", omega0, phi)
    f3 = Harmonic(pre3, "sin", omega0, phi)
    g3 = Harmonic(-pre3, "sin", omega0, phi)
    modes = (BathMode(Gamma0, f1, f1), BathMode(gm, f2, f2), BathMode(gp, f3, g3))
    params = dict(gamma=float(gamma), omega0=float(omega0), Gamma0=float(Gamma0),
                  Gamma=float(Gamma), eps=float(eps), phi=float(phi))
    return BathModel(modes, name="dpa_three_mode", params=params)


def effective_squeezing(Gamma: float, eps: float) -> float:
    """``arccosh(Gamma / sqrt(Gamma^2 - eps^2))``."""
    if not 0 <= eps < Gamma:
        raise ModelDomainError(f"need 0 <= eps < Gamma, got eps={eps}, Gamma={Gamma}")
    return math.acosh(Gamma / math.sqrt(Gamma**2 - eps**2))


@dataclass(frozen=True)
class ThermalEmbedding:
    """Result of mapping a displaced squeezed thermal bath onto a vacuum bath.

    ``drive(t)`` is the classical field, ``thermal_cov(t, s)`` the covariance
    of the real thermal noise and ``bcf(t, s)`` the temperature-independent
    correlation function that still has to be cast in exponential form.
    """

    couplings: tuple
    bare_couplings: tuple
    occupations: np.ndarray
    displacements: np.ndarray

    def drive(self, t):
        t = np.asarray(t, dtype=float)
        total = np.zeros(t.shape, dtype=complex)
        for g, a in zip(self.bare_couplings, self.displacements):
            total = total + g(t) * a
        return 2 * total.real

    def thermal_cov(self, t, s):
        t, s = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(s, dtype=float))
        total = np.zeros(t.shape)
        for g, n in zip(self.couplings, self.occupations):
            if n:
                total = total + 2 * n * np.real(g(t) * np.conj(g(s)))
        return total

    def bcf(self, t, s):
        t, s = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(s, dtype=float))
        total = np.zeros(t.shape, dtype=complex)
        for g in self.couplings:
            total = total + g(t) * np.conj(g(s))
        return total


def thermal_embedding(couplings, occupations, displacements, bare_couplings=None) -> ThermalEmbedding:
    """Split a displaced squeezed thermal bath into drive, thermal noise and BCF.

    Parameters
    ----------
    couplings : sequence of TimeCoefficient
        Dressed couplings ``g_l(t)`` after the squeezing transformation.
    occupations : sequence of float
        Thermal occupations ``n_l >= 0``.
    displacements : sequence of complex
        Coherent displacements ``alpha_l``.
    bare_couplings : sequence of TimeCoefficient, optional
        Undressed ``g_l exp(-i w_l t)`` entering the classical drive.
        Defaults to ``couplings`` (no squeezing).
    """
    couplings = tuple(couplings)
    occ = np.asarray(occupations, dtype=float)
    disp = np.asarray(displacements, dtype=complex)
    if occ.shape != (len(couplings),) or disp.shape != (len(couplings),):
        raise ModelDomainError("couplings, occupations and displacements must have equal length")
    if np.any(occ < 0):
        raise ModelDomainError("thermal occupations must be non-negative")
    bare = couplings if bare_couplings is None else tuple(bare_couplings)
    if len(bare) != len(couplings):
        raise ModelDomainError("bare_couplings must match couplings in length")
    return ThermalEmbedding(couplings, bare, occ, disp)


def model_from_dict(d: dict) -> BathModel:
    """Build a bath model from its config representation ``{"kind": ..., ...}``."""
    d = dict(d)
    kind = d.pop("kind")
    p = d.pop("params", {})
    if kind == "single_mode_squeezed":
        return single_mode_squeezed(**p)
    if kind == "dpa_three_mode":
        return dpa_three_mode(**p)
    if kind == "uniform_squeezed_multimode":
        terms = [(_cplx_in(gm), om, rt) for gm, om, rt in p["terms"]]
        return uniform_squeezed_multimode(terms, p["r"], p["phi"], p["omega0"])
    if kind == "modes":
        modes = tuple(
            BathMode(float(m["rate"]), coefficient_from_dict(m["f"]), coefficient_from_dict(m["g"]))
            for m in d.pop("modes")
        )
        return BathModel(modes)
    raise ModelDomainError(f"unknown bath model kind {kind!r}")


def model_to_dict(model: BathModel) -> dict:
    if model.name != "modes":
        return {"kind": model.name, "params": dict(model.params)}
    return {
        "kind": "modes",
        "modes": [{"rate": m.rate, "f": m.f.to_dict(), "g": m.g.to_dict()} for m in model.modes],
    }
