"""Error estimates for deterministic and stochastic reduced-state series.

All inputs are density-matrix series of shape ``(n_t, d, d)`` on a common
stored grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MASK_FLOOR = 1e-14


def _check_same(*series):
    shapes = {np.shape(s) for s in series}
    if len(shapes) != 1:
        raise ValueError(f"series are on different grids: {sorted(shapes)}")
    return [np.asarray(s) for s in series]


def richardson_order(rho_h, rho_2h, rho_4h) -> np.ma.MaskedArray:
    """Entrywise convergence order ``log2 |(rho_4h - rho_2h) / (rho_2h - rho_h)|``.

    Entries whose denominator magnitude is below ``1e-14`` are masked.
    """
    rho_h, rho_2h, rho_4h = _check_same(rho_h, rho_2h, rho_4h)
    den = np.abs(rho_2h - rho_h)
    num = np.abs(rho_4h - rho_2h)
    mask = (den < MASK_FLOOR) | (num == 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.log2(np.where(mask, 1.0, num) / np.where(mask, 1.0, den))
    return np.ma.masked_array(p, mask=mask)


def step_error(rho_h, rho_2h, p) -> np.ma.MaskedArray:
    """``|rho_2h - rho_h| / (2^p - 1)``, masked wherever ``p`` is."""
    rho_h, rho_2h = _check_same(rho_h, rho_2h)
    p = np.ma.asarray(p)
    diff = np.abs(rho_2h - rho_h)
    with np.errstate(divide="ignore", invalid="ignore"):
        err = diff / (2.0 ** p.filled(1.0) - 1.0)
    return np.ma.masked_array(err, mask=np.ma.getmaskarray(p))


def truncation_error(rho_nmax, rho_ninf) -> np.ndarray:
    """``|rho(n_max) - rho(n_inf)|`` entrywise."""
    rho_nmax, rho_ninf = _check_same(rho_nmax, rho_ninf)
    return np.abs(rho_nmax - rho_ninf)


def rms(delta) -> float:
    """Root mean square over the stored points."""
    delta = np.asarray(delta, dtype=float)
    return float(np.sqrt(np.mean(delta**2)))


@dataclass
class ErrorReport:
    times: np.ndarray
    total: np.ndarray
    rms: float
    step: np.ndarray | None = None
    truncation: np.ndarray | None = None
    order: np.ndarray | None = None
    meta: dict = field(default_factory=dict)


def total_and_rms(step, trunc, times=None, order=None, meta=None) -> ErrorReport:
    """Combine entrywise step and truncation errors in quadrature.

    ``Delta(t) = sqrt(sum_ij |trunc_ij|^2 + sum_ij |step_ij|^2)``; masked
    step entries contribute zero.
    """
    step = np.ma.filled(np.ma.asarray(step, dtype=float), 0.0)
    trunc = np.asarray(trunc, dtype=float)
    step, trunc = _check_same(step, trunc)
    s2 = np.sum(step**2, axis=(-2, -1))
    t2 = np.sum(trunc**2, axis=(-2, -1))
    total = np.sqrt(s2 + t2)
    if times is None:
        times = np.arange(total.shape[0], dtype=float)
    return ErrorReport(np.asarray(times), total, rms(total), np.sqrt(s2), np.sqrt(t2), order, dict(meta or {}))


def stochastic_error(rho_mean, rho_ref):
    """``Delta(t) = sqrt(sum_ij |<rho_ij>_M - rho_ref_ij|^2)`` and its RMS ``r``."""
    rho_mean, rho_ref = _check_same(rho_mean, rho_ref)
    delta = np.sqrt(np.sum(np.abs(rho_mean - rho_ref) ** 2, axis=(-2, -1)))
    return delta, rms(delta)
