"""Compiled RK4 kernels for the hierarchy equations.

Everything here works on plain arrays prepared by :mod:`nshops.propagators`:

* ``damp[k]``           sum_j Gamma_j n_j for basis state k
* ``kappa[j]``          sqrt(Gamma_j / 2)
* ``up/down[k, j]``     neighbour indices (-1 if truncated)
* ``squp/sqdn[k, j]``   sqrt(n_j + 1) / sqrt(n_j) (0 where the neighbour is missing)
* ``ftab, gctab``       f_j and conj(g_j) at (t_n, t_n + h/2, t_n + h), shape (steps, 3, N)
* ``dtab``              classical drive at the same substeps, shape (steps, 3)

Trajectory batches are stored as (K, d_S, M) with the trajectory index
innermost so every loop runs over a contiguous batch.  Extended densities
are (K d_S, K d_S) with the system index fastest.
"""

import numpy as np
from numba import njit

_CACHE = True

DEGENERATE_FLOOR = 1e-30


@njit(cache=_CACHE)
def _axpy(out, x, a, y):
    # out = x + a y (2-D)
    for i in range(x.shape[0]):
        for j in range(x.shape[1]):
            out[i, j] = x[i, j] + a * y[i, j]


@njit(cache=_CACHE)
def _rk4_combine(x, h, k1, k2, k3, k4):
    # x += h/6 (k1 + 2 k2 + 2 k3 + k4); returns False on non-finite entries
    c = h / 6.0
    finite = True
    for i in range(x.shape[0]):
        for j in range(x.shape[1]):
            v = x[i, j] + c * (k1[i, j] + 2.0 * k2[i, j] + 2.0 * k3[i, j] + k4[i, j])
            x[i, j] = v
            if not (np.isfinite(v.real) and np.isfinite(v.imag)):
                finite = False
    return finite


# --------------------------------------------------------------------------
# batched pure-state helpers, arrays of shape (K, dS, M)
# --------------------------------------------------------------------------


@njit(cache=_CACHE)
def _baxpy(out, x, a, y):
    K, dS, M = x.shape
    for k in range(K):
        for s in range(dS):
            for m in range(M):
                out[k, s, m] = x[k, s, m] + a * y[k, s, m]


@njit(cache=_CACHE)
def _bcombine(x, h, k1, k2, k3, k4, norm2):
    # RK4 update in place; norm2[m] receives the new squared norms
    K, dS, M = x.shape
    c = h / 6.0
    norm2[:] = 0.0
    for k in range(K):
        for s in range(dS):
            for m in range(M):
                v = x[k, s, m] + c * (k1[k, s, m] + 2.0 * k2[k, s, m] + 2.0 * k3[k, s, m] + k4[k, s, m])
                x[k, s, m] = v
                norm2[m] += v.real * v.real + v.imag * v.imag


@njit(cache=_CACHE)
def _bnorm2(x, norm2):
    K, dS, M = x.shape
    norm2[:] = 0.0
    for k in range(K):
        for s in range(dS):
            for m in range(M):
                v = x[k, s, m]
                norm2[m] += v.real * v.real + v.imag * v.imag


@njit(cache=_CACHE)
def _bscale(x, norm2):
    K, dS, M = x.shape
    inv = np.empty(M)
    for m in range(M):
        nrm = np.sqrt(norm2[m])
        inv[m] = 1.0 / nrm if (nrm > 0 and np.isfinite(nrm)) else 1.0
    for k in range(K):
        for s in range(dS):
            for m in range(M):
                x[k, s, m] *= inv[m]


@njit(cache=_CACHE)
def _bdrift(psi, out, Lpsi, H, L, drive, w, ftab, gctab, n, st, damp, kappa, up, down, squp, sqdn,
            nl, use_nl):
    """Drift at substep ``st`` of step ``n`` for a batch:

    out = -damp psi - i (H + drive L) psi - i w L psi
          - i sum_j kappa_j (f_j c_j + gc_j c_j^+) L psi
          + nl sum_j kappa_j f_j c_j psi

    ``w`` and ``nl`` are per-trajectory vectors; the ``nl`` term is skipped
    unless ``use_nl``.
    """
    K, dS, M = psi.shape
    N = kappa.shape[0]
    for k in range(K):
        for a in range(dS):
            for m in range(M):
                Lpsi[k, a, m] = 0
            for b in range(dS):
                lab = L[a, b]
                if lab != 0:
                    for m in range(M):
                        Lpsi[k, a, m] += lab * psi[k, b, m]
    cl = np.empty(M, dtype=np.complex128)
    for m in range(M):
        cl[m] = -1j * (drive + w[m])
    for k in range(K):
        dk = -damp[k]
        for a in range(dS):
            for m in range(M):
                out[k, a, m] = dk * psi[k, a, m] + cl[m] * Lpsi[k, a, m]
            for b in range(dS):
                hab = -1j * H[a, b]
                if hab != 0:
                    for m in range(M):
                        out[k, a, m] += hab * psi[k, b, m]
    for j in range(N):
        fj = ftab[n, st, j]
        cu = -1j * kappa[j] * fj
        cd = -1j * kappa[j] * gctab[n, st, j]
        for k in range(K):
            u = up[k, j]
            if u >= 0:
                wu = cu * squp[k, j]
                for a in range(dS):
                    for m in range(M):
                        out[k, a, m] += wu * Lpsi[u, a, m]
                if use_nl:
                    wn = kappa[j] * fj * squp[k, j]
                    for a in range(dS):
                        for m in range(M):
                            out[k, a, m] += wn * nl[m] * psi[u, a, m]
            dn = down[k, j]
            if dn >= 0:
                wd = cd * sqdn[k, j]
                for a in range(dS):
                    for m in range(M):
                        out[k, a, m] += wd * Lpsi[dn, a, m]


# --------------------------------------------------------------------------
# HOPS
# --------------------------------------------------------------------------


@njit(cache=_CACHE)
def _hops_stage(psi, mem, out, dmem, Lpsi, H, L, drive, zc, ftab, gctab, n, st, damp, kappa, up, down,
                squp, sqdn, rates, nonlinear, w, nl, alive):
    """Drift of (psi, mem); trajectories whose vacuum block vanished get alive[m] = False."""
    K, dS, M = psi.shape
    N = kappa.shape[0]
    if not nonlinear:
        _bdrift(psi, out, Lpsi, H, L, drive, zc, ftab, gctab, n, st, damp, kappa, up, down, squp, sqdn,
                nl, False)
        return
    for m in range(M):
        num = 0.0
        den = 0.0
        for a in range(dS):
            acc = 0j
            for b in range(dS):
                acc += L[a, b] * psi[0, b, m]
            num += (np.conj(psi[0, a, m]) * acc).real
            den += psi[0, a, m].real ** 2 + psi[0, a, m].imag ** 2
        if not den > DEGENERATE_FLOOR:
            alive[m] = False
            Lt = 0.0
        else:
            Lt = num / den
        shift = 0j
        for j in range(N):
            shift += ftab[n, st, j] * mem[j, m]
            dmem[j, m] = -rates[j] * mem[j, m] + 0.5 * rates[j] * gctab[n, st, j] * Lt
        w[m] = zc[m] + 1j * np.conj(shift)
        nl[m] = 1j * Lt
    _bdrift(psi, out, Lpsi, H, L, drive, w, ftab, gctab, n, st, damp, kappa, up, down, squp, sqdn, nl,
            True)


@njit(cache=_CACHE, nogil=True)
def hops_trajectories(psi0, H, L, damp, kappa, up, down, squp, sqdn, rates, ftab, gctab, dtab,
                      zstep, h, store_every, nonlinear):
    """Integrate a batch of HOPS trajectories.

    ``zstep[n, m]`` is the value multiplying ``-i L`` during step n of
    trajectory m (``Z*`` plus any real thermal noise), held across substeps.
    Returns the vacuum blocks at stored steps, shape (M, n_store + 1, d_S),
    and a status per trajectory (0 ok, 1 degenerate, 2 non-finite).
    """
    n_steps, M = zstep.shape
    K, dS = psi0.shape
    N = kappa.shape[0]
    n_store = n_steps // store_every
    out = np.zeros((M, n_store + 1, dS), dtype=np.complex128)
    status = np.zeros(M, dtype=np.int64)
    alive = np.ones(M, dtype=np.bool_)
    shape = (K, dS, M)
    psi = np.empty(shape, dtype=np.complex128)
    for k in range(K):
        for a in range(dS):
            for m in range(M):
                psi[k, a, m] = psi0[k, a]
    tmp = np.empty(shape, dtype=np.complex128)
    Lpsi = np.empty(shape, dtype=np.complex128)
    k1 = np.empty(shape, dtype=np.complex128)
    k2 = np.empty(shape, dtype=np.complex128)
    k3 = np.empty(shape, dtype=np.complex128)
    k4 = np.empty(shape, dtype=np.complex128)
    mem = np.zeros((N, M), dtype=np.complex128)
    mt = np.zeros((N, M), dtype=np.complex128)
    dm1 = np.zeros((N, M), dtype=np.complex128)
    dm2 = np.zeros((N, M), dtype=np.complex128)
    dm3 = np.zeros((N, M), dtype=np.complex128)
    dm4 = np.zeros((N, M), dtype=np.complex128)
    w = np.zeros(M, dtype=np.complex128)
    nl = np.zeros(M, dtype=np.complex128)
    norm2 = np.zeros(M)
    for m in range(M):
        for a in range(dS):
            out[m, 0, a] = psi[0, a, m]
    for n in range(n_steps):
        zc = zstep[n]
        _hops_stage(psi, mem, k1, dm1, Lpsi, H, L, dtab[n, 0], zc, ftab, gctab, n, 0, damp, kappa, up,
                    down, squp, sqdn, rates, nonlinear, w, nl, alive)
        _baxpy(tmp, psi, 0.5 * h, k1)
        for j in range(N):
            for m in range(M):
                mt[j, m] = mem[j, m] + 0.5 * h * dm1[j, m]
        _hops_stage(tmp, mt, k2, dm2, Lpsi, H, L, dtab[n, 1], zc, ftab, gctab, n, 1, damp, kappa, up,
                    down, squp, sqdn, rates, nonlinear, w, nl, alive)
        _baxpy(tmp, psi, 0.5 * h, k2)
        for j in range(N):
            for m in range(M):
                mt[j, m] = mem[j, m] + 0.5 * h * dm2[j, m]
        _hops_stage(tmp, mt, k3, dm3, Lpsi, H, L, dtab[n, 1], zc, ftab, gctab, n, 1, damp, kappa, up,
                    down, squp, sqdn, rates, nonlinear, w, nl, alive)
        _baxpy(tmp, psi, h, k3)
        for j in range(N):
            for m in range(M):
                mt[j, m] = mem[j, m] + h * dm3[j, m]
        _hops_stage(tmp, mt, k4, dm4, Lpsi, H, L, dtab[n, 2], zc, ftab, gctab, n, 2, damp, kappa, up,
                    down, squp, sqdn, rates, nonlinear, w, nl, alive)
        _bcombine(psi, h, k1, k2, k3, k4, norm2)
        if nonlinear:
            for j in range(N):
                for m in range(M):
                    mem[j, m] += (h / 6.0) * (dm1[j, m] + 2.0 * dm2[j, m] + 2.0 * dm3[j, m] + dm4[j, m])
            _bscale(psi, norm2)
        for m in range(M):
            if status[m] == 0:
                if not alive[m]:
                    status[m] = 1
                elif not np.isfinite(norm2[m]):
                    status[m] = 2
        if (n + 1) % store_every == 0:
            s = (n + 1) // store_every
            for m in range(M):
                for a in range(dS):
                    out[m, s, a] = psi[0, a, m]
    return out, status


# --------------------------------------------------------------------------
# pseudomode SSE
# --------------------------------------------------------------------------


@njit(cache=_CACHE)
def _psse_stage(psi, out, Lpsi, H, L, drive, w, ftab, gctab, n, st, damp, kappa, up, down, squp, sqdn,
                rates, nonlinear, norm2, acc):
    _bdrift(psi, out, Lpsi, H, L, drive, w, ftab, gctab, n, st, damp, kappa, up, down, squp, sqdn,
            w, False)
    if not nonlinear:
        return
    K, dS, M = psi.shape
    N = kappa.shape[0]
    _bnorm2(psi, norm2)
    for j in range(N):
        # <c_j^+> = <c_j Psi | Psi> / <Psi|Psi>
        acc[:] = 0
        for k in range(K):
            u = up[k, j]
            if u >= 0:
                sq = squp[k, j]
                for a in range(dS):
                    for m in range(M):
                        acc[m] += sq * np.conj(psi[u, a, m]) * psi[k, a, m]
        for m in range(M):
            acc[m] *= 2.0 * rates[j] / norm2[m]
        for k in range(K):
            u = up[k, j]
            if u >= 0:
                sq = squp[k, j]
                for a in range(dS):
                    for m in range(M):
                        out[k, a, m] += acc[m] * sq * psi[u, a, m]


@njit(cache=_CACHE)
def _store_reduced(psi, out, s, normalize, norm2):
    K, dS, M = psi.shape
    for m in range(M):
        for a in range(dS):
            for b in range(dS):
                out[m, s, a, b] = 0
    for k in range(K):
        for a in range(dS):
            for b in range(dS):
                for m in range(M):
                    out[m, s, a, b] += psi[k, a, m] * np.conj(psi[k, b, m])
    if normalize:
        for m in range(M):
            for a in range(dS):
                for b in range(dS):
                    out[m, s, a, b] /= norm2[m]


@njit(cache=_CACHE, nogil=True)
def psse_trajectories(psi0, H, L, damp, kappa, up, down, squp, sqdn, rates, ftab, gctab, dtab,
                      dS_incr, ystep, h, store_every, nonlinear):
    """Integrate a batch of pseudomode-SSE trajectories.

    ``dS_incr[n, j, m]`` are the complex Wiener increments of step n;
    ``ystep[n, m]`` is an additional real noise multiplying ``-i L``.
    Returns per-trajectory reduced matrices ``sum_n <n|Psi><Psi|n>``
    (divided by the norm for the nonlinear equation), shape
    (M, n_store + 1, d_S, d_S), and status codes.
    """
    n_steps, N, M = dS_incr.shape
    K, dS = psi0.shape
    n_store = n_steps // store_every
    out = np.zeros((M, n_store + 1, dS, dS), dtype=np.complex128)
    status = np.zeros(M, dtype=np.int64)
    shape = (K, dS, M)
    psi = np.empty(shape, dtype=np.complex128)
    for k in range(K):
        for a in range(dS):
            for m in range(M):
                psi[k, a, m] = psi0[k, a]
    prev = np.empty(shape, dtype=np.complex128)
    tmp = np.empty(shape, dtype=np.complex128)
    Lpsi = np.empty(shape, dtype=np.complex128)
    k1 = np.empty(shape, dtype=np.complex128)
    k2 = np.empty(shape, dtype=np.complex128)
    k3 = np.empty(shape, dtype=np.complex128)
    k4 = np.empty(shape, dtype=np.complex128)
    w = np.zeros(M, dtype=np.complex128)
    acc = np.zeros(M, dtype=np.complex128)
    norm2 = np.zeros(M)
    scratch = np.zeros(M)
    noise_w = np.sqrt(2.0 * rates)
    _bnorm2(psi, norm2)
    _store_reduced(psi, out, 0, nonlinear, norm2)
    for n in range(n_steps):
        for m in range(M):
            w[m] = ystep[n, m]
        prev[:, :, :] = psi
        _psse_stage(psi, k1, Lpsi, H, L, dtab[n, 0], w, ftab, gctab, n, 0, damp, kappa, up, down, squp,
                    sqdn, rates, nonlinear, scratch, acc)
        _baxpy(tmp, psi, 0.5 * h, k1)
        _psse_stage(tmp, k2, Lpsi, H, L, dtab[n, 1], w, ftab, gctab, n, 1, damp, kappa, up, down, squp,
                    sqdn, rates, nonlinear, scratch, acc)
        _baxpy(tmp, psi, 0.5 * h, k2)
        _psse_stage(tmp, k3, Lpsi, H, L, dtab[n, 1], w, ftab, gctab, n, 1, damp, kappa, up, down, squp,
                    sqdn, rates, nonlinear, scratch, acc)
        _baxpy(tmp, psi, h, k3)
        _psse_stage(tmp, k4, Lpsi, H, L, dtab[n, 2], w, ftab, gctab, n, 2, damp, kappa, up, down, squp,
                    sqdn, rates, nonlinear, scratch, acc)
        _bcombine(psi, h, k1, k2, k3, k4, norm2)
        # Ito noise from the pre-step state
        for j in range(N):
            for k in range(K):
                u = up[k, j]
                if u >= 0:
                    sq = noise_w[j] * squp[k, j]
                    for a in range(dS):
                        for m in range(M):
                            psi[k, a, m] += sq * np.conj(dS_incr[n, j, m]) * prev[u, a, m]
        _bnorm2(psi, norm2)
        if nonlinear:
            _bscale(psi, norm2)
        for m in range(M):
            if status[m] == 0 and not np.isfinite(norm2[m]):
                status[m] = 2
        if (n + 1) % store_every == 0:
            if nonlinear:
                _bnorm2(psi, norm2)
            _store_reduced(psi, out, (n + 1) // store_every, nonlinear, norm2)
    return out, status


# --------------------------------------------------------------------------
# hierarchy / pseudomode master equations
# --------------------------------------------------------------------------


@njit(cache=_CACHE)
def _density_half(R, Y, LR, H, L, drive, f, gc, damp, kappa, up, down, squp, sqdn, rates, pme):
    """Y such that the RHS is Y + Y^dagger for Hermitian R (shape (K dS, K dS))."""
    d = R.shape[0]
    dS = H.shape[0]
    K = d // dS
    N = kappa.shape[0]
    Hd = H + drive * L
    # LR = (I (x) L) R
    for k in range(K):
        for a in range(dS):
            r = k * dS + a
            for c in range(d):
                LR[r, c] = 0
            for b in range(dS):
                lab = L[a, b]
                if lab != 0:
                    rb = k * dS + b
                    for c in range(d):
                        LR[r, c] += lab * R[rb, c]
    for k in range(K):
        for a in range(dS):
            r = k * dS + a
            dk = -damp[k]
            for c in range(d):
                Y[r, c] = dk * R[r, c]
            for b in range(dS):
                hab = -1j * Hd[a, b]
                if hab != 0:
                    rb = k * dS + b
                    for c in range(d):
                        Y[r, c] += hab * R[rb, c]
            for j in range(N):
                u = up[k, j]
                if u >= 0:
                    coef = -1j * kappa[j] * f[j] * squp[k, j]
                    ru = u * dS + a
                    for c in range(d):
                        Y[r, c] += coef * LR[ru, c]
                dn = down[k, j]
                if dn >= 0:
                    coef = -1j * kappa[j] * gc[j] * sqdn[k, j]
                    rd = dn * dS + a
                    for c in range(d):
                        Y[r, c] += coef * LR[rd, c]
                # right multiplication by c_j^+ moves column block up[l] to l
                if pme:
                    if u < 0:
                        continue
                    src = R
                    srow = u * dS + a
                    coef = rates[j] * squp[k, j]
                else:
                    src = LR
                    srow = r
                    coef = -1j * kappa[j] * np.conj(f[j])
                for l in range(K):
                    ul = up[l, j]
                    if ul >= 0:
                        w = coef * squp[l, j]
                        for b in range(dS):
                            Y[r, l * dS + b] += w * src[srow, ul * dS + b]


@njit(cache=_CACHE)
def _density_rhs(R, out, Y, LR, H, L, drive, f, gc, damp, kappa, up, down, squp, sqdn, rates, pme):
    _density_half(R, Y, LR, H, L, drive, f, gc, damp, kappa, up, down, squp, sqdn, rates, pme)
    d = R.shape[0]
    for r in range(d):
        for c in range(r, d):
            v = Y[r, c] + np.conj(Y[c, r])
            out[r, c] = v
            out[c, r] = np.conj(v)


@njit(cache=_CACHE)
def _reduce(R, dS, pme, rho):
    rho[:, :] = 0
    if pme:
        K = R.shape[0] // dS
        for k in range(K):
            for a in range(dS):
                for b in range(dS):
                    rho[a, b] += R[k * dS + a, k * dS + b]
    else:
        for a in range(dS):
            for b in range(dS):
                rho[a, b] = R[a, b]


@njit(cache=_CACHE, nogil=True)
def density_rk4(R0, H, L, damp, kappa, up, down, squp, sqdn, rates, ftab, gctab, dtab,
                h, store_every, pme):
    """RK4 for the hierarchy (pme=False) or pseudomode (pme=True) master equation.

    Returns reduced system matrices at stored steps, the final extended
    density and a status flag (0 ok, 2 non-finite).
    """
    n_steps = ftab.shape[0]
    dS = H.shape[0]
    d = R0.shape[0]
    n_store = n_steps // store_every
    out = np.zeros((n_store + 1, dS, dS), dtype=np.complex128)
    R = R0.copy()
    tmp = np.empty_like(R)
    Y = np.empty_like(R)
    LR = np.empty_like(R)
    k1 = np.empty_like(R)
    k2 = np.empty_like(R)
    k3 = np.empty_like(R)
    k4 = np.empty_like(R)
    rho = np.zeros((dS, dS), dtype=np.complex128)
    _reduce(R, dS, pme, rho)
    out[0] = rho
    status = 0
    for n in range(n_steps):
        _density_rhs(R, k1, Y, LR, H, L, dtab[n, 0], ftab[n, 0], gctab[n, 0], damp, kappa, up, down,
                     squp, sqdn, rates, pme)
        _axpy(tmp, R, 0.5 * h, k1)
        _density_rhs(tmp, k2, Y, LR, H, L, dtab[n, 1], ftab[n, 1], gctab[n, 1], damp, kappa, up, down,
                     squp, sqdn, rates, pme)
        _axpy(tmp, R, 0.5 * h, k2)
        _density_rhs(tmp, k3, Y, LR, H, L, dtab[n, 1], ftab[n, 1], gctab[n, 1], damp, kappa, up, down,
                     squp, sqdn, rates, pme)
        _axpy(tmp, R, h, k3)
        _density_rhs(tmp, k4, Y, LR, H, L, dtab[n, 2], ftab[n, 2], gctab[n, 2], damp, kappa, up, down,
                     squp, sqdn, rates, pme)
        if not _rk4_combine(R, h, k1, k2, k3, k4):
            status = 2
            break
        if (n + 1) % store_every == 0:
            _reduce(R, dS, pme, rho)
            out[(n + 1) // store_every] = rho
    return out, R, status
