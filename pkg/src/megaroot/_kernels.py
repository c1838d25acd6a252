"""Compiled inner loops: joint (p, p') evaluation and batched Newton orbits.

Everything here works on plain numbers and arrays so it can run without the
GIL. A scaled value travels as a ``(mantissa, exponent)`` pair; mantissas are
kept well inside the double range by shifting all recurrence state by
``2**600`` whenever it drifts too far from 1.
"""

import math

import numpy as np
from numba import njit

DENSE = 0
ITERQUAD = 1
CHEBYSHEV = 2
LEGENDRE = 3
KNOWN_ROOTS = 4

CONVERGED = 0
ABSORBED = 1
MAX_ITER = 2
ESCAPED = 3

FLAG_OK = 0
FLAG_CRITICAL = 1
FLAG_ROOT = 2

MAX_CRITICAL_RETRIES = 3
ENDGAME_WINDOW = 5

SHIFT = 600
BIG = 2.0**600
SMALL = 2.0**-600
# recurrences may skip the overflow check for 7 of every 8 steps below this |z|
_STRIDE_SAFE = 2.0**40


@njit(cache=True, nogil=True)
def _cscale(m, k):
    return complex(math.ldexp(m.real, k), math.ldexp(m.imag, k))


@njit(cache=True, nogil=True)
def _norm(m, e):
    if m == 0:
        return 0j, 0
    k = math.frexp(abs(m))[1] - 1
    return _cscale(m, -k), e + k


@njit(cache=True, nogil=True)
def _sadd(am, ae, bm, be):
    if am == 0:
        return bm, be
    if bm == 0:
        return am, ae
    if ae < be:
        am, ae, bm, be = bm, be, am, ae
    gap = ae - be
    if gap > 54:
        return am, ae
    return _norm(am + _cscale(bm, -gap), ae)


@njit(cache=True, nogil=True)
def eval_dense(a, z):
    d = a.shape[0] - 1
    pr = a[d].real
    pi = a[d].imag
    dr = 0.0
    di = 0.0
    zr = z.real
    zi = z.imag
    e = 0
    for k in range(d - 1, -1, -1):
        ndr = dr * zr - di * zi + pr
        ndi = dr * zi + di * zr + pi
        ak = a[k]
        if e == 0:
            cr = ak.real
            ci = ak.imag
        else:
            cr = math.ldexp(ak.real, -e)
            ci = math.ldexp(ak.imag, -e)
        npr = pr * zr - pi * zi + cr
        npi = pr * zi + pi * zr + ci
        pr, pi, dr, di = npr, npi, ndr, ndi
        s = abs(pr) + abs(pi) + abs(dr) + abs(di)
        if s > BIG:
            pr *= SMALL
            pi *= SMALL
            dr *= SMALL
            di *= SMALL
            e += SHIFT
        elif s < SMALL and s != 0.0:
            pr *= BIG
            pi *= BIG
            dr *= BIG
            di *= BIG
            e -= SHIFT
    return complex(pr, pi), e, complex(dr, di), e, d


@njit(cache=True, nogil=True)
def eval_iterquad(c, n, z):
    qm, qe = _norm(z, 0)
    dm = 1.0 + 0j
    de = 0
    cm, ce = _norm(c, 0)
    for _ in range(n):
        # chain rule uses q_k, so update the derivative first
        if qm == 0:
            dm = 0j
            de = 0
        else:
            dm, de = _norm(2.0 * qm * dm, qe + de)
        sm, se = _norm(qm * qm, 2 * qe)
        qm, qe = _sadd(sm, se, cm, ce)
    return qm, qe, dm, de, n


@njit(cache=True, nogil=True)
def eval_chebyshev(d, z):
    tpr = 1.0
    tpi = 0.0
    tr = z.real
    ti = z.imag
    dpr = 0.0
    dpi = 0.0
    dr = 1.0
    di = 0.0
    e = 0
    zr = 2.0 * z.real
    zi = 2.0 * z.imag
    mask = 7 if abs(z) < _STRIDE_SAFE else 0
    for k in range(1, d):
        nr = zr * tr - zi * ti - tpr
        ni = zr * ti + zi * tr - tpi
        ndr = 2.0 * tr + zr * dr - zi * di - dpr
        ndi = 2.0 * ti + zr * di + zi * dr - dpi
        tpr = tr
        tpi = ti
        dpr = dr
        dpi = di
        tr = nr
        ti = ni
        dr = ndr
        di = ndi
        if (k & mask) == 0:
            s = abs(tr) + abs(ti) + abs(dr) + abs(di)
            if s > BIG:
                tr *= SMALL
                ti *= SMALL
                tpr *= SMALL
                tpi *= SMALL
                dr *= SMALL
                di *= SMALL
                dpr *= SMALL
                dpi *= SMALL
                e += SHIFT
    return complex(tr, ti), e, complex(dr, di), e, d


@njit(cache=True, nogil=True)
def eval_legendre(d, z):
    ppr = 1.0
    ppi = 0.0
    pr = z.real
    pi = z.imag
    dpr = 0.0
    dpi = 0.0
    dr = 1.0
    di = 0.0
    e = 0
    zr = z.real
    zi = z.imag
    mask = 7 if abs(z) < _STRIDE_SAFE else 0
    for k in range(1, d):
        a = (2.0 * k + 1.0) / (k + 1.0)
        b = k / (k + 1.0)
        # P_{k+1} = a z P_k - b P_{k-1};  P'_{k+1} = a (P_k + z P'_k) - b P'_{k-1}
        zpr = zr * pr - zi * pi
        zpi = zr * pi + zi * pr
        ndr = a * (pr + zr * dr - zi * di) - b * dpr
        ndi = a * (pi + zr * di + zi * dr) - b * dpi
        nr = a * zpr - b * ppr
        ni = a * zpi - b * ppi
        ppr = pr
        ppi = pi
        dpr = dr
        dpi = di
        pr = nr
        pi = ni
        dr = ndr
        di = ndi
        if (k & mask) == 0:
            s = abs(pr) + abs(pi) + abs(dr) + abs(di)
            if s > BIG:
                pr *= SMALL
                pi *= SMALL
                ppr *= SMALL
                ppi *= SMALL
                dr *= SMALL
                di *= SMALL
                dpr *= SMALL
                dpi *= SMALL
                e += SHIFT
    return complex(pr, pi), e, complex(dr, di), e, d


@njit(cache=True, nogil=True)
def eval_known_roots(roots, z):
    pr = 1.0
    pi = 0.0
    dr = 0.0
    di = 0.0
    e = 0
    for j in range(roots.shape[0]):
        wr = z.real - roots[j].real
        wi = z.imag - roots[j].imag
        ndr = dr * wr - di * wi + pr
        ndi = dr * wi + di * wr + pi
        npr = pr * wr - pi * wi
        npi = pr * wi + pi * wr
        pr, pi, dr, di = npr, npi, ndr, ndi
        s = abs(pr) + abs(pi) + abs(dr) + abs(di)
        if s > BIG:
            pr *= SMALL
            pi *= SMALL
            dr *= SMALL
            di *= SMALL
            e += SHIFT
        elif s < SMALL and s != 0.0:
            pr *= BIG
            pi *= BIG
            dr *= BIG
            di *= BIG
            e -= SHIFT
    return complex(pr, pi), e, complex(dr, di), e, roots.shape[0]


@njit(cache=True, nogil=True)
def evaluate(kind, coef, n, z):
    """Return ``(p_mant, p_exp, dp_mant, dp_exp, steps)``."""
    if kind == DENSE:
        return eval_dense(coef, z)
    if kind == ITERQUAD:
        return eval_iterquad(coef[0], n, z)
    if kind == CHEBYSHEV:
        return eval_chebyshev(n, z)
    if kind == LEGENDRE:
        return eval_legendre(n, z)
    return eval_known_roots(coef, z)


@njit(cache=True, nogil=True)
def known_roots_correction(roots, z):
    s = 0j
    for j in range(roots.shape[0]):
        w = z - roots[j]
        if w == 0:
            return 0j, FLAG_ROOT
        s += 1.0 / w
    if s == 0:
        return 0j, FLAG_CRITICAL
    return 1.0 / s, FLAG_OK


@njit(cache=True, nogil=True)
def correction(kind, coef, n, z):
    """Newton correction p/p' with a status flag (ok, critical point, exact root)."""
    if kind == KNOWN_ROOTS:
        return known_roots_correction(coef, z)
    pm, pe, dm, de, _ = evaluate(kind, coef, n, z)
    if pm == 0:
        return 0j, FLAG_ROOT
    if dm == 0:
        return 0j, FLAG_CRITICAL
    q = pm / dm
    e = pe - de
    if e > 1100:
        return complex(math.inf, math.inf), FLAG_OK
    if e < -1100:
        return 0j, FLAG_ROOT
    return _cscale(q, e), FLAG_OK


_M64 = (1 << 64) - 1


@njit(cache=True, nogil=True)
def _splitmix64(x):
    x = (x + np.uint64(0x9E3779B97F4A7C15)) & np.uint64(_M64)
    x = ((x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) & np.uint64(_M64)
    x = ((x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) & np.uint64(_M64)
    return x ^ (x >> np.uint64(31))


@njit(cache=True, nogil=True)
def jitter_direction(seed, orbit, attempt):
    """Deterministic unit complex number for the given orbit and retry."""
    h = _splitmix64(np.uint64(seed))
    h = _splitmix64(h ^ np.uint64(orbit))
    h = _splitmix64(h ^ np.uint64(attempt))
    theta = float(h >> np.uint64(11)) * (2.0**-53) * 2.0 * math.pi
    return complex(math.cos(theta), math.sin(theta))


@njit(cache=True, nogil=True)
def lookup(z, radius, cell, kx, ky, pos, ids):
    """Nearest snapshot record within ``radius`` of z: ``(id, distance)`` or ``(-1, inf)``."""
    m = kx.shape[0]
    best = -1
    bestd = math.inf
    if m == 0 or radius <= 0.0:
        return best, bestd
    x0 = int(math.floor((z.real - radius) / cell))
    x1 = int(math.floor((z.real + radius) / cell))
    y0 = int(math.floor((z.imag - radius) / cell))
    y1 = int(math.floor((z.imag + radius) / cell))
    if x1 - x0 + 1 > m:
        for j in range(m):
            dist = abs(pos[j] - z)
            if dist <= radius and (dist < bestd or (dist == bestd and ids[j] < best)):
                best = ids[j]
                bestd = dist
        return best, bestd
    for ix in range(x0, x1 + 1):
        lo = 0
        hi = m
        while lo < hi:
            mid = (lo + hi) >> 1
            if kx[mid] < ix or (kx[mid] == ix and ky[mid] < y0):
                lo = mid + 1
            else:
                hi = mid
        j = lo
        while j < m and kx[j] == ix and ky[j] <= y1:
            dist = abs(pos[j] - z)
            if dist <= radius and (dist < bestd or (dist == bestd and ids[j] < best)):
                best = ids[j]
                bestd = dist
            j += 1
    return best, bestd


@njit(cache=True, nogil=True)
def run_orbits(
    kind, coef, n, degree, z0, orbit_ids, seed,
    eps, max_iter, absorb_radius, cell, escape_cap, perturb_scale,
    snap_kx, snap_ky, snap_pos, snap_ids,
    out_status, out_z, out_iter, out_corr, out_root, out_monotone,
):
    history = np.empty(ENDGAME_WINDOW, np.float64)
    for i in range(z0.shape[0]):
        z = z0[i]
        status = MAX_ITER
        root = -1
        it = 0
        crit = 0
        corr = 0j
        filled = 0
        while it < max_iter:
            c, flag = correction(kind, coef, n, z)
            it += 1
            if flag == FLAG_CRITICAL:
                crit += 1
                if crit > MAX_CRITICAL_RETRIES:
                    break
                z = z * (1.0 + perturb_scale * jitter_direction(seed, orbit_ids[i], crit))
                continue
            corr = c
            a = abs(c)
            history[filled % ENDGAME_WINDOW] = a
            filled += 1
            scale = max(1.0, abs(z))
            # an already-recorded root claims a slow orbit before it can count as new
            if absorb_radius > 0.0 and a <= 1e3 * eps * scale:
                rid, _ = lookup(z, absorb_radius, cell, snap_kx, snap_ky, snap_pos, snap_ids)
                if rid >= 0:
                    status = ABSORBED
                    root = rid
                    break
            if a <= eps * scale:
                status = CONVERGED
                break
            znext = z - c
            if not (math.isfinite(znext.real) and math.isfinite(znext.imag)) or abs(znext) > escape_cap:
                z = znext
                status = ESCAPED
                break
            z = znext
        monotone = True
        if status == CONVERGED:
            w = min(filled, ENDGAME_WINDOW)
            for k in range(1, w):
                prev = history[(filled - w + k - 1) % ENDGAME_WINDOW]
                cur = history[(filled - w + k) % ENDGAME_WINDOW]
                if cur > prev:
                    monotone = False
        out_status[i] = status
        out_z[i] = z
        out_iter[i] = it
        out_corr[i] = abs(corr)
        out_root[i] = root
        out_monotone[i] = monotone
