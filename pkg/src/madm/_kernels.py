"""Hot loops: nested geometric-grid sums and the Gillespie event loop.

Each kernel has a ``*_numba`` and a ``*_numpy`` variant; the module-level
names (``nested_grid``, ``gillespie_chunk``) point at whichever backend
``madm._accel`` selected.
"""
import math

import numpy as np
from scipy.signal import lfilter

from ._accel import HAVE_NUMBA, NUMBA_ENABLED, njit

# event kinds, shared with madm.model.EventKind
BULK_RIGHT, BULK_LEFT, INJECT_LEFT, EXTRACT_LEFT, INJECT_RIGHT, EXTRACT_RIGHT = range(6)

# gillespie_chunk status codes
DONE, NEED_UNIFORMS, NEED_CAPACITY = 0, 1, 2


# ---------------------------------------------------------------------------
# nested Jackson integral on the two geometric grids {a g^n}, {b g^n}
#
# Level j carries I_j on the b-grid and the divided difference
#   D_j[p] = (I_j(a g^p) - I_j(b g^p)) / ((a - b) g^p),
# where I_j(x) = int_x^b h_j(t) I_{j+1}(t) d_g t and I_{N+1} = 1.
# The integral from a to b of the outermost level is (a - b) * D_1[0];
# -D_1[0] is the same integral divided by (b - a) and stays finite at a == b.
# ---------------------------------------------------------------------------

def nested_grid_numpy(Ha, Hb, Hdd, a, b, gamma):
    """Return ``-D_1[0]``; see module comment. Arrays are (levels, n_grid)."""
    n_levels, n = Ha.shape
    pw = gamma ** np.arange(n, dtype=np.float64)
    zb = b * pw
    Ib = np.ones(n)
    D = np.zeros(n)
    for j in range(n_levels - 1, -1, -1):
        Ia = Ib + (a - b) * pw * D
        ddg = Hdd[j] * Ib + Ha[j] * D
        x = Ha[j] * Ia + zb * ddg
        wb = (1.0 - gamma) * zb * Hb[j] * Ib
        Ib_new = np.empty(n)
        Ib_new[0] = 0.0
        np.cumsum(wb[:-1], out=Ib_new[1:])
        # S[p] = x[p] + gamma * S[p + 1]
        S = lfilter([1.0], [1.0, -gamma], x[::-1])[::-1]
        D = -(1.0 - gamma) * S
        Ib = Ib_new
    return -D[0]


def _nested_grid_loop(Ha, Hb, Hdd, a, b, gamma):
    n_levels, n = Ha.shape
    pw = np.empty(n)
    p = 1.0
    for i in range(n):
        pw[i] = p
        p *= gamma
    Ib = np.ones(n)
    D = np.zeros(n)
    x = np.empty(n)
    for j in range(n_levels - 1, -1, -1):
        acc = 0.0
        for i in range(n):
            ia = Ib[i] + (a - b) * pw[i] * D[i]
            x[i] = Ha[j, i] * ia + b * pw[i] * (Hdd[j, i] * Ib[i] + Ha[j, i] * D[i])
            w = (1.0 - gamma) * b * pw[i] * Hb[j, i] * Ib[i]
            Ib[i] = acc
            acc += w
        s = 0.0
        for i in range(n - 1, -1, -1):
            s = x[i] + gamma * s
            D[i] = -(1.0 - gamma) * s
    return -D[0]


nested_grid_numba = njit()(_nested_grid_loop) if HAVE_NUMBA else None


# ---------------------------------------------------------------------------
# Gillespie event loop
# ---------------------------------------------------------------------------

def _gillespie_chunk_py(occ, t, t_rec, t_stop, u, pos, inv_q, site_cum,
                        rate_l, rate_r, cdf_l, cdf_r, hist, joint, box, counts):
    """Advance ``occ`` until ``t_stop`` or until the uniform buffer runs dry.

    Sojourn time inside ``[t_rec, t_stop)`` is added to ``hist[site, m]`` and,
    when every occupation is below ``box``, to ``joint``. Three uniforms are
    consumed per step. Returns ``(t, pos, status)``.
    """
    n_sites = occ.shape[0]
    cap = min(site_cum.shape[0], hist.shape[1])
    n_u = u.shape[0]
    while True:
        if pos + 3 > n_u:
            return t, pos, NEED_UNIFORMS
        total = rate_l + rate_r
        for i in range(n_sites):
            if occ[i] >= cap:
                return t, pos, NEED_CAPACITY
            total += site_cum[occ[i]]
        dt = -math.log(1.0 - u[pos]) / total
        t_next = t + dt
        lo = t if t > t_rec else t_rec
        hi = t_next if t_next < t_stop else t_stop
        if hi > lo:
            w = hi - lo
            inside = True
            idx = 0
            for i in range(n_sites):
                hist[i, occ[i]] += w
                if occ[i] >= box:
                    inside = False
                else:
                    idx = idx * box + occ[i]
            if inside and box > 0:
                joint[idx] += w
        if t_next >= t_stop:
            return t_stop, pos + 3, DONE
        x = u[pos + 1] * total
        v = u[pos + 2]
        pos += 3
        t = t_next
        record = t >= t_rec
        if x < rate_l:
            k = np.searchsorted(cdf_l, v) + 1
            if k > cdf_l.shape[0]:
                k = cdf_l.shape[0]
            occ[0] += k
            if record:
                counts[INJECT_LEFT] += 1
            continue
        x -= rate_l
        if x < rate_r:
            k = np.searchsorted(cdf_r, v) + 1
            if k > cdf_r.shape[0]:
                k = cdf_r.shape[0]
            occ[n_sites - 1] += k
            if record:
                counts[INJECT_RIGHT] += 1
            continue
        x -= rate_r
        site = -1
        for i in range(n_sites):
            if occ[i] > 0:
                site = i
                if x < site_cum[occ[i]]:
                    break
                x -= site_cum[occ[i]]
        m = occ[site]
        # smallest k with site_cum[k] > y, 1 <= k <= m
        y = v * site_cum[m]
        lo_k = 1
        hi_k = m
        while lo_k < hi_k:
            mid = (lo_k + hi_k) // 2
            if site_cum[mid] > y:
                hi_k = mid
            else:
                lo_k = mid + 1
        k = lo_k
        rightward = (y - site_cum[k - 1]) < inv_q[k]
        occ[site] -= k
        if rightward:
            if site == n_sites - 1:
                kind = EXTRACT_RIGHT
            else:
                occ[site + 1] += k
                kind = BULK_RIGHT
        else:
            if site == 0:
                kind = EXTRACT_LEFT
            else:
                occ[site - 1] += k
                kind = BULK_LEFT
        if record:
            counts[kind] += 1


gillespie_chunk_numpy = _gillespie_chunk_py
gillespie_chunk_numba = njit()(_gillespie_chunk_py) if HAVE_NUMBA else None

if NUMBA_ENABLED:
    nested_grid = nested_grid_numba
    gillespie_chunk = gillespie_chunk_numba
else:
    nested_grid = nested_grid_numpy
    gillespie_chunk = gillespie_chunk_numpy
