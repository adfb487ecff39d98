# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops; see _pykernels for the reference semantics."""
import numpy as np
cimport numpy as cnp
from libc.stdint cimport int64_t, uint64_t

cnp.import_array()

cdef extern from *:
    int popcount64 "__builtin_popcountll"(unsigned long long) nogil


def subset_signatures(int n):
    cdef int npts = 1 << n
    cdef int64_t total = (<int64_t>1) << npts
    sizes_arr = np.zeros(total, dtype=np.int64)
    cols_arr = np.zeros((total, n), dtype=np.int64)
    cdef int64_t[::1] sizes = sizes_arr
    cdef int64_t[:, ::1] cols = cols_arr
    cdef int64_t mask
    cdef int code, i
    with nogil:
        for mask in range(total):
            for code in range(npts):
                if (mask >> code) & 1:
                    sizes[mask] += 1
                    for i in range(n):
                        if (code >> (n - 1 - i)) & 1:
                            cols[mask, i] += 1
    return sizes_arr, cols_arr


def best_pair(kx, cx, rx, ky, cy, ry, thresh):
    cdef int64_t[::1] kxv = np.ascontiguousarray(kx, dtype=np.int64)
    cdef int64_t[::1] kyv = np.ascontiguousarray(ky, dtype=np.int64)
    cdef int64_t[:, ::1] cxv = np.ascontiguousarray(cx, dtype=np.int64)
    cdef int64_t[:, ::1] cyv = np.ascontiguousarray(cy, dtype=np.int64)
    cdef int64_t[::1] rxv = np.ascontiguousarray(rx, dtype=np.int64)
    cdef int64_t[::1] ryv = np.ascontiguousarray(ry, dtype=np.int64)
    cdef int64_t[::1] th = np.ascontiguousarray(thresh, dtype=np.int64)
    cdef Py_ssize_t nx = kxv.shape[0], ny = kyv.shape[0]
    cdef Py_ssize_t ncol = cxv.shape[1] if nx > 0 else 0
    cdef int64_t best = -1, p, dot, kmax_y
    cdef Py_ssize_t bi = -1, bj = -1, i, j, c
    if ny == 0:
        return -1, -1, -1
    kmax_y = kyv[0]
    with nogil:
        for i in range(nx):
            if kxv[i] * kmax_y < best:
                break
            for j in range(ny):
                p = kxv[i] * kyv[j]
                if p < best:
                    continue
                if p == best and (rxv[i] > rxv[bi] or (rxv[i] == rxv[bi] and ryv[j] >= ryv[bj])):
                    continue
                dot = 0
                for c in range(ncol):
                    dot += cxv[i, c] * cyv[j, c]
                if dot <= th[p]:
                    best = p
                    bi = i
                    bj = j
    return int(best), int(bi), int(bj)


cdef inline Py_ssize_t _search(const double[::1] cum, Py_ssize_t a, Py_ssize_t b, double u) noexcept nogil:
    # first index in [a, b) with cum > u, clamped to b - 1
    cdef Py_ssize_t lo = a, hi = b, mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if cum[mid] <= u:
            lo = mid + 1
        else:
            hi = mid
    if lo >= b:
        lo = b - 1
    return lo


def tally_tests(u, lam_cum, mode, x_off, x_codes, x_partner, x_cum, y_off, y_codes, y_cum, signs, int n):
    cdef const double[:, ::1] uv = np.ascontiguousarray(u, dtype=np.float64)
    cdef const double[::1] lc = np.ascontiguousarray(lam_cum, dtype=np.float64)
    cdef const int64_t[::1] md = np.ascontiguousarray(mode, dtype=np.int64)
    cdef const int64_t[::1] xo = np.ascontiguousarray(x_off, dtype=np.int64)
    cdef const int64_t[::1] xc = np.ascontiguousarray(x_codes, dtype=np.int64)
    cdef const int64_t[::1] xp = np.ascontiguousarray(x_partner, dtype=np.int64)
    cdef const double[::1] xq = np.ascontiguousarray(x_cum, dtype=np.float64)
    cdef const int64_t[::1] yo = np.ascontiguousarray(y_off, dtype=np.int64)
    cdef const int64_t[::1] yc = np.ascontiguousarray(y_codes, dtype=np.int64)
    cdef const double[::1] yq = np.ascontiguousarray(y_cum, dtype=np.float64)
    cdef const int64_t[:, ::1] sg = np.ascontiguousarray(signs, dtype=np.int64)
    cdef Py_ssize_t t, ntests = uv.shape[0], nl = lc.shape[0], k, ix, iy
    s_arr = np.empty(ntests, dtype=np.int64)
    lam_arr = np.empty(ntests, dtype=np.int64)
    xs_arr = np.empty(ntests, dtype=np.int64)
    ys_arr = np.empty(ntests, dtype=np.int64)
    cdef int64_t[::1] s = s_arr
    cdef int64_t[::1] lam = lam_arr
    cdef int64_t[::1] xs = xs_arr
    cdef int64_t[::1] ys = ys_arr
    cdef uint64_t full = ((<uint64_t>1) << n) - 1
    cdef uint64_t x, y
    cdef int64_t n11, n10, n01, n00
    with nogil:
        for t in range(ntests):
            k = _search(lc, 0, nl, uv[t, 0])
            ix = _search(xq, xo[k], xo[k + 1], uv[t, 1])
            x = <uint64_t>xc[ix]
            if md[k] == 1:
                y = <uint64_t>xp[ix]
            else:
                iy = _search(yq, yo[k], yo[k + 1], uv[t, 2])
                y = <uint64_t>yc[iy]
            n11 = popcount64(x & y)
            n10 = popcount64(x & ~y & full)
            n01 = popcount64(~x & y & full)
            n00 = n - n11 - n10 - n01
            s[t] = sg[k, 0] * n00 + sg[k, 1] * n01 + sg[k, 2] * n10 + sg[k, 3] * n11
            lam[t] = k
            xs[t] = <int64_t>x
            ys[t] = <int64_t>y
    return s_arr, lam_arr, xs_arr, ys_arr
