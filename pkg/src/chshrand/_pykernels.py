"""Pure-Python/numpy versions of the hot loops.

Semantics match ``_ckernels`` exactly: all outputs are integers, so the two
backends are interchangeable bit for bit.
"""
from __future__ import annotations

import numpy as np


def subset_signatures(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Size and column sums of every subset of {0,1}^n, indexed by bitmask."""
    npts = 1 << n
    masks = np.arange(1 << npts, dtype=np.int64)
    sizes = np.zeros(masks.shape, dtype=np.int64)
    cols = np.zeros((masks.size, n), dtype=np.int64)
    for code in range(npts):
        bit = (masks >> code) & 1
        sizes += bit
        for i in range(n):
            if (code >> (n - 1 - i)) & 1:
                cols[:, i] += bit
    return sizes, cols


def best_pair(kx, cx, rx, ky, cy, ry, thresh) -> tuple[int, int, int]:
    """Largest kx[i]*ky[j] with cx[i].cy[j] <= thresh[kx[i]*ky[j]].

    Ties go to the smallest (rx[i], ry[j]). Inputs must be sorted by size
    descending. Returns (-1, -1, -1) when nothing is feasible.
    """
    kx = np.asarray(kx, dtype=np.int64)
    ky = np.asarray(ky, dtype=np.int64)
    cx = np.asarray(cx, dtype=np.int64)
    cy = np.asarray(cy, dtype=np.int64)
    rx = np.asarray(rx, dtype=np.int64)
    ry = np.asarray(ry, dtype=np.int64)
    thresh = np.asarray(thresh, dtype=np.int64)
    best, bi, bj = -1, -1, -1
    if ky.size == 0:
        return best, bi, bj
    kmax_y = int(ky[0])
    for i in range(kx.size):
        if int(kx[i]) * kmax_y < best:
            break
        prods = kx[i] * ky
        keep = prods >= best
        if not keep.any():
            continue
        idx = np.nonzero(keep)[0]
        dots = cy[idx] @ cx[i]
        ok = dots <= thresh[prods[idx]]
        if not ok.any():
            continue
        cand = idx[ok]
        p = int(prods[cand].max())
        top = cand[prods[cand] == p]
        j = int(top[np.argmin(ry[top])])
        if p > best or (p == best and (rx[i], ry[j]) < (rx[bi], ry[bj])):
            best, bi, bj = p, i, j
    return best, bi, bj


def tally_tests(u, lam_cum, mode, x_off, x_codes, x_partner, x_cum, y_off, y_codes, y_cum, signs, n):
    """Map uniforms to sampled (lambda, x, y) and the per-test CHSH sum.

    ``u`` has three columns: lambda draw, x (or joint pair) draw, y draw.
    For a joint-mode lambda the x table lists setting pairs and
    ``x_partner`` holds the y string of each pair.
    Returns (s, lam, xs, ys) where s is the signed count over the n runs.
    """
    u = np.asarray(u, dtype=np.float64)
    lam_cum = np.asarray(lam_cum, dtype=np.float64)
    nl = lam_cum.size
    lam = np.minimum(np.searchsorted(lam_cum, u[:, 0], side="right"), nl - 1).astype(np.int64)
    xs = np.empty(u.shape[0], dtype=np.int64)
    ys = np.empty(u.shape[0], dtype=np.int64)
    for k in range(nl):
        sel = np.nonzero(lam == k)[0]
        if sel.size == 0:
            continue
        xa, xb = int(x_off[k]), int(x_off[k + 1])
        ix = np.minimum(np.searchsorted(x_cum[xa:xb], u[sel, 1], side="right"), xb - xa - 1)
        xs[sel] = x_codes[xa + ix]
        if mode[k] == 1:
            ys[sel] = x_partner[xa + ix]
        else:
            ya, yb = int(y_off[k]), int(y_off[k + 1])
            iy = np.minimum(np.searchsorted(y_cum[ya:yb], u[sel, 2], side="right"), yb - ya - 1)
            ys[sel] = y_codes[ya + iy]
    full = np.int64((1 << n) - 1)
    n11 = np.bitwise_count(xs & ys).astype(np.int64)
    n10 = np.bitwise_count(xs & ~ys & full).astype(np.int64)
    n01 = np.bitwise_count(~xs & ys & full).astype(np.int64)
    n00 = n - n11 - n10 - n01
    sg = np.asarray(signs, dtype=np.int64)[lam]
    s = sg[:, 0] * n00 + sg[:, 1] * n01 + sg[:, 2] * n10 + sg[:, 3] * n11
    return s, lam, xs, ys
