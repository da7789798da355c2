"""Compiled inner loops for panel-pair and off-surface Helmholtz integrals.

Real and imaginary parts are carried separately; with
G = e^{ikR} / (4 pi R) and dG/dn_y = n_y.(x - y) (1 - ikR) e^{ikR} / (4 pi R^3).
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

INV_4PI = 1.0 / (4.0 * math.pi)


@njit(cache=True)
def matched_pairs(va, vb, X, Y, W, scale, na, nb, k, want_k):
    """Local 3x3 blocks from matched point lists (Sauter-Schwab style rules).

    va, vb: (P, 3, 3) vertices (already permuted), X, Y: (Q, 3) barycentrics,
    W: (Q,) weights, scale: (P,) Jacobian factors.  Returns S_ab, K_ab (obs
    a, src b) and K_ba (obs b, src a), indexed (a-local, b-local).
    """
    P = va.shape[0]
    Q = X.shape[0]
    S = np.zeros((P, 3, 3), dtype=np.complex128)
    Kab = np.zeros((P, 3, 3), dtype=np.complex128)
    Kba = np.zeros((P, 3, 3), dtype=np.complex128)
    sr = np.empty(9)
    si = np.empty(9)
    ar = np.empty(9)
    ai = np.empty(9)
    br = np.empty(9)
    bi = np.empty(9)
    for p in range(P):
        sr[:] = 0.0
        si[:] = 0.0
        ar[:] = 0.0
        ai[:] = 0.0
        br[:] = 0.0
        bi[:] = 0.0
        for q in range(Q):
            d0 = (X[q, 0] * va[p, 0, 0] + X[q, 1] * va[p, 1, 0] + X[q, 2] * va[p, 2, 0]
                  - Y[q, 0] * vb[p, 0, 0] - Y[q, 1] * vb[p, 1, 0] - Y[q, 2] * vb[p, 2, 0])
            d1 = (X[q, 0] * va[p, 0, 1] + X[q, 1] * va[p, 1, 1] + X[q, 2] * va[p, 2, 1]
                  - Y[q, 0] * vb[p, 0, 1] - Y[q, 1] * vb[p, 1, 1] - Y[q, 2] * vb[p, 2, 1])
            d2 = (X[q, 0] * va[p, 0, 2] + X[q, 1] * va[p, 1, 2] + X[q, 2] * va[p, 2, 2]
                  - Y[q, 0] * vb[p, 0, 2] - Y[q, 1] * vb[p, 1, 2] - Y[q, 2] * vb[p, 2, 2])
            r = math.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
            kr = k * r
            c = math.cos(kr)
            s = math.sin(kr)
            w = W[q] * INV_4PI / r
            gr = c * w
            gi = s * w
            if want_k:
                w3 = w / (r * r)
                rr = (c + kr * s) * w3
                ri = (s - kr * c) * w3
                pa = d0 * nb[p, 0] + d1 * nb[p, 1] + d2 * nb[p, 2]
                pb = -(d0 * na[p, 0] + d1 * na[p, 1] + d2 * na[p, 2])
            for i in range(3):
                xi = X[q, i]
                for j in range(3):
                    f = xi * Y[q, j]
                    sr[3 * i + j] += gr * f
                    si[3 * i + j] += gi * f
                    if want_k:
                        ar[3 * i + j] += rr * pa * f
                        ai[3 * i + j] += ri * pa * f
                        br[3 * i + j] += rr * pb * f
                        bi[3 * i + j] += ri * pb * f
        sc = scale[p]
        for i in range(3):
            for j in range(3):
                S[p, i, j] = complex(sr[3 * i + j] * sc, si[3 * i + j] * sc)
                if want_k:
                    Kab[p, i, j] = complex(ar[3 * i + j] * sc, ai[3 * i + j] * sc)
                    Kba[p, i, j] = complex(br[3 * i + j] * sc, bi[3 * i + j] * sc)
    return S, Kab, Kba


@njit(cache=True)
def tensor_pairs(va, vb, lam, wq, scale, na, nb, k, want_k):
    """Local blocks for separated pairs with the same triangle rule on both panels."""
    P = va.shape[0]
    Q = lam.shape[0]
    S = np.zeros((P, 3, 3), dtype=np.complex128)
    Kab = np.zeros((P, 3, 3), dtype=np.complex128)
    Kba = np.zeros((P, 3, 3), dtype=np.complex128)
    xa = np.empty((Q, 3))
    xb = np.empty((Q, 3))
    acc = np.empty(18)
    tot = np.empty(54)
    for p in range(P):
        for q in range(Q):
            for c in range(3):
                xa[q, c] = lam[q, 0] * va[p, 0, c] + lam[q, 1] * va[p, 1, c] + lam[q, 2] * va[p, 2, c]
                xb[q, c] = lam[q, 0] * vb[p, 0, c] + lam[q, 1] * vb[p, 1, c] + lam[q, 2] * vb[p, 2, c]
        tot[:] = 0.0
        for qa in range(Q):
            acc[:] = 0.0
            for qb in range(Q):
                d0 = xa[qa, 0] - xb[qb, 0]
                d1 = xa[qa, 1] - xb[qb, 1]
                d2 = xa[qa, 2] - xb[qb, 2]
                r = math.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
                kr = k * r
                c = math.cos(kr)
                s = math.sin(kr)
                w = wq[qb] * INV_4PI / r
                gr = c * w
                gi = s * w
                for j in range(3):
                    acc[j] += gr * lam[qb, j]
                    acc[3 + j] += gi * lam[qb, j]
                if want_k:
                    w3 = w / (r * r)
                    rr = (c + kr * s) * w3
                    ri = (s - kr * c) * w3
                    pa = d0 * nb[p, 0] + d1 * nb[p, 1] + d2 * nb[p, 2]
                    pb = -(d0 * na[p, 0] + d1 * na[p, 1] + d2 * na[p, 2])
                    for j in range(3):
                        l = lam[qb, j]
                        acc[6 + j] += rr * pa * l
                        acc[9 + j] += ri * pa * l
                        acc[12 + j] += rr * pb * l
                        acc[15 + j] += ri * pb * l
            wa = wq[qa]
            for i in range(3):
                li = lam[qa, i] * wa
                for m in range(6 if not want_k else 18):
                    tot[18 * i + m] += li * acc[m]
        sc = scale[p]
        for i in range(3):
            for j in range(3):
                b = 18 * i
                S[p, i, j] = complex(tot[b + j] * sc, tot[b + 3 + j] * sc)
                if want_k:
                    Kab[p, i, j] = complex(tot[b + 6 + j] * sc, tot[b + 9 + j] * sc)
                    Kba[p, i, j] = complex(tot[b + 12 + j] * sc, tot[b + 15 + j] * sc)
    return S, Kab, Kba


@njit(cache=True)
def potentials(points, yq, wq, nq, aq, bq, k, use_a, use_b):
    """Sum_q w a(y) dG/dn_y and sum_q w b(y) G at each point.

    aq, bq: (m, c) densities at the quadrature nodes, c columns at once.
    Returns (n, c) arrays for D[a] and S[b].
    """
    n = points.shape[0]
    m = yq.shape[0]
    nc = aq.shape[1]
    dv = np.zeros((n, nc), dtype=np.complex128)
    sv = np.zeros((n, nc), dtype=np.complex128)
    awr = np.empty((m, nc))
    awi = np.empty((m, nc))
    bwr = np.empty((m, nc))
    bwi = np.empty((m, nc))
    for q in range(m):
        for j in range(nc):
            awr[q, j] = wq[q] * aq[q, j].real
            awi[q, j] = wq[q] * aq[q, j].imag
            bwr[q, j] = wq[q] * bq[q, j].real
            bwi[q, j] = wq[q] * bq[q, j].imag
    dr = np.zeros(nc)
    di = np.zeros(nc)
    s_r = np.zeros(nc)
    s_i = np.zeros(nc)
    for i in range(n):
        dr[:] = 0.0
        di[:] = 0.0
        s_r[:] = 0.0
        s_i[:] = 0.0
        for q in range(m):
            d0 = points[i, 0] - yq[q, 0]
            d1 = points[i, 1] - yq[q, 1]
            d2 = points[i, 2] - yq[q, 2]
            r = math.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
            kr = k * r
            c = math.cos(kr)
            s = math.sin(kr)
            inv = INV_4PI / r
            if use_b:
                gr = c * inv
                gi = s * inv
                for j in range(nc):
                    s_r[j] += gr * bwr[q, j] - gi * bwi[q, j]
                    s_i[j] += gr * bwi[q, j] + gi * bwr[q, j]
            if use_a:
                proj = (d0 * nq[q, 0] + d1 * nq[q, 1] + d2 * nq[q, 2]) * inv / (r * r)
                rr = (c + kr * s) * proj
                ri = (s - kr * c) * proj
                for j in range(nc):
                    dr[j] += rr * awr[q, j] - ri * awi[q, j]
                    di[j] += rr * awi[q, j] + ri * awr[q, j]
        for j in range(nc):
            dv[i, j] = complex(dr[j], di[j])
            sv[i, j] = complex(s_r[j], s_i[j])
    return dv, sv
