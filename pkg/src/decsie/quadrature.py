"""Quadrature rules on the reference triangle and singular panel pairs.

The reference triangle is {(x1, x2): 0 <= x2 <= x1 <= 1} with the affine map
x = P0 + x1 (P1 - P0) + x2 (P2 - P1); the corresponding barycentric weights
of (P0, P1, P2) are (1 - x1, x1 - x2, x2).  Its area is 1/2.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def gauss01(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def triangle_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Collapsed (Duffy) Gauss rule with n*n points, exact to degree 2n-2.

    Returns barycentric coordinates (m, 3) and weights summing to 1, i.e. the
    rule integrates the mean value over any triangle.
    """
    x, w = gauss01(n)
    u, v = np.meshgrid(x, x, indexing="ij")
    wu, wv = np.meshgrid(w, w, indexing="ij")
    x1 = u.ravel()
    x2 = (u * v).ravel()
    weights = 2.0 * (wu * wv * u).ravel()
    lam = np.stack([1.0 - x1, x1 - x2, x2], axis=1)
    return lam, weights


@lru_cache(maxsize=None)
def strang_fix7() -> tuple[np.ndarray, np.ndarray]:
    """Seven-point degree-5 rule (Radon), weights summing to 1."""
    a1, b1 = 0.059715871789770, 0.470142064105115
    a2, b2 = 0.797426985353087, 0.101286507323456
    lam = np.array(
        [
            [1 / 3, 1 / 3, 1 / 3],
            [a1, b1, b1],
            [b1, a1, b1],
            [b1, b1, a1],
            [a2, b2, b2],
            [b2, a2, b2],
            [b2, b2, a2],
        ]
    )
    w = np.array([0.225] + [0.132394152788506] * 3 + [0.125939180544827] * 3)
    return lam, w / w.sum()


def subdivided_rule(base: tuple[np.ndarray, np.ndarray], levels: int) -> tuple[np.ndarray, np.ndarray]:
    """Apply ``base`` on the 4**levels congruent sub-triangles."""
    lam, w = base
    tris = [np.eye(3)]
    for _ in range(levels):
        nxt = []
        for t in tris:
            m01, m12, m02 = (t[0] + t[1]) / 2, (t[1] + t[2]) / 2, (t[0] + t[2]) / 2
            nxt += [np.array(x) for x in ([t[0], m01, m02], [m01, t[1], m12], [m02, m12, t[2]], [m01, m12, m02])]
        tris = nxt
    pts = np.concatenate([lam @ t for t in tris])
    wts = np.concatenate([w / len(tris)] * len(tris))
    return pts, wts


def _ref_to_bary(x1, x2):
    return np.stack([1.0 - x1, x1 - x2, x2], axis=-1)


@lru_cache(maxsize=None)
def sauter_schwab(case: str, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Singular quadrature for a pair of touching triangles.

    ``case`` is "coincident", "edge" (shared edge P0-P1 in both panels, same
    direction) or "vertex" (shared P0).  Returns barycentric coordinates of
    the points on the observation and source panels and weights such that
    sum(w f) ~ int_ref int_ref f dx dy over the reference triangle pair
    (total measure 1/4).
    """
    x, w = gauss01(n)
    g = np.stack(np.meshgrid(x, x, x, x, indexing="ij"), 0).reshape(4, -1)
    gw = np.prod(np.stack(np.meshgrid(w, w, w, w, indexing="ij"), 0).reshape(4, -1), axis=0)
    xi, e1, e2, e3 = g
    xs, ys, ws = [], [], []

    def add(xa, xb, ya, yb, weight):
        xs.append(_ref_to_bary(xa, xb))
        ys.append(_ref_to_bary(ya, yb))
        ws.append(weight)

    if case == "coincident":
        base = gw * xi**3 * e1**2 * e2
        add(xi, xi * (1 - e1 + e1 * e2), xi * (1 - e1 * e2 * e3), xi * (1 - e1), base)
        add(xi * (1 - e1 * e2 * e3), xi * (1 - e1), xi, xi * (1 - e1 + e1 * e2), base)
        add(xi, xi * e1 * (1 - e2 + e2 * e3), xi * (1 - e1 * e2), xi * e1 * (1 - e2), base)
        add(xi * (1 - e1 * e2), xi * e1 * (1 - e2), xi, xi * e1 * (1 - e2 + e2 * e3), base)
        add(xi * (1 - e1 * e2 * e3), xi * e1 * (1 - e2 * e3), xi, xi * e1 * (1 - e2), base)
        add(xi, xi * e1 * (1 - e2), xi * (1 - e1 * e2 * e3), xi * e1 * (1 - e2 * e3), base)
    elif case == "edge":
        b1 = gw * xi**3 * e1**2
        b2 = b1 * e2
        add(xi, xi * e1 * e3, xi * (1 - e1 * e2), xi * e1 * (1 - e2), b1)
        add(xi, xi * e1, xi * (1 - e1 * e2 * e3), xi * e1 * e2 * (1 - e3), b2)
        add(xi * (1 - e1 * e2), xi * e1 * (1 - e2), xi, xi * e1 * e2 * e3, b2)
        add(xi * (1 - e1 * e2 * e3), xi * e1 * e2 * (1 - e3), xi, xi * e1, b2)
        add(xi * (1 - e1 * e2 * e3), xi * e1 * (1 - e2 * e3), xi, xi * e1 * e2, b2)
    elif case == "vertex":
        base = gw * xi**3 * e2
        add(xi, xi * e1, xi * e2, xi * e2 * e3, base)
        add(xi * e2, xi * e2 * e3, xi, xi * e1, base)
    else:
        raise ValueError(case)
    return np.concatenate(xs), np.concatenate(ys), np.concatenate(ws)
