"""Scalar surface integral operators for the Helmholtz equation in free space.

Galerkin discretisation with nodal P1 test and trial functions on the
boundary triangulation:

    S[m, n] = int int h_m(x) h_n(y) G(x, y)
    D[m, n] = 1/2 M[m, n] - int int h_m(x) h_n(y) dG/dn_y(x, y)

with G = exp(i k R) / (4 pi R) and outward normals.  Touching panel pairs
are integrated with Sauter-Schwab rules, separated pairs with collapsed
Gauss rules whose order grows as the pair gets closer.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from . import _kernels
from .mesh import BoundarySurface
from .quadrature import sauter_schwab, strang_fix7, subdivided_rule, triangle_rule

log = logging.getLogger(__name__)

FOUR_PI = 4.0 * np.pi


class QuadratureError(RuntimeError):
    """Panel-pair integration failed to converge."""


@dataclass(frozen=True)
class PlaneWave:
    """Plane wave E = E_p exp(i k0 u.r) with transverse polarisation."""

    E_p: np.ndarray
    u_hat: np.ndarray
    k0: float

    def __post_init__(self):
        ep = np.asarray(self.E_p, dtype=complex).reshape(3)
        u = np.asarray(self.u_hat, dtype=float).reshape(3)
        object.__setattr__(self, "E_p", ep)
        object.__setattr__(self, "u_hat", u)
        if abs(np.linalg.norm(u) - 1.0) > 1e-12:
            raise ValueError("propagation direction must be a unit vector")
        if abs(u @ ep) > 1e-12 * max(np.linalg.norm(ep), 1e-300):
            raise ValueError("polarisation must be transverse to the propagation direction")
        if self.k0 < 0:
            raise ValueError("k0 must be non-negative")

    def with_k0(self, k0: float) -> "PlaneWave":
        return PlaneWave(self.E_p, self.u_hat, k0)

    def field(self, points) -> np.ndarray:
        r = np.atleast_2d(points)
        return self.E_p[None, :] * np.exp(1j * self.k0 * (r @ self.u_hat))[:, None]


def incident_potentials(wave: PlaneWave, points) -> tuple[np.ndarray, np.ndarray]:
    """Incident (A~, Phi) of a plane wave, bounded as k0 -> 0.

    Phi = -(r.E_p) exp(i k0 u.r),  A~ = -k0 (r.E_p) exp(i k0 u.r) u.
    For a single point returns shapes (3,) and (); otherwise (n, 3) and (n,).
    """
    r = np.asarray(points, dtype=float)
    single = r.ndim == 1
    r = np.atleast_2d(r)
    phase = np.exp(1j * wave.k0 * (r @ wave.u_hat))
    phi = -(r @ wave.E_p) * phase
    a = (wave.k0 * phi)[:, None] * wave.u_hat[None, :]
    if single:
        return a[0], phi[0]
    return a, phi


def incident_component(wave: PlaneWave, points, which: str) -> np.ndarray:
    """Incident value of one unknown: "Ax", "Ay", "Az" or "Phis" (= k0^2 Phi)."""
    a, phi = incident_potentials(wave, np.atleast_2d(points))
    if which == "Phis":
        return wave.k0**2 * phi
    if which == "Phi":
        return phi
    return a[:, "xyz".index(which[-1].lower())]


# --- pair bookkeeping ----------------------------------------------------------


def _touching_pairs(tris: np.ndarray, n_nodes: int):
    """Sparse map of shared-vertex counts between triangles (upper triangle)."""
    m = len(tris)
    inc = sp.csr_matrix((np.ones(3 * m), (np.repeat(np.arange(m), 3), tris.ravel())), shape=(m, n_nodes))
    share = sp.triu(inc @ inc.T, k=1).tocoo()
    return share.row, share.col, share.data.astype(int)


def _align(ta, tb, case):
    """Local vertex permutations putting shared vertices first, in matching order."""
    sa, sb = list(ta), list(tb)
    common = [v for v in sa if v in sb]
    if case == "edge":
        a0, a1 = common
        pa = [sa.index(a0), sa.index(a1), 3 - sa.index(a0) - sa.index(a1)]
        pb = [sb.index(a0), sb.index(a1), 3 - sb.index(a0) - sb.index(a1)]
    else:
        v = common[0]
        ia, ib = sa.index(v), sb.index(v)
        pa = [ia, (ia + 1) % 3, (ia + 2) % 3]
        pb = [ib, (ib + 1) % 3, (ib + 2) % 3]
    return pa, pb


@dataclass
class AssemblyOptions:
    """Quadrature orders (Gauss points per direction) for the panel integrals.

    Touching pairs use Sauter-Schwab rules of order ``singular`` / ``edge`` /
    ``vertex``.  Separated pairs use a collapsed Gauss rule on both panels,
    with order picked by centroid distance relative to the larger panel
    diameter: below ``ratios[0]`` -> ``near``, then ``mid``, ``far``, and
    ``distant`` beyond ``ratios[2]``.
    """

    singular: int = 8
    edge: int = 7
    vertex: int = 6
    near: int = 6
    mid: int = 5
    far: int = 4
    distant: int = 3
    ratios: tuple = (1.5, 3.0, 6.0)
    chunk: int = 2_000_000  # quadrature point pairs per compiled call

    def doubled(self) -> "AssemblyOptions":
        return replace(
            self, singular=2 * self.singular, edge=2 * self.edge, vertex=2 * self.vertex,
            near=2 * self.near, mid=2 * self.mid, far=2 * self.far, distant=2 * self.distant,
        )


@dataclass
class SIEMatrices:
    S: np.ndarray
    D: np.ndarray
    k0: float
    M: np.ndarray | None = None


class _Accumulator:
    def __init__(self, n, want_s, want_k):
        self.n = n
        self.S = np.zeros((n, n), dtype=complex) if want_s else None
        self.K = np.zeros((n, n), dtype=complex) if want_k else None

    def _scatter(self, mat, rows, cols, vals):
        n = self.n
        idx = rows * n + cols
        flat = mat.reshape(-1)
        flat += np.bincount(idx, weights=vals.real, minlength=n * n)
        flat += 1j * np.bincount(idx, weights=vals.imag, minlength=n * n)

    def add(self, target, ga, gb, loc, mirror=False):
        """Scatter local blocks loc (P, 3, 3) at (ga x gb); also at (gb x ga) if mirror."""
        mat = getattr(self, target)
        rows = np.repeat(ga, 3, axis=1).ravel()
        cols = np.tile(gb, (1, 3)).ravel()
        vals = loc.reshape(-1)
        self._scatter(mat, rows, cols, vals)
        if mirror:
            self._scatter(mat, cols, rows, vals)


def _add_blocks(acc, ga, gb, S, Kab, Kba, want_s, want_k):
    if want_s:
        acc.add("S", ga, gb, S, mirror=True)
    if want_k:
        acc.add("K", ga, gb, Kab)
        acc.add("K", gb, ga, np.transpose(Kba, (0, 2, 1)))


def _assemble(surf: BoundarySurface, k0: float, opts: AssemblyOptions, want_s=True, want_k=True):
    pts, tris = surf.points, surf.triangles
    normals, areas = surf.normals, surf.areas
    m = len(tris)
    acc = _Accumulator(len(pts), want_s, want_k)
    ti, tj, shared = _touching_pairs(tris, len(pts))
    k = float(k0)

    # coincident pairs; flat panels give n_y.(x - y) = 0, no double-layer part
    if want_s:
        X, Y, W = sauter_schwab("coincident", opts.singular)
        step = max(1, opts.chunk // len(W))
        for start in range(0, m, step):
            ids = np.arange(start, min(m, start + step))
            v = np.ascontiguousarray(pts[tris[ids]])
            S, _, _ = _kernels.matched_pairs(v, v, X, Y, W, 4.0 * areas[ids] ** 2, normals[ids], normals[ids], k, False)
            acc.add("S", tris[ids], tris[ids], 0.5 * (S + np.transpose(S, (0, 2, 1))))

    # edge- and vertex-adjacent pairs, shared vertices moved to the front
    for case, count in (("edge", 2), ("vertex", 1)):
        sel = np.flatnonzero(shared == count)
        if sel.size == 0:
            continue
        X, Y, W = sauter_schwab(case, getattr(opts, case))
        pa = np.empty((sel.size, 3), dtype=int)
        pb = np.empty((sel.size, 3), dtype=int)
        for q, s_ in enumerate(sel):
            pa[q], pb[q] = _align(tris[ti[s_]], tris[tj[s_]], case)
        step = max(1, opts.chunk // len(W))
        for start in range(0, sel.size, step):
            sl = slice(start, start + step)
            a_ids, b_ids = ti[sel[sl]], tj[sel[sl]]
            ga = np.take_along_axis(tris[a_ids], pa[sl], axis=1)
            gb = np.take_along_axis(tris[b_ids], pb[sl], axis=1)
            S, Kab, Kba = _kernels.matched_pairs(
                np.ascontiguousarray(pts[ga]), np.ascontiguousarray(pts[gb]), X, Y, W,
                4.0 * areas[a_ids] * areas[b_ids], normals[a_ids], normals[b_ids], k, want_k,
            )
            _add_blocks(acc, ga, gb, S, Kab, Kba, want_s, want_k)

    # separated pairs (upper triangle), rule order chosen by relative distance
    cent = surf.centroids()
    diam = surf.diameters()
    iu, ju = np.triu_indices(m, k=1)
    if ti.size:
        key = iu.astype(np.int64) * m + ju
        mask = ~np.isin(key, ti.astype(np.int64) * m + tj)
        iu, ju = iu[mask], ju[mask]
    dist = np.linalg.norm(cent[iu] - cent[ju], axis=1) / np.maximum(diam[iu], diam[ju])
    band = np.searchsorted(np.asarray(opts.ratios), dist, side="right")
    for b, order in enumerate((opts.near, opts.mid, opts.far, opts.distant)):
        mask = band == b
        a_all, b_all = iu[mask], ju[mask]
        if a_all.size == 0:
            continue
        lam, wq = triangle_rule(order)
        step = 100_000
        for start in range(0, a_all.size, step):
            a_ids, b_ids = a_all[start:start + step], b_all[start:start + step]
            ga, gb = tris[a_ids], tris[b_ids]
            S, Kab, Kba = _kernels.tensor_pairs(
                np.ascontiguousarray(pts[ga]), np.ascontiguousarray(pts[gb]), lam, wq,
                areas[a_ids] * areas[b_ids], normals[a_ids], normals[b_ids], k, want_k,
            )
            _add_blocks(acc, ga, gb, S, Kab, Kba, want_s, want_k)
    for name in ("S", "K"):
        mat = getattr(acc, name)
        if mat is not None and not np.all(np.isfinite(mat)):
            bad = np.argwhere(~np.isfinite(mat))[:5]
            raise QuadratureError(f"non-finite {name} entries at node pairs {bad.tolist()}")
    return acc.S, acc.K


def assemble_single_layer(surf: BoundarySurface, k0: float, opts: AssemblyOptions | None = None) -> np.ndarray:
    S, _ = _assemble(surf, k0, opts or AssemblyOptions(), want_s=True, want_k=False)
    return S


def assemble_double_layer(surf: BoundarySurface, k0: float, opts: AssemblyOptions | None = None) -> np.ndarray:
    _, K = _assemble(surf, k0, opts or AssemblyOptions(), want_s=False, want_k=True)
    return 0.5 * surf.mass_matrix().toarray() - K


def assemble_sie(surf: BoundarySurface, k0: float, opts: AssemblyOptions | None = None) -> SIEMatrices:
    """Both operators from one pass over the panel pairs."""
    S, K = _assemble(surf, k0, opts or AssemblyOptions())
    M = surf.mass_matrix().toarray()
    return SIEMatrices(S=S, D=0.5 * M - K, k0=k0, M=M)


def assemble_rhs(surf: BoundarySurface, wave: PlaneWave, which, order: int = 4) -> np.ndarray:
    """Load vector f_m = int h_m alpha_inc over the boundary.

    ``which`` is one of "Ax", "Ay", "Az", "Phis" (or "Phi"), or a callable
    returning the incident values at an (n, 3) array of points.
    """
    lam, w = triangle_rule(order)
    v = surf.points[surf.triangles]
    x = np.einsum("qi,tik->tqk", lam, v)
    if callable(which):
        vals = np.asarray(which(x.reshape(-1, 3))).reshape(x.shape[:2])
    else:
        vals = incident_component(wave, x.reshape(-1, 3), which).reshape(x.shape[:2])
    loc = np.einsum("qi,tq,q->ti", lam, vals, w) * surf.areas[:, None]
    f = np.zeros(len(surf.points), dtype=complex)
    for k in range(3):
        np.add.at(f, surf.triangles[:, k], loc[:, k])
    return f


# --- off-surface potentials ------------------------------------------------------


def layer_potentials(
    surf: BoundarySurface,
    k0: float,
    points: np.ndarray,
    alpha: np.ndarray | None,
    beta: np.ndarray | None,
    near_factor: float = 3.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate D[alpha](r) and S[beta](r) at points off the surface.

    alpha, beta are nodal P1 coefficients, shape (N0b,) or (N0b, c) for c
    densities at once; either may be None.  Returns two arrays shaped
    (len(points),) or (len(points), c).  Panels closer than ``near_factor``
    diameters use 1 to 3 levels of uniform subdivision of the seven-point
    rule.
    """
    points = np.ascontiguousarray(np.atleast_2d(points), dtype=float)
    lam, w = strang_fix7()
    v = surf.points[surf.triangles]
    use_a, use_b = alpha is not None, beta is not None
    single = (np.ndim(alpha) if use_a else np.ndim(beta)) == 1
    nb = len(surf.points)
    alpha = np.asarray(alpha, dtype=complex).reshape(nb, -1) if use_a else None
    beta = np.asarray(beta, dtype=complex).reshape(nb, -1) if use_b else None
    if alpha is None:
        alpha = np.zeros_like(beta)
    if beta is None:
        beta = np.zeros_like(alpha)

    def rule_data(lam_r, w_r, tris):
        y = np.einsum("qi,tik->tqk", lam_r, v[tris]).reshape(-1, 3)
        wy = (w_r[None, :] * surf.areas[tris, None]).reshape(-1)
        ny = np.repeat(surf.normals[tris], len(w_r), axis=0)
        ay = np.einsum("qi,tic->tqc", lam_r, alpha[surf.triangles[tris]]).reshape(-1, alpha.shape[1])
        by = np.einsum("qi,tic->tqc", lam_r, beta[surf.triangles[tris]]).reshape(-1, beta.shape[1])
        return y, wy, ny, ay, by

    def contrib(r, data):
        return _kernels.potentials(r, *data, k0, use_a, use_b)

    everything = np.arange(len(surf.triangles))
    dvals, svals = contrib(points, rule_data(lam, w, everything))

    # near-panel refinement: swap the base rule for a subdivided one
    cent = surf.centroids()
    diam = surf.diameters()
    tree = cKDTree(points)
    rules = {lev: subdivided_rule((lam, w), lev) for lev in (1, 2, 3)}
    for t in range(len(surf.triangles)):
        idx = np.asarray(tree.query_ball_point(cent[t], near_factor * diam[t]), dtype=int)
        if idx.size == 0:
            continue
        q = np.linalg.norm(points[idx] - cent[t], axis=1) / diam[t]
        lev = np.where(q < 0.75, 3, np.where(q < 1.5, 2, 1))
        base = rule_data(lam, w, everything[t:t + 1])
        for L in (1, 2, 3):
            sel = idx[lev == L]
            if sel.size == 0:
                continue
            fine_d, fine_s = contrib(points[sel], rule_data(*rules[L], everything[t:t + 1]))
            base_d, base_s = contrib(points[sel], base)
            dvals[sel] += fine_d - base_d
            svals[sel] += fine_s - base_s
    if single:
        return dvals[:, 0], svals[:, 0]
    return dvals, svals
