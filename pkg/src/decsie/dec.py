"""Discrete exterior calculus operators on a tetrahedral complex and its boundary.

All operators are returned as ``scipy.sparse.csr_matrix``.  Incidence matrices
are integer valued; Hodge matrices carry the (possibly complex) material
weight ``xi`` given per tetrahedron.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .mesh import BoundarySurface, MaterialField, SimplicialComplex3, _TET_EDGES, _TRI_EDGES

_TET_TRIS_LOCAL = np.array([[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]])


def _incidence(rows, cols, signs, shape):
    m = sp.coo_matrix((signs.ravel().astype(np.int64), (rows.ravel(), cols.ravel())), shape=shape)
    return m.tocsr()


def exterior_derivative(cplx: SimplicialComplex3, k: int) -> sp.csr_matrix:
    """Primal exterior derivative D_k, an N_{k+1} x N_k signed incidence matrix."""
    n0, n1, n2, n3 = cplx.counts
    if k == 0:
        e = cplx.edges
        rows = np.repeat(np.arange(n1), 2)
        return _incidence(rows, e.ravel(), np.tile([-1, 1], n1), (n1, n0))
    if k == 1:
        rows = np.repeat(np.arange(n2), 3)
        return _incidence(rows, cplx.tri_edges.ravel(), cplx.tri_edge_signs.ravel(), (n2, n1))
    if k == 2:
        rows = np.repeat(np.arange(n3), 4)
        return _incidence(rows, cplx.tet_tris.ravel(), cplx.tet_tri_signs.ravel(), (n3, n2))
    raise ValueError("k must be 0, 1 or 2")


def dual_derivative(cplx: SimplicialComplex3, k: int) -> sp.csr_matrix:
    """Dual derivative D*_k = (-1)^(3-k) D_{2-k}^T."""
    return ((-1) ** (3 - k)) * exterior_derivative(cplx, 2 - k).T.tocsr()


def boundary_exterior_derivative(surf: BoundarySurface, k: int) -> sp.csr_matrix:
    """D_k on the boundary triangulation (sorted local indices)."""
    n0, n1, n2 = surf.counts
    if k == 0:
        rows = np.repeat(np.arange(n1), 2)
        return _incidence(rows, surf.edges.ravel(), np.tile([-1, 1], n1), (n1, n0))
    if k == 1:
        local = np.sort(surf.triangles, axis=1)
        # orientation relative to the sorted-index triangle [a<b<c]
        signs = np.tile([1, -1, 1], (n2, 1))
        e = np.sort(local[:, _TRI_EDGES].reshape(-1, 2), axis=1)
        key = surf.edges[:, 0] * n0 + surf.edges[:, 1]
        cols = np.searchsorted(key, e[:, 0] * n0 + e[:, 1])
        rows = np.repeat(np.arange(n2), 3)
        return _incidence(rows, cols, signs, (n2, n1))
    raise ValueError("k must be 0 or 1 on the boundary")


def _as_tet_array(cplx, xi):
    xi = np.asarray(xi)
    if xi.ndim == 0:
        xi = np.full(len(cplx.tets), xi)
    if len(xi) != len(cplx.tets):
        raise ValueError("xi must have one value per tetrahedron")
    return xi


def hodge0(cplx: SimplicialComplex3, xi=1.0) -> sp.dia_matrix:
    """Diagonal H0: effective dual volume (1/4) sum_l xi_l |tet_l| of each node."""
    xi = _as_tet_array(cplx, xi)
    w = 0.25 * xi * cplx.volumes()
    d = np.zeros(len(cplx.nodes), dtype=np.result_type(w, float))
    for k in range(4):
        np.add.at(d, cplx.tets[:, k], w)
    return sp.diags(d).tocsr()


def hodge3(cplx: SimplicialComplex3, xi=1.0) -> sp.csr_matrix:
    xi = _as_tet_array(cplx, xi)
    return sp.diags(xi / cplx.volumes()).tocsr()


def _lambda_mass(vol):
    """int_T lambda_i lambda_j = |T| (1 + delta_ij) / 20, shape (N3, 4, 4)."""
    return vol[:, None, None] * (np.ones((4, 4)) + np.eye(4)) / 20.0


def hodge1_galerkin(cplx: SimplicialComplex3, xi=1.0) -> sp.csr_matrix:
    """Galerkin H1 from Whitney 1-form proxies, integrated exactly per tet."""
    xi = _as_tet_array(cplx, xi)
    g = cplx.bary_gradients()
    gg = np.einsum("tik,tjk->tij", g, g)
    mm = _lambda_mass(cplx.volumes())
    a, b = _TET_EDGES[:, 0], _TET_EDGES[:, 1]
    # W_e = l_a grad l_b - l_b grad l_a ;  e = (a, b), f = (c, d)
    A, B = a[:, None], b[:, None]
    C, D = a[None, :], b[None, :]
    loc = (
        gg[:, B, D] * mm[:, A, C]
        - gg[:, B, C] * mm[:, A, D]
        - gg[:, A, D] * mm[:, B, C]
        + gg[:, A, C] * mm[:, B, D]
    )
    loc = loc * xi[:, None, None]
    # local edge [a,b] has a < b locally; orientation flips if global order differs
    nodes = cplx.tets[:, _TET_EDGES]
    s = np.where(nodes[:, :, 0] < nodes[:, :, 1], 1.0, -1.0)
    loc = loc * s[:, :, None] * s[:, None, :]
    return _assemble(loc, cplx.tet_edges, len(cplx.edges))


def hodge2_galerkin(cplx: SimplicialComplex3, xi=1.0) -> sp.csr_matrix:
    """Galerkin H2 from Whitney 2-form proxies, integrated exactly per tet."""
    xi = _as_tet_array(cplx, xi)
    g = cplx.bary_gradients()
    mm = _lambda_mass(cplx.volumes())
    nt = len(cplx.tets)
    # W_t = 2 sum_cyc l_a (grad l_b x grad l_c): three terms (coef node, vector)
    terms_node = _TET_TRIS_LOCAL  # node multiplying each cyclic term
    vec = np.empty((nt, 4, 3, 3))
    for q, (a, b, c) in enumerate(_TET_TRIS_LOCAL):
        vec[:, q, 0] = np.cross(g[:, b], g[:, c])
        vec[:, q, 1] = np.cross(g[:, c], g[:, a])
        vec[:, q, 2] = np.cross(g[:, a], g[:, b])
    dots = np.einsum("tpik,tqjk->tpqij", vec, vec)
    na = terms_node[:, None, :, None]
    nb = terms_node[None, :, None, :]
    lam = mm[:, na, nb]  # (nt, 4, 4, 3, 3)
    loc = 4.0 * (dots * lam).sum(axis=(3, 4)) * xi[:, None, None]
    # global triangle orientation: parity of the global-node permutation
    gl = cplx.tets[:, _TET_TRIS_LOCAL]
    from .mesh import _perm_parity

    s = _perm_parity(gl.reshape(-1, 3)).reshape(nt, 4).astype(float)
    loc = loc * s[:, :, None] * s[:, None, :]
    tri_ids = _local_tri_ids(cplx)
    return _assemble(loc, tri_ids, len(cplx.triangles))


def _local_tri_ids(cplx):
    n = len(cplx.nodes)
    t = cplx.triangles
    key = (t[:, 0] * n + t[:, 1]) * n + t[:, 2]
    loc = np.sort(cplx.tets[:, _TET_TRIS_LOCAL], axis=2)
    q = (loc[..., 0] * n + loc[..., 1]) * n + loc[..., 2]
    return np.searchsorted(key, q)


def _assemble(loc, dofs, n):
    k = dofs.shape[1]
    rows = np.repeat(dofs, k, axis=1).ravel()
    cols = np.tile(dofs, (1, k)).ravel()
    return sp.csr_matrix((loc.ravel(), (rows, cols)), shape=(n, n))


def interior_faces(cplx: SimplicialComplex3):
    """Interior triangles with their (lower, higher) tet indices."""
    flat = cplx.tet_tris.ravel()
    order = np.argsort(flat, kind="stable")
    tri_sorted = flat[order]
    tet_sorted = order // 4
    # pairs of consecutive equal triangle ids
    same = np.flatnonzero(tri_sorted[1:] == tri_sorted[:-1])
    tri = tri_sorted[same]
    t1, t2 = tet_sorted[same], tet_sorted[same + 1]
    return tri, np.minimum(t1, t2), np.maximum(t1, t2)


def hodge0_material_gradient(cplx: SimplicialComplex3, material: MaterialField, tau: int | str) -> sp.csr_matrix:
    """Galerkin Whitney-0 mass of the distributional derivative d eps / d tau.

    Each interior face f between tets A < B contributes
    (eps_B - eps_A) (n_f)_tau int_f lambda_i lambda_j dS, with n_f pointing
    from A into B.
    """
    axis = {"x": 0, "y": 1, "z": 2}.get(tau, tau)
    eps = np.asarray(material.eps)
    tri, ta, tb = interior_faces(cplx)
    jump = eps[tb] - eps[ta]
    keep = jump != 0
    tri, ta, tb, jump = tri[keep], ta[keep], tb[keep], jump[keep]
    n = len(cplx.nodes)
    if tri.size == 0:
        return sp.csr_matrix((n, n), dtype=complex)
    p = cplx.nodes
    v = cplx.triangles[tri]
    nrm = np.cross(p[v[:, 1]] - p[v[:, 0]], p[v[:, 2]] - p[v[:, 0]])
    area = 0.5 * np.linalg.norm(nrm, axis=1)
    nrm /= (2 * area)[:, None]
    c = cplx.centroids()
    flip = np.einsum("ij,ij->i", nrm, c[tb] - c[ta]) < 0
    nrm[flip] *= -1
    local = (np.ones((3, 3)) + np.eye(3)) / 12.0
    loc = (jump * nrm[:, axis] * area)[:, None, None] * local
    return _assemble(loc, v, n)


def selection_matrices(cplx: SimplicialComplex3, surf: BoundarySurface) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """P0 (N0b x N0) picks boundary nodes, P2 (N2b x N2) boundary triangles."""
    nb, n0 = len(surf.node_ids), len(cplx.nodes)
    p0 = sp.csr_matrix((np.ones(nb), (np.arange(nb), surf.node_ids)), shape=(nb, n0))
    mb, n2 = len(surf.tri_ids), len(cplx.triangles)
    p2 = sp.csr_matrix((np.ones(mb), (np.arange(mb), surf.tri_ids)), shape=(mb, n2))
    return p0, p2


def _abs(m):
    out = m.copy()
    out.data = np.abs(out.data)
    return out


def interpolation_operator(surf: BoundarySurface) -> sp.csr_matrix:
    """Q = (1/6)|D1b||D0b|: nodal values to boundary-triangle centroids."""
    d0 = _abs(boundary_exterior_derivative(surf, 0))
    d1 = _abs(boundary_exterior_derivative(surf, 1))
    return (d1 @ d0).tocsr() / 6.0


def complement_operator(cplx: SimplicialComplex3, surf: BoundarySurface, check: bool = True) -> sp.csr_matrix:
    """D2c = (1/6)|D0^T||D1^T| P2^T diag(S) Q, an N0 x N0b matrix.

    With ``check`` the node-to-boundary-triangle counts of |D0^T||D1^T| are
    verified to be exactly 0 or 2, which is what the 1/2 in the prefactor
    assumes.
    """
    d0 = _abs(exterior_derivative(cplx, 0))
    d1 = _abs(exterior_derivative(cplx, 1))
    _, p2 = selection_matrices(cplx, surf)
    node_tri = (d0.T @ d1.T @ p2.T).tocsr()
    if check:
        vals = np.unique(node_tri.data)
        if not set(vals.tolist()) <= {0, 2}:
            raise ValueError(f"|D0^T||D1^T| has entries {vals} on boundary triangles, expected 0 or 2")
    q = interpolation_operator(surf)
    return (node_tri @ sp.diags(surf.areas) @ q).tocsr() / 6.0


def write_matrix_market(path, matrix, comment: str = "") -> None:
    import scipy.io

    scipy.io.mmwrite(str(path), sp.coo_matrix(matrix) if sp.issparse(matrix) else np.asarray(matrix), comment=comment)
