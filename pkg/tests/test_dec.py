import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from decsie import dec
from decsie.mesh import MaterialField, simplex_measures

from conftest import reference_tet, two_tets
from oracles import reference_hodge1, reference_hodge2


def test_hodge1_matches_quadrature_oracle():
    cplx = reference_tet()
    oracle = reference_hodge1(cplx.edges)
    H1 = dec.hodge1_galerkin(cplx).toarray()
    assert np.max(np.abs(H1 - oracle)) < 1e-12


def test_hodge2_matches_quadrature_oracle_and_is_spd():
    cplx = reference_tet()
    oracle = reference_hodge2(cplx.triangles)
    H2 = dec.hodge2_galerkin(cplx).toarray()
    assert np.max(np.abs(H2 - oracle)) < 1e-12
    assert np.allclose(H2, H2.T)
    assert np.linalg.eigvalsh(H2).min() > 0
    assert np.allclose(dec.hodge2_galerkin(cplx, 2.0).toarray(), 2 * H2)


def test_edge_row_of_d0():
    cplx = reference_tet()
    D0 = dec.exterior_derivative(cplx, 0).toarray()
    for row, (a, b) in zip(D0, cplx.edges):
        assert row[a] == -1 and row[b] == 1 and np.count_nonzero(row) == 2


def test_complex_property_exact(sphere_c):
    cplx, _ = sphere_c
    d0, d1, d2 = (dec.exterior_derivative(cplx, k) for k in range(3))
    assert d0.dtype.kind == "i"
    assert (d1 @ d0).count_nonzero() == 0
    assert (d2 @ d1).count_nonzero() == 0
    for m in (d0, d1, d2):
        assert set(np.unique(m.data).tolist()) <= {-1, 1}


def test_boundary_derivatives(sphere_c_surface):
    surf = sphere_c_surface
    b0 = dec.boundary_exterior_derivative(surf, 0)
    b1 = dec.boundary_exterior_derivative(surf, 1)
    assert (b1 @ b0).count_nonzero() == 0
    assert np.all(np.asarray(b0.sum(axis=1)).ravel() == 0)
    assert np.linalg.matrix_rank(b0.toarray()) == surf.counts[0] - 1


def test_dual_derivative_is_signed_transpose():
    cplx = reference_tet()
    for k in range(3):
        dual = dec.dual_derivative(cplx, k)
        primal = dec.exterior_derivative(cplx, 2 - k)
        assert np.array_equal(dual.toarray(), (-1) ** (3 - k) * primal.T.toarray())


def test_hodge0_formulas(sphere_c):
    tet = reference_tet()
    assert np.allclose(dec.hodge0(tet, 2.0).diagonal(), 2 * (1 / 6) / 4)
    cplx = two_tets()
    vol = cplx.volumes()
    d = dec.hodge0(cplx, np.array([1.0, 3.0])).diagonal()
    assert np.allclose(d[:3], (vol[0] + 3 * vol[1]) / 4)
    big, _ = sphere_c
    assert dec.hodge0(big).diagonal().sum() == pytest.approx(big.volumes().sum(), rel=1e-13)


def test_hodge3_single_tet():
    assert dec.hodge3(reference_tet()).diagonal()[0] == pytest.approx(6.0)


def test_hodges_spd_on_sphere(sphere_c):
    cplx, _ = sphere_c
    H1 = dec.hodge1_galerkin(cplx)
    assert abs(H1 - H1.T).max() < 1e-13 * abs(H1).max()
    assert np.linalg.eigvalsh(H1.toarray()).min() > 0
    H2 = dec.hodge2_galerkin(cplx)
    assert np.linalg.eigvalsh(H2.toarray()).min() > 0
    assert dec.hodge0(cplx).diagonal().min() > 0
    assert dec.hodge3(cplx).diagonal().min() > 0


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 50.0))
def test_hodge1_linear_in_xi(scale):
    cplx = two_tets()
    base = dec.hodge1_galerkin(cplx, np.array([1.0, 2.0]))
    scaled = dec.hodge1_galerkin(cplx, scale * np.array([1.0, 2.0]))
    assert abs(scaled - scale * base).max() <= 1e-12 * scale * abs(base).max()


def test_laplacian_kills_constants(sphere_c):
    cplx, _ = sphere_c
    d0 = dec.exterior_derivative(cplx, 0)
    lap = d0.T @ dec.hodge1_galerkin(cplx) @ d0
    assert np.abs(lap @ np.ones(len(cplx.nodes))).max() < 1e-14


def test_material_gradient_two_tets():
    cplx = two_tets()
    mat = MaterialField(np.array([1.0, 3.0]))
    # face z = 0 (area 1/2); normal runs from tet 0 (z > 0) to tet 1 (z < 0): n = -z
    Gz = dec.hodge0_material_gradient(cplx, mat, "z").toarray()
    face = [0, 1, 2]
    expect = -2.0 * 0.5 * (np.ones((3, 3)) + np.eye(3)) / 12
    assert np.allclose(Gz[np.ix_(face, face)], expect, atol=1e-15)
    assert np.allclose(Gz[3:], 0) and np.allclose(Gz[:, 3:], 0)
    for tau in "xy":
        assert abs(dec.hodge0_material_gradient(cplx, mat, tau)).max() < 1e-16
    swapped = dec.hodge0_material_gradient(cplx, MaterialField(np.array([3.0, 1.0])), "z").toarray()
    assert np.allclose(swapped, -Gz)
    assert dec.hodge0_material_gradient(cplx, MaterialField(np.ones(2)), "z").nnz == 0


def test_material_gradient_total_flux(sphere_c):
    cplx, mat = sphere_c
    tri, ta, tb = dec.interior_faces(cplx)
    eps = mat.eps
    p = cplx.nodes[cplx.triangles[tri]]
    nrm = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    area = 0.5 * np.linalg.norm(nrm, axis=1)
    nrm /= 2 * area[:, None]
    c = cplx.centroids()
    nrm *= np.sign(np.einsum("ij,ij->i", nrm, c[tb] - c[ta]))[:, None]
    one = np.ones(len(cplx.nodes))
    for axis in range(3):
        G = dec.hodge0_material_gradient(cplx, mat, axis)
        assert abs(G - G.T).max() <= 1e-13 * abs(G).max()
        expect = np.sum((eps[tb] - eps[ta]) * nrm[:, axis] * area)
        assert one @ G @ one == pytest.approx(expect, abs=1e-14)


def test_selection_matrices(sphere_c, sphere_c_surface):
    cplx, _ = sphere_c
    surf = sphere_c_surface
    P0, P2 = dec.selection_matrices(cplx, surf)
    assert np.array_equal(P0 @ np.ones(len(cplx.nodes)), np.ones(len(surf.node_ids)))
    diag = (P0.T @ P0).diagonal()
    mask = np.zeros(len(cplx.nodes))
    mask[surf.node_ids] = 1
    assert np.array_equal(diag, mask) and (P0.T @ P0 - sp.diags(diag)).count_nonzero() == 0
    _, areas, _ = simplex_measures(cplx)
    assert np.allclose(P2 @ areas, surf.areas)


def test_interpolation_and_complement(sphere_c, sphere_c_surface):
    cplx, _ = sphere_c
    surf = sphere_c_surface
    Q = dec.interpolation_operator(surf)
    assert np.allclose(Q @ np.ones(surf.counts[0]), 1.0, atol=1e-15)
    D2c = dec.complement_operator(cplx, surf)
    got = D2c @ np.ones(surf.counts[0])
    expect = np.zeros(len(cplx.nodes))
    local = np.zeros(surf.counts[0])
    for k in range(3):
        np.add.at(local, surf.triangles[:, k], surf.areas / 3)
    expect[surf.node_ids] = local
    assert np.allclose(got, expect, rtol=1e-13, atol=1e-18)
    assert got.sum() == pytest.approx(surf.areas.sum(), rel=1e-13)


def test_matrix_market_dump(tmp_path):
    import scipy.io

    cplx = reference_tet()
    D0 = dec.exterior_derivative(cplx, 0)
    dec.write_matrix_market(tmp_path / "d0.mtx", D0)
    back = scipy.io.mmread(str(tmp_path / "d0.mtx"))
    assert np.array_equal(back.toarray(), D0.toarray())
