import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from decsie import fields
from decsie.fields import FieldError

from conftest import reference_tet


@pytest.fixture(scope="module")
def unit_cube(cube):
    return cube[0]


def test_gradient_of_constant_and_linear(unit_cube):
    c = unit_cube
    assert np.abs(fields.potential_gradient(np.full(len(c.nodes), 3.0), c)).max() < 1e-12
    g = fields.potential_gradient(c.nodes[:, 0], c)
    assert np.allclose(g, [1.0, 0.0, 0.0], atol=1e-12)


def test_reconstruct_E(unit_cube):
    c = unit_cube
    n = len(c.nodes)
    a = np.zeros((3, n), complex)
    a[1] = 2.0
    E = fields.reconstruct_E(a, 4.0 * c.nodes[:, 2], c, 2.0)
    assert np.allclose(E, [0, 2j, -1.0], atol=1e-12)
    with pytest.raises(FieldError):
        fields.reconstruct_E(a, np.zeros(n), c, 0.0)


@settings(max_examples=20, deadline=None)
@given(st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
       st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False))
def test_reconstruction_is_linear(alpha, beta):
    c = reference_tet()
    rng = np.random.default_rng(3)
    (a1, a2), (p1, p2) = rng.normal(size=(2, 3, 4)), rng.normal(size=(2, 4))
    lhs = fields.reconstruct_E(alpha * a1 + beta * a2, alpha * p1 + beta * p2, c, 1.7)
    rhs = alpha * fields.reconstruct_E(a1, p1, c, 1.7) + beta * fields.reconstruct_E(a2, p2, c, 1.7)
    assert np.abs(lhs - rhs).max() <= 1e-12 * max(1.0, np.abs(lhs).max())


def test_l2_norm_examples(unit_cube):
    vol = unit_cube.volumes()
    assert fields.l2_norm(np.ones(len(vol)), vol) == pytest.approx(1.0, rel=1e-13)
    assert fields.l2_norm(np.full(len(vol), 2.0), vol) == pytest.approx(2.0 * np.sqrt(vol.sum()), rel=1e-13)
    ind = np.zeros(len(vol))
    ind[5] = 1.0
    assert fields.l2_norm(ind, vol) == pytest.approx(np.sqrt(vol[5]), rel=1e-14)
    assert fields.l2_norm(np.tile([0, 3.0, 4j], (len(vol), 1)), vol) == pytest.approx(5.0, rel=1e-13)
    with pytest.raises(FieldError):
        fields.l2_norm(np.ones(3), vol)


def test_relative_error_examples(unit_cube):
    vol = unit_cube.volumes()
    ref = np.random.default_rng(0).normal(size=(len(vol), 3)) + 0j
    assert fields.relative_error(ref, ref, vol) == 0.0
    assert fields.relative_error(1.01 * ref, ref, vol) == pytest.approx(0.01, rel=1e-12)
    with pytest.raises(FieldError):
        fields.relative_error(ref, 0 * ref, vol)


def test_csv_roundtrip(tmp_path):
    x = 0.1 + 0.2
    path = fields.write_csv(tmp_path / "a" / "rows.csv", [{"n": 3, "v": x, "z": 1 - 2.5j}, {"n": 4}])
    rows = list(csv.DictReader(path.open()))
    assert float(rows[0]["v"]) == x
    assert complex(rows[0]["z"]) == 1 - 2.5j
    assert rows[1]["v"] == ""


def test_vtk_output(tmp_path):
    c = reference_tet()
    path = fields.write_vtk(tmp_path / "f.vtk", c, cell_vectors={"E": np.array([[1j, 0, 0]])},
                            point_scalars={"phi": np.arange(4.0)})
    text = path.read_text()
    assert "CELLS 1 5" in text and "VECTORS E_re double" in text and "VECTORS E_im double" in text
    assert "SCALARS E_abs double 1" in text and "POINT_DATA 4" in text
