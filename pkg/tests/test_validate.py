import numpy as np
import pytest

from decsie import hybrid, sie, validate
from decsie.hybrid import COMPONENTS, ScatteringProblem, SolutionFields, SolverSettings
from decsie.mie import LayeredSphere

from conftest import AIR, _cached, sphere

K0 = 2 * np.pi / 3
WAVE = sie.PlaneWave((1, 0, 0), (0, 0, -1), K0)
SOURCE = np.array([0.01, 0.02, -0.015])


def _point_source(r):
    R = np.linalg.norm(r - SOURCE, axis=1)
    return np.exp(1j * K0 * R) / (4 * np.pi * R)


def _point_source_dn(r, n):
    d = r - SOURCE
    R = np.linalg.norm(d, axis=1)
    return (1j * K0 * R - 1) * np.exp(1j * K0 * R) / (4 * np.pi * R**3) * np.sum(d * n, axis=1)


def _incident_dn(which, r, n, h=1e-6):
    g = [(sie.incident_component(WAVE, r + h * e, which) - sie.incident_component(WAVE, r - h * e, which)) / (2 * h)
         for e in np.eye(3)]
    return np.sum(np.stack(g, 1) * n, axis=1)


@pytest.fixture(scope="module")
def vacuum_problem():
    cplx, mat = _cached("sphere_1k", ((1, 1.0), (AIR, 1.0)))
    return ScatteringProblem(cplx, mat, WAVE)


def _synthetic(problem, sign=1.0):
    """Incident field plus a radiating point source inside the surface."""
    cplx, surf = problem.cplx, problem.surf
    nn = surf.node_normals()
    u = np.stack([sie.incident_component(WAVE, cplx.nodes, c) + _point_source(cplx.nodes) for c in COMPONENTS])
    dn = np.stack([_incident_dn(c, surf.points, nn) + sign * _point_source_dn(surf.points, nn) for c in COMPONENTS])
    return SolutionFields(a=u[:3], phi_s=u[3], dn_a=dn[:3], dn_phi_s=dn[3])


def test_extinction_of_radiating_field_is_small(vacuum_problem):
    res = validate.extinction_residuals(vacuum_problem, _synthetic(vacuum_problem))
    for comp in COMPONENTS:
        assert res[comp].delta < 1e-2 and not res[comp].degenerate
    # a wrong normal derivative is detected
    bad = validate.extinction_residuals(vacuum_problem, _synthetic(vacuum_problem, sign=-1.0))
    assert min(r.delta for r in bad.values()) > 0.1


def test_extinction_of_solution(vacuum_problem):
    sol = hybrid.solve(vacuum_problem)
    row = validate.extinction_row(vacuum_problem, sol)
    assert row["n_tets"] == len(vacuum_problem.cplx.tets)
    # z-incidence with x polarisation: A~x and A~y vanish identically
    assert np.isnan(row["delta_Ax"]) and np.isnan(row["delta_Ay"])
    assert row["delta_Az"] < 1e-3 and row["delta_Phis"] < 1e-3
    values, delta = validate.extinction_residual(vacuum_problem, sol, "Phis")
    assert delta == row["delta_Phis"] and values.shape == (len(vacuum_problem.cplx.tets),)


def test_extinction_needs_traces(vacuum_problem):
    n = len(vacuum_problem.cplx.nodes)
    with pytest.raises(hybrid.SolverError):
        validate.extinction_residuals(vacuum_problem, SolutionFields(a=np.zeros((3, n)), phi_s=np.zeros(n)))


def test_geometry_check():
    cplx, mat = sphere("sphere_1k")
    validate.check_sphere_geometry(cplx, mat, LayeredSphere.homogeneous(0.1, 2.25))
    with pytest.raises(validate.GeometryError):
        validate.check_sphere_geometry(cplx, mat, LayeredSphere.homogeneous(0.1, 4.0))
    with pytest.raises(validate.GeometryError):
        validate.check_sphere_geometry(cplx, mat, LayeredSphere.homogeneous(0.05, 2.25))


def test_mie_errors_of_vacuum(vacuum_problem):
    sol = hybrid.solve(vacuum_problem)
    rep = validate.mie_errors(vacuum_problem, sol, LayeredSphere.homogeneous(0.1, 1.0))
    assert 0 < rep.relative_error < 0.05
    row = rep.row()
    assert set(row) == {"n_tets", "err_x", "err_y", "err_z", "rel_error"}
    assert np.sqrt(np.sum(rep.component_errors**2) / np.sum(rep.reference_norms**2)) == pytest.approx(rep.relative_error)


def test_permittivity_sweep_reuses_surface(monkeypatch):
    cplx, mat = sphere("sphere_1k")
    tags = mat.tags
    calls = []
    real = hybrid.assemble_sie
    monkeypatch.setattr(hybrid, "assemble_sie", lambda *a, **k: calls.append(1) or real(*a, **k))
    rows = validate.sweep_permittivity([("c", cplx, tags)], [1.0, 3.0], np.pi / 25,
                                       settings=SolverSettings(method="gmres"))
    assert len(calls) == 1
    assert [r["eps_s"] for r in rows] == [1.0, 3.0]
    assert all(r["status"] == "ok" and r["residual"] <= 1e-13 for r in rows)
    assert rows[0]["rel_error"] < rows[1]["rel_error"]


def test_frequency_sweep_rows():
    cplx, mat = sphere("sphere_1k")
    rows = validate.sweep_frequency(cplx, mat, LayeredSphere.homogeneous(0.1, 2.25), [1e-3, 0.2],
                                    settings=SolverSettings(condition="off"))
    assert [r["k0a"] for r in rows] == [1e-3, 0.2]
    assert all(np.isfinite(r["condition"]) and r["status"] == "ok" for r in rows)
    assert rows[1]["k0"] == pytest.approx(2.0)


def _rows(errs, n=(1000, 5000, 13000)):
    return [{"n_tets": t, "rel_error": e, "status": "ok"} for t, e in zip(n, errs)]


def test_check_refinement():
    labels = validate.check_refinement(_rows([0.06, 0.03, 0.02]), {1300: 0.08, 13000: 0.03})
    assert all(p for _, p, _ in labels) and len(labels) == 3
    assert not validate.check_refinement(_rows([0.06, 0.07, 0.02]))[0][1]
    assert not validate.check_refinement(_rows([0.06, 0.03, 0.02]), {30000: 0.1})[1][1]
    assert validate.check_error_range(_rows([0.1, 0.05]), 1500, 0.05, 0.3)[0][1]
    assert not validate.check_error_range(_rows([0.01, 0.005]), 1500, 0.05, 0.3)[0][1]


def test_check_permittivity():
    rows = [{"mesh": "m", "eps_s": e, "rel_error": r, "residual": 5e-14, "status": "ok"}
            for e, r in [(1.0, 1e-3), (5.0, 0.01), (15.0, 0.0095), (30.0, 0.05)]]
    assert all(p for _, p, _ in validate.check_permittivity(rows))
    rows[2]["rel_error"] = 0.005
    assert not validate.check_permittivity(rows)[-1][1]
    rows[0]["residual"] = 1e-10
    assert not validate.check_permittivity(rows)[0][1]


def test_check_frequency_and_extinction():
    rows = [{"k0a": k, "rel_error": e, "condition": c, "status": "ok"}
            for k, e, c in [(1e-4, 0.02, 100.0), (0.2, 0.025, 120.0), (1.0, 0.06, 900.0)]]
    cond, err = validate.check_frequency(rows)
    assert cond[1] and not err[1]
    ext = validate.check_extinction([{"n_tets": 1, "delta_Az": 2e-4}, {"n_tets": 2, "delta_Az": 2.2e-4}])
    assert all(p for _, p, _ in ext)
    ext = validate.check_extinction([{"n_tets": 1, "delta_Az": 2e-4}, {"n_tets": 2, "delta_Az": 3e-4}])
    assert ext[0][1] and not ext[1][1]
