"""Validation drivers: extinction residual, Mie error reports and sweeps.

Every driver returns plain row dictionaries so the CLI can stream them to
CSV; nothing here writes files.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial import cKDTree

from .fields import FieldError, component_norms, l2_norm, reconstruct_E
from .hybrid import COMPONENTS, ScatteringProblem, SolverError, SolverSettings, assemble_blocks, solve
from .mesh import MaterialField, SimplicialComplex3
from .mie import LayeredSphere, mie_field
from .sie import AssemblyOptions, PlaneWave, incident_component, layer_potentials

log = logging.getLogger(__name__)


class GeometryError(ValueError):
    """The mesh materials do not describe the requested layered sphere."""


@dataclass
class ExtinctionResult:
    component: str
    values: np.ndarray  # e_u at tet centroids (NaN where excluded)
    delta: float
    excluded: int
    degenerate: bool  # ||u|| = 0, delta reported as NaN


def _observation_mask(problem: ScatteringProblem, pts: np.ndarray) -> np.ndarray:
    """True for centroids at least 1e-3 local panel sizes away from the surface."""
    surf = problem.surf
    tree = cKDTree(surf.centroids())
    dist, idx = tree.query(pts)
    # the nearest panel centroid overestimates the distance by at most a diameter
    diam = surf.diameters()[idx]
    near = dist < diam
    keep = np.ones(len(pts), dtype=bool)
    if np.any(near):
        v = surf.points[surf.triangles[idx[near]]]
        n = surf.normals[idx[near]]
        plane = np.abs(np.einsum("ij,ij->i", pts[near] - v[:, 0], n))
        keep[np.flatnonzero(near)] = plane >= 1e-3 * diam[near]
    return keep


def extinction_residuals(problem: ScatteringProblem, sol, components=COMPONENTS) -> dict[str, ExtinctionResult]:
    """e_u = u_inc - S[dn u] + D[u] at tet centroids for each component.

    All components share one pass over the surface quadrature.
    """
    if sol.dn_a is None:
        raise SolverError("solution carries no boundary normal derivatives")
    cplx, surf = problem.cplx, problem.surf
    pts = cplx.centroids()
    keep = _observation_mask(problem, pts)
    alpha = np.stack([sol.component(c)[surf.node_ids] for c in components], axis=1)
    beta = np.stack([sol.trace_derivative(c) for c in components], axis=1)
    dv, sv = layer_potentials(surf, problem.k0, pts[keep], alpha, beta)
    vol = cplx.volumes()
    out = {}
    for j, comp in enumerate(components):
        e = np.full(len(pts), np.nan, dtype=complex)
        e[keep] = incident_component(problem.wave, pts[keep], comp) - sv[:, j] + dv[:, j]
        u = sol.component(comp)[cplx.tets].mean(axis=1)
        unorm = l2_norm(u[keep], vol[keep])
        enorm = l2_norm(e[keep], vol[keep])
        degenerate = unorm == 0.0
        delta = float("nan") if degenerate else enorm / unorm
        out[comp] = ExtinctionResult(comp, e, delta, int((~keep).sum()), degenerate)
    if (~keep).any():
        log.info("extinction: %d centroids too close to the surface were excluded", int((~keep).sum()))
    return out


def extinction_residual(problem: ScatteringProblem, sol, component: str) -> tuple[np.ndarray, float]:
    res = extinction_residuals(problem, sol, (component,))[component]
    return res.values, res.delta


def extinction_row(problem: ScatteringProblem, sol) -> dict:
    res = extinction_residuals(problem, sol)
    row = {"n_tets": len(problem.cplx.tets)}
    row.update({f"delta_{c}": res[c].delta for c in COMPONENTS})
    return row


@dataclass
class MieReport:
    n_tets: int
    component_errors: np.ndarray  # ||E_tau^err||, tau = x, y, z
    reference_norms: np.ndarray
    relative_error: float

    def row(self) -> dict:
        ex, ey, ez = self.component_errors
        return {"n_tets": self.n_tets, "err_x": ex, "err_y": ey, "err_z": ez, "rel_error": self.relative_error}


def check_sphere_geometry(cplx: SimplicialComplex3, material: MaterialField, sphere: LayeredSphere,
                          tolerance: float = 0.05) -> None:
    """Raise GeometryError when the mesh materials disagree with ``sphere``.

    Faceted interfaces misplace a thin sliver of volume, so mismatches are
    accepted up to ``tolerance`` of the scatterer volume.
    """
    c = cplx.centroids()
    layer = sphere.layer_of(np.linalg.norm(c, axis=1))
    eps_all = np.append(np.asarray(sphere.eps, dtype=complex), 1.0)
    expected = eps_all[layer]
    bad = np.abs(expected - np.asarray(material.eps)) > 1e-9 * np.maximum(1.0, np.abs(expected))
    vol = cplx.volumes()
    scatterer = vol[layer < len(sphere.radii)].sum()
    frac = vol[bad].sum() / max(scatterer, 1e-300)
    if frac > tolerance:
        raise GeometryError(
            f"mesh permittivities do not match the layered sphere ({frac:.1%} of the scatterer volume differs)"
        )


def mie_errors(problem: ScatteringProblem, sol, sphere: LayeredSphere, check: bool = True) -> MieReport:
    cplx = problem.cplx
    if check:
        check_sphere_geometry(cplx, problem.material, sphere)
    E = reconstruct_E(sol.a, sol.phi_s, cplx, problem.k0)
    E_ref = mie_field(sphere, problem.wave, cplx.centroids())
    vol = cplx.volumes()
    err = component_norms(E - E_ref, vol)
    ref = component_norms(E_ref, vol)
    denom = np.sqrt(np.sum(ref**2))
    if denom == 0:
        raise FieldError("reference field has zero norm")
    return MieReport(len(cplx.tets), err, ref, float(np.sqrt(np.sum(err**2)) / denom))


def sphere_material(cplx: SimplicialComplex3, tags: np.ndarray, eps_by_tag: dict) -> MaterialField:
    eps = np.ones(len(tags), dtype=complex)
    for tag, val in eps_by_tag.items():
        eps[tags == tag] = val
    return MaterialField(eps, tags)


def _solve_row(problem, blocks, sphere):
    """One solve plus Mie comparison; solver failures become a status field."""
    try:
        sol = solve(problem, blocks)
        rep = mie_errors(problem, sol, sphere)
    except (SolverError, FieldError) as exc:
        log.warning("sweep point failed: %s", exc)
        return {"status": f"error: {exc}"}, None
    row = rep.row()
    row.update({
        "iterations": sol.iterations,
        "residual": sol.residual,
        "converged": sol.converged,
        "condition": sol.condition,
        "status": "ok" if sol.converged else "not converged",
    })
    return row, sol


def refinement_ladder(meshes, sphere: LayeredSphere, wave: PlaneWave, settings: SolverSettings | None = None,
                      quadrature: AssemblyOptions | None = None) -> list[dict]:
    """Mie error report on each (name, cplx, material) rung."""
    rows = []
    for name, cplx, mat in meshes:
        prob = ScatteringProblem(cplx, mat, wave, settings=settings or SolverSettings(),
                                 quadrature=quadrature or AssemblyOptions())
        row, _ = _solve_row(prob, None, sphere)
        rows.append({"mesh": name, **row})
    return rows


def sweep_permittivity(meshes, eps_values, k0: float, radius: float = 0.1, scatterer_tag: int = 1,
                       settings: SolverSettings | None = None, quadrature: AssemblyOptions | None = None,
                       wave: PlaneWave | None = None) -> list[dict]:
    """Relative error of a homogeneous sphere versus eps_s on each mesh.

    ``meshes`` holds (name, cplx, tags).  The surface matrices depend only on
    the truncation surface and k0, so they are assembled once per mesh.
    """
    wave = (wave or PlaneWave([1, 0, 0], [0, 0, -1], k0)).with_k0(k0)
    rows = []
    for name, cplx, tags in meshes:
        sie_mats, surf = None, None
        for eps in eps_values:
            mat = sphere_material(cplx, tags, {scatterer_tag: eps})
            prob = ScatteringProblem(cplx, mat, wave, surf=surf, settings=settings or SolverSettings(),
                                     quadrature=quadrature or AssemblyOptions())
            surf = prob.surf
            blocks = assemble_blocks(prob, sie_mats)
            sie_mats = blocks.sie
            row, _ = _solve_row(prob, blocks, LayeredSphere.homogeneous(radius, eps))
            rows.append({"mesh": name, "n_tets": len(cplx.tets), "eps_s": eps, **row})
    return rows


def sweep_frequency(cplx: SimplicialComplex3, material: MaterialField, sphere: LayeredSphere, k0a_values,
                    settings: SolverSettings | None = None, quadrature: AssemblyOptions | None = None,
                    wave: PlaneWave | None = None) -> list[dict]:
    """Relative error and condition estimate versus k0 a on a fixed mesh."""
    base = wave or PlaneWave([1, 0, 0], [0, 0, -1], 1.0)
    settings = settings or SolverSettings()
    if settings.condition == "off":
        settings = replace(settings, condition="estimate")
    rows = []
    surf = None
    for k0a in k0a_values:
        k0 = float(k0a) / sphere.outer_radius
        prob = ScatteringProblem(cplx, material, base.with_k0(k0), surf=surf, settings=settings,
                                 quadrature=quadrature or AssemblyOptions())
        surf = prob.surf
        row, _ = _solve_row(prob, None, sphere)
        rows.append({"k0a": float(k0a), "k0": k0, **row})
    return rows


# band checks shared by ``--check`` and the acceptance suite; each returns
# (label, passed, detail) tuples


def _finite(rows, key):
    return [r.get(key, float("nan")) for r in rows]


def check_refinement(rows, bounds: dict[int, float] | None = None, tet_tolerance: float = 0.5):
    """Strict decrease along the ladder, plus optional per-size upper bounds.

    ``bounds`` maps a nominal tet count to a maximum error; it applies to
    rungs within ``tet_tolerance`` (relative) of that count.
    """
    out = []
    ok = all(r.get("status") == "ok" for r in rows)
    errs = _finite(rows, "rel_error")
    dec = ok and len(rows) >= 2 and all(b < a for a, b in zip(errs, errs[1:]))
    out.append(("error decreases along refinement", dec, " > ".join(f"{e:.4g}" for e in errs)))
    for nominal, bound in (bounds or {}).items():
        near = [r for r in rows if abs(r.get("n_tets", 0) - nominal) <= tet_tolerance * nominal]
        if not near:
            out.append((f"error <= {bound} at ~{nominal} tets", False, "no rung of that size"))
            continue
        r = min(near, key=lambda r: abs(r["n_tets"] - nominal))
        out.append((f"error <= {bound} at ~{nominal} tets", r["rel_error"] <= bound,
                    f"{r['rel_error']:.4g} at {r['n_tets']} tets"))
    return out


def check_error_range(rows, nominal: int, lo: float, hi: float, tet_tolerance: float = 0.5):
    near = [r for r in rows if abs(r.get("n_tets", 0) - nominal) <= tet_tolerance * nominal]
    if not near:
        return [(f"error in [{lo}, {hi}] at ~{nominal} tets", False, "no rung of that size")]
    r = min(near, key=lambda r: abs(r["n_tets"] - nominal))
    return [(f"error in [{lo}, {hi}] at ~{nominal} tets", lo <= r["rel_error"] <= hi,
             f"{r['rel_error']:.4g} at {r['n_tets']} tets")]


def check_permittivity(rows, tol: float = 1e-13, noise: float = 0.1):
    out = []
    res = _finite(rows, "residual")
    ok = all(r.get("status") == "ok" for r in rows) and all(x <= tol * 1.0001 for x in res)
    out.append((f"converged to {tol:g} at every eps", ok, "max residual %.3g" % max(res, default=np.nan)))
    for name in dict.fromkeys(r["mesh"] for r in rows):
        rs = sorted((r for r in rows if r["mesh"] == name), key=lambda r: r["eps_s"])
        unit = [r for r in rs if r["eps_s"] == 1.0]
        if unit:
            out.append((f"{name}: error at eps=1 < 1e-2", unit[0]["rel_error"] < 1e-2, f"{unit[0]['rel_error']:.3g}"))
        errs = [r["rel_error"] for r in rs]
        mono = all(b >= a * (1 - noise) for a, b in zip(errs, errs[1:]))
        out.append((f"{name}: error nondecreasing in eps", mono, ", ".join(f"{e:.3g}" for e in errs)))
    return out


def check_frequency(rows, reference_k0a: float = 0.2):
    ok = [r for r in rows if r.get("status") == "ok"]
    if len(ok) != len(rows) or not rows:
        return [("all sweep points solved", False, f"{len(ok)}/{len(rows)}")]
    cond = [r["condition"] for r in rows]
    ratio = max(cond) / min(cond)
    ref = min(rows, key=lambda r: abs(np.log(r["k0a"] / reference_k0a)))
    worst = max(r["rel_error"] for r in rows)
    return [
        ("condition varies by < 10x", ratio < 10.0, f"max/min = {ratio:.3g}"),
        (f"error <= 2x its value at k0a = {ref['k0a']:g}", worst <= 2.0 * ref["rel_error"],
         f"max {worst:.4g} vs reference {ref['rel_error']:.4g}"),
    ]


def check_extinction(rows, bound: float = 1e-3, slack: float = 0.2):
    keys = [k for k in rows[0] if k.startswith("delta_")] if rows else []
    out = []
    for k in keys:
        vals = [r[k] for r in rows]
        out.append((f"{k} <= {bound:g}", all(v <= bound for v in vals), ", ".join(f"{v:.3g}" for v in vals)))
        if len(vals) > 1:
            mono = all(b <= a * (1 + slack) for a, b in zip(vals, vals[1:]))
            out.append((f"{k} nonincreasing under refinement", mono, ""))
    return out
