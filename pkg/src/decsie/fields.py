"""Electric field from the nodal potentials, discrete L2 norms, and file output."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .mesh import SimplicialComplex3


class FieldError(ValueError):
    pass


def reconstruct_E(a: np.ndarray, phi_s: np.ndarray, cplx: SimplicialComplex3, k0: float) -> np.ndarray:
    """E = i A~ - grad(Phi_s) / k0^2 per tetrahedron, shape (N3, 3).

    A~ is averaged over the four vertices (its centroid value); grad Phi_s is
    the exact, piecewise-constant gradient of the linear interpolant.
    """
    if k0 == 0:
        raise FieldError("E is undefined at k0 = 0 (Phi = Phi_s / k0^2); report potentials instead")
    a = np.asarray(a)
    tets = cplx.tets
    a_c = a[:, tets].mean(axis=2).T
    return 1j * a_c - potential_gradient(phi_s, cplx) / k0**2


def potential_gradient(u: np.ndarray, cplx: SimplicialComplex3) -> np.ndarray:
    g = cplx.bary_gradients()  # (N3, 4, 3)
    return np.einsum("tk,tkd->td", np.asarray(u)[cplx.tets], g)


def centroid_values(u: np.ndarray, cplx: SimplicialComplex3) -> np.ndarray:
    return np.asarray(u)[cplx.tets].mean(axis=1)


def l2_norm(u: np.ndarray, volumes: np.ndarray) -> float:
    """(sum_j |u_j|^2 |T_j|)^(1/2); vector-valued rows use their Euclidean magnitude."""
    u = np.asarray(u)
    mag2 = np.abs(u) ** 2 if u.ndim == 1 else np.sum(np.abs(u) ** 2, axis=1)
    if mag2.shape[0] != len(volumes):
        raise FieldError("value count does not match the cell count")
    return float(np.sqrt(np.sum(mag2 * volumes)))


def component_norms(E: np.ndarray, volumes: np.ndarray) -> np.ndarray:
    return np.array([l2_norm(E[:, k], volumes) for k in range(3)])


def relative_error(E_num: np.ndarray, E_ref: np.ndarray, volumes: np.ndarray) -> float:
    err = component_norms(np.asarray(E_num) - np.asarray(E_ref), volumes)
    ref = component_norms(np.asarray(E_ref), volumes)
    denom = np.sqrt(np.sum(ref**2))
    if denom == 0:
        raise FieldError("reference field has zero norm")
    return float(np.sqrt(np.sum(err**2)) / denom)


def fmt(x) -> str:
    """17 significant digits for floats, complex printed as a+bj."""
    if isinstance(x, (complex, np.complexfloating)):
        return f"{x.real:.17g}{x.imag:+.17g}j"
    if isinstance(x, (float, np.floating)):
        return f"{x:.17g}"
    return str(x)


def write_csv(path, rows: list[dict], columns: list[str] | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    columns = columns or list(dict.fromkeys(k for r in rows for k in r))
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt(r.get(c, "")) for c in columns])
    return path


def write_vtk(path, cplx: SimplicialComplex3, cell_vectors: dict | None = None, point_scalars: dict | None = None,
              cell_scalars: dict | None = None, title: str = "fields") -> Path:
    """Legacy ASCII VTK unstructured grid of tetrahedra.

    Complex arrays are split into <name>_re and <name>_im; cell vectors also
    get a <name>_abs magnitude.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    nodes, tets = cplx.nodes, cplx.tets
    out = ["# vtk DataFile Version 3.0", title[:255], "ASCII", "DATASET UNSTRUCTURED_GRID"]
    out.append(f"POINTS {len(nodes)} double")
    out.extend(" ".join(f"{v:.17g}" for v in p) for p in nodes)
    out.append(f"CELLS {len(tets)} {5 * len(tets)}")
    out.extend("4 " + " ".join(map(str, t)) for t in tets)
    out.append(f"CELL_TYPES {len(tets)}")
    out.extend(["10"] * len(tets))

    def scalars(name, vals):
        lines = [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        lines.extend(f"{v:.17g}" for v in vals)
        return lines

    def split(name, arr):
        arr = np.asarray(arr)
        if np.iscomplexobj(arr):
            return [(f"{name}_re", arr.real), (f"{name}_im", arr.imag)]
        return [(name, arr)]

    cell_lines = []
    for name, vec in (cell_vectors or {}).items():
        vec = np.asarray(vec)
        for nm, part in split(name, vec):
            cell_lines.append(f"VECTORS {nm} double")
            cell_lines.extend(" ".join(f"{v:.17g}" for v in row) for row in part)
        cell_lines.extend(scalars(f"{name}_abs", np.sqrt(np.sum(np.abs(vec) ** 2, axis=1))))
    for name, val in (cell_scalars or {}).items():
        for nm, part in split(name, val):
            cell_lines.extend(scalars(nm, part))
    if cell_lines:
        out.append(f"CELL_DATA {len(tets)}")
        out.extend(cell_lines)
    point_lines = []
    for name, val in (point_scalars or {}).items():
        for nm, part in split(name, val):
            point_lines.extend(scalars(nm, part))
    if point_lines:
        out.append(f"POINT_DATA {len(nodes)}")
        out.extend(point_lines)
    path.write_text("\n".join(out) + "\n")
    return path
