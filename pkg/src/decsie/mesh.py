"""Tetrahedral meshes: Gmsh v2.2 reader, canonical skeleton, boundary surface."""
from __future__ import annotations

import gzip
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np


class MeshError(ValueError):
    """Raised for malformed, degenerate or non-manifold meshes."""


# local faces of a tetrahedron [v0, v1, v2, v3] with their boundary sign:
# d[v0 v1 v2 v3] = [v1 v2 v3] - [v0 v2 v3] + [v0 v1 v3] - [v0 v1 v2]
_TET_FACES = np.array([[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]])
_TET_FACE_SIGNS = np.array([1, -1, 1, -1])
_TET_EDGES = np.array([[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]])
_TRI_EDGES = np.array([[1, 2], [0, 2], [0, 1]])
_TRI_EDGE_SIGNS = np.array([1, -1, 1])


def _perm_parity(a: np.ndarray) -> np.ndarray:
    """+1/-1 parity of the permutation that sorts each row of ``a``."""
    a = np.asarray(a)
    n = a.shape[1]
    parity = np.ones(len(a), dtype=np.int64)
    for i in range(n):
        for j in range(i + 1, n):
            parity = np.where(a[:, i] > a[:, j], -parity, parity)
    return parity


def _unique_rows(rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Lexicographically sorted unique rows and the inverse map."""
    uniq, inverse = np.unique(rows, axis=0, return_inverse=True)
    return uniq, inverse.reshape(-1)


def signed_volumes(nodes: np.ndarray, tets: np.ndarray) -> np.ndarray:
    p = nodes[tets]
    a, b, c = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0], p[:, 3] - p[:, 0]
    return np.einsum("ij,ij->i", a, np.cross(b, c)) / 6.0


@dataclass(frozen=True, eq=False)
class SimplicialComplex3:
    """Tetrahedral simplicial complex with sorted-index edge/triangle skeletons.

    ``tet_tris``/``tet_tri_signs`` (N3 x 4) give the triangles bounding each
    tetrahedron and their induced orientation; ``tri_edges``/``tri_edge_signs``
    (N2 x 3) likewise for triangles.  ``tet_edges`` (N3 x 6) lists edge ids in
    local order [01, 02, 03, 12, 13, 23].
    """

    nodes: np.ndarray
    tets: np.ndarray
    edges: np.ndarray
    triangles: np.ndarray
    tet_tris: np.ndarray
    tet_tri_signs: np.ndarray
    tri_edges: np.ndarray
    tri_edge_signs: np.ndarray
    tet_edges: np.ndarray
    node_ids: np.ndarray = field(default=None)

    @classmethod
    def from_tets(cls, nodes, tets, node_ids=None, *, check: bool = True) -> "SimplicialComplex3":
        nodes = np.ascontiguousarray(nodes, dtype=float)
        tets = np.array(tets, dtype=np.int64).reshape(-1, 4)
        if tets.size and (tets.min() < 0 or tets.max() >= len(nodes)):
            raise MeshError("tetrahedron references a node that does not exist")
        vol = signed_volumes(nodes, tets)
        if check:
            diag = np.linalg.norm(nodes.max(axis=0) - nodes.min(axis=0)) if len(nodes) else 0.0
            bad = np.flatnonzero(np.abs(vol) < 1e-14 * diag**3)
            if bad.size:
                raise MeshError(f"degenerate tetrahedra (zero volume): {bad[:10].tolist()}")
        flip = vol < 0
        tets[flip] = tets[flip][:, [0, 1, 3, 2]]

        faces = tets[:, _TET_FACES].reshape(-1, 3)
        face_signs = np.tile(_TET_FACE_SIGNS, len(tets)) * _perm_parity(faces)
        triangles, tri_inv = _unique_rows(np.sort(faces, axis=1))
        tet_tris = tri_inv.reshape(-1, 4)

        tri_e = triangles[:, _TRI_EDGES].reshape(-1, 2)
        edges, e_inv = _unique_rows(tri_e)
        tri_edges = e_inv.reshape(-1, 3)
        tri_edge_signs = np.tile(_TRI_EDGE_SIGNS, len(triangles)).reshape(-1, 3)

        tet_e = np.sort(tets[:, _TET_EDGES].reshape(-1, 2), axis=1)
        idx = np.searchsorted(edges[:, 0] * len(nodes) + edges[:, 1], tet_e[:, 0] * len(nodes) + tet_e[:, 1])

        cplx = cls(
            nodes=nodes,
            tets=tets,
            edges=edges,
            triangles=triangles,
            tet_tris=tet_tris,
            tet_tri_signs=face_signs.reshape(-1, 4),
            tri_edges=tri_edges,
            tri_edge_signs=tri_edge_signs,
            tet_edges=idx.reshape(-1, 6),
            node_ids=np.arange(len(nodes)) if node_ids is None else np.asarray(node_ids),
        )
        if check:
            counts = np.bincount(tet_tris.ravel(), minlength=len(triangles))
            if counts.max(initial=0) > 2:
                raise MeshError("non-manifold connectivity: a triangle is shared by more than two tetrahedra")
        for arr in (nodes, tets, edges, triangles):
            arr.setflags(write=False)
        return cplx

    @property
    def counts(self) -> tuple[int, int, int, int]:
        return len(self.nodes), len(self.edges), len(self.triangles), len(self.tets)

    def tri_tet_count(self) -> np.ndarray:
        return np.bincount(self.tet_tris.ravel(), minlength=len(self.triangles))

    def volumes(self) -> np.ndarray:
        return signed_volumes(self.nodes, self.tets)

    def centroids(self) -> np.ndarray:
        return self.nodes[self.tets].mean(axis=1)

    def bary_gradients(self) -> np.ndarray:
        """Gradients of the four barycentric coordinates per tet, (N3, 4, 3)."""
        p = self.nodes[self.tets]
        jac = (p[:, 1:] - p[:, :1])  # rows are edge vectors
        inv = np.linalg.inv(jac)  # columns are grad lambda_1..3
        g = np.empty((len(self.tets), 4, 3))
        g[:, 1:] = np.transpose(inv, (0, 2, 1))
        g[:, 0] = -g[:, 1:].sum(axis=1)
        return g


def simplex_measures(cplx: SimplicialComplex3) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Tet volumes, triangle areas and edge lengths."""
    p = cplx.nodes
    t = cplx.triangles
    areas = 0.5 * np.linalg.norm(np.cross(p[t[:, 1]] - p[t[:, 0]], p[t[:, 2]] - p[t[:, 0]]), axis=1)
    lengths = np.linalg.norm(p[cplx.edges[:, 1]] - p[cplx.edges[:, 0]], axis=1)
    return cplx.volumes(), areas, lengths


@dataclass(frozen=True, eq=False)
class MaterialField:
    """Piecewise-constant relative permittivity, one value per tetrahedron."""

    eps: np.ndarray
    tags: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "eps", np.asarray(self.eps, dtype=complex))

    @classmethod
    def uniform(cls, cplx: SimplicialComplex3, value: complex = 1.0) -> "MaterialField":
        return cls(np.full(len(cplx.tets), value, dtype=complex))

    def check(self, cplx: SimplicialComplex3, allow_low: bool = False) -> None:
        if len(self.eps) != len(cplx.tets):
            raise MeshError("material field does not match the tetrahedron count")
        if not allow_low and np.any(self.eps.real < 1 - 1e-12):
            raise MeshError("Re(eps) < 1 in some tetrahedra")


@dataclass(frozen=True, eq=False)
class BoundarySurface:
    """Closed triangulated boundary of a tetrahedral complex.

    ``node_ids`` maps local boundary nodes into the volume mesh; ``triangles``
    use local indices, oriented so ``normals`` point out of the volume.
    ``tri_ids`` are the volume-triangle indices, ``tet_ids`` the adjacent tets.
    """

    node_ids: np.ndarray
    points: np.ndarray
    triangles: np.ndarray
    tri_ids: np.ndarray
    tet_ids: np.ndarray
    edges: np.ndarray
    tri_edges: np.ndarray
    areas: np.ndarray
    normals: np.ndarray

    @property
    def counts(self) -> tuple[int, int, int]:
        return len(self.node_ids), len(self.edges), len(self.triangles)

    def euler_characteristic(self) -> int:
        n0, n1, n2 = self.counts
        return n0 - n1 + n2

    def diameters(self) -> np.ndarray:
        p = self.points[self.triangles]
        d = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 1], p[:, 0] - p[:, 2]], axis=1)
        return np.linalg.norm(d, axis=2).max(axis=1)

    def centroids(self) -> np.ndarray:
        return self.points[self.triangles].mean(axis=1)

    def node_normals(self) -> np.ndarray:
        """Area-weighted vertex normals, unit length."""
        acc = np.zeros_like(self.points)
        w = self.normals * self.areas[:, None]
        for k in range(3):
            np.add.at(acc, self.triangles[:, k], w)
        return acc / np.linalg.norm(acc, axis=1, keepdims=True)

    def mass_matrix(self):
        """Consistent P1 mass matrix on the surface (sparse, N0b x N0b)."""
        import scipy.sparse as sp

        local = (np.ones((3, 3)) + np.eye(3)) / 12.0
        vals = self.areas[:, None, None] * local
        rows = np.repeat(self.triangles, 3, axis=1).ravel()
        cols = np.tile(self.triangles, (1, 3)).ravel()
        n = len(self.node_ids)
        return sp.csr_matrix((vals.ravel(), (rows, cols)), shape=(n, n))


def extract_boundary(cplx: SimplicialComplex3, expected_genus: int | None = 0) -> BoundarySurface:
    """Boundary triangles (those with one adjacent tet), outward oriented."""
    count = cplx.tri_tet_count()
    bt = np.flatnonzero(count == 1)
    if bt.size == 0:
        raise MeshError("mesh has no boundary")
    # adjacent tet and local face for each boundary triangle
    flat = cplx.tet_tris.ravel()
    owner = np.full(len(cplx.triangles), -1)
    owner[flat] = np.arange(flat.size)
    slot = owner[bt]
    tet_ids = slot // 4
    tri = cplx.tets[tet_ids][np.arange(len(bt))[:, None], _TET_FACES[slot % 4]]
    # orient away from the opposing vertex of the tet
    opp = cplx.tets[tet_ids, slot % 4]
    p = cplx.nodes
    nrm = np.cross(p[tri[:, 1]] - p[tri[:, 0]], p[tri[:, 2]] - p[tri[:, 0]])
    inward = np.einsum("ij,ij->i", nrm, p[opp] - p[tri[:, 0]]) > 0
    tri[inward] = tri[inward][:, [0, 2, 1]]
    nrm[inward] *= -1
    twice_area = np.linalg.norm(nrm, axis=1)
    if np.any(twice_area == 0):
        raise MeshError("degenerate boundary triangle")

    node_ids, local = np.unique(tri, return_inverse=True)
    local = local.reshape(-1, 3)
    edges, e_inv = _unique_rows(np.sort(local[:, _TRI_EDGES].reshape(-1, 2), axis=1))
    ecount = np.bincount(e_inv, minlength=len(edges))
    if np.any(ecount > 2):
        raise MeshError("non-manifold boundary edge (more than two boundary triangles)")
    if np.any(ecount < 2):
        raise MeshError("boundary surface is not closed")
    surf = BoundarySurface(
        node_ids=node_ids,
        points=p[node_ids],
        triangles=local,
        tri_ids=bt,
        tet_ids=tet_ids,
        edges=edges,
        tri_edges=e_inv.reshape(-1, 3),
        areas=0.5 * twice_area,
        normals=nrm / twice_area[:, None],
    )
    if expected_genus is not None:
        chi = surf.euler_characteristic()
        if chi != 2 - 2 * expected_genus:
            raise MeshError(f"boundary Euler characteristic {chi} does not match genus {expected_genus}")
    return surf


def barycentric(tri: np.ndarray, point: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Barycentric coordinates of ``point`` in the triangle ``tri`` (3 x 3).

    Uses the dot-product form with 4 S^2 = |v1|^2 |v2|^2 - (v1.v2)^2 relative to
    the third vertex.  ``point`` may be an (n, 3) array.
    """
    tri = np.asarray(tri, dtype=float)
    pts = np.atleast_2d(np.asarray(point, dtype=float))
    v1, v2 = tri[0] - tri[2], tri[1] - tri[2]
    a11, a22, a12 = v1 @ v1, v2 @ v2, v1 @ v2
    four_s2 = a11 * a22 - a12**2
    diam = max(np.sqrt(a11), np.sqrt(a22), np.linalg.norm(tri[1] - tri[0]))
    if four_s2 <= (1e-14 * diam**2) ** 2:
        raise MeshError("degenerate triangle (zero area)")
    v = pts - tri[2]
    n = np.cross(v1, v2) / np.sqrt(four_s2)
    off = np.abs(v @ n)
    if np.any(off > tol * diam):
        raise ValueError("point does not lie in the triangle plane")
    d1, d2 = v @ v1, v @ v2
    l1 = (d1 * a22 - d2 * a12) / four_s2
    l2 = (d2 * a11 - d1 * a12) / four_s2
    out = np.stack([l1, l2, 1.0 - l1 - l2], axis=-1)
    return out[0] if np.ndim(point) == 1 else out


# --- Gmsh ASCII v2.2 -------------------------------------------------------


def _open_text(path: Path):
    if path.suffix == ".gz":
        return gzip.open(path, "rt")
    return open(path, "r")


def read_gmsh(path) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Parse a Gmsh v2.2 ASCII file.

    Returns node coordinates, original node ids, tet connectivity (compacted
    indices) and the physical tag of each tet.  Only element types 2 (triangle,
    ignored) and 4 (tetrahedron) are accepted.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    with _open_text(path) as fh:
        lines = iter(fh.read().splitlines())

    def section(name):
        for line in lines:
            if line.strip() == f"${name}":
                return
        raise MeshError(f"missing ${name} section")

    try:
        section("MeshFormat")
        version, ftype, _ = next(lines).split()
        if not version.startswith("2") or ftype != "0":
            raise MeshError(f"unsupported MeshFormat {version} (type {ftype}); need ASCII v2.2")
        section("Nodes")
        n = int(next(lines))
        raw = np.array([next(lines).split() for _ in range(n)], dtype=float).reshape(n, 4)
        if next(lines).strip() != "$EndNodes":
            raise MeshError("malformed $Nodes section")
        section("Elements")
        m = int(next(lines))
        tets, tags = [], []
        for _ in range(m):
            parts = [int(x) for x in next(lines).split()]
            etype, ntags = parts[1], parts[2]
            conn = parts[3 + ntags:]
            if etype == 4:
                if len(conn) != 4:
                    raise MeshError("tetrahedron with wrong node count")
                tets.append(conn)
                tags.append(parts[3] if ntags else 0)
            elif etype not in (2, 15, 1):
                raise MeshError(f"unsupported element type {etype}")
        if next(lines).strip() != "$EndElements":
            raise MeshError("malformed $Elements section")
    except StopIteration:
        raise MeshError("unexpected end of file") from None
    except (ValueError, IndexError) as exc:
        if isinstance(exc, MeshError):
            raise
        raise MeshError(f"malformed mesh file: {exc}") from None
    if not tets:
        raise MeshError("no tetrahedra in mesh")

    gid = raw[:, 0].astype(np.int64)
    order = np.argsort(gid, kind="stable")
    gid_sorted = gid[order]
    tets = np.asarray(tets, dtype=np.int64)
    pos = np.searchsorted(gid_sorted, tets)
    if np.any(pos >= len(gid_sorted)) or np.any(gid_sorted[np.minimum(pos, len(gid) - 1)] != tets):
        raise MeshError("element references an undefined node id")
    tets = order[pos]
    # keep only nodes used by tets, in original order
    used = np.unique(tets)
    remap = np.full(len(gid), -1)
    remap[used] = np.arange(len(used))
    return raw[used, 1:], gid[used], remap[tets], np.asarray(tags)


def load_mesh(path, region_eps: Mapping[int, complex]) -> tuple[SimplicialComplex3, MaterialField]:
    """Read a mesh and assign per-tet permittivity from its physical tags."""
    nodes, ids, tets, tags = read_gmsh(path)
    unknown = sorted(set(np.unique(tags).tolist()) - set(int(k) for k in region_eps))
    if unknown:
        raise MeshError(f"unknown region tag(s) {unknown}; known: {sorted(region_eps)}")
    cplx = SimplicialComplex3.from_tets(nodes, tets, node_ids=ids)
    lut = {int(k): complex(v) for k, v in region_eps.items()}
    eps = np.array([lut[int(t)] for t in tags], dtype=complex)
    return cplx, MaterialField(eps, tags=np.asarray(tags))


def write_gmsh(path, nodes, tets, tags=None) -> None:
    """Write tets as Gmsh v2.2 ASCII (used by tests to craft small meshes)."""
    tags = np.ones(len(tets), dtype=int) if tags is None else np.asarray(tags)
    with open(path, "w") as fh:
        fh.write("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n")
        fh.write(f"{len(nodes)}\n")
        for i, p in enumerate(nodes, 1):
            fh.write(f"{i} {p[0]:.17g} {p[1]:.17g} {p[2]:.17g}\n")
        fh.write("$EndNodes\n$Elements\n")
        fh.write(f"{len(tets)}\n")
        for i, (t, g) in enumerate(zip(tets, tags), 1):
            fh.write(f"{i} 4 2 {g} {g} {t[0]+1} {t[1]+1} {t[2]+1} {t[3]+1}\n")
        fh.write("$EndElements\n")
