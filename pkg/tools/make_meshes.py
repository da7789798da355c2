"""Generate the Gmsh v2.2 fixture meshes used by the test and acceptance suites.

Requires the ``gmsh`` Python package.  Run from the repository root::

    python tools/make_meshes.py            # all fixtures
    python tools/make_meshes.py sphere_c   # a single one

Physical volume tags: scatterer regions are numbered from 1 (innermost
first), the enclosing free-space region is 9.  Output is gzip-compressed.
"""
import gzip
import shutil
import sys
import tempfile
from pathlib import Path

import gmsh

OUT = Path(__file__).resolve().parents[1] / "tests" / "data"
AIR = 9


def _begin(name):
    gmsh.initialize()
    gmsh.option.setNumber("General.Terminal", 0)
    gmsh.option.setNumber("Mesh.MshFileVersion", 2.2)
    gmsh.option.setNumber("Mesh.Algorithm3D", 1)
    gmsh.option.setNumber("Mesh.Optimize", 1)
    gmsh.model.add(name)


def _finish(name, size):
    gmsh.option.setNumber("Mesh.MeshSizeMax", size)
    gmsh.option.setNumber("Mesh.MeshSizeMin", 0.0)
    gmsh.option.setNumber("Mesh.MeshSizeFromPoints", 0)
    gmsh.option.setNumber("Mesh.MeshSizeFromCurvature", 0)
    gmsh.model.mesh.generate(3)
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / f"{name}.msh"
        gmsh.write(str(path))
        with open(path, "rb") as src, gzip.open(OUT / f"{name}.msh.gz", "wb") as dst:
            shutil.copyfileobj(src, dst)
    ntet = sum(len(t) for t in gmsh.model.mesh.getElementsByType(4)[0:1])
    gmsh.finalize()
    print(f"{name}: {ntet} tets")


def _volume_tags(dim_tags_map, inputs):
    return [[t for d, t in dim_tags_map[i]] for i in range(len(inputs))]


def concentric(name, radii, outer, size):
    """Concentric spheres ``radii`` (innermost first) inside an air ball."""
    _begin(name)
    occ = gmsh.model.occ
    balls = [occ.addSphere(0, 0, 0, r) for r in list(radii) + [outer]]
    inputs = [(3, b) for b in balls]
    _, mapping = occ.fragment(inputs[:1], inputs[1:])
    occ.synchronize()
    # every fragment piece lies in exactly one annulus; classify by mass centre
    vols = gmsh.model.getEntities(3)
    bounds = list(radii) + [outer]
    groups = {}
    for _, tag in vols:
        x, y, z = occ.getCenterOfMass(3, tag)
        # centre of mass of a shell is the origin: use a bounding box instead
        xmin, _, _, xmax, _, _ = occ.getBoundingBox(3, tag)
        half = 0.5 * (xmax - xmin)
        # pieces are nested balls/shells; pick the smallest bound >= extent
        k = min(i for i, b in enumerate(bounds) if half <= b * (1 + 1e-3))
        groups.setdefault(k, []).append(tag)
    for k, tags in groups.items():
        phys = AIR if k == len(radii) else k + 1
        gmsh.model.addPhysicalGroup(3, tags, phys)
    _finish(name, size)


def cube(name, size):
    _begin(name)
    occ = gmsh.model.occ
    occ.addBox(0, 0, 0, 1, 1, 1)
    occ.synchronize()
    gmsh.model.addPhysicalGroup(3, [1], AIR)
    _finish(name, size)


def slab_cylinders(name, size, a=0.2, b=0.1, t1=0.1, t2=0.07, w=1.0, pad=0.1):
    """Four elliptical cylinders on a square slab, enclosed by an air box."""
    _begin(name)
    occ = gmsh.model.occ
    slab = occ.addBox(-w / 2, -w / 2, 0, w, w, t2)
    cyls = []
    for cx in (-a, a):
        for cy in (-a, a):
            disk = occ.addDisk(cx, cy, t2, a * 0.999, b)
            ext = occ.extrude([(2, disk)], 0, 0, t1)
            cyls.append([t for d, t in ext if d == 3][0])
    box = occ.addBox(-w / 2 - pad, -w / 2 - pad, -pad, w + 2 * pad, w + 2 * pad, t1 + t2 + 2 * pad)
    occ.fragment([(3, box)], [(3, slab)] + [(3, c) for c in cyls])
    occ.synchronize()
    cyl_tags, slab_tags, air_tags = [], [], []
    for _, tag in gmsh.model.getEntities(3):
        x, y, z = occ.getCenterOfMass(3, tag)
        vol = occ.getMass(3, tag)
        if vol > (w + 2 * pad) ** 2 * 0.5 * (t1 + t2 + 2 * pad):
            air_tags.append(tag)
        elif z > t2:
            cyl_tags.append(tag)
        else:
            slab_tags.append(tag)
    gmsh.model.addPhysicalGroup(3, cyl_tags, 1)
    gmsh.model.addPhysicalGroup(3, slab_tags, 2)
    gmsh.model.addPhysicalGroup(3, air_tags, AIR)
    _finish(name, size)


FIXTURES = {
    "cube": lambda: cube("cube", 0.5),
    "sphere_c": lambda: concentric("sphere_c", [0.1], 0.11, 0.06),
    "sphere_1k": lambda: concentric("sphere_1k", [0.1], 0.11, 0.035),
    "sphere_5k": lambda: concentric("sphere_5k", [0.1], 0.11, 0.02),
    "sphere_13k": lambda: concentric("sphere_13k", [0.1], 0.11, 0.014),
    "layered_1k": lambda: concentric("layered_1k", [0.1, 0.14], 0.15, 0.05),
    "layered_6k": lambda: concentric("layered_6k", [0.1, 0.14], 0.15, 0.029),
    "layered_16k": lambda: concentric("layered_16k", [0.1, 0.14], 0.15, 0.019),
    "slab_5k": lambda: slab_cylinders("slab_5k", 0.1),
    "slab_10k": lambda: slab_cylinders("slab_10k", 0.068),
}

if __name__ == "__main__":
    OUT.mkdir(parents=True, exist_ok=True)
    for key in sys.argv[1:] or FIXTURES:
        FIXTURES[key]()
