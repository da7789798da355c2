from __future__ import annotations

from functools import lru_cache
from pathlib import Path

import numpy as np
import pytest

from decsie.mesh import SimplicialComplex3, extract_boundary, load_mesh

DATA = Path(__file__).resolve().parent / "data"
AIR = 9


def mesh_path(name: str) -> Path:
    return DATA / f"{name}.msh.gz"


@lru_cache(maxsize=None)
def _cached(name: str, regions: tuple):
    return load_mesh(mesh_path(name), dict(regions))


def sphere(name: str, eps: float = 2.25):
    return _cached(name, ((1, eps), (AIR, 1.0)))


def layered(name: str, eps1: float = 2.5, eps2: float = 2.25):
    return _cached(name, ((1, eps1), (2, eps2), (AIR, 1.0)))


def reference_tet() -> SimplicialComplex3:
    return SimplicialComplex3.from_tets(np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1.0]]), [[0, 1, 2, 3]])


def two_tets() -> SimplicialComplex3:
    """Two tets sharing the triangle z = 0 (area 1/2), apexes at z = +1 and -1."""
    nodes = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1.0], [0, 0, -1.0]])
    return SimplicialComplex3.from_tets(nodes, [[0, 1, 2, 3], [0, 1, 2, 4]])


@pytest.fixture(scope="session")
def cube():
    return _cached("cube", ((AIR, 1.0),))


@pytest.fixture(scope="session")
def sphere_c():
    return sphere("sphere_c")


@pytest.fixture(scope="session")
def sphere_c_surface(sphere_c):
    return extract_boundary(sphere_c[0])


# --- acceptance report ----------------------------------------------------------

ACCEPTANCE: dict[int, dict] = {}


def record(criterion: int, title: str, results) -> bool:
    """Store (label, passed, detail) checks for one criterion; True if all passed."""
    entry = ACCEPTANCE.setdefault(criterion, {"title": title, "checks": []})
    entry["checks"].extend(results)
    for label, passed, detail in results:
        print(f"{'PASS' if passed else 'FAIL'}  [{criterion}] {label}  {detail}")
    return all(bool(p) for _, p, _ in results)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit in sorted(ACCEPTANCE):
        entry = ACCEPTANCE[crit]
        failed = [label for label, p, _ in entry["checks"] if not p]
        verdict = "PASS" if not failed else "FAIL"
        tail = f"  (failed: {'; '.join(failed)})" if failed else ""
        tr.write_line(f"{verdict}  criterion {crit}: {entry['title']}{tail}")
    for crit in sorted(ACCEPTANCE):
        for label, p, detail in ACCEPTANCE[crit]["checks"]:
            tr.write_line(f"    [{crit}] {'PASS' if p else 'FAIL'}  {label}  {detail}")
