"""Coupled volume/surface system for the gauged potentials (A~x, A~y, A~z, Phi_s).

Interior rows are the exterior-calculus Helmholtz operators; boundary rows
receive the normal-derivative flux through the complement operator, with
the normal derivatives eliminated via the surface integral equation
dn u = S^-1 (f_u - D P0 u).
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import dec
from .mesh import BoundarySurface, MaterialField, MeshError, SimplicialComplex3, extract_boundary
from .sie import AssemblyOptions, PlaneWave, SIEMatrices, assemble_rhs, assemble_sie

log = logging.getLogger(__name__)

COMPONENTS = ("Ax", "Ay", "Az", "Phis")


class SolverError(RuntimeError):
    pass


class SingularSurfaceOperator(SolverError):
    pass


@dataclass
class SolverSettings:
    tol: float = 1e-13
    max_iterations: int | None = None  # default 10 * unknowns
    restart: int = 200
    direct_threshold: int = 20000
    method: str = "auto"  # auto | direct | gmres
    preconditioner: str = "off"  # off | jacobi
    condition: str = "estimate"  # estimate | exact | off
    rhs_order: int = 4


@dataclass
class ScatteringProblem:
    cplx: SimplicialComplex3
    material: MaterialField
    wave: PlaneWave
    surf: BoundarySurface | None = None
    settings: SolverSettings = field(default_factory=SolverSettings)
    quadrature: AssemblyOptions = field(default_factory=AssemblyOptions)

    def __post_init__(self):
        self.material.check(self.cplx, allow_low=True)
        if self.surf is None:
            self.surf = extract_boundary(self.cplx)
        touching = np.asarray(self.material.eps)[self.surf.tet_ids]
        if np.any(np.abs(touching - 1.0) > 1e-12):
            raise MeshError("tetrahedra adjacent to the truncation surface must have eps = 1")

    @property
    def k0(self) -> float:
        return self.wave.k0

    @property
    def n_unknowns(self) -> int:
        return 4 * len(self.cplx.nodes)


@dataclass
class HybridBlocks:
    V: sp.csr_matrix
    L: sp.csr_matrix
    grad_eps: tuple  # H0(d eps / d tau), tau = x, y, z
    rhs: tuple  # per component, length N0
    sie: SIEMatrices
    s_lu: tuple
    f: dict  # surface load vectors per component
    D2c: sp.csr_matrix
    P0: sp.csr_matrix

    def system(self, k0: float) -> sp.csr_matrix:
        Z = None
        G = self.grad_eps
        rows = [
            [self.V, Z, Z, -1j * G[0]],
            [Z, self.V, Z, -1j * G[1]],
            [Z, Z, self.V, -1j * G[2]],
            [-1j * k0**2 * G[0], -1j * k0**2 * G[1], -1j * k0**2 * G[2], self.L],
        ]
        return sp.bmat(rows, format="csr")

    def rhs_vector(self) -> np.ndarray:
        return np.concatenate(self.rhs)

    def s_solve(self, b):
        return sla.lu_solve(self.s_lu, b)


@dataclass
class SolutionFields:
    a: np.ndarray  # (3, N0)
    phi_s: np.ndarray  # (N0,)
    dn_a: np.ndarray | None = None  # (3, N0b)
    dn_phi_s: np.ndarray | None = None
    iterations: int = 0
    residual: float = float("nan")
    converged: bool = True
    method: str = ""
    condition: float = float("nan")
    timings: dict = field(default_factory=dict)

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.a.ravel(), self.phi_s])

    def component(self, name: str) -> np.ndarray:
        return self.phi_s if name == "Phis" else self.a["xyz".index(name[-1].lower())]

    def trace_derivative(self, name: str) -> np.ndarray:
        return self.dn_phi_s if name == "Phis" else self.dn_a["xyz".index(name[-1].lower())]


def _coupling(D2c, surf, S_inv_D):
    """D2c S^-1 D P0 as a sparse N0 x N0 matrix (boundary rows and columns only)."""
    n0 = D2c.shape[0]
    rows = np.unique(D2c.tocoo().row)
    block = D2c[rows] @ S_inv_D
    r = np.repeat(rows, len(surf.node_ids))
    c = np.tile(surf.node_ids, len(rows))
    return sp.csr_matrix((np.asarray(block).ravel(), (r, c)), shape=(n0, n0))


def assemble_blocks(problem: ScatteringProblem, sie_mats: SIEMatrices | None = None) -> HybridBlocks:
    cplx, surf, k0 = problem.cplx, problem.surf, problem.k0
    eps = np.asarray(problem.material.eps)
    t0 = time.perf_counter()
    d0 = dec.exterior_derivative(cplx, 0)
    lap1 = (d0.T @ dec.hodge1_galerkin(cplx, 1.0) @ d0).tocsr()
    lap_eps = (d0.T @ dec.hodge1_galerkin(cplx, eps) @ d0).tocsr()
    h0_eps = dec.hodge0(cplx, eps)
    h0_eps2 = dec.hodge0(cplx, eps**2)
    grad = tuple(dec.hodge0_material_gradient(cplx, problem.material, t) for t in "xyz")
    D2c = dec.complement_operator(cplx, surf)
    P0, _ = dec.selection_matrices(cplx, surf)
    t1 = time.perf_counter()

    if sie_mats is None or sie_mats.k0 != k0:
        sie_mats = assemble_sie(surf, k0, problem.quadrature)
    t2 = time.perf_counter()
    try:
        lu = sla.lu_factor(sie_mats.S, check_finite=True)
    except (sla.LinAlgError, ValueError) as exc:
        raise SingularSurfaceOperator(f"single-layer factorisation failed: {exc}") from exc
    piv_ratio = np.abs(np.diag(lu[0])).min() / np.abs(np.diag(lu[0])).max()
    if piv_ratio < 1e-14:
        cond = np.linalg.cond(sie_mats.S)
        raise SingularSurfaceOperator(f"single-layer matrix is numerically singular (cond ~ {cond:.3e})")
    S_inv_D = sla.lu_solve(lu, sie_mats.D)
    C = _coupling(D2c, surf, S_inv_D)
    V = (-lap1 + k0**2 * h0_eps - C).tocsr()
    L = (-lap_eps + k0**2 * h0_eps2 - C).tocsr()

    # each block takes its own load vector (f_Az for the A~z rows, not f_Ay)
    f = {c: assemble_rhs(surf, problem.wave, c, order=problem.settings.rhs_order) for c in COMPONENTS}
    rhs = tuple(-(D2c @ sla.lu_solve(lu, f[c])) for c in COMPONENTS)
    t3 = time.perf_counter()
    log.info("volume operators %.2fs, surface operators %.2fs, coupling %.2fs", t1 - t0, t2 - t1, t3 - t2)
    return HybridBlocks(V=V, L=L, grad_eps=grad, rhs=rhs, sie=sie_mats, s_lu=lu, f=f, D2c=D2c, P0=P0)


def condition_estimate(A: sp.spmatrix, lu=None, exact: bool = False) -> float:
    """1-norm condition number estimate (exact 2-norm for small dense systems)."""
    if exact:
        return float(np.linalg.cond(A.toarray()))
    if lu is None:
        lu = spla.splu(A.tocsc())
    n = A.shape[0]
    inv = spla.LinearOperator(
        (n, n), matvec=lu.solve, rmatvec=lambda x: lu.solve(x, trans="H"), dtype=complex
    )
    return float(spla.onenormest(A) * spla.onenormest(inv))


def _gmres(A, b, settings: SolverSettings, x0=None):
    n = A.shape[0]
    count = [0]

    def cb(_):
        count[0] += 1

    M = None
    if settings.preconditioner == "jacobi":
        d = A.diagonal()
        d[d == 0] = 1.0
        M = sp.diags(1.0 / d)
    maxiter = settings.max_iterations or 10 * n
    restart = min(settings.restart, n)
    x, info = spla.gmres(
        A, b, x0=x0, rtol=settings.tol, atol=0.0, restart=restart,
        maxiter=max(1, -(-maxiter // restart)), M=M, callback=cb, callback_type="pr_norm",
    )
    return x, count[0], info


def solve(problem: ScatteringProblem, blocks: HybridBlocks | None = None) -> SolutionFields:
    """Solve the coupled system and recover the boundary normal derivatives."""
    settings = problem.settings
    t0 = time.perf_counter()
    blocks = blocks or assemble_blocks(problem)
    t1 = time.perf_counter()
    A = blocks.system(problem.k0)
    b = blocks.rhs_vector()
    n = A.shape[0]
    method = settings.method
    if method == "auto":
        method = "direct" if n < settings.direct_threshold else "gmres"
    lu = None
    iterations, info = 0, 0
    if method == "direct":
        lu = spla.splu(A.tocsc())
        x = lu.solve(b)
    elif method == "gmres":
        x, iterations, info = _gmres(A, b, settings)
    else:
        raise ValueError(f"unknown solver method {method!r}")
    bnorm = np.linalg.norm(b)
    res = np.linalg.norm(A @ x - b) / bnorm if bnorm > 0 else float(np.linalg.norm(A @ x))
    t2 = time.perf_counter()
    cond = float("nan")
    if settings.condition == "exact":
        cond = condition_estimate(A, exact=True)
    elif settings.condition == "estimate":
        cond = condition_estimate(A, lu)
    t3 = time.perf_counter()
    n0 = len(problem.cplx.nodes)
    sol = SolutionFields(
        a=x[: 3 * n0].reshape(3, n0).copy(),
        phi_s=x[3 * n0:].copy(),
        iterations=iterations,
        residual=float(res),
        converged=info == 0,
        method=method,
        condition=cond,
        timings={"assemble": t1 - t0, "solve": t2 - t1, "condition": t3 - t2},
    )
    if info != 0:
        log.warning("GMRES stopped after %d iterations with relative residual %.3e", iterations, res)
    recover_normal_derivatives(blocks, sol)
    return sol


def recover_normal_derivatives(blocks: HybridBlocks, sol: SolutionFields) -> SolutionFields:
    D, P0 = blocks.sie.D, blocks.P0
    traces = []
    for comp in COMPONENTS:
        u = sol.component(comp)
        traces.append(blocks.s_solve(blocks.f[comp] - D @ (P0 @ u)))
    sol.dn_a = np.stack(traces[:3])
    sol.dn_phi_s = traces[3]
    return sol


def sie_residual(blocks: HybridBlocks, sol: SolutionFields, comp: str) -> float:
    """Residual of (1/2 M - K) alpha + S beta = f, relative to the largest term.

    The load f vanishes for some components (f_Ax under z-incidence),
    so it cannot serve alone as the scale.
    """
    alpha = blocks.P0 @ sol.component(comp)
    beta = sol.trace_derivative(comp)
    f = blocks.f[comp]
    da, sb = blocks.sie.D @ alpha, blocks.sie.S @ beta
    scale = max(np.linalg.norm(da), np.linalg.norm(sb), np.linalg.norm(f), 1e-300)
    return float(np.linalg.norm(da + sb - f) / scale)
