"""Command-line front end: ``decsie solve | validate | mie``.

Exit codes: 0 success, 1 a ``--check`` band failed, 2 bad usage or
configuration, 3 mesh error, 4 solver failure, 5 surface quadrature
failure, 6 field/oracle error, 7 unreadable input file.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from pathlib import Path

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_MESH, EXIT_SOLVER, EXIT_QUADRATURE, EXIT_FIELD, EXIT_INPUT = range(8)

log = logging.getLogger("decsie")


def _set_threads(n: int) -> None:
    # must run before numpy / scipy load their BLAS
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMBA_NUM_THREADS"):
        os.environ[var] = str(n)


def _exit_code(exc: BaseException) -> int:
    from .config import ConfigError
    from .fields import FieldError
    from .hybrid import SolverError
    from .mesh import MeshError
    from .mie import MieConvergenceError
    from .sie import QuadratureError
    from .validate import GeometryError

    for kinds, code in (
        ((ConfigError,), EXIT_CONFIG),
        ((MeshError,), EXIT_MESH),
        ((SolverError,), EXIT_SOLVER),
        ((QuadratureError,), EXIT_QUADRATURE),
        ((FieldError, MieConvergenceError, GeometryError), EXIT_FIELD),
        ((OSError,), EXIT_INPUT),
    ):
        if isinstance(exc, kinds):
            return code
    return EXIT_CONFIG if isinstance(exc, ValueError) else EXIT_SOLVER


def _report_checks(results) -> bool:
    ok = True
    for label, passed, detail in results:
        print(f"{'PASS' if passed else 'FAIL'}  {label}  {detail}")
        ok &= bool(passed)
    return ok


def _load(cfg, path=None):
    from .mesh import load_mesh

    path = path or cfg.mesh
    if path is None:
        from .config import ConfigError

        raise ConfigError("no mesh given ([mesh] path)")
    if not cfg.regions:
        from .config import ConfigError

        raise ConfigError("no [material] region permittivities given")
    return load_mesh(path, cfg.regions)


def cmd_solve(cfg, dump_operators: bool = False) -> int:
    from . import dec
    from .fields import reconstruct_E, write_csv, write_vtk
    from .hybrid import ScatteringProblem, assemble_blocks, solve

    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    cplx, mat = _load(cfg)
    prob = ScatteringProblem(cplx, mat, cfg.wave(), settings=cfg.solver_settings())
    blocks = assemble_blocks(prob)
    sol = solve(prob, blocks)
    E = reconstruct_E(sol.a, sol.phi_s, cplx, prob.k0)
    n0, n1, n2, n3 = cplx.counts
    summary = {
        "mesh": str(cfg.mesh), "n_nodes": n0, "n_edges": n1, "n_faces": n2, "n_tets": n3,
        "n_boundary_nodes": len(prob.surf.node_ids), "k0": prob.k0, "method": sol.method,
        "iterations": sol.iterations, "residual": sol.residual, "converged": sol.converged,
        "condition": sol.condition, "t_assemble": sol.timings["assemble"], "t_solve": sol.timings["solve"],
        "t_total": time.perf_counter() - t0,
    }
    write_csv(out / "summary.csv", [summary])
    if cfg.vtk:
        write_vtk(
            out / "solution.vtk", cplx, cell_vectors={"E": E},
            point_scalars={"Ax": sol.a[0], "Ay": sol.a[1], "Az": sol.a[2], "Phis": sol.phi_s},
            cell_scalars={"eps": mat.eps.real},
        )
    if dump_operators:
        dec.write_matrix_market(out / "D0.mtx", dec.exterior_derivative(cplx, 0))
        dec.write_matrix_market(out / "H1.mtx", dec.hodge1_galerkin(cplx, 1.0))
        dec.write_matrix_market(out / "S.mtx", blocks.sie.S)
        dec.write_matrix_market(out / "D.mtx", blocks.sie.D)
    print(f"unknowns {prob.n_unknowns}  method {sol.method}  iterations {sol.iterations}  "
          f"residual {sol.residual:.3e}  condition {sol.condition:.4g}")
    print("timings " + "  ".join(f"{k} {v:.2f}s" for k, v in sol.timings.items()))
    return EXIT_OK if sol.converged else EXIT_SOLVER


def _sphere(cfg):
    from .config import ConfigError
    from .mie import LayeredSphere

    if not cfg.sphere_radii:
        raise ConfigError("[validate] sphere_radii is required for this mode")
    eps = cfg.sphere_eps or [cfg.regions[t] for t in sorted(t for t in cfg.regions if t != 9)]
    return LayeredSphere(cfg.sphere_radii, eps)


def cmd_validate(cfg, mode: str | None = None, check: bool = False) -> int:
    import numpy as np

    from . import plotting
    from . import validate as V
    from .fields import write_csv
    from .hybrid import ScatteringProblem, solve
    from .mesh import read_gmsh

    mode = mode or cfg.mode
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    ladder = cfg.meshes or ([cfg.mesh] if cfg.mesh else [])
    settings = cfg.solver_settings()
    results = []
    if mode == "mie":
        sphere = _sphere(cfg)
        rungs = [(Path(p).name, *_load(cfg, p)) for p in ladder]
        rows = V.refinement_ladder(rungs, sphere, cfg.wave(), settings)
        write_csv(out / "mie_errors.csv", rows, ["mesh", "n_tets", "err_x", "err_y", "err_z", "rel_error",
                                                  "iterations", "residual", "condition", "status"])
        if cfg.figures:
            plotting.plot_refinement(rows, out / "mie_errors.png")
        results = V.check_refinement(rows) if len(rows) > 1 else []
    elif mode == "extinction":
        rows = []
        for p in ladder:
            cplx, mat = _load(cfg, p)
            prob = ScatteringProblem(cplx, mat, cfg.wave(), settings=settings)
            rows.append({"mesh": Path(p).name, **V.extinction_row(prob, solve(prob))})
        write_csv(out / "extinction.csv", rows)
        if cfg.figures:
            plotting.plot_extinction(rows, out / "extinction.png")
        results = V.check_extinction(rows)
    elif mode == "sweep-eps":
        sphere = _sphere(cfg)
        meshes = []
        for p in ladder:
            from .mesh import SimplicialComplex3

            nodes, ids, tets, tags = read_gmsh(p)
            meshes.append((Path(p).name, SimplicialComplex3.from_tets(nodes, tets, node_ids=ids), np.asarray(tags)))
        rows = V.sweep_permittivity(meshes, cfg.eps_values, cfg.k0, radius=sphere.outer_radius,
                                    scatterer_tag=cfg.scatterer_tag, settings=settings, wave=cfg.wave())
        write_csv(out / "sweep_eps.csv", rows, ["mesh", "n_tets", "eps_s", "rel_error", "iterations",
                                                 "residual", "status"])
        if cfg.figures:
            plotting.plot_permittivity(rows, out / "sweep_eps.png")
        results = V.check_permittivity(rows, tol=settings.tol)
    elif mode == "sweep-freq":
        sphere = _sphere(cfg)
        cplx, mat = _load(cfg, ladder[0] if ladder else None)
        rows = V.sweep_frequency(cplx, mat, sphere, cfg.k0a_values, settings, wave=cfg.wave())
        write_csv(out / "sweep_freq.csv", rows, ["k0a", "k0", "rel_error", "condition", "iterations", "status"])
        if cfg.figures:
            plotting.plot_frequency(rows, out / "sweep_freq.png")
        results = V.check_frequency(rows)
    else:
        from .config import ConfigError

        raise ConfigError(f"unknown validation mode {mode!r}")
    for r in rows:
        print("  ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in r.items()))
    if check:
        return EXIT_OK if _report_checks(results) else EXIT_CHECK
    return EXIT_OK


def cmd_mie(points_csv, radii, eps, k0, polarization, direction, out_csv=None) -> int:
    import csv

    import numpy as np

    from .fields import write_csv
    from .mie import LayeredSphere, mie_field
    from .sie import PlaneWave

    pts = []
    with open(points_csv, newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh), 1):
            if not rec or rec[0].lstrip().startswith("#"):
                continue
            try:
                pts.append([float(v) for v in rec[:3]])
            except ValueError:
                if lineno == 1:  # header row
                    continue
                raise OSError(f"{points_csv}:{lineno}: expected three numbers, got {rec!r}") from None
            if len(rec) < 3:
                raise OSError(f"{points_csv}:{lineno}: expected three coordinates")
    pts = np.asarray(pts, dtype=float).reshape(-1, 3)
    E = mie_field(LayeredSphere(radii, eps), PlaneWave(polarization, direction, k0), pts)
    cols = ["x", "y", "z", "re_Ex", "im_Ex", "re_Ey", "im_Ey", "re_Ez", "im_Ez"]
    rows = []
    for p, e in zip(pts, E):
        rows.append(dict(zip(cols, [*p, e[0].real, e[0].imag, e[1].real, e[1].imag, e[2].real, e[2].imag])))
    if out_csv:
        write_csv(out_csv, rows, cols)
    else:
        from .fields import fmt

        print(",".join(cols))
        for r in rows:
            print(",".join(fmt(r[c]) for c in cols))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="decsie", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="INI run configuration")
        p.add_argument("--out", help="output directory (overrides [output] dir)")
        p.add_argument("--threads", type=int, help="BLAS / compiled-kernel threads")

    p = sub.add_parser("solve", help="assemble and solve one scattering problem")
    common(p)
    p.add_argument("--dump-operators", action="store_true", help="write D0, H1, S, D as Matrix Market")
    p = sub.add_parser("validate", help="Mie ladder, extinction residual or sweeps")
    common(p)
    p.add_argument("--mode", choices=["mie", "extinction", "sweep-eps", "sweep-freq"])
    p.add_argument("--check", action="store_true", help="assert the acceptance bands; exit 1 on failure")
    p = sub.add_parser("mie", help="evaluate the Mie reference field at points from a CSV file")
    p.add_argument("points", help="CSV with x,y,z per row")
    p.add_argument("--radii", type=float, nargs="+", required=True)
    p.add_argument("--eps", type=complex, nargs="+", required=True)
    p.add_argument("--k0", type=float, required=True)
    p.add_argument("--polarization", type=float, nargs=3, default=(1.0, 0.0, 0.0))
    p.add_argument("--direction", type=float, nargs=3, default=(0.0, 0.0, -1.0))
    p.add_argument("--out", help="output CSV (default stdout)")
    p.add_argument("--threads", type=int)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "mie":
            if args.threads:
                _set_threads(args.threads)
            return cmd_mie(args.points, args.radii, args.eps, args.k0, args.polarization, args.direction, args.out)
        from .config import load_config

        cfg = load_config(args.config)
        threads = args.threads or cfg.threads
        _set_threads(threads)
        if args.out:
            cfg.out = Path(args.out)
        if args.command == "solve":
            return cmd_solve(cfg, args.dump_operators)
        return cmd_validate(cfg, args.mode, args.check)
    except Exception as exc:  # every module error maps to an exit code
        code = _exit_code(exc)
        if code == EXIT_SOLVER and not _is_known(exc):
            raise
        print(f"error: {exc}", file=sys.stderr)
        return code


def _is_known(exc) -> bool:
    from .hybrid import SolverError

    return isinstance(exc, SolverError)


if __name__ == "__main__":
    sys.exit(main())
