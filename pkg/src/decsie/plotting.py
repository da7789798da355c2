"""Report figures (PNG) drawn from the validation CSV rows."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _ok(rows):
    return [r for r in rows if r.get("status", "ok") == "ok"]


def plot_refinement(rows, path) -> Path:
    rows = _ok(rows)
    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    n = [r["n_tets"] for r in rows]
    ax.loglog(n, [r["rel_error"] for r in rows], "o-", label="relative E error")
    for key, mk in (("err_x", "s"), ("err_y", "^"), ("err_z", "v")):
        if rows and key in rows[0]:
            ax.loglog(n, [r[key] for r in rows], mk + "--", ms=4, label=key.replace("err_", "|E") + " err|")
    ax.set_xlabel("tetrahedra")
    ax.set_ylabel("L2 error")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return Path(path)


def plot_permittivity(rows, path) -> Path:
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8, 3.5))
    by_mesh = {}
    for r in _ok(rows):
        by_mesh.setdefault(r["mesh"], []).append(r)
    for name, rs in by_mesh.items():
        eps = [r["eps_s"] for r in rs]
        ax1.semilogy(eps, [r["rel_error"] for r in rs], "o-", label=f"{name} ({rs[0]['n_tets']} tets)")
        ax2.plot(eps, [r["iterations"] for r in rs], "o-", label=name)
    ax1.set_xlabel("eps_s")
    ax1.set_ylabel("relative E error")
    ax2.set_xlabel("eps_s")
    ax2.set_ylabel("GMRES iterations")
    for ax in (ax1, ax2):
        ax.grid(True, alpha=0.3)
        ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return Path(path)


def plot_frequency(rows, path) -> Path:
    rows = _ok(rows)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8, 3.5))
    ka = [r["k0a"] for r in rows]
    ax1.loglog(ka, [r["rel_error"] for r in rows], "o-")
    ax2.loglog(ka, [r["condition"] for r in rows], "o-")
    ax1.set_ylabel("relative E error")
    ax2.set_ylabel("condition estimate")
    for ax in (ax1, ax2):
        ax.set_xlabel("k0 a")
        ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return Path(path)


def plot_extinction(rows, path) -> Path:
    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    n = [r["n_tets"] for r in rows]
    for key in [k for k in rows[0] if k.startswith("delta_")] if rows else []:
        ax.loglog(n, [r[key] for r in rows], "o-", label=key)
    ax.set_xlabel("tetrahedra")
    ax.set_ylabel("extinction residual")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return Path(path)
