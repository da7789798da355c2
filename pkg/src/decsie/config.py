"""INI run configuration with environment overrides.

Sections: [mesh], [material], [excitation], [solver], [output], and
[validate] for the validation drivers.  Any key can be overridden by an
environment variable DECSIE_<SECTION>_<KEY>, e.g. DECSIE_SOLVER_TOL=1e-10.
"""
from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field
from pathlib import Path

ENV_PREFIX = "DECSIE_"
SECTIONS = ("mesh", "material", "excitation", "solver", "output", "validate")


class ConfigError(ValueError):
    pass


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.replace(",", " ").split()]


def _complex(text: str) -> complex:
    try:
        return complex(text.replace(" ", "").replace("i", "j"))
    except ValueError as exc:
        raise ConfigError(f"not a number: {text!r}") from exc


@dataclass
class RunConfig:
    mesh: Path | None = None
    meshes: list[Path] = field(default_factory=list)  # refinement ladder
    regions: dict[int, complex] = field(default_factory=dict)
    k0: float = 1.0
    polarization: tuple = (1.0, 0.0, 0.0)
    direction: tuple = (0.0, 0.0, -1.0)
    tol: float = 1e-13
    method: str = "auto"
    restart: int = 200
    max_iterations: int | None = None
    preconditioner: str = "off"
    condition: str = "estimate"
    out: Path = Path("out")
    vtk: bool = True
    figures: bool = True
    threads: int = 1
    mode: str = "mie"
    sphere_radii: list[float] = field(default_factory=list)
    sphere_eps: list[complex] = field(default_factory=list)
    eps_values: list[float] = field(default_factory=lambda: [1.0, 5.0, 15.0, 30.0, 45.0])
    k0a_values: list[float] = field(default_factory=lambda: [1e-4, 1e-3, 1e-2, 1e-1, 0.2, 1.0])
    scatterer_tag: int = 1
    base: Path = Path(".")

    def solver_settings(self):
        from .hybrid import SolverSettings

        return SolverSettings(
            tol=self.tol, method=self.method, restart=self.restart, max_iterations=self.max_iterations,
            preconditioner=self.preconditioner, condition=self.condition,
        )

    def wave(self):
        from .sie import PlaneWave

        return PlaneWave(self.polarization, self.direction, self.k0)


def _resolve(base: Path, p: str) -> Path:
    path = Path(p).expanduser()
    return path if path.is_absolute() else base / path


def load_config(path=None, text: str | None = None, environ=None) -> RunConfig:
    """Parse an INI file (or string) and apply environment overrides."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    base = Path(".")
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        cp.read(path)
        base = path.resolve().parent
    if text is not None:
        cp.read_string(text)
    for name in cp.sections():
        if name not in SECTIONS:
            raise ConfigError(f"unknown section [{name}]")
    environ = os.environ if environ is None else environ
    for key, value in environ.items():
        if not key.startswith(ENV_PREFIX):
            continue
        rest = key[len(ENV_PREFIX):].lower()
        sec, _, opt = rest.partition("_")
        if sec not in SECTIONS or not opt:
            continue
        if not cp.has_section(sec):
            cp.add_section(sec)
        cp.set(sec, opt, value)

    cfg = RunConfig(base=base)
    try:
        _fill(cfg, cp, base)
    except (ValueError, KeyError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    return cfg


def _fill(cfg: RunConfig, cp: configparser.ConfigParser, base: Path) -> None:
    get = lambda s, k, d=None: cp.get(s, k, fallback=d) if cp.has_section(s) else d  # noqa: E731
    if (m := get("mesh", "path")) is not None:
        cfg.mesh = _resolve(base, m)
    if (ms := get("mesh", "ladder")) is not None:
        cfg.meshes = [_resolve(base, p) for p in ms.replace(",", " ").split()]
    if cp.has_section("material"):
        for tag, val in cp.items("material"):
            if not tag.lstrip("-").isdigit():
                raise ConfigError(f"[material] keys are integer region tags, got {tag!r}")
            cfg.regions[int(tag)] = _complex(val)
    if (v := get("excitation", "k0")) is not None:
        cfg.k0 = float(eval_number(v))
    if (v := get("excitation", "polarization")) is not None:
        cfg.polarization = tuple(_floats(v))
    if (v := get("excitation", "direction")) is not None:
        cfg.direction = tuple(_floats(v))
    for key, conv in (("tol", float), ("method", str), ("restart", int), ("preconditioner", str),
                      ("condition", str)):
        if (v := get("solver", key)) is not None:
            setattr(cfg, key, conv(v))
    if (v := get("solver", "max_iterations")) is not None:
        cfg.max_iterations = int(v) if v.strip().lower() not in ("", "none") else None
    if (v := get("solver", "threads")) is not None:
        cfg.threads = int(v)
    if (v := get("output", "dir")) is not None:
        cfg.out = _resolve(base, v)
    for key in ("vtk", "figures"):
        if cp.has_section("output") and cp.has_option("output", key):
            setattr(cfg, key, cp.getboolean("output", key))
    if (v := get("validate", "mode")) is not None:
        cfg.mode = v.strip()
    if (v := get("validate", "sphere_radii")) is not None:
        cfg.sphere_radii = _floats(v)
    if (v := get("validate", "sphere_eps")) is not None:
        cfg.sphere_eps = [_complex(t) for t in v.replace(",", " ").split()]
    if (v := get("validate", "eps_values")) is not None:
        cfg.eps_values = _floats(v)
    if (v := get("validate", "k0a_values")) is not None:
        cfg.k0a_values = _floats(v)
    if (v := get("validate", "scatterer_tag")) is not None:
        cfg.scatterer_tag = int(v)
    if cfg.method not in ("auto", "direct", "gmres"):
        raise ConfigError(f"solver method must be auto, direct or gmres, got {cfg.method!r}")
    if cfg.mode not in ("mie", "extinction", "sweep-eps", "sweep-freq"):
        raise ConfigError(f"unknown validation mode {cfg.mode!r}")


def eval_number(text: str) -> float:
    """Float literal, optionally written as a multiple or fraction of pi (2*pi/3, pi/25)."""
    t = text.strip().lower().replace(" ", "")
    if "pi" not in t:
        return float(t)
    import math
    import re

    m = re.fullmatch(r"(?:([0-9.eE+-]+)\*)?pi(?:/([0-9.eE+-]+))?", t)
    if not m:
        raise ConfigError(f"cannot parse {text!r}; use a float or forms like 2*pi/3")
    num = float(m.group(1)) if m.group(1) else 1.0
    den = float(m.group(2)) if m.group(2) else 1.0
    return num * math.pi / den
