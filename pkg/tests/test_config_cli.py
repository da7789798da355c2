import csv
import math

import numpy as np
import pytest

from decsie import cli
from decsie.config import ConfigError, eval_number, load_config
from decsie.mie import LayeredSphere, mie_field
from decsie.sie import PlaneWave

from conftest import mesh_path

BASIC = """
[mesh]
path = {mesh}
[material]
1 = 2.25
9 = 1
[excitation]
k0 = 2*pi/3
polarization = 1 0 0
direction = 0 0 -1
[solver]
method = direct
[output]
dir = {out}
figures = false
[validate]
sphere_radii = 0.1
"""


def _write(tmp_path, text=BASIC, mesh="sphere_c"):
    path = tmp_path / "run.ini"
    path.write_text(text.format(mesh=mesh_path(mesh), out=tmp_path / "out"))
    return path


def test_load_config_values(tmp_path):
    cfg = load_config(_write(tmp_path), environ={})
    assert cfg.k0 == pytest.approx(2 * math.pi / 3)
    assert cfg.regions == {1: 2.25, 9: 1.0}
    assert cfg.method == "direct" and cfg.figures is False and cfg.vtk is True
    assert cfg.wave().u_hat.tolist() == [0, 0, -1]
    assert cfg.solver_settings().method == "direct"


def test_environment_overrides(tmp_path):
    env = {"DECSIE_SOLVER_TOL": "1e-10", "DECSIE_EXCITATION_K0": "pi/25", "DECSIE_MATERIAL_1": "4+0.1i",
           "UNRELATED": "x", "DECSIE_BOGUS_KEY": "1"}
    cfg = load_config(_write(tmp_path), environ=env)
    assert cfg.tol == 1e-10 and cfg.k0 == pytest.approx(math.pi / 25) and cfg.regions[1] == 4 + 0.1j


@pytest.mark.parametrize("text,match", [
    ("[material]\nglass = 2\n", "integer region tags"),
    ("[solver]\nmethod = cg\n", "gmres"),
    ("[unknown]\na = 1\n", "unknown section"),
    ("[validate]\nmode = nope\n", "validation mode"),
    ("[material]\n1 = abc\n", "not a number"),
    ("[solver]\nrestart = many\n", "many"),
])
def test_bad_config(text, match):
    with pytest.raises(ConfigError, match=match):
        load_config(text=text, environ={})


def test_eval_number():
    assert eval_number("2*pi/3") == pytest.approx(2 * math.pi / 3)
    assert eval_number("pi") == pytest.approx(math.pi)
    assert eval_number("0.5") == 0.5
    with pytest.raises(ConfigError):
        eval_number("pi*2")


def test_missing_config_file(tmp_path, capsys):
    assert cli.main(["solve", "--config", str(tmp_path / "none.ini")]) == cli.EXIT_CONFIG
    assert "not found" in capsys.readouterr().err


def test_solve_writes_outputs(tmp_path, capsys):
    code = cli.main(["solve", "--config", str(_write(tmp_path)), "--dump-operators", "--threads", "1"])
    assert code == cli.EXIT_OK
    out = tmp_path / "out"
    for name in ("summary.csv", "solution.vtk", "D0.mtx", "H1.mtx", "S.mtx", "D.mtx"):
        assert (out / name).is_file()
    row = next(csv.DictReader((out / "summary.csv").open()))
    assert row["method"] == "direct" and float(row["residual"]) < 1e-12
    assert "unknowns" in capsys.readouterr().out


def test_unknown_region_tag_is_mesh_error(tmp_path, capsys):
    text = BASIC.replace("1 = 2.25\n", "")
    assert cli.main(["solve", "--config", str(_write(tmp_path, text))]) == cli.EXIT_MESH
    assert "unknown region tag(s) [1]" in capsys.readouterr().err


def test_dielectric_on_gamma_is_mesh_error(tmp_path):
    text = BASIC.replace("9 = 1\n", "9 = 2\n")
    assert cli.main(["solve", "--config", str(_write(tmp_path, text))]) == cli.EXIT_MESH


def test_missing_mesh_file_is_input_error(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text(BASIC.format(mesh=tmp_path / "gone.msh", out=tmp_path / "out"))
    assert cli.main(["solve", "--config", str(path)]) == cli.EXIT_INPUT


def test_validate_mie_with_check(tmp_path, capsys):
    text = BASIC.replace("path = {mesh}", "ladder = {mesh} {mesh2}").replace("figures = false", "figures = true")
    path = tmp_path / "run.ini"
    path.write_text(text.format(mesh=mesh_path("sphere_1k"), mesh2=mesh_path("sphere_5k"), out=tmp_path / "out"))
    code = cli.main(["validate", "--config", str(path), "--mode", "mie", "--check"])
    printed = capsys.readouterr().out
    assert code == cli.EXIT_OK, printed
    assert "PASS  error decreases along refinement" in printed
    assert (tmp_path / "out" / "mie_errors.png").stat().st_size > 0
    rows = list(csv.DictReader((tmp_path / "out" / "mie_errors.csv").open()))
    assert [int(r["n_tets"]) for r in rows] == [1370, 5465]


def test_validate_geometry_mismatch_is_field_error(tmp_path):
    text = BASIC.replace("sphere_radii = 0.1", "sphere_radii = 0.05")
    assert cli.main(["validate", "--config", str(_write(tmp_path, text, "sphere_1k")), "--mode", "mie"]) == cli.EXIT_FIELD


def test_mie_subcommand(tmp_path):
    pts = np.array([[0.0, 0.0, 0.0], [0.05, 0.01, -0.02], [0.05, 0.01, -0.02], [0.3, 0.0, 0.1]])
    src = tmp_path / "pts.csv"
    src.write_text("x,y,z\n" + "\n".join(",".join(map(str, p)) for p in pts) + "\n")
    dst = tmp_path / "E.csv"
    assert cli.main(["mie", str(src), "--radii", "0.1", "--eps", "2.25", "--k0", "2.0", "--out", str(dst)]) == 0
    rows = list(csv.DictReader(dst.open()))
    assert len(rows) == 4 and rows[1] == rows[2]
    E = mie_field(LayeredSphere((0.1,), (2.25,)), PlaneWave((1, 0, 0), (0, 0, -1), 2.0), pts)
    got = np.array([[float(r["re_Ex"]) + 1j * float(r["im_Ex"]) for r in rows]])
    assert np.array_equal(got[0], E[:, 0])


def test_mie_subcommand_bad_row(tmp_path, capsys):
    src = tmp_path / "pts.csv"
    src.write_text("0,0,0\n1,two,3\n")
    assert cli.main(["mie", str(src), "--radii", "0.1", "--eps", "2.25", "--k0", "2.0"]) == cli.EXIT_INPUT
    assert ":2:" in capsys.readouterr().err


def test_parser_rejects_unknown_mode():
    with pytest.raises(SystemExit) as info:
        cli.main(["validate", "--config", "x.ini", "--mode", "fast"])
    assert info.value.code == 2


def test_shipped_configs_parse():
    from pathlib import Path

    root = Path(__file__).resolve().parents[1] / "configs"
    files = sorted(root.glob("*.ini"))
    assert files
    for path in files:
        cfg = load_config(path, environ={})
        for mesh in cfg.meshes or [cfg.mesh]:
            assert mesh.is_file(), mesh
