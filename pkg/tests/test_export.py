import os

import numpy as np
import pytest

from dbcontrol.assembly import assemble_problem
from dbcontrol.cli import main
from dbcontrol.export import export_csv, export_vtk, read_csv, solution_fields
from dbcontrol.harness import COLUMNS, StudyTable, run_convergence_study
from dbcontrol.mesh import build_mesh
from dbcontrol.saddle import solve_unconstrained
from dbcontrol.targets import HARM2D

pytestmark = pytest.mark.property


def _strip_wall_time(text):
    lines = text.splitlines()
    idx = lines[0].split(",").index("wall_time")
    return ["," .join(c for k, c in enumerate(line.split(",")) if k != idx) for line in lines]


def test_empty_table_header_only(tmp_path):
    path = tmp_path / "empty.csv"
    export_csv(StudyTable(), path)
    assert path.read_bytes() == (",".join(COLUMNS) + "\n").encode()


def test_roundtrip(tmp_path):
    table = run_convergence_study("square", "harm2d", "h2log", range(1, 3))
    table.rows[0]["changing_points"] = "21;0"
    path = tmp_path / "t.csv"
    export_csv(table, path)
    back = read_csv(path)
    assert back.metadata["rho"] == "h2log"
    for a, b in zip(table.rows, back.rows):
        for name in COLUMNS:
            if a[name] is None or isinstance(a[name], (int, str)):
                assert a[name] == b[name]
            else:
                assert b[name] == pytest.approx(a[name], rel=1e-11)


def test_lf_and_utf8(tmp_path):
    table = run_convergence_study("square", "harm2d", "h2", range(1, 2))
    path = tmp_path / "t.csv"
    export_csv(table, path)
    raw = path.read_bytes()
    assert b"\r" not in raw
    raw.decode("utf-8")


def test_cli_output_deterministic(tmp_path):
    outs = []
    for k in range(2):
        path = tmp_path / "run{}.csv".format(k)
        assert main(["run", "--domain", "square", "--target", "harm2d", "--rho", "h2",
                     "--levels", "1..3", "--method", "schur-pcg", "--out", str(path)]) == 0
        outs.append(path.read_text())
    assert _strip_wall_time(outs[0]) == _strip_wall_time(outs[1])
    assert "e-0" in outs[0]


def test_vtk(tmp_path):
    mesh = build_mesh("square", 1)
    prob = assemble_problem(mesh, HARM2D, mesh.nominal_h ** 2)
    rep = solve_unconstrained(prob)
    path = tmp_path / "f.vtk"
    export_vtk(mesh, solution_fields(prob, rep), path)
    lines = path.read_text().splitlines()
    assert lines[0] == "# vtk DataFile Version 3.0" and lines[2] == "ASCII"
    assert "POINTS {} double".format(mesh.n_total) in lines
    assert "POINT_DATA {}".format(mesh.n_total) in lines
    assert lines.count("5") == mesh.n_cells
    for name in ("y", "p", "lambda", "target"):
        assert "SCALARS {} double 1".format(name) in lines
    # the adjoint is zero-extended onto the boundary
    start = lines.index("SCALARS p double 1") + 2
    p = np.array(lines[start:start + mesh.n_total], dtype=float)
    assert np.allclose(p[:mesh.n_interior], rep.p)
    assert np.all(p[mesh.n_interior:] == 0.0)


def test_vtk_tetrahedra(tmp_path):
    mesh = build_mesh("cube", 0)
    path = tmp_path / "c.vtk"
    export_vtk(mesh, {"x": mesh.vertices[:, 0]}, path)
    lines = path.read_text().splitlines()
    assert lines.count("10") == mesh.n_cells


def test_vtk_rejects_long_field(tmp_path):
    mesh = build_mesh("square", 0)
    with pytest.raises(ValueError):
        export_vtk(mesh, {"x": np.zeros(mesh.n_total + 1)}, tmp_path / "x.vtk")


def test_io_error_names_path(tmp_path):
    target = tmp_path / "missing" / "t.csv"
    with pytest.raises(OSError) as info:
        export_csv(StudyTable(), target)
    assert os.fspath(target) in str(info.value)
