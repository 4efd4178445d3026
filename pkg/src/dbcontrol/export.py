"""
CSV tables and legacy-VTK field files.

CSV floats use scientific notation with 12 significant digits so that
repeated runs produce byte-identical files (apart from ``wall_time``).
"""
import csv
import json
import os

import numpy as np

from .harness import COLUMNS, StudyTable

FLOAT_FORMAT = "{:.11e}"
_INT_COLUMNS = ("level", "M", "cg_iterations", "pcg_iterations", "pdas_iterations")
_STR_COLUMNS = ("changing_points",)


def _format(name, value):
    if value is None:
        return ""
    if name in _INT_COLUMNS:
        return str(int(value))
    if name in _STR_COLUMNS:
        return str(value)
    return FLOAT_FORMAT.format(float(value))


def _parse(name, text):
    if text == "":
        return None
    if name in _INT_COLUMNS:
        return int(text)
    if name in _STR_COLUMNS:
        return text
    return float(text)


def metadata_path(path):
    return os.fspath(path) + ".meta.json"


def export_csv(table, path, write_metadata=True):
    """Write ``table`` as CSV; metadata goes to ``<path>.meta.json``."""
    path = os.fspath(path)
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(COLUMNS)
            for row in table.rows:
                writer.writerow([_format(name, row.get(name)) for name in COLUMNS])
        if write_metadata:
            with open(metadata_path(path), "w", encoding="utf-8") as fh:
                json.dump(table.metadata, fh, indent=2, sort_keys=True, default=str)
                fh.write("\n")
    except OSError as exc:
        raise OSError("cannot write table to {}: {}".format(path, exc)) from exc


def read_csv(path):
    """Inverse of :func:`export_csv`; metadata is loaded when present."""
    path = os.fspath(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [{name: _parse(name, text) for name, text in zip(header, rec)}
                for rec in reader]
    meta = {}
    if os.path.exists(metadata_path(path)):
        with open(metadata_path(path), encoding="utf-8") as fh:
            meta = json.load(fh)
    return StudyTable(rows=rows, metadata=meta)


_VTK_CELL_TYPE = {2: 5, 3: 10}  # triangle, tetrahedron


def export_vtk(mesh, fields, path):
    """Legacy ASCII VTK unstructured grid with one scalar per entry of ``fields``.

    Arrays shorter than ``M`` (interior-only vectors such as the adjoint)
    are extended by zero on the boundary nodes.
    """
    path = os.fspath(path)
    M = mesh.n_total
    lines = ["# vtk DataFile Version 3.0", "dirichlet boundary control",
             "ASCII", "DATASET UNSTRUCTURED_GRID", "POINTS {} double".format(M)]
    pts = np.zeros((M, 3))
    pts[:, :mesh.dim] = mesh.vertices
    lines.extend("{:.16e} {:.16e} {:.16e}".format(*x) for x in pts)
    k = mesh.dim + 1
    lines.append("CELLS {} {}".format(mesh.n_cells, mesh.n_cells * (k + 1)))
    lines.extend(" ".join(map(str, (k, *c))) for c in mesh.cells)
    lines.append("CELL_TYPES {}".format(mesh.n_cells))
    lines.extend([str(_VTK_CELL_TYPE[mesh.dim])] * mesh.n_cells)
    if fields:
        lines.append("POINT_DATA {}".format(M))
    for name, values in fields.items():
        values = np.asarray(values, dtype=float).ravel()
        if len(values) > M:
            raise ValueError("field {!r} has {} values for {} points".format(
                name, len(values), M))
        full = np.zeros(M)
        full[:len(values)] = values
        lines.append("SCALARS {} double 1".format(name))
        lines.append("LOOKUP_TABLE default")
        lines.extend("{:.16e}".format(v) for v in full)
    try:
        with open(path, "w", newline="\n", encoding="ascii") as fh:
            fh.write("\n".join(lines))
            fh.write("\n")
    except OSError as exc:
        raise OSError("cannot write VTK file {}: {}".format(path, exc)) from exc


def solution_fields(problem, report):
    """Named nodal fields ``y``, ``p``, ``lambda`` and ``target`` of a solve."""
    lam = getattr(report, "lam", None)
    return {
        "y": report.y,
        "p": report.p,
        "lambda": np.zeros(problem.n_total) if lam is None else lam,
        "target": problem.target.evaluate(problem.mesh.vertices),
    }
