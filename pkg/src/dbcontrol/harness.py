"""
Level sweeps reproducing the convergence, splitting and box-constraint studies.

Each sweep builds the mesh of every level, assembles with ``rho = schedule(h)``,
solves and records the L2 error, the experimental order of convergence and
the solver statistics in a :class:`StudyTable`.
"""
import logging
import math
import time
from dataclasses import dataclass, field
from typing import List, Optional

from .assembly import ERROR_QUAD_ORDER, LOAD_QUAD_ORDER, assemble_problem, l2_error
from .mesh import build_mesh
from .pdas import BoxConstraints, pdas_solve
from .saddle import INNER_TOL, ConvergenceError, iteration_cap, solve_unconstrained
from .targets import HARM3D, NONHARM3D, get_target

log = logging.getLogger(__name__)

COLUMNS = ("level", "M", "h", "rho", "l2_error", "l2_error_vs_harmonic_part", "eoc",
           "cg_iterations", "pcg_iterations", "pdas_iterations", "changing_points",
           "wall_time")


@dataclass(frozen=True)
class RhoSchedule:
    """Cost parameter as a function of the mesh size."""

    kind: str = "h_squared"
    fixed_value: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("h_squared", "h_squared_over_log", "fixed"):
            raise ValueError("unknown rho schedule {!r}".format(self.kind))
        if self.kind == "fixed" and not (self.fixed_value is not None
                                         and 0.0 < self.fixed_value <= 1.0):
            raise ValueError("fixed rho must lie in (0, 1]")

    def __call__(self, h):
        if self.kind == "h_squared":
            rho = h * h
        elif self.kind == "h_squared_over_log":
            if not 0.0 < h < 1.0:
                raise ValueError("h^2/|log h| needs 0 < h < 1, got h={}".format(h))
            rho = h * h / abs(math.log(h))
        else:
            rho = self.fixed_value
        if not 0.0 < rho <= 1.0:
            raise ValueError("rho={} for h={} lies outside (0, 1]".format(rho, h))
        return rho

    @classmethod
    def parse(cls, text):
        """``h2``, ``h2log`` or ``fixed:<value>``."""
        if text == "h2":
            return cls("h_squared")
        if text == "h2log":
            return cls("h_squared_over_log")
        if text.startswith("fixed:"):
            return cls("fixed", float(text[len("fixed:"):]))
        raise ValueError("unknown rho schedule {!r}".format(text))

    def label(self):
        return {"h_squared": "h2", "h_squared_over_log": "h2log"}.get(
            self.kind, "fixed:{!r}".format(self.fixed_value))


def eoc(errors):
    """``log2(e_{L-1} / e_L)`` for consecutive entries; ``None`` for the first."""
    out = [None]
    for prev, cur in zip(errors[:-1], errors[1:]):
        if prev is None or cur is None or prev <= 0.0 or cur <= 0.0:
            out.append(None)
        else:
            out.append(math.log(prev / cur) / math.log(2.0))
    return out


@dataclass
class StudyTable:
    rows: List[dict] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def column(self, name):
        return [row.get(name) for row in self.rows]

    def append(self, row):
        full = {name: row.get(name) for name in COLUMNS}
        self.rows.append(full)
        self._update_eoc()

    def _update_eoc(self):
        # with a known harmonic part the rate is measured against it
        key = ("l2_error_vs_harmonic_part"
               if any(r["l2_error_vs_harmonic_part"] is not None for r in self.rows)
               else "l2_error")
        for row, rate in zip(self.rows, eoc(self.column(key))):
            row["eoc"] = rate

    def __len__(self):
        return len(self.rows)

    def format(self):
        """Plain-text rendering for terminals and logs."""
        lines = []
        for row in self.rows:
            parts = ["L={}".format(row["level"]), "M={}".format(row["M"]),
                     "err={:.3e}".format(row["l2_error"])]
            if row["l2_error_vs_harmonic_part"] is not None:
                parts.append("err1={:.3e}".format(row["l2_error_vs_harmonic_part"]))
            parts.append("eoc=" + ("-" if row["eoc"] is None else "{:.2f}".format(row["eoc"])))
            for name in ("cg_iterations", "pcg_iterations", "pdas_iterations"):
                if row[name] is not None:
                    parts.append("{}={}".format(name.split("_")[0], row[name]))
            if row["changing_points"] is not None:
                parts.append("changes={{{}}}".format(row["changing_points"]))
            lines.append("  ".join(parts))
        return "\n".join(lines)


class StudyError(RuntimeError):
    """A level failed; ``table`` holds the rows completed before it."""

    def __init__(self, message, table):
        super().__init__(message)
        self.table = table


def _method_key(method):
    return method.replace("-", "_")


def _metadata(domain, target, schedule, method, tol, variant, extra=None):
    meta = {
        "domain": domain,
        "target": target.name,
        "rho": schedule.label(),
        "method": method,
        "tol": tol,
        "preconditioner": variant,
        "load_quadrature_degree": LOAD_QUAD_ORDER,
        "error_quadrature_degree": ERROR_QUAD_ORDER,
        "inner_tol": INNER_TOL,
        "outer_iteration_cap": "20*ceil(h^-1/2)+1000",
        "initial_guess": "p=0",
        "mesh": {
            "square": "structured, diagonals lower-left to upper-right",
            "lshape": "three unit squares, same pattern as square",
            "disc": "hexagon fan, red refinement with radial projection",
            "cube": "Kuhn split into 6 tetrahedra per subcube",
        }.get(domain, domain),
    }
    meta.update(extra or {})
    return meta


def _resolve_target(target, domain):
    target = get_target(target) if isinstance(target, str) else target
    dim = 3 if domain == "cube" else 2
    if target.dim is not None and target.dim != dim:
        raise ValueError("target {} is {}-dimensional but domain {} is {}-dimensional".format(
            target.name, target.dim, domain, dim))
    return target


def _levels(level_range):
    levels = list(level_range)
    if not levels:
        raise ValueError("empty level range")
    return levels


def run_convergence_study(domain, target, schedule, level_range, method="schur-pcg",
                          tol=1e-8, variant="lumped_sandwich", count_cg=False,
                          on_level=None):
    """Solve the unconstrained problem on every level of ``level_range``.

    ``count_cg`` additionally runs unpreconditioned CG to record its
    iteration count next to the PCG count. ``on_level(mesh, problem, report)``
    is called after every level (used for field export).
    """
    target = _resolve_target(target, domain)
    if isinstance(schedule, str):
        schedule = RhoSchedule.parse(schedule)
    key = _method_key(method)
    table = StudyTable(metadata=_metadata(domain, target, schedule, key, tol, variant))
    harmonic = target.harmonic_part
    for level in _levels(level_range):
        t0 = time.perf_counter()
        try:
            mesh = build_mesh(domain, level)
            rho = schedule(mesh.nominal_h)
            problem = assemble_problem(mesh, target, rho)
            report = solve_unconstrained(problem, key, tol=tol, variant=variant)
            row = {"level": level, "M": mesh.n_total, "h": mesh.nominal_h, "rho": rho,
                   "l2_error": l2_error(mesh, report.y, target)}
            if harmonic is not None:
                row["l2_error_vs_harmonic_part"] = l2_error(mesh, report.y, harmonic)
            if key == "schur_pcg":
                row["pcg_iterations"] = report.outer_stats.iterations
            elif key == "schur_cg":
                row["cg_iterations"] = report.outer_stats.iterations
            if count_cg and key != "schur_cg":
                try:
                    row["cg_iterations"] = solve_unconstrained(
                        problem, "schur_cg", tol=tol).outer_stats.iterations
                except ConvergenceError as exc:
                    # the count is auxiliary; keep the level and note the failure
                    log.warning("level %d: %s", level, exc)
                    table.metadata.setdefault("cg_not_converged", []).append(level)
        except Exception as exc:
            raise StudyError("level {} failed: {}".format(level, exc), table) from exc
        row["wall_time"] = time.perf_counter() - t0
        table.append(row)
        log.info("%s level %d: M=%d error=%.3e (%.1fs)", domain, level, mesh.n_total,
                 row["l2_error"], row["wall_time"])
        if on_level is not None:
            on_level(mesh, problem, report)
        table.metadata.setdefault("inner_solver", report.inner_solver_description)
    return table


def run_nonharmonic_study(levels, method="schur-pcg", tol=1e-8, variant="lumped_sandwich",
                          count_cg=False, on_level=None):
    """Cube with the harmonic target plus the Laplacian of a bubble."""
    return run_convergence_study("cube", NONHARM3D, RhoSchedule("h_squared"), levels,
                                 method=method, tol=tol, variant=variant,
                                 count_cg=count_cg, on_level=on_level)


def run_constrained_study(levels, g_minus, g_plus, scope="boundary_nodes", domain="cube",
                          target=HARM3D, schedule=None, tol=1e-10, solver="auto",
                          variant="lumped_sandwich", on_level=None):
    """Box-constrained sweep solved by the primal-dual active set method."""
    target = _resolve_target(target, domain)
    schedule = schedule or RhoSchedule("h_squared")
    if isinstance(schedule, str):
        schedule = RhoSchedule.parse(schedule)
    box = BoxConstraints(g_minus, g_plus, scope)
    table = StudyTable(metadata=_metadata(
        domain, target, schedule, "pdas-" + solver, tol, variant,
        {"g_minus": g_minus, "g_plus": g_plus, "scope": scope, "c": box.c,
         "pdas_initialization": "unconstrained solve, lambda=0"}))
    for level in _levels(levels):
        t0 = time.perf_counter()
        try:
            mesh = build_mesh(domain, level)
            rho = schedule(mesh.nominal_h)
            problem = assemble_problem(mesh, target, rho)
            report = pdas_solve(problem, box, tol=tol, solver=solver, variant=variant)
            row = {"level": level, "M": mesh.n_total, "h": mesh.nominal_h, "rho": rho,
                   "l2_error": l2_error(mesh, report.y, target),
                   "pdas_iterations": report.n_iterations,
                   "changing_points": ";".join(str(c) for c in report.changing_points)}
            if report.solver == "schur":
                row["pcg_iterations"] = sum(report.pcg_iterations)
        except Exception as exc:
            raise StudyError("level {} failed: {}".format(level, exc), table) from exc
        row["wall_time"] = time.perf_counter() - t0
        table.append(row)
        if on_level is not None:
            on_level(mesh, problem, report)
    return table


__all__ = ["RhoSchedule", "StudyTable", "StudyError", "eoc", "run_convergence_study",
           "run_nonharmonic_study", "run_constrained_study", "iteration_cap"]
