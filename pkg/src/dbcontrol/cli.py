"""
Command line front end: ``dbc run ...`` runs one level sweep.

Example::

    dbc run --domain cube --target harm3d --rho h2 --levels 1..4 \\
        --method schur-pcg --out table1.csv

Bounds starting with a minus sign must be attached with ``=``, e.g.
``--constrain=-0.7,0.7``.
"""
import argparse
import logging
import os
import sys

from .export import export_csv, export_vtk, solution_fields
from .harness import RhoSchedule, StudyError, run_constrained_study, run_convergence_study
from .mesh import DOMAINS
from .saddle import VARIANTS
from .targets import get_target

log = logging.getLogger("dbcontrol")

_SCOPES = {"all": "all_nodes", "boundary": "boundary_nodes"}


def parse_levels(text):
    """``"A..B"`` (inclusive) or a single level."""
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            lo, hi = int(lo), int(hi)
        else:
            lo = hi = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("levels must look like A..B, got {!r}".format(text))
    if lo < 0 or hi < lo:
        raise argparse.ArgumentTypeError("invalid level range {!r}".format(text))
    return range(lo, hi + 1)


def parse_bounds(text):
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("bounds must look like g-,g+ got {!r}".format(text))
    return lo, hi


def _schedule(text):
    try:
        return RhoSchedule.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _target(text):
    try:
        return get_target(text)
    except (KeyError, ValueError) as exc:
        raise argparse.ArgumentTypeError(str(exc))


def build_parser():
    parser = argparse.ArgumentParser(prog="dbc", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a level sweep and write a CSV table")
    run.add_argument("--domain", required=True, choices=DOMAINS)
    run.add_argument("--target", required=True, type=_target,
                     help="harm2d, harm3d, nonharm3d or const:<v>")
    run.add_argument("--rho", default=RhoSchedule("h_squared"), type=_schedule,
                     help="h2, h2log or fixed:<v> (default h2)")
    run.add_argument("--levels", required=True, type=parse_levels, help="A..B inclusive")
    run.add_argument("--method", default="schur-pcg",
                     choices=("schur-pcg", "schur-cg", "direct"))
    run.add_argument("--variant", default="lumped_sandwich", choices=VARIANTS,
                     help="preconditioner for schur-pcg")
    run.add_argument("--with-cg", action="store_true",
                     help="also record unpreconditioned CG counts")
    run.add_argument("--constrain", type=parse_bounds, metavar="G-,G+",
                     help="box constraints, solved by the active set method")
    run.add_argument("--scope", default="boundary", choices=tuple(_SCOPES))
    run.add_argument("--pdas-solver", default="auto", choices=("auto", "direct", "schur"))
    run.add_argument("--tol", type=float, default=None,
                     help="outer relative residual (default 1e-8, 1e-10 with --constrain)")
    run.add_argument("--out", required=True, help="CSV output path")
    run.add_argument("--vtk", metavar="DIR", help="write level_<L>.vtk field files here")
    run.add_argument("-v", "--verbose", action="store_true")
    return parser


def _vtk_writer(directory):
    if directory is None:
        return None
    os.makedirs(directory, exist_ok=True)

    def write(mesh, problem, report):
        export_vtk(mesh, solution_fields(problem, report),
                   os.path.join(directory, "level_{}.vtk".format(mesh.level)))
    return write


def run(args):
    on_level = _vtk_writer(args.vtk)
    if args.constrain is not None:
        g_minus, g_plus = args.constrain
        table = run_constrained_study(
            args.levels, g_minus, g_plus, scope=_SCOPES[args.scope], domain=args.domain,
            target=args.target, schedule=args.rho,
            tol=1e-10 if args.tol is None else args.tol, solver=args.pdas_solver,
            variant=args.variant, on_level=on_level)
    else:
        table = run_convergence_study(
            args.domain, args.target, args.rho, args.levels, method=args.method,
            tol=1e-8 if args.tol is None else args.tol, variant=args.variant,
            count_cg=args.with_cg, on_level=on_level)
    export_csv(table, args.out)
    print(table.format())
    return table


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        run(args)
    except StudyError as exc:
        if exc.table.rows:
            export_csv(exc.table, args.out)
        print("dbc: {}".format(exc), file=sys.stderr)
        return 1
    except (ValueError, OSError, ArithmeticError, RuntimeError, MemoryError) as exc:
        print("dbc: {}".format(exc), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
