"""
Primal-dual active set method for box constraints ``g- <= y_k <= g+``.

Each iteration classifies the constrained nodes with the complementarity
function

    lambda_k = min(0, lambda_k + c (g+ - y_k)) + max(0, lambda_k + c (g- - y_k)),

fixes ``y_k`` to the bound on the active nodes, sets ``lambda_k = 0`` on the
inactive ones and solves the remaining equality-constrained saddle system.
The iteration stops when the active sets repeat.
"""
from dataclasses import dataclass, field
from typing import List

import numpy as np
from scipy import sparse as sp
from scipy.sparse import linalg as spla

from .linalg import Factorization, pcg
from .saddle import (INNER_TOL, ConvergenceError, _SPDSolver, iteration_cap,
                     preconditioner, solve_unconstrained)

SCOPES = ("boundary_nodes", "all_nodes")

# block systems up to this many unknowns are factorized when solver="auto"
DIRECT_PDAS_LIMIT = {2: 400_000, 3: 20_000}


@dataclass(frozen=True)
class BoxConstraints:
    g_minus: float
    g_plus: float
    scope: str = "boundary_nodes"
    c: float = 1.0

    def __post_init__(self):
        if not self.g_minus <= 0.0 <= self.g_plus:
            raise ValueError("bounds must satisfy g_minus <= 0 <= g_plus, got "
                             "({}, {})".format(self.g_minus, self.g_plus))
        if self.scope not in SCOPES:
            raise ValueError("scope must be one of {}".format(SCOPES))
        if not self.c > 0.0:
            raise ValueError("complementarity parameter c must be positive")

    def mask(self, mesh):
        """Boolean mask of constrained nodes."""
        if self.scope == "all_nodes":
            return np.ones(mesh.n_total, dtype=bool)
        return mesh.boundary_mask()


@dataclass
class PdasReport:
    y: np.ndarray
    p: np.ndarray
    lam: np.ndarray
    n_iterations: int
    changing_points: List[int]
    feasible: bool
    status: np.ndarray = field(repr=False)
    pcg_iterations: List[int] = field(default_factory=list)
    solver: str = "direct"

    @property
    def n_upper(self):
        return int((self.status > 0).sum())

    @property
    def n_lower(self):
        return int((self.status < 0).sum())


def classify(y, lam, box, mask):
    """Active-set status: +1 at the upper bound, -1 at the lower, 0 inactive."""
    status = np.zeros(len(y), dtype=np.int8)
    upper = mask & (lam + box.c * (box.g_plus - y) < 0.0)
    lower = mask & (lam + box.c * (box.g_minus - y) > 0.0)
    status[upper] = 1
    status[lower] = -1
    return status


def complementarity_residual(y, lam, box, mask):
    """Componentwise residual of the complementarity equation on ``mask``."""
    r = (lam - np.minimum(0.0, lam + box.c * (box.g_plus - y))
         - np.maximum(0.0, lam + box.c * (box.g_minus - y)))
    return np.where(mask, np.abs(r), 0.0)


def _pick_solver(problem, solver):
    if solver != "auto":
        return solver
    n = problem.n_total + problem.n_interior
    return "direct" if n <= DIRECT_PDAS_LIMIT.get(problem.dim, 20_000) else "schur"


def solve_reduced(problem, status, box, solver="direct", tol=1e-10, variant="lumped_sandwich"):
    """Solve the saddle system with ``y`` fixed to the bounds where ``status != 0``.

    Returns ``(y, p, pcg_iterations)``.
    """
    A = problem.state_matrix()
    B = problem.interior_stiffness
    f = problem.load
    fixed = status != 0
    free = ~fixed
    g = np.where(status > 0, box.g_plus, box.g_minus)[fixed]
    A_ff = A[free][:, free].tocsr()
    A_fx = A[free][:, fixed]
    B_f = B[:, free].tocsr()
    B_x = B[:, fixed]
    f_r = f[free] - A_fx @ g
    c_r = -(B_x @ g)
    N = problem.n_interior

    iterations = 0
    if solver == "direct":
        K = sp.bmat([[A_ff, B_f.T], [B_f, None]], format="csc")
        sol = Factorization(K, indefinite=True).solve(np.concatenate([f_r, c_r]))
        y_f, p = sol[:len(f_r)], sol[len(f_r):]
    elif solver == "schur":
        kind = "direct" if problem.dim == 2 else "cg"
        Ainv = _SPDSolver(A_ff, kind, INNER_TOL, name="A_FF")
        S = spla.LinearOperator((N, N), matvec=lambda q: B_f @ Ainv.solve(B_f.T @ q),
                                dtype=float)
        rhs = B_f @ Ainv.solve(f_r) - c_r
        C = preconditioner(problem, variant)
        p, stats = pcg(S, C, rhs, tol=tol, maxit=iteration_cap(problem.h))
        if not stats.converged:
            raise ConvergenceError("reduced Schur PCG did not converge", stats)
        iterations = stats.iterations
        y_f = Ainv.solve(f_r - B_f.T @ p)
    else:
        raise ValueError("unknown PDAS solver {!r}".format(solver))

    y = np.empty(problem.n_total)
    y[free] = y_f
    y[fixed] = g
    return y, p, iterations


def pdas_solve(problem, box, tol=1e-10, solver="auto", max_iter=50,
               variant="lumped_sandwich"):
    """Primal-dual active set iteration, warm-started from the unconstrained solve.

    Parameters
    ----------
    problem : AssembledProblem
    box : BoxConstraints
    tol : float
        Relative tolerance of the Schur PCG used for reduced systems.
    solver : {"auto", "direct", "schur"}
        Solver for the reduced saddle systems.

    Raises
    ------
    ConvergenceError
        If the active sets keep changing after ``max_iter`` iterations.
    """
    solver = _pick_solver(problem, solver)
    mask = box.mask(problem.mesh)
    if solver == "direct":
        start = solve_unconstrained(problem, "direct")
        pcg_its = []
    else:
        start = solve_unconstrained(problem, "schur_pcg", tol=tol, variant=variant)
        pcg_its = [start.outer_stats.iterations]
    y, p = start.y, start.p
    lam = np.zeros(problem.n_total)
    status = np.zeros(problem.n_total, dtype=np.int8)
    changing = []

    for _ in range(max_iter):
        new_status = classify(y, lam, box, mask)
        changes = int(np.count_nonzero(new_status != status))
        changing.append(changes)
        if changes == 0:
            break
        status = new_status
        try:
            y, p, its = solve_reduced(problem, status, box, solver, tol, variant)
        except ArithmeticError as exc:
            raise ConvergenceError(
                "singular reduced system with {} upper / {} lower active nodes: {}".format(
                    int((status > 0).sum()), int((status < 0).sum()), exc)) from exc
        pcg_its.append(its)
        residual = problem.state_matrix() @ y + problem.interior_stiffness.T @ p - problem.load
        lam = np.where(status != 0, residual, 0.0)
    else:
        raise ConvergenceError("PDAS did not settle within {} iterations; changing "
                               "points {}".format(max_iter, changing))

    ym = y[mask]
    feasible = bool(np.all(ym >= box.g_minus - 1e-10) and np.all(ym <= box.g_plus + 1e-10))
    return PdasReport(y=y, p=p, lam=lam, n_iterations=len(changing),
                      changing_points=changing, feasible=feasible, status=status,
                      pcg_iterations=pcg_its, solver=solver)
