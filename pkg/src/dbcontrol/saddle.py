"""
Solution of the unconstrained optimality system

    [ M + rho K   Kt^T ] [y]   [ybar]
    [ Kt          0    ] [p] = [ 0  ]

by PCG on the dual Schur complement ``S = Kt (M + rho K)^-1 Kt^T`` or by a
direct factorization of the block matrix.
"""
from dataclasses import dataclass
from math import ceil

import numpy as np
from scipy import sparse as sp
from scipy.sparse import linalg as spla

from .linalg import Factorization, KrylovStats, cg, extreme_rayleigh, jacobi, pcg

METHODS = ("schur_pcg", "schur_cg", "direct")
VARIANTS = ("lumped_sandwich", "scaled_square")

# largest systems factorized directly, per spatial dimension
DIRECT_LIMIT = {2: 2_000_000, 3: 60_000}

INNER_TOL = 1e-12


class ConvergenceError(RuntimeError):
    def __init__(self, message, stats=None):
        super().__init__(message)
        self.stats = stats


class _SPDSolver:
    """Cached inverse of an SPD matrix: sparse LU or Jacobi-CG."""

    def __init__(self, A, kind, tol=INNER_TOL, name="A"):
        self.A = A
        self.kind = kind
        self.tol = tol
        self.name = name
        self.inner_iterations = 0
        self.calls = 0
        if kind == "direct":
            self._fact = Factorization(A)
        elif kind == "cg":
            self._prec = jacobi(A)
        else:
            raise ValueError("unknown inner solver {!r}".format(kind))

    def solve(self, b):
        self.calls += 1
        if self.kind == "direct":
            return self._fact.solve(b)
        x, stats = pcg(self.A, self._prec, b, tol=self.tol, maxit=20 * self.A.shape[0] + 100)
        self.inner_iterations += stats.iterations
        if not stats.converged:
            raise ConvergenceError(
                "inner CG for {} did not converge (residual {:.2e})".format(
                    self.name, stats.final_relative_residual), stats)
        return x

    def describe(self):
        if self.kind == "direct":
            return "{}: sparse LU".format(self.name)
        return "{}: Jacobi-CG to {:.0e}".format(self.name, self.tol)


def _pick_inner(problem, n, inner):
    if inner == "auto":
        return "direct" if n <= DIRECT_LIMIT.get(problem.dim, 60_000) else "cg"
    return inner


def state_solver(problem, inner="auto", inner_tol=INNER_TOL):
    """Cached solver for ``M + rho K``."""
    # M + rho K is uniformly well conditioned for rho <= h^2, so Jacobi-CG
    # is cheaper than a 3D factorization at every size
    kind = inner
    if inner == "auto":
        kind = "direct" if problem.dim == 2 else "cg"
    key = ("A", kind, inner_tol)
    if key not in problem._cache:
        problem._cache[key] = _SPDSolver(problem.state_matrix(), kind, inner_tol,
                                         name="M+rho*K")
    return problem._cache[key]


def dirichlet_solver(problem, inner="auto", inner_tol=INNER_TOL):
    """Cached solver for the Dirichlet stiffness matrix ``K0``."""
    kind = _pick_inner(problem, problem.n_interior, inner)
    key = ("K0", kind, inner_tol)
    if key not in problem._cache:
        problem._cache[key] = _SPDSolver(problem.dirichlet_stiffness, kind, inner_tol,
                                         name="K0")
    return problem._cache[key]


@dataclass(eq=False)
class SaddleSystem:
    """Block system for one assembled problem, with cached inner solvers."""

    problem: object
    inner: str = "auto"
    inner_tol: float = INNER_TOL

    @property
    def A(self):
        return self.problem.state_matrix()

    @property
    def B(self):
        return self.problem.interior_stiffness

    @property
    def rhs(self):
        return self.problem.load

    def solve_state(self, b):
        return state_solver(self.problem, self.inner, self.inner_tol).solve(b)

    def schur_operator(self):
        N = self.problem.n_interior
        return spla.LinearOperator((N, N), matvec=lambda p: schur_apply(self, p),
                                   dtype=float)

    def block_matrix(self):
        B = self.B
        return sp.bmat([[self.A, B.T], [B, None]], format="csc")

    def block_residual(self, y, p):
        """Relative residuals of both block rows."""
        r1 = self.A @ y + self.B.T @ p - self.rhs
        r2 = self.B @ y
        scale = max(np.linalg.norm(self.rhs), 1e-300)
        ynorm = max(np.linalg.norm(self.A @ y), 1e-300)
        return np.linalg.norm(r1) / scale, np.linalg.norm(r2) / ynorm


def schur_apply(sys, p, inner_tol=None):
    """``Kt (M + rho K)^-1 Kt^T p``."""
    if inner_tol is not None and inner_tol != sys.inner_tol:
        sys = SaddleSystem(sys.problem, sys.inner, inner_tol)
    p = np.asarray(p, dtype=float)
    if p.shape != (sys.problem.n_interior,):
        raise ValueError("p must have length N={}".format(sys.problem.n_interior))
    return sys.B @ sys.solve_state(sys.B.T @ p)


def precond_apply(problem, r, variant="lumped_sandwich", inner="auto"):
    """Apply the inverse of the biharmonic-type preconditioner ``C_h``.

    ``lumped_sandwich``: ``C_h = K0 lump(M0)^-1 K0``.
    ``scaled_square``: ``C_h = h^-d K0^2``.
    """
    K0 = dirichlet_solver(problem, inner)
    r = np.asarray(r, dtype=float)
    if variant == "lumped_sandwich":
        D0 = problem.lumped_interior_mass.diagonal()
        return K0.solve(D0 * K0.solve(r))
    if variant == "scaled_square":
        return problem.h ** problem.dim * K0.solve(K0.solve(r))
    raise ValueError("unknown preconditioner variant {!r}".format(variant))


def preconditioner(problem, variant="lumped_sandwich", inner="auto"):
    N = problem.n_interior
    return spla.LinearOperator(
        (N, N), matvec=lambda r: precond_apply(problem, r, variant, inner), dtype=float)


def iteration_cap(h):
    return 20 * ceil(h ** -0.5) + 1000


@dataclass
class SolveReport:
    """Discrete state, adjoint and control with solver statistics."""

    y: np.ndarray
    p: np.ndarray
    n_interior: int
    outer_stats: KrylovStats
    method: str
    inner_solver_description: str

    @property
    def control(self):
        return self.y[self.n_interior:]


def _normalize_method(method):
    return method.replace("-", "_")


def solve_unconstrained(problem, method="schur_pcg", tol=1e-8,
                        variant="lumped_sandwich", inner="auto", maxit=None):
    """Solve the optimality system for ``(y, p)``.

    ``schur_pcg`` and ``schur_cg`` solve ``S p = Kt A^-1 ybar`` from
    ``p = 0`` to relative residual ``tol`` and recover
    ``y = A^-1 (ybar - Kt^T p)``; ``direct`` factorizes the block matrix.

    Raises
    ------
    ConvergenceError
        If the outer iteration exceeds its cap.
    """
    method = _normalize_method(method)
    if method not in METHODS:
        raise ValueError("unknown method {!r}; expected one of {}".format(method, METHODS))
    if not problem.rho > 0:
        raise ValueError("rho must be positive")
    N, M = problem.n_interior, problem.n_total
    sys = SaddleSystem(problem, inner)

    if method == "direct":
        K = sys.block_matrix()
        sol = Factorization(K, indefinite=True).solve(np.concatenate([problem.load, np.zeros(N)]))
        y, p = sol[:M], sol[M:]
        r1, r2 = sys.block_residual(y, p)
        return SolveReport(y, p, N, KrylovStats(0, max(r1, r2), True), method,
                           "block system: sparse LU")

    if maxit is None:
        maxit = iteration_cap(problem.h)
    Ainv = state_solver(problem, inner)
    b = sys.B @ Ainv.solve(problem.load)
    S = sys.schur_operator()
    if method == "schur_pcg":
        C = preconditioner(problem, variant, inner)
        p, stats = pcg(S, C, b, tol=tol, maxit=maxit)
        desc = "{}; {}; preconditioner {}".format(
            Ainv.describe(), dirichlet_solver(problem, inner).describe(), variant)
    else:
        p, stats = cg(S, b, tol=tol, maxit=maxit)
        desc = Ainv.describe()
    if not stats.converged:
        raise ConvergenceError(
            "{} did not converge in {} iterations (residual {:.2e})".format(
                method, stats.iterations, stats.final_relative_residual), stats)
    y = Ainv.solve(problem.load - sys.B.T @ p)
    return SolveReport(y, p, N, stats, method, desc)


def spectral_probe(problem, variant="lumped_sandwich", n_iters=100, inner="auto", seed=0):
    """Extreme eigenvalue estimates of the preconditioned Schur operator."""
    sys = SaddleSystem(problem, inner)
    return extreme_rayleigh(sys.schur_operator(), n_iters=n_iters,
                            B_solve=lambda r: precond_apply(problem, r, variant, inner),
                            seed=seed)
