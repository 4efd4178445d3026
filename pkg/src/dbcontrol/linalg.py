"""
Sparse kernels, Krylov solvers, direct factorizations and spectral probes.

Matrices are stored as :class:`scipy.sparse.csr_matrix`; operators are
anything exposing ``shape`` and ``matvec`` (e.g.
:class:`scipy.sparse.linalg.LinearOperator`).
"""
from dataclasses import dataclass

import numpy as np
from scipy import sparse as sp
from scipy.linalg import eigh_tridiagonal
from scipy.sparse import linalg as spla


class BreakdownError(ArithmeticError):
    """Raised when CG meets a non-positive curvature direction."""


class SingularMatrixError(ArithmeticError):
    pass


@dataclass(frozen=True)
class KrylovStats:
    iterations: int
    final_relative_residual: float
    converged: bool


def spmv(A, x):
    """``A @ x`` for CSR ``A`` with a dimension check."""
    x = np.asarray(x)
    if A.shape[1] != x.shape[0]:
        raise ValueError("dimension mismatch: matrix {} vs vector {}".format(
            A.shape, x.shape))
    return A @ x


def as_operator(A):
    if A is None:
        return None
    if isinstance(A, spla.LinearOperator):
        return A
    return spla.aslinearoperator(A)


def pcg(A, Cinv, b, tol=1e-8, maxit=None, x0=None, callback=None):
    """Preconditioned conjugate gradients.

    Stops once ``||b - A x||_2 <= tol * ||b||_2`` in the Euclidean norm of
    the (recursively updated) residual. ``Cinv=None`` runs plain CG.

    Returns
    -------
    x : ndarray
    stats : KrylovStats
    """
    A = as_operator(A)
    Cinv = as_operator(Cinv)
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    if A.shape != (n, n):
        raise ValueError("operator shape {} does not match rhs length {}".format(A.shape, n))
    if maxit is None:
        maxit = 10 * n + 100
    bnorm = np.linalg.norm(b)
    if x0 is None:
        x = np.zeros(n)
        r = b.copy()
    else:
        x = np.array(x0, dtype=float)
        r = b - A.matvec(x)
    if bnorm == 0.0:
        return np.zeros(n), KrylovStats(0, 0.0, True)

    res = np.linalg.norm(r) / bnorm
    if res <= tol:
        return x, KrylovStats(0, res, True)
    z = r if Cinv is None else Cinv.matvec(r)
    rz = r @ z
    p = z.copy()
    it = 0
    while it < maxit:
        it += 1
        Ap = A.matvec(p)
        pAp = p @ Ap
        if not pAp > 0.0:
            raise BreakdownError(
                "non-positive curvature p^T A p = {:g} at iteration {}".format(pAp, it))
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        if callback is not None:
            callback(x)
        res = np.linalg.norm(r) / bnorm
        if res <= tol:
            return x, KrylovStats(it, res, True)
        z = r if Cinv is None else Cinv.matvec(r)
        rz_new = r @ z
        if not rz_new > 0.0:
            raise BreakdownError("preconditioner is not positive definite")
        p *= rz_new / rz
        p += z
        rz = rz_new
    return x, KrylovStats(it, res, False)


def cg(A, b, tol=1e-8, maxit=None, x0=None, callback=None):
    """Unpreconditioned conjugate gradients; see :func:`pcg`."""
    return pcg(A, None, b, tol=tol, maxit=maxit, x0=x0, callback=callback)


def jacobi(A):
    """Inverse-diagonal preconditioner of a sparse matrix."""
    d = A.diagonal()
    if np.any(d <= 0.0):
        raise ValueError("Jacobi preconditioner needs a positive diagonal")
    inv = 1.0 / d
    return spla.LinearOperator(A.shape, matvec=lambda r: inv * r, dtype=float)


class Factorization:
    """Sparse LU factorization with a ``solve`` method."""

    def __init__(self, A, indefinite=False):
        A = sp.csc_matrix(A)
        if A.shape[0] != A.shape[1]:
            raise ValueError("factorization needs a square matrix")
        self.shape = A.shape
        if indefinite:
            # minimum degree on A^T + A fills in badly around a zero block
            opts = dict(permc_spec="COLAMD")
        else:
            # SPD: diagonal pivots are safe, and row pivoting would spoil
            # the symmetric fill-reducing ordering
            opts = dict(permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                        options=dict(SymmetricMode=True))
        try:
            self._lu = spla.splu(A, **opts)
        except RuntimeError as exc:
            raise SingularMatrixError(str(exc)) from exc

    @property
    def nnz(self):
        return self._lu.L.nnz + self._lu.U.nnz

    def solve(self, b):
        return self._lu.solve(np.asarray(b, dtype=float))

    def as_operator(self):
        return spla.LinearOperator(self.shape, matvec=self.solve, dtype=float)


def sparse_direct_factorize(A, symmetric_indefinite=False):
    """Sparse LU of ``A`` with an ordering suited to SPD or saddle-point matrices."""
    return Factorization(A, indefinite=symmetric_indefinite)


def _lanczos_ritz(apply_A, apply_Binv, n, n_iters, rng):
    """Extreme Ritz values of ``B^-1 A`` by Lanczos in the B-inner product.

    Works with ``z = B^-1 r`` vectors so only ``B^-1`` is needed.
    """
    m = min(n_iters, n)
    r = rng.standard_normal(n)
    z = apply_Binv(r)
    beta = np.sqrt(r @ z)
    Z, R = [], []
    alphas, betas = [], []
    for j in range(m):
        zj = z / beta
        rj = r / beta
        Z.append(zj)
        R.append(rj)
        w = apply_A(zj)
        alpha = zj @ w
        w = w - alpha * rj
        if j > 0:
            w -= betas[-1] * R[-2]
        # full reorthogonalization in the B^-1 inner product
        zw = apply_Binv(w)
        for _ in range(2):
            for zk, rk in zip(Z, R):
                c = zk @ w
                w = w - c * rk
                zw = zw - c * zk
        alphas.append(alpha)
        bnext2 = w @ zw
        if j == m - 1 or not bnext2 > 1e-28 * max(1.0, abs(alpha)) ** 2:
            break
        betas.append(np.sqrt(bnext2))
        r, z, beta = w, zw, betas[-1]
    theta = eigh_tridiagonal(np.array(alphas), np.array(betas[:len(alphas) - 1]),
                             eigvals_only=True)
    return float(theta[0]), float(theta[-1])


def extreme_rayleigh(A, B=None, n_iters=100, B_solve=None, seed=0):
    """Estimates of the extreme generalized eigenvalues of ``(A, B)``.

    Parameters
    ----------
    A : operator
        Symmetric positive definite.
    B : sparse matrix, optional
        Symmetric positive definite; factorized unless ``B_solve`` is given.
        Defaults to the identity.
    B_solve : callable, optional
        Action of ``B^-1``.
    """
    A = as_operator(A)
    n = A.shape[0]
    if B_solve is None:
        if B is None:
            B_solve = np.copy
        elif sp.issparse(B) and _is_diagonal(B):
            inv = 1.0 / B.diagonal()
            B_solve = lambda r: inv * r  # noqa: E731
        else:
            B_solve = Factorization(B).solve
    rng = np.random.default_rng(seed)
    return _lanczos_ritz(A.matvec, B_solve, n, n_iters, rng)


def _is_diagonal(B):
    B = sp.coo_matrix(B)
    return bool(np.all(B.row == B.col))
