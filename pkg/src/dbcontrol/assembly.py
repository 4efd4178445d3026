"""
P1 finite element matrices and vectors of the optimality system.

Element matrices come from closed forms; only the load vector and the
L2 error use quadrature.
"""
from dataclasses import dataclass, field
from math import factorial

import numpy as np
from scipy import sparse as sp

from .quadrature import simplex_rule

LOAD_QUAD_ORDER = 4
ERROR_QUAD_ORDER = 6

# elements processed per block in quadrature loops
_CHUNK = 65536


def _geometry(mesh):
    """Cell volumes and barycentric gradients, shape (n_cells, d+1, d)."""
    d = mesh.dim
    v = mesh.vertices[mesh.cells]
    J = v[:, 1:, :] - v[:, :1, :]
    det = np.linalg.det(J)
    if np.any(np.abs(det) <= 1e-300):
        raise ValueError("degenerate cell in mesh")
    Jinv = np.linalg.inv(J)
    grads = np.empty((mesh.n_cells, d + 1, d))
    grads[:, 1:, :] = np.swapaxes(Jinv, 1, 2)
    grads[:, 0, :] = -grads[:, 1:, :].sum(axis=1)
    return np.abs(det) / factorial(d), grads


def _scatter(mesh, local):
    n = mesh.n_total
    k = mesh.cells.shape[1]
    rows = np.repeat(mesh.cells, k, axis=1).ravel()
    cols = np.tile(mesh.cells, (1, k)).ravel()
    A = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def assemble_mass(mesh):
    """Consistent P1 mass matrix."""
    vol, _ = _geometry(mesh)
    d = mesh.dim
    ref = (np.ones((d + 1, d + 1)) + np.eye(d + 1)) / ((d + 1) * (d + 2))
    return _scatter(mesh, vol[:, None, None] * ref)


def assemble_stiffness(mesh):
    """Neumann P1 stiffness matrix; constants lie in its kernel."""
    vol, grads = _geometry(mesh)
    local = vol[:, None, None] * np.einsum("eik,ejk->eij", grads, grads)
    K = _scatter(mesh, local)
    # structured meshes produce couplings that cancel to roundoff; keep the
    # pattern minimal so factorizations do not fill them in
    if K.nnz:
        K.data[np.abs(K.data) <= 1e-13 * np.abs(K.data).max()] = 0.0
        K.eliminate_zeros()
    return K


def extract_blocks(K, n_interior):
    """Rectangular interior-row block and leading Dirichlet block of ``K``."""
    n_rows, n_cols = K.shape
    if n_interior > n_rows or n_interior < 0:
        raise ValueError("n_interior={} outside [0, {}]".format(n_interior, n_rows))
    Kt = K[:n_interior, :].tocsr()
    K0 = Kt[:, :n_interior].tocsr()
    Kt.sort_indices()
    K0.sort_indices()
    return Kt, K0


def lump(M):
    """Diagonal matrix of row sums."""
    if M.shape[0] != M.shape[1]:
        raise ValueError("lump expects a square matrix")
    d = np.asarray(M.sum(axis=1)).ravel()
    if np.any(d <= 0.0):
        raise ValueError("nonpositive row sum: not a valid mass matrix")
    return sp.diags(d, format="csr")


def _quadrature_points(mesh, cells, bary):
    return np.einsum("qi,eid->eqd", bary, mesh.vertices[cells])


def assemble_load(mesh, target, quad_order=LOAD_QUAD_ORDER):
    """Moments ``(target, phi_i)`` of the target against the nodal basis."""
    if quad_order < 2:
        raise ValueError("quad_order must be at least 2")
    bary, w = simplex_rule(mesh.dim, quad_order)
    vol = mesh.volumes()
    load = np.zeros(mesh.n_total)
    for start in range(0, mesh.n_cells, _CHUNK):
        cells = mesh.cells[start:start + _CHUNK]
        x = _quadrature_points(mesh, cells, bary)
        f = target.evaluate(x.reshape(-1, mesh.dim)).reshape(x.shape[:2])
        local = vol[start:start + _CHUNK, None] * ((f * w) @ bary)
        load += np.bincount(cells.ravel(), local.ravel(), minlength=mesh.n_total)
    return load


def l2_error(mesh, coeffs, reference, quad_order=ERROR_QUAD_ORDER):
    """L2 norm of ``sum_i coeffs_i phi_i - reference`` over the mesh."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (mesh.n_total,):
        raise ValueError("coeffs must have length M={}".format(mesh.n_total))
    bary, w = simplex_rule(mesh.dim, quad_order)
    vol = mesh.volumes()
    total = 0.0
    for start in range(0, mesh.n_cells, _CHUNK):
        cells = mesh.cells[start:start + _CHUNK]
        x = _quadrature_points(mesh, cells, bary)
        ref = reference.evaluate(x.reshape(-1, mesh.dim)).reshape(x.shape[:2])
        uh = coeffs[cells] @ bary.T
        total += float(vol[start:start + _CHUNK] @ (((uh - ref) ** 2) @ w))
    return float(np.sqrt(total))


def interpolate(mesh, target):
    """Nodal interpolant coefficients."""
    return target.evaluate(mesh.vertices)


@dataclass(eq=False)
class AssembledProblem:
    """All matrices of the discrete optimality system for one mesh and rho."""

    mesh: object
    target: object
    rho: float
    mass: sp.csr_matrix
    stiffness: sp.csr_matrix
    interior_stiffness: sp.csr_matrix
    dirichlet_stiffness: sp.csr_matrix
    lumped_mass: sp.csr_matrix
    lumped_interior_mass: sp.csr_matrix
    load: np.ndarray
    quad_order: int = LOAD_QUAD_ORDER
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_interior(self):
        return self.mesh.n_interior

    @property
    def n_total(self):
        return self.mesh.n_total

    @property
    def h(self):
        return self.mesh.nominal_h

    @property
    def dim(self):
        return self.mesh.dim

    def state_matrix(self):
        """``M_h + rho K_h`` (cached)."""
        if "A" not in self._cache:
            A = (self.mass + self.rho * self.stiffness).tocsr()
            A.sort_indices()
            self._cache["A"] = A
        return self._cache["A"]


def assemble_problem(mesh, target, rho, quad_order=LOAD_QUAD_ORDER):
    if not rho > 0.0:
        raise ValueError("rho must be positive, got {!r}".format(rho))
    M = assemble_mass(mesh)
    K = assemble_stiffness(mesh)
    Kt, K0 = extract_blocks(K, mesh.n_interior)
    N = mesh.n_interior
    return AssembledProblem(
        mesh=mesh,
        target=target,
        rho=float(rho),
        mass=M,
        stiffness=K,
        interior_stiffness=Kt,
        dirichlet_stiffness=K0,
        lumped_mass=lump(M),
        lumped_interior_mass=lump(M[:N, :N]) if N > 0 else sp.csr_matrix((0, 0)),
        load=assemble_load(mesh, target, quad_order),
        quad_order=quad_order,
    )
