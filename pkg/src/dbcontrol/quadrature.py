"""Quadrature on the reference simplex via collapsed Gauss-Jacobi products."""
from functools import lru_cache
from math import ceil, factorial

import numpy as np
from scipy.special import roots_jacobi


@lru_cache(maxsize=None)
def simplex_rule(dim, degree):
    """Positive-weight rule exact for polynomials of total degree ``degree``.

    Returns
    -------
    bary : ndarray, shape (n_points, dim + 1)
        Barycentric coordinates of the points.
    weights : ndarray, shape (n_points,)
        Weights summing to one, i.e. relative to the simplex volume.
    """
    if degree < 0:
        raise ValueError("degree must be nonnegative")
    n = max(1, ceil((degree + 1) / 2))
    nodes, wts = [], []
    for j in range(dim):
        # coordinate j carries the Jacobian factor (1 - u_j)^(dim - 1 - j)
        alpha = dim - 1 - j
        t, w = roots_jacobi(n, alpha, 0.0)
        nodes.append(0.5 * (1.0 + t))
        wts.append(w / 2.0 ** (alpha + 1))
    grids = np.meshgrid(*nodes, indexing="ij")
    u = np.column_stack([g.ravel() for g in grids])
    w = np.ones(len(u))
    for j, g in enumerate(np.meshgrid(*wts, indexing="ij")):
        w *= g.ravel()
    x = np.empty_like(u)
    scale = np.ones(len(u))
    for j in range(dim):
        x[:, j] = u[:, j] * scale
        scale = scale * (1.0 - u[:, j])
    bary = np.column_stack([1.0 - x.sum(axis=1), x])
    w = w * factorial(dim)
    bary.setflags(write=False)
    w.setflags(write=False)
    return bary, w
