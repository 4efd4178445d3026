"""
Simplicial meshes of the benchmark domains.

All meshes use an interior-first vertex numbering: vertices ``0..N-1`` lie
in the interior of the domain and ``N..M-1`` on its boundary. The Dirichlet
blocks of the finite element matrices are therefore leading blocks.

Example
=======
>>> m = build_unit_square(1)
>>> m.n_total, m.n_cells, m.n_interior
(25, 32, 9)
"""
from dataclasses import dataclass
from itertools import combinations, permutations
from math import factorial

import numpy as np

MAX_LEVEL = 14

DOMAINS = ("square", "lshape", "disc", "cube")


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming simplicial mesh.

    Attributes
    ----------
    dim : int
        Spatial dimension, 2 or 3.
    vertices : ndarray, shape (M, dim)
        Vertex coordinates, interior vertices first.
    cells : ndarray, shape (n_cells, dim + 1)
        Positively oriented simplices.
    n_interior : int
        Number ``N`` of interior vertices.
    boundary_facets : ndarray, shape (n_facets, dim)
        Facets that belong to exactly one cell.
    level : int
        Refinement level.
    nominal_h : float
        Scalar mesh size used by the cost-parameter schedules.
    domain : str
        Name of the underlying domain.
    """

    dim: int
    vertices: np.ndarray
    cells: np.ndarray
    n_interior: int
    boundary_facets: np.ndarray
    level: int
    nominal_h: float
    domain: str = "custom"

    def __post_init__(self):
        for name in ("vertices", "cells", "boundary_facets"):
            arr = np.array(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_total(self):
        return self.vertices.shape[0]

    @property
    def n_cells(self):
        return self.cells.shape[0]

    @property
    def n_boundary(self):
        return self.n_total - self.n_interior

    def boundary_mask(self):
        mask = np.zeros(self.n_total, dtype=bool)
        mask[self.n_interior:] = True
        return mask

    def signed_volumes(self):
        return _signed_volumes(self.vertices, self.cells)

    def volumes(self):
        return np.abs(self.signed_volumes())

    def measure(self):
        """Total volume (area in 2D) of the mesh."""
        return float(self.volumes().sum())

    def __repr__(self):
        return "Mesh(domain={!r}, dim={}, level={}, M={}, N={}, cells={})".format(
            self.domain, self.dim, self.level, self.n_total, self.n_interior,
            self.n_cells)


def _signed_volumes(vertices, cells):
    d = cells.shape[1] - 1
    v0 = vertices[cells[:, 0]]
    edges = vertices[cells[:, 1:]] - v0[:, None, :]
    return np.linalg.det(edges) / factorial(d)


def _facets(cells):
    """All facets of all cells as sorted vertex tuples, with multiplicity."""
    d = cells.shape[1] - 1
    faces = np.concatenate(
        [cells[:, list(c)] for c in combinations(range(d + 1), d)])
    return np.sort(faces, axis=1)


def _finalize(vertices, cells, level, nominal_h, domain):
    """Orient cells, detect the boundary and renumber interior-first."""
    vertices = np.ascontiguousarray(vertices, dtype=float)
    cells = np.array(cells, dtype=np.int64)
    vol = _signed_volumes(vertices, cells)
    if np.any(vol == 0.0):
        raise ValueError("degenerate cell in mesh")
    neg = vol < 0
    cells[neg, 0], cells[neg, 1] = cells[neg, 1], cells[neg, 0].copy()

    faces = _facets(cells)
    keys = _row_keys(faces, len(vertices))
    _, first, counts = np.unique(keys, return_index=True, return_counts=True)
    if np.any(counts > 2):
        raise ValueError("non-conforming mesh: facet shared by more than two cells")
    bfaces = faces[np.sort(first[counts == 1])]
    on_boundary = np.zeros(len(vertices), dtype=bool)
    on_boundary[bfaces.ravel()] = True

    order = np.concatenate([np.flatnonzero(~on_boundary),
                            np.flatnonzero(on_boundary)])
    new_index = np.empty_like(order)
    new_index[order] = np.arange(len(order))
    return Mesh(dim=vertices.shape[1],
                vertices=vertices[order],
                cells=new_index[cells],
                n_interior=int((~on_boundary).sum()),
                boundary_facets=new_index[bfaces],
                level=level,
                nominal_h=float(nominal_h),
                domain=domain)


def _row_keys(rows, base):
    """Injective keys of nonnegative integer rows with entries below ``base``."""
    if base ** rows.shape[1] >= 2 ** 63:
        # too many vertices for int64 packing; rank rows instead
        _, keys = np.unique(rows, axis=0, return_inverse=True)
        return keys.ravel()
    keys = np.zeros(len(rows), dtype=np.int64)
    for col in rows.T:
        keys = keys * base + col
    return keys


def _check_level(level):
    if not isinstance(level, (int, np.integer)) or level < 0:
        raise ValueError("level must be a nonnegative integer, got {!r}".format(level))
    if level > MAX_LEVEL:
        raise ValueError("level {} exceeds the supported maximum {}".format(level, MAX_LEVEL))


def _grid_triangles(nx, ny, keep=None):
    """Triangles of an (nx, ny) grid of squares, split lower-left to upper-right.

    Vertex (i, j) has index ``i + j * (nx + 1)``.
    """
    i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    i, j = i.ravel(), j.ravel()
    if keep is not None:
        sel = keep(i, j)
        i, j = i[sel], j[sel]
    v00 = i + j * (nx + 1)
    v10 = v00 + 1
    v01 = v00 + nx + 1
    v11 = v01 + 1
    return np.concatenate([np.stack([v00, v10, v11], axis=1),
                           np.stack([v00, v11, v01], axis=1)])


def _compact(vertices, cells):
    used = np.unique(cells)
    remap = np.full(len(vertices), -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    return vertices[used], remap[cells]


def build_unit_square(level):
    """Structured triangulation of (0, 1)^2 with h = 2^-(level+1)."""
    _check_level(level)
    n = 2 ** (level + 1)
    x = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(x, x, indexing="xy")
    vertices = np.column_stack([X.ravel(), Y.ravel()])
    return _finalize(vertices, _grid_triangles(n, n), level, 1.0 / n, "square")


def build_lshape(level):
    """L-shaped domain (-1, 1)^2 minus [0, 1]^2, meshed like the unit square."""
    _check_level(level)
    n = 2 ** (level + 1)
    x = np.linspace(-1.0, 1.0, 2 * n + 1)
    X, Y = np.meshgrid(x, x, indexing="xy")
    vertices = np.column_stack([X.ravel(), Y.ravel()])
    cells = _grid_triangles(2 * n, 2 * n, keep=lambda i, j: (i < n) | (j < n))
    vertices, cells = _compact(vertices, cells)
    return _finalize(vertices, cells, level, 1.0 / n, "lshape")


def build_unit_disc(level):
    """Unit disc, meshed from a hexagon fan by refinement and boundary projection.

    The nominal mesh size is ``2**-level`` times the hexagon edge length.
    """
    _check_level(level)
    angles = np.arange(6) * np.pi / 3.0
    vertices = np.vstack([[0.0, 0.0],
                          np.column_stack([np.cos(angles), np.sin(angles)])])
    cells = np.array([[0, 1 + k, 1 + (k + 1) % 6] for k in range(6)])
    mesh = _finalize(vertices, cells, 0, 1.0, "disc")
    for _ in range(level):
        mesh = refine_uniform(mesh)
    return mesh


def build_unit_cube(level):
    """Kuhn triangulation of (0, 1)^3 with h = 2^-(level+1).

    Every subcube is split into six tetrahedra sharing its main diagonal.
    """
    _check_level(level)
    n = 2 ** (level + 1)
    x = np.linspace(0.0, 1.0, n + 1)
    X, Y, Z = np.meshgrid(x, x, x, indexing="ij")
    vertices = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])

    def index(i, j, k):
        return (i * (n + 1) + j) * (n + 1) + k

    i, j, k = (a.ravel() for a in np.meshgrid(*(np.arange(n),) * 3, indexing="ij"))
    cells = []
    for perm in permutations(range(3)):
        corner = [i, j, k]
        path = [index(*corner)]
        for axis in perm:
            corner = list(corner)
            corner[axis] = corner[axis] + 1
            path.append(index(*corner))
        cells.append(np.stack(path, axis=1))
    return _finalize(vertices, np.concatenate(cells), level, 1.0 / n, "cube")


BUILDERS = {
    "square": build_unit_square,
    "lshape": build_lshape,
    "disc": build_unit_disc,
    "cube": build_unit_cube,
}


def build_mesh(domain, level):
    try:
        builder = BUILDERS[domain]
    except KeyError:
        raise ValueError("unknown domain {!r}; expected one of {}".format(
            domain, ", ".join(DOMAINS))) from None
    return builder(level)


# children of a triangle (v0, v1, v2) with midpoints m01, m02, m12
_RED_2D = [(0, 3, 4), (3, 1, 5), (4, 5, 2), (3, 5, 4)]

# Bey's red refinement of a tetrahedron; local indices 0-3 are vertices,
# 4..9 are the midpoints of edges 01, 02, 03, 12, 13, 23
_RED_3D = [(0, 4, 5, 6), (4, 1, 7, 8), (5, 7, 2, 9), (6, 8, 9, 3),
           (4, 5, 6, 8), (4, 5, 7, 8), (5, 6, 8, 9), (5, 7, 8, 9)]


def refine_uniform(mesh):
    """Red refinement: bisect every edge.

    The cell count grows by 4 (2D) or 8 (3D). On the disc new boundary
    vertices are projected radially onto the unit circle.
    """
    d = mesh.dim
    cells = mesh.cells
    if d == 3:
        # Bey's pattern preserves Kuhn meshes when vertices follow the Kuhn path,
        # along which the coordinate sum increases
        key = mesh.vertices[cells].sum(axis=2)
        cells = np.take_along_axis(cells, np.argsort(key, axis=1, kind="stable"), axis=1)
    pairs = list(combinations(range(d + 1), 2))
    local_edges = np.stack([np.sort(cells[:, list(p)], axis=1) for p in pairs], axis=1)
    flat = local_edges.reshape(-1, 2)
    _, first, inverse = np.unique(_row_keys(flat, mesh.n_total), return_index=True,
                                  return_inverse=True)
    edges = flat[first]
    inverse = inverse.reshape(len(cells), len(pairs))

    M = mesh.n_total
    midpoints = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    if mesh.domain == "disc":
        bedges = np.sort(mesh.boundary_facets, axis=1)
        on_bnd = _rows_in(edges, bedges)
        r = np.linalg.norm(midpoints[on_bnd], axis=1)
        midpoints[on_bnd] /= r[:, None]
    vertices = np.vstack([mesh.vertices, midpoints])

    local = np.concatenate([cells, M + inverse], axis=1)
    pattern = _RED_2D if d == 2 else _RED_3D
    children = np.concatenate([local[:, list(c)] for c in pattern])
    return _finalize(vertices, children, mesh.level + 1, mesh.nominal_h / 2.0,
                     mesh.domain)


def _rows_in(a, b):
    """Boolean mask of rows of integer array ``a`` present in ``b``."""
    if len(b) == 0:
        return np.zeros(len(a), dtype=bool)
    base = int(max(a.max(), b.max())) + 1
    keys = _row_keys(np.vstack([a, b]), base)
    return np.isin(keys[:len(a)], keys[len(a):])
