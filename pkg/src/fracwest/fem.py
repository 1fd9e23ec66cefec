"""Piecewise linear finite elements on an interval and on a square.

Coefficient vectors always refer to interior (free) nodes; homogeneous
Dirichlet values on the boundary are implicit. All element integrals of
products of up to three P1 functions are computed exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .exceptions import DomainError
from .linalg import solve_spd

__all__ = [
    "Mesh",
    "FeSpace",
    "interval_mesh",
    "square_mesh",
    "build_space",
    "l2_project",
    "assemble_weighted_mass",
    "assemble_product_mass",
    "assemble_product_load",
    "assemble_quadratic_load",
    "values_at_quadrature",
    "assemble_load",
    "write_mesh",
    "write_coordinate_list",
]


@dataclass(frozen=True)
class Mesh:
    """Simplicial mesh of an interval (``dim=1``) or square (``dim=2``).

    Attributes
    ----------
    nodes : ndarray, shape (n_nodes, dim)
    cells : ndarray of int, shape (n_cells, dim + 1)
        Counter-clockwise node indices of every simplex.
    boundary : ndarray of bool, shape (n_nodes,)
    """

    dim: int
    xa: float
    xb: float
    M: int
    nodes: np.ndarray
    cells: np.ndarray
    boundary: np.ndarray

    @property
    def h(self):
        return (self.xb - self.xa) / self.M

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def measure(self):
        return (self.xb - self.xa) ** self.dim


def interval_mesh(xa, xb, M):
    """Uniform mesh of ``[xa, xb]`` with ``M`` cells."""
    M = int(M)
    if M < 1 or not xb > xa:
        raise DomainError("need M >= 1 and xb > xa")
    x = np.linspace(xa, xb, M + 1)
    cells = np.column_stack([np.arange(M), np.arange(1, M + 1)])
    boundary = np.zeros(M + 1, dtype=bool)
    boundary[[0, -1]] = True
    return Mesh(1, float(xa), float(xb), M, x[:, None], cells, boundary)


def square_mesh(xa, xb, M):
    """Structured triangulation of ``[xa, xb]^2``, each square cut SW to NE."""
    M = int(M)
    if M < 1 or not xb > xa:
        raise DomainError("need M >= 1 and xb > xa")
    s = np.linspace(xa, xb, M + 1)
    X, Y = np.meshgrid(s, s)  # node (i, j) -> index i + j (M + 1)
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    i, j = np.meshgrid(np.arange(M), np.arange(M))
    sw = (i + j * (M + 1)).ravel()
    se, nw = sw + 1, sw + M + 1
    ne = nw + 1
    cells = np.concatenate([np.column_stack([sw, se, ne]), np.column_stack([sw, ne, nw])])
    ii, jj = np.meshgrid(np.arange(M + 1), np.arange(M + 1))
    boundary = ((ii == 0) | (ii == M) | (jj == 0) | (jj == M)).ravel()
    return Mesh(2, float(xa), float(xb), M, nodes, cells, boundary)


def _reference_rule(dim):
    """Quadrature points (barycentric) and weights summing to 1."""
    if dim == 1:
        g = np.sqrt(3.0 / 5.0)
        xi = 0.5 * (1.0 + np.array([-g, 0.0, g]))
        w = np.array([5.0, 8.0, 5.0]) / 18.0
        return np.column_stack([1.0 - xi, xi]), w
    # degree-4 six-point rule on triangles
    a1, w1 = 0.445948490915965, 0.223381589678011
    a2, w2 = 0.091576213509771, 0.109951743655322
    bary = []
    for a in (a1, a2):
        b = 1.0 - 2.0 * a
        bary += [(b, a, a), (a, b, a), (a, a, b)]
    return np.array(bary), np.array([w1] * 3 + [w2] * 3)


@dataclass(frozen=True, eq=False)
class FeSpace:
    """P1 space with homogeneous Dirichlet conditions on ``mesh``.

    ``mass`` and ``stiffness`` act on interior coefficients; the ``*_full``
    variants include every node.
    """

    mesh: Mesh
    interior: np.ndarray
    dof_of_node: np.ndarray
    measure: np.ndarray  # |cell|, shape (n_cells,)
    grads: np.ndarray  # basis gradients, shape (n_cells, nloc, dim)
    phi: np.ndarray  # basis values at quadrature points, shape (nq, nloc)
    qweights: np.ndarray  # shape (nq,), sum 1
    qpoints: np.ndarray  # physical points, shape (n_cells, nq, dim)
    triple: np.ndarray  # int_ref phi_a phi_b phi_c / |ref|, shape (nloc,)*3
    mass_ref: np.ndarray
    mass: sp.csr_matrix = field(repr=False)
    stiffness: sp.csr_matrix = field(repr=False)
    mass_full: sp.csr_matrix = field(repr=False)
    stiffness_full: sp.csr_matrix = field(repr=False)
    _scatter: sp.csr_matrix = field(repr=False)
    _pattern: tuple = field(repr=False)

    @property
    def n_dof(self):
        return self.interior.size

    @property
    def dim(self):
        return self.mesh.dim

    @property
    def coords(self):
        """Coordinates of the interior nodes, shape (n_dof, dim)."""
        return self.mesh.nodes[self.interior]

    def extend(self, c):
        """Nodal values on every node from interior coefficients."""
        full = np.zeros(self.mesh.n_nodes)
        full[self.interior] = c
        return full

    def cell_values(self, c):
        """Per-cell nodal values, shape (n_cells, nloc)."""
        return self.extend(c)[self.mesh.cells]

    def matrix_from_local(self, local):
        """Assemble element matrices (n_cells, nloc, nloc) on interior dofs."""
        data = self._scatter @ local.ravel()
        indptr, indices = self._pattern
        n = self.n_dof
        return sp.csr_matrix((data, indices, indptr), shape=(n, n))

    def vector_from_local(self, local):
        """Assemble element vectors (n_cells, nloc) on interior dofs."""
        dof = self.dof_of_node[self.mesh.cells].ravel()
        keep = dof >= 0
        return np.bincount(dof[keep], weights=local.ravel()[keep], minlength=self.n_dof)

    def interpolate(self, g):
        """Nodal interpolant of ``g`` (callable on points of shape (n, dim))."""
        return np.asarray(g(self.coords), dtype=float)


def _full_matrix(mesh, local):
    cells = mesh.cells
    nloc = cells.shape[1]
    rows = np.repeat(cells, nloc, axis=1).ravel()
    cols = np.tile(cells, (1, nloc)).ravel()
    n = mesh.n_nodes
    return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(n, n))


def build_space(mesh: Mesh) -> FeSpace:
    """Assemble mass and stiffness matrices of the P1 space on ``mesh``."""
    dim = mesh.dim
    cells = mesh.cells
    nloc = dim + 1
    verts = mesh.nodes[cells]  # (E, nloc, dim)
    jac = np.transpose(verts[:, 1:, :] - verts[:, :1, :], (0, 2, 1))  # (E, dim, dim)
    det = np.linalg.det(jac)
    if np.any(det <= 0):
        raise DomainError("mesh has degenerate or inverted cells")
    measure = det / (1.0 if dim == 1 else 2.0)
    ref_grads = np.vstack([-np.ones((1, dim)), np.eye(dim)])  # (nloc, dim)
    inv_t = np.transpose(np.linalg.inv(jac), (0, 2, 1))
    grads = np.einsum("eij,aj->eai", inv_t, ref_grads)

    bary, qw = _reference_rule(dim)
    phi = bary  # P1 basis values are the barycentric coordinates
    qpoints = np.einsum("qa,ead->eqd", bary, verts)
    mass_ref = np.einsum("q,qa,qb->ab", qw, phi, phi)
    triple = np.einsum("q,qa,qb,qc->abc", qw, phi, phi, phi)

    m_local = measure[:, None, None] * mass_ref
    k_local = measure[:, None, None] * np.einsum("eai,ebi->eab", grads, grads)

    interior = np.flatnonzero(~mesh.boundary)
    dof_of_node = -np.ones(mesh.n_nodes, dtype=np.int64)
    dof_of_node[interior] = np.arange(interior.size)

    # sparsity pattern on interior dofs and scatter map from element entries
    dofs = dof_of_node[cells]
    rows = np.repeat(dofs, nloc, axis=1).ravel()
    cols = np.tile(dofs, (1, nloc)).ravel()
    keep = (rows >= 0) & (cols >= 0)
    n = interior.size
    pat = sp.csr_matrix(
        (np.ones(keep.sum()), (rows[keep], cols[keep])), shape=(n, n)
    )
    pat.sum_duplicates()
    pat.sort_indices()
    keys = np.repeat(np.arange(n), np.diff(pat.indptr)) * n + pat.indices
    pos = np.searchsorted(keys, rows[keep] * n + cols[keep])
    scatter = sp.csr_matrix(
        (np.ones(pos.size), (pos, np.flatnonzero(keep))), shape=(pat.nnz, rows.size)
    )
    pattern = (pat.indptr.copy(), pat.indices.copy())

    def restrict(local):
        indptr, indices = pattern
        return sp.csr_matrix((scatter @ local.ravel(), indices, indptr), shape=(n, n))

    return FeSpace(
        mesh=mesh,
        interior=interior,
        dof_of_node=dof_of_node,
        measure=measure,
        grads=grads,
        phi=phi,
        qweights=qw,
        qpoints=qpoints,
        triple=triple,
        mass_ref=mass_ref,
        mass=restrict(m_local),
        stiffness=restrict(k_local),
        mass_full=_full_matrix(mesh, m_local),
        stiffness_full=_full_matrix(mesh, k_local),
        _scatter=scatter,
        _pattern=pattern,
    )


def assemble_load(space: FeSpace, g):
    """Load vector ``int g phi_i`` by element quadrature.

    ``g`` is either a callable on points of shape (n, dim) or an array of
    values at the quadrature points, shape (n_cells, nq).
    """
    if callable(g):
        pts = space.qpoints.reshape(-1, space.dim)
        vals = np.asarray(g(pts), dtype=float).reshape(space.qpoints.shape[:2])
    else:
        vals = np.asarray(g, dtype=float)
    local = space.measure[:, None] * np.einsum("q,eq,qa->ea", space.qweights, vals, space.phi)
    return space.vector_from_local(local)


def l2_project(space: FeSpace, g):
    """Interior coefficients of the L2 projection of ``g`` onto the space."""
    return solve_spd(space.mass, assemble_load(space, g))


def assemble_product_mass(space: FeSpace, w):
    """Matrix ``int w_h phi_j phi_i`` for the P1 function with coefficients ``w``."""
    wc = space.cell_values(w)
    local = space.measure[:, None, None] * np.einsum("abc,ec->eab", space.triple, wc)
    return space.matrix_from_local(local)


def assemble_weighted_mass(space: FeSpace, w, k):
    """Matrix ``int (1 - 2 k w_h) phi_j phi_i``."""
    if k == 0:
        return space.mass.copy()
    return space.mass - 2.0 * k * assemble_product_mass(space, w)


def assemble_product_load(space: FeSpace, w, z):
    """Vector ``int w_h z_h phi_i``; equals ``assemble_product_mass(w) @ z``."""
    wc = space.cell_values(w)
    zc = space.cell_values(z)
    local = space.measure[:, None] * np.einsum("abc,eb,ec->ea", space.triple, wc, zc)
    return space.vector_from_local(local)


def assemble_quadratic_load(space: FeSpace, d):
    """Vector ``int d_h^2 phi_i``."""
    return assemble_product_load(space, d, d)


def values_at_quadrature(space: FeSpace, c):
    """P1 function values at the quadrature points, shape (n_cells, nq)."""
    return space.cell_values(c) @ space.phi.T


def write_mesh(mesh: Mesh, fh):
    """Plain-text node list ``index x [y] boundary``."""
    for i, (x, b) in enumerate(zip(mesh.nodes, mesh.boundary)):
        coords = " ".join(f"{v:.17g}" for v in x)
        fh.write(f"{i} {coords} {int(b)}\n")


def write_coordinate_list(A, fh):
    """Plain-text ``row col value`` triplets of a sparse matrix."""
    A = sp.coo_matrix(A)
    for i, j, v in zip(A.row, A.col, A.data):
        fh.write(f"{i} {j} {v:.17g}\n")
