"""Nested uniform meshes, P1/P0 assembly and inter-level transfer.

Domains are the unit interval and the unit square. A 2D mesh of ``N x N``
squares cuts every square along its (1, 1) diagonal; uniform refinement
halves ``h`` and keeps that pattern, so the meshes are nested.

Node numbering is lexicographic: in 2D node ``(i, j)`` at ``(i/N, j/N)`` has
id ``j*(N+1) + i``. Zero-boundary P1 dofs are the interior nodes in id
order. Vector-valued spaces stack the x components before the y components.
"""
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from . import kernels
from .errors import (
    IncompatibleSpaces,
    InvalidRefinement,
    LevelOutOfRange,
    QuadratureUnavailable,
    WrongSpaceKind,
)

P1_0 = "p1-zero-boundary"
P1 = "p1"
P0 = "p0"
P0_VEC = "p0-vector"
P1_VEC = "p1-vector"
KINDS = (P1_0, P1, P0, P0_VEC, P1_VEC)

DOF_CAP = 2**20


@dataclass(frozen=True, eq=False)
class Mesh:
    dim: int
    n: int  # elements per side
    coords: np.ndarray
    elems: np.ndarray
    interior: np.ndarray

    @property
    def h(self):
        return 1.0 / self.n

    @property
    def n_nodes(self):
        return self.coords.shape[0]

    @property
    def n_elems(self):
        return self.elems.shape[0]

    @cached_property
    def areas(self):
        if self.dim == 1:
            return np.full(self.n_elems, self.h)
        return np.full(self.n_elems, 0.5 * self.h**2)

    @cached_property
    def centroids(self):
        return self.coords[self.elems].mean(axis=1)

    def locate(self, points):
        """Index of the element containing each point (points strictly inside elements)."""
        pts = np.atleast_2d(points)
        if self.dim == 1:
            return np.clip(np.floor(pts[:, 0] * self.n).astype(int), 0, self.n - 1)
        i = np.clip(np.floor(pts[:, 0] * self.n).astype(int), 0, self.n - 1)
        j = np.clip(np.floor(pts[:, 1] * self.n).astype(int), 0, self.n - 1)
        s = pts[:, 0] * self.n - i
        t = pts[:, 1] * self.n - j
        upper = (t > s).astype(int)
        return 2 * (j * self.n + i) + upper


def _mesh_1d(n):
    coords = (np.arange(n + 1) / n)[:, None]
    elems = np.column_stack([np.arange(n), np.arange(1, n + 1)])
    return Mesh(1, n, coords, elems, np.arange(1, n))


def _mesh_2d(n):
    ii, jj = np.meshgrid(np.arange(n + 1), np.arange(n + 1))
    coords = np.column_stack([ii.ravel() / n, jj.ravel() / n])
    i, j = np.meshgrid(np.arange(n), np.arange(n))
    i, j = i.ravel(), j.ravel()
    ll = j * (n + 1) + i
    lr, ur, ul = ll + 1, ll + n + 2, ll + n + 1
    lower = np.column_stack([ll, lr, ur])
    upper = np.column_stack([ll, ur, ul])
    elems = np.empty((2 * n * n, 3), dtype=np.int64)
    elems[0::2] = lower
    elems[1::2] = upper
    inner = np.arange(1, n)
    ji, ii_ = np.meshgrid(inner, inner, indexing="ij")
    interior = (ji * (n + 1) + ii_).ravel()
    return Mesh(2, n, coords, elems, interior)


@dataclass(frozen=True, eq=False)
class MeshHierarchy:
    """Meshes ``0..J-1`` with ``h_k = 2**-k * h_0``; ``J == len(meshes)``."""

    dimension: int
    coarse_elements: int
    meshes: tuple
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def J(self):
        return len(self.meshes)

    @property
    def finest(self):
        return self.meshes[-1]

    def mesh(self, level):
        if not -self.J <= level < self.J:
            raise LevelOutOfRange(f"level {level} outside hierarchy of {self.J} levels")
        return self.meshes[level]

    def dofs(self, level=-1):
        return self.mesh(level).interior.shape[0]

    def refined(self, extra=1):
        """Same hierarchy with ``extra`` more uniform refinements."""
        return build_hierarchy(self.dimension, self.coarse_elements, self.J - 1 + extra)

    def parent_elements(self, level):
        """Parent (level-1) element of every element on ``level``."""
        key = ("parent", level)
        if key not in self._cache:
            if level <= 0:
                raise LevelOutOfRange("coarsest level has no parents")
            fine, coarse = self.mesh(level), self.mesh(level - 1)
            self._cache[key] = coarse.locate(fine.centroids)
        return self._cache[key]


def build_hierarchy(dimension, coarse_elements, levels, dof_cap=DOF_CAP):
    """Build ``levels`` uniform refinements of a coarse mesh (``levels + 1`` meshes).

    ``coarse_elements`` is the number of intervals (1D) or squares per side (2D).
    ``levels = 0`` gives a single mesh.
    """
    if dimension not in (1, 2):
        raise InvalidRefinement(f"dimension must be 1 or 2, got {dimension}")
    if coarse_elements < 2:
        raise InvalidRefinement("need at least 2 coarse elements per side")
    if levels < 0:
        raise InvalidRefinement("levels must be non-negative")
    finest = coarse_elements * 2**levels
    dofs = (finest - 1) ** dimension
    if dofs > dof_cap:
        raise InvalidRefinement(f"{dofs} dofs exceed the cap {dof_cap}")
    make = _mesh_1d if dimension == 1 else _mesh_2d
    meshes = tuple(make(coarse_elements * 2**k) for k in range(levels + 1))
    return MeshHierarchy(dimension, coarse_elements, meshes)


@dataclass(frozen=True, eq=False)
class FeSpace:
    kind: str
    mesh: Mesh
    level: int

    def __post_init__(self):
        if self.kind not in KINDS:
            raise WrongSpaceKind(f"unknown space kind {self.kind!r}")

    @property
    def ncomp(self):
        return self.mesh.dim if self.kind in (P0_VEC, P1_VEC) else 1

    @property
    def scalar_ndof(self):
        if self.kind == P1_0:
            return self.mesh.interior.shape[0]
        if self.kind in (P1, P1_VEC):
            return self.mesh.n_nodes
        return self.mesh.n_elems

    @property
    def ndof(self):
        return self.ncomp * self.scalar_ndof

    @property
    def is_p1(self):
        return self.kind in (P1_0, P1, P1_VEC)


def function_space(hierarchy, kind, level=-1):
    lvl = level % hierarchy.J if -hierarchy.J <= level < hierarchy.J else level
    return FeSpace(kind, hierarchy.mesh(level), lvl)


@dataclass(frozen=True, eq=False)
class AssembledOperator:
    matrix: sp.csr_matrix
    row_space: FeSpace
    col_space: FeSpace
    symmetric: bool = False

    @property
    def shape(self):
        return self.matrix.shape

    def __matmul__(self, x):
        return self.matrix @ x

    @cached_property
    def diagonal(self):
        return self.matrix.diagonal()


def _assemble(mesh, local):
    nloc = mesh.elems.shape[1]
    rows = np.repeat(mesh.elems, nloc, axis=1).ravel()
    cols = np.tile(mesh.elems, (1, nloc)).ravel()
    n = mesh.n_nodes
    return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(n, n))


def _element_data(mesh):
    if mesh.dim == 1:
        h = mesh.h
        grads = np.broadcast_to(np.array([[-1.0 / h], [1.0 / h]]), (mesh.n_elems, 2, 1))
        kloc = np.broadcast_to(np.array([[1.0, -1.0], [-1.0, 1.0]]) / h, (mesh.n_elems, 2, 2))
        return mesh.areas, np.ascontiguousarray(grads), np.ascontiguousarray(kloc)
    return kernels.p1_element_data(np.ascontiguousarray(mesh.coords), np.ascontiguousarray(mesh.elems))


def _full_mass(mesh, lumped):
    d = mesh.dim
    base = (np.ones((d + 1, d + 1)) + np.eye(d + 1)) / ((d + 1) * (d + 2))
    local = mesh.areas[:, None, None] * base
    m = _assemble(mesh, local)
    if lumped:
        m = sp.diags(np.asarray(m.sum(axis=1)).ravel()).tocsr()
    return m


def _like_vector(m, ncomp):
    return sp.kron(sp.identity(ncomp), m, format="csr") if ncomp > 1 else m


def assemble_stiffness_p1(space):
    """Dirichlet form ``a(u, v) = int grad u . grad v`` on zero-boundary P1."""
    if space.kind != P1_0:
        raise WrongSpaceKind(f"stiffness needs {P1_0!r}, got {space.kind!r}")
    mesh = space.mesh
    _, _, kloc = _element_data(mesh)
    full = _assemble(mesh, kloc)
    idx = mesh.interior
    return AssembledOperator(full[idx][:, idx].tocsr(), space, space, True)


def assemble_mass(space, lumped=False):
    """L2 Gram matrix of ``space``; ``lumped`` replaces P1 rows by their sums."""
    mesh = space.mesh
    if space.kind in (P0, P0_VEC):
        m = sp.diags(np.tile(mesh.areas, space.ncomp)).tocsr()
    else:
        full = _full_mass(mesh, lumped)
        if space.kind == P1_0:
            idx = mesh.interior
            full = full[idx][:, idx].tocsr()
        m = _like_vector(full, space.ncomp)
    return AssembledOperator(m, space, space, True)


def assemble_b_form(problem, test, trial_ambient):
    """Matrix with entry ``(q, v) = b(v, q)`` for ``b(v, q) = int grad v . q``.

    ``problem`` is ``"1d-derivative"`` (P0 trial ambient) or ``"2d-gradient"``
    (P0-vector trial ambient); test and trial must share a mesh.
    """
    if test.kind != P1_0:
        raise IncompatibleSpaces(f"test space must be {P1_0!r}")
    expected = {"1d-derivative": (1, P0), "2d-gradient": (2, P0_VEC)}
    if problem not in expected:
        raise IncompatibleSpaces(f"unknown problem {problem!r}")
    dim, kind = expected[problem]
    if test.mesh.dim != dim or trial_ambient.kind != kind or trial_ambient.mesh is not test.mesh:
        raise IncompatibleSpaces(f"{problem} needs {kind} on the test mesh")
    mesh = test.mesh
    area, grads, _ = _element_data(mesh)
    ne = mesh.n_elems
    col_of = -np.ones(mesh.n_nodes, dtype=np.int64)
    col_of[mesh.interior] = np.arange(mesh.interior.shape[0])
    cols = col_of[mesh.elems]
    keep = cols >= 0
    blocks = []
    for c in range(dim):
        vals = area[:, None] * grads[:, :, c]
        rows = np.broadcast_to(np.arange(ne)[:, None], cols.shape)
        blocks.append(sp.csr_matrix((vals[keep], (rows[keep], cols[keep])),
                                    shape=(ne, test.ndof)))
    mat = sp.vstack(blocks).tocsr() if dim > 1 else blocks[0]
    return AssembledOperator(mat, trial_ambient, test, False)


def _same_mesh_coupling(mesh):
    """``G[j, e] = int_e psi_j`` for full P1 hats ``psi_j`` and P0 indicators on one mesh."""
    nloc = mesh.elems.shape[1]
    rows = mesh.elems.ravel()
    cols = np.repeat(np.arange(mesh.n_elems), nloc)
    vals = np.repeat(mesh.areas / nloc, nloc)
    return sp.csr_matrix((vals, (rows, cols)), shape=(mesh.n_nodes, mesh.n_elems))


def element_injection(hierarchy, coarse, fine):
    """P0 coefficients on level ``fine`` of a P0 function given on level ``coarse``."""
    inj = sp.identity(hierarchy.mesh(coarse).n_elems, format="csr")
    for lvl in range(coarse + 1, fine + 1):
        parents = hierarchy.parent_elements(lvl)
        step = sp.csr_matrix((np.ones(parents.shape[0]), (np.arange(parents.shape[0]), parents)),
                             shape=(parents.shape[0], hierarchy.mesh(lvl - 1).n_elems))
        inj = step @ inj
    return inj.tocsr()


def assemble_coupling(hierarchy, target, ambient):
    """Matrix ``G[j, e] = int psi_j chi_e`` between a P1 target and a P0 ambient space.

    The two spaces may live on different levels of ``hierarchy``.
    """
    pairs = {P1: P0, P1_VEC: P0_VEC}
    if pairs.get(target.kind) != ambient.kind:
        raise IncompatibleSpaces(f"cannot couple {target.kind!r} with {ambient.kind!r}")
    t, a = target.level, ambient.level
    if t >= a:
        g = _same_mesh_coupling(target.mesh) @ element_injection(hierarchy, a, t)
    else:
        g = prolongation_matrix(hierarchy, t, a, boundary=True).T @ _same_mesh_coupling(ambient.mesh)
    g = _like_vector(g.tocsr(), target.ncomp)
    return AssembledOperator(g, target, ambient, False)


def prolongation_matrix(hierarchy, coarse, fine=None, boundary=False):
    """Sparse P1 interpolation from level ``coarse`` to level ``fine``.

    Built from node coordinates; independent of the matrix-free kernels.
    ``boundary=False`` keeps interior (zero-boundary) dofs only.
    """
    fine = coarse + 1 if fine is None else fine
    if not 0 <= coarse < fine < hierarchy.J:
        raise LevelOutOfRange(f"cannot prolong {coarse} -> {fine} in {hierarchy.J} levels")
    mat = None
    for lvl in range(coarse, fine):
        step = _prolong_step(hierarchy.mesh(lvl), hierarchy.mesh(lvl + 1))
        mat = step if mat is None else step @ mat
    if not boundary:
        mat = mat[hierarchy.mesh(fine).interior][:, hierarchy.mesh(coarse).interior]
    return mat.tocsr()


def _prolong_step(cm, fm):
    n = fm.n
    ijs = np.rint(fm.coords * n).astype(int)
    stride = cm.n + 1
    rows, cols, vals = [], [], []
    for node, ij in enumerate(ijs):
        odd = ij % 2
        base = ij // 2
        # coarse vertex, or midpoint of a coarse edge (the diagonal when both are odd)
        ends = [base] if not odd.any() else [base, base + odd]
        for e in ends:
            cid = e[0] if cm.dim == 1 else e[1] * stride + e[0]
            rows.append(node)
            cols.append(cid)
            vals.append(1.0 / len(ends))
    return sp.csr_matrix((vals, (rows, cols)), shape=(fm.n_nodes, cm.n_nodes))


def prolongate(hierarchy, level, coarse_coeffs):
    """Zero-boundary P1 coefficients on ``level + 1`` of a function given on ``level``."""
    if not 0 <= level < hierarchy.J - 1:
        raise LevelOutOfRange(f"cannot prolong from level {level} of {hierarchy.J}")
    c = np.ascontiguousarray(coarse_coeffs, dtype=float)
    if c.shape != (hierarchy.dofs(level),):
        raise LevelOutOfRange("coefficient vector does not match the level")
    if hierarchy.dimension == 1:
        return kernels.prolong_1d(c)
    return kernels.prolong_2d(c, hierarchy.mesh(level).n - 1)


def restrict_functional(hierarchy, level, fine_functional):
    """Transpose of :func:`prolongate`: a functional on ``level + 1`` tested on level-``level`` hats."""
    if not 0 <= level < hierarchy.J - 1:
        raise LevelOutOfRange(f"cannot restrict to level {level} of {hierarchy.J}")
    f = np.ascontiguousarray(fine_functional, dtype=float)
    if hierarchy.dimension == 1:
        return kernels.restrict_1d(f)
    return kernels.restrict_2d(f, hierarchy.mesh(level).n - 1)


# --- quadrature -----------------------------------------------------------

_G3 = np.sqrt(0.6) / 2
_RULE_1D = (np.array([[0.5 - _G3, 0.5 + _G3], [0.5, 0.5], [0.5 + _G3, 0.5 - _G3]]),
            np.array([5.0, 8.0, 5.0]) / 18.0)


def _rule_2d():
    s15 = np.sqrt(15.0)
    a1, a2 = (6 - s15) / 21, (6 + s15) / 21
    w1, w2 = (155 - s15) / 1200, (155 + s15) / 1200
    bary = [[1 / 3, 1 / 3, 1 / 3]]
    weights = [9 / 40]
    for a, w in ((a1, w1), (a2, w2)):
        b = 1 - 2 * a
        bary += [[a, a, b], [a, b, a], [b, a, a]]
        weights += [w] * 3
    return np.array(bary), np.array(weights)


_RULE_2D = _rule_2d()


def quadrature_rule(dim):
    """Barycentric points and weights (summing to 1) exact to polynomial degree 5."""
    return _RULE_1D if dim == 1 else _RULE_2D


def quadrature_points(mesh):
    bary, w = quadrature_rule(mesh.dim)
    verts = mesh.coords[mesh.elems]  # (ne, d+1, d)
    pts = np.einsum("qk,ekd->eqd", bary, verts)
    return pts, mesh.areas[:, None] * w[None, :]


def _eval_func(func, pts):
    ne, nq, d = pts.shape
    try:
        vals = np.asarray(func(pts.reshape(-1, d)), dtype=float)
    except Exception as exc:  # noqa: BLE001 - any failure means we cannot integrate
        raise QuadratureUnavailable(f"cannot evaluate exact function: {exc}") from exc
    if vals.ndim == 1:
        vals = vals[:, None]
    if vals.shape[0] != ne * nq or not np.all(np.isfinite(vals)):
        raise QuadratureUnavailable("exact function returned an unusable array")
    return vals.reshape(ne, nq, -1)


def function_values(space, coeffs):
    """Values of a discrete function at the quadrature points of its mesh, shape (ne, nq, ncomp)."""
    mesh = space.mesh
    bary, _ = quadrature_rule(mesh.dim)
    c = np.asarray(coeffs, dtype=float).reshape(space.ncomp, space.scalar_ndof)
    out = np.empty((mesh.n_elems, bary.shape[0], space.ncomp))
    for comp in range(space.ncomp):
        if space.kind in (P0, P0_VEC):
            out[:, :, comp] = c[comp][:, None]
            continue
        full = np.zeros(mesh.n_nodes)
        if space.kind == P1_0:
            full[mesh.interior] = c[comp]
        else:
            full[:] = c[comp]
        out[:, :, comp] = full[mesh.elems] @ bary.T
    return out


def moments(space, func):
    """``int func . psi_j`` for every basis function of ``space`` (quadrature on its mesh)."""
    mesh = space.mesh
    pts, w = quadrature_points(mesh)
    vals = _eval_func(func, pts)
    if vals.shape[2] != space.ncomp:
        raise QuadratureUnavailable("component count of exact function does not match the space")
    bary, _ = quadrature_rule(mesh.dim)
    out = []
    for comp in range(space.ncomp):
        fw = vals[:, :, comp] * w
        if space.kind in (P0, P0_VEC):
            out.append(fw.sum(axis=1))
            continue
        local = fw @ bary  # (ne, d+1)
        full = np.bincount(mesh.elems.ravel(), weights=local.ravel(), minlength=mesh.n_nodes)
        out.append(full[mesh.interior] if space.kind == P1_0 else full)
    return np.concatenate(out)


def l2_error(space, coeffs, func):
    """``|| func - u_h ||_{L2}`` by the degree-5 rule on the mesh of ``space``."""
    pts, w = quadrature_points(space.mesh)
    exact = _eval_func(func, pts)
    diff = exact - function_values(space, coeffs)
    return float(np.sqrt(np.sum(w[:, :, None] * diff**2)))


def load_vector(space, f):
    """``<f, phi_i>`` on a zero-boundary P1 space."""
    if space.kind != P1_0:
        raise WrongSpaceKind("load vectors are assembled on the test space")
    return moments(space, f)


# --- plain-text dumps -------------------------------------------------------

def dump_matrix(mat, fh, kind="matrix"):
    """Write ``<kind> <rows> <cols> <nnz>`` then one ``i j value`` triplet per line."""
    m = (mat.matrix if isinstance(mat, AssembledOperator) else sp.csr_matrix(mat)).tocoo()
    order = np.lexsort((m.col, m.row))
    fh.write(f"{kind} {m.shape[0]} {m.shape[1]} {m.nnz}\n")
    for k in order:
        fh.write(f"{m.row[k]} {m.col[k]} {float(m.data[k])!r}\n")


def load_matrix(fh):
    header = fh.readline().split()
    rows, cols, nnz = (int(x) for x in header[1:4])
    data = np.loadtxt(fh, ndmin=2) if nnz else np.zeros((0, 3))
    return sp.csr_matrix((data[:, 2], (data[:, 0].astype(int), data[:, 1].astype(int))),
                         shape=(rows, cols))


def dump_mesh(mesh, fh):
    """Write ``mesh <dim> <nodes> <elements>``, node coordinates, then element node triplets."""
    fh.write(f"mesh {mesh.dim} {mesh.n_nodes} {mesh.n_elems}\n")
    for k, x in enumerate(mesh.coords):
        fh.write(f"node {k} " + " ".join(repr(float(v)) for v in x) + "\n")
    for k, e in enumerate(mesh.elems):
        fh.write(f"elem {k} " + " ".join(str(int(v)) for v in e) + "\n")
