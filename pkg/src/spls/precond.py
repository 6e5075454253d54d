"""Symmetric positive definite approximations ``P_h`` of ``A_h^{-1}``.

Three kinds ship: the exact inverse (a cached factorization), Jacobi, and the
additive multilevel BPX preconditioner evaluated in nested (Horner) form.
"""
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import fem
from .errors import LevelMismatch, NotPositiveDefinite, ZeroDiagonal, DimensionMismatch
from .numkernel import ORACLE_CAP, lanczos_extreme

EXACT, JACOBI, BPX = "exact", "jacobi", "bpx"


class Preconditioner:
    """Base class. Subclasses implement ``_apply`` on a 1D array."""

    kind = None

    def __init__(self, dim):
        self.dim = dim

    def apply(self, f):
        f = np.asarray(f, dtype=float)
        if f.shape != (self.dim,):
            raise DimensionMismatch(f"preconditioner of size {self.dim} applied to shape {f.shape}")
        return self._apply(f)

    __call__ = apply

    def dense(self):
        """Dense matrix of ``P_h`` built from its action on unit vectors."""
        cols = np.empty((self.dim, self.dim))
        e = np.zeros(self.dim)
        for i in range(self.dim):
            e[i] = 1.0
            cols[:, i] = self._apply(e)
            e[i] = 0.0
        return cols

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim})"


class ExactInverse(Preconditioner):
    kind = EXACT

    def __init__(self, a_op, cap=ORACLE_CAP):
        mat = a_op.matrix if isinstance(a_op, fem.AssembledOperator) else a_op
        super().__init__(mat.shape[0])
        self._chol = None
        self._lu = None
        if self.dim <= cap:
            dense = mat.toarray() if sp.issparse(mat) else np.asarray(mat, dtype=float)
            try:
                self._chol = sla.cho_factor(dense, lower=True)
            except sla.LinAlgError as exc:
                raise NotPositiveDefinite("stiffness matrix is not SPD") from exc
        else:
            # beyond the dense cap fall back to a sparse LU; SPD is then assumed
            self._lu = spla.splu(sp.csc_matrix(mat))

    def _apply(self, f):
        if self._chol is not None:
            return sla.cho_solve(self._chol, f)
        return self._lu.solve(f)

    def dense(self):
        if self._chol is not None:
            return sla.cho_solve(self._chol, np.eye(self.dim))
        return super().dense()


class Jacobi(Preconditioner):
    kind = JACOBI

    def __init__(self, a_op):
        mat = a_op.matrix if isinstance(a_op, fem.AssembledOperator) else a_op
        diag = np.asarray(mat.diagonal() if sp.issparse(mat) else np.diag(mat), dtype=float)
        super().__init__(diag.shape[0])
        if np.any(diag <= 0.0):
            raise ZeroDiagonal("Jacobi needs a strictly positive diagonal")
        self.inv_diag = 1.0 / diag

    def _apply(self, f):
        return self.inv_diag * f


class BPXPreconditioner(Preconditioner):
    """``P f = sum_k sum_i <f, phi_i^k> / a(phi_i^k, phi_i^k) phi_i^k`` over levels ``coarsest..finest``.

    The sum is evaluated by restricting the functional level by level and
    prolongating the scaled level contributions back in nested order, so a
    single pass over the hierarchy costs O(total dofs).
    ``ops`` counts scalar multiply-adds of the last :meth:`apply`.
    """

    kind = BPX

    def __init__(self, hierarchy, inv_diags, finest, coarsest=0):
        super().__init__(hierarchy.dofs(finest))
        self.hierarchy = hierarchy
        self.finest = finest
        self.coarsest = coarsest
        self.inv_diags = tuple(inv_diags)
        self.ops = 0

    @property
    def total_dofs(self):
        return sum(self.hierarchy.dofs(k) for k in range(self.coarsest, self.finest + 1))

    def _apply(self, f):
        h, top, k0 = self.hierarchy, self.finest, self.coarsest
        residuals = [f]
        for lvl in range(top - 1, k0 - 1, -1):
            residuals.append(fem.restrict_functional(h, lvl, residuals[-1]))
        residuals.reverse()  # residuals[k - k0] lives on level k
        ops = 0
        s = self.inv_diags[0] * residuals[0]
        ops += s.size
        for lvl in range(k0 + 1, top + 1):
            s = fem.prolongate(h, lvl - 1, s) + self.inv_diags[lvl - k0] * residuals[lvl - k0]
            ops += 3 * s.size  # restriction, prolongation, scaling
        self.ops = ops
        return s


def exact_inverse(a_op, cap=ORACLE_CAP):
    return ExactInverse(a_op, cap)


def jacobi(a_op):
    return Jacobi(a_op)


def bpx(hierarchy, a_ops=None, finest=-1, coarsest=0):
    """BPX on levels ``coarsest..finest`` of ``hierarchy``.

    ``a_ops`` are the per-level stiffness operators (assembled if omitted),
    one per level from ``coarsest`` to ``finest``.
    """
    finest = finest % hierarchy.J
    if not 0 <= coarsest <= finest:
        raise LevelMismatch(f"coarsest level {coarsest} above finest {finest}")
    levels = range(coarsest, finest + 1)
    if a_ops is None:
        a_ops = [fem.assemble_stiffness_p1(fem.function_space(hierarchy, fem.P1_0, k)) for k in levels]
    a_ops = list(a_ops)
    if len(a_ops) != len(levels):
        raise LevelMismatch(f"{len(a_ops)} stiffness operators for {len(levels)} levels")
    inv = []
    for k, op in zip(levels, a_ops):
        mat = op.matrix if isinstance(op, fem.AssembledOperator) else op
        if mat.shape[0] != hierarchy.dofs(k):
            raise LevelMismatch(f"stiffness for level {k} has size {mat.shape[0]}, expected {hierarchy.dofs(k)}")
        d = np.asarray(mat.diagonal(), dtype=float)
        if np.any(d <= 0.0):
            raise ZeroDiagonal(f"non-positive stiffness diagonal on level {k}")
        inv.append(1.0 / d)
    return BPXPreconditioner(hierarchy, inv, finest, coarsest)


@dataclass(frozen=True)
class EquivalenceBounds:
    m1_sq: float
    m2_sq: float
    kappa: float
    method: str = "dense"

    @classmethod
    def from_extremes(cls, lo, hi, method):
        if not 0.0 < lo <= hi:
            raise NotPositiveDefinite(f"P_h A_h has spectrum [{lo}, {hi}]")
        return cls(float(lo), float(hi), float(hi / lo), method)


def _dense_pa_spectrum(p, a_dense):
    pd = p.dense()
    pd = 0.5 * (pd + pd.T)
    try:
        low = np.linalg.cholesky(pd)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("preconditioner is not positive definite") from exc
    # sigma(P A) = sigma(L^T A L) for P = L L^T
    return np.linalg.eigvalsh(low.T @ a_dense @ low)


def measure_equivalence(p, a_op, cap=ORACLE_CAP, lanczos_steps=200, cross_check_tol=1e-6, seed=0):
    """Extreme eigenvalues ``m_1^2, m_2^2`` of ``P_h A_h``.

    Lanczos runs on ``P_h A_h``, which is self-adjoint in the ``a`` inner
    product. When ``dim <= cap`` the dense spectrum is also computed, must
    agree with Lanczos to ``cross_check_tol`` on the largest eigenvalue, and is
    returned.
    """
    mat = a_op.matrix if isinstance(a_op, fem.AssembledOperator) else a_op
    if mat.shape[0] != p.dim:
        raise DimensionMismatch(f"preconditioner of size {p.dim} for operator of size {mat.shape[0]}")
    if p.kind == EXACT:
        return EquivalenceBounds(1.0, 1.0, 1.0, "exact")
    # all-ones can sit in a small invariant subspace of P A (it does for BPX), so start randomly
    start = np.random.default_rng(seed).standard_normal(p.dim)
    lo, hi = lanczos_extreme(lambda x: p.apply(mat @ x), inner=mat,
                             k=min(lanczos_steps, p.dim), start=start)
    if p.dim > cap:
        return EquivalenceBounds.from_extremes(lo, hi, "lanczos")
    a_dense = mat.toarray() if sp.issparse(mat) else np.asarray(mat, dtype=float)
    spec = _dense_pa_spectrum(p, a_dense)
    if abs(spec[-1] - hi) > cross_check_tol * spec[-1]:
        warnings.warn(f"Lanczos ({hi}) and dense ({spec[-1]}) disagree on the largest eigenvalue of P A")
    return EquivalenceBounds.from_extremes(spec[0], spec[-1], "dense")


def symmetry_defect(p, pairs=50, seed=0):
    """Largest ``|<g, P f> - <f, P g>| / (|f| |P g|)`` over seeded random pairs."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(pairs):
        f, g = rng.standard_normal(p.dim), rng.standard_normal(p.dim)
        pf, pg = p.apply(f), p.apply(g)
        scale = max(np.linalg.norm(f) * np.linalg.norm(pg), np.linalg.norm(g) * np.linalg.norm(pf), 1e-300)
        worst = max(worst, abs(g @ pf - f @ pg) / scale)
    return worst
