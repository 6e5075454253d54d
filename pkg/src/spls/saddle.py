"""Discrete saddle point least squares problems.

A :class:`SaddleSystem` couples a zero-boundary P1 test space ``V_h`` with
a trial space that never gets a basis of its own. The trial iterates live in
coefficient vectors of a concrete space that contains them:

* no projection: the ambient P0 (or P0-vector) space, whose mass matrix is the
  trial metric. ``B_h v`` is ``C^{-1} B v``.
* projection: a continuous P1 (or P1-vector) target space with the metric
  ``(., .)_h`` (consistent or lumped mass). ``B_h v`` is ``R_h C^{-1} B v``
  where ``R_h`` is the Riesz projection ``(R_h p, q)_h = (p, q)``.

In both cases ``B_h^* q`` is the functional ``v -> b(v, q)``.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import fem
from .errors import DimensionMismatch, InnerSolveFailure, NonConvergence
from .numkernel import INNER_TOL, cg_solve

NO_PROJECTION = "no-projection"
PROJECTION = "projection"

PROBLEMS = {"1d-derivative": (1, fem.P0), "2d-gradient": (2, fem.P0_VEC)}
_TARGETS = {"p1": fem.P1, "p1-vector": fem.P1_VEC, "ambient": None}

# eigenvalues of the Gram pencil below this fraction of the largest count as kernel
KERNEL_THRESHOLD = 1e-10


@dataclass(frozen=True)
class TrialSpaceSpec:
    """How the trial space ``M_h`` is generated from the test space.

    ``target_offset`` is the mesh level of the projection target relative to
    the test mesh: ``+1`` one refinement finer, ``0`` the same mesh, ``-1``
    one level coarser.
    """

    kind: str = NO_PROJECTION
    target: str = "p1-vector"
    metric: str = "lumped"
    target_offset: int = 1

    def __post_init__(self):
        if self.kind not in (NO_PROJECTION, PROJECTION):
            raise ValueError(f"unknown trial kind {self.kind!r}")
        if self.target not in _TARGETS:
            raise ValueError(f"unknown projection target {self.target!r}")
        if self.metric not in ("consistent", "lumped"):
            raise ValueError(f"unknown metric mode {self.metric!r}")

    @property
    def tag(self):
        if self.kind == NO_PROJECTION:
            return "l2-ambient"
        if self.target == "ambient":
            return "l2-ambient"
        return f"{self.metric}-{self.target}@{self.target_offset:+d}"

    @property
    def is_l2(self):
        """True when the trial metric is the L2 inner product itself."""
        return self.kind == NO_PROJECTION or self.target == "ambient" or self.metric == "consistent"


@dataclass(frozen=True, eq=False)
class TrialElement:
    coeffs: np.ndarray
    metric: str


class SaddleSystem:
    """Operators ``A_h``, ``B``, ``C``, right-hand side ``f_h`` and the trial construction.

    Parameters
    ----------
    problem : str
        ``"1d-derivative"`` or ``"2d-gradient"``.
    hierarchy : MeshHierarchy
        Must contain the test level and, for projection targets, the target level.
    level : int
        Index of the test mesh inside ``hierarchy``.
    trial : TrialSpaceSpec
    rhs : array or None
        ``f_h`` as a vector of ``<f, phi_i>``; zero when omitted.
    """

    def __init__(self, problem, hierarchy, level, trial=TrialSpaceSpec(), rhs=None,
                 inner_tol=INNER_TOL):
        if problem not in PROBLEMS:
            raise ValueError(f"unknown problem {problem!r}")
        dim, amb_kind = PROBLEMS[problem]
        if hierarchy.dimension != dim:
            raise ValueError(f"{problem} needs a {dim}D hierarchy")
        self.problem = problem
        self.hierarchy = hierarchy
        self.level = level % hierarchy.J
        self.trial = trial
        self.inner_tol = inner_tol
        self.test_space = fem.function_space(hierarchy, fem.P1_0, self.level)
        self.ambient_space = fem.function_space(hierarchy, amb_kind, self.level)
        self.a_op = fem.assemble_stiffness_p1(self.test_space)
        self.b_op = fem.assemble_b_form(problem, self.test_space, self.ambient_space)
        self.c_op = fem.assemble_mass(self.ambient_space)
        self._c_diag = self.c_op.diagonal
        self.coupling = None
        if trial.kind == NO_PROJECTION or trial.target == "ambient":
            self.trial_space = self.ambient_space
            self.metric_op = self.c_op
            self.b_trial = self.b_op.matrix
        else:
            tkind = _TARGETS[trial.target]
            if (tkind == fem.P1_VEC) != (dim == 2):
                raise ValueError(f"target {trial.target!r} does not fit {problem}")
            tlevel = self.level + trial.target_offset
            self.trial_space = fem.function_space(hierarchy, tkind, tlevel)
            self.metric_op = fem.assemble_mass(self.trial_space, lumped=trial.metric == "lumped")
            self.coupling = fem.assemble_coupling(hierarchy, self.trial_space, self.ambient_space)
            self.b_trial = (self.coupling.matrix @ sp.diags(1.0 / self._c_diag) @ self.b_op.matrix).tocsr()
        self._metric_diag = None
        if self.trial.metric == "lumped" or self.trial_space is self.ambient_space:
            self._metric_diag = self.metric_op.diagonal
        n = self.test_space.ndof
        if rhs is None:
            rhs = np.zeros(n)
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape != (n,):
            raise DimensionMismatch(f"rhs has shape {rhs.shape}, expected ({n},)")
        self.rhs = rhs
        self._cache = {}

    # sizes and metric -------------------------------------------------------
    @property
    def n_test(self):
        return self.test_space.ndof

    @property
    def n_trial(self):
        return self.trial_space.ndof

    @property
    def tag(self):
        return self.trial.tag

    def with_rhs(self, rhs):
        """Copy sharing every assembled operator but with a new ``f_h``."""
        other = object.__new__(SaddleSystem)
        other.__dict__.update(self.__dict__)
        other.rhs = np.asarray(rhs, dtype=float)
        if other.rhs.shape != (self.n_test,):
            raise DimensionMismatch("rhs does not match the test space")
        other._cache = self._cache
        return other

    def metric_dot(self, x, y):
        return float(x @ (self.metric_op.matrix @ y))

    def metric_norm(self, x):
        return float(np.sqrt(max(self.metric_dot(x, x), 0.0)))

    def metric_solve(self, g):
        """Riesz representative in the trial metric of the functional ``g``."""
        if self._metric_diag is not None:
            return g / self._metric_diag
        d = self.metric_op.diagonal
        try:
            return cg_solve(self.metric_op.matrix, g, tol=self.inner_tol, precond=lambda r: r / d)
        except NonConvergence as exc:
            raise InnerSolveFailure(str(exc)) from exc

    def metric_solve_exact(self, g):
        """Direct-solver variant of :meth:`metric_solve`, used by the dense oracles."""
        if self._metric_diag is not None:
            return g / self._metric_diag
        if "metric_lu" not in self._cache:
            self._cache["metric_lu"] = spla.splu(self.metric_op.matrix.tocsc())
        return self._cache["metric_lu"].solve(g)

    def zero_trial(self):
        return TrialElement(np.zeros(self.n_trial), self.tag)

    def element(self, coeffs):
        c = np.asarray(coeffs, dtype=float)
        if c.shape != (self.n_trial,):
            raise DimensionMismatch(f"trial coefficients of shape {c.shape}, expected ({self.n_trial},)")
        return TrialElement(c, self.tag)

    # raw actions ---------------------------------------------------------------
    def bh(self, v):
        return self.metric_solve(self.b_trial @ v)

    def bstar(self, q):
        return self.b_trial.T @ q

    def apply_rh(self, p_ambient):
        """``R_h p`` for ``p`` given by ambient coefficients (projection systems only)."""
        if self.coupling is None:
            return np.array(p_ambient, dtype=float)
        return self.metric_solve(self.coupling.matrix @ p_ambient)

    # dense pieces shared by the oracles ------------------------------------------
    def dense_a(self):
        if "A" not in self._cache:
            self._cache["A"] = self.a_op.matrix.toarray()
        return self._cache["A"]

    def trial_gram(self):
        """Dense ``B_h^* B_h`` as a form on ``V_h``: ``K = B_t^T H^{-1} B_t``."""
        if "K" not in self._cache:
            bt = self.b_trial
            if self._metric_diag is not None:
                k = (bt.T @ sp.diags(1.0 / self._metric_diag) @ bt).toarray()
            else:
                self.metric_solve_exact(np.zeros(self.n_trial))
                solved = self._cache["metric_lu"].solve(bt.toarray())
                k = bt.T @ solved
            self._cache["K"] = 0.5 * (k + k.T)
        return self._cache["K"]

    def trial_pencil(self):
        """Eigen-decomposition of ``K w = lam A w`` split into kernel and range parts.

        Returns ``(lam_range, W_range, W_kernel)`` with ``W`` columns A-orthonormal.
        The nonzero eigenvalues are the spectrum of ``S_h`` on ``M_h``.
        """
        if "pencil" not in self._cache:
            lam, w = sla.eigh(self.trial_gram(), self.dense_a())
            cut = KERNEL_THRESHOLD * max(lam[-1], 0.0)
            rng = lam > cut
            self._cache["pencil"] = (lam[rng], w[:, rng], w[:, ~rng])
        return self._cache["pencil"]


def build_system(problem, J, trial=TrialSpaceSpec(), rhs=None, coarse_elements=2, **kw):
    """System on the finest mesh of a ``J``-level hierarchy (extra levels added for finer targets)."""
    if problem not in PROBLEMS:
        raise ValueError(f"unknown problem {problem!r}")
    dim = PROBLEMS[problem][0]
    extra = max(trial.target_offset, 0) if trial.kind == PROJECTION and trial.target != "ambient" else 0
    hierarchy = fem.build_hierarchy(dim, coarse_elements, J - 1 + extra)
    level = J - 1
    if trial.kind == PROJECTION and trial.target != "ambient" and level + trial.target_offset < 0:
        raise ValueError("projection target below the coarsest mesh")
    if callable(rhs):
        rhs = fem.load_vector(fem.function_space(hierarchy, fem.P1_0, level), rhs)
    return SaddleSystem(problem, hierarchy, level, trial, rhs, **kw)


def _check_trial(system, q):
    if not isinstance(q, TrialElement):
        raise DimensionMismatch("expected a TrialElement")
    if q.coeffs.shape != (system.n_trial,):
        raise DimensionMismatch(f"trial element of size {q.coeffs.shape[0]}, system expects {system.n_trial}")
    if q.metric != system.tag:
        raise DimensionMismatch(f"trial element carries metric {q.metric!r}, system uses {system.tag!r}")


def apply_bh(system, v):
    v = np.asarray(v, dtype=float)
    if v.shape != (system.n_test,):
        raise DimensionMismatch(f"test vector of shape {v.shape}, expected ({system.n_test},)")
    return TrialElement(system.bh(v), system.tag)


def apply_bstar(system, q):
    _check_trial(system, q)
    return system.bstar(q.coeffs)


def schur_apply(system, inverse_a, p):
    """``B_h P B_h^* p``; with the exact inverse of ``A_h`` this is ``S_h``."""
    return apply_bh(system, inverse_a.apply(apply_bstar(system, p)))


@dataclass(frozen=True)
class CompatibilityReport:
    kernel_dim: int
    max_abs: float  # max |<f_h, v>| over a Euclidean-orthonormal kernel basis
    kernel_norm: float  # Euclidean norm of the kernel component of f_h
    compatible: bool
    kernel_basis: np.ndarray = field(repr=False)


def check_compatibility(system, tol=1e-10):
    """Test ``<f_h, v> = 0`` on the discrete kernel ``V_{h,0}`` of ``B_h``."""
    _, _, w0 = system.trial_pencil()
    if w0.shape[1]:
        basis, _ = np.linalg.qr(w0)
    else:
        basis = np.zeros((system.n_test, 0))
    vals = basis.T @ system.rhs
    max_abs = float(np.max(np.abs(vals))) if vals.size else 0.0
    knorm = float(np.linalg.norm(vals))
    scale = max(np.linalg.norm(system.rhs), 1.0)
    return CompatibilityReport(basis.shape[1], max_abs, knorm, max_abs <= tol * scale, basis)
