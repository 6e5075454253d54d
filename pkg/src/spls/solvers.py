"""Uzawa conjugate gradient solvers for the saddle point least squares system.

Both algorithms run the same recurrence; only the action used in place of
``A_h^{-1}`` differs. Every trial-space inner product uses the system metric,
so projection trial spaces work with their discrete inner product ``(., .)_h``.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import MaxIterations, ZeroCurvature
from .precond import exact_inverse
from .saddle import TrialElement, _check_trial

ABS_FLOOR = 1e-14
CURVATURE_FLOOR = 1e-300


@dataclass(frozen=True)
class IterationRecord:
    """State at step ``j``; ``alpha``/``beta`` are None on the final record."""

    j: int
    q_norm: float
    alpha: float = None
    beta: float = None
    p_err: float = None  # ||p_{j-1} - p_h|| in the trial metric
    u_err: float = None  # |u_j - u_h| in the energy norm
    energy_err: float = None  # ||p_{j-1} - p_h|| in the S~_h norm


@dataclass
class IterationHistory:
    records: list = field(default_factory=list)
    threshold: float = 0.0

    @property
    def iterations(self):
        return max(len(self.records) - 1, 0)

    @property
    def q_norms(self):
        return np.array([r.q_norm for r in self.records])

    @property
    def has_errors(self):
        return bool(self.records) and self.records[0].p_err is not None

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records], dtype=float)


@dataclass
class SplsSolution:
    u_h: np.ndarray
    p_h: TrialElement
    history: IterationHistory
    converged: bool
    iterates: dict = None  # lists of p_j, q_j, d_j when requested


def _errors(system, precond, reference, p, u):
    if reference is None:
        return {}
    ep = p - reference.p_h.coeffs
    eu = u - reference.u_h
    be = system.bstar(ep)
    return {
        "p_err": system.metric_norm(ep),
        "u_err": float(np.sqrt(max(eu @ (system.a_op.matrix @ eu), 0.0))),
        "energy_err": float(np.sqrt(max(be @ precond.apply(be), 0.0))),
    }


def _uzawa(system, precond, p0, tol, maxit, reference, keep_iterates):
    if tol <= 0:
        raise ValueError("tol must be positive")
    if p0 is None:
        p0 = system.zero_trial()
    _check_trial(system, p0)
    p = p0.coeffs.copy()
    u = precond.apply(system.rhs - system.bstar(p))
    q = system.bh(u)
    qq = system.metric_dot(q, q)
    q1 = np.sqrt(qq)
    threshold = max(tol * q1, ABS_FLOOR)
    history = IterationHistory(threshold=threshold)
    iterates = {"p": [p.copy()], "q": [q.copy()], "d": []} if keep_iterates else None
    d = q.copy()
    j = 1
    pending = {"j": 1, "q_norm": float(q1), **_errors(system, precond, reference, p, u)}

    def solution(converged):
        return SplsSolution(u, TrialElement(p, system.tag), history, converged, iterates)

    while np.sqrt(qq) > threshold:
        if j > maxit:
            history.records.append(IterationRecord(**pending))
            raise MaxIterations(maxit, solution(False))
        h = -precond.apply(system.bstar(d))
        curv = float(q @ (system.b_trial @ h))  # b(h_j, q_j)
        if abs(curv) < CURVATURE_FLOOR:
            history.records.append(IterationRecord(**pending))
            raise ZeroCurvature(f"b(h_j, q_j) = {curv:.3e} at step {j} with ||q_j|| = {np.sqrt(qq):.3e}")
        alpha = -qq / curv
        p = p + alpha * d
        u = u + alpha * h
        q = system.bh(u)
        qq_new = system.metric_dot(q, q)
        beta = qq_new / qq
        history.records.append(IterationRecord(alpha=alpha, beta=beta, **pending))
        if keep_iterates:
            iterates["d"].append(d.copy())
            iterates["p"].append(p.copy())
            iterates["q"].append(q.copy())
        d = q + beta * d
        qq = qq_new
        j += 1
        pending = {"j": j, "q_norm": float(np.sqrt(qq)), **_errors(system, precond, reference, p, u)}
    history.records.append(IterationRecord(**pending))
    return solution(True)


def exact_preconditioner(system):
    """The cached exact inverse of ``A_h`` attached to ``system``."""
    cache = system._cache
    if "exact" not in cache:
        cache["exact"] = exact_inverse(system.a_op)
    return cache["exact"]


def ucg_solve(system, p0=None, tol=1e-10, maxit=1000, reference=None, keep_iterates=False):
    """Uzawa CG with the exact inverse of ``A_h``.

    Stops when ``||q_{j+1}|| <= tol * ||q_1||`` (or below the absolute floor
    1e-14). Passing a ``reference`` solution adds reference errors to the history.
    """
    return _uzawa(system, exact_preconditioner(system), p0, tol, maxit, reference, keep_iterates)


def pcg_solve(system, precond, p0=None, tol=1e-10, maxit=1000, reference=None, keep_iterates=False):
    """Preconditioned Uzawa CG: ``precond`` takes the place of ``A_h^{-1}``."""
    if precond.dim != system.n_test:
        raise ValueError(f"preconditioner of size {precond.dim} for test space of size {system.n_test}")
    return _uzawa(system, precond, p0, tol, maxit, reference, keep_iterates)
