"""Measured constants and numerical checks of the SPLS error and iteration bounds.

The dense oracle works on the Gram pencil ``K w = lam A w`` with
``K = B_h^* B_h`` (see :meth:`SaddleSystem.trial_pencil`). Its nonzero
eigenvalues are the spectrum of ``S_h`` on ``M_h``, and its range vectors
give a metric-orthonormal basis of ``M_h`` without ever forming one from
``B_h`` images by QR.
"""
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from . import fem, fixtures
from .numkernel import ORACLE_CAP, lanczos_extreme
from .precond import EXACT, measure_equivalence, symmetry_defect
from .saddle import KERNEL_THRESHOLD, NO_PROJECTION, PROJECTION, SaddleSystem, TrialElement, TrialSpaceSpec
from .solvers import IterationHistory, SplsSolution, exact_preconditioner, pcg_solve

M_CONTINUOUS = 1.0  # sup-sup constant of b(v, q) = (grad v, q) with |v| = ||grad v||
SLACK_SPECTRAL = 1e-8
SLACK_BOUNDS = 1e-6
NOISE = 1e-12  # absolute floor, relative to the initial error, for floating point stagnation


@dataclass(frozen=True)
class SpectralReport:
    m_h: float
    M_h: float
    m_tilde_h: float
    M_tilde_h: float
    m1_sq: float
    m2_sq: float
    kappa_S: float
    kappa_S_tilde: float
    kappa_PA: float
    M: float = M_CONTINUOUS
    method: str = "dense"

    @property
    def m1(self):
        return math.sqrt(self.m1_sq)

    @property
    def m2(self):
        return math.sqrt(self.m2_sq)

    @property
    def rho(self):
        """CG contraction factor in the S~_h norm."""
        return (self.M_tilde_h - self.m_tilde_h) / (self.M_tilde_h + self.m_tilde_h)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    worst: float  # largest (lhs - rhs) / scale; <= 0 means satisfied
    detail: str = ""


def _basis_data(system, precond):
    """Range part of the Gram pencil and the S~_h matrix in the H-orthonormal basis."""
    lam, w, _ = system.trial_pencil()
    x = system.dense_a() @ (w * np.sqrt(lam))  # columns: B_h^* u_i
    pd = precond.dense()
    pd = 0.5 * (pd + pd.T)
    shat = x.T @ pd @ x
    return lam, w, x, 0.5 * (shat + shat.T), pd


def dense_reference(system, precond=None):
    """The discrete solution ``(u_h, p_h)`` of the (preconditioned) saddle system by a dense Schur solve."""
    precond = exact_preconditioner(system) if precond is None else precond
    lam, w, x, shat, pd = _basis_data(system, precond)
    rhs = x.T @ (pd @ system.rhs)
    coef = sla.solve(shat, rhs, assume_a="pos")
    p = system.metric_solve_exact(system.b_trial @ (w @ (coef / np.sqrt(lam))))
    u = pd @ (system.rhs - x @ coef)
    return SplsSolution(u, TrialElement(p, system.tag), IterationHistory(), True)


def measure_infsup(system, inverse_a=None, cap=ORACLE_CAP, lanczos_steps=300):
    """Spectral constants of ``S_h`` and ``S~_h`` on ``M_h``, plus ``m_1^2, m_2^2``."""
    precond = exact_preconditioner(system) if inverse_a is None else inverse_a
    eq = measure_equivalence(precond, system.a_op, cap=cap)
    if system.n_test <= cap:
        lam, _, _, shat, _ = _basis_data(system, precond)
        mu = np.linalg.eigvalsh(shat) if precond.kind != EXACT else lam
        method = "dense"
    else:
        lam = _lanczos_schur(system, exact_preconditioner(system), lanczos_steps)
        mu = _lanczos_schur(system, precond, lanczos_steps)
        method = "lanczos"
    m_h, M_h = math.sqrt(lam[0]), math.sqrt(lam[-1])
    mt, Mt = math.sqrt(mu[0]), math.sqrt(mu[-1])
    return SpectralReport(m_h, M_h, mt, Mt, eq.m1_sq, eq.m2_sq,
                          (M_h / m_h) ** 2, (Mt / mt) ** 2, eq.kappa, method=method)


def _lanczos_schur(system, precond, k, seed=0):
    """Extreme nonzero eigenvalues of the Schur operator, Lanczos started inside ``M_h``.

    Once the Krylov space inside ``M_h`` is exhausted, rounding adds components
    from its complement, which show up as near-zero Ritz values. They are
    dropped with the same relative cutoff as the dense kernel detection.
    """
    k = min(k, system.n_test)
    start = system.bh(np.random.default_rng(seed).standard_normal(system.n_test))
    op = lambda q: system.bh(precond.apply(system.bstar(q)))  # noqa: E731
    ritz = lanczos_extreme(op, inner=system.metric_op.matrix, k=k, start=start, return_ritz=True)
    ritz = ritz[ritz > KERNEL_THRESHOLD * ritz[-1]]
    return np.array([ritz[0], ritz[-1]])


def check_kappa_product(report, slack=SLACK_SPECTRAL):
    bound = report.kappa_S * report.kappa_PA
    return CheckResult("kappa_product", report.kappa_S_tilde <= bound * (1 + slack),
                       (report.kappa_S_tilde - bound) / bound)


def check_tilde_bounds(report, slack=SLACK_SPECTRAL):
    lo = report.m1 * report.m_h
    hi = report.m2 * report.M_h
    worst = max((lo - report.m_tilde_h) / lo, (report.M_tilde_h - hi) / hi)
    ok = report.m_tilde_h >= lo * (1 - slack) and report.M_tilde_h <= hi * (1 + slack)
    return CheckResult("tilde_bounds", ok, worst, f"m~={report.m_tilde_h:.6g}>={lo:.6g}, M~={report.M_tilde_h:.6g}<={hi:.6g}")


def check_supsup(report, slack=SLACK_SPECTRAL):
    return CheckResult("M_h<=M", report.M_h <= report.M * (1 + slack), report.M_h - report.M)


def _sandwich(name, lower, value, upper, slack, floor):
    """Check ``lower <= value <= upper`` elementwise with relative slack and an absolute floor."""
    lo_gap = lower - value * (1 + slack) - floor
    hi_gap = value - upper * (1 + slack) - floor
    scale = np.maximum(np.abs(value), floor + 1e-300)
    worst = float(np.max(np.maximum(lo_gap, hi_gap) / scale)) if value.size else -np.inf
    return CheckResult(name, bool(np.all(lo_gap <= 0) and np.all(hi_gap <= 0)), worst)


def verify_iteration_bounds(history, report, reference=None, slack=SLACK_BOUNDS, noise=NOISE):
    """Check the iterate sandwiches and the CG rate estimate at every recorded step.

    ``history`` must carry reference errors (run the solver with ``reference=``).
    ``reference`` is unused beyond documenting which solution the errors refer to.
    Values are compared with relative ``slack`` plus an absolute floor of
    ``noise`` times the first recorded error, below which rounding dominates.
    """
    del reference
    if not history.records or history.iterations == 0 and history.records[0].q_norm == 0.0:
        return [CheckResult(n, True, -np.inf, "no iterations") for n in ("p_sandwich", "u_sandwich", "cg_rate")]
    if not history.has_errors:
        raise ValueError("history has no reference errors; solve with reference=...")
    q = history.column("q_norm")
    pe, ue, ee = history.column("p_err"), history.column("u_err"), history.column("energy_err")
    r = report
    M = r.M
    p_lo = q / (M**2 * r.m2_sq)
    p_hi = q / (r.m_h**2 * r.m1_sq)
    u_lo = (r.m_h / M**2) * (r.m1_sq / r.m2_sq) * q
    u_hi = (M / r.m_h**2) * (r.m2_sq / r.m1_sq) * q
    checks = [
        _sandwich("p_sandwich", p_lo, pe, p_hi, slack, noise * pe[0]),
        _sandwich("u_sandwich", u_lo, ue, u_hi, slack, noise * ue[0]),
    ]
    j = np.arange(ee.size)
    rate_bound = 2.0 * r.rho**j * ee[0]
    gap = ee - rate_bound * (1 + slack) - noise * ee[0]
    checks.append(CheckResult("cg_rate", bool(np.all(gap <= 0)), float(np.max(gap / np.maximum(ee, 1e-300)))))
    return checks


@dataclass(frozen=True)
class ErrorReport:
    err_p: float
    best_approx: float
    err_u: float
    bound_lhs: float
    bound_rhs: float
    holds: bool
    l2_metric: bool = True


def best_approximation(system, exact_p):
    """L2-best approximation of ``exact_p`` in ``M_h`` and its distance, by quadrature."""
    lam, w, _ = system.trial_pencil()
    space = system.trial_space
    g = fem.moments(space, exact_p)
    # U = H^{-1} B_t W lam^{-1/2} is H-orthonormal
    ut_g = (w / np.sqrt(lam)).T @ (system.b_trial.T @ system.metric_solve_exact(g))
    if system.trial.is_l2:
        coeffs = system.metric_solve_exact(system.b_trial @ ((w / np.sqrt(lam)) @ ut_g))
    else:
        u = _dense_basis(system, w, lam)
        mass = fem.assemble_mass(space).matrix
        gram = u.T @ (mass @ u)
        coeffs = u @ sla.solve(gram, u.T @ g, assume_a="pos")
    return coeffs, fem.l2_error(space, coeffs, exact_p)


def _dense_basis(system, w, lam):
    bt = system.b_trial @ (w / np.sqrt(lam))
    return np.column_stack([system.metric_solve_exact(bt[:, i]) for i in range(bt.shape[1])])


def verify_error_estimate(system, solution, exact_p, report, slack=SLACK_BOUNDS, atol=1e-13):
    """Two-sided discretization error bound for ``p_h`` with measured constants.

    Errors are L2 norms by quadrature. For a lumped projection metric the
    constants come from the lumped inner product, so ``l2_metric`` is False and
    the check is only a consistency test there. ``atol`` absorbs quadrature
    rounding when ``p`` lies in ``M_h`` and every error is at machine level.
    """
    err_p = fem.l2_error(system.trial_space, solution.p_h.coeffs, exact_p)
    _, best = best_approximation(system, exact_p)
    u = solution.u_h
    err_u = float(np.sqrt(max(u @ (system.a_op.matrix @ u), 0.0)))
    r = report
    lhs = err_u / (r.M * r.m2_sq)
    rhs = (r.M / r.m_h) * (r.m2 / r.m1) * best
    holds = lhs <= err_p * (1 + slack) + atol and err_p <= rhs * (1 + slack) + atol
    return ErrorReport(err_p, best, err_u, lhs, rhs, holds, system.trial.is_l2)


@dataclass(frozen=True)
class CoercivityReport:
    c_tilde: float
    m_h: float
    m_h0: float
    chain_holds: bool
    inf_sup_risk: bool


def measure_rh_coercivity(system, risk_threshold=1e-6, slack=SLACK_SPECTRAL):
    """``c~ = min ||R_h q||_h / ||q||`` over ``q`` in ``C^{-1} B V_h``, and the chain ``m_h >= c~ m_{h,0}``.

    Writing ``q = C^{-1} B v`` gives ``||q||^2 = v^T K0 v`` with
    ``K0 = B^T C^{-1} B`` and ``||R_h q||_h^2 = v^T K v``, so ``c~^2`` is the
    smallest eigenvalue of the pencil ``(K, K0)``.
    """
    if system.trial.kind != PROJECTION:
        raise ValueError("coercivity of R_h needs a projection trial space")
    b = system.b_op.matrix
    k0 = (b.T @ sp.diags(1.0 / system.c_op.diagonal) @ b).toarray()
    k = system.trial_gram()
    mu = sla.eigvalsh(k, 0.5 * (k0 + k0.T))
    c_tilde = math.sqrt(max(mu[0], 0.0))
    lam, _, _ = system.trial_pencil()
    base = SaddleSystem(system.problem, system.hierarchy, system.level, TrialSpaceSpec(NO_PROJECTION))
    lam0, _, _ = base.trial_pencil()
    m_h, m_h0 = math.sqrt(lam[0]), math.sqrt(lam0[0])
    return CoercivityReport(c_tilde, m_h, m_h0, m_h >= c_tilde * m_h0 * (1 - slack), mu[0] < risk_threshold * mu[-1])


def predicted_iterations(report, tol):
    """Smallest ``j`` with ``2 rho^j (M~/m~)^3 <= tol``: an a priori bound on UCG/PCG steps."""
    rho = report.rho
    amp = 2.0 * (report.M_tilde_h / report.m_tilde_h) ** 3
    if rho <= 0.0 or amp <= tol:
        return 1
    return max(1, math.ceil(math.log(tol / amp) / math.log(rho)))


@dataclass
class StudyRow:
    h: float
    dofs: int
    m_h: float
    M_h: float
    kappa_S: float
    kappa_Stilde: float
    kappa_PA: float
    iters: int
    err_p: float
    rate: float = None
    c_tilde: float = None


@dataclass
class StudyResult:
    rows: list
    checks: list = field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)


def convergence_study(problem, levels, trial=TrialSpaceSpec(), preconditioner="exact",
                      solution=None, tol=1e-10, maxit=1000, verify=False, seed=0):
    """Solve on each ``J`` in ``levels`` and tabulate constants, iterations and errors.

    ``solution`` names a manufactured solution from :mod:`spls.fixtures`.
    With ``verify`` every theorem check runs on each level; results land in ``checks``.
    """
    sol = fixtures.get_solution(problem, solution)
    rows, checks = [], []
    for J in levels:
        system = fixtures.make_system(problem, J, trial, sol)
        precond = fixtures.make_preconditioner(preconditioner, system)
        report = measure_infsup(system, precond)
        reference = dense_reference(system, precond) if verify else None
        run = pcg_solve(system, precond, tol=tol, maxit=maxit, reference=reference)
        err_p = fem.l2_error(system.trial_space, run.p_h.coeffs, sol.p)
        row = StudyRow(system.test_space.mesh.h, system.n_test, report.m_h, report.M_h, report.kappa_S,
                       report.kappa_S_tilde, report.kappa_PA, run.history.iterations, err_p)
        if rows and rows[-1].err_p > 0 and err_p > 0:
            row.rate = math.log(rows[-1].err_p / err_p) / math.log(rows[-1].h / row.h)
        if trial.kind == PROJECTION:
            row.c_tilde = measure_rh_coercivity(system).c_tilde
        rows.append(row)
        if verify:
            tag = f"J={J}"
            level_checks = [check_kappa_product(report), check_tilde_bounds(report), check_supsup(report)]
            level_checks += verify_iteration_bounds(run.history, report, reference)
            est = verify_error_estimate(system, run, sol.p, report)
            level_checks.append(CheckResult("error_estimate", est.holds, est.err_p - est.bound_rhs,
                                            f"{est.bound_lhs:.3e} <= {est.err_p:.3e} <= {est.bound_rhs:.3e}"))
            if trial.kind == PROJECTION:
                co = measure_rh_coercivity(system)
                level_checks.append(CheckResult("rh_chain", co.chain_holds, co.c_tilde * co.m_h0 - co.m_h))
            sym = symmetry_defect(precond, seed=seed)
            level_checks.append(CheckResult("symmetry", sym <= 1e-12, sym))
            checks += [CheckResult(f"{tag} {c.name}", c.passed, c.worst, c.detail) for c in level_checks]
    return StudyResult(rows, checks)
