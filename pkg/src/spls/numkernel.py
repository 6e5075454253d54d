"""Linear-algebra primitives: CG, Lanczos extreme eigenvalues, dense spectral oracle.

Operators may be given as dense arrays, scipy sparse matrices, or callables
acting on 1D arrays. All routines are deterministic.
"""
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import (
    BreakdownError,
    DimensionTooLarge,
    NonConvergence,
    NonFiniteValue,
    NotPositiveDefinite,
)

ORACLE_CAP = 2048
INNER_TOL = 1e-12


@dataclass(frozen=True)
class EigenPair:
    value: float
    vector: np.ndarray


def as_operator(op):
    """Return a callable ``x -> op @ x`` for arrays, sparse matrices and callables."""
    if callable(op) and not isinstance(op, (np.ndarray, sp.spmatrix, sp.sparray)):
        return op
    return lambda x: op @ x


def densify(op, n):
    """Dense matrix of ``op`` obtained column by column when it is only a callable."""
    if isinstance(op, np.ndarray):
        return np.array(op, dtype=float)
    if sp.issparse(op):
        return op.toarray()
    apply = as_operator(op)
    cols = np.empty((n, n))
    e = np.zeros(n)
    for i in range(n):
        e[i] = 1.0
        cols[:, i] = apply(e)
        e[i] = 0.0
    return cols


def _check_finite(x, what):
    if not np.all(np.isfinite(x)):
        raise NonFiniteValue(f"non-finite value in {what}")


def cg_solve(op, rhs, tol=INNER_TOL, maxit=None, precond=None):
    """Conjugate gradients for an SPD operator.

    Stops once ``||op(x) - rhs|| <= tol * ||rhs||`` (Euclidean norm of the true
    residual, recomputed on exit). ``precond`` is an optional SPD callable.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    apply = as_operator(op)
    b = np.asarray(rhs, dtype=float)
    _check_finite(b, "cg_solve rhs")
    n = b.shape[0]
    if maxit is None:
        maxit = 10 * n + 10
    bnorm = np.linalg.norm(b)
    x = np.zeros(n)
    if bnorm == 0.0:
        return x
    target = tol * bnorm
    r = b.copy()
    z = r if precond is None else precond(r)
    d = z.copy()
    rz = r @ z
    for _ in range(maxit):
        ad = apply(d)
        curv = d @ ad
        _check_finite(ad, "cg_solve operator output")
        if curv <= 0.0:
            raise NotPositiveDefinite("cg_solve met non-positive curvature")
        step = rz / curv
        x += step * d
        r -= step * ad
        if np.linalg.norm(r) <= target:
            # guard against drift of the recursive residual
            true_r = b - apply(x)
            if np.linalg.norm(true_r) <= target:
                return x
            r = true_r
        z = r if precond is None else precond(r)
        rz_new = r @ z
        d = z + (rz_new / rz) * d
        rz = rz_new
    res = np.linalg.norm(b - apply(x))
    if res <= target:
        return x
    raise NonConvergence(maxit, res / bnorm)


def lanczos_extreme(op, inner=None, k=50, start=None, return_ritz=False):
    """Extreme eigenvalue estimates of ``op``, self-adjoint in the ``inner`` product.

    Full reorthogonalisation is applied at every step. The default start vector
    is the normalised all-ones vector. A vanishing residual after the first step
    signals an invariant Krylov subspace, and its Ritz values are then exact.

    Returns
    -------
    (lam_min, lam_max) : tuple of float
        or the full array of Ritz values when ``return_ritz`` is set.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    apply = as_operator(op)
    metric = (lambda x: x) if inner is None else as_operator(inner)
    if start is None:
        shape = getattr(op, "shape", None)
        if shape is None:
            raise ValueError("start vector required for a callable operator")
        v = np.ones(shape[0])
    else:
        v = np.array(start, dtype=float)
    _check_finite(v, "lanczos start")
    mv = metric(v)
    nrm2 = v @ mv
    if not nrm2 > 0.0:
        raise BreakdownError("zero Lanczos start vector")
    scale = 1.0 / np.sqrt(nrm2)
    v, mv = v * scale, mv * scale
    n = v.shape[0]
    k = min(k, n)
    basis = [v]
    mbasis = [mv]
    alphas, betas = [], []
    for j in range(k):
        w = apply(basis[j])
        _check_finite(w, "lanczos operator output")
        alphas.append(w @ mbasis[j])
        V = np.array(basis)
        MV = np.array(mbasis)
        # two passes of classical Gram-Schmidt in the inner product
        w = w - V.T @ (MV @ w)
        w = w - V.T @ (MV @ w)
        if j == k - 1:
            break
        mw = metric(w)
        beta2 = w @ mw
        tscale = max(abs(a) for a in alphas)
        if not beta2 > (1e-13 * max(tscale, 1e-300)) ** 2:
            break
        beta = np.sqrt(beta2)
        betas.append(beta)
        basis.append(w / beta)
        mbasis.append(mw / beta)
    ritz = sla.eigvalsh_tridiagonal(np.array(alphas), np.array(betas[: len(alphas) - 1])) \
        if len(alphas) > 1 else np.array(alphas)
    if return_ritz:
        return ritz
    return float(ritz[0]), float(ritz[-1])


def dense_sym_eig(matrix, metric=None, cap=ORACLE_CAP):
    """Full spectrum of the symmetric pencil ``matrix x = lam metric x``, values ascending.

    Eigenvectors are normalised in the ``metric`` inner product.
    """
    a = matrix.toarray() if sp.issparse(matrix) else np.asarray(matrix, dtype=float)
    n = a.shape[0]
    if n > cap:
        raise DimensionTooLarge(f"dense oracle capped at {cap}, got {n}")
    a = 0.5 * (a + a.T)
    b = None
    if metric is not None:
        b = metric.toarray() if sp.issparse(metric) else np.asarray(metric, dtype=float)
        b = 0.5 * (b + b.T)
        try:
            sla.cholesky(b)
        except sla.LinAlgError as exc:
            raise NotPositiveDefinite("metric is not positive definite") from exc
    vals, vecs = sla.eigh(a, b)
    return [EigenPair(float(vals[i]), vecs[:, i]) for i in range(n)]
