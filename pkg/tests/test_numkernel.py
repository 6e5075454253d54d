import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from spls.errors import BreakdownError, DimensionTooLarge, NonConvergence, NonFiniteValue, NotPositiveDefinite
from spls.numkernel import cg_solve, dense_sym_eig, densify, lanczos_extreme


def laplace_1d(n):
    return sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1]).tocsr()


def test_cg_solves_laplacian():
    a = laplace_1d(40)
    b = np.linspace(0, 1, 40)
    x = cg_solve(a, b, tol=1e-12)
    assert np.linalg.norm(a @ x - b) <= 1e-12 * np.linalg.norm(b)


def test_cg_zero_rhs_returns_zero():
    assert np.all(cg_solve(laplace_1d(5), np.zeros(5)) == 0)


def test_cg_with_preconditioner_and_callable():
    a = laplace_1d(30)
    d = a.diagonal()
    x = cg_solve(lambda v: a @ v, np.ones(30), precond=lambda r: r / d)
    np.testing.assert_allclose(a @ x, np.ones(30), atol=1e-10)


def test_cg_errors():
    with pytest.raises(NonConvergence):
        cg_solve(laplace_1d(50), np.ones(50), tol=1e-14, maxit=3)
    with pytest.raises(NotPositiveDefinite):
        cg_solve(-laplace_1d(5), np.ones(5))
    with pytest.raises(NonFiniteValue):
        cg_solve(laplace_1d(3), np.array([1.0, np.nan, 0.0]))
    with pytest.raises(ValueError):
        cg_solve(laplace_1d(3), np.ones(3), tol=0)


def test_lanczos_matches_dense_jacobi_n7():
    a = 4 * laplace_1d(7)
    d = a.diagonal()
    lo, hi = lanczos_extreme(lambda v: (a @ v) / d, inner=a, start=np.arange(1.0, 8.0))
    full = dense_sym_eig(a, sp.diags(d))
    assert abs(lo - full[0].value) < 1e-8 and abs(hi - full[-1].value) < 1e-8


def test_lanczos_invariant_subspace_exact():
    # all-ones is an eigenvector of the identity: one step is exact
    assert lanczos_extreme(np.eye(6)) == pytest.approx((1.0, 1.0))


def test_lanczos_errors():
    with pytest.raises(BreakdownError):
        lanczos_extreme(np.eye(3), start=np.zeros(3))
    with pytest.raises(ValueError):
        lanczos_extreme(lambda v: v)


def test_dense_oracle_cap_and_metric():
    with pytest.raises(DimensionTooLarge):
        dense_sym_eig(np.eye(5), cap=4)
    with pytest.raises(NotPositiveDefinite):
        dense_sym_eig(np.eye(2), -np.eye(2))
    pairs = dense_sym_eig(np.diag([3.0, 1.0]), np.diag([1.0, 2.0]))
    assert [p.value for p in pairs] == pytest.approx([0.5, 3.0])
    v = pairs[0].vector
    assert v @ np.diag([1.0, 2.0]) @ v == pytest.approx(1.0)


def test_densify_callable():
    m = np.arange(9.0).reshape(3, 3)
    np.testing.assert_array_equal(densify(lambda x: m @ x, 3), m)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 25), st.integers(0, 2**31 - 1))
def test_lanczos_brackets_spectrum(n, seed):
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    lam = np.sort(rng.uniform(0.1, 10, n))
    a = (q * lam) @ q.T
    lo, hi = lanczos_extreme(a, k=n, start=rng.standard_normal(n))
    assert lo >= lam[0] - 1e-8 * lam[-1] and hi <= lam[-1] * (1 + 1e-8)
    assert abs(hi - lam[-1]) <= 1e-6 * lam[-1]
