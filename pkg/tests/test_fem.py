import io

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from spls import fem, kernels
from spls.errors import IncompatibleSpaces, InvalidRefinement, LevelOutOfRange, QuadratureUnavailable, WrongSpaceKind


def test_hierarchy_sizes():
    h = fem.build_hierarchy(1, 2, 2)
    assert h.J == 3 and [h.dofs(k) for k in range(3)] == [1, 3, 7]
    h2 = fem.build_hierarchy(2, 2, 2)
    assert h2.finest.n == 8 and h2.dofs() == 49
    assert fem.build_hierarchy(1, 2, 0).J == 1


def test_hierarchy_errors():
    with pytest.raises(InvalidRefinement):
        fem.build_hierarchy(3, 2, 1)
    with pytest.raises(InvalidRefinement):
        fem.build_hierarchy(1, 2, -1)
    with pytest.raises(InvalidRefinement):
        fem.build_hierarchy(2, 2, 12)
    with pytest.raises(LevelOutOfRange):
        fem.build_hierarchy(1, 2, 1).mesh(5)


def test_stiffness_1d_quarter():
    h = fem.build_hierarchy(1, 2, 1)
    a = fem.assemble_stiffness_p1(fem.function_space(h, fem.P1_0)).matrix.toarray()
    np.testing.assert_allclose(a, [[8, -4, 0], [-4, 8, -4], [0, -4, 8]])


def test_stiffness_2d_five_point():
    h = fem.build_hierarchy(2, 2, 1)
    a = fem.assemble_stiffness_p1(fem.function_space(h, fem.P1_0)).matrix.toarray()
    assert np.allclose(np.diag(a), 4.0)
    assert np.allclose(a, a.T) and np.all(np.linalg.eigvalsh(a) > 0)
    # criss triangulation reproduces the 5-point stencil
    assert np.count_nonzero(a[4]) == 5


def test_b_form_column_half():
    h = fem.build_hierarchy(1, 2, 0)
    b = fem.assemble_b_form("1d-derivative", fem.function_space(h, fem.P1_0), fem.function_space(h, fem.P0))
    np.testing.assert_allclose(b.matrix.toarray().ravel(), [1.0, -1.0])


@pytest.mark.parametrize("dim,problem,kind", [(1, "1d-derivative", fem.P0), (2, "2d-gradient", fem.P0_VEC)])
def test_normal_operator_is_stiffness(dim, problem, kind):
    h = fem.build_hierarchy(dim, 2, 2)
    v = fem.function_space(h, fem.P1_0)
    amb = fem.function_space(h, kind)
    b = fem.assemble_b_form(problem, v, amb).matrix
    c = fem.assemble_mass(amb).diagonal
    a = fem.assemble_stiffness_p1(v).matrix
    assert abs(b.T @ sp.diags(1 / c) @ b - a).max() < 1e-12


def test_mass_matrices():
    h = fem.build_hierarchy(2, 2, 1)
    for kind in (fem.P1, fem.P0, fem.P1_VEC):
        space = fem.function_space(h, kind)
        m = fem.assemble_mass(space).matrix
        ones = np.ones(space.ndof)
        assert ones @ m @ ones == pytest.approx(space.ncomp)  # area of the unit square per component
    lumped = fem.assemble_mass(fem.function_space(h, fem.P1), lumped=True).matrix
    assert sp.issparse(lumped) and abs(lumped - sp.diags(lumped.diagonal())).max() == 0


def test_coupling_row_sums_across_levels():
    h = fem.build_hierarchy(2, 2, 2)
    amb = fem.function_space(h, fem.P0_VEC, 1)
    for lvl in range(3):
        tgt = fem.function_space(h, fem.P1_VEC, lvl)
        g = fem.assemble_coupling(h, tgt, amb).matrix
        # sum_j psi_j = 1, so column sums are the element areas
        np.testing.assert_allclose(np.asarray(g.sum(axis=0)).ravel(), np.tile(amb.mesh.areas, 2), atol=1e-15)
    with pytest.raises(IncompatibleSpaces):
        fem.assemble_coupling(h, fem.function_space(h, fem.P1), amb)


def test_coupling_fine_target_equals_quadrature():
    h = fem.build_hierarchy(2, 2, 2)
    p1 = fem.function_space(h, fem.P1_VEC, 2)
    p0 = fem.function_space(h, fem.P0_VEC, 1)
    g = fem.assemble_coupling(h, p1, p0).matrix
    q = np.cos(np.arange(p0.ndof, dtype=float))
    ne = p0.mesh.n_elems

    def pw_const(x):
        e = p0.mesh.locate(x)
        return np.column_stack([q[e], q[ne + e]])

    # q is constant on every fine element, so the fine-mesh rule is exact
    np.testing.assert_allclose(g @ q, fem.moments(p1, pw_const), atol=1e-14)


def test_space_kind_checks():
    h = fem.build_hierarchy(1, 2, 1)
    with pytest.raises(WrongSpaceKind):
        fem.FeSpace("p2", h.finest, 0)
    with pytest.raises(WrongSpaceKind):
        fem.load_vector(fem.function_space(h, fem.P1), lambda x: x[:, 0])


def test_quadrature_exactness():
    for dim, deg in [(1, 5), (2, 5)]:
        h = fem.build_hierarchy(dim, 2, 0)
        mesh = h.finest
        pts, w = fem.quadrature_points(mesh)
        for a in range(deg + 1):
            for b in range(deg + 1 - a if dim == 2 else 1):
                vals = pts[..., 0] ** a * (pts[..., 1] ** b if dim == 2 else 1)
                exact = 1 / (a + 1) / (b + 1)
                assert np.sum(w * vals) == pytest.approx(exact, rel=1e-13)


def test_l2_error_and_moments():
    h = fem.build_hierarchy(1, 2, 2)
    p0 = fem.function_space(h, fem.P0)
    g = fem.moments(p0, lambda x: 0.5 - x[:, 0])
    avg = g / p0.mesh.areas
    assert fem.l2_error(p0, avg, lambda x: 0.5 - x[:, 0]) == pytest.approx(p0.mesh.h / np.sqrt(12), rel=1e-12)
    with pytest.raises(QuadratureUnavailable):
        fem.l2_error(p0, avg, lambda x: 1 / 0)


@pytest.mark.parametrize("dim", [1, 2])
def test_prolongation_matches_matrix(dim):
    h = fem.build_hierarchy(dim, 2, 3)
    rng = np.random.default_rng(1)
    for lvl in range(h.J - 1):
        c = rng.standard_normal(h.dofs(lvl))
        p = fem.prolongation_matrix(h, lvl)
        np.testing.assert_allclose(fem.prolongate(h, lvl, c), p @ c, atol=1e-14)
        f = rng.standard_normal(h.dofs(lvl + 1))
        np.testing.assert_allclose(fem.restrict_functional(h, lvl, f), p.T @ f, atol=1e-14)


def test_prolongation_reproduces_linears():
    h = fem.build_hierarchy(2, 2, 2)
    fn = lambda x: 1 + 2 * x[:, 0] - 3 * x[:, 1]  # noqa: E731
    p = fem.prolongation_matrix(h, 0, 2, boundary=True)
    np.testing.assert_allclose(p @ fn(h.mesh(0).coords), fn(h.mesh(2).coords), atol=1e-13)


@pytest.mark.skipif(kernels.numba_impl is None, reason="numba unavailable")
@settings(max_examples=20, deadline=None)
@given(st.integers(2, 7), st.integers(0, 2**31 - 1))
def test_kernel_parity(k, seed):
    rng = np.random.default_rng(seed)
    n1 = 2**k - 1
    c = rng.standard_normal(n1)
    f = rng.standard_normal(2 * n1 + 1)
    np.testing.assert_allclose(kernels.numba_impl.prolong_1d(c), kernels.numpy_impl.prolong_1d(c), atol=1e-15)
    np.testing.assert_allclose(kernels.numba_impl.restrict_1d(f), kernels.numpy_impl.restrict_1d(f), atol=1e-14)
    nc = min(n1, 15)
    c2 = rng.standard_normal(nc * nc)
    f2 = rng.standard_normal((2 * nc + 1) ** 2)
    np.testing.assert_allclose(kernels.numba_impl.prolong_2d(c2, nc), kernels.numpy_impl.prolong_2d(c2, nc), atol=1e-15)
    np.testing.assert_allclose(kernels.numba_impl.restrict_2d(f2, nc), kernels.numpy_impl.restrict_2d(f2, nc), atol=1e-14)


@pytest.mark.skipif(kernels.numba_impl is None, reason="numba unavailable")
def test_element_data_parity():
    mesh = fem.build_hierarchy(2, 2, 2).finest
    a = kernels.numba_impl.p1_element_data(mesh.coords, mesh.elems)
    b = kernels.numpy_impl.p1_element_data(mesh.coords, mesh.elems)
    for x, y in zip(a, b):
        np.testing.assert_allclose(x, y, atol=1e-13)


def test_backend_flag():
    assert kernels.backend() in ("numba", "numpy")


def test_dump_roundtrip():
    h = fem.build_hierarchy(1, 2, 1)
    a = fem.assemble_stiffness_p1(fem.function_space(h, fem.P1_0))
    buf = io.StringIO()
    fem.dump_matrix(a, buf, "stiffness")
    assert buf.getvalue().splitlines()[0] == "stiffness 3 3 7"
    buf.seek(0)
    assert abs(fem.load_matrix(buf) - a.matrix).max() == 0
    out = io.StringIO()
    fem.dump_mesh(h.finest, out)
    assert out.getvalue().startswith("mesh 1 5 4")
