"""Manufactured solutions and the shipped (problem, trial space) fixtures.

Both model forms have sup-sup constant ``M = 1``. By Cauchy-Schwarz,
``|(grad v, q)| <= ||grad v|| ||q||``, and equality is reached at ``q = grad v``.
With ``Q`` chosen as the closure of the gradients (mean-zero functions in 1D,
``grad H^1_0`` in 2D), every manufactured ``p`` below lies in ``Q`` and
solves ``b(v, p) = <f, v>``.
"""
from dataclasses import dataclass

import numpy as np

from . import fem
from .precond import bpx, exact_inverse, jacobi
from .saddle import NO_PROJECTION, PROJECTION, TrialSpaceSpec, build_system

PI = np.pi


@dataclass(frozen=True)
class Solution:
    name: str
    problem: str
    p: object  # callable on points of shape (N, d)
    f: object
    description: str


def _x(pts):
    return pts[:, 0]


SOLUTIONS = (
    Solution("linear", "1d-derivative", lambda x: 0.5 - _x(x), lambda x: np.ones_like(_x(x)),
             "p = 1/2 - x, f = 1"),
    Solution("cosine", "1d-derivative", lambda x: PI * np.cos(PI * _x(x)),
             lambda x: PI**2 * np.sin(PI * _x(x)), "p = pi cos(pi x), f = pi^2 sin(pi x)"),
    Solution("kink", "1d-derivative", lambda x: np.where(_x(x) < 0.5, 2.0, -2.0), None,
             "p = derivative of the hat at 1/2 on the coarsest mesh (lies in M_h)"),
    Solution("sinsin", "2d-gradient",
             lambda x: PI * np.column_stack([np.cos(PI * x[:, 0]) * np.sin(PI * x[:, 1]),
                                             np.sin(PI * x[:, 0]) * np.cos(PI * x[:, 1])]),
             lambda x: 2 * PI**2 * np.sin(PI * x[:, 0]) * np.sin(PI * x[:, 1]),
             "p = grad(sin(pi x) sin(pi y)), f = 2 pi^2 sin(pi x) sin(pi y)"),
)
DEFAULT_SOLUTION = {"1d-derivative": "linear", "2d-gradient": "sinsin"}


def get_solution(problem, name=None):
    name = DEFAULT_SOLUTION[problem] if name is None else name
    for sol in SOLUTIONS:
        if sol.name == name and sol.problem == problem:
            return sol
    raise KeyError(f"no manufactured solution {name!r} for {problem}")


def flux_load(system, p):
    """``f_h`` with ``<f_h, v> = b(v, p)``, from the element moments of ``p``.

    ``grad v`` is piecewise constant, so ``b(v, p)`` only sees the element
    averages of ``p`` and the load is exact up to the moment quadrature.
    """
    g = fem.moments(system.ambient_space, p)
    return system.b_op.matrix.T @ (g / system.c_op.diagonal)


def make_system(problem, J, trial=TrialSpaceSpec(), solution=None):
    """System on level ``J`` with the load of a manufactured solution (name or :class:`Solution`)."""
    system = build_system(problem, J, trial)
    if solution is None:
        return system
    sol = get_solution(problem, solution) if isinstance(solution, str) else solution
    return system.with_rhs(flux_load(system, sol.p))


def make_preconditioner(name, system):
    if name == "exact":
        return exact_inverse(system.a_op)
    if name == "jacobi":
        return jacobi(system.a_op)
    if name == "bpx":
        return bpx(system.hierarchy, finest=system.level)
    raise KeyError(f"unknown preconditioner {name!r}")


@dataclass(frozen=True)
class Fixture:
    name: str
    problem: str
    J: int
    trial: TrialSpaceSpec
    solution: str


FIXTURES = (
    Fixture("1d-noproj", "1d-derivative", 5, TrialSpaceSpec(NO_PROJECTION), "linear"),
    Fixture("2d-noproj", "2d-gradient", 4, TrialSpaceSpec(NO_PROJECTION), "sinsin"),
    Fixture("2d-proj-lumped", "2d-gradient", 4, TrialSpaceSpec(PROJECTION, "p1-vector", "lumped", 1), "sinsin"),
    Fixture("1d-proj-consistent", "1d-derivative", 5, TrialSpaceSpec(PROJECTION, "p1", "consistent", 1), "cosine"),
)
PRECONDITIONERS = ("exact", "jacobi", "bpx")

# coarse P1 target under a finer test mesh: R_h has a kernel on C^{-1} B V_h
DEGENERATE_TRIAL = TrialSpaceSpec(PROJECTION, "p1", "consistent", -1)


def fixture(name):
    for fx in FIXTURES:
        if fx.name == name:
            return fx
    raise KeyError(name)


def fixture_system(fx, J=None):
    return make_system(fx.problem, fx.J if J is None else J, fx.trial, fx.solution)


def combinations():
    """All shipped (fixture, preconditioner name) pairs in a fixed order."""
    return [(fx, pc) for fx in FIXTURES for pc in PRECONDITIONERS]
