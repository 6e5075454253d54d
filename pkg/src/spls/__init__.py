"""Saddle point least squares (SPLS) solvers for mixed problems ``b(v, p) = <f, v>``."""
from .analysis import (
    convergence_study,
    dense_reference,
    measure_infsup,
    measure_rh_coercivity,
    predicted_iterations,
    verify_error_estimate,
    verify_iteration_bounds,
)
from .fem import build_hierarchy, function_space
from .precond import bpx, exact_inverse, jacobi, measure_equivalence
from .saddle import (
    SaddleSystem,
    TrialElement,
    TrialSpaceSpec,
    apply_bh,
    apply_bstar,
    build_system,
    check_compatibility,
    schur_apply,
)
from .solvers import pcg_solve, ucg_solve

__version__ = "0.1.0"
