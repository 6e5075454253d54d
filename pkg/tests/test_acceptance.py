"""Acceptance gate: one check per exit criterion, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py`` (lines appear in the terminal
summary) or directly with ``python tests/test_acceptance.py``.
"""
import functools
import math
import time

import numpy as np
import pytest

from spls import analysis, fem, fixtures
from spls.precond import exact_inverse, measure_equivalence
from spls.saddle import PROJECTION, TrialSpaceSpec
from spls.solvers import pcg_solve, ucg_solve

pytestmark = pytest.mark.acceptance

RESULTS = {}
SESSION_START = time.perf_counter()
TOL = 1e-10


@functools.lru_cache(maxsize=None)
def shipped_run(fx_name, pc_name):
    """System, report, dense reference and a PCG run with reference errors for one combination."""
    fx = fixtures.fixture(fx_name)
    system = fixtures.fixture_system(fx)
    precond = fixtures.make_preconditioner(pc_name, system)
    report = analysis.measure_infsup(system, precond)
    reference = analysis.dense_reference(system, precond)
    run = pcg_solve(system, precond, tol=TOL, reference=reference)
    return system, precond, report, reference, run


def combos():
    return [(fx.name, pc) for fx, pc in fixtures.combinations()]


def record(number, passed, detail):
    RESULTS[number] = (bool(passed), detail)
    return passed, detail


def criterion_1():
    worst, t0 = 0.0, time.perf_counter()
    for problem, J, name in [("1d-derivative", 7, "linear"), ("1d-derivative", 7, "cosine"),
                             ("2d-gradient", 5, "sinsin")]:
        s = fixtures.make_system(problem, J, TrialSpaceSpec(), name)
        run = ucg_solve(s, tol=TOL)
        p = fixtures.get_solution(problem, name).p
        err = fem.l2_error(s.trial_space, run.p_h.coeffs, p)
        _, best = analysis.best_approximation(s, p)
        worst = max(worst, abs(err - best) / best)
    elapsed = time.perf_counter() - t0
    return record(1, worst <= 1e-10 and elapsed < 10, f"max |err-best|/best = {worst:.2e}, {elapsed:.2f} s")


def criterion_2():
    iters, spread = [], 0.0
    for J in (3, 4, 5, 6):
        s = fixtures.make_system("1d-derivative", J, TrialSpaceSpec(), "linear")
        iters.append((s.n_test, ucg_solve(s, tol=TOL).history.iterations))
        lam, _, _ = s.trial_pencil()
        spread = max(spread, np.max(np.abs(lam - 1)))
    ok = all(it == 1 for _, it in iters) and spread < 1e-10
    return record(2, ok, f"(n, iters) = {iters}, max |sigma(S_h) - 1| = {spread:.1e}")


def criterion_3():
    worst = max(analysis.check_kappa_product(shipped_run(*c)[2]).worst for c in combos())
    return record(3, worst <= 1e-8, f"max (kappa~ - kappa*kappa_PA)/bound = {worst:.2e} over 12 runs")


def _iteration_checks(name):
    out = []
    for c in combos():
        s, p, rep, ref, run = shipped_run(*c)
        out += [chk for chk in analysis.verify_iteration_bounds(run.history, rep, ref) if chk.name in name]
    return out


def criterion_4():
    checks = _iteration_checks(("p_sandwich", "u_sandwich"))
    ok = all(c.passed for c in checks)
    return record(4, ok, f"{sum(c.passed for c in checks)}/{len(checks)} sandwiches hold, worst margin {max(c.worst for c in checks):.2e}")


def criterion_5():
    checks = _iteration_checks(("cg_rate",))
    ok = all(c.passed for c in checks)
    return record(5, ok, f"{sum(c.passed for c in checks)}/{len(checks)} runs within 2 rho^j, worst margin {max(c.worst for c in checks):.2e}")


def criterion_6():
    failures, n = [], 0
    for fx_name, pc in combos():
        if pc == "exact":
            continue
        s, p, rep, ref, run = shipped_run(fx_name, pc)
        fx = fixtures.fixture(fx_name)
        est = analysis.verify_error_estimate(s, run, fixtures.get_solution(fx.problem, fx.solution).p, rep)
        n += 1
        if not est.holds:
            failures.append((fx_name, pc))
    return record(6, not failures, f"{n - len(failures)}/{n} Jacobi/BPX runs bracketed" + (f", failing {failures}" if failures else ""))


def criterion_7():
    checks = [analysis.check_tilde_bounds(shipped_run(*c)[2]) for c in combos()]
    return record(7, all(c.passed for c in checks), f"worst relative margin {max(c.worst for c in checks):.2e} over 12 runs")


def criterion_8():
    kappas, iters = {}, {}
    for J in range(2, 9):
        s = fixtures.make_system("1d-derivative", J, TrialSpaceSpec(), "linear")
        p = fixtures.make_preconditioner("bpx", s)
        kappas[J] = measure_equivalence(p, s.a_op).kappa
        iters[J] = pcg_solve(s, p, tol=TOL).history.iterations
    growth = kappas[8] / kappas[7] - 1
    kappa_ok = growth < 0.05
    iters_ok = abs(iters[8] - iters[7]) <= 2
    detail = (f"kappa(PA) J=7 {kappas[7]:.4f}, J=8 {kappas[8]:.4f} (+{100 * growth:.2f}%, limit 5%); "
              f"iters J=7 {iters[7]}, J=8 {iters[8]}")
    record(8, kappa_ok and iters_ok, detail)
    return kappa_ok, iters_ok, detail


def criterion_9():
    fx = fixtures.fixture("2d-proj-lumped")
    ct, chain = [], True
    for J in range(2, 6):
        co = analysis.measure_rh_coercivity(fixtures.fixture_system(fx, J))
        ct.append(co.c_tilde)
        chain &= co.chain_holds
    for J in range(2, 6):
        chain &= analysis.measure_rh_coercivity(fixtures.fixture_system(fixtures.fixture("1d-proj-consistent"), J)).chain_holds
    variation = max(ct) / min(ct) - 1
    return record(9, chain and variation <= 0.2,
                  f"chain m_h >= c~ m_h0 at every level: {chain}; c~ (2D, J=2..5) = "
                  f"{', '.join(f'{c:.4f}' for c in ct)}, variation {100 * variation:.1f}%")


def criterion_10():
    errs = []
    for J in range(3, 8):
        s = fixtures.make_system("1d-derivative", J, TrialSpaceSpec(), "linear")
        errs.append(fem.l2_error(s.trial_space, ucg_solve(s, tol=TOL).p_h.coeffs, fixtures.get_solution("1d-derivative").p))
    ratios = [a / b for a, b in zip(errs, errs[1:])]
    ok = all(1.9 <= r <= 2.1 for r in ratios)
    return record(10, ok, "err_p ratios " + ", ".join(f"{r:.4f}" for r in ratios))


def criterion_11():
    same = []
    for fx in fixtures.FIXTURES:
        s = fixtures.fixture_system(fx)
        a = ucg_solve(s, tol=TOL)
        b = pcg_solve(s, exact_inverse(s.a_op), tol=TOL)
        same.append(a.history.records == b.history.records and np.array_equal(a.p_h.coeffs, b.p_h.coeffs)
                    and np.array_equal(a.u_h, b.u_h))
    return record(11, all(same), f"{sum(same)}/{len(same)} fixtures bitwise identical")


def test_criterion_1_no_projection_optimality():
    assert criterion_1()[0], RESULTS[1][1]


def test_criterion_2_single_iteration():
    assert criterion_2()[0], RESULTS[2][1]


def test_criterion_3_condition_number_product():
    assert criterion_3()[0], RESULTS[3][1]


def test_criterion_4_iteration_sandwich():
    assert criterion_4()[0], RESULTS[4][1]


def test_criterion_5_cg_rate():
    assert criterion_5()[0], RESULTS[5][1]


def test_criterion_6_error_estimate():
    assert criterion_6()[0], RESULTS[6][1]


def test_criterion_7_tilde_bounds():
    assert criterion_7()[0], RESULTS[7][1]


def test_criterion_8_bpx_kappa_growth():
    kappa_ok, _, detail = criterion_8()
    assert kappa_ok, detail


def test_criterion_8_bpx_iteration_counts():
    _, iters_ok, detail = criterion_8()
    assert iters_ok, detail


def test_criterion_9_rh_coercivity():
    assert criterion_9()[0], RESULTS[9][1]


def test_criterion_10_first_order():
    assert criterion_10()[0], RESULTS[10][1]


def test_criterion_11_solver_identity():
    assert criterion_11()[0], RESULTS[11][1]


def summary_lines():
    return [f"criterion {n:2d} {'PASS' if ok else 'FAIL'}: {detail}" for n, (ok, detail) in sorted(RESULTS.items())]


if __name__ == "__main__":
    for fn in (criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7,
               criterion_8, criterion_9, criterion_10, criterion_11):
        fn()
    print("\n".join(summary_lines()))
    print(f"elapsed {time.perf_counter() - SESSION_START:.1f} s")
