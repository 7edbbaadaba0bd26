import numpy as np
import pytest

from swiptsim import backend


def test_toy_lp():
    p = backend.ConicSubproblem()
    p.add_reals("p", 1, lb=1.0)
    p.add_objective(p.entry("p"))
    sol = backend.solve_subproblem(p)
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(1.0, abs=1e-7)


def test_infeasible_toy_surfaces_in_status():
    p = backend.ConicSubproblem()
    p.add_reals("p", 1, lb=1.0, ub=0.0)
    p.add_objective(p.entry("p"))
    sol = backend.solve_subproblem(p)
    assert sol.status == "infeasible"


def _min_power_for_sinr(h, rho, gbar, sig2, del2):
    """min ||f||^2 s.t. decoder-branch SINR >= gbar at fixed rho (single user).

    The phase of h^H f is free, so the constraint is a linear floor on the
    real part of the matched projection."""
    p = backend.ConicSubproblem()
    Nt = h.size
    p.add_complex("f", Nt)
    p.add_reals("t", 1, lb=0.0)
    p.add_objective(p.entry("t"))
    p.norm_sq_leq("f", p.entry("t"))
    floor = np.sqrt(gbar * (sig2 + del2 / rho))
    p.add_ineq(p.re_dot("f", h) - floor)
    return backend.solve_subproblem(p)


def test_matched_beam_closed_form_well_scaled():
    rng = np.random.default_rng(1)
    h = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    rho, gbar, sig2, del2 = 0.4, 2.5, 0.3, 0.1
    sol = _min_power_for_sinr(h, rho, gbar, sig2, del2)
    want = gbar * (sig2 + del2 / rho) / np.linalg.norm(h) ** 2
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(want, rel=1e-6)


def test_matched_beam_closed_form_physical_scale():
    rng = np.random.default_rng(2)
    h = 1e-2 * (rng.standard_normal(8) + 1j * rng.standard_normal(8))
    rho, gbar, sig2, del2 = 0.5, 100.0, 1e-10, 1e-8
    sol = _min_power_for_sinr(h, rho, gbar, sig2, del2)
    want = gbar * (sig2 + del2 / rho) / np.linalg.norm(h) ** 2
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(want, rel=1e-4)


def test_weak_duality_certificate():
    rng = np.random.default_rng(3)
    h = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    sol = _min_power_for_sinr(h, 0.5, 1.5, 0.2, 0.1)
    gap = abs(sol.objective - sol.dual_objective)
    assert gap <= 1e-6 * (1.0 + abs(sol.objective))


def test_objective_scaling_invariance():
    def solve(c):
        p = backend.ConicSubproblem()
        p.add_reals("x", 2, lb=[1.0, 2.0])
        p.add_objective(c * (p.entry("x", 0) + p.entry("x", 1)))
        sol = backend.solve_subproblem(p)
        return sol.objective, sol.value("x")

    o1, x1 = solve(1.0)
    o5, x5 = solve(5.0)
    assert o5 == pytest.approx(5.0 * o1, rel=1e-7)
    assert np.allclose(x1, x5, atol=1e-6)


def test_hermitian_psd_against_cvxpy():
    cp = pytest.importorskip("cvxpy")
    rng = np.random.default_rng(4)
    n = 3
    h = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    C = np.outer(h, h.conj())
    p = backend.ConicSubproblem()
    p.add_hermitian("F", n)
    p.add_psd("F")
    p.add_objective(p.trace("F"))
    p.add_ineq(p.herm_form("F", C) - 1.0)
    sol = backend.solve_subproblem(p)

    Fv = cp.Variable((n, n), hermitian=True)
    prob = cp.Problem(
        cp.Minimize(cp.real(cp.trace(Fv))),
        [Fv >> 0, cp.real(cp.trace(C @ Fv)) >= 1],
    )
    prob.solve(solver=cp.CLARABEL)
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(prob.value, rel=1e-6)
    F = sol.value("F")
    assert np.linalg.norm(F - F.conj().T) == 0.0
    assert np.linalg.eigvalsh(F).min() >= -1e-8
    assert np.real(np.trace(C.conj().T @ F)) == pytest.approx(1.0, abs=1e-6)


def test_log_hypograph():
    p = backend.ConicSubproblem()
    p.add_reals("t", 1)
    p.add_reals("g", 1, lb=0.0, ub=4.0)
    p.add_objective(-1.0 * p.entry("t"))
    p.add_log_hyp(p.entry("t"), p.entry("g") + 1.0)
    sol = backend.solve_subproblem(p)
    assert -sol.objective == pytest.approx(np.log(5.0), abs=1e-7)


def test_hyperbolic_product():
    p = backend.ConicSubproblem()
    p.add_reals("x", 1)
    p.add_reals("y", 1, ub=3.0)
    p.add_objective(p.entry("x"))
    p.add_hyperbolic(p.entry("x"), p.entry("y"), 3.0)
    sol = backend.solve_subproblem(p)
    assert sol.objective == pytest.approx(3.0, abs=1e-6)


def test_hyperbolic_balance_equivalence():
    def solve(balance):
        p = backend.ConicSubproblem()
        p.add_reals("x", 1)
        p.add_reals("y", 1, ub=2.0)
        p.add_objective(p.entry("x"))
        p.add_hyperbolic(p.entry("x"), p.entry("y"), 4.0, balance=balance)
        return backend.solve_subproblem(p).objective

    assert solve(1.0) == pytest.approx(solve(7.5), rel=1e-6)


def test_sq_leq_brute_force():
    rng = np.random.default_rng(5)
    a = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    p = backend.ConicSubproblem()
    p.add_complex("f", 3)
    p.add_reals("t", 1, lb=0.0)
    p.add_objective(p.entry("t"))
    p.add_sq_leq([p.dot_complex("f", a)], p.entry("t"))
    p.add_ineq(p.re_dot("f", a) - 2.0)  # forces |a^H f| >= 2
    sol = backend.solve_subproblem(p)
    assert sol.objective == pytest.approx(4.0, rel=1e-6)


def test_variable_units_transparent():
    def solve(unit):
        p = backend.ConicSubproblem()
        p.add_reals("e", 1, lb=0.0, ub=3e-6, unit=unit)
        p.add_objective(-1.0 * p.entry("e"))
        return backend.solve_subproblem(p)

    a, b = solve(None), solve(1e-6)
    # both must land within the absolute duality-gap tolerance
    assert a.objective == pytest.approx(-3e-6, abs=2e-8)
    assert b.objective == pytest.approx(-3e-6, abs=2e-8)
    assert b.value("e")[0] == pytest.approx(3e-6, abs=2e-8)


def test_duals_available_and_signed():
    p = backend.ConicSubproblem()
    p.add_reals("x", 1)
    h = p.add_ineq(p.entry("x") - 2.0)   # x >= 2
    p.add_objective(p.entry("x"))
    sol = backend.solve_subproblem(p)
    dual = sol.dual(h)
    assert dual is not None and dual[0] >= 0.0
    # the active floor prices the objective one-for-one
    assert dual[0] == pytest.approx(1.0, rel=1e-6)
