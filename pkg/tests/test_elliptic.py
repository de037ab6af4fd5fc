import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thermoqvi.contact import solve_membrane, solve_mould
from thermoqvi.discretization import build_grid, integrate
from thermoqvi.elliptic import (EllipticState, RegSchedule, SolverParams, Sources, chi_eps,
                                continuation_solve, cross_solution_agreement,
                                fixed_point_solve, nondegeneracy_check, uniqueness_check)
from thermoqvi.thermal import CoefficientFunction, Coefficients, solve_pair

from conftest import benchmark_coeffs, benchmark_sources

FIELDS = ("theta1", "theta2", "phi", "u", "chi")


def test_chi_eps_examples():
    assert chi_eps(-1.0, 0.3) == 1.0
    assert chi_eps(0.5, 1.0) == 0.5
    assert chi_eps(2.0, 1.0) == 0.0
    with pytest.raises(ValueError):
        chi_eps(0.0, 0.0)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, 10.0), st.floats(1e-6, 5.0), st.floats(0.01, 0.99))
def test_chi_eps_properties(s, eps, shrink):
    v = float(chi_eps(s, eps))
    assert 0.0 <= v <= 1.0
    assert v * s <= eps * 0.25 + 1e-15  # C_nu = 1/4
    assert float(chi_eps(s, eps * shrink)) <= v  # monotone in eps for s >= 0


def test_schedule_levels_and_validation():
    g = build_grid(1, 4)
    levels = RegSchedule().levels(g)
    assert levels[0] == 1.0 and levels[-1] == g.h**2
    assert all(a > b for a, b in zip(levels, levels[1:]))
    with pytest.raises(ValueError):
        RegSchedule(eps0=0.1, eps_min=0.2)
    with pytest.raises(ValueError):
        RegSchedule(factor=1.0)


def test_decoupled_converges_in_two_sweeps():
    g = build_grid(1, 32)
    c = Coefficients(b1=0, b2=0, alpha=0)
    src = Sources.on(g, f=10.0, g=1.0, h1=2.0, h2=1.0)
    state, rec = fixed_point_solve(g, c, src, 1e-3)
    assert rec.converged and rec.iterations <= 2
    t1, t2, _ = solve_pair(g, c, 2.0, 1.0, 0.0)
    phi, _ = solve_mould(g, 0.0, t1, t2, g.zeros(), 1.0)
    u, _ = solve_membrane(g, c, t1, 10.0, phi)
    for a, b in ((state.theta1, t1), (state.phi, phi), (state.u, u)):
        np.testing.assert_allclose(a, b, atol=1e-12)


def test_zero_data_gives_zero_state():
    g = build_grid(2, 8)
    s = continuation_solve(g, Coefficients(b1=1, b2=1, alpha=1), Sources.on(g))
    for k in ("theta1", "theta2", "phi", "u"):
        np.testing.assert_array_equal(getattr(s, k), 0.0)


def test_damping_independence_on_benchmark():
    g = build_grid(1, 64)
    c, src = benchmark_coeffs(), benchmark_sources(g)
    a, ra = fixed_point_solve(g, c, src, 1e-3, SolverParams(damping=1.0))
    b, rb = fixed_point_solve(g, c, src, 1e-3, SolverParams(damping=0.5))
    assert ra.converged and rb.converged
    mid = g.size // 2
    assert abs(a.u[mid] - b.u[mid]) <= 1e-6
    for k in FIELDS:
        assert np.max(np.abs(getattr(a, k) - getattr(b, k))) <= 1e-6


def test_benchmark_state_invariants(bench_grid, bench_state):
    g, s = bench_grid, bench_state
    rep = s.report
    assert rep.converged and rep.regular
    assert np.all((s.chi == 0) | (s.chi == 1))
    assert np.all(s.u <= s.phi)
    assert np.all(s.phi[g.boundary] == 0) and np.all(s.u[g.boundary] == 0)
    assert np.max(s.chi * (s.phi - s.u)) <= rep.delta_contact
    assert integrate(g, s.chi * np.maximum(s.phi - s.u, 0)) <= rep.delta_contact
    assert max(rep.residuals.values()) <= 1e-8
    assert rep.chi_eps is not None and rep.chi_eps.shape == s.chi.shape
    np.testing.assert_array_equal(s.chi, s.chi[::-1])  # symmetric contact set


def test_benchmark_temperatures_closed_form(bench_state):
    # full contact: the exchange weight is 1 everywhere, giving the algebraic solution
    np.testing.assert_allclose(bench_state.theta1, 2.0, atol=1e-9)
    np.testing.assert_allclose(bench_state.theta2, 1.0, atol=1e-9)


def test_decoupled_continuation_identical_across_eps():
    g = build_grid(1, 32)
    c = Coefficients()
    src = Sources.on(g, f=20.0, g=1.0, h1=1.0)
    states = [fixed_point_solve(g, c, src, eps)[0] for eps in (1.0, 0.1, 1e-3)]
    for s in states[1:]:
        for k in ("theta1", "theta2", "phi", "u"):
            np.testing.assert_allclose(getattr(s, k), getattr(states[0], k), atol=1e-12)


def test_contact_set_stabilises_under_refinement():
    g = build_grid(1, 32)
    c = Coefficients(b1=1, b2=1, alpha=1)
    src = Sources.on(g, f=4.0, g=30 * np.cos(2 * np.pi * g.x), h1=3.0)
    coarse = continuation_solve(g, c, src, RegSchedule(eps_min=0.5 * g.h))
    fine = continuation_solve(g, c, src, RegSchedule(eps_min=g.h**2))
    assert coarse.report.regular and fine.report.regular
    np.testing.assert_array_equal(coarse.chi, fine.chi)
    assert 0 < fine.chi.sum() < g.size


def test_nondegeneracy_sufficient_formula():
    g = build_grid(1, 8)
    c = Coefficients(alpha=1.0)
    src = Sources.on(g, f=5.0, g=0.0, h1=3.0, h2=0.0)
    _, suff = nondegeneracy_check(g, EllipticState.zero(g), c, src)
    assert suff.applicable and suff.margin == pytest.approx(2.0)
    _, suff0 = nondegeneracy_check(g, EllipticState.zero(g), c,
                                   Sources.on(g, f=0.0, h1=3.0))
    assert suff0.margin < 0 and not suff0.holds


def test_nondegeneracy_pointwise_positive_on_benchmark(bench_grid, bench_state):
    pw, suff = nondegeneracy_check(bench_grid, bench_state, benchmark_coeffs(),
                                   benchmark_sources(bench_grid))
    assert pw.margin > 0 and suff.margin > 0


def test_nondegeneracy_gated_by_preconditions():
    g = build_grid(1, 8)
    pw, suff = nondegeneracy_check(g, EllipticState.zero(g), Coefficients(c1=2.0),
                                   Sources.on(g, f=5.0, h1=1.0))
    assert not pw.applicable and not suff.applicable


def test_uniqueness_formula():
    c = Coefficients(b1=1, b2=1, alpha=1)
    r = uniqueness_check(c, 13.0, 0.0, 0.0, 3.0)
    assert r.rhs == pytest.approx(12.0) and r.margin == pytest.approx(1.0)
    r0 = uniqueness_check(Coefficients(alpha=1), 0.0, 0.0, 0.0, 3.0)
    assert r0.rhs == pytest.approx(2 * 3.0)
    a = CoefficientFunction.table([0, 1], [1, 2])
    assert not uniqueness_check(Coefficients(a=a), 13.0, 0.0, 0.0, 3.0).applicable


def test_cross_agreement_decoupled():
    g = build_grid(1, 32)
    src = Sources.on(g, f=20.0, g=1.0, h1=1.0)
    assert cross_solution_agreement(g, Coefficients(), src) <= 1e-9


def test_rejects_noncoercive_coefficients():
    g = build_grid(1, 4)
    c = Coefficients(c1=1, c2=1, b1=9, b2=1)
    with pytest.raises(ValueError):
        continuation_solve(g, c, Sources.on(g))


def test_nonconvergence_is_reported():
    g = build_grid(1, 32)
    c = Coefficients(b1=1, b2=1, alpha=1)
    src = Sources.on(g, f=4.0, g=30 * np.cos(2 * np.pi * g.x), h1=3.0)
    s = continuation_solve(g, c, src, params=SolverParams(max_outer=1))
    assert not s.report.converged
    assert all(np.isfinite(v) for v in s.report.residuals.values())
