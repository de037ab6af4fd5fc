"""Scorecards of analytic properties for solved states and trajectories.

Every check produces one CheckResult.  Property checks report a measured
violation (0 is perfect) that passes when it does not exceed the threshold
tol*(1 + data scale).  Two kinds of rows differ from that:

* condition rows (non-degeneracy, uniqueness hypotheses) record the margin;
  a non-positive margin makes the row inapplicable, never failed;
* the gap-rate row measures an exponent that must reach its threshold.

Inapplicable rows carry the reason their hypotheses fail.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .contact import lewy_stampacchia_violation, membrane_residual, mould_residual
from .discretization import Grid, integrate
from .elliptic import (ConditionReport, EllipticState, RegSchedule, SolverParams, Sources,
                       continuation_solve, nondegeneracy_check, uniqueness_check)
from .quasistatic import (TimeGrid, Trajectory, bounds_lL, chi_time_modulus,
                          interpolant_gap, l1_linf_norm, parabolic_nondegeneracy,
                          parabolic_preconditions, parabolic_uniqueness_check,
                          run_quasistatic, temp_diff_linfty_check, very_weak_residual)
from .thermal import (Coefficients, bounds_mM, check_comparison, coercivity_margin,
                      gamma0, heat_conservation_residual,
                      l1_dependence_slack, linfty_theta1, pair_residual, solve_pair)

__all__ = [
    "CheckResult",
    "VerifyConfig",
    "Perturbation",
    "ELLIPTIC_MANIFEST",
    "QUASISTATIC_MANIFEST",
    "run_elliptic_checks",
    "run_quasistatic_checks",
    "perturbation_contraction",
    "format_checks",
    "all_passed",
]

ELLIPTIC_MANIFEST = (
    "heat_conservation",
    "temperature_bounds",
    "temperature_nonnegativity",
    "comparison_principle",
    "theta1_linfty_bound",
    "temperature_difference_bound",
    "obstacle_feasibility",
    "boundary_traces",
    "membrane_complementarity",
    "lewy_stampacchia",
    "contact_identity",
    "contact_indicator_range",
    "theta_equation_residual",
    "mould_equation_residual",
    "nondegeneracy_sufficient",
    "nondegeneracy_pointwise",
    "uniqueness_condition",
)

QUASISTATIC_MANIFEST = (
    "lL_bounds",
    "linfty_recursion",
    "theta1_linfty_accumulated",
    "step_equation_residual",
    "step_complementarity",
    "step_heat_conservation",
    "chi_time_modulus",
    "interpolant_gap_rate",
    "temperature_difference_bound_parabolic",
    "very_weak_sum",
    "very_weak_difference",
    "parabolic_nondegeneracy_weak",
    "parabolic_nondegeneracy_strong",
    "parabolic_uniqueness",
)

ANCHORS = {
    "heat_conservation": "heat conservation law",
    "temperature_bounds": "temperature max principle m <= theta <= M",
    "temperature_nonnegativity": "non-negative temperatures for non-negative sources",
    "comparison_principle": "comparison principle theta1 >= theta2 >= 0",
    "theta1_linfty_bound": "sup bound ||theta1|| <= ||h1||/c1",
    "temperature_difference_bound": "||theta1 - theta2|| <= M - m",
    "obstacle_feasibility": "membrane below mould u <= Phi",
    "boundary_traces": "zero boundary values of Phi and u",
    "membrane_complementarity": "obstacle complementarity for A_theta",
    "lewy_stampacchia": "Lewy-Stampacchia sandwich min(f, A Phi) <= A u <= f",
    "contact_identity": "int chi (Phi - u)+ = 0",
    "contact_indicator_range": "0 <= chi <= 1",
    "theta_equation_residual": "temperature equations",
    "mould_equation_residual": "mould equation",
    "nondegeneracy_sufficient": "sufficient non-degeneracy condition",
    "nondegeneracy_pointwise": "sufficient condition implies f + div(a grad Phi) > 0",
    "uniqueness_condition": "strong non-degeneracy for uniqueness",
    "lL_bounds": "parabolic max principle l <= theta <= L",
    "linfty_recursion": "per-step sup recursion for theta1",
    "theta1_linfty_accumulated": "||theta1^k|| <= ||h1||_{L1 Linf} + ||theta10||",
    "step_equation_residual": "semi-discrete temperature and mould equations",
    "step_complementarity": "per-step obstacle complementarity",
    "step_heat_conservation": "per-step heat conservation",
    "chi_time_modulus": "time continuity of the contact indicator",
    "interpolant_gap_rate": "constant/affine interpolant gap O(tau^1/2)",
    "temperature_difference_bound_parabolic": "||theta1 - theta2|| <= T||h1 - h2|| + ||theta10 - theta20||",
    "very_weak_sum": "very weak sum relation",
    "very_weak_difference": "very weak difference relation (diagnostic)",
    "parabolic_nondegeneracy_weak": "non-degeneracy for the semi-discrete contact set",
    "parabolic_nondegeneracy_strong": "strong non-degeneracy",
    "parabolic_uniqueness": "strong non-degeneracy for parabolic uniqueness",
    "l1_dependence": "L1 continuous dependence of temperatures",
}

DEFAULT_TOLS = {"lewy_stampacchia": 1e-3}


@dataclass(frozen=True)
class VerifyConfig:
    """``tol`` is the default relative tolerance; ``overrides`` maps a check
    name to its own relative tolerance.  ``gap_rate_min`` is the smallest
    accepted gap decay exponent."""

    tol: float = 1e-6
    overrides: dict = field(default_factory=dict)
    gap_rate_min: float = 0.35

    def tol_for(self, name: str) -> float:
        if name in self.overrides:
            return float(self.overrides[name])
        return DEFAULT_TOLS.get(name, self.tol)


@dataclass(frozen=True)
class CheckResult:
    name: str
    applicable: bool
    measured: float
    threshold: float
    passed: bool
    anchor: str
    reason: str = ""


def _violation(name, measured, scale, cfg: VerifyConfig) -> CheckResult:
    threshold = cfg.tol_for(name) * scale
    measured = float(measured)
    return CheckResult(name, True, measured, threshold, bool(measured <= threshold),
                       ANCHORS[name])


def _skip(name, reason, measured=math.nan) -> CheckResult:
    return CheckResult(name, False, float(measured), math.nan, True, ANCHORS[name], reason)


def _condition(rep: ConditionReport, name: str | None = None) -> CheckResult:
    name = name or rep.name
    if not rep.applicable:
        return _skip(name, rep.reason, rep.margin)
    if not rep.margin > 0:
        return _skip(name, f"condition does not hold (margin {rep.margin:.6g})", rep.margin)
    return CheckResult(name, True, float(rep.margin), 0.0, True, ANCHORS[name])


def _inf(v) -> float:
    v = np.asarray(v)
    return float(np.max(np.abs(v))) if v.size else 0.0


def run_elliptic_checks(grid: Grid, state: EllipticState, coeffs: Coefficients,
                        src: Sources, params: SolverParams = SolverParams(),
                        cfg: VerifyConfig = VerifyConfig()) -> list[CheckResult]:
    th1, th2, phi, u, chi = state.theta1, state.theta2, state.phi, state.u, state.chi
    f, g, h1, h2 = src.f, src.g, src.h1, src.h2
    m, M = bounds_mM(coeffs, h1, h2)
    hscale = 1.0 + _inf(h1) + _inf(h2)
    tscale = 1.0 + max(abs(m), abs(M))
    fscale = 1.0 + _inf(f)
    uscale = 1.0 + _inf(phi) + _inf(u)
    gscale = 1.0 + _inf(g) + coeffs.alpha * _inf(th1 - th2)
    coercive = coercivity_margin(coeffs, float(np.max(chi))) > 0
    delta = params.contact.delta(grid, coeffs, f)
    out = []

    out.append(_violation("heat_conservation", heat_conservation_residual(
        grid, coeffs, th1, th2, h1, h2, chi), hscale, cfg))

    if coercive:
        viol = max(0.0, m - min(th1.min(), th2.min()), max(th1.max(), th2.max()) - M)
        out.append(_violation("temperature_bounds", viol, tscale, cfg))
    else:
        out.append(_skip("temperature_bounds", "coercivity margin not positive"))

    if coercive and np.all(h1 >= 0) and np.all(h2 >= 0):
        viol = max(0.0, -min(th1.min(), th2.min()))
        out.append(_violation("temperature_nonnegativity", viol, tscale, cfg))
    else:
        out.append(_skip("temperature_nonnegativity", "sources not non-negative"))

    comp = check_comparison(th1, th2, coeffs, h1, h2)
    if comp is None:
        out.append(_skip("comparison_principle", "comparison preconditions fail"))
        out.append(_skip("theta1_linfty_bound", "comparison preconditions fail"))
    else:
        out.append(_violation("comparison_principle", comp, tscale, cfg))
        viol = max(0.0, _inf(th1) - linfty_theta1(coeffs, h1))
        out.append(_violation("theta1_linfty_bound", viol, tscale, cfg))

    if coercive:
        viol = max(0.0, _inf(th1 - th2) - (M - m))
        out.append(_violation("temperature_difference_bound", viol, tscale, cfg))
    else:
        out.append(_skip("temperature_difference_bound", "coercivity margin not positive"))

    out.append(_violation("obstacle_feasibility", max(0.0, float(np.max(u - phi))), uscale, cfg))
    bnd = grid.boundary
    out.append(_violation("boundary_traces", max(_inf(phi[bnd]), _inf(u[bnd])), uscale, cfg))
    out.append(_violation("membrane_complementarity",
                          membrane_residual(grid, coeffs, th1, f, phi, u), fscale, cfg))
    out.append(_violation("lewy_stampacchia",
                          lewy_stampacchia_violation(grid, coeffs, th1, u, phi, f, chi),
                          fscale, cfg))

    ident = integrate(grid, chi * np.maximum(phi - u, 0.0))
    out.append(CheckResult("contact_identity", True, ident, delta, bool(ident <= delta),
                           ANCHORS["contact_identity"]))
    out.append(_violation("contact_indicator_range",
                          max(0.0, -float(chi.min()), float(chi.max()) - 1.0), 1.0, cfg))
    out.append(_violation("theta_equation_residual",
                          pair_residual(grid, coeffs, th1, th2, h1, h2, chi), hscale, cfg))
    out.append(_violation("mould_equation_residual",
                          mould_residual(grid, coeffs.alpha, th1, th2, chi, g, phi),
                          gscale, cfg))

    pointwise, sufficient = nondegeneracy_check(grid, state, coeffs, src)
    out.append(_condition(sufficient))
    if sufficient.holds:
        out.append(_violation("nondegeneracy_pointwise", max(0.0, -pointwise.margin),
                              0.0, cfg))
    else:
        out.append(_skip("nondegeneracy_pointwise", "sufficient condition does not hold",
                         pointwise.margin))
    out.append(_condition(uniqueness_check(coeffs, f, g, m, M)))
    return out


def _step_data(traj: Trajectory, k: int):
    """Shifted coefficients and sources of step k as the solver saw them."""
    tau = traj.time.tau
    p1, p2 = traj.theta(k - 1)
    d = traj.steps[k - 1]
    data = Sources.on(traj.grid, d.f, d.g, d.h1 + p1 / tau, d.h2 + p2 / tau)
    return traj.coeffs.shifted(tau), data


def run_quasistatic_checks(traj: Trajectory, schedule: RegSchedule = RegSchedule(),
                           params: SolverParams = SolverParams(),
                           cfg: VerifyConfig = VerifyConfig()) -> list[CheckResult]:
    grid, tg, c, q = traj.grid, traj.time, traj.coeffs, traj.quad_points
    tau, N = tg.tau, tg.N
    src = traj.src
    thetas = [traj.theta(k) for k in range(N + 1)]
    l, L = bounds_lL(grid, c, src, tg, q)
    tscale = 1.0 + max(abs(l), abs(L))
    pre_ok, pre_reason = parabolic_preconditions(grid, c, src, tg, q)
    out = []

    if c.shifted(tau).c0 > 0:
        viol = max(max(0.0, l - min(a.min(), b.min()), max(a.max(), b.max()) - L)
                   for a, b in thetas[1:])
        out.append(_violation("lL_bounds", viol, tscale, cfg))
    else:
        out.append(_skip("lL_bounds", "shifted coercivity margin not positive"))

    if pre_ok:
        viol = 0.0
        for k in range(1, N + 1):
            bound = (tau * _inf(traj.steps[k - 1].h1) + _inf(thetas[k - 1][0])) / (tau * c.c1 + 1)
            viol = max(viol, _inf(thetas[k][0]) - bound)
        out.append(_violation("linfty_recursion", max(0.0, viol), tscale, cfg))
        total = l1_linf_norm(grid, src.h1, tg, q) + _inf(traj.theta10)
        viol = max(0.0, max(_inf(t[0]) for t in thetas[1:]) - total)
        out.append(_violation("theta1_linfty_accumulated", viol, tscale, cfg))
    else:
        out.append(_skip("linfty_recursion", pre_reason))
        out.append(_skip("theta1_linfty_accumulated", pre_reason))

    res = comp = cons = 0.0
    hmax = 0.0
    for k in range(1, N + 1):
        cs, data = _step_data(traj, k)
        s = traj.states[k - 1]
        hmax = max(hmax, _inf(data.h1) + _inf(data.h2))
        res = max(res, pair_residual(grid, cs, s.theta1, s.theta2, data.h1, data.h2, s.chi),
                  mould_residual(grid, cs.alpha, s.theta1, s.theta2, s.chi, data.g, s.phi))
        comp = max(comp, membrane_residual(grid, cs, s.theta1, data.f, s.phi, s.u),
                   float(np.max(s.u - s.phi)))
        cons = max(cons, heat_conservation_residual(grid, cs, s.theta1, s.theta2,
                                                    data.h1, data.h2, s.chi))
    fmax = max(_inf(d.f) for d in traj.steps)
    gmax = max(_inf(d.g) for d in traj.steps)
    out.append(_violation("step_equation_residual", res,
                          1.0 + hmax + gmax + c.alpha * 2 * max(abs(l), abs(L)), cfg))
    out.append(_violation("step_complementarity", max(0.0, comp), 1.0 + fmax, cfg))
    out.append(_violation("step_heat_conservation", cons, 1.0 + hmax, cfg))

    weak, strong = parabolic_nondegeneracy(grid, c, src, tg, q)
    slack = None
    if strong.holds:
        slacks = [chi_time_modulus(traj, k, k + 1) for k in range(1, N)]
        if slacks and all(s is not None for s in slacks):
            slack = min(slacks)
    if slack is None:
        reason = ("strong non-degeneracy does not hold" if not strong.holds
                  else "mu - a alpha L_hat not positive or single step")
        out.append(_skip("chi_time_modulus", reason))
    else:
        out.append(_violation("chi_time_modulus", max(0.0, -slack), 1.0, cfg))

    out.append(_gap_rate(traj, schedule, params, cfg))

    tdiff = temp_diff_linfty_check(traj)
    if tdiff is None:
        out.append(_skip("temperature_difference_bound_parabolic",
                         "needs c1 = c2 and ordered non-negative data"))
    else:
        out.append(_violation("temperature_difference_bound_parabolic", max(0.0, -tdiff),
                              tscale, cfg))

    r_sum, r_diff = very_weak_residual(traj)
    kmax = max(c.kappa1, c.kappa2)
    op = 4.0 * grid.dim * kmax / grid.h**2 + max(c.c1, c.c2) + 1.0 / tau
    vw_scale = (1.0 + c.b1 + c.b2) * (1.0 + hmax + op * max(abs(l), abs(L)))
    out.append(_violation("very_weak_sum", r_sum, vw_scale, cfg))
    out.append(_skip("very_weak_difference", "diagnostic only", r_diff))

    out.append(_condition(weak))
    out.append(_condition(strong))
    out.append(_condition(parabolic_uniqueness_check(grid, c, src, tg, q)))
    return out


def _gap_rate(traj: Trajectory, schedule, params, cfg) -> CheckResult:
    name = "interpolant_gap_rate"
    N = traj.time.N
    if N < 2 or N % 2:
        return _skip(name, "needs an even number of steps >= 2")
    fine = interpolant_gap(traj)
    coarse_traj = run_quasistatic(traj.grid, traj.src, TimeGrid(traj.time.T, N // 2),
                                  traj.coeffs, schedule, params, traj.quad_points)
    coarse = interpolant_gap(coarse_traj)
    tiny = 1e-12 * (1.0 + max(_inf(traj.theta10), _inf(traj.theta20)))
    if fine <= tiny and coarse <= tiny:
        return _skip(name, "trajectory constant in time", 0.0)
    if fine <= tiny:
        rate = math.inf
    elif coarse <= tiny:
        rate = -math.inf
    else:
        rate = math.log2(coarse / fine)
    return CheckResult(name, True, rate, cfg.gap_rate_min, bool(rate >= cfg.gap_rate_min),
                       ANCHORS[name])


@dataclass(frozen=True)
class Perturbation:
    """Additive source changes and, optionally, a prescribed exchange weight
    for the perturbed temperatures (replacing its own contact set)."""

    dh1: np.ndarray | float = 0.0
    dh2: np.ndarray | float = 0.0
    chi: np.ndarray | None = None


def perturbation_contraction(grid: Grid, coeffs: Coefficients, base: Sources,
                             pert: Perturbation,
                             schedule: RegSchedule = RegSchedule(),
                             params: SolverParams = SolverParams(),
                             cfg: VerifyConfig = VerifyConfig(),
                             base_state: EllipticState | None = None) -> CheckResult:
    """L1 dependence slack between a base solve and a perturbed one, and,
    when the uniqueness condition holds, the temperature-difference ratio
    against the gamma0 chain with a factor 2 allowance."""
    name = "l1_dependence"
    if base_state is None:
        base_state = continuation_solve(grid, coeffs, base, schedule, params)
    hat = Sources.on(grid, base.f, base.g, base.h1 + pert.dh1, base.h2 + pert.dh2)
    if pert.chi is None:
        hs = continuation_solve(grid, coeffs, hat, schedule, params, base_state)
        sol_hat, sig_hat = (hs.theta1, hs.theta2), hs.chi
    else:
        sig_hat = np.asarray(pert.chi, dtype=float)
        t1, t2, _ = solve_pair(grid, coeffs, hat.h1, hat.h2, sig_hat, params.thermal_tol)
        sol_hat = (t1, t2)
    sol = (base_state.theta1, base_state.theta2)
    slack = l1_dependence_slack(grid, sol, sol_hat, base.h1, base.h2, hat.h1, hat.h2,
                                base_state.chi, sig_hat, coeffs)
    if slack is None:
        return _skip(name, "gamma_i not positive")
    scale = (1.0 + 1.0 / grid.n) * (1.0 + _inf(base.h1) + _inf(base.h2))
    threshold = cfg.tol_for(name) * scale
    violation = max(0.0, -slack)
    ok = violation <= threshold
    reason = ""
    m, M = bounds_mM(coeffs, base.h1, base.h2)
    if uniqueness_check(coeffs, base.f, base.g, m, M).holds:
        def l1(v):
            return integrate(grid, np.abs(v))
        diff = l1(sol[0] - sol_hat[0]) + l1(sol[1] - sol_hat[1])
        chain = (l1(base.h1 - hat.h1) + l1(base.h2 - hat.h2)
                 + (M - m) * (coeffs.b1 + coeffs.b2) * l1(base_state.chi - sig_hat)
                 ) / gamma0(coeffs)
        ok = ok and diff <= 2.0 * chain + threshold
        reason = f"temperature difference {diff:.6g} vs chain bound {chain:.6g}"
    return CheckResult(name, True, violation, threshold, bool(ok), ANCHORS[name], reason)


def _fmt(v: float) -> str:
    if isinstance(v, float) and math.isnan(v):
        return "nan"
    return f"{v:.17g}"


def format_checks(results: list[CheckResult]) -> str:
    """Scorecard as CSV text; inapplicable rows have pass = n/a."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["name", "applicable", "measured", "threshold", "pass", "anchor"])
    for r in results:
        passed = ("true" if r.passed else "false") if r.applicable else "n/a"
        w.writerow([r.name, "true" if r.applicable else "false", _fmt(r.measured),
                    _fmt(r.threshold), passed, r.anchor])
    return buf.getvalue()


def all_passed(results: list[CheckResult]) -> bool:
    return all(r.passed for r in results if r.applicable)
