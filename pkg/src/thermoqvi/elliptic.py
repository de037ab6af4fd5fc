"""Stationary coupled system: temperatures, mould and membrane.

The contact indicator is relaxed by chi_eps(Phi - u); for fixed eps the map
(u, Phi) -> temperatures -> mould -> membrane is iterated to a fixed point,
eps is driven down geometrically with warm starts, and finally the relaxed
weight is replaced by the binary contact set and the system re-solved until
that set stops changing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .contact import (ContactParams, contact_set, membrane_residual, mould_residual,
                      solve_membrane, solve_mould)
from .discretization import Grid, assemble_Atheta, integrate
from .linalg import cg_solve
from .thermal import (Coefficients, bounds_mM, comparison_preconditions, gamma0,
                      heat_conservation_residual, pair_residual, solve_pair)

__all__ = [
    "Sources",
    "RegSchedule",
    "SolverParams",
    "StageRecord",
    "SolveReport",
    "ConditionReport",
    "EllipticState",
    "chi_eps",
    "fixed_point_solve",
    "continuation_solve",
    "nondegeneracy_check",
    "uniqueness_check",
    "unconstrained_start",
    "cross_solution_agreement",
    "state_residuals",
]


def _nodal(grid: Grid, v) -> np.ndarray:
    a = np.array(np.broadcast_to(np.asarray(v, dtype=float), (grid.size,)))
    if not np.all(np.isfinite(a)):
        raise ValueError("source contains non-finite values")
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Sources:
    f: np.ndarray
    g: np.ndarray
    h1: np.ndarray
    h2: np.ndarray

    @classmethod
    def on(cls, grid: Grid, f=0.0, g=0.0, h1=0.0, h2=0.0) -> "Sources":
        return cls(*(_nodal(grid, v) for v in (f, g, h1, h2)))


@dataclass(frozen=True)
class RegSchedule:
    """Geometric eps schedule; ``eps_min=None`` means h^2 of the grid used."""

    eps0: float = 1.0
    factor: float = 0.5
    eps_min: float | None = None
    c_nu: float = 0.25

    def __post_init__(self):
        if not self.eps0 > 0:
            raise ValueError("eps0 must be positive")
        if not 0.0 < self.factor < 1.0:
            raise ValueError("schedule factor must lie in (0, 1)")
        if self.eps_min is not None:
            if not self.eps_min > 0:
                raise ValueError("eps_min must be positive")
            if self.eps_min > self.eps0:
                raise ValueError("eps_min exceeds eps0")

    def levels(self, grid: Grid) -> list[float]:
        eps_min = grid.h**2 if self.eps_min is None else self.eps_min
        eps_min = min(eps_min, self.eps0)
        out = []
        e = self.eps0
        while e > eps_min * (1 + 1e-12):
            out.append(e)
            e *= self.factor
        out.append(eps_min)
        return out


@dataclass(frozen=True)
class SolverParams:
    tol: float = 1e-9
    damping: float = 1.0
    max_outer: int = 500
    thermal_tol: float = 1e-11
    mould_tol: float = 1e-12
    max_polish: int = 50
    contact: ContactParams = field(default_factory=ContactParams)

    def __post_init__(self):
        if not 0.0 < self.damping <= 1.0:
            raise ValueError("damping must lie in (0, 1]")
        if not self.tol > 0:
            raise ValueError("tolerance must be positive")
        if self.max_outer < 1:
            raise ValueError("max_outer must be at least 1")


@dataclass(frozen=True)
class ConditionReport:
    """margin = lhs - rhs; meaningful only when ``applicable``."""

    name: str
    lhs: float
    rhs: float
    margin: float
    applicable: bool
    k_grad: float = 0.0
    reason: str = ""

    @property
    def holds(self) -> bool:
        return self.applicable and self.margin > 0


@dataclass(frozen=True)
class StageRecord:
    eps: float
    iterations: int
    residual: float
    damping: float
    converged: bool


@dataclass(frozen=True)
class SolveReport:
    stages: tuple[StageRecord, ...]
    fixed_point_residual: float
    eps_reached: float
    converged: bool
    polish_iterations: int
    regular: bool
    delta_contact: float
    residuals: dict
    chi_eps: np.ndarray | None = None
    nondegeneracy: tuple[ConditionReport, ConditionReport] | None = None
    uniqueness: ConditionReport | None = None


@dataclass(frozen=True)
class EllipticState:
    theta1: np.ndarray
    theta2: np.ndarray
    phi: np.ndarray
    u: np.ndarray
    chi: np.ndarray
    report: SolveReport | None = None

    def __post_init__(self):
        for name in ("theta1", "theta2", "phi", "u", "chi"):
            a = np.array(getattr(self, name), dtype=float)
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @classmethod
    def zero(cls, grid: Grid) -> "EllipticState":
        z = grid.zeros()
        return cls(z, z, z, z, z)


def chi_eps(s, eps: float):
    """Relaxed contact indicator clip(1 - s/eps, 0, 1)."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    return np.clip(1.0 - np.asarray(s, dtype=float) / eps, 0.0, 1.0)


def _check_c0(coeffs: Coefficients):
    if coeffs.c0 <= 0:
        raise ValueError(f"coercivity constant c0 = {coeffs.c0} is not positive")


def _sweep(grid, coeffs, src, sigma, params, theta, u0):
    t1, t2, _ = solve_pair(grid, coeffs, src.h1, src.h2, sigma, params.thermal_tol,
                           init=theta)
    phi, _ = solve_mould(grid, coeffs.alpha, t1, t2, sigma, src.g, params.mould_tol)
    u, stats = solve_membrane(grid, coeffs, t1, src.f, phi, params.contact, u0)
    return t1, t2, phi, u, stats


def fixed_point_solve(grid: Grid, coeffs: Coefficients, src: Sources, eps: float,
                      params: SolverParams = SolverParams(),
                      init: EllipticState | None = None):
    """Picard iteration of the relaxed map at fixed eps.

    Returns (state, StageRecord).  ``state.chi`` is the relaxed weight used
    for the returned temperatures and mould.
    """
    _check_c0(coeffs)
    init = EllipticState.zero(grid) if init is None else init
    w = np.array(init.u)
    ph = np.array(init.phi)
    theta = (init.theta1, init.theta2)
    lam = params.damping
    prev = np.inf
    converged = False
    res = np.inf
    it = 0
    for it in range(1, params.max_outer + 1):
        sigma = chi_eps(ph - w, eps)
        t1, t2, phi, u, _ = _sweep(grid, coeffs, src, sigma, params, theta, w)
        theta = (t1, t2)
        scale = 1.0 + max(np.max(np.abs(phi)), np.max(np.abs(u)))
        res = max(np.max(np.abs(u - w)), np.max(np.abs(phi - ph))) / scale
        if res <= params.tol:
            converged = True
            break
        if res > prev and lam > 1.0 / 64:
            lam *= 0.5
        prev = res
        w = (1 - lam) * w + lam * u
        ph = (1 - lam) * ph + lam * phi
    state = EllipticState(t1, t2, phi, u, sigma)
    return state, StageRecord(float(eps), it, float(res), lam, converged)


def state_residuals(grid: Grid, coeffs: Coefficients, src: Sources, state,
                    params: SolverParams = SolverParams()) -> dict:
    chi = state.chi
    return {
        "theta": pair_residual(grid, coeffs, state.theta1, state.theta2, src.h1, src.h2, chi),
        "mould": mould_residual(grid, coeffs.alpha, state.theta1, state.theta2, chi,
                                src.g, state.phi),
        "membrane": membrane_residual(grid, coeffs, state.theta1, src.f, state.phi, state.u),
        "conservation": heat_conservation_residual(grid, coeffs, state.theta1, state.theta2,
                                                   src.h1, src.h2, chi),
        "contact_identity": integrate(grid, chi * np.maximum(state.phi - state.u, 0.0)),
    }


def continuation_solve(grid: Grid, coeffs: Coefficients, src: Sources,
                       schedule: RegSchedule = RegSchedule(),
                       params: SolverParams = SolverParams(),
                       init: EllipticState | None = None) -> EllipticState:
    _check_c0(coeffs)
    state = init
    stages = []
    for eps in schedule.levels(grid):
        state, rec = fixed_point_solve(grid, coeffs, src, eps, params, state)
        stages.append(rec)
    chi_relaxed = state.chi
    delta = params.contact.delta(grid, coeffs, src.f)

    # Replace the relaxed weight by the binary contact set until it is stable.
    chi = contact_set(state.u, state.phi, delta)
    theta = (state.theta1, state.theta2)
    u = state.u
    regular = False
    polish = 0
    for polish in range(1, params.max_polish + 1):
        t1, t2, phi, u, _ = _sweep(grid, coeffs, src, chi, params, theta, u)
        theta = (t1, t2)
        new = contact_set(u, phi, delta)
        if np.array_equal(new, chi):
            regular = True
            break
        chi = new
    final = EllipticState(t1, t2, phi, u, chi)
    residuals = state_residuals(grid, coeffs, src, final, params)
    report = SolveReport(
        stages=tuple(stages),
        fixed_point_residual=stages[-1].residual,
        eps_reached=stages[-1].eps,
        converged=all(s.converged for s in stages),
        polish_iterations=polish,
        regular=regular,
        delta_contact=delta,
        residuals=residuals,
        chi_eps=chi_relaxed,
        nondegeneracy=nondegeneracy_check(grid, final, coeffs, src),
        uniqueness=uniqueness_check(coeffs, src.f, src.g, *bounds_mM(coeffs, src.h1, src.h2)),
    )
    return EllipticState(t1, t2, phi, u, chi, report)


def _grad_dot(grid: Grid, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ga = np.gradient(grid.reshape(a), grid.h)
    gb = np.gradient(grid.reshape(b), grid.h)
    if grid.dim == 1:
        ga, gb = [ga], [gb]
    return sum(x * y for x, y in zip(ga, gb)).ravel()


def nondegeneracy_check(grid: Grid, state, coeffs: Coefficients, src: Sources):
    """Returns (pointwise, sufficient) condition reports.

    pointwise: min over interior nodes of f - A_theta Phi.
    sufficient: min(f - lam2 g+ + lam1 g-) against alpha lam2 (M-m) + lip K_grad,
    with K_grad = max |grad theta1 . grad Phi| when a is not constant (a
    discrete surrogate for the gradient constant).
    """
    a = coeffs.a
    applicable = comparison_preconditions(coeffs, src.h1, src.h2)
    reason = "" if applicable else "comparison preconditions fail"
    idx = grid.interior
    A = assemble_Atheta(grid, a, state.theta1)
    pw = np.asarray(src.f)[idx] - A @ np.asarray(state.phi)[idx]
    lhs_pw = float(pw.min())
    pointwise = ConditionReport("nondegeneracy_pointwise", lhs_pw, 0.0, lhs_pw,
                                applicable, 0.0, reason)
    m, M = bounds_mM(coeffs, src.h1, src.h2)
    g = np.asarray(src.g)
    lhs = float(np.min(src.f - a.lam2 * np.maximum(g, 0) + a.lam1 * np.maximum(-g, 0)))
    k_grad = 0.0 if a.is_constant else float(np.max(np.abs(
        _grad_dot(grid, state.theta1, state.phi))))
    rhs = coeffs.alpha * a.lam2 * (M - m) + a.lip * k_grad
    sufficient = ConditionReport("nondegeneracy_sufficient", lhs, rhs, lhs - rhs,
                                 applicable, k_grad, reason)
    return pointwise, sufficient


def uniqueness_check(coeffs: Coefficients, f, g, m: float, M: float) -> ConditionReport:
    """f > a g + a alpha (M-m)(2 + (b1+b2)/gamma0), constant a only."""
    name = "uniqueness_condition"
    if not coeffs.a.is_constant:
        return ConditionReport(name, np.nan, np.nan, np.nan, False, 0.0,
                               "coefficient a is not constant")
    g0 = gamma0(coeffs)
    if g0 <= 0:
        return ConditionReport(name, np.nan, np.nan, np.nan, False, 0.0,
                               "gamma0 is not positive")
    a = coeffs.a.value
    lhs = float(np.min(np.asarray(f) - a * np.asarray(g)))
    rhs = a * coeffs.alpha * (M - m) * (2.0 + (coeffs.b1 + coeffs.b2) / g0)
    return ConditionReport(name, lhs, rhs, lhs - rhs, True)


def unconstrained_start(grid: Grid, coeffs: Coefficients, src: Sources,
                        params: SolverParams = SolverParams()) -> EllipticState:
    """Initial guess without contact: sigma = 0 temperatures and mould, and
    the membrane solved with no obstacle."""
    z = grid.zeros()
    t1, t2, _ = solve_pair(grid, coeffs, src.h1, src.h2, z, params.thermal_tol)
    phi, _ = solve_mould(grid, coeffs.alpha, t1, t2, z, src.g, params.mould_tol)
    idx = grid.interior
    x, _ = cg_solve(assemble_Atheta(grid, coeffs.a, t1), np.asarray(src.f)[idx],
                    params.mould_tol)
    u = grid.zeros()
    u[idx] = x
    return EllipticState(t1, t2, phi, u, z)


def cross_solution_agreement(grid: Grid, coeffs: Coefficients, src: Sources,
                             schedule: RegSchedule = RegSchedule(),
                             params: SolverParams = SolverParams()) -> float:
    """Max field discrepancy between continuation runs started from the zero
    state and from the unconstrained-membrane state."""
    s0 = continuation_solve(grid, coeffs, src, schedule, params)
    s1 = continuation_solve(grid, coeffs, src, schedule, params,
                            unconstrained_start(grid, coeffs, src, params))
    return float(max(np.max(np.abs(getattr(s0, k) - getattr(s1, k)))
                     for k in ("theta1", "theta2", "phi", "u", "chi")))
