"""Quasistatic evolution by implicit Euler: each step is a stationary coupled
problem with reaction constants c_i + 1/tau and sources h_i^k + theta_i^{k-1}/tau,
where h_i^k etc. are interval averages of the time-dependent data.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .discretization import Grid, assemble_Atheta, assemble_neumann_helmholtz, integrate
from .elliptic import (ConditionReport, EllipticState, RegSchedule, SolverParams, Sources,
                       continuation_solve)
from .thermal import Coefficients, gamma0

__all__ = [
    "TimeGrid",
    "TimeSources",
    "Trajectory",
    "clement_sources",
    "quasistatic_step",
    "run_quasistatic",
    "interpolants",
    "interpolant_gap",
    "bounds_lL",
    "l1_linf_norm",
    "parabolic_preconditions",
    "parabolic_nondegeneracy",
    "parabolic_uniqueness_check",
    "mu_estimate",
    "chi_time_modulus",
    "temp_diff_linfty_check",
    "very_weak_residual",
]

Generator = Callable[[float], np.ndarray]


@dataclass(frozen=True)
class TimeGrid:
    T: float
    N: int

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("time horizon must be positive")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"number of time steps must be >= 1, got {self.N}")

    @property
    def tau(self) -> float:
        return self.T / self.N

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.N + 1) * self.tau

    def interval(self, k: int) -> tuple[float, float]:
        return (k - 1) * self.tau, k * self.tau


@dataclass(frozen=True)
class TimeSources:
    """Time-dependent data: each generator maps t to nodal values (or a
    scalar, broadcast over the grid)."""

    f: Generator
    g: Generator
    h1: Generator
    h2: Generator
    theta10: np.ndarray
    theta20: np.ndarray

    @classmethod
    def steady(cls, src: Sources, theta10, theta20) -> "TimeSources":
        return cls(lambda t: src.f, lambda t: src.g, lambda t: src.h1, lambda t: src.h2,
                   np.asarray(theta10, dtype=float), np.asarray(theta20, dtype=float))

    def at(self, grid: Grid, t: float) -> Sources:
        return Sources.on(grid, self.f(t), self.g(t), self.h1(t), self.h2(t))

    def initial(self, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
        return tuple(np.array(np.broadcast_to(np.asarray(v, dtype=float), (grid.size,)))
                     for v in (self.theta10, self.theta20))


def _gauss(q: int):
    x, w = np.polynomial.legendre.leggauss(q)
    return 0.5 * (x + 1.0), 0.5 * w


def _interval_mean(gen: Generator, grid: Grid, a: float, b: float, q: int) -> np.ndarray:
    """Gauss-Legendre mean over [a, b], written as f0 + sum w (f_j - f0) so
    that time-constant data is reproduced bit for bit."""
    s, w = _gauss(q)
    vals = [np.broadcast_to(np.asarray(gen(a + (b - a) * sj), dtype=float), (grid.size,))
            for sj in s]
    out = np.array(vals[0])
    for wj, v in zip(w, vals):
        out += wj * (v - vals[0])
    return out


def clement_sources(grid: Grid, src: TimeSources, tg: TimeGrid,
                    quad_points: int = 8) -> list[Sources]:
    """Per-interval averages f^k = (1/tau) int_{I_k} f of all four sources."""
    out = []
    for k in range(1, tg.N + 1):
        a, b = tg.interval(k)
        out.append(Sources.on(grid, *(_interval_mean(gen, grid, a, b, quad_points)
                                      for gen in (src.f, src.g, src.h1, src.h2))))
    return out


def quasistatic_step(grid: Grid, prev: tuple[np.ndarray, np.ndarray], step: Sources,
                     tau: float, coeffs: Coefficients,
                     schedule: RegSchedule = RegSchedule(),
                     params: SolverParams = SolverParams(),
                     init: EllipticState | None = None) -> EllipticState:
    shifted = coeffs.shifted(tau)
    if shifted.c0 <= 0:
        raise ValueError("shifted coercivity constant is not positive")
    data = Sources.on(grid, step.f, step.g, step.h1 + prev[0] / tau, step.h2 + prev[1] / tau)
    return continuation_solve(grid, shifted, data, schedule, params, init)


@dataclass(frozen=True)
class Trajectory:
    grid: Grid
    time: TimeGrid
    coeffs: Coefficients
    src: TimeSources
    steps: tuple[Sources, ...]
    states: tuple[EllipticState, ...]
    theta10: np.ndarray
    theta20: np.ndarray
    quad_points: int = 8

    def theta(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Temperatures at t_k, k = 0..N."""
        if k == 0:
            return self.theta10, self.theta20
        s = self.states[k - 1]
        return s.theta1, s.theta2

    @property
    def converged(self) -> bool:
        return all(s.report.converged for s in self.states)


def run_quasistatic(grid: Grid, src: TimeSources, tg: TimeGrid, coeffs: Coefficients,
                    schedule: RegSchedule = RegSchedule(),
                    params: SolverParams = SolverParams(), quad_points: int = 8,
                    on_step: Callable[[int, EllipticState], None] | None = None
                    ) -> Trajectory:
    """Step k = 1..N warm-started from step k-1; ``on_step(k, state)`` is
    called as each state becomes available."""
    t10, t20 = src.initial(grid)
    steps = clement_sources(grid, src, tg, quad_points)
    prev = (t10, t20)
    init = EllipticState(t10, t20, grid.zeros(), grid.zeros(), grid.zeros())
    states = []
    for k, step in enumerate(steps, start=1):
        state = quasistatic_step(grid, prev, step, tg.tau, coeffs, schedule, params, init)
        states.append(state)
        if on_step is not None:
            on_step(k, state)
        prev = (state.theta1, state.theta2)
        init = state
    return Trajectory(grid, tg, coeffs, src, tuple(steps), tuple(states), t10, t20,
                      quad_points)


def interpolants(traj: Trajectory):
    """Piecewise-constant and piecewise-affine temperature interpolants.

    Both evaluators map t in [0, T] to (theta1, theta2); on I_k = [t_{k-1}, t_k)
    the constant one returns the step-k state.
    """
    tg = traj.time

    def index(t):
        if t < 0 or t > tg.T * (1 + 1e-14):
            raise ValueError(f"time {t} outside [0, {tg.T}]")
        return min(int(np.floor(t / tg.tau)) + 1, tg.N)

    def pc(t):
        return traj.theta(index(t))

    def pa(t):
        k = index(t)
        s = (t - (k - 1) * tg.tau) / tg.tau
        a, b = traj.theta(k - 1), traj.theta(k)
        return tuple((1 - s) * x + s * y for x, y in zip(a, b))

    return pc, pa


def interpolant_gap(traj: Trajectory) -> float:
    """L2(0,T;L2) norm of the constant-minus-affine interpolant, integrated
    exactly in time: sum_k tau/3 ||theta^k - theta^{k-1}||^2 over both
    temperatures."""
    total = 0.0
    for k in range(1, traj.time.N + 1):
        for a, b in zip(traj.theta(k), traj.theta(k - 1)):
            total += traj.time.tau / 3.0 * integrate(traj.grid, (a - b) ** 2)
    return float(np.sqrt(total))


def _sample_times(tg: TimeGrid, q: int) -> np.ndarray:
    s, _ = _gauss(q)
    inner = [(k - 1 + s) * tg.tau for k in range(1, tg.N + 1)]
    return np.concatenate([tg.times] + inner)


def bounds_lL(grid: Grid, coeffs: Coefficients, src: TimeSources, tg: TimeGrid,
              quad_points: int = 8) -> tuple[float, float]:
    t10, t20 = src.initial(grid)
    lo, hi = min(t10.min(), t20.min()), max(t10.max(), t20.max())
    for t in _sample_times(tg, quad_points):
        d = src.at(grid, t)
        lo = min(lo, d.h1.min() / coeffs.c1, d.h2.min() / coeffs.c2)
        hi = max(hi, d.h1.max() / coeffs.c1, d.h2.max() / coeffs.c2)
    return float(lo), float(hi)


def l1_linf_norm(grid: Grid, gen: Generator, tg: TimeGrid, quad_points: int = 8) -> float:
    """int_0^T ||gen(t)||_inf dt by Gauss-Legendre on each interval."""
    s, w = _gauss(quad_points)
    total = 0.0
    for k in range(1, tg.N + 1):
        for sj, wj in zip(s, w):
            v = np.asarray(gen((k - 1 + sj) * tg.tau), dtype=float)
            total += tg.tau * wj * float(np.max(np.abs(v)))
    return total


def _min_over_Q(grid, src, tg, fn, q):
    return float(min(np.min(fn(src.at(grid, t))) for t in _sample_times(tg, q)))


def parabolic_preconditions(grid: Grid, coeffs: Coefficients, src: TimeSources,
                            tg: TimeGrid, quad_points: int = 8) -> tuple[bool, str]:
    """kappa1 = kappa2, c2 >= c1, h1 >= h2 >= 0 and theta10 >= theta20 >= 0."""
    c = coeffs
    if c.kappa1 != c.kappa2:
        return False, "kappa1 != kappa2"
    if c.c2 < c.c1:
        return False, "c2 < c1"
    t10, t20 = src.initial(grid)
    if np.any(t10 < t20) or np.any(t20 < 0):
        return False, "initial temperatures not ordered and non-negative"
    for t in _sample_times(tg, quad_points):
        d = src.at(grid, t)
        if np.any(d.h1 < d.h2) or np.any(d.h2 < 0):
            return False, "heat sources not ordered and non-negative"
    return True, ""


def _l_hat(grid, src, tg, q):
    t10, _ = src.initial(grid)
    return l1_linf_norm(grid, src.h1, tg, q) + float(np.max(np.abs(t10)))


def parabolic_nondegeneracy(grid: Grid, coeffs: Coefficients, src: TimeSources,
                            tg: TimeGrid, quad_points: int = 8):
    """(weak, strong) reports for f - a g > k a alpha (||h1||_{L1 Linf} +
    ||theta10||_inf) with k = 1, 2; constant a only."""
    names = ("parabolic_nondegeneracy_weak", "parabolic_nondegeneracy_strong")
    if not coeffs.a.is_constant:
        return tuple(ConditionReport(n, np.nan, np.nan, np.nan, False, 0.0,
                                     "coefficient a is not constant") for n in names)
    ok, reason = parabolic_preconditions(grid, coeffs, src, tg, quad_points)
    a = coeffs.a.value
    lhs = _min_over_Q(grid, src, tg, lambda d: d.f - a * d.g, quad_points)
    base = a * coeffs.alpha * _l_hat(grid, src, tg, quad_points)
    return tuple(ConditionReport(n, lhs, k * base, lhs - k * base, ok, 0.0, reason)
                 for n, k in zip(names, (1.0, 2.0)))


def parabolic_uniqueness_check(grid: Grid, coeffs: Coefficients, src: TimeSources,
                               tg: TimeGrid, quad_points: int = 8) -> ConditionReport:
    name = "parabolic_uniqueness"
    if not coeffs.a.is_constant:
        return ConditionReport(name, np.nan, np.nan, np.nan, False, 0.0,
                               "coefficient a is not constant")
    g0 = gamma0(coeffs)
    if g0 <= 0:
        return ConditionReport(name, np.nan, np.nan, np.nan, False, 0.0,
                               "gamma0 is not positive")
    a = coeffs.a.value
    l, L = bounds_lL(grid, coeffs, src, tg, quad_points)
    lhs = _min_over_Q(grid, src, tg, lambda d: d.f - a * d.g, quad_points)
    rhs = a * coeffs.alpha * (L - l) * (2.0 + (coeffs.b1 + coeffs.b2) / g0)
    return ConditionReport(name, lhs, rhs, lhs - rhs, True)


def mu_estimate(traj: Trajectory) -> float:
    """Smallest discrete pointwise non-degeneracy margin min(f^k - A Phi^k)
    over all steps."""
    grid = traj.grid
    idx = grid.interior
    out = np.inf
    for s, d in zip(traj.states, traj.steps):
        A = assemble_Atheta(grid, traj.coeffs.a, s.theta1)
        out = min(out, float(np.min(d.f[idx] - A @ s.phi[idx])))
    return out


def chi_time_modulus(traj: Trajectory, s_idx: int, t_idx: int,
                     mu_est: float | None = None) -> float | None:
    """RHS - LHS of the time-continuity estimate of the contact indicator
    between steps s_idx and t_idx (1-based), None when a is not constant or
    mu - a alpha L_hat is not positive."""
    c = traj.coeffs
    if not c.a.is_constant:
        return None
    grid, tg, q = traj.grid, traj.time, traj.quad_points
    mu = mu_estimate(traj) if mu_est is None else mu_est
    a = c.a.value
    denom = mu - a * c.alpha * _l_hat(grid, traj.src, tg, q)
    if denom <= 0:
        return None
    S, T = traj.states[s_idx - 1], traj.states[t_idx - 1]
    dS, dT = traj.steps[s_idx - 1], traj.steps[t_idx - 1]

    def l1(v):
        return integrate(grid, np.abs(v))

    lhs = l1(T.chi - S.chi)
    rhs = (l1(dT.f - dS.f) + a * l1(dT.g - dS.g)
           + a * c.alpha * l1((T.theta1 - T.theta2) - (S.theta1 - S.theta2))) / denom
    return float(rhs - lhs)


def temp_diff_linfty_check(traj: Trajectory) -> float | None:
    """T ||h1 - h2||_{Linf(Q)} + ||theta10 - theta20||_inf - max_k ||theta1^k -
    theta2^k||_inf; needs c1 = c2 and the ordering conditions."""
    c = traj.coeffs
    grid, tg, q = traj.grid, traj.time, traj.quad_points
    ok, _ = parabolic_preconditions(grid, c, traj.src, tg, q)
    if not ok or c.c1 != c.c2:
        return None
    k1 = max(float(np.max(np.abs(traj.src.at(grid, t).h1 - traj.src.at(grid, t).h2)))
             for t in _sample_times(tg, q))
    k2 = float(np.max(np.abs(traj.theta10 - traj.theta20)))
    lhs = max(float(np.max(np.abs(a - b))) for a, b in
              (traj.theta(k) for k in range(tg.N + 1)))
    return tg.T * k1 + k2 - lhs


def very_weak_residual(traj: Trajectory) -> tuple[float, float]:
    """Sup over steps of the residuals of
        b2 dt th1 + b1 dt th2 = b2 eta1 + b1 eta2   (sum relation)
        b2 dt th1 - b1 dt th2 = b2 eta1 - b1 eta2   (difference relation)
    with backward differences and eta_i rebuilt from the unshifted operators."""
    c, grid, tau = traj.coeffs, traj.grid, traj.time.tau
    A1 = assemble_neumann_helmholtz(grid, c.kappa1, c.c1)
    A2 = assemble_neumann_helmholtz(grid, c.kappa2, c.c2)
    w = grid.lumped
    r_sum = r_diff = 0.0
    for k in range(1, traj.time.N + 1):
        t1, t2 = traj.theta(k)
        p1, p2 = traj.theta(k - 1)
        chi = traj.states[k - 1].chi
        d = traj.steps[k - 1]
        ex = (t1 - t2) * chi
        eta1 = d.h1 - c.b1 * ex - (A1 @ t1) / w
        eta2 = d.h2 + c.b2 * ex - (A2 @ t2) / w
        e1 = (t1 - p1) / tau - eta1
        e2 = (t2 - p2) / tau - eta2
        r_sum = max(r_sum, float(np.max(np.abs(c.b2 * e1 + c.b1 * e2))))
        r_diff = max(r_diff, float(np.max(np.abs(c.b2 * e1 - c.b1 * e2))))
    return r_sum, r_diff
