"""The two-temperature system with prescribed exchange weight sigma:

    -kappa_1 Lap th1 + c1 th1 = h1 - b1 (th1 - th2) sigma
    -kappa_2 Lap th2 + c2 th2 = h2 + b2 (th1 - th2) sigma

with homogeneous Neumann conditions, plus the a-priori bounds that go with it.
Analytics whose hypotheses fail return None instead of a number.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .discretization import Grid, assemble_neumann_helmholtz, integrate
from .linalg import SolveStats, cg_solve

__all__ = [
    "CoefficientFunction",
    "Coefficients",
    "BoundsReport",
    "coercivity_margin",
    "gamma0",
    "solve_pair",
    "pair_residual",
    "bounds_mM",
    "bounds_report",
    "check_comparison",
    "comparison_preconditions",
    "linfty_theta1",
    "l1_dependence_slack",
    "heat_conservation_residual",
]


def _pos(v: float) -> float:
    return max(v, 0.0)


@dataclass(frozen=True)
class CoefficientFunction:
    """Membrane stiffness a(s): a constant or a piecewise-linear table.

    Evaluation clamps outside the tabulated range.  ``lam1``/``lam2`` default
    to the extreme table values and ``lip`` is the largest table slope.
    """

    abscissae: np.ndarray
    values: np.ndarray
    lam1: float = None
    lam2: float = None

    def __post_init__(self):
        s = np.array(self.abscissae, dtype=float).ravel()
        v = np.array(self.values, dtype=float).ravel()
        if s.size == 0 or s.size != v.size:
            raise ValueError("coefficient table needs matching, non-empty columns")
        if np.any(np.diff(s) <= 0):
            raise ValueError("coefficient abscissae must be strictly increasing")
        if not (np.all(np.isfinite(s)) and np.all(np.isfinite(v))):
            raise ValueError("coefficient table must be finite")
        lam1 = float(v.min()) if self.lam1 is None else float(self.lam1)
        lam2 = float(v.max()) if self.lam2 is None else float(self.lam2)
        if not 0.0 < lam1 <= v.min() or v.max() > lam2:
            raise ValueError(f"coefficient values must lie in [lam1, lam2] with lam1 > 0, "
                             f"got range [{v.min()}, {v.max()}] vs [{lam1}, {lam2}]")
        s.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "abscissae", s)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "lam1", lam1)
        object.__setattr__(self, "lam2", lam2)

    @classmethod
    def constant(cls, value: float) -> "CoefficientFunction":
        return cls(np.array([0.0]), np.array([float(value)]))

    @classmethod
    def table(cls, abscissae, values, lam1=None, lam2=None) -> "CoefficientFunction":
        return cls(np.asarray(abscissae), np.asarray(values), lam1, lam2)

    @classmethod
    def from_callable(cls, fn: Callable, lo: float, hi: float,
                      samples: int = 1025) -> "CoefficientFunction":
        s = np.linspace(lo, hi, samples)
        return cls(s, np.asarray(fn(s), dtype=float))

    @property
    def is_constant(self) -> bool:
        return bool(np.all(self.values == self.values[0]))

    @property
    def lip(self) -> float:
        if self.values.size < 2:
            return 0.0
        return float(np.max(np.abs(np.diff(self.values) / np.diff(self.abscissae))))

    @property
    def value(self) -> float:
        """The constant value; only meaningful when ``is_constant``."""
        return float(self.values[0])

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if self.values.size == 1:
            return np.full(s.shape, self.values[0])
        return np.interp(s, self.abscissae, self.values)


@dataclass(frozen=True)
class Coefficients:
    kappa1: float = 1.0
    kappa2: float = 1.0
    c1: float = 1.0
    c2: float = 1.0
    b1: float = 0.0
    b2: float = 0.0
    alpha: float = 0.0
    a: CoefficientFunction = field(default_factory=lambda: CoefficientFunction.constant(1.0))

    def __post_init__(self):
        for name in ("kappa1", "kappa2", "c1", "c2"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("b1", "b2", "alpha"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be non-negative")

    def shifted(self, tau: float) -> "Coefficients":
        """Reaction constants of one implicit Euler step, c_i + 1/tau."""
        return replace(self, c1=self.c1 + 1.0 / tau, c2=self.c2 + 1.0 / tau)

    @property
    def c0(self) -> float:
        return coercivity_margin(self, 1.0)


def coercivity_margin(coeffs: Coefficients, sigma_inf: float) -> float:
    c, b1, b2 = coeffs, coeffs.b1, coeffs.b2
    return min(c.c1 - _pos(b2 - b1) * sigma_inf / 4.0,
               c.c2 - _pos(b1 - b2) * sigma_inf / 4.0)


def gamma0(coeffs: Coefficients) -> float:
    c = coeffs
    return min(c.c1 - _pos(c.b2 - c.b1), c.c2 - _pos(c.b1 - c.b2))


@dataclass(frozen=True)
class BoundsReport:
    m: float
    M: float
    c0: float
    c_sigma: float
    gamma0: float
    gamma1: float
    gamma2: float
    l: float | None = None
    L: float | None = None


def bounds_report(coeffs: Coefficients, h1, h2, sigma_inf: float = 1.0,
                  lL: tuple[float, float] | None = None) -> BoundsReport:
    m, M = bounds_mM(coeffs, h1, h2)
    c = coeffs
    return BoundsReport(
        m=m, M=M, c0=c.c0, c_sigma=coercivity_margin(c, sigma_inf), gamma0=gamma0(c),
        gamma1=c.c1 - _pos(c.b2 - c.b1) * sigma_inf,
        gamma2=c.c2 - _pos(c.b1 - c.b2) * sigma_inf,
        l=None if lL is None else lL[0], L=None if lL is None else lL[1])


def _pair_matrices(grid, coeffs, sigma):
    A1 = assemble_neumann_helmholtz(grid, coeffs.kappa1, coeffs.c1 + coeffs.b1 * sigma)
    A2 = assemble_neumann_helmholtz(grid, coeffs.kappa2, coeffs.c2 + coeffs.b2 * sigma)
    return A1, A2


def solve_pair(grid: Grid, coeffs: Coefficients, h1, h2, sigma, tol: float = 1e-11,
               max_iter: int = 500, init=None):
    """Block Gauss-Seidel between the two equations, CG inside.

    Stops when the sup-norm update falls below tol*(1 + max|theta|).
    Returns (theta1, theta2, SolveStats) where the stats residual is the
    largest pointwise equation residual.
    """
    h1 = np.broadcast_to(np.asarray(h1, dtype=float), (grid.size,))
    h2 = np.broadcast_to(np.asarray(h2, dtype=float), (grid.size,))
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), (grid.size,))
    if np.any(sigma < 0) or np.any(sigma > 1):
        raise ValueError("exchange weight sigma must lie in [0, 1]")
    if coercivity_margin(coeffs, float(sigma.max())) <= 0:
        raise ValueError("coercivity margin c_sigma is not positive for this sigma")
    A1, A2 = _pair_matrices(grid, coeffs, sigma)
    w = grid.lumped
    if init is None:
        t1, t2 = np.zeros(grid.size), np.zeros(grid.size)
    else:
        t1, t2 = (np.array(v, dtype=float) for v in init)
    converged = False
    its = 0
    for its in range(1, max_iter + 1):
        n1, s1 = cg_solve(A1, w * (h1 + coeffs.b1 * sigma * t2), tol, x0=t1)
        n2, s2 = cg_solve(A2, w * (h2 + coeffs.b2 * sigma * n1), tol, x0=t2)
        change = max(np.max(np.abs(n1 - t1)), np.max(np.abs(n2 - t2)))
        t1, t2 = n1, n2
        scale = 1.0 + max(np.max(np.abs(t1)), np.max(np.abs(t2)))
        if change <= tol * scale:
            converged = True
            break
    res = pair_residual(grid, coeffs, t1, t2, h1, h2, sigma)
    return t1, t2, SolveStats(its, res, converged)


def pair_residual(grid: Grid, coeffs: Coefficients, theta1, theta2, h1, h2,
                  sigma) -> float:
    """Largest pointwise residual of the two temperature equations.  For an
    implicit Euler step pass shifted coefficients and sources."""
    A1, A2 = _pair_matrices(grid, coeffs, sigma)
    w = grid.lumped
    r1 = (A1 @ theta1) / w - h1 - coeffs.b1 * sigma * theta2
    r2 = (A2 @ theta2) / w - h2 - coeffs.b2 * sigma * theta1
    return float(max(np.max(np.abs(r1)), np.max(np.abs(r2))))


def bounds_mM(coeffs: Coefficients, h1, h2) -> tuple[float, float]:
    h1 = np.asarray(h1, dtype=float)
    h2 = np.asarray(h2, dtype=float)
    m = min(h1.min() / coeffs.c1, h2.min() / coeffs.c2)
    M = max(h1.max() / coeffs.c1, h2.max() / coeffs.c2)
    return float(m), float(M)


def comparison_preconditions(coeffs: Coefficients, h1, h2, atol: float = 0.0) -> bool:
    """c2/kappa2 >= c1/kappa1 and h1/kappa1 >= h2/kappa2 >= 0 nodewise."""
    c = coeffs
    h1 = np.asarray(h1, dtype=float)
    h2 = np.asarray(h2, dtype=float)
    return bool(c.c2 / c.kappa2 >= c.c1 / c.kappa1
                and np.all(h1 / c.kappa1 >= h2 / c.kappa2 - atol)
                and np.all(h2 >= -atol))


def check_comparison(theta1, theta2, coeffs: Coefficients, h1, h2) -> float | None:
    if not comparison_preconditions(coeffs, h1, h2):
        return None
    theta1 = np.asarray(theta1)
    theta2 = np.asarray(theta2)
    return float(max(0.0, np.max(theta2 - theta1), np.max(-theta2)))


def linfty_theta1(coeffs: Coefficients, h1) -> float:
    return float(np.max(np.abs(h1)) / coeffs.c1)


def l1_dependence_slack(grid: Grid, sol, solhat, h1, h2, h1hat, h2hat, sigma, sigmahat,
                        coeffs: Coefficients) -> float | None:
    """RHS - LHS of the L1 continuous-dependence estimate, None when a
    gamma_i is not positive.  m and M come from the unhatted data."""
    c = coeffs
    s_inf = float(np.max(np.abs(sigmahat)))
    g1 = c.c1 - _pos(c.b2 - c.b1) * s_inf
    g2 = c.c2 - _pos(c.b1 - c.b2) * s_inf
    if g1 <= 0 or g2 <= 0:
        return None
    m, M = bounds_mM(c, h1, h2)

    def l1(v):
        return integrate(grid, np.abs(v))

    lhs = g1 * l1(sol[0] - solhat[0]) + g2 * l1(sol[1] - solhat[1])
    rhs = (l1(np.asarray(h1) - h1hat) + l1(np.asarray(h2) - h2hat)
           + (M - m) * (c.b1 + c.b2) * l1(np.asarray(sigma) - sigmahat))
    return float(rhs - lhs)


def heat_conservation_residual(grid: Grid, coeffs: Coefficients, theta1, theta2,
                               h1, h2, sigma) -> float:
    c = coeffs
    theta1 = np.asarray(theta1)
    theta2 = np.asarray(theta2)
    lhs = integrate(grid, c.c1 * theta1 + c.c2 * theta2)
    rhs = (integrate(grid, np.asarray(h1) + np.asarray(h2))
           + (c.b2 - c.b1) * integrate(grid, np.asarray(sigma) * (theta1 - theta2)))
    return abs(lhs - rhs)
