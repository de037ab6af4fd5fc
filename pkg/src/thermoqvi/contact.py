"""Mould displacement (Poisson with zero Dirichlet data), membrane obstacle
problem below the mould, contact-set extraction and the Lewy-Stampacchia
sandwich  min(f, A Phi) <= A u <= f.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .discretization import Grid, assemble_Atheta, assemble_dirichlet_laplacian
from .linalg import LcpProblem, cg_solve, natural_residual, psor_solve
from .thermal import Coefficients

__all__ = [
    "ContactParams",
    "default_delta",
    "solve_mould",
    "mould_residual",
    "solve_membrane",
    "membrane_problem",
    "membrane_residual",
    "lewy_stampacchia_violation",
    "transition_band",
    "contact_set",
]


@dataclass(frozen=True)
class ContactParams:
    """``delta_contact=None`` selects :func:`default_delta`."""

    delta_contact: float | None = None
    omega: float = 1.5
    tol: float = 1e-11
    max_iter: int = 200000

    def __post_init__(self):
        if self.delta_contact is not None and not self.delta_contact > 0:
            raise ValueError("contact threshold must be positive")
        if not 0.0 < self.omega < 2.0:
            raise ValueError("PSOR relaxation must lie in (0, 2)")
        if not self.tol > 0:
            raise ValueError("tolerance must be positive")

    def delta(self, grid: Grid, coeffs: Coefficients, f) -> float:
        if self.delta_contact is not None:
            return float(self.delta_contact)
        return default_delta(grid, coeffs, f)


def default_delta(grid: Grid, coeffs: Coefficients, f) -> float:
    """h^2 ||f||_inf / lam1, floored so it stays positive for f = 0."""
    fmax = float(np.max(np.abs(f)))
    return grid.h**2 * max(fmax, 1e-8) / coeffs.a.lam1


def solve_mould(grid: Grid, alpha: float, theta1, theta2, chi, g, tol: float = 1e-12):
    """-Lap Phi = alpha (theta1 - theta2) chi + g, Phi = 0 on the boundary.
    Returns (Phi, SolveStats) with Phi on the full grid."""
    chi = np.asarray(chi, dtype=float)
    if np.any(chi < 0) or np.any(chi > 1):
        raise ValueError("contact weight must lie in [0, 1]")
    rhs = alpha * (np.asarray(theta1) - np.asarray(theta2)) * chi + np.asarray(g)
    rhs = np.broadcast_to(rhs, (grid.size,))
    idx = grid.interior
    A = assemble_dirichlet_laplacian(grid)
    x, stats = cg_solve(A, rhs[idx], tol)
    phi = grid.zeros()
    phi[idx] = x
    return phi, stats


def mould_residual(grid: Grid, alpha, theta1, theta2, chi, g, phi) -> float:
    rhs = alpha * (np.asarray(theta1) - np.asarray(theta2)) * np.asarray(chi) + np.asarray(g)
    rhs = np.broadcast_to(rhs, (grid.size,))
    idx = grid.interior
    A = assemble_dirichlet_laplacian(grid)
    r = A @ np.asarray(phi)[idx] - rhs[idx]
    bnd = np.abs(np.asarray(phi)[grid.boundary])
    return float(max(np.max(np.abs(r)), bnd.max()))


def membrane_problem(grid: Grid, coeffs: Coefficients, theta1, f, phi) -> LcpProblem:
    idx = grid.interior
    A = assemble_Atheta(grid, coeffs.a, theta1)
    f = np.broadcast_to(np.asarray(f, dtype=float), (grid.size,))
    return LcpProblem.build(A, f[idx], np.asarray(phi, dtype=float)[idx])


def solve_membrane(grid: Grid, coeffs: Coefficients, theta1, f, phi,
                   params: ContactParams = ContactParams(), u0=None):
    """Obstacle problem u <= Phi for A_theta; returns (u, SolveStats)."""
    p = membrane_problem(grid, coeffs, theta1, f, phi)
    idx = grid.interior
    x0 = None if u0 is None else np.asarray(u0, dtype=float)[idx]
    x, stats = psor_solve(p, params.omega, params.tol, params.max_iter, x0)
    u = grid.zeros()
    u[idx] = x
    return u, stats


def membrane_residual(grid: Grid, coeffs: Coefficients, theta1, f, phi, u) -> float:
    """Natural complementarity residual at the interior nodes."""
    p = membrane_problem(grid, coeffs, theta1, f, phi)
    return natural_residual(p, np.asarray(u, dtype=float)[grid.interior])


def transition_band(grid: Grid, chi) -> np.ndarray:
    """Mask of nodes whose stencil contains both contact values."""
    chi = np.asarray(chi) > 0.5
    p, q, _ = grid.edges
    band = np.zeros(grid.size, dtype=bool)
    cut = chi[p] != chi[q]
    band[p[cut]] = True
    band[q[cut]] = True
    return band


def lewy_stampacchia_violation(grid: Grid, coeffs: Coefficients, theta1, u, phi, f,
                               chi=None) -> float:
    """Largest positive-part violation of min(f, A Phi) <= A u <= f over the
    interior.  With ``chi`` the nodes straddling the contact transition are
    left out."""
    A = assemble_Atheta(grid, coeffs.a, theta1)
    idx = grid.interior
    f = np.broadcast_to(np.asarray(f, dtype=float), (grid.size,))[idx]
    Au = A @ np.asarray(u)[idx]
    Aphi = A @ np.asarray(phi)[idx]
    viol = np.maximum(np.maximum(Au - f, np.minimum(f, Aphi) - Au), 0.0)
    if chi is not None:
        viol = viol[~transition_band(grid, chi)[idx]]
    return float(viol.max()) if viol.size else 0.0


def contact_set(u, phi, delta: float) -> np.ndarray:
    """chi = 1 where Phi - u <= delta, else 0."""
    return (np.asarray(phi) - np.asarray(u) <= delta).astype(float)
