"""Conjugate gradients for SPD systems and projected SOR for the
upper-obstacle linear complementarity problem

    x <= psi,   A x <= b,   (b - A x)_i (psi_i - x_i) = 0.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from numba import njit

__all__ = ["SolveStats", "LcpProblem", "cg_solve", "psor_solve", "natural_residual"]

# Reserved: every kernel here is sequential, so only the default is honoured.
THREADS = int(os.environ.get("THERMOQVI_THREADS", "1"))


@dataclass(frozen=True)
class SolveStats:
    iterations: int
    residual: float
    converged: bool


@dataclass(frozen=True)
class LcpProblem:
    """``upper`` may contain +inf; those entries are stored as unbounded."""

    A: sp.csr_matrix
    b: np.ndarray
    upper: np.ndarray
    bounded: np.ndarray

    @classmethod
    def build(cls, A, b, upper) -> "LcpProblem":
        A = sp.csr_matrix(A, dtype=float)
        A.sort_indices()
        b = np.asarray(b, dtype=float).copy()
        upper = np.broadcast_to(np.asarray(upper, dtype=float), b.shape).copy()
        if A.shape != (b.size, b.size):
            raise ValueError("LCP dimensions disagree")
        if np.any(np.isnan(upper)) or np.any(upper == -np.inf):
            raise ValueError("obstacle must be finite or +inf")
        bounded = np.isfinite(upper)
        upper[~bounded] = 0.0
        return cls(A, b, upper, bounded)


def cg_solve(A, b, tol: float = 1e-10, max_iter: int | None = None,
             x0: np.ndarray | None = None, jacobi: bool = True):
    """Preconditioned CG.  Converged means ||b - A x||_2 <= tol*max(1, ||b||_2)
    for the true (recomputed) residual."""
    b = np.asarray(b, dtype=float)
    n = b.size
    if max_iter is None:
        max_iter = 10 * n + 100
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    target = tol * max(1.0, float(np.linalg.norm(b)))
    dinv = 1.0 / A.diagonal() if jacobi else np.ones(n)
    its = 0
    r = b - A @ x
    res = float(np.linalg.norm(r))
    # The outer loop restarts from the true residual if rounding made the
    # recursive one drift below the target too early.
    while res > target and its < max_iter:
        z = dinv * r
        p = z.copy()
        rz = float(r @ z)
        while its < max_iter:
            Ap = A @ p
            pAp = float(p @ Ap)
            if pAp <= 0.0:
                break
            alpha = rz / pAp
            x += alpha * p
            r -= alpha * Ap
            its += 1
            if np.linalg.norm(r) <= target:
                break
            z = dinv * r
            rz_new = float(r @ z)
            p = z + (rz_new / rz) * p
            rz = rz_new
        r = b - A @ x
        new_res = float(np.linalg.norm(r))
        stalled = new_res > 0.5 * res
        res = new_res
        if stalled:
            break
    return x, SolveStats(its, res, res <= target)


@njit(cache=True)
def _psor_kernel(indptr, indices, data, b, upper, bounded, x, omega, target, max_iter):
    n = b.size
    it = 0
    res = np.inf
    while it < max_iter:
        for i in range(n):
            s = b[i]
            d = 0.0
            for k in range(indptr[i], indptr[i + 1]):
                j = indices[k]
                if j == i:
                    d = data[k]
                else:
                    s -= data[k] * x[j]
            xi = (1.0 - omega) * x[i] + omega * s / d
            if bounded[i] and xi > upper[i]:
                xi = upper[i]
            x[i] = xi
        it += 1
        res = 0.0
        for i in range(n):
            r = b[i]
            for k in range(indptr[i], indptr[i + 1]):
                r -= data[k] * x[indices[k]]
            if bounded[i]:
                gap = upper[i] - x[i]
                if gap < r:
                    r = gap
            if abs(r) > res:
                res = abs(r)
        if res <= target:
            break
    return it, res


def natural_residual(p: LcpProblem, x: np.ndarray) -> float:
    """max_i |min(psi_i - x_i, b_i - (A x)_i)|, unbounded rows use the
    plain residual."""
    r = p.b - p.A @ x
    r = np.where(p.bounded, np.minimum(p.upper - x, r), r)
    return float(np.max(np.abs(r))) if r.size else 0.0


def psor_solve(p: LcpProblem, omega: float = 1.5, tol: float = 1e-10,
               max_iter: int = 200000, x0: np.ndarray | None = None):
    """Projected SOR in ascending index order.

    Converged means natural_residual <= tol*(1 + ||b||_inf).  The returned
    iterate satisfies x <= psi exactly on bounded rows.
    """
    if not 0.0 < omega < 2.0:
        raise ValueError("relaxation parameter must lie in (0, 2)")
    n = p.b.size
    if n == 0:
        return np.zeros(0), SolveStats(0, 0.0, True)
    if np.any(p.A.diagonal() <= 0):
        raise ValueError("PSOR needs a positive diagonal")
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    x = np.where(p.bounded, np.minimum(x, p.upper), x)
    target = tol * (1.0 + float(np.max(np.abs(p.b))))
    if natural_residual(p, x) <= target:
        return x, SolveStats(0, natural_residual(p, x), True)
    A = p.A
    it, res = _psor_kernel(A.indptr.astype(np.int64), A.indices.astype(np.int64),
                           A.data, p.b, p.upper, p.bounded, x, float(omega),
                           target, int(max_iter))
    return x, SolveStats(int(it), float(res), bool(res <= target))
