"""Structured grids on the unit interval/square, nodal fields, finite-difference
operators and trapezoid quadrature.

Nodes are indexed row-major: in 2D the node (i, j) sits at (x, y) = (i h, j h)
and has flat index i*(n+1) + j.  Fields are plain float arrays of length
``grid.size`` in that order.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Literal

import numpy as np
import scipy.sparse as sp

__all__ = [
    "Grid",
    "ScalarField",
    "build_grid",
    "assemble_neumann_helmholtz",
    "assemble_dirichlet_laplacian",
    "assemble_Atheta",
    "apply_neumann",
    "integrate",
    "write_field_csv",
    "read_field_csv",
]


@dataclass(frozen=True)
class Grid:
    """Uniform grid with n cells per axis on (0,1)^dim."""

    dim: int
    n: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"grid dimension must be 1 or 2, got {self.dim}")
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"grid needs n >= 2 cells per axis, got {self.n}")

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n + 1,) * self.dim

    @property
    def size(self) -> int:
        return (self.n + 1) ** self.dim

    @cached_property
    def axis(self) -> np.ndarray:
        return _frozen(np.arange(self.n + 1) * self.h)

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        """Flattened nodal coordinates, one array per axis."""
        mesh = np.meshgrid(*([self.axis] * self.dim), indexing="ij")
        return tuple(_frozen(c.ravel()) for c in mesh)

    @property
    def x(self) -> np.ndarray:
        return self.coords[0]

    @property
    def y(self) -> np.ndarray:
        if self.dim < 2:
            raise AttributeError("1D grid has no y coordinate")
        return self.coords[1]

    @cached_property
    def lattice(self) -> tuple[np.ndarray, ...]:
        """Integer lattice coordinates (i[, j]) of every node."""
        idx = np.indices(self.shape).reshape(self.dim, -1)
        return tuple(_frozen(a) for a in idx)

    @cached_property
    def boundary(self) -> np.ndarray:
        mask = np.zeros(self.size, dtype=bool)
        for a in self.lattice:
            mask |= (a == 0) | (a == self.n)
        return _frozen(mask)

    @cached_property
    def interior(self) -> np.ndarray:
        """Flat indices of interior nodes, ascending."""
        return _frozen(np.flatnonzero(~self.boundary))

    @cached_property
    def lumped(self) -> np.ndarray:
        """Relative trapezoid weights: 1 inside, 1/2 per boundary face touched."""
        w = np.ones(self.size)
        for a in self.lattice:
            w[(a == 0) | (a == self.n)] *= 0.5
        return _frozen(w)

    @cached_property
    def weights(self) -> np.ndarray:
        """Absolute trapezoid weights; they sum to 1 = |Omega|."""
        return _frozen(self.lumped * self.h**self.dim)

    @cached_property
    def edges(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Nearest-neighbour edges as (p, q, face) with p < q.

        ``face`` is the fraction of the dual face owned by the edge: 1/2 for
        edges lying on the boundary (2D only), 1 otherwise.
        """
        ps, qs, fs = [], [], []
        strides = [(self.n + 1) ** (self.dim - 1 - k) for k in range(self.dim)]
        for k in range(self.dim):
            start = self.lattice[k] < self.n
            p = np.flatnonzero(start)
            q = p + strides[k]
            face = np.ones(p.size)
            for other in range(self.dim):
                if other != k:
                    a = self.lattice[other][p]
                    face[(a == 0) | (a == self.n)] *= 0.5
            ps.append(p)
            qs.append(q)
            fs.append(face)
        return tuple(_frozen(np.concatenate(v)) for v in (ps, qs, fs))

    def zeros(self) -> np.ndarray:
        return np.zeros(self.size)

    def full(self, value: float) -> np.ndarray:
        return np.full(self.size, float(value))

    def reshape(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values).reshape(self.shape)


def build_grid(dim: int, n: int) -> Grid:
    return Grid(dim=int(dim), n=int(n))


FieldKind = Literal["free", "zero-trace"]


@dataclass(frozen=True)
class ScalarField:
    """Nodal values tied to a grid, used at I/O boundaries.

    Solvers work on bare arrays; this wrapper validates length, finiteness and
    the zero boundary trace of Dirichlet fields.
    """

    grid: Grid
    values: np.ndarray
    kind: FieldKind = "free"

    def __post_init__(self):
        v = np.array(self.values, dtype=float).ravel()
        if v.size != self.grid.size:
            raise ValueError(f"field has {v.size} values, grid has {self.grid.size} nodes")
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite values")
        if self.kind not in ("free", "zero-trace"):
            raise ValueError(f"unknown field kind {self.kind!r}")
        if self.kind == "zero-trace" and np.any(v[self.grid.boundary] != 0.0):
            raise ValueError("zero-trace field has non-zero boundary values")
        object.__setattr__(self, "values", _frozen(v))


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def _edge_matrix(grid: Grid, coeff: np.ndarray) -> sp.csr_matrix:
    """Sum over edges of coeff_e (e_p - e_q)(e_p - e_q)^T."""
    p, q, _ = grid.edges
    rows = np.concatenate([p, q, p, q])
    cols = np.concatenate([p, q, q, p])
    vals = np.concatenate([coeff, coeff, -coeff, -coeff])
    A = sp.coo_matrix((vals, (rows, cols)), shape=(grid.size, grid.size)).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def assemble_neumann_helmholtz(grid: Grid, kappa: float, c_field) -> sp.csr_matrix:
    """Matrix of -kappa*Lap + c with homogeneous Neumann closure.

    The matrix is returned in lumped-weighted (symmetric) form: pointwise,
    (A @ v) / grid.lumped is the standard 2d+1 point stencil with mirror
    ghost nodes, and A @ 1 = grid.lumped * c.  Solve A v = grid.lumped * rhs.
    """
    if kappa <= 0:
        raise ValueError("diffusivity must be positive")
    c = np.broadcast_to(np.asarray(c_field, dtype=float), (grid.size,))
    if np.any(c < 0):
        raise ValueError("reaction field must be non-negative")
    _, _, face = grid.edges
    K = _edge_matrix(grid, kappa * face / grid.h**2)
    return (K + sp.diags(grid.lumped * c)).tocsr()


def apply_neumann(grid: Grid, A: sp.csr_matrix, v: np.ndarray) -> np.ndarray:
    """Pointwise value of the Neumann operator assembled by
    :func:`assemble_neumann_helmholtz`."""
    return (A @ v) / grid.lumped


def assemble_dirichlet_laplacian(grid: Grid, coeff_edge=None) -> sp.csr_matrix:
    """-div(k grad .) on interior nodes, boundary values eliminated (zero).

    ``coeff_edge`` is None (unit coefficient), a scalar, or an array with one
    strictly positive value per entry of ``grid.edges``.
    """
    p, _, _ = grid.edges
    if coeff_edge is None:
        k = np.ones(p.size)
    else:
        k = np.broadcast_to(np.asarray(coeff_edge, dtype=float), (p.size,)).copy()
    if np.any(k <= 0):
        raise ValueError("edge coefficients must be strictly positive")
    full = _edge_matrix(grid, k / grid.h**2)
    idx = grid.interior
    A = full[idx][:, idx].tocsr()
    A.sort_indices()
    return A


def assemble_Atheta(grid: Grid, a_fn, theta1: np.ndarray) -> sp.csr_matrix:
    """Membrane operator -div(a(theta1) grad .) with arithmetic-mean edge
    coefficients."""
    p, q, _ = grid.edges
    av = a_fn(np.asarray(theta1, dtype=float))
    return assemble_dirichlet_laplacian(grid, 0.5 * (av[p] + av[q]))


def integrate(grid: Grid, values) -> float:
    v = np.broadcast_to(np.asarray(values, dtype=float), (grid.size,))
    return float(np.dot(grid.weights, v))


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def write_field_csv(path, grid: Grid, values) -> None:
    v = np.asarray(values, dtype=float).ravel()
    if v.size != grid.size:
        raise ValueError("field size does not match grid")
    header = ["i", "j", "x", "y", "value"] if grid.dim == 2 else ["i", "x", "value"]
    lines = [",".join(header)]
    idx = grid.lattice
    for node in range(grid.size):
        ints = [str(int(a[node])) for a in idx]
        xs = [_fmt(c[node]) for c in grid.coords]
        lines.append(",".join(ints + xs + [_fmt(v[node])]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_field_csv(path) -> tuple[Grid, np.ndarray]:
    """Read a field written by :func:`write_field_csv`; the grid is inferred."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty field file")
    header = rows[0]
    if header == ["i", "x", "value"]:
        dim = 1
    elif header == ["i", "j", "x", "y", "value"]:
        dim = 2
    else:
        raise ValueError(f"{path}: unrecognised header {header}")
    body = rows[1:]
    npts = round(len(body) ** (1.0 / dim))
    if npts ** dim != len(body) or npts < 3:
        raise ValueError(f"{path}: {len(body)} rows do not form a square lattice")
    grid = build_grid(dim, npts - 1)
    values = np.empty(grid.size)
    for node, row in enumerate(body):
        if len(row) != len(header):
            raise ValueError(f"{path}: malformed row {node + 2}")
        ij = tuple(int(s) for s in row[:dim])
        if ij != tuple(int(a[node]) for a in grid.lattice):
            raise ValueError(f"{path}: rows are not in row-major order")
        values[node] = float(row[-1])
    if not np.all(np.isfinite(values)):
        raise ValueError(f"{path}: non-finite values")
    return grid, values
