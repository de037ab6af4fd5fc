import numpy as np
import pytest
import sympy as sym
from hypothesis import given, settings
from hypothesis import strategies as st

from thermoqvi.discretization import (ScalarField, apply_neumann, assemble_Atheta,
                                      assemble_dirichlet_laplacian, assemble_neumann_helmholtz,
                                      build_grid, integrate, read_field_csv, write_field_csv)
from thermoqvi.linalg import cg_solve
from thermoqvi.thermal import CoefficientFunction

dims = st.sampled_from([1, 2])
sizes = st.integers(min_value=2, max_value=12)


def test_grid_1d_nodes():
    g = build_grid(1, 4)
    assert g.size == 5
    assert g.h == 0.25
    np.testing.assert_array_equal(g.x, [0, 0.25, 0.5, 0.75, 1])


def test_grid_2d_counts():
    g = build_grid(2, 2)
    assert g.size == 9 and g.h == 0.5
    assert list(g.interior) == [4]
    assert g.boundary.sum() == 8


@pytest.mark.parametrize("dim,n", [(1, 1), (2, 0), (3, 4), (1, -2)])
def test_grid_rejects_bad_sizes(dim, n):
    with pytest.raises(ValueError):
        build_grid(dim, n)


def test_row_major_indexing():
    g = build_grid(2, 3)
    i, j = g.lattice
    np.testing.assert_array_equal(i * (g.n + 1) + j, np.arange(g.size))
    np.testing.assert_allclose(g.x, i * g.h)
    np.testing.assert_allclose(g.y, j * g.h)


def test_scalar_field_zero_trace_enforced():
    g = build_grid(1, 4)
    ScalarField(g, np.array([0, 1, 2, 1, 0.0]), "zero-trace")
    with pytest.raises(ValueError):
        ScalarField(g, np.ones(5), "zero-trace")
    with pytest.raises(ValueError):
        ScalarField(g, np.ones(4))
    with pytest.raises(ValueError):
        ScalarField(g, np.array([0, np.nan, 0, 0, 0]))


def test_neumann_row_sums_vanish_without_reaction():
    g = build_grid(1, 2)
    A = assemble_neumann_helmholtz(g, 1.0, 0.0)
    np.testing.assert_array_equal(np.asarray(A.sum(axis=1)).ravel(), 0.0)


def test_neumann_constant_field_with_unit_reaction():
    g = build_grid(1, 2)
    A = assemble_neumann_helmholtz(g, 1.0, 1.0)
    np.testing.assert_allclose(apply_neumann(g, A, np.full(g.size, 5.0)), 5.0, rtol=0, atol=1e-13)


def test_neumann_polynomial_against_centered_difference():
    # x(1-x)y(1-y) on grid(2,4), kappa=2: compare with the mirrored 5-point stencil
    g = build_grid(2, 4)
    v = g.x * (1 - g.x) * g.y * (1 - g.y)
    A = assemble_neumann_helmholtz(g, 2.0, 0.0)
    out = apply_neumann(g, A, v)
    V = g.reshape(v)
    P = np.pad(V, 1, mode="reflect")
    lap = (P[2:, 1:-1] + P[:-2, 1:-1] + P[1:-1, 2:] + P[1:-1, :-2] - 4 * V) / g.h**2
    np.testing.assert_allclose(out, -2.0 * lap.ravel(), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(dims, sizes, st.floats(0.1, 5.0), st.integers(0, 2**31 - 1))
def test_neumann_symmetric_and_positive(dim, n, kappa, seed):
    g = build_grid(dim, n)
    rng = np.random.default_rng(seed)
    c = rng.random(g.size) + 0.1
    A = assemble_neumann_helmholtz(g, kappa, c)
    assert abs(A - A.T).max() == 0
    v = rng.standard_normal(g.size)
    w = rng.standard_normal(g.size)
    assert v @ (A @ w) == pytest.approx(w @ (A @ v), rel=1e-12, abs=1e-12)
    assert v @ (A @ v) > 0


@settings(max_examples=20, deadline=None)
@given(dims, sizes)
def test_neumann_annihilates_constants(dim, n):
    g = build_grid(dim, n)
    A = assemble_neumann_helmholtz(g, 1.7, 0.0)
    assert np.max(np.abs(A @ np.ones(g.size))) < 1e-9 * (1 / g.h**2)


def test_neumann_rejects_bad_inputs():
    g = build_grid(1, 4)
    with pytest.raises(ValueError):
        assemble_neumann_helmholtz(g, 0.0, 1.0)
    with pytest.raises(ValueError):
        assemble_neumann_helmholtz(g, 1.0, -1.0)


def test_dirichlet_single_unknown():
    g = build_grid(1, 2)
    A = assemble_dirichlet_laplacian(g)
    assert A.shape == (1, 1)
    assert A[0, 0] == 8.0


def test_dirichlet_exact_for_quadratics():
    g = build_grid(1, 4)
    A = assemble_dirichlet_laplacian(g)
    x, _ = cg_solve(A, np.ones(3), 1e-14)
    xs = g.x[g.interior]
    np.testing.assert_allclose(x, xs * (1 - xs) / 2, atol=1e-14)


@settings(max_examples=20, deadline=None)
@given(dims, sizes, st.integers(0, 2**31 - 1))
def test_dirichlet_symmetric_spd(dim, n, seed):
    g = build_grid(dim, n)
    rng = np.random.default_rng(seed)
    k = rng.random(g.edges[0].size) + 0.5
    A = assemble_dirichlet_laplacian(g, k)
    assert abs(A - A.T).max() == 0
    v = rng.standard_normal(A.shape[0])
    assert v @ (A @ v) > 0


def test_dirichlet_rejects_nonpositive_edges():
    g = build_grid(1, 4)
    with pytest.raises(ValueError):
        assemble_dirichlet_laplacian(g, 0.0)


def test_atheta_constant_coefficient_scales_laplacian():
    g = build_grid(2, 5)
    theta = np.random.default_rng(0).random(g.size)
    A3 = assemble_Atheta(g, CoefficientFunction.constant(3.0), theta)
    L = assemble_dirichlet_laplacian(g)
    assert abs(A3 - 3 * L).max() < 1e-12


def test_atheta_clamped_table_at_constant_theta():
    g = build_grid(1, 8)
    a = CoefficientFunction.table([0.0, 1.0], [1.0, 2.0])
    A = assemble_Atheta(g, a, np.ones(g.size))
    assert abs(A - 2 * assemble_dirichlet_laplacian(g)).max() < 1e-12
    A5 = assemble_Atheta(g, a, np.full(g.size, 5.0))  # clamps to a = 2
    assert abs(A5 - A).max() == 0


def test_atheta_symbolic_oracle_second_order():
    x = sym.symbols("x")
    theta = x
    u = x * (1 - x)
    exact = sym.lambdify(x, -sym.diff((1 + theta**2) * sym.diff(u, x), x))
    errs = []
    for n in (8, 16, 32):
        g = build_grid(1, n)
        A = assemble_Atheta(g, lambda s: 1 + s**2, g.x)
        xi = g.x[g.interior]
        errs.append(np.max(np.abs(A @ (xi * (1 - xi)) - exact(xi))))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 1.8)


def test_integrate_exactness():
    assert integrate(build_grid(2, 7), 2.0) == pytest.approx(2.0, abs=1e-14)
    for n in (2, 5, 9):
        g = build_grid(1, n)
        assert integrate(g, g.x) == pytest.approx(0.5, abs=1e-14)
    g = build_grid(1, 4)
    assert integrate(g, g.x**2) == pytest.approx(0.34375, abs=1e-15)


def test_csv_format_1d(tmp_path):
    g = build_grid(1, 2)
    p = tmp_path / "f.csv"
    write_field_csv(p, g, [0.1, 1 / 3, 2.0])
    lines = p.read_text().splitlines()
    assert lines[0] == "i,x,value"
    assert lines[2] == "1,0.5,0.33333333333333331"


def test_csv_format_2d_header(tmp_path):
    g = build_grid(2, 2)
    p = tmp_path / "f.csv"
    write_field_csv(p, g, np.arange(9.0))
    lines = p.read_text().splitlines()
    assert lines[0] == "i,j,x,y,value"
    assert lines[2] == "0,1,0,0.5,1"
    assert len(lines) == 10


@settings(max_examples=25, deadline=None)
@given(dims, st.integers(2, 6), st.data())
def test_csv_roundtrip_exact(tmp_path_factory, dim, n, data):
    g = build_grid(dim, n)
    vals = np.array(data.draw(st.lists(st.floats(allow_nan=False, allow_infinity=False),
                                       min_size=g.size, max_size=g.size)))
    p = tmp_path_factory.mktemp("rt") / "f.csv"
    write_field_csv(p, g, vals)
    g2, back = read_field_csv(p)
    assert g2 == g
    np.testing.assert_array_equal(back, vals)


def test_csv_rejects_reordered_rows(tmp_path):
    g = build_grid(1, 3)
    p = tmp_path / "f.csv"
    write_field_csv(p, g, np.arange(4.0))
    lines = p.read_text().splitlines()
    lines[1], lines[2] = lines[2], lines[1]
    p.write_text("\n".join(lines) + "\n")
    with pytest.raises(ValueError):
        read_field_csv(p)


def test_csv_rejects_bad_header(tmp_path):
    p = tmp_path / "f.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        read_field_csv(p)
