import numpy as np
import pytest

from thermoqvi.discretization import build_grid
from thermoqvi.elliptic import Sources
from thermoqvi.thermal import Coefficients

ACCEPTANCE_LINES: list[str] = []


def benchmark_coeffs() -> Coefficients:
    return Coefficients(b1=1.0, b2=1.0, alpha=1.0)


def benchmark_sources(grid) -> Sources:
    return Sources.on(grid, f=32.0, g=1.0, h1=3.0, h2=0.0)


@pytest.fixture(scope="session")
def bench_grid():
    return build_grid(1, 64)


@pytest.fixture(scope="session")
def bench_state(bench_grid):
    from thermoqvi.elliptic import continuation_solve

    return continuation_solve(bench_grid, benchmark_coeffs(), benchmark_sources(bench_grid))


def warm_numba():
    # Compile (or load from cache) the PSOR kernel once so timings measure solves.
    from thermoqvi.contact import solve_membrane

    g = build_grid(1, 4)
    phi = np.ones(g.size)
    phi[g.boundary] = 0.0
    solve_membrane(g, Coefficients(), g.zeros(), 100.0, phi)


@pytest.fixture(scope="session", autouse=True)
def _warm():
    warm_numba()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
