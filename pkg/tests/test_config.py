import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thermoqvi.config import ConfigError, compile_expr, load_config, parse_config
from thermoqvi.discretization import build_grid, write_field_csv

BASE = "grid.dim = 1\ngrid.n = 8\n"


def test_defaults_and_values():
    cfg = parse_config(BASE + "coeffs.b1 = 2  # comment\nsources.f = 32\n")
    assert cfg.grid == build_grid(1, 8)
    assert cfg.coeffs.b1 == 2.0 and cfg.coeffs.c1 == 1.0 and cfg.coeffs.alpha == 0.0
    assert cfg.coeffs.a.is_constant and cfg.coeffs.a.value == 1.0
    assert cfg.params.tol == 1e-9 and cfg.verify.tol == 1e-6
    assert cfg.time is None and cfg.seed == 0
    np.testing.assert_array_equal(cfg.sources().f, 32.0)
    np.testing.assert_array_equal(cfg.sources().h2, 0.0)


def test_text_is_normalised_and_hashed():
    a = parse_config(BASE + "sources.f = 1\n")
    b = parse_config("# reordered\nsources.f   =   1\ngrid.n = 8\n\ngrid.dim = 1\n")
    assert a.text == b.text
    assert a.digest == b.digest and len(a.digest) == 64
    assert a.digest != parse_config(BASE + "sources.f = 2\n").digest


@pytest.mark.parametrize("text,fragment", [
    ("grid.dim = 1\n", "grid.n"),
    (BASE + "coeffs.beta = 1\n", "unknown key"),
    (BASE + "coeffs.b1 = 1\ncoeffs.b1 = 2\n", "duplicate"),
    (BASE + "coeffs.b1 =\n", "empty value"),
    (BASE + "just words\n", "expected"),
    (BASE + "grid.n = 4\n", "duplicate"),
    ("grid.dim = 1\ngrid.n = 1\n", "grid"),
    ("grid.dim = 1\ngrid.n = two\n", "not a valid int"),
    (BASE + "coeffs.c1 = 1\ncoeffs.c2 = 1\ncoeffs.b1 = 9\ncoeffs.b2 = 1\n", "c0"),
    (BASE + "a.value = 1\na.table = 0:1, 1:2\n", "either"),
    (BASE + "a.table = 0:1\n", "two points"),
    (BASE + "a.table = 0-1, 1:2\n", "abscissa"),
    (BASE + "solver.damping = 1.5\n", "damping"),
    (BASE + "time.N = 4\n", "quasistatic"),
    (BASE + "sources.f = x ** 2\n", "Pow"),
    (BASE + "sources.f = t\n", "unknown variable"),
    (BASE + "sources.f = sin(x)\n", "calls"),
    (BASE + "sources.f = 1 / (x - x)\n", "expression"),
    (BASE + "sources.f = csv:missing.csv\n", "sources.f"),
    (BASE + "verify.tol.nonsense = 1\n", "unknown key"),
])
def test_rejections(text, fragment):
    with pytest.raises(ConfigError, match=fragment):
        parse_config(text)


def test_quasistatic_mode():
    text = BASE + ("sources.h1 = 3 + t\ninitial.theta1 = 1\ninitial.theta2 = x\n"
                   "time.T = 2\ntime.N = 4\n")
    cfg = parse_config(text, mode="quasistatic")
    assert cfg.time.T == 2.0 and cfg.time.N == 4
    ts = cfg.time_sources()
    np.testing.assert_allclose(ts.h1(0.5), 3.5)
    np.testing.assert_allclose(ts.theta20, cfg.grid.x)
    with pytest.raises(ConfigError, match="initial"):
        parse_config(BASE + "time.N = 4\n", mode="quasistatic")
    with pytest.raises(ConfigError):
        parse_config(BASE + "initial.theta1 = 0\ninitial.theta2 = 0\ntime.N = 0\n",
                     mode="quasistatic")


def test_two_dimensional_expressions():
    cfg = parse_config("grid.dim = 2\ngrid.n = 4\nsources.g = x*y - min(x, y, 0.5)\n")
    g = cfg.grid
    np.testing.assert_allclose(cfg.sources().g, g.x * g.y - np.minimum(np.minimum(g.x, g.y), 0.5))


def test_table_coefficient_and_overrides():
    cfg = parse_config(BASE + "a.table = 0:1, 2:3\na.lambda1 = 0.5\n"
                       "verify.tol.heat_conservation = 1e-9\nschedule.eps_min = 0.01\n")
    assert cfg.coeffs.a.lam1 == 0.5 and cfg.coeffs.a.lam2 == 3.0
    assert cfg.verify.tol_for("heat_conservation") == 1e-9
    assert cfg.schedule.eps_min == 0.01


def test_csv_source_relative_to_config(tmp_path):
    g = build_grid(1, 8)
    write_field_csv(tmp_path / "h.csv", g, g.x**2)
    (tmp_path / "s.cfg").write_text(BASE + "sources.h1 = csv:h.csv\n")
    cfg = load_config(tmp_path / "s.cfg")
    np.testing.assert_array_equal(cfg.sources().h1, g.x**2)
    assert str(tmp_path) in cfg.values["sources.h1"]
    write_field_csv(tmp_path / "h3.csv", build_grid(1, 4), np.zeros(5))
    with pytest.raises(ConfigError, match="does not match"):
        parse_config(BASE + "sources.h1 = csv:h3.csv\n", tmp_path)


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "nope.cfg")


@settings(max_examples=50, deadline=None)
@given(st.floats(-100, 100), st.floats(-100, 100), st.floats(0.1, 10))
def test_expression_arithmetic_matches_python(a, b, c):
    fn = compile_expr(f"({a!r}) * x - ({b!r}) / ({c!r}) + abs(x - {b!r})", ("x",))
    x = np.linspace(0, 1, 5)
    np.testing.assert_allclose(fn(x=x), a * x - b / c + np.abs(x - b), rtol=1e-12, atol=1e-12)


def test_expression_rejects_code():
    for text in ("__import__('os')", "x.real", "[x]", "x if x else 1", "True", "'a'"):
        with pytest.raises(ConfigError):
            compile_expr(text, ("x",))
    with pytest.raises(ConfigError, match="parse"):
        compile_expr("1 +", ("x",))
