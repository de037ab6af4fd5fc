"""Scenario files: flat ``section.key = value`` lines with ``#`` comments.

Source values are arithmetic expressions over x, y, t built from numbers,
parentheses, + - * / and the functions min, max, abs; or ``csv:<path>`` to
read a nodal field written in the field CSV format.
"""

from __future__ import annotations

import ast
import hashlib
from dataclasses import dataclass
from functools import reduce
from pathlib import Path
from typing import Callable

import numpy as np

from .contact import ContactParams
from .discretization import Grid, build_grid, read_field_csv
from .elliptic import RegSchedule, SolverParams, Sources
from .quasistatic import TimeGrid, TimeSources
from .thermal import CoefficientFunction, Coefficients
from .verify import ELLIPTIC_MANIFEST, QUASISTATIC_MANIFEST, VerifyConfig

__all__ = ["ConfigError", "ScenarioConfig", "parse_config", "load_config", "compile_expr"]


class ConfigError(ValueError):
    pass


_FLOAT = {
    "coeffs.kappa1", "coeffs.kappa2", "coeffs.c1", "coeffs.c2", "coeffs.b1", "coeffs.b2",
    "coeffs.alpha", "a.value", "a.lambda1", "a.lambda2",
    "schedule.eps0", "schedule.factor", "schedule.eps_min",
    "solver.tol", "solver.damping", "solver.thermal_tol", "solver.mould_tol",
    "contact.delta", "contact.omega", "contact.tol",
    "time.T", "verify.tol", "verify.gap_rate_min",
}
_INT = {"grid.dim", "grid.n", "solver.max_outer", "solver.max_polish", "contact.max_iter",
        "time.N", "time.quad_points", "run.seed"}
_TEXT = {"a.table", "sources.f", "sources.g", "sources.h1", "sources.h2",
         "initial.theta1", "initial.theta2"}
_CHECK_NAMES = set(ELLIPTIC_MANIFEST) | set(QUASISTATIC_MANIFEST) | {"l1_dependence"}


def _known(key: str) -> bool:
    if key in _FLOAT or key in _INT or key in _TEXT:
        return True
    return key.startswith("verify.tol.") and key[len("verify.tol."):] in _CHECK_NAMES


# --------------------------------------------------------------------------
# expressions

_FUNCS = {
    "min": lambda *a: reduce(np.minimum, a),
    "max": lambda *a: reduce(np.maximum, a),
    "abs": lambda a: np.abs(a),
}


def _check_node(node, names: set[str]):
    if isinstance(node, ast.Expression):
        _check_node(node.body, names)
    elif isinstance(node, ast.BinOp):
        if not isinstance(node.op, (ast.Add, ast.Sub, ast.Mult, ast.Div)):
            raise ConfigError(f"operator {type(node.op).__name__} not allowed")
        _check_node(node.left, names)
        _check_node(node.right, names)
    elif isinstance(node, ast.UnaryOp):
        if not isinstance(node.op, (ast.UAdd, ast.USub)):
            raise ConfigError(f"operator {type(node.op).__name__} not allowed")
        _check_node(node.operand, names)
    elif isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            raise ConfigError(f"literal {node.value!r} is not a number")
    elif isinstance(node, ast.Name):
        if node.id not in names:
            raise ConfigError(f"unknown variable {node.id!r} (allowed: {sorted(names)})")
    elif isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS or node.keywords:
            raise ConfigError("only min(...), max(...) and abs(...) calls are allowed")
        n = len(node.args)
        if node.func.id == "abs" and n != 1 or node.func.id != "abs" and n < 2:
            raise ConfigError(f"wrong number of arguments to {node.func.id}")
        for a in node.args:
            _check_node(a, names)
    else:
        raise ConfigError(f"unsupported syntax: {type(node).__name__}")


def _eval(node, env):
    if isinstance(node, ast.Expression):
        return _eval(node.body, env)
    if isinstance(node, ast.BinOp):
        a, b = _eval(node.left, env), _eval(node.right, env)
        if isinstance(node.op, ast.Add):
            return a + b
        if isinstance(node.op, ast.Sub):
            return a - b
        if isinstance(node.op, ast.Mult):
            return a * b
        return a / b
    if isinstance(node, ast.UnaryOp):
        v = _eval(node.operand, env)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.Constant):
        return float(node.value)
    if isinstance(node, ast.Name):
        return env[node.id]
    return _FUNCS[node.func.id](*(_eval(a, env) for a in node.args))


def compile_expr(text: str, names=("x", "y", "t")) -> Callable[..., np.ndarray]:
    """Compile an expression into fn(**variables)."""
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse expression {text!r}: {exc.msg}") from None
    _check_node(tree, set(names))

    def fn(**env):
        with np.errstate(divide="raise", invalid="raise"):
            try:
                return _eval(tree, env)
            except FloatingPointError as exc:
                raise ConfigError(f"expression {text!r}: {exc}") from None

    return fn


# --------------------------------------------------------------------------
# scenario


@dataclass(frozen=True)
class ScenarioConfig:
    values: dict
    base_dir: Path
    grid: Grid
    coeffs: Coefficients
    schedule: RegSchedule
    params: SolverParams
    verify: VerifyConfig
    time: TimeGrid | None
    quad_points: int
    seed: int

    @property
    def text(self) -> str:
        """Normalised config: sorted keys, csv paths made absolute."""
        return "".join(f"{k} = {v}\n" for k, v in sorted(self.values.items()))

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.text.encode()).hexdigest()

    def _field(self, key: str, names) -> Callable:
        value = self.values.get(key, "0")
        grid = self.grid
        if value.startswith("csv:"):
            path = Path(value[4:].strip())
            try:
                fgrid, vals = read_field_csv(path)
            except (OSError, ValueError) as exc:
                raise ConfigError(f"{key}: {exc}") from None
            if fgrid != grid:
                raise ConfigError(f"{key}: field grid {fgrid} does not match {grid}")
            return lambda **env: vals
        fn = compile_expr(value, names)
        coords = {"x": grid.x}
        if grid.dim == 2:
            coords["y"] = grid.y

        def gen(**env):
            return np.array(np.broadcast_to(fn(**coords, **env), (grid.size,)), dtype=float)

        return gen

    def _space_names(self, with_t: bool):
        names = ["x"] + (["y"] if self.grid.dim == 2 else [])
        return tuple(names + (["t"] if with_t else []))

    def sources(self) -> Sources:
        names = self._space_names(False)
        vals = {k: self._field(f"sources.{k}", names)() for k in ("f", "g", "h1", "h2")}
        return Sources.on(self.grid, **vals)

    def time_sources(self) -> TimeSources:
        for k in ("initial.theta1", "initial.theta2"):
            if k not in self.values:
                raise ConfigError(f"missing initial field {k}")
        names = self._space_names(True)
        gens = {k: self._field(f"sources.{k}", names) for k in ("f", "g", "h1", "h2")}
        init = self._space_names(False)
        t10 = self._field("initial.theta1", init)()
        t20 = self._field("initial.theta2", init)()

        def wrap(fn):
            return lambda t: fn(t=float(t))

        return TimeSources(wrap(gens["f"]), wrap(gens["g"]), wrap(gens["h1"]),
                           wrap(gens["h2"]), t10, t20)


def _parse_table(text: str):
    pts = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        if ":" not in item:
            raise ConfigError(f"a.table entry {item!r} is not 'abscissa:value'")
        s, v = item.split(":", 1)
        try:
            pts.append((float(s), float(v)))
        except ValueError:
            raise ConfigError(f"a.table entry {item!r} is not numeric") from None
    if len(pts) < 2:
        raise ConfigError("a.table needs at least two points")
    return [p[0] for p in pts], [p[1] for p in pts]


def parse_config(text: str, base_dir=".", mode: str = "elliptic") -> ScenarioConfig:
    """Parse and validate; ``mode`` is 'elliptic' or 'quasistatic'."""
    base_dir = Path(base_dir).resolve()
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'section.key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not _known(key):
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if not value:
            raise ConfigError(f"line {lineno}: empty value for {key!r}")
        if value.startswith("csv:"):
            p = Path(value[4:].strip())
            value = "csv:" + str(p if p.is_absolute() else (base_dir / p).resolve())
        raw[key] = value

    def num(key, default=None, kind=float):
        if key not in raw:
            if default is None:
                raise ConfigError(f"missing required key {key!r}")
            return default
        try:
            return kind(raw[key])
        except ValueError:
            raise ConfigError(f"{key}: {raw[key]!r} is not a valid {kind.__name__}") from None

    try:
        grid = build_grid(num("grid.dim", 1, int), num("grid.n", None, int))
        if "a.table" in raw:
            if "a.value" in raw:
                raise ConfigError("give either a.value or a.table, not both")
            s, v = _parse_table(raw["a.table"])
            lam1 = num("a.lambda1") if "a.lambda1" in raw else None
            lam2 = num("a.lambda2") if "a.lambda2" in raw else None
            a = CoefficientFunction.table(s, v, lam1, lam2)
        else:
            a = CoefficientFunction.constant(num("a.value", 1.0))
        coeffs = Coefficients(
            kappa1=num("coeffs.kappa1", 1.0), kappa2=num("coeffs.kappa2", 1.0),
            c1=num("coeffs.c1", 1.0), c2=num("coeffs.c2", 1.0),
            b1=num("coeffs.b1", 0.0), b2=num("coeffs.b2", 0.0),
            alpha=num("coeffs.alpha", 0.0), a=a)
        if coeffs.c0 <= 0:
            raise ConfigError(f"coercivity constant c0 = {coeffs.c0} is not positive")
        schedule = RegSchedule(num("schedule.eps0", 1.0), num("schedule.factor", 0.5),
                               num("schedule.eps_min") if "schedule.eps_min" in raw else None)
        contact = ContactParams(
            num("contact.delta") if "contact.delta" in raw else None,
            num("contact.omega", 1.5), num("contact.tol", 1e-11),
            num("contact.max_iter", 200000, int))
        params = SolverParams(
            tol=num("solver.tol", 1e-9), damping=num("solver.damping", 1.0),
            max_outer=num("solver.max_outer", 500, int),
            thermal_tol=num("solver.thermal_tol", 1e-11),
            mould_tol=num("solver.mould_tol", 1e-12),
            max_polish=num("solver.max_polish", 50, int), contact=contact)
        overrides = {k[len("verify.tol."):]: num(k) for k in raw if k.startswith("verify.tol.")}
        vcfg = VerifyConfig(num("verify.tol", 1e-6), overrides,
                            num("verify.gap_rate_min", 0.35))
        tg = None
        if mode == "quasistatic":
            tg = TimeGrid(num("time.T", 1.0), num("time.N", None, int))
        elif any(k.startswith("time.") or k.startswith("initial.") for k in raw):
            raise ConfigError("time.* and initial.* keys only apply to quasistatic runs")
        quad = num("time.quad_points", 8, int)
        if quad < 1:
            raise ConfigError("time.quad_points must be >= 1")
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    cfg = ScenarioConfig(raw, base_dir, grid, coeffs, schedule, params, vcfg, tg, quad,
                         num("run.seed", 0, int))
    # Evaluate every source once so bad expressions fail at parse time.
    if mode == "quasistatic":
        ts = cfg.time_sources()
        for fn in (ts.f, ts.g, ts.h1, ts.h2):
            fn(0.0)
    else:
        cfg.sources()
    return cfg


def load_config(path, mode: str = "elliptic") -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, path.parent, mode)
