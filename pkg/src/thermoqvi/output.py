"""Persisting solved states and trajectories: field CSVs, a JSON report,
the trajectory summary table and an optional legacy-VTK file."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .discretization import Grid, integrate, read_field_csv, write_field_csv
from .elliptic import ConditionReport, EllipticState, SolveReport
from .quasistatic import Trajectory

__all__ = [
    "STATE_FIELDS",
    "write_state",
    "read_state",
    "write_report",
    "read_report",
    "state_report",
    "write_step",
    "write_trajectory",
    "read_trajectory_states",
    "trajectory_rows",
    "write_vtk",
]

STATE_FIELDS = ("theta1", "theta2", "phi", "u", "chi")
TRAJECTORY_HEADER = ["k", "t", "||theta1||_inf", "||theta1-theta2||_inf",
                     "contact_fraction", "residual"]


def _num(v: float) -> str:
    return f"{float(v):.17g}"


def write_state(directory, grid: Grid, state: EllipticState) -> None:
    """One CSV per field; the relaxed weight goes to chi_eps.csv when known."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for name in STATE_FIELDS:
        write_field_csv(d / f"{name}.csv", grid, getattr(state, name))
    if state.report is not None and state.report.chi_eps is not None:
        write_field_csv(d / "chi_eps.csv", grid, state.report.chi_eps)


def read_state(directory) -> tuple[Grid, EllipticState]:
    d = Path(directory)
    grid = None
    fields = {}
    for name in STATE_FIELDS:
        g, values = read_field_csv(d / f"{name}.csv")
        if grid is not None and g != grid:
            raise ValueError(f"{d / name}.csv: grid differs from the other fields")
        grid = g
        fields[name] = values
    return grid, EllipticState(**fields)


def _clean(obj):
    """JSON-safe copy: non-finite floats become null, arrays become lists."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def _condition(rep: ConditionReport | None):
    if rep is None:
        return None
    return {"lhs": rep.lhs, "rhs": rep.rhs, "margin": rep.margin,
            "applicable": rep.applicable, "holds": rep.holds, "k_grad": rep.k_grad,
            "reason": rep.reason}


def state_report(report: SolveReport | None) -> dict:
    if report is None:
        return {}
    nd = report.nondegeneracy or (None, None)
    return {
        "converged": report.converged,
        "stages": [{"eps": s.eps, "iterations": s.iterations, "residual": s.residual,
                    "damping": s.damping, "converged": s.converged}
                   for s in report.stages],
        "fixed_point_residual": report.fixed_point_residual,
        "eps_reached": report.eps_reached,
        "polish_iterations": report.polish_iterations,
        "regular": report.regular,
        "delta_contact": report.delta_contact,
        "residuals": dict(sorted(report.residuals.items())),
        "nondegeneracy_pointwise": _condition(nd[0]),
        "nondegeneracy_sufficient": _condition(nd[1]),
        "uniqueness": _condition(report.uniqueness),
    }


def write_report(path, payload: dict) -> None:
    text = json.dumps(_clean(payload), indent=2, sort_keys=True, allow_nan=False)
    Path(path).write_text(text + "\n")


def read_report(path) -> dict:
    return json.loads(Path(path).read_text())


def trajectory_rows(traj: Trajectory) -> list[list[str]]:
    rows = []
    for k, s in enumerate(traj.states, start=1):
        res = max(s.report.residuals.values()) if s.report is not None else math.nan
        rows.append([str(k), _num(traj.time.times[k]),
                     _num(np.max(np.abs(s.theta1))),
                     _num(np.max(np.abs(s.theta1 - s.theta2))),
                     _num(integrate(traj.grid, s.chi)), _num(res)])
    return rows


def write_step(directory, k: int, grid: Grid, state: EllipticState) -> None:
    write_state(Path(directory) / f"step_{k}", grid, state)


def write_trajectory(directory, traj: Trajectory, states: bool = True) -> None:
    """step_0 holds the initial temperatures, step_k (k >= 1) full states.
    Pass ``states=False`` when the steps were already streamed with
    :func:`write_step`."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    s0 = d / "step_0"
    s0.mkdir(exist_ok=True)
    write_field_csv(s0 / "theta1.csv", traj.grid, traj.theta10)
    write_field_csv(s0 / "theta2.csv", traj.grid, traj.theta20)
    if states:
        for k, state in enumerate(traj.states, start=1):
            write_step(d, k, traj.grid, state)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRAJECTORY_HEADER)
    w.writerows(trajectory_rows(traj))
    (d / "trajectory.csv").write_text(buf.getvalue())


def read_trajectory_states(directory, N: int):
    """(grid, theta10, theta20, states) from step_0..step_N."""
    d = Path(directory)
    grid, t10 = read_field_csv(d / "step_0" / "theta1.csv")
    g2, t20 = read_field_csv(d / "step_0" / "theta2.csv")
    if g2 != grid:
        raise ValueError("initial temperatures live on different grids")
    states = []
    for k in range(1, N + 1):
        gk, s = read_state(d / f"step_{k}")
        if gk != grid:
            raise ValueError(f"step_{k}: grid differs from step_0")
        states.append(s)
    return grid, t10, t20, tuple(states)


def write_vtk(path, grid: Grid, fields: dict) -> None:
    """Legacy ASCII VTK structured points with one scalar array per field."""
    n1 = grid.n + 1
    dims = (n1, 1, 1) if grid.dim == 1 else (n1, n1, 1)
    spacing = (grid.h, 1.0, 1.0) if grid.dim == 1 else (grid.h, grid.h, 1.0)
    lines = ["# vtk DataFile Version 3.0", "thermoqvi fields", "ASCII",
             "DATASET STRUCTURED_POINTS",
             "DIMENSIONS {} {} {}".format(*dims),
             "ORIGIN 0 0 0",
             "SPACING {} {} {}".format(*(_num(s) for s in spacing)),
             f"POINT_DATA {grid.size}"]
    for name, values in fields.items():
        # VTK runs x fastest; our row-major order runs the last axis fastest.
        v = np.asarray(values, dtype=float).reshape(grid.shape)
        if grid.dim == 2:
            v = v.T
        lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        lines += [_num(x) for x in v.ravel()]
    Path(path).write_text("\n".join(lines) + "\n")
