"""Command-line front end.

    thermoqvi solve-elliptic    --config FILE --out DIR [--vtk] [--no-figures]
    thermoqvi solve-quasistatic --config FILE --out DIR [--vtk] [--no-figures]
    thermoqvi verify --in DIR

Exit codes: 0 success, 1 verification failures (verify only), 2 usage or
configuration error, 3 solver did not converge.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .config import ConfigError, ScenarioConfig, load_config, parse_config
from .elliptic import continuation_solve
from .output import (read_report, read_state, read_trajectory_states, state_report,
                     write_report, write_state, write_step, write_trajectory, write_vtk)
from .quasistatic import Trajectory, clement_sources, run_quasistatic
from .verify import all_passed, format_checks, run_elliptic_checks, run_quasistatic_checks

__all__ = ["main", "cmd_solve_elliptic", "cmd_solve_quasistatic", "cmd_verify"]

log = logging.getLogger("thermoqvi")

EXIT_OK, EXIT_CHECKS, EXIT_USAGE, EXIT_DIVERGED = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _prepare(out: Path, cfg: ScenarioConfig, kind: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(cfg.text)
    log.info("%s run, config sha256 %s", kind, cfg.digest)


def _finish(out: Path, cfg: ScenarioConfig, kind: str, converged: bool, checks,
            extra: dict) -> int:
    text = format_checks(checks)
    (out / "checks.csv").write_text(text)
    failed = [r.name for r in checks if r.applicable and not r.passed]
    payload = {"kind": kind, "version": __version__, "config_sha256": cfg.digest,
               "converged": converged, "checks_passed": not failed,
               "failed_checks": failed}
    payload.update(extra)
    write_report(out / "report.json", payload)
    print(f"{kind}: converged={str(converged).lower()} "
          f"checks_failed={len(failed)} out={out}")
    return EXIT_OK if converged else EXIT_DIVERGED


def cmd_solve_elliptic(config, out, vtk: bool = False, figures: bool = True) -> int:
    cfg = load_config(config, "elliptic")
    out = Path(out)
    _prepare(out, cfg, "elliptic")
    src = cfg.sources()
    state = continuation_solve(cfg.grid, cfg.coeffs, src, cfg.schedule, cfg.params)
    write_state(out, cfg.grid, state)
    if vtk:
        fields = {k: getattr(state, k) for k in ("theta1", "theta2", "phi", "u", "chi")}
        write_vtk(out / "fields.vtk", cfg.grid, fields)
    if figures:
        from .plotting import plot_state
        plot_state(cfg.grid, state, out / "state.png")
    checks = run_elliptic_checks(cfg.grid, state, cfg.coeffs, src, cfg.params, cfg.verify)
    return _finish(out, cfg, "elliptic", state.report.converged, checks,
                   {"solve": state_report(state.report)})


def cmd_solve_quasistatic(config, out, vtk: bool = False, figures: bool = True) -> int:
    cfg = load_config(config, "quasistatic")
    out = Path(out)
    _prepare(out, cfg, "quasistatic")
    grid = cfg.grid

    def stream(k, state):
        write_step(out, k, grid, state)
        log.info("step %d/%d converged=%s", k, cfg.time.N, state.report.converged)

    traj = run_quasistatic(grid, cfg.time_sources(), cfg.time, cfg.coeffs, cfg.schedule,
                           cfg.params, cfg.quad_points, on_step=stream)
    write_trajectory(out, traj, states=False)
    if vtk:
        for k, s in enumerate(traj.states, start=1):
            fields = {n: getattr(s, n) for n in ("theta1", "theta2", "phi", "u", "chi")}
            write_vtk(out / f"step_{k}" / "fields.vtk", grid, fields)
    if figures:
        from .plotting import plot_state, plot_trajectory
        plot_trajectory(traj, out / "trajectory.png")
        plot_state(grid, traj.states[-1], out / "final_state.png")
    checks = run_quasistatic_checks(traj, cfg.schedule, cfg.params, cfg.verify)
    steps = [state_report(s.report) for s in traj.states]
    return _finish(out, cfg, "quasistatic", traj.converged, checks,
                   {"T": cfg.time.T, "N": cfg.time.N, "steps": steps})


def _load_outputs(directory: Path):
    if not directory.is_dir():
        raise UsageError(f"{directory} is not a directory")
    for name in ("config.txt", "report.json"):
        if not (directory / name).is_file():
            raise UsageError(f"{directory} has no {name}; not a solver output directory")
    report = read_report(directory / "report.json")
    kind = report.get("kind")
    if kind not in ("elliptic", "quasistatic"):
        raise UsageError(f"report.json has unknown kind {kind!r}")
    cfg = parse_config((directory / "config.txt").read_text(), directory, kind)
    if report.get("config_sha256") != cfg.digest:
        raise UsageError("config.txt does not match the hash stamped in report.json")
    return kind, cfg


def _read_fields(directory: Path, kind: str, cfg: ScenarioConfig):
    try:
        if kind == "elliptic":
            grid, state = read_state(directory)
            data = state
        else:
            grid, t10, t20, states = read_trajectory_states(directory, cfg.time.N)
            data = (t10, t20, states)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read stored fields: {exc}") from None
    if grid != cfg.grid:
        raise UsageError(f"stored fields live on {grid}, config says {cfg.grid}")
    return data


def cmd_verify(directory) -> int:
    """Recompute the scorecard from persisted fields and print it."""
    directory = Path(directory)
    kind, cfg = _load_outputs(directory)
    data = _read_fields(directory, kind, cfg)
    if kind == "elliptic":
        checks = run_elliptic_checks(cfg.grid, data, cfg.coeffs, cfg.sources(),
                                     cfg.params, cfg.verify)
    else:
        t10, t20, states = data
        src = cfg.time_sources()
        steps = clement_sources(cfg.grid, src, cfg.time, cfg.quad_points)
        traj = Trajectory(cfg.grid, cfg.time, cfg.coeffs, src, tuple(steps), states,
                          t10, t20, cfg.quad_points)
        checks = run_quasistatic_checks(traj, cfg.schedule, cfg.params, cfg.verify)
    sys.stdout.write(format_checks(checks))
    return EXIT_OK if all_passed(checks) else EXIT_CHECKS


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="thermoqvi",
                                description="Thermoforming contact solver and verifier.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("solve-elliptic", "solve the stationary problem"),
                        ("solve-quasistatic", "run implicit Euler time stepping")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", required=True, help="scenario file (section.key = value)")
        s.add_argument("--out", required=True, help="output directory")
        s.add_argument("--vtk", action="store_true", help="also write legacy VTK files")
        s.add_argument("--no-figures", action="store_true", help="skip PNG figures")
    v = sub.add_parser("verify", help="recompute the scorecard of a stored run")
    v.add_argument("--in", dest="indir", required=True, help="output directory of a solve")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "verify":
            return cmd_verify(args.indir)
        run = cmd_solve_elliptic if args.command == "solve-elliptic" else cmd_solve_quasistatic
        return run(args.config, args.out, args.vtk, not args.no_figures)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
