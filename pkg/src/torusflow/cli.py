"""Config-driven command line: hypothesis checks, flow runs, the slice ODE.

Subcommands::

    torusflow check <config.ini>       exit 0 if all hypotheses pass, 1 if not
    torusflow run <config.ini>         run the configured flow, write outputs
    torusflow slice-ode <config.ini>   integrate the slice ODE, write the table

``run`` writes into [output] out_dir: trace.csv (one row per sample),
field_initial.csv / field_final.csv (node coordinates + height),
monitors.txt / monitors.json, condition_report.txt, summary.json.  All output
is deterministic: identical configs produce byte-identical files.

``run`` exit codes: 0 stationary with all monitors passing, 2 hit the time or
step budget, 3 diverged, 4 stationary but a monitor failed, 5 the hypothesis
check failed.  Config or expression errors exit 1 (2 for ``check``).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .conditions import (
    check_prescribed_curvature_conditions,
    check_weighted_flow_conditions,
    check_product_flow_conditions,
)
from .config import ConfigError, RunConfig
from .flow import FlowProblem, run_to_stationary, slice_ode_solve
from .monitors import run_monitors
from .profiles import DomainError
from .warped import solve_prescribed_mc


def _fmt(x):
    return repr(float(x))


def _load_config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config)
    for assignment in args.set or []:
        cfg.apply_override(assignment)
    return cfg


def _write(path, text):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _write_json(path, obj):
    _write(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_field(path, grid, values):
    cols = [f"x{a + 1}" for a in range(grid.dim)] + ["u"]
    lines = [",".join(cols)]
    coords = grid.coords()
    flat_coords = [np.asarray(c).reshape(-1) for c in coords]
    flat_vals = np.asarray(values).reshape(-1)
    for i in range(len(flat_vals)):
        lines.append(",".join(_fmt(c[i]) for c in flat_coords) + "," + _fmt(flat_vals[i]))
    _write(path, "\n".join(lines) + "\n")


def _write_trace(path, trace):
    header = "t,sup_ut,sup_omega,min_u,max_u,energy,cumulative_dissipation"
    lines = [header]
    for k in range(len(trace.times)):
        lines.append(",".join(_fmt(v) for v in (
            trace.times[k], trace.sup_ut[k], trace.sup_omega[k],
            trace.min_u[k], trace.max_u[k], trace.energy[k],
            trace.cumulative_dissipation[k],
        )))
    _write(path, "\n".join(lines) + "\n")


def _condition_report(cfg, grid):
    kind = cfg.kind
    if kind == "product_flow":
        slab = cfg.slab()
        return check_product_flow_conditions(
            cfg.get_expr("data", "h"), cfg.get_expr("data", "g"), slab[0], slab[1], grid)
    if kind == "prescribed_mc":
        slab = cfg.slab()
        return check_prescribed_curvature_conditions(
            cfg.get_expr("data", "f"), cfg.build_profile(), slab[0], slab[1], grid)
    if kind == "weighted_warped_flow":
        slab = cfg.slab()
        return check_weighted_flow_conditions(cfg.build_profile(), slab[0], slab[1])
    raise ConfigError(f"[problem] kind {kind!r} has no hypothesis check")


def cmd_check(args) -> int:
    try:
        cfg = _load_config(args)
        grid = cfg.build_grid()
        report = _condition_report(cfg, grid)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(report.to_text())
    return 0 if report.passed else 1


def cmd_run(args) -> int:
    try:
        cfg = _load_config(args)
        grid = cfg.build_grid()
        kind = cfg.kind
        if kind == "slice_ode":
            raise ConfigError("use the slice-ode subcommand for slice_ode configs")
        out_dir = cfg.get_str("output", "out_dir")
        os.makedirs(out_dir, exist_ok=True)

        run_kwargs = dict(
            tol=cfg.get_float("integrator", "tol"),
            t_max=cfg.get_float("integrator", "t_max"),
            cfl=cfg.get_float("integrator", "cfl"),
            stride=cfg.get_int("integrator", "sample_stride"),
            max_steps=cfg.get_int("integrator", "max_steps"),
            backend=args.backend,
        )

        summary = {"kind": kind, "conditions_passed": None}
        report = None
        if not args.skip_checks:
            report = _condition_report(cfg, grid)
            _write(os.path.join(out_dir, "condition_report.txt"), report.to_text() + "\n")
            summary["conditions_passed"] = report.passed
            if not report.passed:
                summary["exit_code"] = 5
                _write_json(os.path.join(out_dir, "summary.json"), summary)
                print(report.to_text())
                print("hypothesis check failed; not running")
                return 5

        slab = cfg.slab()
        initial = cfg.build_initial(grid)
        extras = {}
        if kind == "product_flow":
            problem = FlowProblem.product(
                grid, cfg.get_expr("data", "h"), cfg.get_expr("data", "g"), initial, slab)
            trace = run_to_stationary(problem, **run_kwargs)
        elif kind == "prescribed_mc":
            profile = cfg.build_profile()
            result = solve_prescribed_mc(
                cfg.get_expr("data", "f"), profile, slab[0], slab[1], grid, initial,
                check=False, **run_kwargs)
            problem = None
            trace = result.trace
            extras["residual"] = result.residual
            extras["success"] = result.success
        else:  # weighted_warped_flow
            profile = cfg.build_profile()
            problem = FlowProblem.weighted(grid, profile, slab[0], slab[1], initial)
            trace = run_to_stationary(problem, **run_kwargs)
            if report is not None and "stationary_slice" in report.extras:
                x0 = report.extras["stationary_slice"]
                heights = profile.inverse(np.clip(trace.final.values, *profile.transform_range))
                extras["stationary_slice"] = x0
                extras["sup_distance_to_slice"] = float(np.abs(heights - x0).max())
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    monitors = run_monitors(trace)
    _write_trace(os.path.join(out_dir, "trace.csv"), trace)

    def to_height(values):
        if kind == "prescribed_mc":
            prof = cfg.build_profile()
            return prof.inverse(np.clip(values, *prof.transform_range))
        if kind == "weighted_warped_flow":
            return profile.inverse(np.clip(values, *profile.transform_range))
        return values

    _write_field(os.path.join(out_dir, "field_initial.csv"), grid, to_height(trace.initial.values))
    _write_field(os.path.join(out_dir, "field_final.csv"), grid, to_height(trace.final.values))
    _write(os.path.join(out_dir, "monitors.txt"), monitors.to_text() + "\n")
    _write_json(os.path.join(out_dir, "monitors.json"), monitors.to_json_dict())

    if trace.termination == "diverged":
        code = 3
    elif trace.termination in ("max_time", "max_steps"):
        code = 2
    elif monitors.passed and extras.get("success", True):
        code = 0
    else:
        code = 4
    summary.update({
        "termination": trace.termination,
        "note": trace.note,
        "t_final": trace.final_time,
        "steps": trace.steps,
        "dt": trace.dt,
        "final_sup_ut": float(trace.sup_ut[-1]),
        "monitors_passed": monitors.passed,
        "exit_code": code,
        **extras,
    })
    _write_json(os.path.join(out_dir, "summary.json"), summary)
    print(f"{kind}: {trace.termination} at t={trace.final_time:.6g} "
          f"({trace.steps} steps), monitors {'pass' if monitors.passed else 'FAIL'}")
    return code


def cmd_slice_ode(args) -> int:
    try:
        cfg = _load_config(args)
        profile = cfg.build_profile()
        r0 = cfg.get_float("data", "r0")
        n = cfg.get_int("data", "n")
        dt = cfg.get_float("integrator", "dt")
        t_end = cfg.get_float("integrator", "t_end")
        out_dir = cfg.get_str("output", "out_dir")
        os.makedirs(out_dir, exist_ok=True)
        trajectory = slice_ode_solve(profile, r0, t_end, dt, n)
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    lines = ["t,r"]
    for k in range(len(trajectory.times)):
        lines.append(f"{_fmt(trajectory.times[k])},{_fmt(trajectory.values[k])}")
    _write(os.path.join(out_dir, "trajectory.csv"), "\n".join(lines) + "\n")
    print(f"slice ODE: r({_fmt(trajectory.times[-1])}) = {_fmt(trajectory.final)}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="torusflow",
        description="Mean-curvature-type flows of graphs over flat tori",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("config", help="path to the INI run configuration")
        p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                       help="override a scalar config key (repeatable)")

    p_check = sub.add_parser("check", help="evaluate the hypothesis checkers")
    add_common(p_check)
    p_check.set_defaults(func=cmd_check)

    p_run = sub.add_parser("run", help="run the configured flow to stationarity")
    add_common(p_run)
    p_run.add_argument("--skip-checks", action="store_true",
                       help="run without the hypothesis gate (debugging aid)")
    p_run.add_argument("--backend", choices=("compiled", "python"), default=None,
                       help="stepping backend (default: compiled when built)")
    p_run.set_defaults(func=cmd_run)

    p_slice = sub.add_parser("slice-ode", help="integrate the slice ODE")
    add_common(p_slice)
    p_slice.set_defaults(func=cmd_slice_ode)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
