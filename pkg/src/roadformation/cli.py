"""Command-line entry points.

    roadformation run <scenario> --out DIR [--duration S] [--seed N]
    roadformation validate <scenario>
    roadformation audit <trace> [--scenario PATH]
    roadformation oracle <scenario> [--grid N]

`<scenario>` is a bundled name (scenario1, scenario2) or a file path.
`run` writes trace.csv, summary.json, timings.csv and geometry.json into
the output directory (default from ROADFORMATION_OUT, else ./out).
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import scenario as scenario_mod
from . import sim as sim_mod
from . import trace as trace_mod
from .oracle import oracle_gap
from .scenario import ScenarioError


def _load(name_or_path: str) -> scenario_mod.ScenarioConfig:
    try:
        return scenario_mod.load(name_or_path)
    except FileNotFoundError:
        raise ScenarioError([f"scenario {name_or_path!r} not found"]) from None


def cmd_run(args: argparse.Namespace) -> int:
    config = _load(args.scenario)
    scn = config.build()
    if args.duration is not None:
        scn = replace(scn, sim=replace(scn.sim, duration=args.duration))
    if args.seed is not None:
        scn = replace(scn, sim=replace(scn.sim, seed=args.seed))
    out_dir = Path(args.out or os.environ.get("ROADFORMATION_OUT", "out"))
    out_dir.mkdir(parents=True, exist_ok=True)
    result = sim_mod.run(scn)
    trace_mod.write_trace(out_dir / "trace.csv", result.records, scn.name, aborted=result.aborted)
    trace_mod.write_summary(out_dir / "summary.json", result.summary)
    trace_mod.write_timings(out_dir / "timings.csv", result.solve_log)
    trace_mod.write_geometry(out_dir / "geometry.json", scn.road, scn.obstacles)
    hard = [v for v in result.summary.get("violation_samples", []) if v["type"] == "collision"]
    if result.aborted:
        print(f"run aborted: {result.aborted}", file=sys.stderr)
        return 1
    print(
        f"wrote {out_dir}/trace.csv ({len(result.records)} records, "
        f"{len(result.summary['switch_events'])} switches, "
        f"{sum(result.summary['violations'].values())} audit findings)"
    )
    return 1 if hard else 0


def cmd_validate(args: argparse.Namespace) -> int:
    config = _load(args.scenario)
    config.build()
    for warning in config.warnings:
        print(f"warning: {warning}")
    print(f"{config.name}: ok ({len(config.vehicles)} vehicles, "
          f"{len(config.formations)} formations, {len(config.obstacles)} obstacles)")
    return 0


def cmd_audit(args: argparse.Namespace) -> int:
    meta, records = trace_mod.read_trace(Path(args.trace))
    scenario_name = args.scenario or meta.get("scenario")
    if not scenario_name:
        print("audit: trace names no scenario; pass --scenario", file=sys.stderr)
        return 2
    scn = _load(scenario_name).build()
    violations = sim_mod.audit_safety(
        records,
        priority=scn.plan.steps[0].priority,
        geom=scn.geom,
        road=scn.road,
        half_length=scn.sim.half_length,
        half_width=scn.sim.half_width,
    )
    for v in violations[:50]:
        print(f"{v['type']} at t={v['time']:.3f} vehicles={v['vehicles']} value={v['value']:.3f}")
    print(f"{len(violations)} violations in {len(records)} records")
    return 1 if any(v["type"] == "collision" for v in violations) else 0


def cmd_oracle(args: argparse.Namespace) -> int:
    config = _load(args.scenario)
    scn = config.build()
    report = oracle_gap(
        scn.road,
        v0=max(scn.cruise_speed - 2.0, 0.0),
        v_ref=scn.cruise_speed,
        bounds=scn.vehicles[0].bounds,
        grid=args.grid,
    )
    print(
        f"solver cost {report.solver_cost:.6f}, grid cost {report.grid_cost:.6f}, "
        f"relative gap {report.gap:.2e}"
    )
    return 0 if report.gap <= 0.05 else 1


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="roadformation", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario and write trace artifacts")
    p_run.add_argument("scenario")
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.add_argument("--duration", type=float, default=None)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.set_defaults(func=cmd_run)

    p_val = sub.add_parser("validate", help="parse a scenario and report problems")
    p_val.add_argument("scenario")
    p_val.set_defaults(func=cmd_validate)

    p_audit = sub.add_parser("audit", help="re-run the safety audit on a trace file")
    p_audit.add_argument("trace")
    p_audit.add_argument("--scenario", default=None)
    p_audit.set_defaults(func=cmd_audit)

    p_oracle = sub.add_parser("oracle", help="brute-force cross-check of the optimizer")
    p_oracle.add_argument("scenario")
    p_oracle.add_argument("--grid", type=int, default=101)
    p_oracle.set_defaults(func=cmd_oracle)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        for problem in exc.problems:
            print(f"error: {problem}", file=sys.stderr)
        return 2
    except trace_mod.TraceFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
