"""Versioned on-disk artifacts of a simulation run.

A run directory holds four files:

* ``trace.csv``    - one record per vehicle per tick (deterministic; the
  file two runs of the same scenario and seed must reproduce bit for bit)
* ``summary.json`` - aggregate metrics, switch events, audit findings and
  wall-clock solver statistics
* ``timings.csv``  - per-replan wall-clock solve times (non-deterministic
  by nature, kept out of the trace)
* ``geometry.json`` - road bounds and obstacle outlines in Cartesian
  coordinates, precomputed so downstream plotting never re-derives physics
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .obstacles import ObstacleParabola
from .road import RoadModel

__all__ = [
    "TRACE_FORMAT_VERSION",
    "SUMMARY_FORMAT_VERSION",
    "GEOMETRY_FORMAT_VERSION",
    "TraceRecord",
    "TraceFormatError",
    "write_trace",
    "read_trace",
    "write_summary",
    "read_summary",
    "write_timings",
    "write_geometry",
]

TRACE_FORMAT_VERSION = 1
SUMMARY_FORMAT_VERSION = 1
GEOMETRY_FORMAT_VERSION = 1

_FLOAT_COLUMNS = (
    "time",
    "s",
    "r",
    "v",
    "theta",
    "k",
    "a",
    "kappa",
    "e_s",
    "e_r",
    "e",
    "x",
    "y",
    "solver_cost",
    "solver_slack_max",
)


class TraceFormatError(ValueError):
    """Unknown trace format version or malformed trace content."""


@dataclass
class TraceRecord:
    time: float
    vehicle: int
    s: float
    r: float
    v: float
    theta: float
    k: float
    a: float
    kappa: float
    e_s: float
    e_r: float
    e: float
    x: float
    y: float
    solver_status: str
    solver_cost: float
    solver_iterations: int
    solver_slack_max: float
    rules: str  # active rule index per watched vehicle, "|"-separated
    slacks: str  # matching per-watched max slack values, "|"-separated


_COLUMNS = [f.name for f in fields(TraceRecord)]


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_trace(path, records: list[TraceRecord], scenario_name: str, aborted: str | None = None) -> None:
    path = Path(path)
    lines = [
        f"# roadformation-trace format_version={TRACE_FORMAT_VERSION}",
        f"# scenario={scenario_name}",
        ",".join(_COLUMNS),
    ]
    for rec in records:
        lines.append(",".join(_fmt(getattr(rec, col)) for col in _COLUMNS))
    if aborted:
        lines.append(f"# aborted={aborted}")
    path.write_text("\n".join(lines) + "\n")


def read_trace(path) -> tuple[dict, list[TraceRecord]]:
    path = Path(path)
    meta: dict = {"aborted": None}
    records: list[TraceRecord] = []
    header: list[str] | None = None
    for line in path.read_text().splitlines():
        if not line.strip():
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("roadformation-trace"):
                version = int(body.split("format_version=")[1])
                if version != TRACE_FORMAT_VERSION:
                    raise TraceFormatError(f"unsupported trace format version {version}")
                meta["format_version"] = version
            elif body.startswith("scenario="):
                meta["scenario"] = body.split("=", 1)[1]
            elif body.startswith("aborted="):
                meta["aborted"] = body.split("=", 1)[1]
            continue
        if header is None:
            header = line.split(",")
            missing = set(_COLUMNS) - set(header)
            if missing:
                raise TraceFormatError(f"trace is missing columns: {sorted(missing)}")
            continue
        parts = line.split(",")
        row = dict(zip(header, parts))
        records.append(
            TraceRecord(
                time=float(row["time"]),
                vehicle=int(row["vehicle"]),
                s=float(row["s"]),
                r=float(row["r"]),
                v=float(row["v"]),
                theta=float(row["theta"]),
                k=float(row["k"]),
                a=float(row["a"]),
                kappa=float(row["kappa"]),
                e_s=float(row["e_s"]),
                e_r=float(row["e_r"]),
                e=float(row["e"]),
                x=float(row["x"]),
                y=float(row["y"]),
                solver_status=row["solver_status"],
                solver_cost=float(row["solver_cost"]),
                solver_iterations=int(row["solver_iterations"]),
                solver_slack_max=float(row["solver_slack_max"]),
                rules=row["rules"],
                slacks=row["slacks"],
            )
        )
    if "format_version" not in meta:
        raise TraceFormatError(f"{path} has no trace format header")
    if header is None:
        raise TraceFormatError(f"{path} contains no records")
    return meta, records


def write_summary(path, summary: dict) -> None:
    payload = {"format_version": SUMMARY_FORMAT_VERSION, **summary}
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_summary(path) -> dict:
    return json.loads(Path(path).read_text())


def write_timings(path, solve_log: list[dict]) -> None:
    lines = [
        f"# roadformation-timings format_version={TRACE_FORMAT_VERSION}",
        "time,vehicle,solve_ms,iterations,status",
    ]
    for entry in solve_log:
        lines.append(
            f"{_fmt(entry['time'])},{entry['vehicle']},{_fmt(entry['solve_ms'])},"
            f"{entry['iterations']},{entry['status']}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def write_geometry(
    path,
    road: RoadModel,
    obstacles: tuple[ObstacleParabola, ...] = (),
    sample_step: float = 1.0,
) -> None:
    """Export road bounds and obstacle outlines as Cartesian polylines."""
    s_grid = np.arange(0.0, road.s_max + 0.5 * sample_step, sample_step)
    s_grid[-1] = min(s_grid[-1], road.s_max)

    def polyline(r_of_s) -> list[list[float]]:
        pts = []
        for s in s_grid:
            x, y = road.frenet_to_cartesian(float(s), float(r_of_s(s)))
            pts.append([round(x, 6), round(y, 6)])
        return pts

    obstacles_out = []
    for obs in obstacles:
        tri_xy = [list(road.frenet_to_cartesian(s, r)) for s, r in obs.source_triangle]
        s_lo = min(s for s, _ in obs.source_triangle)
        s_hi = max(s for s, _ in obs.source_triangle)
        arc = []
        for s in np.linspace(s_lo, s_hi, 41):
            arc.append(list(road.frenet_to_cartesian(float(s), obs.boundary_at(float(s)))))
        obstacles_out.append(
            {
                "side": obs.side,
                "triangle_sr": [list(p) for p in obs.source_triangle],
                "triangle_xy": [[round(x, 6), round(y, 6)] for x, y in tri_xy],
                "parabola_xy": [[round(x, 6), round(y, 6)] for x, y in arc],
            }
        )
    payload = {
        "format_version": GEOMETRY_FORMAT_VERSION,
        "s_max": road.s_max,
        "centerline_xy": polyline(lambda s: 0.0),
        "left_bound_xy": polyline(lambda s: float(road.left_bound_at(s))),
        "right_bound_xy": polyline(lambda s: float(road.right_bound_at(s))),
        "obstacles": obstacles_out,
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
