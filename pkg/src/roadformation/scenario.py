"""Scenario files: grammar, validation and construction of runnable scenarios.

A scenario is a YAML document (hierarchical keys plus arrays) fully
describing a run: road knots, vehicles, named formations, the formation
plan with its switch policy, obstacles, partition geometry and the
simulation configuration.  ``parse`` accepts a path or raw text and
either returns a validated config or raises with precise field paths.
The field table is documented in the README.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import yaml

from .dynamics import BoundSet, VehicleState
from .formation import FormationSpec, validate_with_warnings
from .obstacles import ObstacleParabola
from .ocp import Weights
from .partition import PartitionGeometry
from .reconfig import ReconfigurationPlan
from .road import RoadModel, check_validity
from .sim import RunScenario, SimConfig, VehicleSetup

__all__ = ["ScenarioConfig", "ScenarioError", "DEFAULTS", "parse", "serialize", "bundled_path", "load"]

# Default parameter block applied when a scenario omits a field.
DEFAULTS = {
    "bounds": {
        "v_min": 0.0,
        "v_max": 10.0,
        "a_max": 2.5,
        "k_max": 0.2,
        "kappa_max": 0.1,
        "a_lat_max": 2.5,
    },
    "leader_weights": {"q": [0.0, 4.0, 2.0, 20.0, 20.0], "r": [1.0, 200.0]},
    "follower_weights": {"q": [1.0, 2.0, 0.0, 20.0, 20.0], "r": [1.0, 200.0]},
    "slack_penalty": 10000.0,
    "horizon": 5.0,
    "knots": 20,
    "cruise_speed": 6.0,
    "partition": {"delta_s": 10.0, "delta_r": 3.0},
    "sim": {
        "tick": 0.064,
        "replan_interval": 0.256,
        "comm_delay": 0.256,
        "duration": 40.0,
        "seed": 0,
        "half_length": 1.8,
        "half_width": 0.85,
        "road_margin": 0.85,
        "noise_std": 0.0,
    },
}

BUNDLED = ("scenario1", "scenario2")


class ScenarioError(ValueError):
    """Scenario validation failure; `problems` lists field paths and reasons."""

    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("; ".join(problems))


@dataclass
class ScenarioConfig:
    """Validated scenario data, still in plain-value form."""

    name: str
    road: dict
    vehicles: list[dict]
    formations: dict[str, dict]
    plan: dict
    obstacles: list[dict]
    partition: dict
    bounds: dict
    sim: dict
    cruise_speed: float
    horizon: float
    knots: int
    slack_penalty: float
    description: str = ""
    warnings: list[str] = dc_field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "description": self.description,
            "road": self.road,
            "cruise_speed": self.cruise_speed,
            "horizon": self.horizon,
            "knots": self.knots,
            "slack_penalty": self.slack_penalty,
            "partition": self.partition,
            "bounds": self.bounds,
            "vehicles": self.vehicles,
            "formations": self.formations,
            "plan": self.plan,
            "obstacles": self.obstacles,
            "sim": self.sim,
        }

    # -- construction of domain objects --------------------------------

    def build_road(self) -> RoadModel:
        origin = self.road.get("origin", [0.0, 0.0, 0.0])
        return RoadModel.from_knots(
            curvature=[tuple(p) for p in self.road["curvature"]],
            left_bound=[tuple(p) for p in self.road["left_bound"]],
            right_bound=[tuple(p) for p in self.road["right_bound"]],
            s_max=self.road.get("s_max"),
            origin=(origin[0], origin[1], origin[2]),
        )

    def build_formations(self) -> dict[str, FormationSpec]:
        specs = {}
        for name, raw in self.formations.items():
            specs[name] = FormationSpec(
                shape=tuple((float(s), float(r)) for s, r in raw["shape"]),
                parents=tuple(None if p is None else int(p) for p in raw["parents"]),
                priority=tuple(int(v) for v in raw["priority"]),
                name=name,
                virtual_leader=bool(raw.get("virtual_leader", False)),
            )
        return specs

    def build_plan(self) -> ReconfigurationPlan:
        specs = self.build_formations()
        steps = tuple(specs[name] for name in self.plan["sequence"])
        threshold = self.plan.get("threshold")
        if threshold:
            switch_times = None
        elif len(steps) > 1:
            switch_times = tuple(float(t) for t in self.plan["switch_times"])
        else:
            switch_times = ()
        return ReconfigurationPlan(
            steps=steps,
            switch_times=switch_times,
            switch_epsilon=threshold["epsilon"] if threshold else None,
            switch_dwell=threshold.get("dwell", 2.0) if threshold else 2.0,
        )

    def build(self) -> RunScenario:
        road = self.build_road()
        bounds = BoundSet(**self.bounds)
        vehicles = []
        for idx, raw in enumerate(self.vehicles):
            role = "leader_weights" if idx == 0 else "follower_weights"
            weights_raw = raw.get("weights", DEFAULTS[role])
            weights = Weights(
                q=tuple(float(v) for v in weights_raw["q"]),
                r=tuple(float(v) for v in weights_raw["r"]),
                slack_penalty=self.slack_penalty,
            )
            s, r, v, theta, k = (float(x) for x in raw["start"])
            vehicles.append(
                VehicleSetup(
                    vehicle_id=idx,
                    x0=VehicleState(s, r, v, theta, k),
                    weights=weights,
                    bounds=bounds,
                )
            )
        obstacles = tuple(
            ObstacleParabola.from_triangle(
                raw["triangle"], road=road, side=raw.get("side")
            )
            for raw in self.obstacles
        )
        return RunScenario(
            name=self.name,
            road=road,
            vehicles=tuple(vehicles),
            plan=self.build_plan(),
            geom=PartitionGeometry(
                delta_s=float(self.partition["delta_s"]), delta_r=float(self.partition["delta_r"])
            ),
            sim=SimConfig(**self.sim),
            obstacles=obstacles,
            cruise_speed=self.cruise_speed,
            horizon=self.horizon,
            n_knots=self.knots,
        )


def _expect(problems, raw, key, types, path, default=None, required=False):
    if key not in raw or raw[key] is None:
        if required:
            problems.append(f"{path}{key}: required field is missing")
        return default
    value = raw[key]
    if types and not isinstance(value, types):
        problems.append(f"{path}{key}: expected {types}, got {type(value).__name__}")
        return default
    return value


def parse(source: str | Path) -> ScenarioConfig:
    """Parse and validate a scenario from a file path or raw YAML text."""
    text = None
    if isinstance(source, Path):
        text = source.read_text()
    elif isinstance(source, str):
        if "\n" not in source and Path(source).exists():
            text = Path(source).read_text()
        else:
            text = source
    if text is None:
        raise ScenarioError([f"cannot read scenario from {source!r}"])
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError([f"syntax: {exc}"]) from exc
    if not isinstance(raw, dict):
        raise ScenarioError(["document: expected a mapping at the top level"])
    return _validate_raw(raw)


def _validate_raw(raw: dict) -> ScenarioConfig:
    problems: list[str] = []
    warnings: list[str] = []

    name = _expect(problems, raw, "name", str, "", default="unnamed")
    description = _expect(problems, raw, "description", str, "", default="")

    road_raw = _expect(problems, raw, "road", dict, "", required=True) or {}
    for key in ("curvature", "left_bound", "right_bound"):
        knots = _expect(problems, road_raw, key, list, "road.", required=True) or []
        for i, pair in enumerate(knots):
            if not (isinstance(pair, list) and len(pair) == 2):
                problems.append(f"road.{key}[{i}]: expected an [s, value] pair")

    vehicles = _expect(problems, raw, "vehicles", list, "", required=True) or []
    if not vehicles:
        problems.append("vehicles: need at least one vehicle")
    for i, veh in enumerate(vehicles):
        if not isinstance(veh, dict):
            problems.append(f"vehicles[{i}]: expected a mapping")
            continue
        start = _expect(problems, veh, "start", list, f"vehicles[{i}].", required=True) or []
        if len(start) != 5:
            problems.append(f"vehicles[{i}].start: expected [s, r, v, theta, k]")
        if "weights" in veh and veh["weights"] is not None:
            w = veh["weights"]
            if not (isinstance(w, dict) and len(w.get("q", [])) == 5 and len(w.get("r", [])) == 2):
                problems.append(f"vehicles[{i}].weights: expected q[5] and r[2]")

    formations_raw = _expect(problems, raw, "formations", dict, "", required=True) or {}
    for fname, fraw in formations_raw.items():
        if not isinstance(fraw, dict):
            problems.append(f"formations.{fname}: expected a mapping")
            continue
        shape = _expect(problems, fraw, "shape", list, f"formations.{fname}.", required=True) or []
        parents = _expect(problems, fraw, "parents", list, f"formations.{fname}.", required=True) or []
        priority = _expect(problems, fraw, "priority", list, f"formations.{fname}.", required=True) or []
        if vehicles and len(shape) != len(vehicles):
            problems.append(
                f"formations.{fname}.shape: {len(shape)} rows for {len(vehicles)} vehicles"
            )
        if len(parents) != len(shape) or len(priority) != len(shape):
            problems.append(f"formations.{fname}: shape, parents and priority sizes differ")

    plan_raw = _expect(problems, raw, "plan", dict, "", required=True) or {}
    sequence = _expect(problems, plan_raw, "sequence", list, "plan.", required=True) or []
    for i, fname in enumerate(sequence):
        if fname not in formations_raw:
            problems.append(f"plan.sequence[{i}]: undefined formation {fname!r}")
    switch_times = plan_raw.get("switch_times")
    threshold = plan_raw.get("threshold")
    if len(sequence) > 1:
        if switch_times is None and threshold is None:
            problems.append("plan: a multi-step plan needs switch_times or threshold")
        if switch_times is not None:
            if len(switch_times) != len(sequence) - 1:
                problems.append(
                    f"plan.switch_times: expected {len(sequence) - 1} entries, got {len(switch_times)}"
                )
            elif any(b <= a for a, b in zip(switch_times, switch_times[1:])):
                problems.append("plan.switch_times: must be strictly increasing")
    if threshold is not None and "epsilon" not in threshold:
        problems.append("plan.threshold.epsilon: required for threshold switching")

    obstacles_raw = raw.get("obstacles") or []
    for i, oraw in enumerate(obstacles_raw):
        if not isinstance(oraw, dict) or "triangle" not in oraw:
            problems.append(f"obstacles[{i}]: expected a mapping with a 'triangle'")
            continue
        tri = oraw["triangle"]
        if not (isinstance(tri, list) and len(tri) == 3):
            problems.append(f"obstacles[{i}].triangle: expected three [s, r] points")
        if oraw.get("side") not in (None, "left", "right"):
            problems.append(f"obstacles[{i}].side: expected 'left' or 'right'")

    partition_raw = {**DEFAULTS["partition"], **(raw.get("partition") or {})}
    bounds_raw = {**DEFAULTS["bounds"], **(raw.get("bounds") or {})}
    sim_raw = {**DEFAULTS["sim"], **(raw.get("sim") or {})}
    unknown_sim = set(sim_raw) - set(DEFAULTS["sim"])
    if unknown_sim:
        problems.append(f"sim: unknown fields {sorted(unknown_sim)}")

    if problems:
        raise ScenarioError(problems)

    config = ScenarioConfig(
        name=name,
        description=description,
        road=road_raw,
        vehicles=vehicles,
        formations=formations_raw,
        plan=plan_raw,
        obstacles=obstacles_raw,
        partition=partition_raw,
        bounds=bounds_raw,
        sim=sim_raw,
        cruise_speed=float(raw.get("cruise_speed", DEFAULTS["cruise_speed"])),
        horizon=float(raw.get("horizon", DEFAULTS["horizon"])),
        knots=int(raw.get("knots", DEFAULTS["knots"])),
        slack_penalty=float(raw.get("slack_penalty", DEFAULTS["slack_penalty"])),
        warnings=warnings,
    )
    _validate_semantics(config, problems, warnings)
    if problems:
        raise ScenarioError(problems)
    return config


def _validate_semantics(config: ScenarioConfig, problems: list[str], warnings: list[str]) -> None:
    try:
        road = config.build_road()
    except ValueError as exc:
        problems.append(f"road: {exc}")
        return
    bad = check_validity(road)
    if bad:
        problems.append(f"road: frame validity fails at {len(bad)} samples, first {bad[0]}")

    try:
        bounds = BoundSet(**config.bounds)
    except (TypeError, ValueError) as exc:
        problems.append(f"bounds: {exc}")
        return

    geom = PartitionGeometry(
        delta_s=float(config.partition["delta_s"]), delta_r=float(config.partition["delta_r"])
    )

    for i, veh in enumerate(config.vehicles):
        s, r, v, theta, k = (float(x) for x in veh["start"])
        if not (0.0 <= s <= road.s_max):
            problems.append(f"vehicles[{i}].start: s={s} outside the road [0, {road.s_max}]")
            continue
        lo = float(road.right_bound_at(s))
        hi = float(road.left_bound_at(s))
        if not (lo <= r <= hi):
            problems.append(f"vehicles[{i}].start: r={r} outside the band [{lo}, {hi}]")
        if not (bounds.v_min <= v <= bounds.v_max):
            problems.append(f"vehicles[{i}].start: v={v} outside [{bounds.v_min}, {bounds.v_max}]")
        if abs(k) > bounds.k_max:
            problems.append(f"vehicles[{i}].start: |k|={abs(k)} exceeds {bounds.k_max}")

    try:
        specs = config.build_formations()
    except (ValueError, TypeError) as exc:
        problems.append(f"formations: {exc}")
        return
    for fname, spec in specs.items():
        viol, warn = validate_with_warnings(spec, geom)
        problems.extend(f"formations.{fname}: {v}" for v in viol)
        warnings.extend(f"formations.{fname}: {w}" for w in warn)

    if not problems:
        try:
            plan = config.build_plan()
            plan.verify(geom)
        except (ValueError, KeyError) as exc:
            problems.append(f"plan: {exc}")

    for i, oraw in enumerate(config.obstacles):
        try:
            ObstacleParabola.from_triangle(oraw["triangle"], road=road, side=oraw.get("side"))
        except ValueError as exc:
            problems.append(f"obstacles[{i}]: {exc}")

    try:
        SimConfig(**config.sim)
    except (TypeError, ValueError) as exc:
        problems.append(f"sim: {exc}")


def serialize(config: ScenarioConfig) -> str:
    """YAML text that parses back to an equivalent scenario."""
    return yaml.safe_dump(config.to_dict(), sort_keys=False)


def bundled_path(name: str) -> Path:
    resource = importlib.resources.files("roadformation") / "scenarios" / f"{name}.yaml"
    return Path(str(resource))


def load(name_or_path: str) -> ScenarioConfig:
    """Load a bundled scenario by name, or any scenario file by path."""
    if name_or_path in BUNDLED:
        return parse(bundled_path(name_or_path))
    return parse(Path(name_or_path))
