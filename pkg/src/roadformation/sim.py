"""Deterministic closed-loop multi-vehicle simulation.

Each vehicle replans every replanning interval against the newest plans
its peers published at least one communication delay ago; between replans
the plant integrates the active plan's controls on a finer tick.  The
same bicycle model serves as plant, optionally perturbed by seeded
additive noise.  A supervisor advances the formation plan, and a safety
audit re-checks every tick of the finished trace.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .dynamics import (
    BoundSet,
    ControlInput,
    SingularityError,
    Trajectory,
    VehicleState,
    extrapolate,
    rk4_step,
    sample_states,
)
from .formation import FormationSpec, formation_error, make_reference, relative_offset
from .obstacles import ObstacleParabola
from .ocp import OcpInstance, OcpSolution, PartitionTerm, Weights, solve
from .partition import PartitionGeometry, active_constraints, classify_region, g_all, RegionLabel
from .reconfig import FormationSupervisor, ReconfigurationPlan, SwitchEvent
from .road import RoadModel
from .trace import TraceRecord

__all__ = [
    "SimConfig",
    "VehicleSetup",
    "RunScenario",
    "SimResult",
    "MessageBus",
    "SimAbort",
    "run",
    "audit_safety",
    "plan_state_at",
    "summarize",
]

AUDIT_SLACK = 0.5  # geometric allowance before a protected-region entry is a finding


class SimAbort(RuntimeError):
    """Raised internally to stop the loop on a fatal condition."""


@dataclass(frozen=True)
class SimConfig:
    tick: float = 0.064
    replan_interval: float = 0.256
    comm_delay: float = 0.256
    duration: float = 40.0
    seed: int = 0
    half_length: float = 1.8
    half_width: float = 0.85
    road_margin: float = 0.85
    noise_std: float = 0.0

    def __post_init__(self) -> None:
        if self.tick <= 0 or self.replan_interval <= 0:
            raise ValueError("tick and replan_interval must be positive")
        ratio = self.replan_interval / self.tick
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("tick must divide the replanning interval")
        if self.comm_delay < 0:
            raise ValueError("comm_delay must be nonnegative")
        if self.duration < 0:
            raise ValueError("duration must be nonnegative")


@dataclass(frozen=True)
class VehicleSetup:
    vehicle_id: int
    x0: VehicleState
    weights: Weights
    bounds: BoundSet


@dataclass(frozen=True)
class RunScenario:
    """Everything a closed-loop run needs, in domain objects."""

    name: str
    road: RoadModel
    vehicles: tuple[VehicleSetup, ...]
    plan: ReconfigurationPlan
    geom: PartitionGeometry
    sim: SimConfig
    obstacles: tuple[ObstacleParabola, ...] = ()
    cruise_speed: float = 6.0
    horizon: float = 5.0
    n_knots: int = 20

    @property
    def dt(self) -> float:
        return self.horizon / self.n_knots

    def bounds_reach(self) -> float:
        """Upper bound on how far ahead one planning horizon can reach."""
        return max(v.bounds.v_max for v in self.vehicles) * self.horizon


@dataclass
class SimResult:
    records: list[TraceRecord]
    summary: dict
    switch_events: list[SwitchEvent]
    solve_log: list[dict]
    aborted: str | None = None


class MessageBus:
    """Plan exchange with a fixed communication delay.

    ``fetch`` returns the newest plan published at least ``comm_delay``
    ago; ties resolve by publish sequence number.  Plans published during
    the current replanning tick are committed only after every vehicle
    has solved, so the snapshot a tick sees is frozen.
    """

    def __init__(self, comm_delay: float):
        self.comm_delay = comm_delay
        self._plans: dict[int, list[tuple[float, int, Trajectory]]] = {}
        self._seq = 0

    def publish(self, traj: Trajectory, when: float) -> None:
        self._seq += 1
        self._plans.setdefault(traj.vehicle_id, []).append((when, self._seq, traj))

    def fetch(self, vehicle_id: int, now: float) -> Trajectory | None:
        eligible = [
            (when, seq, traj)
            for when, seq, traj in self._plans.get(vehicle_id, [])
            if when <= now - self.comm_delay + 1e-9
        ]
        if not eligible:
            return None
        return max(eligible, key=lambda item: (item[0], item[1]))[2]

    def prune(self, horizon_start: float) -> None:
        """Drop plans too old to ever be fetched again."""
        for vid, plans in self._plans.items():
            keep = [p for p in plans if p[0] >= horizon_start - 4 * self.comm_delay - 2.0]
            self._plans[vid] = keep if keep else plans[-1:]


def plan_state_at(plan: Trajectory, t: float, road: RoadModel) -> np.ndarray:
    """Plan-predicted state at an arbitrary time by sub-knot integration."""
    idx = int(math.floor((t - plan.t0) / plan.dt + 1e-9))
    idx = min(max(idx, 0), len(plan.knots) - 1)
    state = plan.knots[idx][0].as_array()
    remainder = t - (plan.t0 + idx * plan.dt)
    if remainder > 1e-12:
        state = rk4_step(state, plan.knots[idx][1].as_array(), road, remainder)
    return state


def _bootstrap_plan(
    vehicle_id: int, initial: VehicleState, cruise: float, now: float, horizon: float, dt: float
) -> Trajectory:
    """Stand-in plan before a vehicle's first published trajectory arrives.

    The peer is assumed to cruise along the centerline at the formation
    speed, propagated from its scenario initial position.
    """
    n = int(round(horizon / dt)) + 1
    knots = tuple(
        (
            VehicleState(s=initial.s + cruise * (now + k * dt), r=0.0, v=cruise, theta=0.0, k=0.0),
            ControlInput(0.0, 0.0),
        )
        for k in range(n + 1)
    )
    return Trajectory(t0=now, dt=dt, vehicle_id=vehicle_id, knots=knots)


def _leader_reference(
    state: VehicleState, spec: FormationSpec, cruise: float, now: float, horizon: float, dt: float
) -> Trajectory:
    """Centerline cruise reference for the tree root.

    The lateral setpoint is the leader's own shape row, which is zero
    except for virtual-leader formations.
    """
    r_ref = spec.shape[0][1]
    n = int(round(horizon / dt))
    knots = tuple(
        (
            VehicleState(s=state.s + cruise * k * dt, r=r_ref, v=cruise, theta=0.0, k=0.0),
            ControlInput(0.0, 0.0),
        )
        for k in range(n + 1)
    )
    return Trajectory(t0=now, dt=dt, vehicle_id=-1, knots=knots)


def _nearby_obstacles(
    obstacles: tuple[ObstacleParabola, ...], s0: float, reach: float
) -> tuple[ObstacleParabola, ...]:
    lo = s0 - 15.0
    hi = s0 + reach + 15.0
    return tuple(o for o in obstacles if o.s_span[1] >= lo and o.s_span[0] <= hi)


def run(scn: RunScenario) -> SimResult:
    cfg = scn.sim
    dt = scn.dt
    ticks_per_replan = int(round(cfg.replan_interval / cfg.tick))
    n_ticks = int(round(cfg.duration / cfg.tick))
    ids = [v.vehicle_id for v in scn.vehicles]
    setup = {v.vehicle_id: v for v in scn.vehicles}
    supervisor = FormationSupervisor(scn.plan)
    bus = MessageBus(cfg.comm_delay)
    rng = np.random.default_rng(cfg.seed)

    states: dict[int, VehicleState] = {vid: setup[vid].x0 for vid in ids}
    plans: dict[int, Trajectory] = {}
    warm: dict[int, OcpSolution] = {}
    telemetry: dict[int, dict] = {
        vid: {"status": "", "cost": 0.0, "iterations": 0, "slack_max": 0.0} for vid in ids
    }
    constraints_by_vehicle: dict[int, list] = {vid: [] for vid in ids}
    last_epoch = -1
    records: list[TraceRecord] = []
    solve_log: list[dict] = []
    aborted: str | None = None

    def vehicle_errors(spec: FormationSpec) -> dict[int, float]:
        leader_state = states[0]
        return {vid: formation_error(states[vid], leader_state, spec, vid).e for vid in ids}

    try:
        for i in range(n_ticks):
            t = i * cfg.tick
            spec = supervisor.active
            supervisor.update(t, vehicle_errors(spec))
            spec = supervisor.active
            if supervisor.epoch != last_epoch:
                # Selected rules change only here, at the epoch boundary.
                for vid in ids:
                    constraints_by_vehicle[vid] = active_constraints(
                        spec, scn.geom, vid, slack_weight=setup[vid].weights.slack_penalty
                    )
                last_epoch = supervisor.epoch

            if i % ticks_per_replan == 0:
                _replan_all(
                    scn, spec, t, states, bus, plans, warm, telemetry,
                    constraints_by_vehicle, solve_log,
                )
                bus.prune(t)

            leader_state = states[0]
            for vid in sorted(ids, key=spec.rank):
                st = states[vid]
                u = plans[vid].control_at(t)
                err = formation_error(st, leader_state, spec, vid)
                x, y = scn.road.frenet_to_cartesian(st.s, st.r)
                cons = constraints_by_vehicle[vid]
                tele = telemetry[vid]
                records.append(
                    TraceRecord(
                        time=t,
                        vehicle=vid,
                        s=st.s, r=st.r, v=st.v, theta=st.theta, k=st.k,
                        a=u.a, kappa=u.kappa,
                        e_s=err.e_s, e_r=err.e_r, e=err.e,
                        x=x, y=y,
                        solver_status=tele["status"],
                        solver_cost=tele["cost"],
                        solver_iterations=tele["iterations"],
                        solver_slack_max=tele["slack_max"],
                        rules="|".join(str(c.rule) for c in cons),
                        slacks=tele.get("slacks", ""),
                    )
                )

            _check_live_collision(scn, states, t)

            for vid in ids:
                st = states[vid]
                u = plans[vid].control_at(t)
                try:
                    x_next = rk4_step(st.as_array(), u.as_array(), scn.road, cfg.tick)
                except SingularityError as exc:
                    raise SimAbort(f"singularity for vehicle {vid} at t={t:.3f}: {exc}") from exc
                if cfg.noise_std > 0.0:
                    x_next = x_next + rng.normal(0.0, cfg.noise_std, size=5) * cfg.tick
                if x_next[2] < 0.0:
                    x_next[2] = 0.0
                if abs(x_next[3]) >= math.pi / 2:
                    raise SimAbort(
                        f"vehicle {vid} heading error left the forward-motion range at t={t:.3f}"
                    )
                states[vid] = VehicleState.from_array(x_next)
    except SimAbort as exc:
        aborted = str(exc)

    violations = audit_safety(
        records,
        priority=scn.plan.steps[0].priority,
        geom=scn.geom,
        road=scn.road,
        half_length=cfg.half_length,
        half_width=cfg.half_width,
    )
    summary = summarize(scn, records, solve_log, supervisor.events, violations, aborted)
    return SimResult(
        records=records,
        summary=summary,
        switch_events=supervisor.events,
        solve_log=solve_log,
        aborted=aborted,
    )


def _replan_all(scn, spec, t, states, bus, plans, warm, telemetry, constraints_by_vehicle, solve_log):
    cfg = scn.sim
    dt = scn.dt
    new_solutions: list[tuple[int, OcpSolution]] = []
    for vid in sorted(states, key=spec.rank):
        st = states[vid]
        parent = spec.parents[vid]
        if parent is None:
            reference = _leader_reference(st, spec, scn.cruise_speed, t, scn.horizon, dt)
        else:
            parent_plan = bus.fetch(parent, t)
            if parent_plan is None:
                parent_plan = _bootstrap_plan(
                    parent, _initial_state(scn, parent), scn.cruise_speed, t, scn.horizon, dt
                )
            offset = relative_offset(spec, vid, parent)
            reference = make_reference(parent_plan, offset, t, scn.horizon, scn.road, dt=dt)
        terms = []
        for constraint in constraints_by_vehicle[vid]:
            watched = constraint.watched_vehicle
            watched_plan = bus.fetch(watched, t)
            if watched_plan is None:
                watched_plan = _bootstrap_plan(
                    watched, _initial_state(scn, watched), scn.cruise_speed, t, scn.horizon, dt
                )
            knot_times = t + dt * np.arange(1, scn.n_knots + 1)
            extended = extrapolate(watched_plan, float(knot_times[-1]) + 1e-9, scn.road)
            pivot = sample_states(extended, knot_times)
            terms.append(
                PartitionTerm(
                    constraint=constraint,
                    pivot_s=pivot[:, 0],
                    pivot_r=pivot[:, 1],
                    delta_s=scn.geom.delta_s,
                    delta_r=scn.geom.delta_r,
                )
            )
        instance = OcpInstance(
            x0=st,
            reference=reference,
            bounds=scn.vehicles[_index_of(scn, vid)].bounds,
            road=scn.road,
            weights=scn.vehicles[_index_of(scn, vid)].weights,
            t0=t,
            horizon=scn.horizon,
            n_knots=scn.n_knots,
            obstacles=_nearby_obstacles(scn.obstacles, st.s, scn.bounds_reach()),
            partition=tuple(terms),
            road_margin=cfg.road_margin,
        )
        started = time.perf_counter()
        solution = solve(instance, warm.get(vid), vehicle_id=vid)
        elapsed_ms = (time.perf_counter() - started) * 1e3
        if solution.status == "infeasible-hard":
            raise SimAbort(
                f"vehicle {vid} started a replan outside hard bounds at t={t:.3f} "
                f"(violation {solution.max_violation:.3g})"
            )
        solve_log.append(
            {
                "time": t,
                "vehicle": vid,
                "solve_ms": elapsed_ms,
                "iterations": solution.iterations,
                "status": solution.status,
            }
        )
        telemetry[vid] = {
            "status": solution.status,
            "cost": solution.cost,
            "iterations": solution.iterations,
            "slack_max": float(solution.slacks.max(initial=0.0)),
            "slacks": "|".join(
                repr(float(row.max())) for row in solution.slacks
            ),
        }
        new_solutions.append((vid, solution))
    # Commit after the whole tick has solved: the bus snapshot stays frozen.
    for vid, solution in new_solutions:
        plans[vid] = solution.trajectory
        warm[vid] = solution
        bus.publish(solution.trajectory, t)


def _index_of(scn: RunScenario, vid: int) -> int:
    for idx, v in enumerate(scn.vehicles):
        if v.vehicle_id == vid:
            return idx
    raise KeyError(vid)


def _initial_state(scn: RunScenario, vid: int) -> VehicleState:
    return scn.vehicles[_index_of(scn, vid)].x0


def _check_live_collision(scn: RunScenario, states: dict[int, VehicleState], t: float) -> None:
    cfg = scn.sim
    ids = sorted(states)
    for a_idx in range(len(ids)):
        for b_idx in range(a_idx + 1, len(ids)):
            sa, sb = states[ids[a_idx]], states[ids[b_idx]]
            if abs(sa.s - sb.s) < 2 * cfg.half_length and abs(sa.r - sb.r) < 2 * cfg.half_width:
                raise SimAbort(
                    f"footprint overlap between vehicles {ids[a_idx]} and {ids[b_idx]} at t={t:.3f}"
                )


def audit_safety(
    records: list[TraceRecord],
    priority: tuple[int, ...],
    geom: PartitionGeometry,
    road: RoadModel,
    half_length: float = 1.8,
    half_width: float = 0.85,
    eps_audit: float = AUDIT_SLACK,
) -> list[dict]:
    """Re-check a finished trace for safety violations.

    Flags protected-region entries deeper than the soft-slack allowance,
    rectangle footprint overlaps (hard), and road-bound departures.
    """
    rank = {v: i for i, v in enumerate(priority)}
    by_time: dict[float, dict[int, TraceRecord]] = {}
    for rec in records:
        by_time.setdefault(rec.time, {})[rec.vehicle] = rec
    violations: list[dict] = []
    for t in sorted(by_time):
        snapshot = by_time[t]
        for i in snapshot:
            for j in snapshot:
                if i == j or rank[i] >= rank[j]:
                    continue
                pivot = (snapshot[i].s, snapshot[i].r)
                point = (snapshot[j].s, snapshot[j].r)
                if classify_region(pivot, geom, point) is RegionLabel.A0:
                    depth = min(g_all(pivot, geom, point))
                    if depth > eps_audit:
                        violations.append(
                            {
                                "type": "protected-region",
                                "time": t,
                                "vehicles": [i, j],
                                "value": depth,
                            }
                        )
        ids = sorted(snapshot)
        for a_idx in range(len(ids)):
            for b_idx in range(a_idx + 1, len(ids)):
                ra, rb = snapshot[ids[a_idx]], snapshot[ids[b_idx]]
                if abs(ra.s - rb.s) < 2 * half_length and abs(ra.r - rb.r) < 2 * half_width:
                    violations.append(
                        {
                            "type": "collision",
                            "time": t,
                            "vehicles": [ids[a_idx], ids[b_idx]],
                            "value": max(abs(ra.s - rb.s), abs(ra.r - rb.r)),
                        }
                    )
        for vid, rec in snapshot.items():
            lo = float(road.right_bound_at(rec.s))
            hi = float(road.left_bound_at(rec.s))
            if rec.r < lo - 1e-9 or rec.r > hi + 1e-9:
                violations.append(
                    {"type": "road-departure", "time": t, "vehicles": [vid], "value": rec.r}
                )
    return violations


def summarize(
    scn: RunScenario,
    records: list[TraceRecord],
    solve_log: list[dict],
    events: list[SwitchEvent],
    violations: list[dict],
    aborted: str | None,
) -> dict:
    ids = sorted({rec.vehicle for rec in records})
    per_vehicle: dict[str, dict] = {}
    for vid in ids:
        rows = [rec for rec in records if rec.vehicle == vid]
        errors = np.array([rec.e for rec in rows])
        speeds = np.array([rec.v for rec in rows])
        if not len(errors):
            continue
        per_vehicle[str(vid)] = {
            "max_error": float(errors.max()),
            "mean_error": float(errors.mean()),
            "final_error": float(errors[-1]),
            "min_speed": float(speeds.min()),
            "max_speed": float(speeds.max()),
        }
    min_dist = None
    by_time: dict[float, list[TraceRecord]] = {}
    for rec in records:
        by_time.setdefault(rec.time, []).append(rec)
    for rows in by_time.values():
        for a_idx in range(len(rows)):
            for b_idx in range(a_idx + 1, len(rows)):
                d = math.hypot(rows[a_idx].x - rows[b_idx].x, rows[a_idx].y - rows[b_idx].y)
                if min_dist is None or d < min_dist:
                    min_dist = d
    solver_stats = {}
    if solve_log:
        times_ms = np.array([entry["solve_ms"] for entry in solve_log])
        statuses: dict[str, int] = {}
        for entry in solve_log:
            statuses[entry["status"]] = statuses.get(entry["status"], 0) + 1
        solver_stats = {
            "solves": len(solve_log),
            "median_ms": float(np.median(times_ms)),
            "p99_ms": float(np.percentile(times_ms, 99)),
            "max_ms": float(times_ms.max()),
            "max_iterations": int(max(entry["iterations"] for entry in solve_log)),
            "statuses": statuses,
        }
    violation_counts: dict[str, int] = {}
    for v in violations:
        violation_counts[v["type"]] = violation_counts.get(v["type"], 0) + 1
    return {
        "scenario": scn.name,
        "duration": scn.sim.duration,
        "vehicles": len(scn.vehicles),
        "aborted": aborted,
        "per_vehicle": per_vehicle,
        "min_pair_distance": min_dist,
        "solver": solver_stats,
        "switch_events": [
            {"time": e.time, "index": e.index, "from": e.from_name, "to": e.to_name} for e in events
        ],
        "violations": violation_counts,
        "violation_samples": violations[:20],
    }
