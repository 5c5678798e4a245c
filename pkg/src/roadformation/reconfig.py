"""Safe switching between formations that share a priority order.

Two partition sectors are 1-step reachable when a single rule's closed
half-plane covers both, so the active constraint never has to be dropped
mid-transition.  Any shape can reach the rear wedge A3, which makes a
linear formation a universal intermediate: a reconfiguration plan is
either a direct switch or routes through the line.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .formation import FormationSpec, relative_offset, validate
from .partition import (
    PartitionGeometry,
    RegionLabel,
    UnrepresentableShapeError,
    classify_region,
)

__all__ = [
    "REGION_RULES",
    "IsomorphismError",
    "ReconfigurationPlan",
    "SwitchEvent",
    "FormationSupervisor",
    "region_of_offset",
    "is_1step_reachable",
    "line_formation",
    "plan_sequence",
]

# For each sector, the rules whose half-plane g^l <= 0 contains the whole
# closed sector.  Two sectors are 1-step reachable iff these sets intersect.
REGION_RULES: dict[RegionLabel, frozenset[int]] = {
    RegionLabel.A1: frozenset({1}),
    RegionLabel.A2: frozenset({1, 3}),
    RegionLabel.A3: frozenset({1, 2, 3}),
    RegionLabel.A4: frozenset({2, 3}),
    RegionLabel.A5: frozenset({2}),
}

LINE_EXTRA_GAP = 2.0  # m added behind the wedge so line offsets sit strictly inside A3


class IsomorphismError(ValueError):
    """Formations with different priority orders cannot be interchanged."""


def region_of_offset(offset: tuple[float, float], geom: PartitionGeometry) -> RegionLabel:
    """Sector of a desired offset relative to the watched vehicle."""
    label = classify_region((0.0, 0.0), geom, offset)
    if label is RegionLabel.A0:
        raise UnrepresentableShapeError(f"offset {offset} lies inside the protected wedge")
    return label


def is_1step_reachable(
    from_spec: FormationSpec, to_spec: FormationSpec, geom: PartitionGeometry
) -> bool:
    """Whether every watched-pair offset keeps at least one common rule."""
    if from_spec.priority != to_spec.priority:
        raise IsomorphismError(
            f"priority orders differ: {from_spec.priority} vs {to_spec.priority}"
        )
    for j in range(from_spec.size):
        for i in from_spec.watched_by(j):
            r_from = region_of_offset(relative_offset(from_spec, j, i), geom)
            r_to = region_of_offset(relative_offset(to_spec, j, i), geom)
            if not (REGION_RULES[r_from] & REGION_RULES[r_to]):
                return False
    return True


def line_formation(
    like: FormationSpec, geom: PartitionGeometry, gap: float | None = None
) -> FormationSpec:
    """Canonical single-file formation isomorphic to `like`.

    Vehicles line up on the centerline in priority order, each a fixed gap
    behind its predecessor; the gap exceeds the wedge length so every
    watched-pair offset falls strictly inside A3.
    """
    gap = geom.delta_s + LINE_EXTRA_GAP if gap is None else gap
    rank0 = like.rank(0)
    shape = tuple(
        (float((rank0 - like.rank(v)) * gap), 0.0) for v in range(like.size)
    )
    return FormationSpec(
        shape=shape,
        parents=like.parents,
        priority=like.priority,
        name="line",
        virtual_leader=like.virtual_leader,
    )


@dataclass(frozen=True)
class ReconfigurationPlan:
    """Ordered formation steps, each 1-step reachable from the previous."""

    steps: tuple[FormationSpec, ...]
    switch_times: tuple[float, ...] | None = None
    switch_epsilon: float | None = None
    switch_dwell: float = 2.0

    def __post_init__(self) -> None:
        if not self.steps:
            raise ValueError("plan needs at least one formation")
        if self.switch_times is not None and len(self.switch_times) != len(self.steps) - 1:
            raise ValueError(
                f"{len(self.steps)} steps need {len(self.steps) - 1} switch times, "
                f"got {len(self.switch_times)}"
            )

    def verify(self, geom: PartitionGeometry) -> None:
        for a, b in zip(self.steps[:-1], self.steps[1:]):
            if not is_1step_reachable(a, b, geom):
                raise ValueError(f"step {a.name!r} -> {b.name!r} is not 1-step reachable")


def plan_sequence(
    current: FormationSpec, goal: FormationSpec, geom: PartitionGeometry
) -> ReconfigurationPlan:
    """Reconfiguration plan from `current` to `goal`.

    Direct when 1-step reachable; otherwise routed through the canonical
    line formation, which is reachable from every valid shape.
    """
    for spec in (current, goal):
        problems = validate(spec, geom)
        if problems:
            raise ValueError(f"formation {spec.name!r} invalid: {problems}")
    if current == goal:
        plan = ReconfigurationPlan(steps=(current,))
    elif is_1step_reachable(current, goal, geom):
        plan = ReconfigurationPlan(steps=(current, goal))
    else:
        plan = ReconfigurationPlan(steps=(current, line_formation(current, geom), goal))
    plan.verify(geom)
    return plan


@dataclass(frozen=True)
class SwitchEvent:
    time: float
    index: int
    from_name: str
    to_name: str


class FormationSupervisor:
    """Single writer of the active formation during a run.

    Advances through the plan either at scheduled times or once every
    vehicle's formation error has stayed under a threshold for a dwell
    period.  Vehicle agents read the active spec as a snapshot; the
    selected rules change only at switch instants.
    """

    def __init__(self, plan: ReconfigurationPlan):
        self.plan = plan
        self.index = 0
        self.events: list[SwitchEvent] = []
        self._dwell_start: float | None = None

    @property
    def active(self) -> FormationSpec:
        return self.plan.steps[self.index]

    @property
    def epoch(self) -> int:
        return self.index

    def update(self, now: float, errors: dict[int, float] | None = None) -> SwitchEvent | None:
        """Advance the plan if the switch condition fired; returns the event."""
        if self.index >= len(self.plan.steps) - 1:
            return None
        if self.plan.switch_times is not None:
            if now + 1e-9 < self.plan.switch_times[self.index]:
                return None
        else:
            if self.plan.switch_epsilon is None:
                return None
            worst = max(errors.values()) if errors else float("inf")
            if worst >= self.plan.switch_epsilon:
                self._dwell_start = None
                return None
            if self._dwell_start is None:
                self._dwell_start = now
            if now - self._dwell_start + 1e-9 < self.plan.switch_dwell:
                return None
            self._dwell_start = None
        old = self.active
        self.index += 1
        event = SwitchEvent(
            time=float(now), index=self.index, from_name=old.name, to_name=self.active.name
        )
        self.events.append(event)
        return event
