"""Formation definition and follower reference construction.

A formation couples a shape (desired per-vehicle offsets from the
leader), a tree assigning each vehicle the parent whose plan it offsets,
and a total priority order used by the collision rules.  Vehicle 0 is
the leader; it may be a physical vehicle or a virtual reference point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import ControlInput, CoverageError, Trajectory, VehicleState, extrapolate, sample_states
from .road import RoadModel

__all__ = [
    "FormationSpec",
    "FormationError",
    "validate",
    "validate_with_warnings",
    "relative_offset",
    "make_reference",
    "formation_error",
]


@dataclass(frozen=True)
class FormationSpec:
    """Shape rows, parent pointers and priority order for N+1 vehicles.

    ``parents[j]`` is the vehicle whose trajectory j offsets (None for the
    root, vehicle 0).  ``priority`` lists vehicle ids from highest to
    lowest priority.  ``virtual_leader`` marks shapes whose row 0 is an
    offset from a virtual reference point rather than (0, 0).
    """

    shape: tuple[tuple[float, float], ...]
    parents: tuple[int | None, ...]
    priority: tuple[int, ...]
    name: str = ""
    virtual_leader: bool = False
    _rank: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_rank", {v: i for i, v in enumerate(self.priority)})

    @property
    def size(self) -> int:
        return len(self.shape)

    def rank(self, vehicle: int) -> int:
        """Position of a vehicle in the priority order (0 = highest)."""
        return self._rank[vehicle]

    def watched_by(self, j: int) -> list[int]:
        """All vehicles of strictly higher priority than j, in rank order."""
        return [i for i in self.priority if self.rank(i) < self.rank(j)]


@dataclass(frozen=True)
class FormationError:
    """Longitudinal/lateral tracking error of a vehicle's formation slot."""

    e_s: float
    e_r: float
    e: float

    @classmethod
    def from_components(cls, e_s: float, e_r: float) -> "FormationError":
        return cls(e_s=float(e_s), e_r=float(e_r), e=math.hypot(e_s, e_r))


def validate_with_warnings(spec: FormationSpec, geom=None) -> tuple[list[str], list[str]]:
    """Check the formation invariants; returns (violations, warnings).

    With a partition geometry supplied, desired offsets that fall inside a
    higher-priority vehicle's protected wedge are reported too.
    """
    violations: list[str] = []
    warnings: list[str] = []
    n = spec.size
    if len(spec.parents) != n:
        violations.append(f"parents has {len(spec.parents)} entries for {n} vehicles")
        return violations, warnings
    if sorted(spec.priority) != list(range(n)):
        violations.append(f"priority {spec.priority} is not a permutation of 0..{n - 1}")
        return violations, warnings

    if spec.parents[0] is not None:
        violations.append("vehicle 0 must be the tree root (parent None)")
    for j in range(1, n):
        p = spec.parents[j]
        if p is None or not (0 <= p < n) or p == j:
            violations.append(f"vehicle {j} needs a parent in 0..{n - 1}, got {p}")
    # Every vehicle must reach the root by following parents (no cycles).
    for j in range(1, n):
        seen = set()
        node = j
        while node != 0 and node not in seen and spec.parents[node] is not None:
            seen.add(node)
            node = spec.parents[node]
        if node != 0:
            violations.append(f"vehicle {j} is not connected to the leader through the tree")

    if spec.shape[0] != (0.0, 0.0):
        msg = f"shape row 0 is {spec.shape[0]}, expected (0, 0)"
        if spec.virtual_leader:
            warnings.append(msg + " (virtual-leader formation)")
        else:
            violations.append(msg)

    # Priority must order vehicles front-to-back: a higher rank never sits
    # ahead, and strictly-ahead vehicles always rank higher.
    for i in range(n):
        for j in range(n):
            if spec.rank(i) < spec.rank(j) and spec.shape[i][0] < spec.shape[j][0]:
                violations.append(
                    f"priority says {i} before {j} but desired s {spec.shape[i][0]} < {spec.shape[j][0]}"
                )

    if geom is not None:
        from .partition import classify_region, RegionLabel

        for j in range(n):
            for i in spec.watched_by(j):
                off = relative_offset(spec, j, i)
                if classify_region((0.0, 0.0), geom, off) is RegionLabel.A0:
                    violations.append(
                        f"desired offset of vehicle {j} from {i} {off} lies in the protected wedge"
                    )
    return violations, warnings


def validate(spec: FormationSpec, geom=None) -> list[str]:
    """Violations of the formation invariants; empty list means ok."""
    return validate_with_warnings(spec, geom)[0]


def relative_offset(spec: FormationSpec, j: int, i: int) -> tuple[float, float]:
    """Desired position of vehicle j relative to vehicle i."""
    return (
        spec.shape[j][0] - spec.shape[i][0],
        spec.shape[j][1] - spec.shape[i][1],
    )


def make_reference(
    parent_traj: Trajectory,
    offset: tuple[float, float],
    now: float,
    horizon: float,
    road: RoadModel,
    dt: float | None = None,
    vehicle_id: int = -1,
) -> Trajectory:
    """Reference for a follower: the parent's plan, shifted by the offset.

    The parent plan is extended past its horizon by holding its last
    control, shifted by the desired relative position, resampled onto the
    follower's knot grid, and the non-position components are zeroed.
    """
    if parent_traj.t0 > now + 1e-9:
        raise CoverageError(f"parent plan starts at {parent_traj.t0}, after now={now}")
    dt = parent_traj.dt if dt is None else dt
    n = int(round(horizon / dt))
    times = now + dt * np.arange(n + 1)
    extended = extrapolate(parent_traj, float(times[-1]) + 1e-9, road)
    states = sample_states(extended, times)
    knots = []
    for row in states:
        st = VehicleState(s=float(row[0] + offset[0]), r=float(row[1] + offset[1]), v=0.0, theta=0.0, k=0.0)
        knots.append((st, ControlInput(0.0, 0.0)))
    return Trajectory(t0=float(now), dt=dt, vehicle_id=vehicle_id, knots=tuple(knots))


def formation_error(
    state_j: VehicleState, state_leader: VehicleState, spec: FormationSpec, j: int
) -> FormationError:
    """Deviation of vehicle j from its slot relative to the leader.

    Measured against the leader-relative offset (row j minus row 0) so
    virtual-leader shapes are handled uniformly; for ordinary shapes row 0
    is (0, 0) and this is the plain leader-plus-offset error.
    """
    off_s, off_r = relative_offset(spec, j, 0)
    e_s = (state_j.s - state_leader.s) - off_s
    e_r = (state_j.r - state_leader.r) - off_r
    return FormationError.from_components(e_s, e_r)
