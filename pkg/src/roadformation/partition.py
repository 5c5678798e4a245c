"""Priority-based collision rules from an affine partition of the road plane.

Around a pivot vehicle at (s_i, r_i), three affine functions

    g1 = -(r - r_i)/dr + (s - s_i)/ds + 1
    g2 = +(r - r_i)/dr + (s - s_i)/ds + 1
    g3 =                 (s - s_i)/ds + 1

vanish together at (s_i - ds, r_i) and cut the plane into six sectors
A0..A5.  A0 (all three positive) is the protected wedge around the
pivot; a lower-priority vehicle keeps one selected g <= 0, which pins
down the homotopy class of its avoidance maneuver.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .formation import FormationSpec, relative_offset

__all__ = [
    "PartitionGeometry",
    "PartitionConstraint",
    "RegionLabel",
    "UnrepresentableShapeError",
    "g",
    "g_all",
    "classify_region",
    "select_rule",
    "active_constraints",
]


class UnrepresentableShapeError(ValueError):
    """A desired offset that no single partition rule can express."""


@dataclass(frozen=True)
class PartitionGeometry:
    """Longitudinal/lateral extents of the protected wedge."""

    delta_s: float
    delta_r: float

    def __post_init__(self) -> None:
        if self.delta_s <= 0 or self.delta_r <= 0:
            raise ValueError("delta_s and delta_r must be positive")


class RegionLabel(enum.Enum):
    A0 = 0  # protected forward wedge
    A1 = 1  # upper-forward-left
    A2 = 2  # upper-rear
    A3 = 3  # rear wedge
    A4 = 4  # lower-rear
    A5 = 5  # lower-forward-right


@dataclass(frozen=True)
class PartitionConstraint:
    """One selected rule binding a vehicle to a higher-priority vehicle's safe region."""

    watched_vehicle: int
    constrained_vehicle: int
    rule: int
    slack_weight: float = 10000.0

    def __post_init__(self) -> None:
        if self.rule not in (1, 2, 3):
            raise ValueError(f"rule must be 1, 2 or 3, got {self.rule}")


def g_all(
    pivot: tuple[float, float], geom: PartitionGeometry, point: tuple[float, float]
) -> tuple[float, float, float]:
    """All three partition values of `point` relative to `pivot`."""
    xi = (point[0] - pivot[0]) / geom.delta_s
    rho = (point[1] - pivot[1]) / geom.delta_r
    return (-rho + xi + 1.0, rho + xi + 1.0, xi + 1.0)


def g(
    l: int, pivot: tuple[float, float], geom: PartitionGeometry, point: tuple[float, float]
) -> float:
    """Partition function g^l of `point` relative to `pivot`."""
    if l not in (1, 2, 3):
        raise ValueError(f"rule index must be 1, 2 or 3, got {l}")
    return g_all(pivot, geom, point)[l - 1]


def classify_region(
    pivot: tuple[float, float], geom: PartitionGeometry, point: tuple[float, float]
) -> RegionLabel:
    """Sector of `point` in the partition around `pivot`.

    Boundary points resolve through the sign cascade below (g1 first,
    then g2, then g3), which keeps the closed half-plane identities
    {g1<=0} = A1|A2|A3, {g2<=0} = A3|A4|A5, {g3<=0} = A2|A3|A4 and sends
    the concurrency point itself to A3.
    """
    g1, g2, g3 = g_all(pivot, geom, point)
    if g1 > 0.0:
        if g2 > 0.0:
            return RegionLabel.A0
        return RegionLabel.A4 if g3 <= 0.0 else RegionLabel.A5
    if g2 > 0.0:
        return RegionLabel.A1 if g3 > 0.0 else RegionLabel.A2
    return RegionLabel.A3


def select_rule(spec: FormationSpec, geom: PartitionGeometry, j: int, i: int) -> int:
    """Rule index l binding vehicle j to the safe region of vehicle i.

    The desired offset picks the rule: far enough behind -> stay behind
    (rule 3); otherwise the lateral sign picks left (1) or right (2).  An
    offset on the wedge axis with no longitudinal clearance admits no rule.
    """
    if spec.rank(i) >= spec.rank(j):
        raise ValueError(f"vehicle {i} does not have higher priority than {j}")
    s_d, r_d = relative_offset(spec, j, i)
    if s_d <= -geom.delta_s + 1e-9:
        return 3
    if r_d > 1e-12:
        return 1
    if r_d < -1e-12:
        return 2
    raise UnrepresentableShapeError(
        f"offset ({s_d}, {r_d}) of vehicle {j} from {i} sits on the protected wedge axis"
    )


def active_constraints(
    spec: FormationSpec, geom: PartitionGeometry, j: int, slack_weight: float = 10000.0
) -> list[PartitionConstraint]:
    """One constraint per higher-priority vehicle, with its selected rule."""
    return [
        PartitionConstraint(
            watched_vehicle=i,
            constrained_vehicle=j,
            rule=select_rule(spec, geom, j, i),
            slack_weight=slack_weight,
        )
        for i in spec.watched_by(j)
    ]
