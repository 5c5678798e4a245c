"""Shared constructors used across the test modules."""

from roadformation.dynamics import ControlInput, Trajectory, VehicleState
from roadformation.formation import FormationSpec


def cruise_trajectory(
    s0: float,
    v: float,
    t0: float = 0.0,
    dt: float = 0.25,
    n: int = 20,
    r: float = 0.0,
    vehicle_id: int = 0,
) -> Trajectory:
    """Constant-speed centerline trajectory (exact for the straight-road model)."""
    knots = tuple(
        (VehicleState(s0 + v * dt * k, r, v, 0.0, 0.0), ControlInput(0.0, 0.0)) for k in range(n + 1)
    )
    return Trajectory(t0=t0, dt=dt, vehicle_id=vehicle_id, knots=knots)


def four_vehicle_shapes() -> dict[str, FormationSpec]:
    """The four-stage reconfiguration sequence used by the curvy-road scenario."""
    common = dict(parents=(None, 0, 0, 1), priority=(0, 1, 2, 3))
    return {
        "s1": FormationSpec(
            shape=((0.0, 0.0), (-10.0, 3.0), (-10.0, -3.0), (-20.0, 0.0)), name="s1", **common
        ),
        "s2": FormationSpec(
            shape=((0.0, 0.0), (-10.0, 0.0), (-20.0, 0.0), (-30.0, 0.0)),
            parents=(None, 0, 1, 2),
            priority=(0, 1, 2, 3),
            name="s2",
        ),
        "s3": FormationSpec(
            shape=((0.0, 0.0), (-10.0, -3.0), (-10.0, 3.0), (-20.0, 0.0)), name="s3", **common
        ),
        "s4": FormationSpec(
            shape=((0.0, 3.0), (0.0, -3.0), (-10.0, 3.0), (-10.0, -3.0)),
            name="s4",
            virtual_leader=True,
            **common,
        ),
    }
