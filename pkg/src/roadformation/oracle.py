"""Brute-force cross-check for the trajectory optimizer.

Enumerates piecewise-constant accelerations on a short speed-tracking
horizon and evaluates the same stage cost the optimizer minimizes.  Kept
deliberately independent of the solver: speeds follow the exact
closed-form v_{k+1} = v_k + a_k dt of the longitudinal subsystem.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import BoundSet, ControlInput, Trajectory, VehicleState
from .ocp import OcpInstance, Weights, solve
from .road import RoadModel

__all__ = ["brute_force_speed_cost", "speed_tracking_instance", "oracle_gap"]


def brute_force_speed_cost(
    v0: float,
    v_ref: float,
    q_v: float,
    r_a: float,
    dt: float,
    n_knots: int = 3,
    bounds: BoundSet | None = None,
    grid: int = 101,
) -> tuple[float, np.ndarray]:
    """Best cost over an acceleration grid, and the best control sequence.

    Cost matches the optimizer's left-endpoint stage sum
    dt * sum_k [q_v (v_k - v_ref)^2 + r_a a_k^2], k = 0..N-1.
    """
    bounds = bounds or BoundSet()
    axis = np.linspace(-bounds.a_max, bounds.a_max, grid)
    grids = np.meshgrid(*([axis] * n_knots), indexing="ij")
    accels = np.stack([g.ravel() for g in grids], axis=1)  # (grid^n, n)
    v = np.empty((accels.shape[0], n_knots + 1))
    v[:, 0] = v0
    for k in range(n_knots):
        v[:, k + 1] = v[:, k] + accels[:, k] * dt
    ok = np.all((v[:, 1:] >= bounds.v_min - 1e-12) & (v[:, 1:] <= bounds.v_max + 1e-12), axis=1)
    stage = q_v * (v[:, :n_knots] - v_ref) ** 2 + r_a * accels**2
    costs = dt * stage.sum(axis=1)
    costs[~ok] = np.inf
    best = int(np.argmin(costs))
    return float(costs[best]), accels[best]


def speed_tracking_instance(
    road: RoadModel,
    v0: float,
    v_ref: float,
    q_v: float = 2.0,
    r: tuple[float, float] = (1.0, 200.0),
    bounds: BoundSet | None = None,
    n_knots: int = 3,
    dt: float = 0.25,
) -> OcpInstance:
    """Speed-tracking-only OCP on a straight road (all other weights zero)."""
    bounds = bounds or BoundSet()
    horizon = n_knots * dt
    knots = tuple(
        (VehicleState(s=v_ref * dt * k, r=0.0, v=v_ref, theta=0.0, k=0.0), ControlInput(0.0, 0.0))
        for k in range(n_knots + 1)
    )
    reference = Trajectory(t0=0.0, dt=dt, vehicle_id=-1, knots=knots)
    return OcpInstance(
        x0=VehicleState(s=0.0, r=0.0, v=v0, theta=0.0, k=0.0),
        reference=reference,
        bounds=bounds,
        road=road,
        weights=Weights(q=(0.0, 0.0, q_v, 0.0, 0.0), r=r),
        t0=0.0,
        horizon=horizon,
        n_knots=n_knots,
    )


@dataclass(frozen=True)
class OracleReport:
    solver_cost: float
    grid_cost: float

    @property
    def gap(self) -> float:
        scale = max(abs(self.grid_cost), 1e-12)
        return abs(self.solver_cost - self.grid_cost) / scale


def oracle_gap(
    road: RoadModel,
    v0: float,
    v_ref: float,
    q_v: float = 2.0,
    bounds: BoundSet | None = None,
    grid: int = 101,
) -> OracleReport:
    """Relative cost gap between the optimizer and the enumeration oracle."""
    bounds = bounds or BoundSet()
    instance = speed_tracking_instance(road, v0, v_ref, q_v=q_v, bounds=bounds)
    solution = solve(instance)
    grid_cost, _ = brute_force_speed_cost(
        v0, v_ref, q_v, instance.weights.r[0], instance.dt, instance.n_knots, bounds, grid
    )
    return OracleReport(solver_cost=solution.cost, grid_cost=grid_cost)
