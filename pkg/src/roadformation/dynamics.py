"""Kinematic bicycle model expressed in road-following coordinates.

State x = [s, r, v, theta, k]: arc length, lateral offset, speed, heading
alignment error and trajectory curvature.  Controls u = [a, kappa]:
longitudinal acceleration and curvature rate.  The model is

    s'     = v cos(theta) / (1 - r c(s))
    r'     = v sin(theta)
    v'     = a
    theta' = v k - v cos(theta) c(s) / (1 - r c(s))
    k'     = kappa

The derivative vector is aligned with the state component order, so
component 2 is v' and component 3 is theta'.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .road import RoadModel

__all__ = [
    "STATE_DIM",
    "CONTROL_DIM",
    "VehicleState",
    "ControlInput",
    "BoundSet",
    "Trajectory",
    "SingularityError",
    "CoverageError",
    "derivative",
    "derivative_array",
    "dynamics_jacobians",
    "integrate",
    "rk4_step",
    "rk4_step_with_jacobians",
    "extrapolate",
    "sample_states",
    "max_defect",
]

STATE_DIM = 5
CONTROL_DIM = 2


class SingularityError(ArithmeticError):
    """The frame denominator 1 - r*c(s) is not positive at an evaluation point."""


class CoverageError(ValueError):
    """A trajectory does not cover a requested time window."""


@dataclass(frozen=True)
class VehicleState:
    s: float
    r: float
    v: float
    theta: float
    k: float

    def as_array(self) -> np.ndarray:
        return np.array([self.s, self.r, self.v, self.theta, self.k], dtype=float)

    @classmethod
    def from_array(cls, x: np.ndarray) -> "VehicleState":
        return cls(float(x[0]), float(x[1]), float(x[2]), float(x[3]), float(x[4]))


@dataclass(frozen=True)
class ControlInput:
    a: float
    kappa: float

    def as_array(self) -> np.ndarray:
        return np.array([self.a, self.kappa], dtype=float)

    @classmethod
    def from_array(cls, u: np.ndarray) -> "ControlInput":
        return cls(float(u[0]), float(u[1]))


@dataclass(frozen=True)
class BoundSet:
    """Box limits on the state/control plus the lateral-acceleration cap."""

    v_min: float = 0.0
    v_max: float = 10.0
    a_max: float = 2.5
    k_max: float = 0.2
    kappa_max: float = 0.1
    a_lat_max: float = 2.5

    def __post_init__(self) -> None:
        if self.v_min < 0:
            raise ValueError("v_min must be >= 0")
        for name in ("v_max", "a_max", "k_max", "kappa_max", "a_lat_max"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class Trajectory:
    """Time-stamped (state, control) knots; the unit exchanged between vehicles.

    The control stored at the final knot is the value held beyond the
    horizon (a repeat of the last applied control).
    """

    t0: float
    dt: float
    vehicle_id: int
    knots: tuple[tuple[VehicleState, ControlInput], ...]

    def __post_init__(self) -> None:
        if not self.knots:
            raise ValueError("trajectory needs at least one knot")
        if self.dt <= 0:
            raise ValueError("dt must be positive")

    @property
    def end_time(self) -> float:
        return self.t0 + self.dt * (len(self.knots) - 1)

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self.knots))

    def states_array(self) -> np.ndarray:
        return np.array([st.as_array() for st, _ in self.knots])

    def controls_array(self) -> np.ndarray:
        return np.array([u.as_array() for _, u in self.knots])

    def control_at(self, t: float) -> ControlInput:
        """Zero-order-hold control lookup; clamps to the first/last knot."""
        idx = int(np.floor((t - self.t0) / self.dt + 1e-9))
        idx = min(max(idx, 0), len(self.knots) - 1)
        return self.knots[idx][1]

    def state_at(self, t: float) -> VehicleState:
        """State at time t by linear interpolation between knots."""
        return VehicleState.from_array(sample_states(self, np.array([t]))[0])


def _denominator(r: float, c: float) -> float:
    d = 1.0 - r * c
    if d <= 1e-9:
        raise SingularityError(f"1 - r*c = {d!r} at r={r}, c={c}")
    return d


def derivative_array(x: np.ndarray, u: np.ndarray, road: RoadModel) -> np.ndarray:
    """Right-hand side f(x, u) as a 5-vector aligned with the state order."""
    s, r, v, theta, k = x
    c = road.curvature_at(float(s))
    d = _denominator(r, c)
    cos_t = np.cos(theta)
    return np.array(
        [
            v * cos_t / d,
            v * np.sin(theta),
            u[0],
            v * k - v * cos_t * c / d,
            u[1],
        ]
    )


def derivative(state: VehicleState, control: ControlInput, road: RoadModel) -> np.ndarray:
    return derivative_array(state.as_array(), control.as_array(), road)


def dynamics_jacobians(
    x: np.ndarray, u: np.ndarray, road: RoadModel
) -> tuple[np.ndarray, np.ndarray]:
    """Analytic Jacobians (df/dx, df/du) of the model at (x, u)."""
    s, r, v, theta, k = x
    c = road.curvature_at(float(s))
    cp = road.curvature_deriv_at(float(s))
    d = _denominator(r, c)
    cos_t = np.cos(theta)
    sin_t = np.sin(theta)
    fx = np.zeros((STATE_DIM, STATE_DIM))
    # s' = v cos(theta) / d, with dd/ds = -r c', dd/dr = -c
    fx[0, 0] = v * cos_t * r * cp / d**2
    fx[0, 1] = v * cos_t * c / d**2
    fx[0, 2] = cos_t / d
    fx[0, 3] = -v * sin_t / d
    # r' = v sin(theta)
    fx[1, 2] = sin_t
    fx[1, 3] = v * cos_t
    # theta' = v k - v cos(theta) c / d; note d + r c = 1
    fx[3, 0] = -v * cos_t * cp / d**2
    fx[3, 1] = -v * cos_t * c**2 / d**2
    fx[3, 2] = k - cos_t * c / d
    fx[3, 3] = v * sin_t * c / d
    fx[3, 4] = v
    fu = np.zeros((STATE_DIM, CONTROL_DIM))
    fu[2, 0] = 1.0
    fu[4, 1] = 1.0
    return fx, fu


def rk4_step(x: np.ndarray, u: np.ndarray, road: RoadModel, h: float) -> np.ndarray:
    """Classical fourth-order one-step integration; O(h^5) local error."""
    k1 = derivative_array(x, u, road)
    k2 = derivative_array(x + 0.5 * h * k1, u, road)
    k3 = derivative_array(x + 0.5 * h * k2, u, road)
    k4 = derivative_array(x + h * k3, u, road)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_step_with_jacobians(
    x: np.ndarray, u: np.ndarray, road: RoadModel, h: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One RK4 step plus the step Jacobians d(next)/dx and d(next)/du."""
    k1 = derivative_array(x, u, road)
    a1, b1 = dynamics_jacobians(x, u, road)
    x2 = x + 0.5 * h * k1
    k2 = derivative_array(x2, u, road)
    a2p, b2p = dynamics_jacobians(x2, u, road)
    a2 = a2p @ (np.eye(STATE_DIM) + 0.5 * h * a1)
    b2 = a2p @ (0.5 * h * b1) + b2p
    x3 = x + 0.5 * h * k2
    k3 = derivative_array(x3, u, road)
    a3p, b3p = dynamics_jacobians(x3, u, road)
    a3 = a3p @ (np.eye(STATE_DIM) + 0.5 * h * a2)
    b3 = a3p @ (0.5 * h * b2) + b3p
    x4 = x + h * k3
    k4 = derivative_array(x4, u, road)
    a4p, b4p = dynamics_jacobians(x4, u, road)
    a4 = a4p @ (np.eye(STATE_DIM) + h * a3)
    b4 = a4p @ (h * b3) + b4p
    x_next = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    a_step = np.eye(STATE_DIM) + (h / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
    b_step = (h / 6.0) * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
    return x_next, a_step, b_step


def integrate(state: VehicleState, control: ControlInput, road: RoadModel, h: float) -> VehicleState:
    """Advance the state by one step of size h under a constant control."""
    if h <= 0:
        raise ValueError("step size must be positive")
    return VehicleState.from_array(rk4_step(state.as_array(), control.as_array(), road, h))


def extrapolate(traj: Trajectory, target_end: float, road: RoadModel) -> Trajectory:
    """Extend a trajectory by holding its final control constant.

    New knots are appended at the trajectory's own dt until the end time
    reaches target_end; the original knots are untouched.  A braking
    control is zeroed once the speed reaches zero so the extension never
    drives the vehicle backwards.
    """
    n_extra = int(np.ceil((target_end - traj.end_time) / traj.dt - 1e-9))
    if n_extra <= 0:
        return traj
    knots = list(traj.knots)
    state, control = knots[-1]
    for _ in range(n_extra):
        u = control
        if control.a < 0.0 and state.v + control.a * traj.dt < 0.0:
            # limit the braking so this step lands exactly at rest
            u = replace(control, a=-max(state.v, 0.0) / traj.dt)
        state = integrate(state, u, road, traj.dt)
        knots.append((state, u))
        control = u
    return Trajectory(t0=traj.t0, dt=traj.dt, vehicle_id=traj.vehicle_id, knots=tuple(knots))


def sample_states(traj: Trajectory, times: np.ndarray) -> np.ndarray:
    """Linear per-component interpolation of the knot states at given times."""
    times = np.asarray(times, dtype=float)
    knot_t = traj.times()
    if np.any(times < knot_t[0] - 1e-9) or np.any(times > knot_t[-1] + 1e-9):
        raise CoverageError(
            f"requested [{times.min()}, {times.max()}] outside trajectory "
            f"[{knot_t[0]}, {knot_t[-1]}]"
        )
    states = traj.states_array()
    out = np.empty((len(times), STATE_DIM))
    for j in range(STATE_DIM):
        out[:, j] = np.interp(times, knot_t, states[:, j])
    return out


def max_defect(traj: Trajectory, road: RoadModel) -> float:
    """Largest per-component gap when each knot is re-integrated to the next."""
    worst = 0.0
    for (state, control), (nxt, _) in zip(traj.knots[:-1], traj.knots[1:]):
        pred = rk4_step(state.as_array(), control.as_array(), road, traj.dt)
        worst = max(worst, float(np.max(np.abs(pred - nxt.as_array()))))
    return worst
