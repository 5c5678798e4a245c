"""Per-vehicle receding-horizon trajectory optimization.

Direct single shooting: the decision vector holds the N control knots
plus one nonnegative slack per soft inter-vehicle constraint per knot.
States follow from fourth-order integration of the bicycle model, with
sensitivities propagated analytically through the integrator stages, so
cost and constraint gradients are exact.  The nonlinear program is
solved with a sequential quadratic method; every returned solution is
audited for feasibility and first-order stationarity before it may be
labeled converged.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize, nnls

from .dynamics import (
    CONTROL_DIM,
    STATE_DIM,
    BoundSet,
    ControlInput,
    CoverageError,
    Trajectory,
    VehicleState,
    sample_states,
)
from .obstacles import ObstacleParabola, clearance_with_gradient
from .partition import PartitionConstraint
from .road import RoadModel

__all__ = [
    "Weights",
    "PartitionTerm",
    "OcpInstance",
    "OcpSolution",
    "ShootingProgram",
    "discretize",
    "solve",
    "gradient_check",
]

FEAS_TOL = 1e-4
STAT_TOL = 1e-4
MAX_ITER = 50
X0_TOL = 1e-3

# The frame denominator 1 - r*c(s) is smoothly clamped above this floor so
# that line-search probes far outside the road stay finite; the clamp is
# bit-exact identity for any state the constraints allow.
_D_FLOOR = 0.05
_D_SHARPNESS = 100.0


@dataclass(frozen=True)
class Weights:
    """Diagonal tracking weights and the soft-constraint penalty."""

    q: tuple[float, float, float, float, float]
    r: tuple[float, float]
    p: tuple[float, float, float, float, float] = (0.0,) * 5
    slack_penalty: float = 10000.0

    def __post_init__(self) -> None:
        if any(w < 0 for w in self.q) or any(w < 0 for w in self.p):
            raise ValueError("state weights must be nonnegative")
        if any(w <= 0 for w in self.r):
            raise ValueError("control weights must be positive")
        if any(w != 0 for w in self.p):
            raise ValueError("terminal weights are fixed to zero in this controller")
        if self.slack_penalty <= 0:
            raise ValueError("slack penalty must be positive")


@dataclass(frozen=True)
class PartitionTerm:
    """A soft rule plus the watched vehicle's predicted pivot at knots 1..N."""

    constraint: PartitionConstraint
    pivot_s: np.ndarray
    pivot_r: np.ndarray
    delta_s: float
    delta_r: float


@dataclass(frozen=True)
class OcpInstance:
    x0: VehicleState
    reference: Trajectory
    bounds: BoundSet
    road: RoadModel
    weights: Weights
    t0: float
    horizon: float = 5.0
    n_knots: int = 20
    obstacles: tuple[ObstacleParabola, ...] = ()
    partition: tuple[PartitionTerm, ...] = ()
    road_margin: float = 0.0
    # Bounds are enforced at knots only, and the plant consumes plans on a
    # replanning grid slightly offset from the knot grid, so the continuous
    # state can drift a little past the knot-verified envelope: v^2 k bulges
    # between knots by up to (2 a^2 k + 4 v a kappa) dt^2 / 8, and v and k
    # ramp for up to ~10 ms beyond the last verified knot.  The margins
    # below dominate those drifts so the plant stays inside the raw bounds.
    lat_margin: float = 0.12
    v_margin: float = 0.02
    k_margin: float = 0.002

    def __post_init__(self) -> None:
        if self.n_knots < 1 or self.horizon <= 0:
            raise ValueError("need a positive horizon and at least one knot")
        for term in self.partition:
            if len(term.pivot_s) != self.n_knots or len(term.pivot_r) != self.n_knots:
                raise ValueError("pivot arrays must cover knots 1..N")

    @property
    def dt(self) -> float:
        return self.horizon / self.n_knots


@dataclass
class OcpSolution:
    trajectory: Trajectory
    cost: float
    slacks: np.ndarray
    status: str  # converged | max-iter | infeasible-hard
    iterations: int
    solve_time: float
    stationarity: float = float("nan")
    max_violation: float = float("nan")
    z: np.ndarray = field(default=None, repr=False)


def _guard(d_raw: float) -> tuple[float, float]:
    """Smooth floor on the frame denominator: value and its derivative."""
    x = d_raw - _D_FLOOR
    bx = _D_SHARPNESS * x
    if bx > 40.0:
        return d_raw, 1.0
    if bx < -40.0:
        return _D_FLOOR, 0.0
    soft = max(x, 0.0) + math.log1p(math.exp(-abs(bx))) / _D_SHARPNESS
    sig = 1.0 / (1.0 + math.exp(-bx))
    return _D_FLOOR + soft, sig


def _stage_f(x: np.ndarray, u: np.ndarray, road: RoadModel) -> np.ndarray:
    """Guarded model value only (used by cost/constraint evaluations)."""
    s, r, v, theta, k = x
    c, _ = road.curvature_extended(float(s))
    d, _ = _guard(1.0 - r * c)
    cos_t = math.cos(theta)
    return np.array([v * cos_t / d, v * math.sin(theta), u[0], v * k - v * cos_t * c / d, u[1]])


def _stage(x: np.ndarray, u: np.ndarray, road: RoadModel) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Guarded model value and Jacobians used inside the optimizer."""
    s, r, v, theta, k = x
    c, cp = road.curvature_extended(float(s))
    d, sig = _guard(1.0 - r * c)
    cos_t = math.cos(theta)
    sin_t = math.sin(theta)
    f = np.array([v * cos_t / d, v * sin_t, u[0], v * k - v * cos_t * c / d, u[1]])
    inv2 = 1.0 / (d * d)
    fx = np.zeros((STATE_DIM, STATE_DIM))
    fx[0, 0] = v * cos_t * inv2 * sig * r * cp
    fx[0, 1] = v * cos_t * inv2 * sig * c
    fx[0, 2] = cos_t / d
    fx[0, 3] = -v * sin_t / d
    fx[1, 2] = sin_t
    fx[1, 3] = v * cos_t
    fx[3, 0] = -v * cos_t * (cp / d + c * inv2 * sig * r * cp)
    fx[3, 1] = -v * cos_t * c * c * inv2 * sig
    fx[3, 2] = k - cos_t * c / d
    fx[3, 3] = v * sin_t * c / d
    fx[3, 4] = v
    fu = np.zeros((STATE_DIM, CONTROL_DIM))
    fu[2, 0] = 1.0
    fu[4, 1] = 1.0
    return f, fx, fu


def _rk4_f(x: np.ndarray, u: np.ndarray, road: RoadModel, h: float) -> np.ndarray:
    """Guarded RK4 step, value only."""
    k1 = _stage_f(x, u, road)
    k2 = _stage_f(x + 0.5 * h * k1, u, road)
    k3 = _stage_f(x + 0.5 * h * k2, u, road)
    k4 = _stage_f(x + h * k3, u, road)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _rk4_stage(x: np.ndarray, u: np.ndarray, road: RoadModel, h: float):
    """Guarded RK4 step with step Jacobians."""
    eye = np.eye(STATE_DIM)
    k1, a1, b1 = _stage(x, u, road)
    k2, a2p, b2p = _stage(x + 0.5 * h * k1, u, road)
    a2 = a2p @ (eye + 0.5 * h * a1)
    b2 = a2p @ (0.5 * h * b1) + b2p
    k3, a3p, b3p = _stage(x + 0.5 * h * k2, u, road)
    a3 = a3p @ (eye + 0.5 * h * a2)
    b3 = a3p @ (0.5 * h * b2) + b3p
    k4, a4p, b4p = _stage(x + h * k3, u, road)
    a4 = a4p @ (eye + h * a3)
    b4 = a4p @ (h * b3) + b4p
    x_next = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    a_step = eye + (h / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
    b_step = (h / 6.0) * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
    return x_next, a_step, b_step


class ShootingProgram:
    """Transcribed nonlinear program for one OCP instance.

    Decision layout: [a_0, kappa_0, ..., a_{N-1}, kappa_{N-1},
    eps_{term0,1..N}, eps_{term1,1..N}, ...].  Constraints are stacked as
    one vector in >= 0 convention; `kinds` labels each row.
    """

    def __init__(self, instance: OcpInstance):
        self.inst = instance
        self.n = instance.n_knots
        self.dt = instance.dt
        self.n_u = CONTROL_DIM * self.n
        self.n_soft = len(instance.partition)
        self.dim = self.n_u + self.n_soft * self.n
        self.x0 = instance.x0.as_array()
        times = instance.t0 + self.dt * np.arange(self.n + 1)
        try:
            self.ref = sample_states(instance.reference, times)
        except CoverageError as exc:
            raise CoverageError(f"reference does not cover the horizon: {exc}") from exc
        self.q = np.asarray(instance.weights.q, dtype=float)
        self.r_w = np.asarray(instance.weights.r, dtype=float)
        self.k_penalty = instance.weights.slack_penalty
        self.kinds: list[str] = []
        b = instance.bounds
        # A band wider than any reachable offset never binds; drop its rows.
        self.road_rows = bool(
            np.min(instance.road.left_r) < 1e5 or np.max(instance.road.right_r) > -1e5
        )
        names = ["v_min", "v_max", "k_min", "k_max", "lat_min", "lat_max"]
        if self.road_rows:
            names += ["road_left", "road_right"]
        self.rows_per_knot = len(names)
        for k in range(1, self.n + 1):
            self.kinds += [f"{name}[{k}]" for name in names]
        for o_idx in range(len(instance.obstacles)):
            self.kinds += [f"obstacle{o_idx}[{k}]" for k in range(1, self.n + 1)]
        for t_idx, term in enumerate(instance.partition):
            self.kinds += [
                f"partition{t_idx}:g{term.constraint.rule}[{k}]" for k in range(1, self.n + 1)
            ]
        self.m = len(self.kinds)
        self._bounds_lo = np.concatenate(
            [np.tile([-b.a_max, -b.kappa_max], self.n), np.zeros(self.n_soft * self.n)]
        )
        self._bounds_hi = np.concatenate(
            [np.tile([b.a_max, b.kappa_max], self.n), np.full(self.n_soft * self.n, np.inf)]
        )
        self._cache: dict[bytes, dict] = {}

    # -- rollout ---------------------------------------------------------

    def _entry(self, z: np.ndarray) -> dict:
        key = z.tobytes()
        entry = self._cache.get(key)
        if entry is None:
            entry = {"z": np.array(z)}
            if len(self._cache) >= 8:
                self._cache.pop(next(iter(self._cache)))
            self._cache[key] = entry
        return entry

    def states(self, z: np.ndarray) -> np.ndarray:
        """Shooting states (N+1, 5) under the controls in z."""
        entry = self._entry(z)
        if "states" not in entry:
            u = z[: self.n_u].reshape(self.n, CONTROL_DIM)
            states = np.empty((self.n + 1, STATE_DIM))
            states[0] = self.x0
            for k in range(self.n):
                states[k + 1] = _rk4_f(states[k], u[k], self.inst.road, self.dt)
            entry["states"] = states
        return entry["states"]

    def rollout(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """States (N+1, 5) and their sensitivities (N+1, 5, n_u) to controls."""
        entry = self._entry(z)
        if "sens" not in entry:
            u = z[: self.n_u].reshape(self.n, CONTROL_DIM)
            states = np.empty((self.n + 1, STATE_DIM))
            sens = np.zeros((self.n + 1, STATE_DIM, self.n_u))
            states[0] = self.x0
            for k in range(self.n):
                x_next, a_step, b_step = _rk4_stage(states[k], u[k], self.inst.road, self.dt)
                states[k + 1] = x_next
                sens[k + 1] = a_step @ sens[k]
                sens[k + 1, :, CONTROL_DIM * k : CONTROL_DIM * (k + 1)] += b_step
            entry["states"] = states
            entry["sens"] = sens
        return entry["states"], entry["sens"]

    def slacks(self, z: np.ndarray) -> np.ndarray:
        return z[self.n_u :].reshape(self.n_soft, self.n) if self.n_soft else np.zeros((0, self.n))

    def soft_values(self, z: np.ndarray) -> np.ndarray:
        """Values g^l at knots 1..N for every soft term, shape (n_soft, N)."""
        states = self.states(z)
        s = states[1:, 0]
        r = states[1:, 1]
        if not self.n_soft:
            return np.zeros((0, self.n))
        return np.array([self._g_values(term, s, r) for term in self.inst.partition])

    def lift(self, z_u: np.ndarray) -> np.ndarray:
        """Controls-only point extended with its optimal slacks max(g, 0).

        For the quadratic penalty the optimal slack given the trajectory is
        exactly the positive part of g, so this lift preserves optimality.
        """
        z = np.zeros(self.dim)
        z[: self.n_u] = z_u[: self.n_u]
        if self.n_soft:
            z[self.n_u :] = np.maximum(self.soft_values(z_u[: self.n_u]), 0.0).ravel()
        return z

    # -- cost ------------------------------------------------------------

    def cost(self, z: np.ndarray) -> float:
        states = self.states(z)
        u = z[: self.n_u].reshape(self.n, CONTROL_DIM)
        err = states[: self.n] - self.ref[: self.n]
        stage = float(np.sum((err * err) @ self.q) + np.sum((u * u) @ self.r_w))
        eps = self.slacks(z)
        return self.dt * stage + self.k_penalty * float(np.sum(eps * eps))

    def cost_grad(self, z: np.ndarray) -> np.ndarray:
        states, sens = self.rollout(z)
        u = z[: self.n_u].reshape(self.n, CONTROL_DIM)
        err = states[: self.n] - self.ref[: self.n]
        grad = np.zeros(self.dim)
        grad[: self.n_u] = 2.0 * self.dt * np.einsum("kij,ki->j", sens[: self.n], err * self.q)
        grad[: self.n_u] += (2.0 * self.dt * u * self.r_w).ravel()
        if self.n_soft:
            grad[self.n_u :] = 2.0 * self.k_penalty * z[self.n_u :]
        return grad

    # -- reduced problem (slacks eliminated analytically) ------------------

    def reduced_cost(self, z_u: np.ndarray) -> float:
        states = self.states(z_u)
        u = z_u.reshape(self.n, CONTROL_DIM)
        err = states[: self.n] - self.ref[: self.n]
        value = self.dt * float(np.sum((err * err) @ self.q) + np.sum((u * u) @ self.r_w))
        if self.n_soft:
            gpos = np.maximum(self.soft_values(z_u), 0.0)
            value += self.k_penalty * float(np.sum(gpos * gpos))
        return value

    def reduced_grad(self, z_u: np.ndarray) -> np.ndarray:
        states, sens = self.rollout(z_u)
        u = z_u.reshape(self.n, CONTROL_DIM)
        err = states[: self.n] - self.ref[: self.n]
        grad = 2.0 * self.dt * np.einsum("kij,ki->j", sens[: self.n], err * self.q)
        grad += (2.0 * self.dt * u * self.r_w).ravel()
        if self.n_soft:
            s = states[1:, 0]
            r = states[1:, 1]
            sens_s = sens[1:, 0, :]
            sens_r = sens[1:, 1, :]
            for term in self.inst.partition:
                gpos = np.maximum(self._g_values(term, s, r), 0.0)
                ds_coef, dr_coef = self._g_gradient(term)
                grad += (
                    2.0
                    * self.k_penalty
                    * np.einsum("k,kj->j", gpos, ds_coef * sens_s + dr_coef * sens_r)
                )
        return grad

    # -- constraints (c(z) >= 0 convention) -------------------------------

    @property
    def m_hard(self) -> int:
        return (self.rows_per_knot + len(self.inst.obstacles)) * self.n

    def hard_constraints(self, z: np.ndarray) -> np.ndarray:
        """Bound, lateral-acceleration, road and obstacle rows (no soft rows)."""
        states = self.states(z)
        b = self.inst.bounds
        s = states[1:, 0]
        r = states[1:, 1]
        v = states[1:, 2]
        kk = states[1:, 4]
        lat = v * v * kk
        lat_limit = b.a_lat_max - self.inst.lat_margin
        v_limit = b.v_max - self.inst.v_margin
        k_limit = b.k_max - self.inst.k_margin
        columns = [
            v - b.v_min,
            v_limit - v,
            kk + k_limit,
            k_limit - kk,
            lat + lat_limit,
            lat_limit - lat,
        ]
        if self.road_rows:
            columns.append(self.inst.road.left_bound_at(s) - self.inst.road_margin - r)
            columns.append(r - self.inst.road.right_bound_at(s) - self.inst.road_margin)
        hard = np.column_stack(columns).ravel()
        blocks = [hard]
        for obstacle in self.inst.obstacles:
            vals = np.array(
                [clearance_with_gradient(obstacle, s[k], r[k])[0] for k in range(self.n)]
            )
            blocks.append(-vals)
        return np.concatenate(blocks)

    def hard_jac(self, z: np.ndarray) -> np.ndarray:
        """Jacobian of the hard rows with respect to the controls only."""
        states, sens = self.rollout(z)
        s = states[1:, 0]
        r = states[1:, 1]
        v = states[1:, 2]
        kk = states[1:, 4]
        sens_s = sens[1:, 0, :]
        sens_r = sens[1:, 1, :]
        sens_v = sens[1:, 2, :]
        sens_k = sens[1:, 4, :]
        lat_jac = 2.0 * (v * kk)[:, None] * sens_v + (v * v)[:, None] * sens_k
        jac = np.empty((self.m_hard, self.n_u))
        hard = np.empty((self.n, self.rows_per_knot, self.n_u))
        hard[:, 0] = sens_v
        hard[:, 1] = -sens_v
        hard[:, 2] = sens_k
        hard[:, 3] = -sens_k
        hard[:, 4] = lat_jac
        hard[:, 5] = -lat_jac
        if self.road_rows:
            left_slope = np.array([self.inst.road.left_bound_slope_at(x) for x in s])
            right_slope = np.array([self.inst.road.right_bound_slope_at(x) for x in s])
            hard[:, 6] = left_slope[:, None] * sens_s - sens_r
            hard[:, 7] = sens_r - right_slope[:, None] * sens_s
        row = self.rows_per_knot * self.n
        jac[:row] = hard.reshape(row, self.n_u)
        for obstacle in self.inst.obstacles:
            for k in range(self.n):
                _, dh_ds, dh_dr = clearance_with_gradient(obstacle, s[k], r[k])
                jac[row] = -(dh_ds * sens_s[k] + dh_dr * sens_r[k])
                row += 1
        return jac

    def constraints(self, z: np.ndarray) -> np.ndarray:
        blocks = [self.hard_constraints(z)]
        states = self.states(z)
        s = states[1:, 0]
        r = states[1:, 1]
        eps = self.slacks(z)
        for t_idx, term in enumerate(self.inst.partition):
            blocks.append(eps[t_idx] - self._g_values(term, s, r))
        return np.concatenate(blocks)

    def constraints_jac(self, z: np.ndarray) -> np.ndarray:
        states, sens = self.rollout(z)
        sens_s = sens[1:, 0, :]
        sens_r = sens[1:, 1, :]
        jac = np.zeros((self.m, self.dim))
        jac[: self.m_hard, : self.n_u] = self.hard_jac(z)
        row = self.m_hard
        for t_idx, term in enumerate(self.inst.partition):
            ds_coef, dr_coef = self._g_gradient(term)
            for k in range(self.n):
                jac[row, : self.n_u] = -(ds_coef * sens_s[k] + dr_coef * sens_r[k])
                jac[row, self.n_u + t_idx * self.n + k] = 1.0
                row += 1
        return jac

    def _g_values(self, term: PartitionTerm, s: np.ndarray, r: np.ndarray) -> np.ndarray:
        xi = (s - term.pivot_s) / term.delta_s
        rho = (r - term.pivot_r) / term.delta_r
        rule = term.constraint.rule
        if rule == 1:
            return -rho + xi + 1.0
        if rule == 2:
            return rho + xi + 1.0
        return xi + 1.0

    def _g_gradient(self, term: PartitionTerm) -> tuple[float, float]:
        rule = term.constraint.rule
        dr = {1: -1.0 / term.delta_r, 2: 1.0 / term.delta_r, 3: 0.0}[rule]
        return 1.0 / term.delta_s, dr

    # -- feasibility and diagnostics --------------------------------------

    def bound_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return self._bounds_lo, self._bounds_hi

    def violation(self, z: np.ndarray) -> float:
        worst = 0.0
        cons = self.constraints(z)
        if cons.size:
            worst = max(worst, float(-np.min(cons)))
        worst = max(worst, float(np.max(self._bounds_lo - z, initial=0.0)))
        worst = max(worst, float(np.max(z - self._bounds_hi, initial=0.0)))
        return worst

    def reduced_violation(self, z_u: np.ndarray) -> float:
        worst = 0.0
        cons = self.hard_constraints(z_u)
        if cons.size:
            worst = max(worst, float(-np.min(cons)))
        lo = self._bounds_lo[: self.n_u]
        hi = self._bounds_hi[: self.n_u]
        worst = max(worst, float(np.max(lo - z_u, initial=0.0)))
        worst = max(worst, float(np.max(z_u - hi, initial=0.0)))
        return worst

    def stationarity(self, z: np.ndarray, active_tol: float = 1e-5) -> float:
        """Scaled first-order residual via nonnegative multiplier fitting."""
        grad = self.cost_grad(z)
        cons = self.constraints(z)
        jac = self.constraints_jac(z)
        cols = []
        if cons.size:
            for idx in np.flatnonzero(cons <= active_tol):
                cols.append(jac[idx])
        at_lo = z - self._bounds_lo <= 1e-9
        at_hi = self._bounds_hi - z <= 1e-9
        for idx in np.flatnonzero(at_lo):
            e = np.zeros(self.dim)
            e[idx] = 1.0
            cols.append(e)
        for idx in np.flatnonzero(at_hi):
            e = np.zeros(self.dim)
            e[idx] = -1.0
            cols.append(e)
        scale = 1.0 + float(np.max(np.abs(grad), initial=0.0))
        if not cols:
            return float(np.max(np.abs(grad), initial=0.0)) / scale
        a_mat = np.array(cols).T
        lam, _ = nnls(a_mat, grad)
        resid = grad - a_mat @ lam
        return float(np.max(np.abs(resid))) / scale

    def build_trajectory(self, z: np.ndarray, vehicle_id: int = -1) -> Trajectory:
        states = self.states(z)
        u = z[: self.n_u].reshape(self.n, CONTROL_DIM)
        knots = []
        for k in range(self.n + 1):
            ctrl = u[min(k, self.n - 1)]
            knots.append((VehicleState.from_array(states[k]), ControlInput.from_array(ctrl)))
        return Trajectory(t0=self.inst.t0, dt=self.dt, vehicle_id=vehicle_id, knots=tuple(knots))


def discretize(instance: OcpInstance) -> ShootingProgram:
    """Transcribe the instance; exposes layout, cost and constraint list."""
    return ShootingProgram(instance)


def x0_violation(instance: OcpInstance) -> float:
    """Worst hard-bound violation of the initial state (raw road bounds)."""
    x = instance.x0
    b = instance.bounds
    checks = [
        b.v_min - x.v,
        x.v - b.v_max,
        abs(x.k) - b.k_max,
        abs(x.v * x.v * x.k) - b.a_lat_max,
        float(instance.road.right_bound_at(x.s)) - x.r,
        x.r - float(instance.road.left_bound_at(x.s)),
    ]
    return max(0.0, max(checks))


def _initial_controls(program: ShootingProgram, warm_start: OcpSolution | None) -> np.ndarray:
    """Warm controls resampled onto the new knot grid (zeros when cold)."""
    inst = program.inst
    z_u = np.zeros(program.n_u)
    if warm_start is not None and warm_start.z is not None:
        prev = warm_start.trajectory
        for k in range(program.n):
            u = prev.control_at(inst.t0 + k * program.dt)
            z_u[CONTROL_DIM * k] = u.a
            z_u[CONTROL_DIM * k + 1] = u.kappa
    lo, hi = program.bound_arrays()
    return np.clip(z_u, lo[: program.n_u], hi[: program.n_u])


def solve(
    instance: OcpInstance, warm_start: OcpSolution | None = None, vehicle_id: int = -1
) -> OcpSolution:
    """Solve the OCP; deterministic for identical instance and warm start."""
    started = time.perf_counter()
    program = discretize(instance)
    if x0_violation(instance) > X0_TOL:
        z0 = np.zeros(program.dim)
        return OcpSolution(
            trajectory=program.build_trajectory(z0, vehicle_id),
            cost=program.cost(z0),
            slacks=program.slacks(z0).copy(),
            status="infeasible-hard",
            iterations=0,
            solve_time=time.perf_counter() - started,
            max_violation=x0_violation(instance),
        )
    z0 = _initial_controls(program, warm_start)
    lo, hi = program.bound_arrays()
    lo_u, hi_u = lo[: program.n_u], hi[: program.n_u]
    iterates: list[np.ndarray] = []
    cons_spec = [{"type": "ineq", "fun": program.hard_constraints, "jac": program.hard_jac}]
    bound_pairs = list(zip(lo_u, hi_u))

    def _run_slsqp(z_start: np.ndarray, budget: int) -> tuple[bool, int, np.ndarray]:
        with warnings.catch_warnings():
            # SLSQP probes slightly past the box and clips; routine, not a defect.
            warnings.filterwarnings("ignore", message="Values in x were outside bounds")
            result = minimize(
                program.reduced_cost,
                z_start,
                jac=program.reduced_grad,
                bounds=bound_pairs,
                constraints=cons_spec,
                method="SLSQP",
                options={"maxiter": budget, "ftol": 1e-10},
                callback=lambda zk: iterates.append(np.array(zk)),
            )
        return (
            bool(result.success),
            int(result.nit),
            np.clip(np.asarray(result.x, dtype=float), lo_u, hi_u),
        )

    iterations = 0
    try:
        solver_success, used, z_final = _run_slsqp(z0, MAX_ITER)
        iterations += used
        # A fresh quadratic model at the stopping point usually sharpens the
        # first-order residual in a handful of extra iterations.
        while (
            solver_success
            and iterations < MAX_ITER
            and program.reduced_violation(z_final) <= FEAS_TOL
            and program.stationarity(program.lift(z_final)) > STAT_TOL
        ):
            success2, used2, z_next = _run_slsqp(z_final, MAX_ITER - iterations)
            iterations += max(used2, 1)
            if not success2 or np.array_equal(z_next, z_final):
                break
            z_final = z_next
    except (np.linalg.LinAlgError, ValueError):
        solver_success = False
        iterations = max(iterations, len(iterates))
        z_final = iterates[-1] if iterates else z0

    z_best = z_final
    feas = program.reduced_violation(z_final)
    if not solver_success or feas > FEAS_TOL:
        # Fall back to the best feasible-so-far iterate (or least infeasible).
        candidates = [z0] + iterates + [z_final]
        best_feasible = None
        least_bad = (np.inf, z_final)
        for cand in candidates:
            cand = np.clip(cand, lo_u, hi_u)
            v = program.reduced_violation(cand)
            if v <= FEAS_TOL:
                c = program.reduced_cost(cand)
                if best_feasible is None or c < best_feasible[0]:
                    best_feasible = (c, cand)
            if v < least_bad[0]:
                least_bad = (v, cand)
        z_best = best_feasible[1] if best_feasible is not None else least_bad[1]
        feas = program.reduced_violation(z_best)

    z_best = program.lift(z_best)
    feas = program.violation(z_best)
    stationarity = program.stationarity(z_best)
    status = (
        "converged"
        if solver_success and feas <= FEAS_TOL and stationarity <= STAT_TOL
        else "max-iter"
    )
    return OcpSolution(
        trajectory=program.build_trajectory(z_best, vehicle_id),
        cost=program.cost(z_best),
        slacks=program.slacks(z_best).copy(),
        status=status,
        iterations=iterations,
        solve_time=time.perf_counter() - started,
        stationarity=stationarity,
        max_violation=feas,
        z=z_best,
    )


def gradient_check(instance: OcpInstance, point: np.ndarray, step: float = 1e-6) -> float:
    """Max relative error of analytic vs central-difference gradients.

    Covers the cost gradient and every constraint row at `point`.  The
    finite-difference step is scaled per coordinate; a larger step is
    appropriate for quadratic subproblems, where truncation vanishes and
    only the roundoff floor remains.
    """
    program = discretize(instance)
    z = np.asarray(point, dtype=float)
    if len(z) != program.dim:
        raise ValueError(f"point has dimension {len(z)}, program needs {program.dim}")
    grad = program.cost_grad(z)
    jac = program.constraints_jac(z) if program.m else np.zeros((0, program.dim))
    fd_grad = np.empty_like(grad)
    fd_jac = np.empty_like(jac)
    for i in range(program.dim):
        h = step * max(1.0, abs(z[i]))
        zp = z.copy()
        zm = z.copy()
        zp[i] += h
        zm[i] -= h
        fd_grad[i] = (program.cost(zp) - program.cost(zm)) / (2.0 * h)
        if program.m:
            fd_jac[:, i] = (program.constraints(zp) - program.constraints(zm)) / (2.0 * h)
    def rel(a: np.ndarray, b: np.ndarray) -> float:
        scale = np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
        return float(np.max(np.abs(a - b) / scale, initial=0.0))

    return max(rel(grad, fd_grad), rel(jac, fd_jac))
