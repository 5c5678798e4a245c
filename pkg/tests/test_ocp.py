import numpy as np
import pytest

from roadformation.dynamics import BoundSet, ControlInput, Trajectory, VehicleState, max_defect
from roadformation.formation import make_reference
from roadformation.obstacles import ObstacleParabola, clearance
from roadformation.ocp import (
    OcpInstance,
    PartitionTerm,
    Weights,
    discretize,
    gradient_check,
    solve,
)
from roadformation.oracle import brute_force_speed_cost, oracle_gap, speed_tracking_instance
from roadformation.partition import PartitionConstraint

from helpers import cruise_trajectory

LEADER_W = Weights(q=(0, 4, 2, 20, 20), r=(1, 200))
FOLLOWER_W = Weights(q=(1, 2, 0, 20, 20), r=(1, 200))


def leader_instance(road, x0, v_ref=6.0, **kwargs) -> OcpInstance:
    ref = cruise_trajectory(x0.s, v_ref, n=20)
    return OcpInstance(
        x0=x0, reference=ref, bounds=BoundSet(), road=road, weights=LEADER_W, t0=0.0, **kwargs
    )


def assert_hard_bounds(solution, bounds: BoundSet, tol: float = 1e-4):
    states = solution.trajectory.states_array()
    controls = solution.trajectory.controls_array()
    assert np.all(states[:, 2] >= bounds.v_min - tol)
    assert np.all(states[:, 2] <= bounds.v_max + tol)
    assert np.all(np.abs(states[:, 4]) <= bounds.k_max + tol)
    assert np.all(np.abs(states[:, 2] ** 2 * states[:, 4]) <= bounds.a_lat_max + tol)
    assert np.all(np.abs(controls[:, 0]) <= bounds.a_max + tol)
    assert np.all(np.abs(controls[:, 1]) <= bounds.kappa_max + tol)


class TestDiscretize:
    def test_decision_dimension_counts_controls_and_slacks(self, straight_road):
        pivots = np.linspace(30, 60, 20)
        terms = tuple(
            PartitionTerm(PartitionConstraint(i, 2, 3), pivots, np.zeros(20), 10.0, 3.0)
            for i in range(2)
        )
        inst = leader_instance(
            straight_road, VehicleState(10, 0, 6, 0, 0), partition=terms
        )
        program = discretize(inst)
        assert program.n == 20
        assert program.dim == 2 * 20 + 2 * 20

    def test_unconstrained_instance_lists_only_bound_rows(self, straight_road):
        inst = leader_instance(straight_road, VehicleState(10, 0, 6, 0, 0))
        program = discretize(inst)
        prefixes = {kind.split("[")[0] for kind in program.kinds}
        assert prefixes == {
            "v_min", "v_max", "k_min", "k_max", "lat_min", "lat_max", "road_left", "road_right",
        }

    def test_cost_zero_at_exact_tracking(self, straight_road):
        inst = leader_instance(straight_road, VehicleState(10, 0, 6, 0, 0))
        program = discretize(inst)
        # the cruise reference is exactly the rollout of zero controls
        assert program.cost(np.zeros(program.dim)) == 0.0

    def test_reference_must_cover_horizon(self, straight_road):
        from roadformation.dynamics import CoverageError

        short_ref = cruise_trajectory(0.0, 6.0, n=3)
        inst = OcpInstance(
            x0=VehicleState(0, 0, 6, 0, 0),
            reference=short_ref,
            bounds=BoundSet(),
            road=straight_road,
            weights=LEADER_W,
            t0=0.0,
        )
        with pytest.raises(CoverageError):
            discretize(inst)


class TestSolve:
    def test_stationary_on_reference(self, straight_road):
        sol = solve(leader_instance(straight_road, VehicleState(10, 0, 6, 0, 0)))
        assert sol.status == "converged"
        assert sol.cost <= 1e-6
        assert np.max(np.abs(sol.trajectory.controls_array())) <= 1e-3

    def test_speed_tracking_matches_grid_oracle(self, straight_road):
        report = oracle_gap(straight_road, v0=4.0, v_ref=6.0)
        assert report.gap <= 0.05

    def test_grid_oracle_respects_bounds(self):
        cost, accels = brute_force_speed_cost(
            9.5, 12.0, q_v=2.0, r_a=1.0, dt=0.25, n_knots=3, bounds=BoundSet()
        )
        v = 9.5 + np.cumsum(accels) * 0.25
        assert np.all(v <= 10.0 + 1e-9)
        assert np.isfinite(cost)

    def test_obstacle_forces_detour_and_return(self, straight_road):
        # right-side obstacle bulging past the centerline over s in [20, 40]
        obs = ObstacleParabola.from_triangle(
            [(20.0, -5.0), (30.0, 0.5), (40.0, -5.0)], road=straight_road
        )
        inst = leader_instance(
            straight_road, VehicleState(0, 0, 6, 0, 0), obstacles=(obs,), road_margin=0.85
        )
        sol = solve(inst)
        states = sol.trajectory.states_array()
        h_vals = [clearance(obs, (s, r)) for s, r in states[1:, :2]]
        assert max(h_vals) <= 1e-4
        in_span = states[(states[:, 0] > 20) & (states[:, 0] < 40)]
        after = states[states[:, 0] > 45]
        assert in_span[:, 1].max() > 0.4  # pushed left of center
        if len(after):
            assert abs(after[-1, 1]) < in_span[:, 1].max()  # returning toward center
        assert_hard_bounds(sol, inst.bounds)

    def test_determinism_bit_identical(self, straight_road):
        inst = leader_instance(straight_road, VehicleState(10, 1.0, 5.0, 0.02, 0.0))
        a = solve(inst)
        b = solve(inst)
        assert np.array_equal(a.z, b.z)
        assert a.cost == b.cost
        c = solve(inst, warm_start=a)
        d = solve(inst, warm_start=b)
        assert np.array_equal(c.z, d.z)

    def test_infeasible_start_reported(self, straight_road):
        inst = leader_instance(straight_road, VehicleState(10, 0, 12.5, 0, 0))
        sol = solve(inst)
        assert sol.status == "infeasible-hard"

    def test_trajectory_defect_zero_against_plant_model(self, straight_road):
        inst = leader_instance(straight_road, VehicleState(10, 0.8, 5.0, 0.0, 0.0))
        sol = solve(inst)
        assert max_defect(sol.trajectory, straight_road) <= 1e-6

    def test_hard_bounds_on_aggressive_reference(self, straight_road):
        # reference cruising well above what bounds allow to reach
        inst = OcpInstance(
            x0=VehicleState(0, 0, 2.0, 0, 0),
            reference=cruise_trajectory(40.0, 9.0, n=20),
            bounds=BoundSet(),
            road=straight_road,
            weights=FOLLOWER_W,
            t0=0.0,
        )
        sol = solve(inst)
        assert_hard_bounds(sol, inst.bounds)


class TestGradients:
    def test_generic_instance(self, curvy_road):
        obs = ObstacleParabola.from_triangle(
            [(130.0, -5.0), (140.0, -1.0), (150.0, -5.0)], road=curvy_road
        )
        pivots = 120.0 + 6.0 * 0.25 * np.arange(1, 21)
        term = PartitionTerm(PartitionConstraint(0, 1, 3), pivots, np.zeros(20), 10.0, 3.0)
        inst = OcpInstance(
            x0=VehicleState(110.0, 0.5, 6.0, 0.01, 0.005),
            reference=cruise_trajectory(110.0, 6.0, n=20),
            bounds=BoundSet(),
            road=curvy_road,
            weights=FOLLOWER_W,
            t0=0.0,
            obstacles=(obs,),
            partition=(term,),
            road_margin=0.85,
        )
        program = discretize(inst)
        rng = np.random.default_rng(17)
        z = np.zeros(program.dim)
        z[: program.n_u] = rng.uniform(-0.05, 0.05, program.n_u)
        z[program.n_u :] = rng.uniform(0.0, 0.2, program.dim - program.n_u)
        assert gradient_check(inst, z) < 1e-4

    def test_quadratic_subproblem_is_machine_exact(self):
        # speed-only weights on an unbounded straight road: every checked
        # quantity is polynomial in z, so a wider step has (near-)zero
        # truncation and beats the roundoff floor of the 1e-6 default
        from roadformation.road import RoadModel

        open_road = RoadModel.straight(500.0, half_width=1e6)
        inst = speed_tracking_instance(open_road, v0=4.0, v_ref=6.0, n_knots=20)
        program = discretize(inst)
        assert not program.road_rows
        z = np.full(program.dim, 0.01)
        assert gradient_check(inst, z, step=1e-4) < 1e-10

    def test_active_obstacle_ramp_edges(self, straight_road):
        obs = ObstacleParabola.from_triangle(
            [(20.0, -5.0), (30.0, 0.5), (40.0, -5.0)], road=straight_road
        )
        inst = leader_instance(straight_road, VehicleState(5.0, 0, 6, 0, 0), obstacles=(obs,))
        program = discretize(inst)
        z = np.full(program.dim, 0.02)
        assert gradient_check(inst, z) < 1e-4


class TestPenaltyBehavior:
    def build_conflict(self, road, k_penalty: float) -> OcpInstance:
        # reference drives straight through a stopped higher-priority
        # vehicle's protected wedge: slack is unavoidable
        weights = Weights(q=(1, 2, 0, 20, 20), r=(1, 200), slack_penalty=k_penalty)
        pivots = np.full(20, 30.0)
        term = PartitionTerm(
            PartitionConstraint(0, 1, 3, slack_weight=k_penalty), pivots, np.zeros(20), 10.0, 3.0
        )
        return OcpInstance(
            x0=VehicleState(10.0, 0.0, 6.0, 0.0, 0.0),
            reference=cruise_trajectory(10.0, 6.0, n=20),
            bounds=BoundSet(),
            road=road,
            weights=weights,
            t0=0.0,
            partition=(term,),
        )

    def test_total_slack_nonincreasing_in_penalty(self, straight_road):
        totals = []
        for k_penalty in (1e2, 1e3, 1e4):
            sol = solve(self.build_conflict(straight_road, k_penalty))
            totals.append(float(np.sum(sol.slacks**2)))
        assert totals[0] >= totals[1] >= totals[2]
        assert totals[0] > totals[2]  # the penalty weight actually bites
        assert totals[0] > 1e-4  # the conflict actually engages the slacks

    def test_slacks_match_positive_part_of_rule_values(self, straight_road):
        inst = self.build_conflict(straight_road, 1e3)
        sol = solve(inst)
        program = discretize(inst)
        g_vals = program.soft_values(sol.z[: program.n_u])
        assert np.allclose(sol.slacks, np.maximum(g_vals, 0.0), atol=1e-12)


class TestShiftConsistency:
    def test_receding_horizon_tail_cost(self, straight_road):
        from roadformation.sim import plan_state_at

        # mid-transient catch-up: follower 4 m behind its slot
        ref0 = cruise_trajectory(24.0, 6.0, n=20)
        inst0 = OcpInstance(
            x0=VehicleState(20.0, 0.5, 6.0, 0.0, 0.0),
            reference=ref0,
            bounds=BoundSet(),
            road=straight_road,
            weights=FOLLOWER_W,
            t0=0.0,
        )
        sol0 = solve(inst0)
        program0 = discretize(inst0)
        states0 = program0.states(sol0.z[: program0.n_u])
        controls0 = sol0.trajectory.controls_array()
        stage0 = float(
            inst0.dt
            * (
                (states0[0] - program0.ref[0]) @ (np.array(FOLLOWER_W.q) * (states0[0] - program0.ref[0]))
                + controls0[0] @ (np.array(FOLLOWER_W.r) * controls0[0])
            )
        )
        tail = sol0.cost - stage0

        dt_replan = 0.256
        x1 = plan_state_at(sol0.trajectory, dt_replan, straight_road)
        inst1 = OcpInstance(
            x0=VehicleState.from_array(x1),
            reference=cruise_trajectory(24.0 + 6.0 * dt_replan, 6.0, t0=dt_replan, n=20),
            bounds=BoundSet(),
            road=straight_road,
            weights=FOLLOWER_W,
            t0=dt_replan,
        )
        sol1 = solve(inst1, warm_start=sol0)
        assert sol1.cost == pytest.approx(tail, rel=0.10)
