import math

import numpy as np
import pytest

from roadformation.road import FrenetDomainError, RoadModel, RoadRangeError, check_validity


class TestCurvature:
    def test_straight_road_zero(self, straight_road):
        assert straight_road.curvature_at(50.0) == 0.0

    def test_constant_arc(self):
        road = RoadModel.constant_arc(100.0, 0.01)
        assert road.curvature_at(10.0) == pytest.approx(0.01, abs=1e-15)

    def test_linear_profile_interpolates(self):
        road = RoadModel.from_knots(
            curvature=[(0.0, 0.0), (100.0, 0.02)],
            left_bound=[(0.0, 5.0)],
            right_bound=[(0.0, -5.0)],
        )
        # two knots make the monotone cubic exactly linear
        assert road.curvature_at(50.0) == pytest.approx(0.01, abs=1e-12)
        assert road.curvature_at(25.0) == pytest.approx(0.005, abs=1e-12)

    def test_out_of_range_raises(self, straight_road):
        with pytest.raises(RoadRangeError):
            straight_road.curvature_at(-1.0)
        with pytest.raises(RoadRangeError):
            straight_road.curvature_at(straight_road.s_max + 1.0)

    def test_continuity(self, curvy_road):
        for s in [30.0, 75.0, 120.0, 165.0, 220.0, 280.0]:
            gaps = []
            for h in [1.0, 0.1, 0.01, 0.001]:
                gaps.append(abs(curvy_road.curvature_at(s + h) - curvy_road.curvature_at(s)))
            assert gaps == sorted(gaps, reverse=True) or gaps[-1] < 1e-6
            assert gaps[-1] < 1e-4


class TestValidity:
    def test_straight_always_valid(self, straight_road):
        assert check_validity(straight_road) == []

    def test_tight_arc_with_wide_band_invalid(self):
        road = RoadModel.from_knots(
            curvature=[(0.0, 0.1), (100.0, 0.1)],
            left_bound=[(0.0, 15.0)],
            right_bound=[(0.0, -15.0)],
        )
        bad = check_validity(road)
        assert bad
        # every flagged sample really violates the analytic condition
        assert all(1.0 - r * 0.1 <= 0.0 for _, r in bad)
        assert all(r >= 10.0 for _, r in bad)

    def test_mild_arc_valid(self):
        road = RoadModel.from_knots(
            curvature=[(0.0, 0.01), (100.0, 0.01)],
            left_bound=[(0.0, 5.0)],
            right_bound=[(0.0, -5.0)],
        )
        assert check_validity(road) == []

    def test_matches_analytic_criterion(self, curvy_road):
        s_grid = np.arange(0.0, curvy_road.s_max, 0.5)
        worst = max(
            max(abs(curvy_road.left_bound_at(s)), abs(curvy_road.right_bound_at(s)))
            * abs(curvy_road.curvature_at(float(s)))
            for s in s_grid
        )
        assert (check_validity(curvy_road) == []) == (worst < 1.0)


class TestCartesian:
    def test_straight_identity_layout(self, straight_road):
        assert straight_road.frenet_to_cartesian(10.0, 2.0) == pytest.approx((10.0, 2.0))

    def test_zero_offset_is_centerline_start(self, straight_road):
        assert straight_road.frenet_to_cartesian(0.0, 0.0) == pytest.approx((0.0, 0.0))

    def test_arc_quarter_and_antipode(self):
        # radius-100 circle starting at the origin heading +x, turning left
        radius = 100.0
        road = RoadModel.constant_arc(2 * math.pi * radius, 1.0 / radius, half_width=5.0)
        x, y = road.frenet_to_cartesian(math.pi * radius / 2, 0.0)
        assert (x, y) == pytest.approx((radius, radius), abs=1e-9)
        x, y = road.frenet_to_cartesian(math.pi * radius, 0.0)
        assert (x, y) == pytest.approx((0.0, 2 * radius), abs=1e-9)

    def test_left_offset_points_left_of_heading(self, arc_road):
        x0, y0 = arc_road.frenet_to_cartesian(0.0, 0.0)
        x1, y1 = arc_road.frenet_to_cartesian(0.0, 2.0)
        # at s=0 the heading is +x, so +r points to +y
        assert (x1 - x0, y1 - y0) == pytest.approx((0.0, 2.0), abs=1e-12)

    def test_domain_error_when_frame_degenerates(self):
        road = RoadModel.from_knots(
            curvature=[(0.0, 0.1), (100.0, 0.1)],
            left_bound=[(0.0, 5.0)],
            right_bound=[(0.0, -5.0)],
        )
        with pytest.raises(FrenetDomainError):
            road.frenet_to_cartesian(10.0, 12.0)

    @pytest.mark.parametrize("road_name", ["straight_road", "arc_road", "curvy_road"])
    def test_round_trip(self, road_name, request):
        road = request.getfixturevalue(road_name)
        rng = np.random.default_rng(7)
        for _ in range(60):
            s = float(rng.uniform(1.0, road.s_max - 1.0))
            lo = float(road.right_bound_at(s)) + 0.1
            hi = float(road.left_bound_at(s)) - 0.1
            r = float(rng.uniform(lo, hi))
            x, y = road.frenet_to_cartesian(s, r)
            s_back, r_back = road.cartesian_to_frenet(x, y)
            assert abs(s_back - s) < 1e-6
            assert abs(r_back - r) < 1e-6


class TestConstruction:
    def test_bounds_must_be_ordered(self):
        with pytest.raises(ValueError, match="right bound >= left"):
            RoadModel.from_knots(
                curvature=[(0.0, 0.0), (10.0, 0.0)],
                left_bound=[(0.0, -1.0)],
                right_bound=[(0.0, 1.0)],
            )

    def test_knots_must_increase(self):
        with pytest.raises(ValueError, match="strictly increasing"):
            RoadModel.from_knots(
                curvature=[(0.0, 0.0), (0.0, 0.1)],
                left_bound=[(0.0, 5.0)],
                right_bound=[(0.0, -5.0)],
            )
