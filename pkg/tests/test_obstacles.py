import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roadformation.obstacles import (
    DegenerateTriangleError,
    ObstacleParabola,
    assign_side,
    clearance,
    clearance_with_gradient,
    fit_parabola,
)
from roadformation.road import RoadModel


class TestFit:
    def test_unit_parabola(self):
        assert fit_parabola((0, 0), (1, 1), (2, 4)) == pytest.approx((1, 0, 0), abs=1e-12)

    def test_horizontal_line(self):
        assert fit_parabola((0, 1), (1, 1), (2, 1)) == pytest.approx((0, 0, 1), abs=1e-12)

    def test_linear_solve_residuals(self):
        pts = [(10.0, -3.0), (15.0, -1.0), (20.0, -3.0)]
        a, b, c = fit_parabola(*pts)
        for s, r in pts:
            assert a * s * s + b * s + c == pytest.approx(r, abs=1e-9)

    def test_duplicate_abscissa_rejected(self):
        with pytest.raises(DegenerateTriangleError):
            fit_parabola((5.0, 0.0), (5.0 + 1e-8, 1.0), (7.0, 2.0))

    @given(
        a=st.floats(-5, 5),
        b=st.floats(-5, 5),
        c=st.floats(-5, 5),
        s0=st.floats(-10, 10),
    )
    @settings(max_examples=80, deadline=None)
    def test_round_trip_on_coefficients(self, a, b, c, s0):
        pts = [(s, a * s * s + b * s + c) for s in (s0, s0 + 1.0, s0 + 2.5)]
        fitted = fit_parabola(*pts)
        assert fitted == pytest.approx((a, b, c), abs=1e-7)


@pytest.fixture
def road():
    return RoadModel.straight(100.0, half_width=5.0)


class TestSide:
    def test_low_centroid_goes_right(self, road):
        tri = [(10, -3), (14, -2), (18, -4)]
        assert assign_side(tri, road) == "right"

    def test_high_centroid_goes_left(self, road):
        tri = [(10, 4), (14, 4), (18, 4)]
        assert assign_side(tri, road) == "left"

    def test_tie_breaks_right(self, road):
        tri = [(10, 0), (14, 1), (18, -1)]  # centroid r = 0 on a symmetric band
        assert assign_side(tri, road) == "right"


class TestClearance:
    def test_flat_right_boundary(self):
        obs = ObstacleParabola(coeffs=(0.0, 0.0, -1.0), side="right", s_span=(0.0, 50.0))
        assert clearance(obs, (10.0, 0.0)) == pytest.approx(-1.0)
        assert clearance(obs, (10.0, -2.0)) == pytest.approx(1.0)

    def test_vertex_on_boundary(self):
        a, b, c = fit_parabola((10, -3), (15, -1), (20, -3))
        obs = ObstacleParabola(coeffs=(a, b, c), side="right", s_span=(5.0, 25.0))
        s_vertex = -b / (2 * a)
        r_vertex = a * s_vertex**2 + b * s_vertex + c
        assert clearance(obs, (s_vertex, r_vertex)) == pytest.approx(0.0, abs=1e-12)

    def test_triangle_vertices_on_boundary(self):
        road = RoadModel.straight(100.0, half_width=6.0)
        tri = [(30.0, -5.0), (36.0, -1.0), (42.0, -5.0)]
        obs = ObstacleParabola.from_triangle(tri, road=road)
        assert obs.side == "right"
        for s, r in tri:
            assert clearance(obs, (s, r)) == pytest.approx(0.0, abs=1e-9)

    def test_left_side_mirrored(self):
        road = RoadModel.straight(100.0, half_width=6.0)
        tri = [(30.0, 5.0), (36.0, 1.0), (42.0, 5.0)]
        obs = ObstacleParabola.from_triangle(tri, road=road)
        assert obs.side == "left"
        # center of the road is safe, inside the concavity is not
        assert clearance(obs, (36.0, 0.0)) < 0.0
        assert clearance(obs, (36.0, 3.0)) > 0.0

    def test_far_value_is_safe_constant(self):
        obs = ObstacleParabola(coeffs=(0.0, 0.0, 5.0), side="right", s_span=(40.0, 60.0))
        # 5 m past the span plus the 5 m ramp: fully inactive
        assert clearance(obs, (80.0, 0.0)) == pytest.approx(-1.0)
        assert clearance(obs, (20.0, 0.0)) == pytest.approx(-1.0)

    def test_wrong_concavity_rejected(self):
        with pytest.raises(ValueError, match="downward"):
            ObstacleParabola(coeffs=(0.1, 0.0, -1.0), side="right", s_span=(0.0, 10.0))
        with pytest.raises(ValueError, match="upward"):
            ObstacleParabola(coeffs=(-0.1, 0.0, 1.0), side="left", s_span=(0.0, 10.0))

    def test_gradient_matches_finite_differences(self):
        a, b, c = fit_parabola((30, -5), (36, -1), (42, -5))
        obs = ObstacleParabola(coeffs=(a, b, c), side="right", s_span=(25.0, 47.0))
        rng = np.random.default_rng(3)
        h = 1e-6
        for _ in range(100):
            # stay off the two ramp knots, where only C1 continuity holds
            s = float(rng.uniform(26.0, 46.0))
            r = float(rng.uniform(-5.0, 5.0))
            val, ds, dr = clearance_with_gradient(obs, s, r)
            fd_s = (clearance(obs, (s + h, r)) - clearance(obs, (s - h, r))) / (2 * h)
            fd_r = (clearance(obs, (s, r + h)) - clearance(obs, (s, r - h))) / (2 * h)
            assert ds == pytest.approx(fd_s, rel=1e-6, abs=1e-9)
            assert dr == pytest.approx(fd_r, rel=1e-6, abs=1e-9)

    def test_continuous_across_ramp(self):
        obs = ObstacleParabola(coeffs=(0.0, 0.0, -1.0), side="right", s_span=(0.0, 50.0))
        for s in np.linspace(49.0, 57.0, 81):
            left = clearance(obs, (s - 1e-9, -2.0))
            right = clearance(obs, (s + 1e-9, -2.0))
            assert left == pytest.approx(right, abs=1e-6)

    def test_vertex_outside_band_rejected(self):
        road = RoadModel.straight(100.0, half_width=4.0)
        tri = [(30.0, -5.0), (36.0, -1.0), (42.0, -5.0)]
        with pytest.raises(ValueError, match="outside the road band"):
            ObstacleParabola.from_triangle(tri, road=road)
