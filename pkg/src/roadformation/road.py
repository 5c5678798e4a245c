"""Road centerline geometry in curvilinear coordinates.

A road is described by a sampled curvature profile c(s) along the
centerline arc length s, piecewise-linear lateral bounds, and the
Cartesian pose of the centerline origin.  All planning happens in the
(s, r) frame; Cartesian conversion exists for plotting and validation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

__all__ = [
    "RoadModel",
    "RoadRangeError",
    "FrenetDomainError",
    "check_validity",
]

# Nodes/weights of 7-point Gauss-Legendre quadrature on [-1, 1], used to
# integrate the centerline heading into Cartesian positions.
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(7)

_RANGE_TOL = 1e-9


class RoadRangeError(ValueError):
    """Raised when an arc-length query falls outside [0, s_max]."""


class FrenetDomainError(ValueError):
    """Raised when (s, r) violates the frame-validity condition 1 - r*c(s) > 0."""


@dataclass(frozen=True)
class RoadModel:
    """Immutable road description; safe to share across vehicle agents.

    The curvature profile is interpolated with a monotone (shape
    preserving) cubic through the given knots, so c is continuous and
    dc/ds is piecewise continuous.  Lateral bounds are piecewise linear.
    """

    s_max: float
    curv_s: np.ndarray
    curv_c: np.ndarray
    left_s: np.ndarray
    left_r: np.ndarray
    right_s: np.ndarray
    right_r: np.ndarray
    origin_x: float = 0.0
    origin_y: float = 0.0
    origin_heading: float = 0.0
    _curv_interp: object = field(default=None, repr=False, compare=False)
    _curv_deriv: object = field(default=None, repr=False, compare=False)
    _heading_integral: object = field(default=None, repr=False, compare=False)
    _grid_s: np.ndarray = field(default=None, repr=False, compare=False)
    _grid_xy: np.ndarray = field(default=None, repr=False, compare=False)
    _const_c: float | None = field(default=None, repr=False, compare=False)
    _pp_breaks: np.ndarray = field(default=None, repr=False, compare=False)
    _pp_coeffs: np.ndarray = field(default=None, repr=False, compare=False)

    @classmethod
    def from_knots(
        cls,
        curvature: list[tuple[float, float]],
        left_bound: list[tuple[float, float]],
        right_bound: list[tuple[float, float]],
        s_max: float | None = None,
        origin: tuple[float, float, float] = (0.0, 0.0, 0.0),
    ) -> "RoadModel":
        curv = np.asarray(curvature, dtype=float).reshape(-1, 2)
        left = np.asarray(left_bound, dtype=float).reshape(-1, 2)
        right = np.asarray(right_bound, dtype=float).reshape(-1, 2)
        for name, arr in (("curvature", curv), ("left_bound", left), ("right_bound", right)):
            if arr.shape[0] < 1:
                raise ValueError(f"{name} needs at least one (s, value) knot")
            if np.any(np.diff(arr[:, 0]) <= 0) and arr.shape[0] > 1:
                raise ValueError(f"{name} knots must have strictly increasing s")
        if s_max is None:
            s_max = float(max(curv[-1, 0], left[-1, 0], right[-1, 0]))
        if s_max <= 0:
            raise ValueError("s_max must be positive")
        road = cls(
            s_max=float(s_max),
            curv_s=curv[:, 0],
            curv_c=curv[:, 1],
            left_s=left[:, 0],
            left_r=left[:, 1],
            right_s=right[:, 0],
            right_r=right[:, 1],
            origin_x=float(origin[0]),
            origin_y=float(origin[1]),
            origin_heading=float(origin[2]),
        )
        road._build_tables()
        road._check_bound_order()
        return road

    @classmethod
    def straight(cls, length: float, half_width: float = 6.0) -> "RoadModel":
        """Straight road along +x with symmetric lateral bounds."""
        return cls.from_knots(
            curvature=[(0.0, 0.0), (length, 0.0)],
            left_bound=[(0.0, half_width)],
            right_bound=[(0.0, -half_width)],
            s_max=length,
        )

    @classmethod
    def constant_arc(cls, length: float, curvature: float, half_width: float = 6.0) -> "RoadModel":
        return cls.from_knots(
            curvature=[(0.0, curvature), (length, curvature)],
            left_bound=[(0.0, half_width)],
            right_bound=[(0.0, -half_width)],
            s_max=length,
        )

    # -- construction helpers -------------------------------------------------

    def _build_tables(self) -> None:
        if len(self.curv_s) == 1 or np.all(self.curv_c == self.curv_c[0]):
            c0 = float(self.curv_c[0])
            interp = _ConstantProfile(c0)
            deriv = _ConstantProfile(0.0)
            heading = _LinearProfile(c0)
            object.__setattr__(self, "_const_c", c0)
        else:
            interp = PchipInterpolator(self.curv_s, self.curv_c, extrapolate=True)
            deriv = interp.derivative()
            heading = interp.antiderivative()
            object.__setattr__(self, "_const_c", None)
            # Compact piecewise-cubic tables for fast scalar evaluation in
            # the optimizer's inner loop (one searchsorted + Horner).
            object.__setattr__(self, "_pp_breaks", np.asarray(interp.x))
            object.__setattr__(self, "_pp_coeffs", np.asarray(interp.c))
        object.__setattr__(self, "_curv_interp", interp)
        object.__setattr__(self, "_curv_deriv", deriv)
        object.__setattr__(self, "_heading_integral", heading)
        # Cumulative centerline positions on a ~1 m grid; per-segment
        # Gauss-Legendre keeps queries O(1) and accurate to ~1e-12.
        n_seg = max(int(np.ceil(self.s_max)), 1)
        grid = np.linspace(0.0, self.s_max, n_seg + 1)
        xy = np.empty((n_seg + 1, 2))
        xy[0] = (self.origin_x, self.origin_y)
        for i in range(n_seg):
            dx, dy = self._segment_integral(grid[i], grid[i + 1])
            xy[i + 1] = xy[i] + (dx, dy)
        object.__setattr__(self, "_grid_s", grid)
        object.__setattr__(self, "_grid_xy", xy)

    def _check_bound_order(self) -> None:
        s = np.linspace(0.0, self.s_max, 512)
        lo = self.right_bound_at(s)
        hi = self.left_bound_at(s)
        if np.any(lo >= hi):
            bad = float(s[np.argmax(lo >= hi)])
            raise ValueError(f"right bound >= left bound near s={bad:.2f}")

    def _segment_integral(self, s0: float, s1: float) -> tuple[float, float]:
        half = 0.5 * (s1 - s0)
        mid = 0.5 * (s1 + s0)
        pts = mid + half * _GL_NODES
        psi = self.heading_at(pts)
        return (
            float(half * np.dot(_GL_WEIGHTS, np.cos(psi))),
            float(half * np.dot(_GL_WEIGHTS, np.sin(psi))),
        )

    # -- evaluation -----------------------------------------------------------

    def _check_range(self, s: float) -> None:
        if not (-_RANGE_TOL <= s <= self.s_max + _RANGE_TOL):
            raise RoadRangeError(f"s={s!r} outside [0, {self.s_max}]")

    def curvature_at(self, s: float) -> float:
        """Interpolated centerline curvature c(s); raises out of range."""
        self._check_range(s)
        return float(self._curv_interp(np.clip(s, 0.0, self.s_max)))

    def curvature_deriv_at(self, s: float) -> float:
        """dc/ds of the interpolated profile (piecewise continuous)."""
        self._check_range(s)
        return float(self._curv_deriv(np.clip(s, 0.0, self.s_max)))

    def curvature_extended(self, s: float) -> tuple[float, float]:
        """(c, dc/ds) with flat extension beyond [0, s_max].

        Used by the trajectory optimizer whose iterates may probe a little
        past the mapped road; the public accessors keep strict ranges.
        """
        const = self._const_c
        if const is not None:
            return const, 0.0
        breaks = self._pp_breaks
        if s <= breaks[0] or s <= 0.0:
            return float(self.curv_c[0]), 0.0
        if s >= breaks[-1] or s >= self.s_max:
            return float(self.curv_c[-1]), 0.0
        idx = int(np.searchsorted(breaks, s, side="right")) - 1
        idx = min(idx, self._pp_coeffs.shape[1] - 1)
        dx = s - breaks[idx]
        c3, c2, c1, c0 = self._pp_coeffs[:, idx]
        value = ((c3 * dx + c2) * dx + c1) * dx + c0
        slope = (3.0 * c3 * dx + 2.0 * c2) * dx + c1
        return float(value), float(slope)

    def heading_at(self, s):
        """Centerline heading angle at arc length s (array friendly)."""
        return self.origin_heading + self._heading_integral(np.clip(s, 0.0, self.s_max))

    def left_bound_at(self, s):
        return np.interp(s, self.left_s, self.left_r)

    def right_bound_at(self, s):
        return np.interp(s, self.right_s, self.right_r)

    def left_bound_slope_at(self, s: float) -> float:
        return _piecewise_slope(self.left_s, self.left_r, s)

    def right_bound_slope_at(self, s: float) -> float:
        return _piecewise_slope(self.right_s, self.right_r, s)

    def centerline_point(self, s: float) -> tuple[float, float]:
        """Cartesian position of the centerline at arc length s."""
        self._check_range(s)
        s = float(np.clip(s, 0.0, self.s_max))
        idx = min(int(np.searchsorted(self._grid_s, s, side="right")) - 1, len(self._grid_s) - 2)
        idx = max(idx, 0)
        x0, y0 = self._grid_xy[idx]
        dx, dy = self._segment_integral(self._grid_s[idx], s)
        return (float(x0 + dx), float(y0 + dy))

    def frenet_to_cartesian(self, s: float, r: float) -> tuple[float, float]:
        """Map (s, r) to the plane: centerline point offset r along the left normal."""
        self._check_range(s)
        c = self.curvature_at(s)
        if 1.0 - r * c <= 0.0:
            raise FrenetDomainError(f"(s={s}, r={r}) violates 1 - r*c(s) > 0 (c={c})")
        x, y = self.centerline_point(s)
        psi = float(self.heading_at(s))
        return (float(x - r * np.sin(psi)), float(y + r * np.cos(psi)))

    def cartesian_to_frenet(self, x: float, y: float) -> tuple[float, float]:
        """Nearest-point projection onto the centerline (inverse mapping).

        Coarse scan over the precomputed grid followed by Newton refinement
        of the tangency condition (P - p(s)) . t(s) = 0.
        """
        p = np.array([x, y])
        d2 = np.sum((self._grid_xy - p) ** 2, axis=1)
        s = float(self._grid_s[int(np.argmin(d2))])
        for _ in range(30):
            px, py = self.centerline_point(s)
            psi = float(self.heading_at(s))
            t = np.array([np.cos(psi), np.sin(psi)])
            n = np.array([-np.sin(psi), np.cos(psi)])
            e = p - (px, py)
            phi = float(e @ t)
            dphi = -1.0 + self.curvature_at(s) * float(e @ n)
            if dphi == 0.0:
                break
            step = phi / dphi
            s_new = float(np.clip(s - step, 0.0, self.s_max))
            if abs(s_new - s) < 1e-12:
                s = s_new
                break
            s = s_new
        px, py = self.centerline_point(s)
        psi = float(self.heading_at(s))
        n = np.array([-np.sin(psi), np.cos(psi)])
        r = float((p - (px, py)) @ n)
        return (s, r)


def check_validity(road: RoadModel, ds: float = 0.5, dr: float = 0.25) -> list[tuple[float, float]]:
    """Sample the drivable band and return every (s, r) with 1 - r*c(s) <= 0.

    An empty list means the curvilinear frame is a bijection over the band.
    """
    violations: list[tuple[float, float]] = []
    s_grid = np.arange(0.0, road.s_max + 0.5 * ds, ds)
    s_grid[-1] = min(s_grid[-1], road.s_max)
    for s in s_grid:
        c = road.curvature_at(float(s))
        lo = float(road.right_bound_at(s))
        hi = float(road.left_bound_at(s))
        r_grid = np.arange(lo, hi + 0.5 * dr, dr)
        if len(r_grid) == 0 or r_grid[-1] < hi:
            r_grid = np.append(r_grid, hi)
        bad = 1.0 - r_grid * c <= 0.0
        violations.extend((float(s), float(r)) for r in r_grid[bad])
    return violations


def _piecewise_slope(xs: np.ndarray, ys: np.ndarray, x: float) -> float:
    if len(xs) < 2 or x <= xs[0] or x >= xs[-1]:
        return 0.0
    idx = int(np.searchsorted(xs, x, side="right")) - 1
    idx = min(max(idx, 0), len(xs) - 2)
    dx = xs[idx + 1] - xs[idx]
    return float((ys[idx + 1] - ys[idx]) / dx) if dx > 0 else 0.0


class _ConstantProfile:
    def __init__(self, value: float):
        self.value = value

    def __call__(self, s):
        return np.full_like(np.asarray(s, dtype=float), self.value) if np.ndim(s) else self.value


class _LinearProfile:
    def __init__(self, slope: float):
        self.slope = slope

    def __call__(self, s):
        return self.slope * np.asarray(s, dtype=float)
