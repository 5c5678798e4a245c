"""Smooth obstacle boundaries from bounding triangles.

Each obstacle is given as a triangle in (s, r) coordinates.  The unique
parabola r = alpha*s^2 + beta*s + gamma through the three vertices forms a
differentiable boundary; the obstacle is assigned to the road side it
hugs, and the signed clearance function h is <= 0 exactly when the
vehicle is outside the parabola's concavity (the safe half).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import VehicleState
from .road import RoadModel

__all__ = [
    "ObstacleParabola",
    "DegenerateTriangleError",
    "fit_parabola",
    "assign_side",
    "clearance",
    "clearance_with_gradient",
]

ACTIVATION_MARGIN = 5.0  # m added on both sides of the triangle's s-range
RAMP_WIDTH = 5.0  # m over which the boundary fades to the inactive value
FAR_VALUE = -1.0  # clamped (safe) value far outside the activation span


class DegenerateTriangleError(ValueError):
    """Triangle vertices with (near-)duplicate s coordinates."""


def fit_parabola(
    p1: tuple[float, float], p2: tuple[float, float], p3: tuple[float, float]
) -> tuple[float, float, float]:
    """Coefficients (alpha, beta, gamma) of the parabola through three points."""
    pts = np.array([p1, p2, p3], dtype=float)
    s = pts[:, 0]
    for i in range(3):
        for j in range(i + 1, 3):
            if abs(s[i] - s[j]) < 1e-6:
                raise DegenerateTriangleError(
                    f"vertices {i} and {j} share s within 1e-6 ({s[i]}, {s[j]})"
                )
    vander = np.column_stack([s**2, s, np.ones(3)])
    alpha, beta, gamma = np.linalg.solve(vander, pts[:, 1])
    return (float(alpha), float(beta), float(gamma))


def assign_side(triangle, road: RoadModel) -> str:
    """Pick the road side whose bound is laterally closest to the centroid.

    Ties break toward "right" (keep-right convention).
    """
    pts = np.asarray(triangle, dtype=float).reshape(3, 2)
    s_c = float(np.mean(pts[:, 0]))
    r_c = float(np.mean(pts[:, 1]))
    dist_left = float(road.left_bound_at(s_c)) - r_c
    dist_right = r_c - float(road.right_bound_at(s_c))
    return "right" if dist_right <= dist_left else "left"


@dataclass(frozen=True)
class ObstacleParabola:
    """A fitted obstacle boundary with its activation span along the road."""

    coeffs: tuple[float, float, float]
    side: str
    s_span: tuple[float, float]
    source_triangle: tuple[tuple[float, float], ...] = ()

    def __post_init__(self) -> None:
        if self.side not in ("left", "right"):
            raise ValueError(f"side must be 'left' or 'right', got {self.side!r}")
        alpha = self.coeffs[0]
        if self.side == "right" and alpha > 1e-12:
            raise ValueError("right-side obstacle must have a downward-opening boundary (alpha <= 0)")
        if self.side == "left" and alpha < -1e-12:
            raise ValueError("left-side obstacle must have an upward-opening boundary (alpha >= 0)")
        for s, r in self.source_triangle:
            resid = abs(self.boundary_at(s) - r)
            if resid > 1e-9:
                raise ValueError(f"triangle vertex ({s}, {r}) off the boundary by {resid:g}")

    @classmethod
    def from_triangle(
        cls,
        triangle,
        road: RoadModel | None = None,
        side: str | None = None,
        margin: float = ACTIVATION_MARGIN,
    ) -> "ObstacleParabola":
        pts = np.asarray(triangle, dtype=float).reshape(3, 2)
        coeffs = fit_parabola(pts[0], pts[1], pts[2])
        if side is None:
            if road is None:
                raise ValueError("need a road to infer the side, or pass side explicitly")
            side = assign_side(pts, road)
        if road is not None:
            for s, r in pts:
                lo = float(road.right_bound_at(s))
                hi = float(road.left_bound_at(s))
                if not (lo - 1e-9 <= r <= hi + 1e-9):
                    raise ValueError(f"triangle vertex ({s}, {r}) outside the road band [{lo}, {hi}]")
        s_lo = float(pts[:, 0].min()) - margin
        s_hi = float(pts[:, 0].max()) + margin
        return cls(
            coeffs=coeffs,
            side=side,
            s_span=(s_lo, s_hi),
            source_triangle=tuple((float(s), float(r)) for s, r in pts),
        )

    def boundary_at(self, s: float) -> float:
        a, b, c = self.coeffs
        return a * s * s + b * s + c

    def boundary_slope_at(self, s: float) -> float:
        a, b, _ = self.coeffs
        return 2.0 * a * s + b


def _ramp(obstacle: ObstacleParabola, s: float) -> tuple[float, float]:
    """Fade factor sigma in [0, 1] outside the span, and d(sigma)/ds.

    sigma = 0 on the active span, rising along a C1 smoothstep to 1 at
    RAMP_WIDTH beyond it.
    """
    lo, hi = obstacle.s_span
    if s < lo:
        d, dd = lo - s, -1.0
    elif s > hi:
        d, dd = s - hi, 1.0
    else:
        return 0.0, 0.0
    tau = d / RAMP_WIDTH
    if tau >= 1.0:
        return 1.0, 0.0
    sigma = tau * tau * (3.0 - 2.0 * tau)
    dsigma = 6.0 * tau * (1.0 - tau) / RAMP_WIDTH * dd
    return sigma, dsigma


def clearance_with_gradient(
    obstacle: ObstacleParabola, s: float, r: float
) -> tuple[float, float, float]:
    """Signed clearance h and its partial derivatives (dh/ds, dh/dr).

    h <= 0 iff the point is outside the concavity of the boundary; h is
    continuously differentiable everywhere.
    """
    q = obstacle.boundary_at(s)
    dq = obstacle.boundary_slope_at(s)
    if obstacle.side == "right":
        raw, draw_ds, draw_dr = q - r, dq, -1.0
    else:
        raw, draw_ds, draw_dr = r - q, -dq, 1.0
    sigma, dsigma = _ramp(obstacle, s)
    h = (1.0 - sigma) * raw + sigma * FAR_VALUE
    dh_ds = (1.0 - sigma) * draw_ds + dsigma * (FAR_VALUE - raw)
    dh_dr = (1.0 - sigma) * draw_dr
    return (float(h), float(dh_ds), float(dh_dr))


def clearance(obstacle: ObstacleParabola, state) -> float:
    """h(x) for a VehicleState or an (s, r) pair."""
    if isinstance(state, VehicleState):
        s, r = state.s, state.r
    else:
        s, r = state
    return clearance_with_gradient(obstacle, float(s), float(r))[0]
