"""Clamped B-spline curves over a normalized budget axis.

A curve of degree k on `num` grid points over [0, 1] has num + k - 1 control
points; evaluation is exactly linear in them, which is what lets a small
network emit control points and receive exact gradients back through the
curve.  Outside [0, 1] the curve continues linearly with the boundary value
and slope (polynomial tails explode and would wreck extrapolation).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np


def uniform_grid(num: int) -> np.ndarray:
    if num < 2:
        raise ValueError("need at least 2 grid points")
    return np.linspace(0.0, 1.0, num)


def n_control_points(degree: int, num: int) -> int:
    return num + degree - 1


@dataclass(frozen=True)
class SplineCurve:
    """degree, strictly increasing grid over [0, 1], and control points."""

    degree: int
    grid: np.ndarray
    control_points: np.ndarray
    b_scale: float = 1.0

    def __post_init__(self):
        grid = np.ascontiguousarray(self.grid, dtype=np.float64)
        cp = np.ascontiguousarray(self.control_points, dtype=np.float64)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "control_points", cp)
        if self.degree < 0:
            raise ValueError("degree must be nonnegative")
        if len(grid) < 2 or np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing with >= 2 points")
        expected = n_control_points(self.degree, len(grid))
        if len(cp) != expected:
            raise ValueError(f"need {expected} control points for degree {self.degree}, num {len(grid)}; got {len(cp)}")
        if not self.b_scale > 0:
            raise ValueError("b_scale must be positive")

    @property
    def knots(self) -> np.ndarray:
        k = self.degree
        return np.concatenate([np.full(k, self.grid[0]), self.grid, np.full(k, self.grid[-1])])

    def to_json(self) -> str:
        return json.dumps(
            {
                "degree": self.degree,
                "grid": self.grid.tolist(),
                "control_points": self.control_points.tolist(),
                "b_scale": self.b_scale,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "SplineCurve":
        d = json.loads(text)
        return cls(
            degree=int(d["degree"]),
            grid=np.asarray(d["grid"], dtype=np.float64),
            control_points=np.asarray(d["control_points"], dtype=np.float64),
            b_scale=float(d.get("b_scale", 1.0)),
        )


def make_curve(degree: int, num: int, control_points, b_scale: float = 1.0) -> SplineCurve:
    return SplineCurve(degree=degree, grid=uniform_grid(num), control_points=np.asarray(control_points, dtype=np.float64), b_scale=b_scale)


def find_span(knots: np.ndarray, degree: int, x: float) -> int:
    """Knot span index such that knots[span] <= x < knots[span+1] (boundary-safe)."""
    low = degree
    high = len(knots) - 1 - degree
    if x <= knots[low]:
        return low
    if x >= knots[high]:
        return high - 1
    span = (low + high) // 2
    while x < knots[span] or x >= knots[span + 1]:
        if x < knots[span]:
            high = span
        else:
            low = span
        span = (low + high) // 2
    return span


def basis_funs(knots: np.ndarray, degree: int, x: float, span: int) -> np.ndarray:
    """The degree+1 nonzero basis function values at x (Cox-de Boor triangle)."""
    left = np.empty(degree)
    right = np.empty(degree)
    vals = np.empty(degree + 1)
    vals[0] = 1.0
    for j in range(degree):
        left[j] = x - knots[span - j]
        right[j] = knots[span + 1 + j] - x
        saved = 0.0
        for r in range(j + 1):
            temp = vals[r] / (right[r] + left[j - r])
            vals[r] = saved + right[r] * temp
            saved = left[j - r] * temp
        vals[j + 1] = saved
    return vals


def _eval_inside(curve: SplineCurve, x: float) -> float:
    knots = curve.knots
    span = find_span(knots, curve.degree, x)
    vals = basis_funs(knots, curve.degree, x, span)
    lo = span - curve.degree
    return float(np.dot(vals, curve.control_points[lo : span + 1]))


def derivative_curve(curve: SplineCurve) -> SplineCurve:
    """The exact first derivative: a degree k-1 curve of scaled control-point differences."""
    k = curve.degree
    if k == 0:
        return replace(curve, control_points=np.zeros_like(curve.control_points), degree=0)
    knots = curve.knots
    c = curve.control_points
    n = len(c)
    d = np.empty(n - 1)
    for j in range(n - 1):
        denom = knots[j + k + 1] - knots[j + 1]
        d[j] = k * (c[j + 1] - c[j]) / denom if denom > 0 else 0.0
    return SplineCurve(degree=k - 1, grid=curve.grid, control_points=d, b_scale=curve.b_scale)


def _check_x(x: float):
    if not math.isfinite(x):
        raise ValueError(f"evaluation point must be finite, got {x}")


def eval_curve(curve: SplineCurve, x: float) -> float:
    """Curve value at x; linear extension of the boundary segment outside [0, 1]."""
    _check_x(x)
    lo, hi = curve.grid[0], curve.grid[-1]
    if x < lo:
        return _eval_inside(curve, lo) + (x - lo) * _eval_inside(derivative_curve(curve), lo)
    if x > hi:
        return _eval_inside(curve, hi) + (x - hi) * _eval_inside(derivative_curve(curve), hi)
    return _eval_inside(curve, x)


def eval_derivative(curve: SplineCurve, x: float) -> float:
    """First derivative at x; constant boundary slope outside [0, 1]."""
    _check_x(x)
    deriv = derivative_curve(curve)
    x_clip = min(max(x, curve.grid[0]), curve.grid[-1])
    return _eval_inside(deriv, x_clip)


def _basis_vector_inside(curve: SplineCurve, x: float) -> np.ndarray:
    knots = curve.knots
    span = find_span(knots, curve.degree, x)
    vals = basis_funs(knots, curve.degree, x, span)
    out = np.zeros(len(curve.control_points))
    out[span - curve.degree : span + 1] = vals
    return out


def _deriv_weights(curve: SplineCurve, x: float) -> np.ndarray:
    """Dense w with curve'(x) = w . control_points, for x inside the grid."""
    k = curve.degree
    n = len(curve.control_points)
    w = np.zeros(n)
    if k == 0:
        return w
    deriv = derivative_curve(curve)
    dvals = _basis_vector_inside(deriv, x)
    knots = curve.knots
    for j in range(n - 1):
        if dvals[j] == 0.0:
            continue
        denom = knots[j + k + 1] - knots[j + 1]
        if denom > 0:
            scale = dvals[j] * k / denom
            w[j + 1] += scale
            w[j] -= scale
    return w


def grad_control_points(curve: SplineCurve, x: float) -> np.ndarray:
    """d eval / d control_points at x: the basis vector (extended linearly outside [0, 1])."""
    _check_x(x)
    lo, hi = curve.grid[0], curve.grid[-1]
    if x < lo:
        return _basis_vector_inside(curve, lo) + (x - lo) * _deriv_weights(curve, lo)
    if x > hi:
        return _basis_vector_inside(curve, hi) + (x - hi) * _deriv_weights(curve, hi)
    return _basis_vector_inside(curve, x)


def basis_matrix(degree: int, num: int, xs: np.ndarray) -> np.ndarray:
    """Rows of grad_control_points for many evaluation points (shared grid).

    Since curves are linear in their control points, predictions at all xs are
    just this matrix times the control-point vector; training caches it.
    """
    template = make_curve(degree, num, np.zeros(n_control_points(degree, num)))
    return np.stack([grad_control_points(template, float(x)) for x in np.asarray(xs, dtype=np.float64)])
