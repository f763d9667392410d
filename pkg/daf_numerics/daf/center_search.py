# daf_numerics/daf/center_search.py

from typing import Optional, Tuple

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize_scalar

from .. import config
from ..analytics.leaf_numerics import LineField, trace
from ..manifolds.chart_space import ManifoldDescriptor, displacement, dist_coords, normalize_coords, sample_grid
from ..manifolds.system_zoo import DynamicalSystem
from ..utils.grid_utils import line_angle


def center_field(f: DynamicalSystem, center: Optional[LineField] = None) -> LineField:
    return LineField(f, "c") if center is None else center


def probe_points(m: ManifoldDescriptor, grid: Optional[int] = None, points=None, generic: bool = False) -> np.ndarray:
    """Explicit points, or a probe grid (shifted off rational points when ``generic``)."""
    if points is not None:
        return normalize_coords(np.asarray(points, dtype=float).reshape(-1, 3), m)[0]
    n = config.PROBE_GRID if grid is None else int(grid)
    return sample_grid(m, n, offset=config.GENERIC_OFFSET if generic else 0.0)


def trace_center(center: LineField, points: np.ndarray, length: float, sign: float = 1.0, step: Optional[float] = None):
    """
    Trace the oriented center field from every point for the given arc length.

    Returns:
        Tuple: params (S+1,), points (S+1, P, 3), tangents (S+1, P, 3).
    """
    STEP = config.LEAF_STEP if step is None else float(step)
    steps = max(1, int(np.ceil(length / STEP - 1e-9)))
    h = length / steps
    directions = sign * center(points)
    pts, tans = trace(center, points, directions, h, steps)
    return h * np.arange(steps + 1), pts, tans


def _runs(indices: np.ndarray):
    if indices.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(indices) > 1) + 1
    return np.split(indices, breaks)


def locate_on_arc(
    params: np.ndarray,
    points: np.ndarray,
    target: np.ndarray,
    manifold: ManifoldDescriptor,
    min_param: float = 0.0,
    tangents: Optional[np.ndarray] = None,
    target_tangent: Optional[np.ndarray] = None,
) -> Optional[Tuple[float, float]]:
    """
    First parameter s >= min_param at which a sampled arc passes through target.

    Samples within CAPTURE_FACTOR steps of the target are refined on a local
    cubic interpolant; a refined distance below LOCATE_TOL counts as found.
    With ``target_tangent`` the arc tangent there must also match (closure test).
    """
    h = params[1] - params[0]
    d = dist_coords(points, target[None, :], manifold)
    near = np.flatnonzero((d < config.CAPTURE_FACTOR * h) & (params >= min_param - h))
    for run in _runs(near):
        i = int(run[np.argmin(d[run])])
        lo, hi = max(0, i - 3), min(len(params), i + 4)
        steps = displacement(points[lo : hi - 1], points[lo + 1 : hi], manifold)
        lifted = points[lo] + np.vstack([np.zeros(3), np.cumsum(steps, axis=0)])
        spline = CubicSpline(params[lo:hi], lifted, axis=0)

        def gap(s):
            return float(dist_coords(normalize_coords(spline(s), manifold)[0], target, manifold))

        a, b = params[max(lo, i - 1)], params[min(hi - 1, i + 1)]
        best = minimize_scalar(gap, bounds=(a, b), method="bounded", options={"xatol": 1e-14})
        if best.fun >= config.LOCATE_TOL or best.x < min_param:
            continue
        if target_tangent is not None and tangents is not None:
            if line_angle(tangents[i], target_tangent) > 1e-3 or np.dot(tangents[i], target_tangent) <= 0.0:
                continue
        return float(best.x), float(best.fun)
    return None


def leaving_index(params: np.ndarray, points: np.ndarray, start: np.ndarray, manifold: ManifoldDescriptor) -> float:
    """Parameter after which the arc has left the capture zone of its start."""
    h = params[1] - params[0]
    d = dist_coords(points, start[None, :], manifold)
    away = np.flatnonzero(d > 2.0 * config.CAPTURE_FACTOR * h)
    return float(params[away[0]]) if away.size else float(params[-1]) + h
