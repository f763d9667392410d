# daf_numerics/daf/compact_leaf.py

from typing import Any, Callable, Dict, Optional, Tuple

import numpy as np

from .. import config
from ..analytics.leaf_numerics import LeafArc, LineField, advance
from ..manifolds.chart_space import ChartPoint, displacement, dist_coords, normalize_coords
from ..manifolds.system_zoo import DynamicalSystem
from ..utils.color_log import log_check, log_verdict
from ..utils.errors import InvalidInputError, ResolutionError
from ..utils.grid_utils import unit
from .center_search import center_field, leaving_index, locate_on_arc, trace_center

PlaneField = Callable[[np.ndarray], np.ndarray]


# ==============================================================================
# WINDING NUMBERS
# ==============================================================================


def winding_number(values: np.ndarray, max_step: Optional[float] = None) -> int:
    """
    Index of a planar vector field sampled in order around a closed polygon.

    Raises:
        ResolutionError: a sample vanishes or consecutive angles differ by more than ``max_step``.
    """
    MAX_STEP = config.WINDING_MAX_ANGLE_STEP if max_step is None else max_step
    values = np.asarray(values, dtype=float).reshape(-1, 2)
    if np.any(np.linalg.norm(values, axis=1) == 0.0):
        raise ResolutionError("The field vanishes on the boundary.")
    angles = np.arctan2(values[:, 1], values[:, 0])
    steps = np.diff(np.append(angles, angles[0]))
    steps = (steps + np.pi) % (2.0 * np.pi) - np.pi
    if np.max(np.abs(steps)) > MAX_STEP:
        raise ResolutionError(f"Boundary angle step {np.max(np.abs(steps)):.3f} exceeds {MAX_STEP:.3f}; refine the boundary.")
    return int(np.rint(np.sum(steps) / (2.0 * np.pi)))


def rectangle_boundary(center: np.ndarray, half: np.ndarray, samples: int) -> np.ndarray:
    """Counter-clockwise boundary points of an axis-aligned rectangle, ``samples`` per side."""
    cx, cy = center
    hx, hy = half
    s = np.linspace(-1.0, 1.0, samples, endpoint=False)
    sides = [
        np.column_stack([cx + hx * s, np.full(samples, cy - hy)]),
        np.column_stack([np.full(samples, cx + hx), cy + hy * s]),
        np.column_stack([cx - hx * s, np.full(samples, cy + hy)]),
        np.column_stack([np.full(samples, cx - hx), cy - hy * s]),
    ]
    return np.vstack(sides)


def boundary_index(field: PlaneField, center, half, samples: Optional[int] = None) -> int:
    """Winding number of ``field`` over a rectangle boundary, doubling the sampling until it resolves."""
    n = config.WINDING_SAMPLES if samples is None else int(samples)
    center, half = np.asarray(center, dtype=float), np.broadcast_to(np.asarray(half, dtype=float), (2,))
    for _ in range(config.WINDING_MAX_REFINE + 1):
        try:
            return winding_number(field(rectangle_boundary(center, half, n)))
        except ResolutionError:
            n *= 2
    raise ResolutionError(f"Winding number unresolved with {n // 2} samples per side.", witness={"center": center.tolist(), "half": half.tolist()})


def localize_zero(field: PlaneField, center, half, tol: Optional[float] = None) -> Tuple[np.ndarray, int]:
    """
    Quadrant bisection on a rectangle of nonzero index: keeps a quadrant with
    nonzero index until the rectangle is smaller than ``tol``.
    """
    TOL = config.FIXED_POINT_TOL if tol is None else tol
    center = np.asarray(center, dtype=float)
    half = np.broadcast_to(np.asarray(half, dtype=float), (2,)).copy()
    index = boundary_index(field, center, half)
    if index == 0:
        raise InvalidInputError("Rectangle has index zero; nothing to localize.")
    while np.max(half) > TOL:
        half = 0.5 * half
        for sx, sy in ((-1, -1), (1, -1), (1, 1), (-1, 1)):
            quad = center + half * np.array([sx, sy])
            try:
                sub = boundary_index(field, quad, half)
            except ResolutionError:
                # zero on or next to this quadrant's boundary; try the others
                sub = 0
            if sub != 0:
                center = quad
                break
        else:
            # no quadrant resolves: the zero sits on a shared edge within 2 * half of center
            break
    return center, index


# ==============================================================================
# COMPACT PERIODIC CENTER LEAVES
# ==============================================================================


def _transversal_frame(f: DynamicalSystem, x0: np.ndarray, center: LineField) -> np.ndarray:
    """Columns (a, b, c): an orthonormal transversal pair and the center direction at x0."""
    c = center(x0[None, :])[0]
    helper = np.array([0.0, 0.0, 1.0]) if abs(c[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    a = unit(np.cross(helper, c))
    b = unit(np.cross(c, a))
    return np.column_stack([a, b, c])


def _center_projection(center: LineField, x0: np.ndarray, frame: np.ndarray, q: np.ndarray, m, steps: int = 3) -> np.ndarray:
    """(a, b) coordinates on the flat transversal disc at x0 reached by sliding each q along its center leaf."""
    q = np.asarray(q, dtype=float).reshape(-1, 3)
    c = frame[:, 2]
    for _ in range(steps):
        coords = np.linalg.solve(frame, displacement(x0, q, m).T).T
        q, _ = advance(center, q, np.broadcast_to(c, q.shape), -coords[:, 2])
    coords = np.linalg.solve(frame, displacement(x0, q, m).T).T
    return coords[:, :2]


def find_compact_periodic_center_leaf(
    f: DynamicalSystem,
    x0,
    center: Optional[LineField] = None,
    epsilon: Optional[float] = None,
    k_budget: Optional[int] = None,
    radius: Optional[float] = None,
    search_length: Optional[float] = None,
) -> Dict[str, Any]:
    """
    Works with g = f^2. For each return time k with d(g^k x0, x0) < epsilon,
    the displacement p -> pi^c(g^k(D(p))) - p on the su-rectangle D around x0
    is checked for a nonzero boundary index; quadrant bisection then locates a
    fixed point, whose center leaf is traced until it closes.
    """
    EPS = config.RETURN_EPSILON if epsilon is None else float(epsilon)
    K = config.RETURN_BUDGET if k_budget is None else int(k_budget)
    R = config.RECTANGLE_RADIUS if radius is None else float(radius)
    LENGTH = config.SEARCH_LENGTH if search_length is None else float(search_length)
    m = f.manifold
    center = center_field(f, center)
    x0 = normalize_coords(x0.array if isinstance(x0, ChartPoint) else np.asarray(x0, dtype=float), m)[0]
    if dist_coords(f.iterate(x0, 2), x0, m) < 1e-14:
        raise InvalidInputError("Seed is fixed by f^2; choose a non-fixed seed.")
    log_check("Compact periodic center leaf", f"seed {np.round(x0, 6).tolist()}, k <= {K}")

    frame = _transversal_frame(f, x0, center)

    def disc(p: np.ndarray) -> np.ndarray:
        p = np.asarray(p, dtype=float).reshape(-1, 2)
        return normalize_coords(x0 + p @ frame[:, :2].T, m)[0]

    tried = []
    for k in range(1, K + 1):
        if dist_coords(f.iterate(x0, 2 * k), x0, m) >= EPS:
            continue

        def rho(p: np.ndarray, k=k) -> np.ndarray:
            return _center_projection(center, x0, frame, f.iterate(disc(p), 2 * k), m) - np.asarray(p).reshape(-1, 2)

        index = boundary_index(rho, np.zeros(2), R)
        tried.append({"k": k, "index": index})
        if index == 0:
            continue

        p_star, _ = localize_zero(rho, np.zeros(2), R)
        y = disc(p_star)[0]
        params, pts, tans = trace_center(center, y[None, :], LENGTH)
        skip = leaving_index(params, pts[:, 0], y, m)
        closure = locate_on_arc(params, pts[:, 0], y, m, skip, tans[:, 0], tans[0, 0])
        if closure is None or closure[1] >= config.CLOSURE_TOL:
            tried[-1]["closed"] = False
            continue
        length = closure[0]
        keep = params <= length
        leaf = LeafArc("c", pts[keep, 0], tans[keep, 0], params[keep], m, line_field=center)

        # smallest m with f^m(leaf) = leaf, among divisors of the return time 2k
        period = 2 * k
        for n in range(1, 2 * k + 1):
            if (2 * k) % n:
                continue
            image = f.iterate(y, n)
            if locate_on_arc(params[keep], pts[keep, 0], image, m, min_param=-np.inf) is not None:
                period = n
                break

        report = {
            "verdict": "found",
            "point": y.tolist(),
            "return_time": k,
            "index": index,
            "leaf_length": float(length),
            "closure_error": float(closure[1]),
            "period": period,
            "leaf": leaf,
            "tried": tried,
        }
        log_verdict("compact center leaf", "found", {"leaf_length": length, "period": period, "index": index})
        return report

    report = {"verdict": "not-found", "tried": tried, "k_budget": K}
    log_verdict("compact center leaf", "not-found", {"returns_tried": len(tried)})
    return report
