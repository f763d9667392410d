# daf_numerics/continuation/graph_transform.py

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq
from tqdm import tqdm

from .. import config
from ..analytics.cone_hyperbolicity import RateReport, estimate_splitting
from ..analytics.leaf_numerics import LeafArc, LineField, trace
from ..manifolds.chart_space import (
    ManifoldDescriptor,
    displacement,
    dist_coords,
    glue_vectors,
    hausdorff_distance,
    normalize_coords,
)
from ..manifolds.system_zoo import DynamicalSystem
from ..utils.color_log import log_check, log_verdict, log_warning
from ..utils.errors import (
    ConvergenceError,
    InvalidInputError,
    ModelViolationError,
    TangencyError,
    TransformStepError,
    TubeOverlapError,
)
from ..utils.grid_utils import line_angle, unit

STRIP_KINDS = ("cu", "cs")


# ==============================================================================
# TUBULAR FRAMES
# ==============================================================================


def _gram_schmidt(T: np.ndarray, e_u: np.ndarray, e_s: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    u = unit(e_u - np.sum(e_u * T, axis=-1, keepdims=True) * T)
    s = e_s - np.sum(e_s * T, axis=-1, keepdims=True) * T
    s = unit(s - np.sum(s * u, axis=-1, keepdims=True) * u)
    return u, s


def _consistent_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip samples so consecutive vectors agree in sign along the arc."""
    flips = np.sign(np.sum(vectors[1:] * vectors[:-1], axis=-1))
    flips[flips == 0] = 1.0
    signs = np.concatenate([[1.0], np.cumprod(flips)])
    return vectors * signs[:, None]


@dataclass
class TubularFrame:
    """
    A centre arc L(t), t in [0, length], lifted to one continuous chart, with an
    orthonormal transverse frame (u, s). Tube points are L(t) + a u(t) + b s(t).
    """

    params: np.ndarray
    lifted: np.ndarray
    u_lifted: np.ndarray
    s_lifted: np.ndarray
    manifold: ManifoldDescriptor
    closed: bool
    delta: float
    orientation_preserved: Optional[bool] = None
    closure_error: float = 0.0
    sheets: int = 1
    _spline: CubicSpline = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self._spline is None:
            self._spline = CubicSpline(self.params, self.lifted, axis=0)

    @property
    def length(self) -> float:
        return float(self.params[-1] - self.params[0])

    @property
    def start(self) -> float:
        return float(self.params[0])

    def wrap(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if not self.closed:
            return t
        return self.start + np.mod(t - self.start, self.length)

    def lifted_frame(self, t) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        t = self.wrap(t)
        L = self._spline(t)
        T = unit(self._spline(t, 1))
        e_u = np.stack([np.interp(t, self.params, self.u_lifted[:, k]) for k in range(3)], axis=-1)
        e_s = np.stack([np.interp(t, self.params, self.s_lifted[:, k]) for k in range(3)], axis=-1)
        u, s = _gram_schmidt(T, e_u, e_s)
        return L, T, u, s

    def frame(self, t) -> Tuple[np.ndarray, np.ndarray]:
        """Base point and the (T, u, s) columns, both in the chart of the normalized base point."""
        L, T, u, s = self.lifted_frame(t)
        p, shifts = normalize_coords(L, self.manifold)
        columns = np.stack([glue_vectors(v, shifts, self.manifold) for v in (T, u, s)], axis=-1)
        return p, columns

    def point(self, t, a, b) -> np.ndarray:
        L, _, u, s = self.lifted_frame(t)
        a = np.asarray(a, dtype=float)[..., None]
        b = np.asarray(b, dtype=float)[..., None]
        return normalize_coords(L + a * u + b * s, self.manifold)[0]

    def base_points(self, t) -> np.ndarray:
        return normalize_coords(self._spline(self.wrap(t)), self.manifold)[0]

    def nearest_param(self, q: np.ndarray, chunk: int = 2048) -> np.ndarray:
        samples = self.base_points(self.params)
        out = np.empty(len(q))
        for start in range(0, len(q), chunk):
            block = q[start : start + chunk]
            d = dist_coords(block[:, None, :], samples[None, :, :], self.manifold)
            out[start : start + chunk] = self.params[np.argmin(d, axis=1)]
        return out

    def coords(self, q: np.ndarray, t0: Optional[np.ndarray] = None, steps: int = 8) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Tube coordinates (t, a, b) of points; Newton on the tangential component of the displacement."""
        q = np.asarray(q, dtype=float).reshape(-1, 3)
        t = self.nearest_param(q) if t0 is None else np.array(t0, dtype=float).reshape(-1)
        for _ in range(steps):
            p, columns = self.frame(t)
            c = np.linalg.solve(columns, displacement(p, q, self.manifold)[..., None])[..., 0]
            t = self.wrap(t + c[:, 0])
            if np.max(np.abs(c[:, 0])) < 1e-14:
                break
        p, columns = self.frame(t)
        c = np.linalg.solve(columns, displacement(p, q, self.manifold)[..., None])[..., 0]
        return self.wrap(t + c[:, 0]), c[:, 1], c[:, 2]


def trace_closed_leaf(line_field: LineField, x, length: float, step: Optional[float] = None) -> LeafArc:
    """One forward pass of given length from x; used for compact centre leaves."""
    STEP = config.LEAF_STEP if step is None else step
    steps = int(np.ceil(length / STEP - 1e-9))
    h = length / steps
    x = normalize_coords(np.asarray(x, dtype=float), line_field.manifold)[0]
    v0 = line_field(x[None, :])[0]
    pts, tans = trace(line_field, x[None, :], v0[None, :], h, steps)
    return LeafArc(line_field.tag, pts[:, 0], tans[:, 0], h * np.arange(steps + 1), line_field.manifold, line_field=line_field)


def arc_from_points(points: np.ndarray, manifold: ManifoldDescriptor, tag: str = "c") -> LeafArc:
    """Re-parameterize an ordered point sample by cumulative chord length."""
    chords = dist_coords(points[:-1], points[1:], manifold)
    params = np.concatenate([[0.0], np.cumsum(chords)])
    tangents = unit(np.vstack([displacement(points[:-1], points[1:], manifold), displacement(points[-2], points[-1], manifold)]))
    return LeafArc(tag, np.asarray(points, dtype=float), tangents, params, manifold)


def _check_tube_overlap(points: np.ndarray, params: np.ndarray, m: ManifoldDescriptor, delta: float, closed: bool, length: float) -> None:
    sep = np.abs(params[:, None] - params[None, :])
    if closed:
        sep = np.minimum(sep, length - sep)
    far = sep > 6.0 * delta
    if not np.any(far):
        return
    d = dist_coords(points[:, None, :], points[None, :, :], m)
    close = far & (d < delta)
    if np.any(close):
        i, j = np.argwhere(close)[0]
        raise TubeOverlapError(
            f"Leaf returns within {d[i, j]:.3e} < delta = {delta:g} of itself at parameter distance {sep[i, j]:.3f}; retry with a smaller delta.",
            witness={"params": [float(params[i]), float(params[j])], "point": points[i].tolist()},
        )


def _lift_with_frame(f: DynamicalSystem, L: LeafArc, n: int):
    """Arc-length resampling of the lifted arc with sign-consistent (u, s) frames from the splitting of f."""
    m = L.manifold
    params = np.linspace(0.0, L.span, n + 1)
    spline = CubicSpline(L.params - L.params[0], L.unwrapped(), axis=0)
    lifted = spline(params)
    T = unit(spline(params, 1))

    points, shifts = normalize_coords(lifted, m)
    split = estimate_splitting(f, points=points, strict=False)
    e_u = unit(glue_vectors(split.e_u, -shifts, m))
    e_s = unit(glue_vectors(split.e_s, -shifts, m))
    u, s = _gram_schmidt(T, e_u, e_s)
    return params, lifted, points, shifts, T, _consistent_signs(u), _consistent_signs(s)


def _loop_closure(T: np.ndarray, u: np.ndarray, s: np.ndarray, shifts: np.ndarray, m: ManifoldDescriptor) -> Tuple[bool, float]:
    """Whether the (T, u, s) frame comes back to itself around a closed arc, and the largest angle it is off by."""
    cols = [glue_vectors(v[[0, -1]], shifts[[0, -1]], m) for v in (T, u, s)]
    closure_error = float(max(line_angle(c[0], c[1]) for c in cols))
    return bool(all(np.dot(c[0], c[1]) > 0 for c in cols)), closure_error


def _doubled(L: LeafArc) -> LeafArc:
    """The closed arc L traversed twice."""
    return LeafArc(
        L.tag,
        np.vstack([L.points, L.points[1:]]),
        np.vstack([L.tangents, L.tangents[1:]]),
        np.concatenate([L.params, L.params[1:] + L.span]),
        L.manifold,
        L.orientation,
        line_field=L.line_field,
    )


def build_tubular_frame(
    f: DynamicalSystem,
    L: LeafArc,
    rates: RateReport,
    closed: Optional[bool] = None,
    samples: Optional[int] = None,
) -> TubularFrame:
    """
    Arc-length tube around a centre arc with frames from the splitting of f.
    A closed arc (first and last samples within the closure tolerance) is
    treated as a compact leaf of length L.span. When the transverse frame
    comes back reversed, the tube is built over the two-sheeted cover: the
    parameter runs twice around the leaf and sheets = 2.
    """
    m = L.manifold
    if closed is None:
        closed = bool(dist_coords(L.points[0], L.points[-1], m) < config.CLOSURE_TOL * 100)

    n = max(len(L) - 1, 8) if samples is None else int(samples)
    params, lifted, points, shifts, T, u, s = _lift_with_frame(f, L, n)
    _check_tube_overlap(points[:-1] if closed else points, params[:-1] if closed else params, m, rates.delta, closed, L.span)

    orientation_preserved, closure_error, sheets = None, 0.0, 1
    if closed:
        orientation_preserved, closure_error = _loop_closure(T, u, s, shifts, m)
        if not orientation_preserved:
            params, lifted, _, shifts, T, u, s = _lift_with_frame(f, _doubled(L), 2 * n)
            closes, closure_error = _loop_closure(T, u, s, shifts, m)
            if not closes:
                raise ModelViolationError(
                    f"Tube frame does not close up around the doubled leaf (off by {closure_error:.3e} rad).",
                    witness={"point": points[0].tolist()},
                )
            sheets = 2
            log_warning(f"Compact leaf reverses its transverse frame; continuing on the double cover of length {2.0 * L.span:.4f}.")

    return TubularFrame(params, lifted, u, s, m, closed, rates.delta, orientation_preserved, closure_error, sheets=sheets)



class FrameChain:
    """
    Tubes of f^k L, built lazily. When f L = L as a set the base tube is
    reused for every level.
    """

    def __init__(self, f: DynamicalSystem, L: LeafArc, rates: RateReport, closed: Optional[bool] = None, samples: Optional[int] = None):
        self.f = f
        self.rates = rates
        self.closed = closed
        self.samples = samples
        self.base_arc = L
        self.base = build_tubular_frame(f, L, rates, closed, samples)
        self.closed = self.base.closed
        image = f.forward(L.points)
        self.invariant = bool(hausdorff_distance(image, L.points, manifold=L.manifold) < 1e-9)
        self._levels: Dict[int, TubularFrame] = {0: self.base}
        self._arcs: Dict[int, LeafArc] = {0: L}

    def arc(self, k: int) -> LeafArc:
        if self.invariant:
            return self.base_arc
        if k not in self._arcs:
            pushed = self.f.iterate(self.base_arc.points, k)
            self._arcs[k] = arc_from_points(pushed, self.base_arc.manifold)
        return self._arcs[k]

    def level(self, k: int) -> TubularFrame:
        if self.invariant:
            return self.base
        if k not in self._levels:
            self._levels[k] = build_tubular_frame(self.f, self.arc(k), self.rates, self.closed, self.samples)
        return self._levels[k]


# ==============================================================================
# GRAPH SECTIONS
# ==============================================================================


@dataclass
class GraphSection:
    """
    Scalar offsets over a strip grid. For a cu strip the grid runs over
    (t, a) and values are stable offsets b; for a cs strip over (t, b) with
    unstable offsets a.
    """

    kind: str
    frame: TubularFrame
    t_grid: np.ndarray
    base_grid: np.ndarray
    values: np.ndarray
    iteration: int = 0
    history: List[float] = field(default_factory=list)

    def nodes(self) -> np.ndarray:
        t = np.repeat(self.t_grid[:, None], len(self.base_grid), axis=1)
        base = np.broadcast_to(self.base_grid, t.shape)
        if self.kind == "cu":
            return self.frame.point(t, base, self.values)
        return self.frame.point(t, self.values, base)

    def distance(self, other: "GraphSection") -> float:
        return float(np.max(np.abs(self.values - other.values)))

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def with_values(self, values: np.ndarray, frame: Optional[TubularFrame] = None) -> "GraphSection":
        return GraphSection(self.kind, frame or self.frame, self.t_grid, self.base_grid, values, self.iteration, list(self.history))

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "shape": list(self.values.shape), "iteration": self.iteration, "sup": self.sup()}


def zero_section(
    frame: TubularFrame,
    kind: str,
    rates: RateReport,
    center_samples: Optional[int] = None,
    transverse_samples: Optional[int] = None,
    phase: float = 0.0,
) -> GraphSection:
    """xi^0: the flat strip of half-width delta3 over the frame."""
    if kind not in STRIP_KINDS:
        raise InvalidInputError(f"Unknown strip kind '{kind}'. Options: {STRIP_KINDS}")
    M = config.CENTER_SAMPLES if center_samples is None else int(center_samples)
    K = config.TRANSVERSE_SAMPLES if transverse_samples is None else int(transverse_samples)
    if frame.closed:
        t_grid = frame.start + frame.length * (np.arange(M) + phase) / M
    else:
        t_grid = np.linspace(frame.start, frame.start + frame.length, M)
    base_grid = np.linspace(-rates.delta3, rates.delta3, K)
    return GraphSection(kind, frame, t_grid, base_grid, np.zeros((M, K)))


def _regrid(section: GraphSection, target: TubularFrame, t_img, base_img, val_img) -> np.ndarray:
    """
    Two-stage linear interpolation onto the canonical grid: along the
    transverse coordinate within each image row, then along t per column.
    """
    base_grid, t_grid = section.base_grid, section.t_grid
    cell_b = base_grid[1] - base_grid[0]
    M, K = val_img.shape

    stage_t = np.empty((M, K))
    stage_v = np.empty((M, K))
    for i in range(M):
        order = np.argsort(base_img[i])
        b_row = base_img[i][order]
        if b_row[0] > base_grid[0] + cell_b or b_row[-1] < base_grid[-1] - cell_b:
            raise TransformStepError(
                f"Image row {i} does not cover the transverse grid (needs extrapolation beyond one cell).",
                witness={"row": i, "range": [float(b_row[0]), float(b_row[-1])]},
            )
        stage_t[i] = np.interp(base_grid, b_row, t_img[i][order])
        stage_v[i] = np.interp(base_grid, b_row, val_img[i][order])

    out = np.empty((len(t_grid), K))
    if target.closed:
        for j in range(K):
            out[:, j] = np.interp(t_grid, stage_t[:, j], stage_v[:, j], period=target.length)
        return out

    cell_t = t_grid[1] - t_grid[0] if len(t_grid) > 1 else 0.0
    for j in range(K):
        order = np.argsort(stage_t[:, j])
        ts = stage_t[order, j]
        if ts[0] > t_grid[0] + cell_t or ts[-1] < t_grid[-1] - cell_t:
            raise TransformStepError(
                f"Image column {j} does not cover the centre grid (needs extrapolation beyond one cell).",
                witness={"column": j, "range": [float(ts[0]), float(ts[-1])]},
            )
        out[:, j] = np.interp(t_grid, ts, stage_v[order, j])
    return out


def transform_step(
    xi: GraphSection,
    g: DynamicalSystem,
    target: TubularFrame,
    rates: RateReport,
    check: bool = True,
) -> GraphSection:
    """
    g xi: push each node by g (g^-1 for cs strips), read its tube
    coordinates in the target tube, drop the stable (resp. unstable)
    coordinate as the projection, and re-interpolate onto the grid.
    """
    nodes = xi.nodes().reshape(-1, 3)
    images = g.forward(nodes) if xi.kind == "cu" else g.inverse(nodes)
    t0 = np.repeat(xi.t_grid, len(xi.base_grid))
    t_img, a_img, b_img = target.coords(images, t0=t0)

    shape = xi.values.shape
    t_img = t_img.reshape(shape)
    if target.closed:
        # unwrap each row against its source parameter
        t_img = t0.reshape(shape) + (np.mod(t_img - t0.reshape(shape) + 0.5 * target.length, target.length) - 0.5 * target.length)
    base_img, val_img = (a_img, b_img) if xi.kind == "cu" else (b_img, a_img)
    base_img, val_img = base_img.reshape(shape), val_img.reshape(shape)

    new_values = _regrid(xi, target, t_img, base_img, val_img)
    if np.max(np.abs(new_values)) > rates.delta2:
        i, j = np.unravel_index(int(np.argmax(np.abs(new_values))), shape)
        raise TransformStepError(
            f"Projected offset {new_values[i, j]:.3e} leaves the delta2 = {rates.delta2:.3e} tube.",
            witness={"node": [int(i), int(j)]},
        )

    if check:
        bound = (1.0 + config.GEOMETRIC_SLACK) * (2.0 * rates.delta_prime + rates.lam * xi.sup()) + config.GRAPH_TOL
        if np.max(np.abs(new_values)) > bound:
            raise ModelViolationError(
                f"Step moved the section to {np.max(np.abs(new_values)):.3e} > 2 delta' + lambda |xi| = {bound:.3e}; lambda or delta' mis-estimated."
            )

    out = xi.with_values(new_values, frame=target)
    out.iteration = xi.iteration + 1
    return out


# ==============================================================================
# FIXED POINT
# ==============================================================================


def _push_from(chain: FrameChain, kind: str, g: DynamicalSystem, rates: RateReport, level: int, depth: int, template: GraphSection) -> GraphSection:
    """Zero section at level -/+depth pushed `depth` steps to `level`."""
    sign = -1 if kind == "cu" else 1
    xi = zero_section(chain.level(level + sign * depth), kind, rates, len(template.t_grid), len(template.base_grid))
    xi.t_grid = template.t_grid
    for k in range(depth, 0, -1):
        xi = transform_step(xi, g, chain.level(level + sign * (k - 1)), rates)
    return xi


def convergence_certificate(history: List[float], rates: RateReport, total: float, fixed_point_residual: float) -> Dict[str, Any]:
    slack = 1.0 + config.GEOMETRIC_SLACK
    envelope = [2.0 * rates.delta_prime * rates.lam**n for n in range(len(history))]
    dominated = all(h <= slack * e + config.GRAPH_TOL for h, e in zip(history, envelope))
    total_bound = 2.0 * rates.delta_prime / (1.0 - rates.lam)
    total_ok = total <= slack * total_bound + config.GRAPH_TOL and total_bound < rates.delta3 / 2.0
    return {
        "delta_prime": rates.delta_prime,
        "lambda": rates.lam,
        "history": [float(h) for h in history],
        "bound_ok": bool(dominated and total_ok),
        "fixed_point_residual": float(fixed_point_residual),
        "total_distance": float(total),
        "total_bound": float(total_bound),
    }


def iterate_to_fixed_point(
    xi0: GraphSection,
    chain: FrameChain,
    g: DynamicalSystem,
    rates: RateReport,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
    level: int = 0,
) -> Tuple[GraphSection, Dict[str, Any]]:
    """
    Iterate the graph transform until successive sections differ by < tol.
    On an invariant leaf this is plain iteration; otherwise the n-th iterate
    is the zero section of f^-n L (f^n L for cs) carried n steps forward.
    """
    TOL = config.GRAPH_TOL if tol is None else tol
    MAX_ITER = config.GRAPH_MAX_ITER if max_iter is None else max_iter
    if TOL <= 0:
        raise InvalidInputError("Fixed-point tolerance must be positive.")

    log_check(f"Graph transform ({xi0.kind} strip)", f"delta' = {rates.delta_prime:.3e}, lambda = {rates.lam:.4f}")
    history: List[float] = []
    current = xi0
    bar = tqdm(range(1, MAX_ITER + 1), desc=f"graph transform {xi0.kind}", disable=not config.PROGRESS_BARS)
    for n in bar:
        if chain.invariant:
            nxt = transform_step(current, g, chain.level(level), rates)
        else:
            nxt = _push_from(chain, xi0.kind, g, rates, level, n, xi0)
        step = nxt.distance(current)
        history.append(step)
        current = nxt
        current.history = list(history)
        if step < TOL:
            break
    else:
        raise ConvergenceError(f"Graph transform did not converge in {MAX_ITER} iterations (last step {history[-1]:.3e}).")

    if chain.invariant:
        residual = transform_step(current, g, chain.level(level), rates).distance(current)
    else:
        residual = history[-1]
    certificate = convergence_certificate(history, rates, current.distance(xi0), residual)

    slack = 1.0 + config.GEOMETRIC_SLACK
    for n, h in enumerate(history):
        if h > slack * 2.0 * rates.delta_prime * rates.lam**n + config.GRAPH_TOL:
            raise ModelViolationError(
                f"Convergence history {h:.3e} at step {n} exceeds 2 delta' lambda^n by more than {config.GEOMETRIC_SLACK:.0%}.",
                witness=certificate,
            )
    log_verdict("graph transform", "pass" if certificate["bound_ok"] else "fail", {"iterations": len(history), "residual": residual})
    return current, certificate


# ==============================================================================
# CONTINUATION
# ==============================================================================


def _fiber_intersection(cu: GraphSection, cs: GraphSection) -> Tuple[np.ndarray, np.ndarray]:
    """Per centre parameter: a = xi_cs(t, b), b = xi_cu(t, a), by brentq on a."""
    lo, hi = cu.base_grid[0], cu.base_grid[-1]
    a_out = np.empty(len(cu.t_grid))
    b_out = np.empty(len(cu.t_grid))
    for i in range(len(cu.t_grid)):
        row_cu, row_cs = cu.values[i], cs.values[i]

        def gap(a):
            b = np.interp(a, cu.base_grid, row_cu)
            return a - np.interp(b, cs.base_grid, row_cs)

        a_out[i] = brentq(gap, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        b_out[i] = np.interp(a_out[i], cu.base_grid, row_cu)
    return a_out, b_out


def _limit_sections(chain: FrameChain, g: DynamicalSystem, rates: RateReport, level: int, tol, center_samples, transverse_samples, phase):
    frame = chain.level(level)
    results = {}
    for kind in STRIP_KINDS:
        xi0 = zero_section(frame, kind, rates, center_samples, transverse_samples, phase)
        results[kind] = iterate_to_fixed_point(xi0, chain, g, rates, tol, level=level)
    return results


def continuation_leaf(
    f: DynamicalSystem,
    g: DynamicalSystem,
    L: LeafArc,
    rates: RateReport,
    tol: Optional[float] = None,
    center_samples: Optional[int] = None,
    transverse_samples: Optional[int] = None,
    phase: float = 0.0,
    chain: Optional[FrameChain] = None,
    level: int = 0,
    check_equivariance: bool = True,
) -> Tuple[LeafArc, Dict[str, Any]]:
    """
    L': the fibrewise intersection of the converged cu strip (iterated by g)
    and cs strip (iterated by g^-1), with its tangency to E^c_g and the
    equivariance g L' = (f L)'.
    """
    if not rates.accepted:
        raise ModelViolationError("The pair (f, g) is not accepted by the scale cascade at this delta.", witness=rates.to_dict())
    chain = FrameChain(f, L, rates) if chain is None else chain
    frame = chain.level(level)
    sections = _limit_sections(chain, g, rates, level, tol, center_samples, transverse_samples, phase)
    (cu, cu_cert), (cs, cs_cert) = sections["cu"], sections["cs"]

    a, b = _fiber_intersection(cu, cs)
    t = cu.t_grid
    points = frame.point(t, a, b)
    ends = np.vstack([points, points[:1]]) if frame.closed else points
    chords = displacement(ends[:-1], ends[1:], f.manifold)
    tangents = unit(chords) if frame.closed else unit(np.vstack([chords, chords[-1:]]))
    prime = LeafArc("c", points, tangents, t.copy(), f.manifold)

    # chords against E^c_g at their midpoints
    mids = normalize_coords(ends[:-1] + 0.5 * chords, f.manifold)[0]
    e_c = estimate_splitting(g, points=mids, strict=False).e_c
    tangency = float(np.max(line_angle(chords, e_c)))
    threshold = config.TANGENCY_FACTOR * config.ANGLE_TOL

    report: Dict[str, Any] = {
        "cu": cu_cert,
        "cs": cs_cert,
        "tangency_max_angle": tangency,
        "tangency_ok": tangency < threshold,
        "hausdorff_to_L": hausdorff_distance(points, frame.base_points(t), manifold=f.manifold),
        "max_offset": float(np.max(np.hypot(a, b))),
        "samples": len(t),
    }
    if tangency >= threshold:
        raise TangencyError(f"L' chords deviate from E^c_g by {tangency:.3e} >= {threshold:.1e}.", witness=report)

    if check_equivariance:
        image = g.forward(points)
        if chain.invariant:
            target = points
        else:
            target_arc, _ = continuation_leaf(
                f, g, L, rates, tol, center_samples, transverse_samples, phase, chain, level + 1, check_equivariance=False
            )
            target = target_arc.points
        report["equivariance"] = hausdorff_distance(image, target, manifold=f.manifold)
        report["equivariance_ok"] = report["equivariance"] < rates.delta

    log_verdict("continuation leaf", "pass", {"tangency": tangency, "hausdorff(L, L')": report["hausdorff_to_L"]})
    return prime, report


def continue_immersion(
    f: DynamicalSystem,
    g: DynamicalSystem,
    eta: LeafArc,
    rates: RateReport,
    budget: int = 2,
    tol: Optional[float] = None,
    center_samples: Optional[int] = None,
    transverse_samples: Optional[int] = None,
    phase: float = 0.0,
) -> Dict[str, Any]:
    """
    gamma_n for |n| <= budget over the window of eta, with
    d(f^n eta(t), gamma_n(t)) < delta and gamma_{n+1} = g gamma_n up to
    reparameterization, both checked on interior samples. Each iterate trims
    kappa^|n| delta of parameter from either end of open windows.
    """
    if budget < 0:
        raise InvalidInputError("Iterate budget must be nonnegative.")
    chain = FrameChain(f, eta, rates)
    gammas: Dict[int, LeafArc] = {}
    offsets: Dict[int, float] = {}
    for n in range(-budget, budget + 1):
        gamma, report = continuation_leaf(
            f, g, eta, rates, tol, center_samples, transverse_samples, phase, chain, level=n, check_equivariance=False
        )
        gammas[n] = gamma
        offsets[n] = report["max_offset"]

    equivariance = {}
    for n in range(-budget, budget):
        a, b = gammas[n], gammas[n + 1]
        keep = _interior(a, rates, abs(n) + 1, chain.closed)
        if not np.any(keep):
            equivariance[n] = 0.0
            continue
        # directed: gamma_{n+1} extends past the trimmed image
        image = g.forward(a.points[keep])
        equivariance[n] = float(np.max(np.min(dist_coords(image[:, None, :], b.points[None, :, :], f.manifold), axis=1)))

    report = {
        "budget": budget,
        "max_offset": offsets,
        "offset_ok": all(v < rates.delta for v in offsets.values()),
        "equivariance": equivariance,
        "equivariance_ok": all(v < rates.delta for v in equivariance.values()),
    }
    return {"gammas": gammas, "report": report}


def _interior(arc: LeafArc, rates: RateReport, n: int, closed: bool) -> np.ndarray:
    if closed:
        return np.ones(len(arc), dtype=bool)
    trim = min(rates.kappa**n * rates.delta, 0.45 * arc.span)
    return (arc.params >= arc.params[0] + trim) & (arc.params <= arc.params[-1] - trim)
