# daf_numerics/analytics/leaf_numerics.py

from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.interpolate import CubicSpline, RectBivariateSpline
from scipy.optimize import brentq

from .. import config
from ..manifolds.chart_space import (
    ChartPoint,
    ManifoldDescriptor,
    displacement,
    dist_coords,
    glue_vectors,
    normalize_coords,
)
from ..manifolds.system_zoo import DynamicalSystem
from ..utils.artifact_io import leaf_arc_frame, write_csv
from ..utils.errors import (
    AmbiguousIntersectionError,
    HolonomyError,
    IntegrationError,
    IntersectionError,
    InvalidInputError,
    NoIntersectionError,
)
from ..utils.grid_utils import orient_like, unit
from .cone_hyperbolicity import estimate_splitting

BUNDLE_TAGS = ("s", "c", "u")


# ==============================================================================
# LINE FIELDS
# ==============================================================================


class LineField:
    """
    Unit line field of one invariant bundle, re-derived at every query by
    power iteration along the orbit of the query point.

    Calling the field with raw (possibly out-of-domain) chart coordinates
    returns vectors expressed in that same raw chart; ``previous`` carries
    the orientation.
    """

    def __init__(self, system: DynamicalSystem, tag: str, iterations: Optional[int] = None, tol: Optional[float] = None):
        if tag not in BUNDLE_TAGS:
            raise InvalidInputError(f"Unknown bundle tag '{tag}'. Options: {BUNDLE_TAGS}")
        self.system = system
        self.tag = tag
        self.iterations = iterations
        self.tol = tol
        self.manifold = system.manifold

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        split = estimate_splitting(self.system, points=points, n=self.iterations, strict=False)
        vectors = split.bundle(self.tag)
        if self.tol is not None:
            bad = split.residuals[self.tag] > self.tol
            vectors = np.where(bad[:, None], np.nan, vectors)
        return vectors

    def __call__(self, raw_points: np.ndarray, previous: Optional[np.ndarray] = None) -> np.ndarray:
        raw_points = np.asarray(raw_points, dtype=float).reshape(-1, 3)
        points, shifts = normalize_coords(raw_points, self.manifold)
        vectors = unit(glue_vectors(self.evaluate(points), -shifts, self.manifold))
        if previous is None:
            return vectors

        previous = np.asarray(previous, dtype=float).reshape(-1, 3)
        cos = np.sum(vectors * unit(previous), axis=-1)
        carried = np.isfinite(cos) & (np.linalg.norm(previous, axis=-1) > 0.0)
        turned = carried & (np.abs(cos) < config.TANGENT_TURN_LIMIT)
        if np.any(turned):
            idx = int(np.argmax(turned))
            raise IntegrationError(
                f"E^{self.tag} tangent left its cone (|cos| = {abs(cos[idx]):.3f} between steps).",
                witness=points[idx].tolist(),
            )
        return vectors * np.where(cos < 0.0, -1.0, 1.0)[:, None]


class ConstantLineField(LineField):
    """A fixed direction everywhere; used for linear leaves and as a test double."""

    def __init__(self, direction: Sequence[float], manifold: ManifoldDescriptor, tag: str = "c"):
        if tag not in BUNDLE_TAGS:
            raise InvalidInputError(f"Unknown bundle tag '{tag}'. Options: {BUNDLE_TAGS}")
        direction = np.asarray(direction, dtype=float)
        if direction.shape != (3,) or np.linalg.norm(direction) == 0.0:
            raise InvalidInputError("A constant line field needs a nonzero 3-vector.")
        self.system = None
        self.tag = tag
        self.iterations = None
        self.tol = None
        self.manifold = manifold
        self.direction = unit(direction)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        return np.broadcast_to(self.direction, np.shape(points)).copy()


def leaf_fields(f: DynamicalSystem, iterations: Optional[int] = None) -> Dict[str, LineField]:
    return {tag: LineField(f, tag, iterations) for tag in BUNDLE_TAGS}


# ==============================================================================
# RK4 TRACING
# ==============================================================================


def _rk4_step(line_field: LineField, p: np.ndarray, k1: np.ndarray, h) -> Tuple[np.ndarray, np.ndarray]:
    # points whose field is undefined stay frozen with a NaN tangent
    h = np.reshape(np.asarray(h, dtype=float), (-1, 1))
    bad = ~np.all(np.isfinite(k1), axis=-1)
    k1 = np.nan_to_num(k1)
    stages = [k1]
    for frac in (0.5, 0.5, 1.0):
        k = line_field(p + frac * h * stages[-1], stages[-1])
        bad |= ~np.all(np.isfinite(k), axis=-1)
        stages.append(np.nan_to_num(k))
    k1, k2, k3, k4 = stages
    raw = p + np.where(bad[:, None], 0.0, h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
    tangent = line_field(raw, k4)
    tangent[bad] = np.nan
    points, shifts = normalize_coords(raw, line_field.manifold)
    return points, glue_vectors(tangent, shifts, line_field.manifold)


def trace(line_field: LineField, starts: np.ndarray, directions: np.ndarray, h: float, steps: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Batched RK4 along the oriented field.

    Returns:
        Tuple: points and tangents, each of shape (steps + 1, K, 3).
    """
    p = np.asarray(starts, dtype=float).reshape(-1, 3)
    t = line_field(p, np.asarray(directions, dtype=float).reshape(-1, 3))
    points, tangents = [p], [t]
    for _ in range(int(steps)):
        p, t = _rk4_step(line_field, p, t, h)
        points.append(p)
        tangents.append(t)
    return np.stack(points), np.stack(tangents)


def advance(line_field: LineField, starts: np.ndarray, directions: np.ndarray, lengths) -> Tuple[np.ndarray, np.ndarray]:
    """Move each start a signed arc length along the field; sub-steps never exceed half the default step."""
    starts = np.asarray(starts, dtype=float).reshape(-1, 3)
    lengths = np.broadcast_to(np.asarray(lengths, dtype=float), (len(starts),))
    sign = np.where(lengths < 0.0, -1.0, 1.0)[:, None]
    substeps = max(1, int(np.ceil(np.max(np.abs(lengths)) / (0.5 * config.LEAF_STEP))))
    p = starts
    t = line_field(p, sign * np.asarray(directions, dtype=float).reshape(-1, 3))
    for _ in range(substeps):
        p, t = _rk4_step(line_field, p, t, np.abs(lengths) / substeps)
    return p, t * sign


# ==============================================================================
# LEAF ARCS
# ==============================================================================


@dataclass
class LeafArc:
    tag: str
    points: np.ndarray
    tangents: np.ndarray
    params: np.ndarray
    manifold: ManifoldDescriptor
    orientation: int = 1
    truncated: bool = False
    residuals: Optional[np.ndarray] = None
    line_field: Optional[LineField] = field(default=None, repr=False, compare=False)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def chord_lengths(self) -> np.ndarray:
        return dist_coords(self.points[:-1], self.points[1:], self.manifold)

    @property
    def length(self) -> float:
        return float(np.sum(self.chord_lengths))

    @property
    def span(self) -> float:
        return float(self.params[-1] - self.params[0])

    def unwrapped(self) -> np.ndarray:
        """Continuous lift of the samples, starting at points[0]."""
        steps = displacement(self.points[:-1], self.points[1:], self.manifold)
        return self.points[0] + np.vstack([np.zeros(3), np.cumsum(steps, axis=0)])

    def spline(self) -> CubicSpline:
        return CubicSpline(self.params, self.unwrapped(), axis=0)

    def position(self, t) -> np.ndarray:
        return normalize_coords(self.spline()(np.asarray(t, dtype=float)), self.manifold)[0]

    def reversed(self) -> "LeafArc":
        return LeafArc(
            self.tag,
            self.points[::-1].copy(),
            -self.tangents[::-1],
            -self.params[::-1],
            self.manifold,
            -self.orientation,
            self.truncated,
            None if self.residuals is None else self.residuals[::-1].copy(),
            self.line_field,
        )

    def to_frame(self) -> pd.DataFrame:
        return leaf_arc_frame(self.params, self.points, self.tangents)

    def write_csv(self, path) -> Any:
        return write_csv(path, self.to_frame())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "tag": self.tag,
            "samples": len(self.points),
            "length": self.length,
            "orientation": self.orientation,
            "truncated": bool(self.truncated),
        }

    @classmethod
    def segment(cls, start, direction, halflength: float, manifold: ManifoldDescriptor, samples: int = 11, tag: str = "u") -> "LeafArc":
        """A straight arc through ``start``; a stand-in for a leaf when only a chord is needed."""
        direction = unit(np.asarray(direction, dtype=float))
        params = np.linspace(-halflength, halflength, samples)
        points = normalize_coords(np.asarray(start, dtype=float) + params[:, None] * direction, manifold)[0]
        tangents = np.broadcast_to(direction, points.shape).copy()
        return cls(tag, points, tangents, params, manifold, line_field=ConstantLineField(direction, manifold, tag))


def _check_step(halflength: float, step: Optional[float]) -> Tuple[int, float]:
    STEP = config.LEAF_STEP if step is None else float(step)
    if not (halflength > 0 and np.isfinite(halflength)):
        raise InvalidInputError("Leaf halflength must be positive.")
    if STEP > config.LEAF_H_MAX * (1.0 + 1e-12):
        raise InvalidInputError(f"Leaf step {STEP:g} exceeds h_max = {config.LEAF_H_MAX:g}.")
    steps = int(np.ceil(halflength / STEP - 1e-9))
    h = halflength / steps
    if h < config.LEAF_H_MIN * (1.0 - 1e-12):
        raise InvalidInputError(f"Leaf step {h:g} is below h_min = {config.LEAF_H_MIN:g}.")
    return steps, h


def _first_invalid(points: np.ndarray, tangents: np.ndarray) -> Optional[int]:
    bad = ~(np.all(np.isfinite(points), axis=-1) & np.all(np.isfinite(tangents), axis=-1))
    return int(np.argmax(bad)) if np.any(bad) else None


def integrate_leaf(
    line_field: LineField,
    x: Union[ChartPoint, np.ndarray],
    halflength: float,
    step: Optional[float] = None,
    orientation: int = 1,
) -> LeafArc:
    """
    Leaf arc of total length 2 * halflength centred at x.

    Both half-arcs are traced together so the two branches use the same
    field evaluations. A non-finite field value (chart validity lost)
    truncates the arc and sets ``truncated``.
    """
    steps, h = _check_step(halflength, step)
    x = normalize_coords(x.array if isinstance(x, ChartPoint) else np.asarray(x, dtype=float), line_field.manifold)[0]
    v0 = line_field(x[None, :])[0] * (1.0 if orientation >= 0 else -1.0)
    if not np.all(np.isfinite(v0)):
        raise IntegrationError("Line field undefined at the start point.", witness=x.tolist())

    pts, tans = trace(line_field, np.stack([x, x]), np.stack([v0, -v0]), h, steps)
    truncated = False
    branches = []
    for k in range(2):
        branch_pts, branch_tans = pts[:, k], tans[:, k]
        cut = _first_invalid(branch_pts, branch_tans)
        if cut is not None:
            truncated = True
            branch_pts, branch_tans = branch_pts[:cut], branch_tans[:cut]
        branches.append((branch_pts, branch_tans))

    (fwd_p, fwd_t), (back_p, back_t) = branches
    points = np.vstack([back_p[::-1][:-1], fwd_p])
    tangents = np.vstack([-back_t[::-1][:-1], fwd_t])
    params = h * np.arange(-(len(back_p) - 1), len(fwd_p), dtype=float)
    return LeafArc(line_field.tag, points, tangents, params, line_field.manifold, 1 if orientation >= 0 else -1, truncated, None, line_field)


# ==============================================================================
# PLAQUES & INTERSECTIONS
# ==============================================================================


class Plaque:
    """
    A 2-D local plaque sampled on a (u, v) parameter grid, stored as
    displacements from ``base`` and interpolated with bicubic splines.
    """

    def __init__(self, base, u: np.ndarray, v: np.ndarray, offsets: np.ndarray, manifold: ManifoldDescriptor):
        self.base = np.asarray(base, dtype=float)
        self.u = np.asarray(u, dtype=float)
        self.v = np.asarray(v, dtype=float)
        self.offsets = np.asarray(offsets, dtype=float)
        self.manifold = manifold
        if self.offsets.shape != (len(self.u), len(self.v), 3) or len(self.u) < 2 or len(self.v) < 2:
            raise InvalidInputError("Plaque samples must form a (J, K, 3) grid with J, K >= 2.")
        kx, ky = min(3, len(self.u) - 1), min(3, len(self.v) - 1)
        self._splines = [RectBivariateSpline(self.u, self.v, self.offsets[..., i], kx=kx, ky=ky) for i in range(3)]

    @classmethod
    def flat(cls, base, directions, radius: float, manifold: ManifoldDescriptor, samples: Optional[int] = None) -> "Plaque":
        n = config.TRANSVERSAL_SAMPLES if samples is None else samples
        a, b = np.asarray(directions, dtype=float)
        grid = np.linspace(-radius, radius, n)
        offsets = grid[:, None, None] * a + grid[None, :, None] * b
        return cls(base, grid, grid, offsets, manifold)

    @classmethod
    def from_samples(cls, base, u, v, points: np.ndarray, manifold: ManifoldDescriptor) -> "Plaque":
        points = np.asarray(points, dtype=float)
        offsets = displacement(np.asarray(base, dtype=float), points, manifold)
        return cls(base, u, v, offsets, manifold)

    def offset_at(self, u, v, du: int = 0, dv: int = 0) -> np.ndarray:
        return np.stack([s.ev(u, v, dx=du, dy=dv) for s in self._splines], axis=-1)

    def position(self, u, v) -> np.ndarray:
        return normalize_coords(self.base + self.offset_at(u, v), self.manifold)[0]

    def inside(self, u, v, slack: float = 1e-12) -> np.ndarray:
        return (
            (u >= self.u[0] - slack) & (u <= self.u[-1] + slack) & (v >= self.v[0] - slack) & (v <= self.v[-1] + slack)
        )

    def project(self, z: np.ndarray, iterations: int = 12) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Foot parameters (u, v) of each point and its signed offset along the plaque normal."""
        z = np.asarray(z, dtype=float).reshape(-1, 3)
        d = displacement(self.base, z, self.manifold)
        flat = self.offsets.reshape(-1, 3)
        nearest = np.argmin(np.linalg.norm(d[:, None, :] - flat[None, :, :], axis=-1), axis=1)
        u = self.u[nearest // len(self.v)].copy()
        v = self.v[nearest % len(self.v)].copy()
        for _ in range(iterations):
            r = d - self.offset_at(u, v)
            J = np.stack([self.offset_at(u, v, du=1), self.offset_at(u, v, dv=1)], axis=-1)
            step = np.linalg.solve(np.swapaxes(J, -1, -2) @ J, (np.swapaxes(J, -1, -2) @ r[..., None]))[..., 0]
            u, v = u + step[:, 0], v + step[:, 1]
        r = d - self.offset_at(u, v)
        normal = unit(np.cross(self.offset_at(u, v, du=1), self.offset_at(u, v, dv=1)))
        return u, v, np.sum(r * normal, axis=-1)


def _arc_point(arc: LeafArc, i: int, s: float) -> np.ndarray:
    if arc.line_field is not None:
        return advance(arc.line_field, arc.points[i], arc.tangents[i], s)[0][0]
    chord = displacement(arc.points[i], arc.points[i + 1], arc.manifold)
    gap = arc.params[i + 1] - arc.params[i]
    return normalize_coords(arc.points[i] + (s / gap) * chord, arc.manifold)[0]


def intersect_arc_plaque(arc: LeafArc, plaque: Plaque, tol: Optional[float] = None) -> Dict[str, Any]:
    """
    Unique crossing of an arc with a plaque, by brentq on the signed offset
    between the two bracketing samples. Returns coordinates, arc parameter,
    plaque parameters and the residual.
    """
    TOL = config.INTERSECTION_TOL if tol is None else tol
    u, v, off = plaque.project(arc.points)
    inside = plaque.inside(u, v)
    zero = inside & (np.abs(off) <= TOL)
    # a bracket touching a zero sample is the same crossing
    crossing = inside[:-1] & inside[1:] & ~zero[:-1] & ~zero[1:] & (np.sign(off[:-1]) * np.sign(off[1:]) < 0)

    hits = [("sample", int(i)) for i in np.flatnonzero(zero)]
    hits += [("bracket", int(i)) for i in np.flatnonzero(crossing)]
    if not hits:
        raise NoIntersectionError("Arc and plaque do not cross within the sampled window.")
    if len(hits) > 1:
        raise AmbiguousIntersectionError(
            f"Arc crosses the plaque {len(hits)} times; the objects are further apart than the local scale.",
            witness=[arc.points[i].tolist() for _, i in hits],
        )

    kind, i = hits[0]
    if kind == "sample":
        point, t = arc.points[i], float(arc.params[i])
    else:
        gap = float(arc.params[i + 1] - arc.params[i])
        s = brentq(lambda s: float(plaque.project(_arc_point(arc, i, s))[2][0]), 0.0, gap, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        point, t = _arc_point(arc, i, s), float(arc.params[i] + s)

    pu, pv, residual = plaque.project(point)
    residual = float(abs(residual[0]))
    if residual > TOL:
        raise IntersectionError(f"Intersection residual {residual:.3e} exceeds {TOL:.1e}.", witness=point.tolist())
    return {"coords": point, "t": t, "u": float(pu[0]), "v": float(pv[0]), "residual": residual}


def local_intersection(arc: LeafArc, plaque: Plaque, tol: Optional[float] = None) -> ChartPoint:
    result = intersect_arc_plaque(arc, plaque, tol)
    return ChartPoint(tuple(float(c) for c in result["coords"]), plaque.manifold)


# ==============================================================================
# HOLONOMY
# ==============================================================================


def holonomy_transport(
    center_field: LineField,
    gamma: LeafArc,
    z: np.ndarray,
    delta: Optional[float] = None,
    stride: int = 1,
    newton_steps: int = 3,
) -> np.ndarray:
    """
    Centre holonomy along gamma: each companion point is moved along its own
    centre leaf onto the transversal plane of the next gamma sample.
    """
    DELTA = config.DELTA_CAP if delta is None else delta
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    current = normalize_coords(z.reshape(-1, 3), gamma.manifold)[0]
    m = gamma.manifold

    idx = np.arange(0, len(gamma), max(1, int(stride)))
    if idx[-1] != len(gamma) - 1:
        idx = np.append(idx, len(gamma) - 1)

    if np.any(dist_coords(current, gamma.points[0], m) > DELTA):
        raise HolonomyError("Transported point starts outside the holonomy radius.", witness=current.tolist())

    direction = np.broadcast_to(gamma.tangents[0], current.shape).copy()
    for i in idx[1:]:
        target, normal = gamma.points[i], unit(gamma.tangents[i])
        s = displacement(current, target, m) @ normal
        for _ in range(newton_steps):
            moved, tangent = advance(center_field, current, direction, s)
            gap = displacement(target, moved, m) @ normal
            s = s - gap / (tangent @ normal)
        current, tangent = advance(center_field, current, direction, s)
        direction = orient_like(tangent, normal)
        off = dist_coords(current, target, m)
        if np.any(off > DELTA):
            raise HolonomyError(
                f"Companion curve left the {DELTA:g}-tube at parameter {gamma.params[i]:.4f}.",
                witness=current[int(np.argmax(off))].tolist(),
            )
    return current[0] if single else current


def hsu_transport(
    fields: Dict[str, LineField],
    x,
    y,
    eta: LeafArc,
    delta: Optional[float] = None,
    step: Optional[float] = None,
) -> LeafArc:
    """
    Carry a centre arc eta at y to the centre leaf of x: each eta sample
    follows its unstable arc to the centre-stable plaque of x, and the foot
    of that crossing on W^c(x) is the transported sample.
    """
    DELTA = config.DELTA_CAP if delta is None else delta
    m = eta.manifold
    x = normalize_coords(x.array if isinstance(x, ChartPoint) else np.asarray(x, dtype=float), m)[0]

    center_half = float(np.max(np.abs(eta.params))) + 2.0 * DELTA
    center = integrate_leaf(fields["c"], x, center_half, step)

    stable_steps, h_s = _check_step(DELTA, step)
    e_s = fields["s"](center.points)
    e_s = orient_like(e_s, e_s[len(e_s) // 2])
    ahead, _ = trace(fields["s"], center.points, e_s, h_s, stable_steps)
    behind, _ = trace(fields["s"], center.points, -e_s, h_s, stable_steps)
    grid = np.concatenate([behind[::-1][:-1], ahead], axis=0).swapaxes(0, 1)
    v_params = h_s * np.arange(-stable_steps, stable_steps + 1, dtype=float)
    plaque = Plaque.from_samples(x, center.params, v_params, grid, m)

    unstable_steps, h_u = _check_step(DELTA, step)
    e_u = fields["u"](eta.points)
    fwd_u, fwd_ut = trace(fields["u"], eta.points, e_u, h_u, unstable_steps)
    back_u, back_ut = trace(fields["u"], eta.points, -e_u, h_u, unstable_steps)
    u_params = h_u * np.arange(-unstable_steps, unstable_steps + 1, dtype=float)

    feet, residuals = [], []
    for i in range(len(eta)):
        pts = np.vstack([back_u[::-1, i][:-1], fwd_u[:, i]])
        tans = np.vstack([-back_ut[::-1, i][:-1], fwd_ut[:, i]])
        arc = LeafArc("u", pts, tans, u_params, m, line_field=fields["u"])
        try:
            hit = intersect_arc_plaque(arc, plaque)
        except IntersectionError as exc:
            raise type(exc)(f"su-transport failed at sample {i}: {exc}", witness={"index": i, "point": eta.points[i].tolist()}) from exc
        feet.append(plaque.position(hit["u"], 0.0))
        residuals.append(hit["residual"])

    feet = np.array(feet).reshape(-1, 3)
    tangents = orient_like(fields["c"](feet), eta.tangents)
    return LeafArc("c", feet, tangents, eta.params.copy(), m, eta.orientation, False, np.array(residuals), fields["c"])
