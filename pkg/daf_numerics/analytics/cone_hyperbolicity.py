# daf_numerics/analytics/cone_hyperbolicity.py

from dataclasses import dataclass, field
from itertools import product
from typing import Any, Callable, Dict, Optional, Tuple

import numpy as np

from .. import config
from ..manifolds.chart_space import dist_coords, normalize_coords, sample_grid
from ..manifolds.system_zoo import DynamicalSystem
from ..utils.color_log import log_check, log_verdict
from ..utils.errors import ConvergenceError, InvalidInputError, ModelViolationError, ScaleNotFoundError
from ..utils.grid_utils import get_worst_cell, line_angle, orient_like, unit

# Fixed generic starting frames for the power iterations; two of them give
# a residual that does not depend on the start.
_FRAME_A = np.array([[0.62, -0.31], [0.47, 0.83], [0.63, 0.12]])
_FRAME_B = np.array([[0.21, 0.88], [-0.69, 0.13], [0.69, -0.45]])
_REFERENCE = np.array([1.0, 0.5, 0.25])
_VERTICAL = np.array([0.0, 0.0, 1.0])
# unit offsets towards the 26 neighbours of a cube: axes, face and body diagonals
NEIGHBOUR_DIRECTIONS = unit(np.array([d for d in product((-1.0, 0.0, 1.0), repeat=3) if any(d)]))


# ==============================================================================
# INVARIANT SPLITTING
# ==============================================================================


@dataclass
class Splitting:
    """Per-point unit vectors e^s, e^c, e^u with the normals of E^cs and E^cu."""

    points: np.ndarray
    e_s: np.ndarray
    e_c: np.ndarray
    e_u: np.ndarray
    n_cs: np.ndarray
    n_cu: np.ndarray
    residuals: Dict[str, np.ndarray]
    iterations: int

    @property
    def max_residual(self) -> float:
        return float(max(np.max(r) for r in self.residuals.values()))

    @property
    def min_angle(self) -> float:
        pairs = [(self.e_s, self.e_c), (self.e_s, self.e_u), (self.e_c, self.e_u)]
        return float(min(np.min(line_angle(a, b)) for a, b in pairs))

    def frame(self) -> np.ndarray:
        """Columns (e^s, e^c, e^u), shape (P, 3, 3)."""
        return np.stack([self.e_s, self.e_c, self.e_u], axis=-1)

    def bundle(self, tag: str) -> np.ndarray:
        return {"s": self.e_s, "c": self.e_c, "u": self.e_u}[tag]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "points": len(self.points),
            "iterations": self.iterations,
            "max_residual": {k: float(np.max(v)) for k, v in self.residuals.items()},
            "min_angle": self.min_angle,
        }


def _push_frames(jacobians, frames: np.ndarray, solve: bool) -> np.ndarray:
    """Apply J (or J^-1) to a stack of 2-frames and re-orthonormalize."""
    image = np.linalg.solve(jacobians, frames) if solve else jacobians @ frames
    q, _ = np.linalg.qr(image)
    return q


def _frame_normals(frames: np.ndarray) -> np.ndarray:
    return unit(np.cross(frames[..., :, 0], frames[..., :, 1]))


def estimate_splitting(
    f: DynamicalSystem,
    grid: Optional[int] = None,
    n: Optional[int] = None,
    points: Optional[np.ndarray] = None,
    strict: bool = True,
    tol: Optional[float] = None,
) -> Splitting:
    """
    Invariant splitting by power iteration along orbits.

    E^cu (and e^u as its leading direction) is the limit of Df^n acting on
    2-frames pulled from f^-n(x); E^cs (and e^s) the limit of Df^-n acting on
    2-frames from f^n(x). e^c spans E^cu & E^cs.
    """
    N_ITER = config.SPLITTING_ITERATIONS if n is None else int(n)
    TOL = config.ANGLE_TOL if tol is None else tol
    if N_ITER < config.MIN_SPLITTING_ITERATIONS:
        raise InvalidInputError(f"Splitting needs at least {config.MIN_SPLITTING_ITERATIONS} iterations.")
    if points is None:
        if grid is None:
            raise InvalidInputError("Give either a grid resolution or explicit points.")
        points = sample_grid(f.manifold, grid)
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    P = len(points)

    backward = [points]
    forward = [points]
    for _ in range(N_ITER):
        backward.append(f.inverse(backward[-1]))
        forward.append(f.forward(forward[-1]))

    cu = [np.broadcast_to(F, (P, 3, 2)).copy() for F in (_FRAME_A, _FRAME_B)]
    cs = [frame.copy() for frame in cu]
    for k in range(N_ITER, 0, -1):
        J_back = f.jacobian(backward[k])  # T_{f^-k x} -> T_{f^-k+1 x}
        J_fwd = f.jacobian(forward[k - 1])  # T_{f^k-1 x} -> T_{f^k x}
        cu = [_push_frames(J_back, frame, solve=False) for frame in cu]
        cs = [_push_frames(J_fwd, frame, solve=True) for frame in cs]

    e_u = [unit(frame[..., :, 0]) for frame in cu]
    e_s = [unit(frame[..., :, 0]) for frame in cs]
    n_cu = [_frame_normals(frame) for frame in cu]
    n_cs = [_frame_normals(frame) for frame in cs]
    e_c = [unit(np.cross(a, b)) for a, b in zip(n_cu, n_cs)]

    residuals = {
        "u": line_angle(e_u[0], e_u[1]),
        "s": line_angle(e_s[0], e_s[1]),
        "c": np.maximum(line_angle(n_cu[0], n_cu[1]), line_angle(n_cs[0], n_cs[1])),
    }

    vertical_ok = np.abs(e_c[0] @ _VERTICAL) > 1e-12
    c_ref = np.where(vertical_ok[:, None], _VERTICAL, _REFERENCE)
    split = Splitting(
        points=points,
        e_s=orient_like(e_s[0], _REFERENCE),
        e_c=orient_like(e_c[0], c_ref),
        e_u=orient_like(e_u[0], _REFERENCE),
        n_cs=n_cs[0],
        n_cu=n_cu[0],
        residuals=residuals,
        iterations=N_ITER,
    )

    if strict and split.max_residual > TOL:
        worst = np.max(np.stack(list(residuals.values())), axis=0)
        value, cell = get_worst_cell(worst, points, find_max=True)
        raise ConvergenceError(
            f"Splitting did not converge: residual {value:.3e} > {TOL:.1e} after {N_ITER} iterations.",
            witness=cell,
        )
    return split


def splitting_invariance(f: DynamicalSystem, split: Splitting) -> Dict[str, float]:
    """Max angle between Df e^sigma(x) and e^sigma(f x) for each bundle."""
    images = estimate_splitting(f, points=f.forward(split.points), n=split.iterations, strict=False)
    J = f.jacobian(split.points)
    return {
        tag: float(np.max(line_angle((J @ split.bundle(tag)[..., None])[..., 0], images.bundle(tag))))
        for tag in ("s", "c", "u")
    }


# ==============================================================================
# CONE FIELDS
# ==============================================================================

FrameFn = Callable[[np.ndarray], np.ndarray]


@dataclass
class ConeField:
    """
    {v : |v_E| >= alpha |v_F|} in the split norms of a per-point basis whose
    first ``dimension`` columns span the core E and the rest span F.
    ``direction`` is "forward" for Df-invariant cones and "backward" for Df^-1-invariant ones.
    """

    frame_fn: FrameFn = field(repr=False)
    alpha: float
    dimension: int = 1
    direction: str = "forward"
    expanding: bool = False
    label: str = ""

    def __post_init__(self):
        if not (self.alpha > 0 and np.isfinite(self.alpha)):
            raise InvalidInputError("Cone opening alpha must be a positive real.")
        if self.dimension not in (1, 2):
            raise InvalidInputError("Cone core dimension must be 1 or 2.")
        if self.direction not in ("forward", "backward"):
            raise InvalidInputError("Cone direction must be 'forward' or 'backward'.")

    @classmethod
    def constant(cls, core, complement, alpha, **kwargs) -> "ConeField":
        basis = np.column_stack([np.atleast_2d(core).reshape(-1, 3).T, np.atleast_2d(complement).reshape(-1, 3).T])
        if abs(np.linalg.det(basis)) < 1e-12:
            raise InvalidInputError("Cone core and complement must span the tangent space.")
        dimension = np.atleast_2d(core).reshape(-1, 3).shape[0]
        return cls(lambda pts: np.broadcast_to(basis, (len(pts), 3, 3)).copy(), alpha, dimension, **kwargs)

    @classmethod
    def from_splitting_fn(cls, f: DynamicalSystem, tag: str, alpha: float, n: Optional[int] = None) -> "ConeField":
        """Cone around e^u (forward, complement E^cs) or e^s (backward, complement E^cu)."""
        order = {"u": (2, 0, 1), "s": (0, 1, 2)}[tag]

        def frame_fn(pts):
            split = estimate_splitting(f, points=pts, n=n, strict=False)
            return split.frame()[..., list(order)]

        direction = "forward" if tag == "u" else "backward"
        return cls(frame_fn, alpha, 1, direction=direction, expanding=True, label=f"C^{tag}")

    def extreme_rays(self, basis: np.ndarray, count: int) -> np.ndarray:
        """Boundary rays, shape (P, count, 3)."""
        ortho, _ = np.linalg.qr(basis[..., : self.dimension])
        comp, _ = np.linalg.qr(basis[..., self.dimension :])
        phi = np.pi * np.arange(count) / count if self.dimension == 2 else 2.0 * np.pi * np.arange(count) / count
        if self.dimension == 1:
            core = ortho[..., :, 0][:, None, :]
            w = np.cos(phi)[None, :, None] * comp[..., :, 0][:, None, :] + np.sin(phi)[None, :, None] * comp[..., :, 1][:, None, :]
            return core + w / self.alpha
        core = np.cos(phi)[None, :, None] * ortho[..., :, 0][:, None, :] + np.sin(phi)[None, :, None] * ortho[..., :, 1][:, None, :]
        sign = np.where(np.arange(count) % 2 == 0, 1.0, -1.0)[None, :, None]
        return core + sign * comp[..., :, 0][:, None, :] / self.alpha


def _orbit_derivative(f: DynamicalSystem, points: np.ndarray, N: int, backward: bool) -> Tuple[np.ndarray, np.ndarray]:
    """Df^N (or Df^-N) along the orbit, with the orbit endpoint."""
    M = np.broadcast_to(np.eye(3), (len(points), 3, 3)).copy()
    x = points
    for _ in range(N):
        if backward:
            prev = f.inverse(x)
            M = np.linalg.solve(f.jacobian(prev), M)
            x = prev
        else:
            M = f.jacobian(x) @ M
            x = f.forward(x)
    return M, x


def _split_norms(vectors: np.ndarray, basis: np.ndarray, dimension: int) -> Tuple[np.ndarray, np.ndarray]:
    coords = np.linalg.solve(basis[:, None, :, :], vectors[..., None])[..., 0]
    v_E = np.einsum("pij,prj->pri", basis[..., :dimension], coords[..., :dimension])
    v_F = np.einsum("pij,prj->pri", basis[..., dimension:], coords[..., dimension:])
    return np.linalg.norm(v_E, axis=-1), np.linalg.norm(v_F, axis=-1)


def verify_cone_invariance(
    f: DynamicalSystem,
    C: ConeField,
    N: int = 1,
    grid: int = 8,
    points: Optional[np.ndarray] = None,
    rays: Optional[int] = None,
) -> Dict[str, Any]:
    """
    Checks Df^N C(x) inside int C(f^N x) (Df^-N for backward cones) on extreme rays.
    A failure is a verdict carrying its worst cell, not an error.
    """
    RAYS = config.CONE_RAYS if rays is None else rays
    if N < 1:
        raise InvalidInputError("Iterate count N must be >= 1.")
    if points is None:
        if grid < 8:
            raise InvalidInputError("Cone verification needs a grid of at least 8 per axis.")
        points = sample_grid(f.manifold, grid)
    points = np.asarray(points, dtype=float).reshape(-1, 3)

    log_check(f"Cone invariance {C.label or C.direction} for '{f.name}'", f"N = {N}, points = {len(points)}")

    basis = C.frame_fn(points)
    rays_v = C.extreme_rays(basis, RAYS)
    M, image_points = _orbit_derivative(f, points, N, backward=C.direction == "backward")
    images = np.einsum("pij,prj->pri", M, rays_v)
    image_basis = C.frame_fn(image_points)

    norm_E, norm_F = _split_norms(images, image_basis, C.dimension)
    image_norm = np.linalg.norm(images, axis=-1)
    margins = np.min((norm_E - C.alpha * norm_F) / image_norm, axis=1)
    expansion = np.min(image_norm / np.linalg.norm(rays_v, axis=-1), axis=1)

    worst_margin, worst_cell = get_worst_cell(margins, points, find_max=False)
    min_expansion = float(np.min(expansion))
    passed = worst_margin > config.CONE_MARGIN_TOL
    if C.expanding:
        passed = passed and min_expansion > 1.0

    report = {
        "pass": bool(passed),
        "worst_margin": worst_margin,
        "worst_cell": worst_cell,
        "min_expansion": min_expansion,
        "iterates": N,
        "points": len(points),
        "cone": C.label or C.direction,
    }
    log_verdict("cone invariance", "pass" if passed else "fail", {"worst margin": worst_margin, "min expansion": min_expansion})
    return report


def certify_partial_hyperbolicity(
    f: DynamicalSystem,
    iterates: int = 1,
    grid: int = 8,
    alpha: Optional[float] = None,
    n: Optional[int] = None,
    points: Optional[np.ndarray] = None,
) -> Dict[str, Any]:
    """Unstable (forward, expanding) and stable (backward, expanding) cones around the estimated splitting."""
    ALPHA = config.CONE_OPENING if alpha is None else alpha
    reports = {
        tag: verify_cone_invariance(f, ConeField.from_splitting_fn(f, tag, ALPHA, n), iterates, grid, points=points)
        for tag in ("u", "s")
    }
    worst_tag = min(reports, key=lambda t: reports[t]["worst_margin"])
    return {
        "pass": all(r["pass"] for r in reports.values()),
        "worst_margin": reports[worst_tag]["worst_margin"],
        "worst_cell": reports[worst_tag]["worst_cell"],
        "cones": reports,
    }


# ==============================================================================
# RATES & SCALES
# ==============================================================================


def _sampled_rates(f: DynamicalSystem, split: Splitting) -> Tuple[float, float]:
    J = f.jacobian(split.points)
    J_inv_here = np.linalg.inv(f.jacobian(f.inverse(split.points)))
    contract_s = np.linalg.norm((J @ split.e_s[..., None])[..., 0], axis=-1)
    contract_u = np.linalg.norm((J_inv_here @ split.e_u[..., None])[..., 0], axis=-1)
    lam = float(max(contract_s.max(), contract_u.max()))
    kappa = float(max(np.linalg.norm(J, ord=2, axis=(-2, -1)).max(), np.linalg.norm(np.linalg.inv(J), ord=2, axis=(-2, -1)).max()))
    return lam, kappa


def estimate_rates(
    f: DynamicalSystem,
    S: Splitting,
    grid: Optional[int] = None,
    refine: bool = True,
) -> Tuple[float, float]:
    """
    lambda = max(|Df e^s|, |Df^-1 e^u|) and kappa = max(|Df|, |Df^-1|) over the
    samples, each with headroom. With ``refine`` a grid ladder 4, 8, 16, ... is
    walked until both maxima move by less than RATE_REFINE_TOL.
    """
    HEADROOM = config.RATE_HEADROOM
    lam, kappa = _sampled_rates(f, S)

    if refine:
        prev = None
        size = 4
        limit = min(config.RATE_MAX_GRID, grid) if grid else config.RATE_MAX_GRID
        while size <= limit:
            split = estimate_splitting(f, grid=size, n=S.iterations, strict=False)
            current = _sampled_rates(f, split)
            lam, kappa = max(lam, current[0]), max(kappa, current[1])
            if prev is not None and all(abs(c - p) <= config.RATE_REFINE_TOL * abs(p) for c, p in zip(current, prev)):
                break
            prev = current
            size *= 2

    lam, kappa = lam * HEADROOM, kappa * HEADROOM
    if lam >= 1.0:
        raise ModelViolationError(f"Not partially hyperbolic at this metric: lambda = {lam:.6f} >= 1.")
    return lam, kappa


def _bundles_in_frame(base: Splitting, other: Splitting) -> Dict[str, np.ndarray]:
    """Express the bundles of ``other`` in the split coordinates of ``base``."""
    B = base.frame()
    return {tag: unit(np.linalg.solve(B, other.bundle(tag)[..., None])[..., 0]) for tag in ("s", "c", "u")}


def _scale_ok(base: Splitting, neighbour: Splitting, eps: float) -> bool:
    axes = np.eye(3)
    moved = _bundles_in_frame(base, neighbour)
    for i, tag in enumerate(("s", "c", "u")):
        if np.max(line_angle(moved[tag], axes[i])) > eps * np.pi:
            return False
    normal_cu = unit(np.cross(moved["c"], moved["u"]))
    normal_cs = unit(np.cross(moved["s"], moved["c"]))
    # a line orthogonal to a plane is parallel to its normal
    ortho_s = line_angle(moved["s"], normal_cu)
    ortho_u = line_angle(moved["u"], normal_cs)
    return bool(np.max(ortho_s) <= eps * np.pi and np.max(ortho_u) <= eps * np.pi)


def nearly_euclidean_scale(
    f: DynamicalSystem,
    S: Splitting,
    eps: Optional[float] = None,
    cap: Optional[float] = None,
    floor: Optional[float] = None,
) -> float:
    """
    Largest dyadic delta <= cap such that, for each sample and its neighbours
    20 delta and 10 delta away along the 26 cube-neighbour directions,
    bundle directions differ by at most eps*pi and the pairs (e^s, E^cu),
    (E^cs, e^u) stay within eps*pi of orthogonal. Angles are read in the split
    coordinates of the base point, where the splitting is orthonormal.
    """
    EPS = config.NEARLY_EUCLIDEAN_EPS if eps is None else eps
    CAP = config.DELTA_CAP if cap is None else cap
    FLOOR = config.DELTA_FLOOR if floor is None else floor
    RADIUS = config.NEIGHBOUR_RADIUS_FACTOR

    if EPS <= 0:
        raise ScaleNotFoundError("No positive scale satisfies an eps = 0 nearly-euclidean condition.")
    if EPS > 1.0 / 16.0:
        raise InvalidInputError("eps must lie in (0, 1/16].")

    variation = max(np.max(line_angle(S.bundle(t), S.bundle(t)[0])) for t in ("s", "c", "u"))
    if variation < 1e-12:
        return CAP

    delta = CAP
    while delta >= FLOOR:
        ok = True
        for radius in (RADIUS * delta, 0.5 * RADIUS * delta):
            for d in NEIGHBOUR_DIRECTIONS:
                shifted, _ = normalize_coords(S.points + radius * d, f.manifold)
                neighbour = estimate_splitting(f, points=shifted, n=S.iterations, strict=False)
                if not _scale_ok(S, neighbour, EPS):
                    ok = False
                    break
            if not ok:
                break
        if ok:
            return delta
        delta /= 2.0
    raise ScaleNotFoundError(f"No nearly-euclidean scale above {FLOOR:g} for eps = {EPS:g}.")


@dataclass
class RateReport:
    lam: float
    kappa: float
    delta: float
    delta_prime: float
    delta1: float
    delta2: float
    delta3: float
    accepted: bool

    @property
    def p5_bound(self) -> float:
        return self.delta / (config.P5_DENOMINATOR * self.kappa**2) * (1.0 - self.lam)

    @property
    def expansion_bound(self) -> float:
        return (1.0 / self.lam - 1.0) / 10.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "lambda": self.lam,
            "kappa": self.kappa,
            "delta": self.delta,
            "delta_prime": self.delta_prime,
            "delta1": self.delta1,
            "delta2": self.delta2,
            "delta3": self.delta3,
            "accepted": bool(self.accepted),
        }


def measure_c0_distance(f: DynamicalSystem, g: DynamicalSystem, grid: int = 20) -> float:
    pts = sample_grid(f.manifold, grid)
    return float(np.max(dist_coords(f.forward(pts), g.forward(pts), f.manifold)))


def derive_scale_cascade(
    delta: float,
    kappa: float,
    f: DynamicalSystem,
    g: DynamicalSystem,
    lam: float,
    grid: int = 20,
    delta_prime: Optional[float] = None,
) -> RateReport:
    """delta1 = delta/2kappa, delta2 = delta1/2, delta3 = delta2/4kappa; accept the pair iff both smallness bounds hold."""
    if not (delta > 0 and kappa > 1 and 0 < lam < 1):
        raise InvalidInputError("Cascade needs delta > 0, kappa > 1 and lambda in (0, 1).")
    if f.manifold != g.manifold:
        raise InvalidInputError("f and g must act on the same manifold.")

    delta1 = delta / (2.0 * kappa)
    delta2 = delta1 / 2.0
    delta3 = delta2 / (4.0 * kappa)
    d_prime = measure_c0_distance(f, g, grid) if delta_prime is None else float(delta_prime)

    report = RateReport(lam, kappa, delta, d_prime, delta1, delta2, delta3, False)
    report.accepted = bool(d_prime < report.p5_bound and d_prime < report.expansion_bound)
    log_verdict(
        "scale cascade",
        "accepted" if report.accepted else "rejected",
        {"delta'": d_prime, "bound": report.p5_bound, "delta3": delta3},
    )
    return report
