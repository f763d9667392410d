# daf_numerics/daf/center_probes.py

from typing import Any, Dict, Optional

import numpy as np
from tqdm import tqdm

from .. import config
from ..analytics.leaf_numerics import BUNDLE_TAGS, LineField, Plaque, _check_step, advance, integrate_leaf, leaf_fields, trace
from ..manifolds.chart_space import displacement, dist_coords, normalize_coords
from ..manifolds.system_zoo import DynamicalSystem
from ..utils.color_log import log_check, log_verdict
from ..utils.errors import InvalidInputError
from ..utils.grid_utils import geometric_rate, get_worst_cell, orient_like
from .center_search import center_field, leaving_index, locate_on_arc, probe_points, trace_center
from .tau_field import TauField


# ==============================================================================
# QUASI-ISOMETRY
# ==============================================================================


def _half_lengths(f: DynamicalSystem, arc_points: np.ndarray, centre: int, n: int) -> np.ndarray:
    """Lengths of the two halves of f^n(arc), split at the image of the arc centre."""
    image = f.iterate(arc_points, n)
    chords = dist_coords(image[:-1], image[1:], f.manifold)
    return np.array([np.sum(chords[:centre]), np.sum(chords[centre:])])


def qi_check(
    f: DynamicalSystem,
    center: Optional[LineField] = None,
    l: Optional[float] = None,
    n_iter: Optional[int] = None,
    grid: Optional[int] = None,
    points=None,
    tau: Optional[TauField] = None,
) -> Dict[str, Any]:
    """
    Pushes W^c_l(x) by f^n for |n| <= N and records the largest radius of the
    image arc about f^n(x). A flat growth curve is read as quasi-isometric;
    with a tau field, l defaults to min tau and the bound is compared with max tau.
    """
    N = config.QI_ITERATES if n_iter is None else int(n_iter)
    if N < 1:
        raise InvalidInputError("qi_check needs at least one iterate.")
    if l is None:
        l = tau.min if tau is not None else config.QI_ARC_LENGTH
    if not l > 0:
        raise InvalidInputError("Arc radius l must be positive.")

    center = center_field(f, center)
    X = probe_points(f.manifold, grid, points)
    log_check("Quasi-isometric center", f"{len(X)} samples, l = {l:g}, |n| <= {N}")

    iterates = np.arange(-N, N + 1)
    radius = np.zeros((len(X), len(iterates)))
    step = min(config.LEAF_STEP, l / 10.0)
    for p in tqdm(range(len(X)), desc="qi arcs", disable=not config.PROGRESS_BARS):
        arc = integrate_leaf(center, X[p], l, step)
        middle = int(np.argmin(np.abs(arc.params)))
        for j, n in enumerate(iterates):
            radius[p, j] = np.max(_half_lengths(f, arc.points, middle, int(n)))

    curve = np.max(radius, axis=0)
    forward = geometric_rate(curve[N:])
    backward = geometric_rate(curve[N::-1])
    growth = max(forward, backward)
    bound, worst = get_worst_cell(np.max(radius, axis=1), X, find_max=True)

    report: Dict[str, Any] = {
        "verdict": "quasi-isometric" if growth < config.QI_GROWTH_TOL else "not-quasi-isometric",
        "L": bound,
        "l": float(l),
        "growth_rate": growth,
        "growth_curve": {int(n): float(v) for n, v in zip(iterates, curve)},
        "worst_point": worst,
    }
    if tau is not None:
        report["prediction"] = tau.max
        report["consistent"] = bool(bound <= (1.0 + config.QI_SLACK) * tau.max)
    log_verdict("quasi-isometry", report["verdict"], {"L": bound, "growth_rate": growth})
    return report


# ==============================================================================
# TOPOLOGICAL ANOSOV PROBES
# ==============================================================================

PROBE_MODES = ("cs-contraction", "cu-expansivity")


def _slide_to_transversal(center: LineField, points: np.ndarray, targets: np.ndarray, m, newton_steps: int = 3):
    """
    Moves each point along its own center leaf onto the plane through its
    target normal to E^c(target). Returns the moved points and the signed
    arc lengths travelled.
    """
    normals = center(targets)
    direction = orient_like(center(points), normals)
    s = np.sum(displacement(points, targets, m) * normals, axis=-1)
    for _ in range(newton_steps):
        moved, tangent = advance(center, points, direction, s)
        gap = np.sum(displacement(targets, moved, m) * normals, axis=-1)
        s = s - gap / np.sum(tangent * normals, axis=-1)
    moved, _ = advance(center, points, direction, s)
    return moved, s


def topological_anosov_probe(
    f: DynamicalSystem,
    x,
    y,
    mode: str = "cs-contraction",
    epsilon: Optional[float] = None,
    budget: Optional[int] = None,
    tau: Optional[TauField] = None,
    lam: Optional[float] = None,
    center: Optional[LineField] = None,
) -> Dict[str, Any]:
    """
    Orbit pairs read through the transport f^n(y) = gamma_y(sum of tau along x).

    cs-contraction: f^n(y) is slid along its center leaf onto the center
    transversal of f^n(x), which absorbs the difference of the tau sums along
    the two orbits. The transported distances must decay monotonically; the
    decay factor is reported per step and per unit of tau, next to the
    untransported equal-time distances. cu-expansivity: the pair must
    separate beyond epsilon within the budget, unless y lies on the center
    leaf of x.
    """
    if mode not in PROBE_MODES:
        raise InvalidInputError(f"Unknown probe mode '{mode}'. Options: {PROBE_MODES}")
    EPS = config.ESCAPE_EPSILON if epsilon is None else float(epsilon)
    T = config.ESCAPE_BUDGET if budget is None else int(budget)
    m = f.manifold
    x = normalize_coords(np.asarray(x, dtype=float), m)[0]
    y = normalize_coords(np.asarray(y, dtype=float), m)[0]
    mean_tau = float(np.mean(tau.tau)) if tau is not None else 1.0

    xs, ys = [x], [y]
    for _ in range(T):
        xs.append(f.forward(xs[-1]))
        ys.append(f.forward(ys[-1]))
    d = dist_coords(np.array(xs), np.array(ys), m)

    if d[0] == 0.0:
        report = {"verdict": "coincident", "mode": mode, "distances": d.tolist()}
        log_verdict("topological anosov", report["verdict"], {"mode": mode})
        return report

    if mode == "cs-contraction":
        equal_time = d
        moved, offsets = _slide_to_transversal(center_field(f, center), np.array(ys), np.array(xs), m)
        d = dist_coords(np.array(xs), moved, m)
        alive = d > 1e-13
        if not np.any(alive):
            # y lies on the center leaf of x
            report = {"verdict": "coincident", "mode": mode, "distances": d.tolist(), "center_offsets": offsets.tolist()}
            log_verdict("topological anosov", report["verdict"], {"mode": mode})
            return report
        decay = d[alive]
        factor = float(np.exp(geometric_rate(decay)))
        monotone = bool(np.all(np.diff(decay) <= 0.0))
        per_tau = factor ** (1.0 / mean_tau)
        ok = monotone and (lam is None or per_tau <= lam * (1.0 + config.QI_SLACK))
        report = {
            "verdict": "pass" if ok else "fail",
            "mode": mode,
            "decay_factor": factor,
            "decay_per_unit_tau": per_tau,
            "monotone": monotone,
            "distances": d.tolist(),
            "equal_time_distances": equal_time.tolist(),
            "center_offsets": offsets.tolist(),
        }
    else:
        escaped = np.flatnonzero(d > EPS)
        if escaped.size:
            report = {"verdict": "pass", "mode": mode, "escape_time": int(escaped[0]), "distances": d.tolist()}
        else:
            arc = integrate_leaf(center_field(f, center), x, max(float(d[0]) * 2.0, 10.0 * config.LEAF_H_MIN))
            on_leaf = locate_on_arc(arc.params, arc.points, y, m, min_param=-np.inf) is not None
            report = {
                "verdict": "coincident" if on_leaf else "fail",
                "mode": mode,
                "escape_time": None,
                "distances": d.tolist(),
            }
    log_verdict("topological anosov", report["verdict"], {k: v for k, v in report.items() if k != "distances"})
    return report


# ==============================================================================
# COHERENCE
# ==============================================================================


def _saturation(fields: Dict[str, LineField], x: np.ndarray, tag: str, radius: float, step: float) -> Plaque:
    """Samples of W^tag_radius(W^c_radius(x)) as a plaque over (center, tag) arc lengths."""
    m = fields["c"].manifold
    center = integrate_leaf(fields["c"], x, radius, step)
    steps, h = _check_step(radius, step)
    e = fields[tag](center.points)
    e = orient_like(e, e[len(e) // 2])
    ahead, _ = trace(fields[tag], center.points, e, h, steps)
    behind, _ = trace(fields[tag], center.points, -e, h, steps)
    grid = np.concatenate([behind[::-1][:-1], ahead], axis=0).swapaxes(0, 1)
    v = h * np.arange(-steps, steps + 1, dtype=float)
    return Plaque.from_samples(x, center.params, v, grid, m)


def coherence_saturation_check(
    f: DynamicalSystem,
    points=None,
    grid: Optional[int] = None,
    delta: Optional[float] = None,
    fields: Optional[Dict[str, LineField]] = None,
    step: Optional[float] = None,
) -> Dict[str, Any]:
    """
    For y in W^s_delta(x): W^c_delta(y) must lie within COHERENCE_TOL of the
    sampled saturation W^s_2delta(W^c_2delta(x)); likewise with u for s.
    """
    DELTA = config.COHERENCE_SCALE if delta is None else float(delta)
    if not DELTA > 0:
        raise InvalidInputError("Coherence scale must be positive.")
    fields = leaf_fields(f) if fields is None else fields
    if set(fields) != set(BUNDLE_TAGS):
        raise InvalidInputError(f"Need one line field per bundle {BUNDLE_TAGS}.")
    STEP = min(config.LEAF_STEP, DELTA / 5.0) if step is None else step
    X = probe_points(f.manifold, grid, points)
    log_check("Coherence saturation", f"{len(X)} samples, delta = {DELTA:g}")

    gaps = {"s": np.zeros(len(X)), "u": np.zeros(len(X))}
    for p in tqdm(range(len(X)), desc="saturation", disable=not config.PROGRESS_BARS):
        for tag in ("s", "u"):
            plaque = _saturation(fields, X[p], tag, 2.0 * DELTA, STEP)
            y, _ = advance(fields[tag], X[p], fields[tag](X[p][None, :]), 0.5 * DELTA)
            arc = integrate_leaf(fields["c"], y[0], DELTA, STEP)
            u, v, off = plaque.project(arc.points)
            outside = ~plaque.inside(u, v)
            gaps[tag][p] = np.inf if np.any(outside) else float(np.max(np.abs(off)))

    worst_s, cell_s = get_worst_cell(gaps["s"], X, find_max=True)
    worst_u, cell_u = get_worst_cell(gaps["u"], X, find_max=True)
    coherent = worst_s <= config.COHERENCE_TOL and worst_u <= config.COHERENCE_TOL
    report = {
        "verdict": "coherent" if coherent else "incoherent",
        "cs_gap": worst_s,
        "cu_gap": worst_u,
        "samples": len(X),
        "witness": None if coherent else (cell_s if worst_s >= worst_u else cell_u),
    }
    log_verdict("coherence", report["verdict"], {"cs_gap": worst_s, "cu_gap": worst_u})
    return report


# ==============================================================================
# UNIFORM COMPACTNESS
# ==============================================================================


def leaf_length_bound(arcs: Dict[int, np.ndarray], lengths: np.ndarray, m) -> Dict[str, float]:
    """Max closed length and max chart diameter over the closed leaves."""
    closed = np.isfinite(lengths)
    if not np.any(closed):
        return {"max_length": float("nan"), "max_diameter": float("nan")}
    diameters = []
    for p, pts in arcs.items():
        sub = pts[:: max(1, len(pts) // 200)]
        diameters.append(float(np.max(dist_coords(sub[:, None, :], sub[None, :, :], m))))
    return {"max_length": float(np.max(lengths[closed])), "max_diameter": float(max(diameters))}


def uniform_compactness_check(
    f: DynamicalSystem,
    center: Optional[LineField] = None,
    grid: Optional[int] = None,
    points=None,
    budget: Optional[float] = None,
    step: Optional[float] = None,
) -> Dict[str, Any]:
    """
    Traces each sampled center leaf until it returns within the closure
    tolerance with a matching tangent, or the arc budget runs out. Budget
    exhaustion is a witness of a non-compact leaf.
    """
    BUDGET = config.SEARCH_LENGTH if budget is None else float(budget)
    center = center_field(f, center)
    m = f.manifold
    X = probe_points(m, grid, points, generic=True)
    log_check("Uniform compactness", f"{len(X)} samples, budget {BUDGET:g}")

    params, pts, tans = trace_center(center, X, BUDGET, 1.0, step)
    lengths = np.full(len(X), np.nan)
    closed_arcs: Dict[int, np.ndarray] = {}
    for p in range(len(X)):
        skip = leaving_index(params, pts[:, p], X[p], m)
        hit = locate_on_arc(params, pts[:, p], X[p], m, skip, tans[:, p], tans[0, p])
        if hit is not None and hit[1] < config.CLOSURE_TOL:
            lengths[p] = hit[0]
            closed_arcs[p] = pts[params <= hit[0], p]

    open_leaves = np.flatnonzero(np.isnan(lengths))
    report: Dict[str, Any] = {
        "verdict": "uniformly-compact" if open_leaves.size == 0 else "not-uniformly-compact",
        "samples": len(X),
        "closed": int(len(X) - open_leaves.size),
        "lengths": lengths.tolist(),
        **leaf_length_bound(closed_arcs, lengths, m),
        "witnesses": X[open_leaves].tolist(),
    }
    log_verdict("uniform compactness", report["verdict"], {"closed": report["closed"], "max_length": report["max_length"]})
    return report
