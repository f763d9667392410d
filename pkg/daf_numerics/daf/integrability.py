# daf_numerics/daf/integrability.py

from typing import Any, Dict, Optional

import numpy as np

from .. import config
from ..analytics.leaf_numerics import LeafArc, LineField, trace
from ..manifolds.chart_space import ChartPoint, dist_coords, normalize_coords
from ..manifolds.system_zoo import DynamicalSystem
from ..utils.color_log import log_check, log_verdict
from ..utils.errors import DafNumericsError, IntegrationError, InvalidInputError
from ..utils.grid_utils import line_angle
from .center_search import center_field


def _arc(center: LineField, x: np.ndarray, length: float, step: float, direction: Optional[np.ndarray] = None) -> LeafArc:
    steps = max(1, int(np.ceil(length / step - 1e-9)))
    h = length / steps
    v0 = center(x[None, :]) if direction is None else np.asarray(direction, dtype=float)[None, :]
    pts, tans = trace(center, x[None, :], v0, h, steps)
    return LeafArc("c", pts[:, 0], tans[:, 0], h * np.arange(steps + 1), center.manifold, line_field=center)


def _tangency(arc: LeafArc, center: LineField) -> float:
    """Largest angle between the chords of an arc and E^c at the chord midpoints."""
    lifted = arc.unwrapped()
    chords = np.diff(lifted, axis=0)
    mids = normalize_coords(lifted[:-1] + 0.5 * chords, arc.manifold)[0]
    return float(np.max(line_angle(chords, center(mids))))


def _integration_error(center: LineField, x: np.ndarray, length: float, step: float, direction=None) -> float:
    coarse = _arc(center, x, length, step, direction)
    fine = _arc(center, x, length, 0.5 * step, direction)
    return float(dist_coords(coarse.points[-1], fine.points[-1], center.manifold))


def unique_integrability_probe(
    f: DynamicalSystem,
    x,
    budget: Optional[float] = None,
    detour: Optional[float] = None,
    center: Optional[LineField] = None,
    step: Optional[float] = None,
) -> Dict[str, Any]:
    """
    Two curves tangent to E^c from x. On the cu-torus, E^c is tangent to the
    torus, so (a), the integral of E^c from x, runs inside it; it is not the
    center circle that crosses the torus. (b) follows (a) for ``detour`` of
    arc and then exits along an off-torus center curve. ``theta_drift``
    reports how far (a) strays from the torus. Separation beyond
    BRANCH_FACTOR times the integration error is a branching verdict.

    Where E^c is not horizontal on theta = 0 no branch can be built; the probe
    then compares integrations at two step sizes instead.
    """
    BUDGET = config.BRANCH_BUDGET if budget is None else float(budget)
    DETOUR = config.BRANCH_DETOUR if detour is None else float(detour)
    STEP = config.LEAF_STEP if step is None else float(step)
    if not 0.0 < DETOUR < BUDGET:
        raise InvalidInputError("Need 0 < detour < budget.")
    m = f.manifold
    center = center_field(f, center)
    x = normalize_coords(x.array if isinstance(x, ChartPoint) else np.asarray(x, dtype=float), m)[0]
    log_check("Unique integrability", f"x = {np.round(x, 6).tolist()}, budget {BUDGET:g}")

    e_c = center(x[None, :])[0]
    on_torus = abs(x[2]) < 1e-12 and abs(e_c[2]) < config.ANGLE_TOL

    curve_a = _arc(center, x, BUDGET, STEP)
    if not on_torus:
        twin = _arc(center, x, BUDGET, 0.5 * STEP)
        # shared parameters: every second sample of the halved-step curve
        gap = float(np.max(dist_coords(curve_a.points, twin.points[::2], m)))
        verdict = "unique" if gap < config.UNIQUENESS_TOL else "inconclusive"
        report = {"verdict": verdict, "on_torus": False, "step_gap": gap, "curves": {"a": curve_a, "b": twin}}
        log_verdict("unique integrability", verdict, {"step_gap": gap})
        return report

    # (b): inside the torus up to the detour point, then lifted off it
    k = int(np.argmin(np.abs(curve_a.params - DETOUR)))
    z, heading = curve_a.points[k], curve_a.tangents[k]
    remaining = BUDGET - curve_a.params[k]
    best = None
    for side in (1.0, -1.0):
        start = normalize_coords(z + np.array([0.0, 0.0, side * config.TORUS_LIFT]), m)[0]
        try:
            exit_arc = _arc(center, start, remaining, STEP, heading)
        except IntegrationError:
            continue
        n = min(len(exit_arc), len(curve_a) - k)
        sep = dist_coords(exit_arc.points[:n], curve_a.points[k : k + n], m)
        if best is None or sep[-1] > best[1][-1]:
            best = (exit_arc, sep, start)
    if best is None:
        raise DafNumericsError("Neither side of the cu-torus yields an exiting center curve.", witness=z.tolist())
    exit_arc, separation, start = best
    theta_drift = float(np.max(np.abs(curve_a.unwrapped()[:, 2] - x[2])))

    curve_b = LeafArc(
        "c",
        np.vstack([curve_a.points[: k + 1], exit_arc.points[1:]]),
        np.vstack([curve_a.tangents[: k + 1], exit_arc.tangents[1:]]),
        np.concatenate([curve_a.params[: k + 1], curve_a.params[k] + exit_arc.params[1:]]),
        m,
        line_field=center,
    )

    tangency = max(_tangency(curve_a, center), _tangency(exit_arc, center))
    if tangency > np.arctan(config.CONE_OPENING):
        raise IntegrationError(f"A candidate curve leaves the center cone (angle {tangency:.3e}).", witness=x.tolist())

    error = max(
        _integration_error(center, x, BUDGET, STEP),
        _integration_error(center, start, remaining, STEP, heading),
    )
    final = float(separation[-1])
    verdict = "branching" if final > config.BRANCH_FACTOR * max(error, np.finfo(float).eps) else "inconclusive"
    report = {
        "verdict": verdict,
        "on_torus": True,
        "separation": final,
        "separation_curve": separation.tolist(),
        "integration_error": error,
        "tangency_max_angle": tangency,
        "theta_drift": theta_drift,
        "exit_side": int(np.sign(start[2] - z[2]) or 1),
        "curves": {"a": curve_a, "b": curve_b},
    }
    log_verdict("unique integrability", verdict, {"separation": final, "integration_error": error})
    return report
