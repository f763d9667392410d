# daf_numerics/daf/tau_field.py

from dataclasses import dataclass
from typing import Any, Dict, Optional, Union

import numpy as np
import pandas as pd
from tqdm import tqdm

from .. import config
from ..analytics.cone_hyperbolicity import RateReport
from ..analytics.leaf_numerics import LineField
from ..manifolds.chart_space import dist_coords
from ..manifolds.system_zoo import DynamicalSystem
from ..utils.artifact_io import write_csv
from ..utils.color_log import log_check, log_verdict
from ..utils.errors import InvalidInputError, ModelViolationError
from .center_search import center_field, leaving_index, locate_on_arc, probe_points, trace_center


@dataclass
class TauField:
    """
    tau(x): signed arc length along the oriented center leaf from x to f(x),
    with the return count N on compact leaves, so that
    tau = length[x, f(x)]_c + N * leaf_length there.
    """

    points: np.ndarray
    tau: np.ndarray
    winding: np.ndarray
    leaf_length: np.ndarray
    orientation: int
    modulus: float

    @property
    def min(self) -> float:
        return float(np.min(self.tau))

    @property
    def max(self) -> float:
        return float(np.max(self.tau))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "x": self.points[:, 0],
                "y": self.points[:, 1],
                "theta": self.points[:, 2],
                "tau": self.tau,
                "winding": self.winding.astype(int),
                "leaf_length": self.leaf_length,
            }
        )

    def write_csv(self, path) -> Any:
        return write_csv(path, self.to_frame())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "samples": len(self.tau),
            "tau_min": self.min,
            "tau_max": self.max,
            "orientation": self.orientation,
            "modulus": self.modulus,
            "max_winding": int(np.max(self.winding)) if len(self.winding) else 0,
        }


def _search(f: DynamicalSystem, center: LineField, X: np.ndarray, length: float, step: Optional[float], min_tau: float):
    """Arc lengths to f(x) in both directions, and closing lengths of compact leaves."""
    m = f.manifold
    targets = f.forward(X)
    found = {+1: np.full(len(X), np.nan), -1: np.full(len(X), np.nan)}
    closing = np.full(len(X), np.nan)
    for sign in (+1, -1):
        params, pts, tans = trace_center(center, X, length, sign, step)
        iterator = tqdm(range(len(X)), desc=f"locate f(x) ({'+' if sign > 0 else '-'})", disable=not config.PROGRESS_BARS)
        for p in iterator:
            skip = leaving_index(params, pts[:, p], X[p], m)
            # f(x) = x on a compact leaf: tau is a full turn, not zero
            floor = max(min_tau, skip) if dist_coords(targets[p], X[p], m) < config.LOCATE_TOL else min_tau
            hit = locate_on_arc(params, pts[:, p], targets[p], m, min_param=floor)
            if hit is not None:
                found[sign][p] = hit[0]
            if sign > 0:
                back = locate_on_arc(params, pts[:, p], X[p], m, skip, tans[:, p], tans[0, p])
                if back is not None:
                    closing[p] = back[0]
    return found, closing


def center_displacement(
    f: DynamicalSystem,
    center: Optional[LineField] = None,
    grid: Optional[int] = None,
    points=None,
    search_length: Optional[float] = None,
    step: Optional[float] = None,
) -> Dict[str, Any]:
    """
    Locates f(x) on the center leaf of every sample x, searching both
    orientations up to ``search_length`` of arc (wrapping around compact
    leaves). Returns the sup L of the located arc distances, or a
    not-center-fixing witness.
    """
    LENGTH = config.SEARCH_LENGTH if search_length is None else float(search_length)
    center = center_field(f, center)
    X = probe_points(f.manifold, grid, points)
    log_check("Center displacement", f"{len(X)} samples, search length {LENGTH:g}")

    found, closing = _search(f, center, X, LENGTH, step, 0.0)
    arc = np.fmin(found[+1], found[-1])
    missing = np.isnan(arc)
    if np.any(missing):
        idx = int(np.argmax(missing))
        report = {
            "verdict": "not-center-fixing",
            "witness": {"x": X[idx].tolist(), "f(x)": f.forward(X[idx]).tolist()},
            "located": int(np.sum(~missing)),
            "samples": len(X),
        }
        log_verdict("center displacement", report["verdict"], {"located": report["located"], "samples": len(X)})
        return report

    report = {
        "verdict": "center-fixing",
        "L": float(np.max(arc)),
        "samples": len(X),
        "compact_leaves": int(np.sum(np.isfinite(closing))),
    }
    log_verdict("center displacement", report["verdict"], {"L": report["L"], "samples": len(X)})
    return report


def _modulus(X: np.ndarray, tau: np.ndarray, m) -> float:
    """Largest |tau(x) - tau(y)| over sample pairs closer than twice the nearest-neighbour spacing."""
    if len(X) < 2:
        return 0.0
    d = dist_coords(X[:, None, :], X[None, :, :], m)
    np.fill_diagonal(d, np.inf)
    radius = 2.0 * np.max(np.min(d, axis=1))
    close = d <= radius
    return float(np.max(np.abs(tau[:, None] - tau[None, :])[close]))


def recover_tau(
    f: DynamicalSystem,
    center: Optional[LineField] = None,
    grid: Optional[int] = None,
    points=None,
    search_length: Optional[float] = None,
    step: Optional[float] = None,
    min_tau: float = 0.0,
) -> TauField:
    """
    tau with the unit-speed convention. The orientation is the majority of the
    shorter search directions and must then hold at every sample. On compact
    leaves, occurrences of f(x) closer than ``min_tau`` are skipped, which
    selects the branch tau + N * leaf_length.
    """
    LENGTH = config.SEARCH_LENGTH if search_length is None else float(search_length)
    center = center_field(f, center)
    X = probe_points(f.manifold, grid, points)
    log_check("Recover tau", f"{len(X)} samples")

    found, closing = _search(f, center, X, LENGTH, step, min_tau)
    plus, minus = found[+1], found[-1]
    if np.any(np.isnan(plus) & np.isnan(minus)):
        idx = int(np.argmax(np.isnan(plus) & np.isnan(minus)))
        raise ModelViolationError("f(x) is not on the center leaf of x; tau is undefined.", witness=X[idx].tolist())

    prefer_plus = np.where(np.isnan(minus), True, np.where(np.isnan(plus), False, plus <= minus))
    orientation = 1 if np.sum(prefer_plus) >= len(X) / 2.0 else -1
    tau = plus if orientation > 0 else minus
    if np.any(np.isnan(tau)):
        idx = int(np.argmax(np.isnan(tau)))
        raise ModelViolationError(
            "tau changes sign: f(x) lies against the majority orientation of the center field.",
            witness=X[idx].tolist(),
        )
    if np.any(tau < config.LOCATE_TOL):
        idx = int(np.argmin(tau))
        raise ModelViolationError("tau vanishes: f fixes a sample point.", witness=X[idx].tolist())

    turns = np.floor((tau + config.LOCATE_TOL) / np.where(np.isfinite(closing), closing, np.inf))
    field = TauField(X, tau, turns.astype(int), closing, orientation, _modulus(X, tau, f.manifold))
    log_verdict("tau field", "pass", field.to_dict())
    return field


def tau_floor_check(tau: TauField, rates: Union[RateReport, float]) -> Dict[str, Any]:
    """min tau > 10 delta, with the margin."""
    delta = rates.delta if isinstance(rates, RateReport) else float(rates)
    if not delta > 0:
        raise InvalidInputError("delta must be positive.")
    floor = 10.0 * delta
    report = {
        "verdict": "pass" if tau.min > floor else "fail",
        "tau_min": tau.min,
        "floor": floor,
        "margin": tau.min - floor,
    }
    log_verdict("tau floor", report["verdict"], report)
    return report
