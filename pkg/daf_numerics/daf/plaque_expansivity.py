# daf_numerics/daf/plaque_expansivity.py

from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from tqdm import tqdm

from .. import config
from ..analytics.leaf_numerics import LineField, advance, integrate_leaf
from ..manifolds.chart_space import dist_coords, normalize_coords
from ..manifolds.system_zoo import DynamicalSystem
from ..utils.color_log import log_check, log_verdict
from ..utils.errors import InvalidInputError
from ..utils.grid_utils import unit
from .center_search import center_field, probe_points


@dataclass
class PseudoOrbitPair:
    """
    Two delta-pseudo orbits over n = start, ..., start + len - 1, each step
    f(x_n) followed by a center jump of at most delta.
    """

    xs: np.ndarray
    ys: np.ndarray
    jumps_x: np.ndarray
    jumps_y: np.ndarray
    start: int = 0

    @property
    def separations(self) -> np.ndarray:
        return self._separations

    def __post_init__(self):
        self.xs = np.asarray(self.xs, dtype=float)
        self.ys = np.asarray(self.ys, dtype=float)
        self.jumps_x = np.asarray(self.jumps_x, dtype=float)
        self.jumps_y = np.asarray(self.jumps_y, dtype=float)
        self._separations = None

    def measure(self, manifold) -> "PseudoOrbitPair":
        self._separations = dist_coords(self.xs, self.ys, manifold)
        return self

    def check(self, f: DynamicalSystem, center: LineField, delta: float) -> bool:
        """Re-derive every step: x_{n+1} is f(x_n) moved by its recorded jump, and separations stay <= 2 delta."""
        m = f.manifold
        self.measure(m)
        if np.any(np.abs(self.jumps_x) > delta + 1e-15) or np.any(np.abs(self.jumps_y) > delta + 1e-15):
            return False
        if np.any(self._separations > 2.0 * delta + 1e-12):
            return False
        for orbit, jumps in ((self.xs, self.jumps_x), (self.ys, self.jumps_y)):
            images = f.forward(orbit[:-1])
            moved, _ = advance(center, images, center(images), jumps)
            if np.any(dist_coords(moved, orbit[1:], m) > 1e-9):
                return False
        return True

    def to_dict(self) -> Dict[str, Any]:
        return {
            "start": self.start,
            "x": self.xs.tolist(),
            "y": self.ys.tolist(),
            "jumps_x": self.jumps_x.tolist(),
            "jumps_y": self.jumps_y.tolist(),
            "separations": None if self._separations is None else self._separations.tolist(),
        }


class _BudgetExceeded(Exception):
    pass


def _seeds(f: DynamicalSystem, center: LineField, X: np.ndarray, delta: float) -> Tuple[np.ndarray, np.ndarray]:
    """Pairs (x0, y0) with d <= 2 delta, y0 displaced transversally to the center."""
    m = f.manifold
    c = center(X)
    helper = np.where(np.abs(c[:, 2:3]) < 0.9, np.array([0.0, 0.0, 1.0]), np.array([1.0, 0.0, 0.0]))
    a = unit(np.cross(c, helper))
    b = unit(np.cross(c, a))
    xs, ys = [], []
    for r in (delta, 1.5 * delta):
        for phi in np.linspace(0.0, 2.0 * np.pi, 8, endpoint=False):
            offset = r * (np.cos(phi) * a + np.sin(phi) * b)
            xs.append(X)
            ys.append(normalize_coords(X + offset, m)[0])
    return np.vstack(xs), np.vstack(ys)


def _off_center_plaque(center: LineField, x: np.ndarray, y: np.ndarray, delta: float, m) -> bool:
    """True when y0 is not in W^c_{3 delta}(x0)."""
    arc = integrate_leaf(center, x, 3.0 * delta, min(config.LEAF_STEP, delta))
    return bool(np.min(dist_coords(arc.points, y[None, :], m)) > 1e-9)


def _search_direction(
    f: DynamicalSystem,
    center: LineField,
    x0: np.ndarray,
    y0: np.ndarray,
    delta: float,
    horizon: int,
    jumps: int,
    backward: bool,
    counter: List[int],
    budget: int,
    beam: int,
):
    """
    Level-by-level search over jump pairs; returns one branch surviving to the
    horizon (as x, y and their jump histories) or None.
    """
    m = f.manifold
    offsets = np.linspace(-delta, delta, jumps)
    step = f.inverse if backward else f.forward
    X, Y = x0[None, :], y0[None, :]
    hist_x = np.zeros((1, 0))
    hist_y = np.zeros((1, 0))
    path_x, path_y = [X], [Y]
    parents: List[np.ndarray] = []
    for _ in range(horizon):
        fx, fy = step(X), step(Y)
        nx = np.repeat(fx, jumps, axis=0)
        ny = np.repeat(fy, jumps, axis=0)
        jx, _ = advance(center, nx, center(nx), np.tile(offsets, len(X)))
        jy, _ = advance(center, ny, center(ny), np.tile(offsets, len(Y)))
        B = len(X)
        cx = jx.reshape(B, jumps, 1, 3)
        cy = jy.reshape(B, 1, jumps, 3)
        sep = dist_coords(cx, cy, m).reshape(B, jumps * jumps)
        counter[0] += sep.size
        if counter[0] > budget:
            raise _BudgetExceeded()
        alive = np.flatnonzero(sep.ravel() <= 2.0 * delta)
        if alive.size == 0:
            return None
        if alive.size > beam:
            # dropped branches are never explored
            counter[1] += 1
            alive = alive[np.argsort(sep.ravel()[alive], kind="stable")[:beam]]
        parent, rest = np.divmod(alive, jumps * jumps)
        ix, iy = np.divmod(rest, jumps)
        X = jx.reshape(B, jumps, 3)[parent, ix]
        Y = jy.reshape(B, jumps, 3)[parent, iy]
        # jump sequences that reach the same pair of points are one branch
        _, first = np.unique(np.round(np.hstack([X, Y]), 12), axis=0, return_index=True)
        first = np.sort(first)
        X, Y, parent, ix, iy = X[first], Y[first], parent[first], ix[first], iy[first]
        hist_x = np.column_stack([hist_x[parent], offsets[ix]])
        hist_y = np.column_stack([hist_y[parent], offsets[iy]])
        parents.append(parent)
        path_x.append(X)
        path_y.append(Y)

    # walk the first survivor back to the seed
    k = 0
    xs, ys = [path_x[-1][k]], [path_y[-1][k]]
    for level in range(len(parents) - 1, -1, -1):
        k = parents[level][k]
        xs.append(path_x[level][k])
        ys.append(path_y[level][k])
    return np.array(xs[::-1]), np.array(ys[::-1]), hist_x[0], hist_y[0]


def _seed_survives(f, center, x0, y0, delta, horizon, jumps, counter, budget, beam):
    ahead = _search_direction(f, center, x0, y0, delta, horizon, jumps, False, counter, budget, beam)
    if ahead is None:
        return None
    behind = _search_direction(f, center, x0, y0, delta, horizon, jumps, True, counter, budget, beam)
    if behind is None:
        return None
    return ahead, behind


def plaque_expansivity_test(
    f: DynamicalSystem,
    center: Optional[LineField] = None,
    delta: float = 0.01,
    horizon: int = 15,
    grid: Optional[int] = None,
    points=None,
    jumps: Optional[int] = None,
    scale: Optional[float] = None,
    node_budget: Optional[int] = None,
    beam: Optional[int] = None,
    refine: bool = True,
) -> Dict[str, Any]:
    """
    Searches for pairs of delta-pseudo orbits (center jumps from a finite
    alphabet) that stay 2 delta close for ``horizon`` steps in both time
    directions although y0 is off W^c_{3 delta}(x0). Verdicts hold only at the
    stated horizon and jump resolution. A search that had to drop branches
    beyond ``beam`` and found no witness is inconclusive.
    """
    JUMPS = config.PLAQUE_JUMPS if jumps is None else int(jumps)
    BUDGET = config.PLAQUE_NODE_BUDGET if node_budget is None else int(node_budget)
    BEAM = config.PLAQUE_BEAM if beam is None else int(beam)
    if delta < 0:
        raise InvalidInputError("delta must be nonnegative.")
    if not 1 <= horizon <= config.PLAQUE_MAX_HORIZON:
        raise InvalidInputError(f"Horizon must lie in [1, {config.PLAQUE_MAX_HORIZON}].")
    if JUMPS < 2:
        raise InvalidInputError("The jump alphabet needs at least two offsets.")
    if BEAM < 1:
        raise InvalidInputError("The beam must keep at least one branch.")
    if scale is not None and delta > scale:
        raise InvalidInputError(f"delta = {delta:g} exceeds the nearly-euclidean scale {scale:g}.")

    resolution = {"horizon": horizon, "jumps": JUMPS, "delta": delta}
    if delta == 0.0:
        report = {"verdict": "no-violation-found", "seeds": 0, "explored": 0, **resolution}
        log_verdict("plaque expansivity", report["verdict"], {"seeds": 0})
        return report

    center = center_field(f, center)
    X = probe_points(f.manifold, grid, points)
    seeds_x, seeds_y = _seeds(f, center, X, delta)
    log_check("Plaque expansivity", f"{len(seeds_x)} seed pairs, horizon {horizon}, {JUMPS} jumps")

    # explored nodes, beam truncations
    counter = [0, 0]
    witness = None
    try:
        for k in tqdm(range(len(seeds_x)), desc="pseudo-orbit seeds", disable=not config.PROGRESS_BARS):
            x0, y0 = seeds_x[k], seeds_y[k]
            if not _off_center_plaque(center, x0, y0, delta, f.manifold):
                continue
            found = _seed_survives(f, center, x0, y0, delta, horizon, JUMPS, counter, BUDGET, BEAM)
            if found is None:
                continue
            if refine:
                confirm = _seed_survives(f, center, x0, y0, delta, horizon, 2 * JUMPS - 1, counter, BUDGET, BEAM)
                if confirm is None:
                    continue
            (ax, ay, jx, jy), _ = found
            witness = PseudoOrbitPair(ax, ay, jx, jy, start=0).measure(f.manifold)
            break
    except _BudgetExceeded:
        report = {
            "verdict": "inconclusive",
            "explored": counter[0],
            "seeds": len(seeds_x),
            "beam_truncated": counter[1] > 0,
            **resolution,
        }
        log_verdict("plaque expansivity", report["verdict"], {"explored": counter[0]})
        return report

    truncated = counter[1] > 0
    if witness is not None:
        verdict = "violation"
    else:
        verdict = "inconclusive" if truncated else "no-violation-found"
    report = {
        "verdict": verdict,
        "explored": counter[0],
        "seeds": len(seeds_x),
        "beam_truncated": truncated,
        "witness": None if witness is None else witness.to_dict(),
        **resolution,
    }
    log_verdict("plaque expansivity", report["verdict"], {"explored": counter[0], "seeds": len(seeds_x)})
    return report
