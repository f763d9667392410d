# daf_numerics/continuation/conjugacy.py

from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import CubicSpline

from .. import config
from ..analytics.cone_hyperbolicity import RateReport
from ..analytics.leaf_numerics import LeafArc
from ..manifolds.chart_space import ManifoldDescriptor, displacement, dist_coords, hausdorff_distance, normalize_coords
from ..manifolds.system_zoo import DynamicalSystem
from ..utils.color_log import log_check, log_verdict
from ..utils.errors import InvalidInputError, ModelViolationError
from .graph_transform import TubularFrame


# ==============================================================================
# LEAF CURVES
# ==============================================================================


class LeafCurve:
    """
    Cubic interpolant of an ordered sample of a leaf, lifted to one chart.
    On compact leaves the lift closes up by a translation and the curve is
    periodic in its parameter.
    """

    def __init__(self, params: np.ndarray, points: np.ndarray, manifold: ManifoldDescriptor, period: Optional[float] = None):
        self.params = np.asarray(params, dtype=float)
        self.manifold = manifold
        self.period = period
        steps = displacement(points[:-1], points[1:], manifold)
        lifted = points[0] + np.vstack([np.zeros(3), np.cumsum(steps, axis=0)])
        if period is None:
            self.drift = np.zeros(3)
            self._spline = CubicSpline(self.params, lifted, axis=0)
            return
        closing = lifted[-1] + displacement(points[-1], points[0], manifold)
        knots = np.append(self.params, self.params[0] + period)
        lifted = np.vstack([lifted, closing])
        self.drift = (closing - lifted[0]) / period
        periodic = lifted - (knots - knots[0])[:, None] * self.drift
        periodic[-1] = periodic[0]
        self._spline = CubicSpline(knots, periodic, axis=0, bc_type="periodic")

    def lifted(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return self._spline(t) + (t - self.params[0])[..., None] * self.drift

    def __call__(self, t) -> np.ndarray:
        return normalize_coords(self.lifted(t), self.manifold)[0]

    def tangent(self, t) -> np.ndarray:
        return self._spline(np.asarray(t, dtype=float), 1) + self.drift

    def locate(self, q: np.ndarray, steps: int = 8) -> np.ndarray:
        """Parameter of the curve point nearest each q, by Newton from the closest sample."""
        q = np.asarray(q, dtype=float).reshape(-1, 3)
        seeds = self.params[:: max(1, len(self.params) // 512)]
        samples = self(seeds)
        t = np.empty(len(q))
        for start in range(0, len(q), 1024):
            block = q[start : start + 1024]
            d = dist_coords(block[:, None, :], samples[None, :, :], self.manifold)
            t[start : start + 1024] = seeds[np.argmin(d, axis=1)]
        for _ in range(steps):
            T = self.tangent(t)
            d = displacement(self(t), q, self.manifold)
            t = t + np.sum(d * T, axis=-1) / np.sum(T * T, axis=-1)
        return t


def _periodic_interp(x, xp, fp, period: Optional[float], jump: float) -> np.ndarray:
    """np.interp with f(x + period) = f(x) + jump on compact leaves."""
    x = np.asarray(x, dtype=float)
    if period is None:
        return np.interp(x, xp, fp)
    k = np.floor((x - xp[0]) / period)
    r = x - k * period
    xs = np.append(xp, xp[0] + period)
    fs = np.append(fp, fp[0] + jump)
    return np.interp(r, xs, fs) + k * jump


# ==============================================================================
# LEAF CONJUGACY DATA
# ==============================================================================


@dataclass
class LeafConjugacyData:
    """
    Samples of h1: L -> L' over the parameter t of L, the raw arc-length map
    Psi1(t) and, once smoothed, Psi with its derivative and h = gamma' o Psi.
    """

    t: np.ndarray
    source: np.ndarray
    target: np.ndarray
    psi1: np.ndarray
    length: Optional[float]
    length_prime: Optional[float]
    delta3: float
    manifold: ManifoldDescriptor
    psi: Optional[np.ndarray] = None
    dpsi: Optional[np.ndarray] = None
    h_points: Optional[np.ndarray] = None
    stats: Dict[str, Any] = field(default_factory=dict)

    @property
    def closed(self) -> bool:
        return self.length is not None

    def source_curve(self) -> LeafCurve:
        return LeafCurve(self.t, self.source, self.manifold, self.length)

    def target_curve(self) -> LeafCurve:
        return LeafCurve(self.t, self.target, self.manifold, self.length)

    def psi1_at(self, t) -> np.ndarray:
        return _periodic_interp(t, self.t, self.psi1, self.length, self.length_prime or 0.0)

    def psi1_inverse(self, s) -> np.ndarray:
        return _periodic_interp(s, self.psi1, self.t, self.length_prime, self.length or 0.0)

    def psi_at(self, t) -> np.ndarray:
        if self.psi is None:
            raise InvalidInputError("Psi is not available before smooth_to_h.")
        return _periodic_interp(t, self.t, self.psi, self.length, self.length_prime or 0.0)

    def gamma_prime(self, s) -> np.ndarray:
        """Point of L' at arc length s from L'(t[0])."""
        return self.target_curve()(self.psi1_inverse(s))

    def psi_inverse(self, s, tol: Optional[float] = None) -> np.ndarray:
        """Monotone inversion of Psi by bisection."""
        TOL = config.INVERSION_TOL if tol is None else tol
        s = np.asarray(s, dtype=float)
        span = self.length if self.closed else self.t[-1] - self.t[0]
        lo = np.full(s.shape, self.t[0] - span)
        hi = np.full(s.shape, self.t[-1] + span)
        while np.max(hi - lo) > TOL:
            mid = 0.5 * (lo + hi)
            above = self.psi_at(mid) > s
            hi = np.where(above, mid, hi)
            lo = np.where(above, lo, mid)
        return 0.5 * (lo + hi)

    def h(self, t) -> np.ndarray:
        return self.gamma_prime(self.psi_at(t))

    def to_dict(self) -> Dict[str, Any]:
        out = {"samples": len(self.t), "closed": self.closed, "delta3": self.delta3, **self.stats}
        if self.dpsi is not None:
            out.update({"dpsi_min": float(np.min(self.dpsi)), "dpsi_max": float(np.max(self.dpsi))})
        return out


def _dense_params(frame: TubularFrame, delta3: float, per_window: int) -> np.ndarray:
    h = delta3 / per_window
    if frame.closed:
        n = int(np.ceil(frame.length / h))
        return frame.start + frame.length * np.arange(n) / n
    n = int(np.ceil(frame.length / h))
    return np.linspace(frame.start, frame.start + frame.length, n + 1)


def build_h1(
    f: DynamicalSystem,
    g: DynamicalSystem,
    frame: TubularFrame,
    prime: LeafArc,
    rates: RateReport,
    per_window: Optional[int] = None,
    check: bool = True,
) -> LeafConjugacyData:
    """
    h1(L(t)) = L'(t): the point of L' reached from L(t) through the cu
    section and the unstable projection onto the cs section, which in tube
    coordinates keeps the centre parameter. Psi1 is the arc length along L'.
    """
    PER_WINDOW = config.WINDOW_MIN_SAMPLES if per_window is None else per_window
    m = f.manifold
    delta3 = rates.delta3
    period = frame.length if frame.closed else None

    t = _dense_params(frame, delta3, PER_WINDOW)
    coarse = LeafCurve(prime.params, prime.points, m, period)
    source = frame.base_points(t)
    target = coarse(t)

    ends = np.vstack([target, target[:1]]) if frame.closed else target
    chords = dist_coords(ends[:-1], ends[1:], m)
    psi1 = np.concatenate([[0.0], np.cumsum(chords[: len(t) - 1])])
    length_prime = float(np.sum(chords)) if frame.closed else None

    data = LeafConjugacyData(t, source, target, psi1, period, length_prime, delta3, m)

    # distances along L' for samples delta3 apart along L
    gaps = data.psi1_at(t + delta3) - psi1
    valid = np.ones(len(t), dtype=bool) if frame.closed else t + delta3 <= t[-1]
    gaps = gaps[valid]
    distortion_ok = bool(np.all((gaps > delta3 / 2.0) & (gaps < 2.0 * delta3)))
    data.stats["step_distortion_ok"] = distortion_ok
    data.stats["step_distortion_range"] = [float(np.min(gaps)), float(np.max(gaps))]
    data.stats["h1_to_identity_sup"] = float(np.max(dist_coords(source, target, m)))

    probe = frame.base_points(frame.params)
    if hausdorff_distance(f.forward(probe), probe, manifold=m) < 1e-9:
        # invariant leaf: compare g h1(x) with h1(f x)
        t_f, _, _ = frame.coords(f.forward(source))
        data.stats["equivariance_residual"] = float(np.max(dist_coords(g.forward(target), coarse(t_f), m)))
        data.stats["equivariance_ok"] = data.stats["equivariance_residual"] < 2.0 * rates.delta_prime + config.GRAPH_TOL

    if check and not distortion_ok:
        bad = int(np.argmin(np.abs(gaps - delta3)))
        raise ModelViolationError(
            f"h1 distorts a delta3-step to {gaps[bad]:.3e}, outside (delta3/2, 2 delta3).",
            witness={"t": float(t[valid][bad])},
        )
    return data


def smooth_to_h(data: LeafConjugacyData, delta3: Optional[float] = None, check: bool = True) -> LeafConjugacyData:
    """
    Psi(t) = (1/delta3) * integral of Psi1 over [t - delta3/2, t + delta3/2],
    by cumulative trapezoid quadrature; DPsi(t) = (Psi1(t + delta3/2) - Psi1(t - delta3/2)) / delta3.
    On open leaves only parameters whose window fits inside the sample range are kept.
    """
    D3 = data.delta3 if delta3 is None else float(delta3)
    t, psi1 = data.t, data.psi1
    if len(t) < 2 or D3 / np.max(np.diff(t)) < config.WINDOW_MIN_SAMPLES - 1e-9:
        raise InvalidInputError(
            f"Psi1 needs at least {config.WINDOW_MIN_SAMPLES} samples per delta3 window (delta3 = {D3:g})."
        )
    half = 0.5 * D3

    if data.closed:
        pad = int(np.ceil(half / np.min(np.diff(t)))) + 2
        n = len(t)
        idx = np.arange(-pad, n + pad)
        wraps = np.floor_divide(idx, n)
        t_ext = t[idx % n] + wraps * data.length
        psi1_ext = psi1[idx % n] + wraps * data.length_prime
        keep = np.arange(n)
        centres = t
    else:
        t_ext, psi1_ext = t, psi1
        keep = np.flatnonzero((t - half >= t[0] - 1e-12) & (t + half <= t[-1] + 1e-12))
        centres = t[keep]

    integral = CubicSpline(t_ext, cumulative_trapezoid(psi1_ext, t_ext, initial=0.0))
    raw = CubicSpline(t_ext, psi1_ext)
    psi = (integral(centres + half) - integral(centres - half)) / D3
    dpsi = (raw(centres + half) - raw(centres - half)) / D3

    out = replace(
        data,
        t=centres,
        source=data.source[keep],
        target=data.target[keep],
        psi1=psi1[keep],
        delta3=D3,
        psi=psi,
        dpsi=dpsi,
        stats=dict(data.stats),
    )
    out.stats.update({"dpsi_min": float(np.min(dpsi)), "dpsi_max": float(np.max(dpsi))})

    if check:
        if not np.all(np.diff(psi) > 0.0):
            bad = int(np.argmin(np.diff(psi)))
            raise ModelViolationError("Psi is not strictly increasing.", witness={"t": float(centres[bad])})
        outside = (dpsi <= 0.5) | (dpsi >= 2.0)
        if np.any(outside):
            bad = int(np.argmax(outside))
            raise ModelViolationError(
                f"DPsi = {dpsi[bad]:.4f} leaves (1/2, 2).", witness={"t": float(centres[bad])}
            )

    if len(out.target) > 3:
        out.h_points = out.h(centres)
    return out


# ==============================================================================
# RHO & RESIDUALS
# ==============================================================================


def build_rho_and_residual(
    f: DynamicalSystem,
    g: DynamicalSystem,
    leaves: Sequence[LeafConjugacyData],
    rates: RateReport,
) -> Dict[str, Any]:
    """
    rho = h^-1 o g o h o f^-1 on each f-invariant leaf. h o rho o f = g o h
    holds by construction, so its residual measures the inversion error.
    """
    log_check("Leaf conjugacy residuals", f"{len(leaves)} leaves")
    semi, h_id, rho_id, dmin, dmax = [], [], [], [], []
    distortion_ok = True
    for data in leaves:
        if data.psi is None:
            raise InvalidInputError("Leaf data must be smoothed before building rho.")
        source = data.source_curve()
        x = source(data.t)
        t_pre = source.locate(f.inverse(x))
        if np.max(dist_coords(source(t_pre), f.inverse(x), f.manifold)) > 1e-7:
            raise InvalidInputError("build_rho_and_residual needs f-invariant leaves.")

        y = g.forward(data.h(t_pre))
        s = data.psi1_at(data.target_curve().locate(y))
        t_rho = data.psi_inverse(s)
        rho = source(t_rho)

        # semi-conjugacy at x: h(rho(f(x'))) against g(h(x')) with x' = f^-1(x)
        semi.append(np.max(dist_coords(data.gamma_prime(data.psi_at(t_rho)), y, f.manifold)))
        h_id.append(np.max(dist_coords(x, data.h(data.t), f.manifold)))
        shift = t_rho - data.t
        if data.closed:
            shift = np.mod(shift + 0.5 * data.length, data.length) - 0.5 * data.length
        rho_id.append(np.max(np.abs(shift)))
        dmin.append(np.min(data.dpsi))
        dmax.append(np.max(data.dpsi))
        distortion_ok = distortion_ok and bool(data.stats.get("step_distortion_ok", True))
        data.stats["rho_points"] = rho

    report = {
        "semi_conjugacy_sup": float(max(semi)),
        "h_to_identity_sup": float(max(h_id)),
        "rho_to_identity_sup": float(max(rho_id)),
        "dpsi_min": float(min(dmin)),
        "dpsi_max": float(max(dmax)),
        "step_distortion_ok": bool(distortion_ok),
    }
    ok = report["semi_conjugacy_sup"] < config.SEMI_CONJUGACY_TOL and report["rho_to_identity_sup"] < rates.delta
    log_verdict("leaf conjugacy", "pass" if ok else "fail", report)
    return report


# ==============================================================================
# INJECTIVITY
# ==============================================================================


def injectivity_probe(
    leaves: Sequence[LeafConjugacyData],
    delta: float,
    plaque_verdict: Optional[str] = None,
    pitch: Optional[float] = None,
) -> Dict[str, Any]:
    """
    Near-collisions h(x) ~ h(y) with y outside W^c_{3 delta}(x), searched on
    the sampled leaves at pitch delta/10. No collision together with a
    no-violation-found plaque verdict gives the leaf-conjugacy verdict.
    """
    PITCH = delta / 10.0 if pitch is None else pitch
    if not leaves:
        raise InvalidInputError("Injectivity probe needs at least one sampled leaf.")
    m = leaves[0].manifold

    X, H, leaf_id, params = [], [], [], []
    coarse = False
    for k, data in enumerate(leaves):
        h_points = data.h_points if data.h_points is not None else data.target
        spacing = np.max(np.diff(data.t)) if len(data.t) > 1 else np.inf
        stride = max(1, int(PITCH // spacing)) if np.isfinite(spacing) else 1
        coarse = coarse or spacing > PITCH
        X.append(data.source[::stride])
        H.append(h_points[::stride])
        leaf_id.append(np.full(len(data.source[::stride]), k))
        params.append(data.t[::stride])
    X, H = np.vstack(X), np.vstack(H)
    leaf_id, params = np.concatenate(leaf_id), np.concatenate(params)

    witness = None
    for start in range(0, len(H), 1024):
        block = slice(start, start + 1024)
        d = dist_coords(H[block][:, None, :], H[None, :, :], m)
        same = leaf_id[block][:, None] == leaf_id[None, :]
        sep = np.abs(params[block][:, None] - params[None, :])
        for k, data in enumerate(leaves):
            if data.closed:
                rows = leaf_id[block] == k
                sep[rows] = np.minimum(sep[rows], data.length - sep[rows])
        far = ~same | (sep > 3.0 * delta)
        hit = far & (d < PITCH)
        if np.any(hit):
            i, j = np.argwhere(hit)[0]
            i += start
            witness = {"x": X[i].tolist(), "y": X[j].tolist(), "h_distance": float(d[i - start, j])}
            break

    if witness is not None:
        verdict = "collision"
    elif coarse:
        verdict = "inconclusive"
    elif plaque_verdict == "no-violation-found":
        verdict = "conjugacy"
    else:
        verdict = "no-collision"
    log_verdict("injectivity", verdict, {"samples": len(H), "pitch": PITCH})
    return {"verdict": verdict, "collision_witness": witness, "samples": int(len(H)), "pitch": PITCH}
