# daf_numerics/manifolds/system_zoo.py

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Union

import numpy as np

from .. import config
from ..utils.errors import InvalidInputError
from .chart_space import (
    ManifoldDescriptor,
    glue_vectors,
    hyperbolic_eigendata,
    normalize_coords,
    sample_grid,
    dist_coords,
)

RawMap = Callable[[np.ndarray], np.ndarray]

CAT_MATRIX = ((2, 1), (1, 1))


@dataclass(frozen=True)
class DynamicalSystem:
    """
    An evaluable diffeomorphism of one of the supported charts.

    ``raw_forward`` / ``raw_inverse`` act on fundamental-domain coordinates and
    may leave the domain; normalization (and the gluing it implies) happens here.
    ``raw_jacobian`` is the derivative of ``raw_forward`` in chart coordinates.
    """

    name: str
    params: Dict[str, Any]
    manifold: ManifoldDescriptor
    raw_forward: RawMap = field(repr=False, compare=False)
    raw_inverse: RawMap = field(repr=False, compare=False)
    raw_jacobian: Optional[RawMap] = field(default=None, repr=False, compare=False)
    jacobian_mode: str = "analytic"
    fd_step: float = config.JACOBIAN_FD_STEP
    anchor: str = ""

    # --- Evaluation ---

    def forward(self, points: np.ndarray) -> np.ndarray:
        return normalize_coords(self.raw_forward(np.asarray(points, dtype=float)), self.manifold)[0]

    def inverse(self, points: np.ndarray) -> np.ndarray:
        return normalize_coords(self.raw_inverse(np.asarray(points, dtype=float)), self.manifold)[0]

    def iterate(self, points: np.ndarray, n: int) -> np.ndarray:
        step = self.forward if n >= 0 else self.inverse
        out = np.asarray(points, dtype=float)
        for _ in range(abs(int(n))):
            out = step(out)
        return out

    def _raw_jacobian(self, points: np.ndarray) -> np.ndarray:
        if self.jacobian_mode == "analytic" and self.raw_jacobian is not None:
            return self.raw_jacobian(points)
        return central_difference_jacobian(self.raw_forward, points, self.fd_step)

    def jacobian(self, points: np.ndarray) -> np.ndarray:
        """Df at each point, expressed from the chart at p to the chart at f(p)."""
        points = np.asarray(points, dtype=float)
        J = self._raw_jacobian(points)
        _, shifts = normalize_coords(self.raw_forward(points), self.manifold)
        # rows of the torus block pick up the gluing applied to the image
        column_shifts = np.broadcast_to(shifts[..., None], J.shape[:-1])
        return np.swapaxes(glue_vectors(np.swapaxes(J, -1, -2), column_shifts, self.manifold), -1, -2)

    def inverse_jacobian(self, points: np.ndarray) -> np.ndarray:
        """D(f^-1) at each point q, i.e. the inverse of Df at f^-1(q)."""
        return np.linalg.inv(self.jacobian(self.inverse(points)))

    # --- Self checks ---

    def roundtrip_error(self, points: np.ndarray) -> float:
        points = np.asarray(points, dtype=float)
        there = dist_coords(self.forward(self.inverse(points)), points, self.manifold)
        back = dist_coords(self.inverse(self.forward(points)), points, self.manifold)
        return float(max(there.max(), back.max()))

    def jacobian_mismatch(self, points: np.ndarray, step: float = config.JACOBIAN_FD_STEP) -> float:
        """Largest operator-norm gap between the analytic and central-difference Jacobians."""
        points = np.asarray(points, dtype=float)
        analytic = self._raw_jacobian(points)
        numeric = central_difference_jacobian(self.raw_forward, points, step)
        return float(np.max(np.linalg.norm(analytic - numeric, ord=2, axis=(-2, -1))))

    def recipe(self) -> Dict[str, Any]:
        return {"name": self.name, "params": dict(self.params)}


def central_difference_jacobian(raw_map: RawMap, points: np.ndarray, h: float) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    columns = []
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        columns.append((raw_map(points + e) - raw_map(points - e)) / (2.0 * h))
    return np.stack(columns, axis=-1)


def _block_jacobian(matrix: np.ndarray, shape) -> np.ndarray:
    J = np.zeros(tuple(shape[:-1]) + (3, 3))
    J[..., :2, :2] = matrix
    J[..., 2, 2] = 1.0
    return J


# ==============================================================================
# LINEAR ANOSOV ACTIONS
# ==============================================================================


def make_skew_product(A=CAT_MATRIX, period: float = 1.0) -> DynamicalSystem:
    """(x, theta) -> (A x mod 1, theta) on T^3; the fibres {x} x S^1 are compact invariant circles."""
    eig = hyperbolic_eigendata(A)
    M = np.asarray(A, dtype=float)
    M_inv = np.round(np.linalg.inv(M))

    def raw_forward(p):
        out = np.array(p, dtype=float)
        out[..., :2] = p[..., :2] @ M.T
        return out

    def raw_inverse(p):
        out = np.array(p, dtype=float)
        out[..., :2] = p[..., :2] @ M_inv.T
        return out

    return DynamicalSystem(
        name="skew",
        params={"matrix": [list(r) for r in np.asarray(A, dtype=int).tolist()], "period": period},
        manifold=ManifoldDescriptor.torus(period),
        raw_forward=raw_forward,
        raw_inverse=raw_inverse,
        raw_jacobian=lambda p: _block_jacobian(M, np.shape(p)),
        anchor=f"product A x Id of an Anosov automorphism and the identity (mu = {eig['mu']:.10f})",
    )


def make_suspension_flow_map(A=CAT_MATRIX, time: float = 1.0) -> DynamicalSystem:
    """Time-``time`` map of the constant-roof suspension flow of A on the mapping torus."""
    hyperbolic_eigendata(A)
    if not (np.isfinite(time) and time > 0):
        raise InvalidInputError("Suspension flow time must be positive.")

    def raw_forward(p):
        out = np.array(p, dtype=float)
        out[..., 2] += time
        return out

    def raw_inverse(p):
        out = np.array(p, dtype=float)
        out[..., 2] -= time
        return out

    name = "suspension" if time == 1.0 else "suspension-flow"
    return DynamicalSystem(
        name=name,
        params={"matrix": [list(r) for r in np.asarray(A, dtype=int).tolist()], "time": float(time)},
        manifold=ManifoldDescriptor.mapping_torus(A),
        raw_forward=raw_forward,
        raw_inverse=raw_inverse,
        raw_jacobian=lambda p: np.broadcast_to(np.eye(3), np.shape(p)[:-1] + (3, 3)).copy(),
        anchor=f"time {time:g} map of the suspension Anosov flow",
    )


def make_suspension_time1(A=CAT_MATRIX) -> DynamicalSystem:
    return make_suspension_flow_map(A, 1.0)


# ==============================================================================
# HHU-TYPE MAP
# ==============================================================================


def _circle_map_coefficients(a0: float, a1: float):
    """
    Psi(t) = t + alpha sin(pi t) + beta sin(2 pi t) has fixed points exactly
    at -1 and 0 with Psi'(0) = a0 and Psi'(-1) = a1.
    """
    alpha = (a0 - a1) / (2.0 * np.pi)
    beta = (a0 + a1 - 2.0) / (4.0 * np.pi)
    return alpha, beta


def _hhu_maps(A, c: float, a0: float, a1: float):
    eig = hyperbolic_eigendata(A)
    lam = eig["lam"]
    if not (0.0 < a0 < lam < 1.0 < a1 < 1.0 / lam):
        raise InvalidInputError(
            f"Derivative constraints violated: need 0 < a0 < {lam:.6f} < 1 < a1 < {1.0 / lam:.6f}, got a0={a0}, a1={a1}."
        )
    if not (np.isfinite(c) and c > 0):
        raise InvalidInputError("Amplitude c must be positive.")

    alpha, beta = _circle_map_coefficients(a0, a1)
    if abs(alpha) * np.pi + 2.0 * np.pi * abs(beta) >= 1.0:
        raise InvalidInputError("Circle map Psi is not a diffeomorphism for these slopes.")
    if abs(alpha) <= 2.0 * abs(beta):
        raise InvalidInputError("Circle map Psi would acquire extra fixed points for these slopes.")

    M = np.asarray(A, dtype=float)
    M_inv = np.round(np.linalg.inv(M))
    e_s = eig["e_s"]

    def psi(t):
        return t + alpha * np.sin(np.pi * t) + beta * np.sin(2.0 * np.pi * t)

    def dpsi(t):
        return 1.0 + alpha * np.pi * np.cos(np.pi * t) + 2.0 * np.pi * beta * np.cos(2.0 * np.pi * t)

    def psi_inv(s):
        lo, hi = s - 1.0, s + 1.0
        for _ in range(52):
            mid = 0.5 * (lo + hi)
            above = psi(mid) > s
            hi = np.where(above, mid, hi)
            lo = np.where(above, lo, mid)
        t = 0.5 * (lo + hi)
        for _ in range(2):
            t = t - (psi(t) - s) / dpsi(t)
        return t

    def v(t):
        return -c * np.sin(np.pi * t)

    def dv(t):
        return -c * np.pi * np.cos(np.pi * t)

    def raw_forward(p):
        out = np.array(p, dtype=float)
        theta = p[..., 2]
        out[..., :2] = p[..., :2] @ M.T + v(theta)[..., None] * e_s
        out[..., 2] = psi(theta)
        return out

    def raw_inverse(p):
        out = np.array(p, dtype=float)
        theta = psi_inv(p[..., 2])
        out[..., :2] = (p[..., :2] - v(theta)[..., None] * e_s) @ M_inv.T
        out[..., 2] = theta
        return out

    def raw_jacobian(p):
        theta = np.asarray(p)[..., 2]
        J = _block_jacobian(M, np.shape(p))
        J[..., :2, 2] = dv(theta)[..., None] * e_s
        J[..., 2, 2] = dpsi(theta)
        return J

    return raw_forward, raw_inverse, raw_jacobian


def make_hhu_map(
    A=CAT_MATRIX,
    c: float = 0.05,
    a0: float = 0.3,
    a1: float = 1.5,
    certify: bool = False,
    certify_grid: int = 8,
    certify_iterates: int = 5,
) -> DynamicalSystem:
    """
    f(x, theta) = (A x + v(theta) e_s, Psi(theta)) on T^2 x (R / 2Z), theta in [-1, 1),
    with v(theta) = -c sin(pi theta) and Psi a Morse-Smale circle map fixing -1 and 0.
    The tori theta = -1 (su) and theta = 0 (cu) are invariant.
    """
    raw_forward, raw_inverse, raw_jacobian = _hhu_maps(A, c, a0, a1)
    system = DynamicalSystem(
        name="hhu",
        params={"matrix": [list(r) for r in np.asarray(A, dtype=int).tolist()], "c": c, "a0": a0, "a1": a1},
        manifold=ManifoldDescriptor.torus(period=2.0, theta_origin=-1.0),
        raw_forward=raw_forward,
        raw_inverse=raw_inverse,
        raw_jacobian=raw_jacobian,
        anchor="HHU-type skew product with a cu-torus at theta = 0 (non-uniquely integrable E^c)",
    )
    if certify:
        _certify_or_raise(system, certify_grid, certify_iterates)
    return system


def make_hhu_quotient_map(
    A=CAT_MATRIX,
    c: float = 0.05,
    a0: float = 0.3,
    a1: float = 1.5,
    certify: bool = False,
    certify_grid: int = 8,
    certify_iterates: int = 5,
) -> DynamicalSystem:
    """The descent g of the lift F with F(x, -1) = (A x, -1) to N = (T^2 x R) / Gamma."""
    raw_forward, raw_inverse, raw_jacobian = _hhu_maps(A, c, a0, a1)
    system = DynamicalSystem(
        name="hhu-quotient",
        params={"matrix": [list(r) for r in np.asarray(A, dtype=int).tolist()], "c": c, "a0": a0, "a1": a1},
        manifold=ManifoldDescriptor.hhu_quotient(A),
        raw_forward=raw_forward,
        raw_inverse=raw_inverse,
        raw_jacobian=raw_jacobian,
        anchor="descent of the HHU lift to (T^2 x R)/Gamma; a DAF with non-uniquely integrable E^c",
    )
    if certify:
        _certify_or_raise(system, certify_grid, certify_iterates)
    return system


def _certify_or_raise(system: DynamicalSystem, grid: int, iterates: int) -> None:
    from ..analytics.cone_hyperbolicity import certify_partial_hyperbolicity
    from ..utils.errors import CertificationError

    report = certify_partial_hyperbolicity(system, iterates=iterates, grid=grid)
    if not report["pass"]:
        raise CertificationError(
            f"Cone certification failed for '{system.name}' (margin {report['worst_margin']:.3e}).",
            witness=report["worst_cell"],
        )


# ==============================================================================
# PERTURBATIONS
# ==============================================================================

PERTURBATION_KINDS = ("fiber-shear", "translation-bump")


def perturb(f: DynamicalSystem, kind: str = "fiber-shear", epsilon: float = 1e-3, probe_grid: int = 8) -> DynamicalSystem:
    """
    Compose f with an epsilon-small chart displacement D, g = D o f.

    Both displacements are multiplied by b(theta) = sin^2(pi (theta - theta0) / p),
    which vanishes to second order on the gluing seam:

    * fiber-shear:       theta -> theta + eps sin(2 pi x) b(theta)
    * translation-bump:  x -> x + eps b(theta)
    """
    if kind not in PERTURBATION_KINDS:
        raise InvalidInputError(f"Unknown perturbation '{kind}'. Options: {PERTURBATION_KINDS}")
    if not (np.isfinite(epsilon) and epsilon >= 0):
        raise InvalidInputError("Perturbation amplitude must be nonnegative.")

    params = {"base": f.recipe(), "kind": kind, "epsilon": float(epsilon)}
    if epsilon == 0.0:
        return replace(f, name=f"perturbed:{f.name}", params={**params, "jacobian_constant": 0.0})

    m = f.manifold
    w = np.pi / m.period
    if kind == "fiber-shear" and epsilon * w >= 1.0:
        raise InvalidInputError("Fiber shear amplitude too large: the displacement is not invertible.")

    def bump(theta):
        return np.sin(w * (theta - m.theta_origin)) ** 2

    def dbump(theta):
        return w * np.sin(2.0 * w * (theta - m.theta_origin))

    def displace(p):
        out = np.array(p, dtype=float)
        if kind == "fiber-shear":
            out[..., 2] += epsilon * np.sin(2.0 * np.pi * p[..., 0]) * bump(p[..., 2])
        else:
            out[..., 0] += epsilon * bump(p[..., 2])
        return out

    def undisplace(q):
        out = np.array(q, dtype=float)
        if kind == "fiber-shear":
            shear = epsilon * np.sin(2.0 * np.pi * q[..., 0])
            theta = np.array(q[..., 2], dtype=float)
            for _ in range(30):
                theta = theta - (theta + shear * bump(theta) - q[..., 2]) / (1.0 + shear * dbump(theta))
            out[..., 2] = theta
        else:
            out[..., 0] -= epsilon * bump(q[..., 2])
        return out

    def displace_jacobian(p):
        J = np.broadcast_to(np.eye(3), np.shape(p)[:-1] + (3, 3)).copy()
        if kind == "fiber-shear":
            J[..., 2, 0] = epsilon * 2.0 * np.pi * np.cos(2.0 * np.pi * p[..., 0]) * bump(p[..., 2])
            J[..., 2, 2] += epsilon * np.sin(2.0 * np.pi * p[..., 0]) * dbump(p[..., 2])
        else:
            J[..., 0, 2] = epsilon * dbump(p[..., 2])
        return J

    def raw_forward(p):
        return displace(f.forward(p))

    def raw_inverse(q):
        return f.raw_inverse(normalize_coords(undisplace(q), m)[0])

    def raw_jacobian(p):
        return displace_jacobian(f.forward(p)) @ f.jacobian(p)

    g = DynamicalSystem(
        name=f"perturbed:{f.name}",
        params=params,
        manifold=m,
        raw_forward=raw_forward,
        raw_inverse=raw_inverse,
        raw_jacobian=raw_jacobian,
        jacobian_mode=f.jacobian_mode,
        fd_step=f.fd_step,
        anchor=f"{kind} perturbation of {f.name} (a C^1-close partner g)",
    )

    probe = sample_grid(m, probe_grid, offset=0.37)
    if g.roundtrip_error(probe) > config.ROUNDTRIP_TOL:
        raise InvalidInputError("Perturbed map fails the invertibility probe.")
    jac_gap = np.max(np.linalg.norm(g.jacobian(probe) - f.jacobian(probe), ord=2, axis=(-2, -1)))
    params["jacobian_constant"] = float(jac_gap / epsilon)
    return g


# ==============================================================================
# CATALOG
# ==============================================================================

SYSTEM_CATALOG: Dict[str, Dict[str, Any]] = {
    "skew": {
        "builder": make_skew_product,
        "defaults": {"A": CAT_MATRIX},
        "anchor": "skew -> A x Id, the product of an Anosov diffeomorphism and the identity",
    },
    "suspension": {
        "builder": make_suspension_time1,
        "defaults": {"A": CAT_MATRIX},
        "anchor": "suspension -> time 1 map of an Anosov flow (constant-roof suspension)",
    },
    "suspension-flow": {
        "builder": make_suspension_flow_map,
        "defaults": {"A": CAT_MATRIX, "time": 0.5},
        "anchor": "suspension-flow -> time t map of the suspension flow (tau = t)",
    },
    "hhu": {
        "builder": make_hhu_map,
        "defaults": {"A": CAT_MATRIX, "c": 0.05, "a0": 0.3, "a1": 1.5},
        "certify_iterates": 5,
        "anchor": "hhu -> HHU-type skew product f(x, theta) = (A x + v(theta) e_s, Psi(theta)) with a cu-torus at theta = 0",
    },
    "hhu-quotient": {
        "builder": make_hhu_quotient_map,
        "defaults": {"A": CAT_MATRIX, "c": 0.05, "a0": 0.3, "a1": 1.5},
        "certify_iterates": 5,
        "anchor": "hhu-quotient -> descent g of the HHU lift to (T^2 x R)/Gamma, a DAF with non-uniquely integrable E^c",
    },
}


def build_system(name: str, params: Optional[Dict[str, Any]] = None) -> DynamicalSystem:
    """Resolve a catalog name, or ``perturbed:<base>`` with kind/epsilon params."""
    params = dict(params or {})
    if name.startswith("perturbed:"):
        base_name = name.split(":", 1)[1]
        kind = params.pop("kind", "fiber-shear")
        epsilon = float(params.pop("epsilon", 1e-3))
        base = build_system(base_name, params)
        return perturb(base, kind=kind, epsilon=epsilon)

    if name not in SYSTEM_CATALOG:
        raise InvalidInputError(f"Unknown system '{name}'. Options: {sorted(SYSTEM_CATALOG)} or perturbed:<base>")
    entry = SYSTEM_CATALOG[name]
    kwargs = {**entry["defaults"], **params}
    if "matrix" in kwargs:
        kwargs["A"] = kwargs.pop("matrix")
    try:
        return entry["builder"](**kwargs)
    except TypeError as exc:
        raise InvalidInputError(f"Bad parameters for system '{name}': {exc}") from exc


def resolve_system(source: Union[str, Dict[str, Any]]) -> DynamicalSystem:
    """Accepts a name, a recipe dict {"name", "params"}, or a path to a JSON recipe file."""
    if isinstance(source, dict):
        return build_system(source["name"], source.get("params"))
    path = Path(source)
    if path.suffix == ".json" and path.is_file():
        try:
            recipe = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"Malformed system recipe '{source}': {exc}") from exc
        return build_system(recipe["name"], recipe.get("params"))
    return build_system(str(source))
