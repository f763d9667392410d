# daf_numerics/manifolds/chart_space.py
"""
Flat 3-manifolds in fundamental-domain coordinates.

Three chart families are supported:

* ``torus``          T^2 x (R / pZ), no gluing twist.
* ``mapping_torus``  T^2 x [0, 1] / (x, s + 1) ~ (A x, s), roof 1.
* ``hhu_quotient``   (T^2 x R) / Gamma with Gamma generated by (x, t) -> (A x, t + 2).

Every chart is written as ``(x, y, theta)``. The torus part is reduced to [0, 1)
and theta to the half-open interval [theta_origin, theta_origin + period).
Crossing theta_origin + period applies the gluing matrix G to the torus part,
with G = I, A, A^-1 for the three kinds respectively.
"""

from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np

from ..utils.errors import InvalidInputError

TORUS = "torus"
MAPPING_TORUS = "mapping_torus"
HHU_QUOTIENT = "hhu_quotient"
KINDS = (TORUS, MAPPING_TORUS, HHU_QUOTIENT)

IntMatrix = Tuple[Tuple[int, int], Tuple[int, int]]


def hyperbolic_eigendata(matrix) -> Dict[str, np.ndarray]:
    """
    Eigen-decomposition of a hyperbolic unimodular 2x2 matrix.

    Returns a dict with the expanding eigenvalue ``mu``, the contracting one
    ``lam`` (both as absolute values), and unit eigenvectors ``e_u``, ``e_s``
    with their first nonzero component positive.
    """
    A = np.asarray(matrix, dtype=float)
    if A.shape != (2, 2) or not np.all(np.isfinite(A)):
        raise InvalidInputError("Matrix must be a finite 2x2 array.")
    if not np.allclose(A, np.round(A)):
        raise InvalidInputError("Matrix must have integer entries.")
    det = round(float(np.linalg.det(A)))
    if abs(det) != 1:
        raise InvalidInputError(f"Matrix must be unimodular (det = +-1), got det = {det}.")
    if abs(np.trace(A)) <= 2:
        raise InvalidInputError("Matrix is not hyperbolic (|trace| <= 2).")

    values, vectors = np.linalg.eig(A)
    if np.any(np.abs(values.imag) > 0):
        raise InvalidInputError("Matrix has complex eigenvalues.")
    values, vectors = values.real, vectors.real
    order = np.argsort(np.abs(values))
    lam_val, mu_val = values[order[0]], values[order[1]]
    e_s, e_u = vectors[:, order[0]], vectors[:, order[1]]

    def _canonical(v):
        v = v / np.linalg.norm(v)
        lead = v[np.flatnonzero(np.abs(v) > 1e-14)[0]]
        return v if lead > 0 else -v

    return {
        "mu": float(abs(mu_val)),
        "lam": float(abs(lam_val)),
        "mu_signed": float(mu_val),
        "lam_signed": float(lam_val),
        "e_u": _canonical(e_u),
        "e_s": _canonical(e_s),
    }


@dataclass(frozen=True)
class ManifoldDescriptor:
    kind: str
    matrix: Optional[IntMatrix] = None
    period: float = 1.0
    theta_origin: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInputError(f"Unknown manifold kind '{self.kind}'. Options: {KINDS}")
        if not (np.isfinite(self.period) and self.period > 0):
            raise InvalidInputError("Manifold period must be a positive real.")
        if self.kind != TORUS:
            if self.matrix is None:
                raise InvalidInputError(f"Manifold kind '{self.kind}' requires a gluing matrix.")
            hyperbolic_eigendata(self.matrix)
        if self.matrix is not None:
            frozen = tuple(tuple(int(round(v)) for v in row) for row in self.matrix)
            object.__setattr__(self, "matrix", frozen)

    # --- Constructors ---

    @classmethod
    def torus(cls, period: float = 1.0, theta_origin: float = 0.0) -> "ManifoldDescriptor":
        return cls(TORUS, None, float(period), float(theta_origin))

    @classmethod
    def mapping_torus(cls, matrix) -> "ManifoldDescriptor":
        return cls(MAPPING_TORUS, matrix, 1.0, 0.0)

    @classmethod
    def hhu_quotient(cls, matrix) -> "ManifoldDescriptor":
        return cls(HHU_QUOTIENT, matrix, 2.0, -1.0)

    # --- Gluing ---

    @property
    def gluing(self) -> np.ndarray:
        """G with (x, theta + period) ~ (G x, theta)."""
        if self.kind == TORUS:
            return np.eye(2)
        A = np.asarray(self.matrix, dtype=float)
        if self.kind == MAPPING_TORUS:
            return A
        return np.round(np.linalg.inv(A))

    def gluing_power(self, n: int) -> np.ndarray:
        G = self.gluing
        if n < 0:
            G = np.round(np.linalg.inv(G))
        return np.linalg.matrix_power(G, abs(int(n)))

    # --- Serialization ---

    def to_dict(self) -> Dict:
        return {
            "kind": self.kind,
            "matrix": [list(row) for row in self.matrix] if self.matrix is not None else None,
            "period": self.period,
            "theta_origin": self.theta_origin,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "ManifoldDescriptor":
        kind = data.get("kind")
        matrix = data.get("matrix")
        if kind == HHU_QUOTIENT:
            return cls.hhu_quotient(matrix)
        if kind == MAPPING_TORUS:
            return cls.mapping_torus(matrix)
        return cls(kind, matrix, float(data.get("period", 1.0)), float(data.get("theta_origin", 0.0)))


@dataclass(frozen=True)
class ChartPoint:
    coords: Tuple[float, float, float]
    manifold: ManifoldDescriptor

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.coords, dtype=float)

    def to_list(self):
        return list(self.coords)


# ==============================================================================
# NORMALIZATION
# ==============================================================================


def _as_coords(p) -> np.ndarray:
    if isinstance(p, ChartPoint):
        return p.array
    return np.asarray(p, dtype=float)


def normalize_coords(coords: np.ndarray, m: ManifoldDescriptor) -> Tuple[np.ndarray, np.ndarray]:
    """
    Vectorized normalization of raw chart coordinates.

    Args:
        coords: shape (..., 3).
        m: manifold descriptor.

    Returns:
        Tuple: (normalized coordinates, number of period shifts removed per point).
        The shift count lets callers carry tangent vectors through the gluing.
    """
    coords = np.array(coords, dtype=float)
    if not np.all(np.isfinite(coords)):
        raise InvalidInputError("Chart coordinates must be finite.")
    flat = coords.reshape(-1, 3)

    shifts = np.floor((flat[:, 2] - m.theta_origin) / m.period).astype(int)
    theta = flat[:, 2] - shifts * m.period
    # floor can leave theta one period too high after rounding
    upper = theta >= m.theta_origin + m.period
    theta[upper] -= m.period
    shifts[upper] += 1
    flat[:, 2] = theta

    if m.kind != TORUS:
        for n in np.unique(shifts):
            if n == 0:
                continue
            sel = shifts == n
            flat[sel, :2] = flat[sel, :2] @ m.gluing_power(n).T
    flat[:, :2] = np.mod(flat[:, :2], 1.0)
    flat[:, :2][flat[:, :2] >= 1.0] = 0.0
    return flat.reshape(coords.shape), shifts.reshape(coords.shape[:-1])


def glue_vectors(vectors: np.ndarray, shifts: np.ndarray, m: ManifoldDescriptor) -> np.ndarray:
    """Carry tangent vectors through the gluing applied by normalize_coords."""
    out = np.array(vectors, dtype=float)
    if m.kind == TORUS:
        return out
    flat, flat_shifts = out.reshape(-1, 3), np.asarray(shifts).reshape(-1)
    for n in np.unique(flat_shifts):
        if n == 0:
            continue
        sel = flat_shifts == n
        flat[sel, :2] = flat[sel, :2] @ m.gluing_power(n).T
    return flat.reshape(out.shape)


def normalize(p, m: ManifoldDescriptor) -> ChartPoint:
    """The unique fundamental-domain representative of raw coordinates p."""
    raw = _as_coords(p)
    if raw.shape != (3,):
        raise InvalidInputError("A chart point has exactly 3 coordinates.")
    coords, _ = normalize_coords(raw, m)
    return ChartPoint(tuple(float(c) for c in coords), m)


# ==============================================================================
# METRIC
# ==============================================================================


def displacement(p: np.ndarray, q: np.ndarray, m: ManifoldDescriptor) -> np.ndarray:
    """
    Shortest representative of q - p over deck translates within one
    fundamental-domain shift in each direction, expressed in the chart at p.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    p, q = np.broadcast_arrays(p, q)

    best = None
    best_norm = None
    for k in (0, -1, 1):
        # (y, theta) ~ (G^-k y, theta + k * period)
        qx = q[..., :2] @ m.gluing_power(-k).T if k != 0 else q[..., :2]
        dx = qx - p[..., :2]
        dx = dx - np.round(dx)
        dtheta = q[..., 2] + k * m.period - p[..., 2]
        cand = np.concatenate([dx, dtheta[..., None]], axis=-1)
        norm = np.linalg.norm(cand, axis=-1)
        if best is None:
            best, best_norm = cand, norm
        else:
            closer = norm < best_norm
            best = np.where(closer[..., None], cand, best)
            best_norm = np.where(closer, norm, best_norm)
        if m.kind == TORUS and k == 0:
            # plain torus: reduce theta directly
            best[..., 2] = best[..., 2] - m.period * np.round(best[..., 2] / m.period)
            return best
    return best


def dist_coords(p: np.ndarray, q: np.ndarray, m: ManifoldDescriptor) -> np.ndarray:
    """Symmetric chart distance: the shorter of the displacements measured in either chart."""
    forward = np.linalg.norm(displacement(p, q, m), axis=-1)
    if m.kind == TORUS:
        return forward
    # the gluing is not an isometry, so the chart at q can see a shorter seam crossing
    return np.minimum(forward, np.linalg.norm(displacement(q, p, m), axis=-1))



def dist(p: ChartPoint, q: ChartPoint) -> float:
    if p.manifold != q.manifold:
        raise InvalidInputError("dist requires points on the same manifold.")
    return float(dist_coords(p.array, q.array, p.manifold))


def _sample_array(S, manifold: Optional[ManifoldDescriptor]) -> Tuple[np.ndarray, ManifoldDescriptor]:
    if isinstance(S, np.ndarray):
        if manifold is None:
            raise InvalidInputError("Array samples need an explicit manifold.")
        return np.asarray(S, dtype=float).reshape(-1, 3), manifold
    points = list(S)
    if not points:
        raise InvalidInputError("Hausdorff distance of an empty sample is undefined.")
    m = points[0].manifold
    if any(pt.manifold != m for pt in points):
        raise InvalidInputError("Sample mixes manifolds.")
    return np.array([pt.coords for pt in points], dtype=float), m


def hausdorff_distance(
    S1: Union[Sequence[ChartPoint], np.ndarray],
    S2: Union[Sequence[ChartPoint], np.ndarray],
    manifold: Optional[ManifoldDescriptor] = None,
    chunk: int = 2048,
) -> float:
    """Max of the two directed sup-inf distances, computed with dist."""
    A, ma = _sample_array(S1, manifold)
    B, mb = _sample_array(S2, manifold)
    if ma != mb:
        raise InvalidInputError("Hausdorff distance requires samples on the same manifold.")
    if len(A) == 0 or len(B) == 0:
        raise InvalidInputError("Hausdorff distance of an empty sample is undefined.")

    # fixed argument order makes the result exactly symmetric
    if A.tobytes() > B.tobytes():
        A, B = B, A

    row_min = np.empty(len(A))
    col_min = np.full(len(B), np.inf)
    for start in range(0, len(A), chunk):
        block = dist_coords(A[start : start + chunk, None, :], B[None, :, :], ma)
        row_min[start : start + chunk] = block.min(axis=1)
        col_min = np.minimum(col_min, block.min(axis=0))
    return float(max(row_min.max(), col_min.max()))


def sample_grid(m: ManifoldDescriptor, n: int, offset: float = 0.0) -> np.ndarray:
    """An n^3 grid of fundamental-domain points, optionally shifted by a fraction of a cell."""
    if n < 1:
        raise InvalidInputError("Grid resolution must be positive.")
    ticks = (np.arange(n) + offset) / n
    X, Y, T = np.meshgrid(ticks, ticks, ticks, indexing="ij")
    theta = m.theta_origin + m.period * T
    return np.column_stack([X.ravel(), Y.ravel(), theta.ravel()])
