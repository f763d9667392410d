# daf_numerics/utils/grid_utils.py

from typing import Any, Tuple

import numpy as np


def get_worst_cell(values: np.ndarray, cells: np.ndarray, find_max: bool) -> Tuple[float, Any]:
    """
    Finds the maximum or minimum value over a grid and the cell it occurs at.

    Args:
        values: One value per grid cell, shape (P,).
        cells: Cell coordinates, shape (P, ...).
        find_max: True to find the maximum value, False to find the minimum.

    Returns:
        Tuple: (Worst_Value, Cell_Coordinates as a list)
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return 0.0, None

    idx = int(np.argmax(values)) if find_max else int(np.argmin(values))
    return float(values[idx]), np.asarray(cells)[idx].tolist()


def unit(vectors: np.ndarray) -> np.ndarray:
    """Normalize along the last axis."""
    vectors = np.asarray(vectors, dtype=float)
    norms = np.linalg.norm(vectors, axis=-1, keepdims=True)
    return vectors / np.where(norms == 0.0, 1.0, norms)


def line_angle(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Unsigned angle between the lines spanned by u and v, in [0, pi/2]."""
    cos = np.abs(np.sum(unit(u) * unit(v), axis=-1))
    return np.arccos(np.clip(cos, 0.0, 1.0))


def line_plane_angle(v: np.ndarray, normal: np.ndarray) -> np.ndarray:
    """Angle between the line spanned by v and the plane with the given normal."""
    return np.pi / 2 - line_angle(v, normal)


def orient_like(vectors: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Flip each vector so it has a nonnegative inner product with its reference."""
    signs = np.sign(np.sum(vectors * reference, axis=-1, keepdims=True))
    return vectors * np.where(signs == 0.0, 1.0, signs)


def split_coordinates(vectors: np.ndarray, bases: np.ndarray) -> np.ndarray:
    """
    Coordinates of vectors in per-point bases.

    Args:
        vectors: shape (P, 3).
        bases: shape (P, 3, 3), basis vectors stored as columns.

    Returns:
        np.ndarray: shape (P, 3) with vectors[i] = bases[i] @ coords[i].
    """
    return np.linalg.solve(bases, vectors[..., None])[..., 0]


def geometric_rate(values: np.ndarray) -> float:
    """Least-squares slope of log(values) against the iterate index."""
    values = np.asarray(values, dtype=float)
    if values.size < 2 or np.any(values <= 0.0):
        return 0.0
    steps = np.arange(values.size, dtype=float)
    return float(np.polyfit(steps, np.log(values), 1)[0])
