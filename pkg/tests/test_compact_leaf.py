# tests/test_compact_leaf.py

import numpy as np
import pytest

from daf_numerics.daf.compact_leaf import (
    boundary_index,
    find_compact_periodic_center_leaf,
    localize_zero,
    rectangle_boundary,
    winding_number,
)
from daf_numerics.manifolds.chart_space import dist_coords
from daf_numerics.utils.errors import InvalidInputError, ResolutionError

# A^2 - I for the cat map: a saddle displacement, index -1
SADDLE = np.array([[4.0, 3.0], [3.0, 1.0]])


def _linear(M, zero=(0.0, 0.0)):
    return lambda p: (np.asarray(p) - np.asarray(zero)) @ np.asarray(M).T


def test_winding_number_of_linear_fields() -> None:
    boundary = rectangle_boundary(np.zeros(2), np.ones(2), 64)
    assert winding_number(_linear(SADDLE)(boundary)) == -1
    assert winding_number(_linear(np.eye(2))(boundary)) == 1
    assert winding_number(_linear([[0.0, -1.0], [1.0, 0.0]])(boundary)) == 1
    assert winding_number(_linear(np.eye(2), zero=(3.0, 3.0))(boundary)) == 0


def test_winding_number_needs_resolved_boundaries() -> None:
    boundary = rectangle_boundary(np.zeros(2), np.ones(2), 16)
    values = _linear(np.eye(2))(boundary)
    with pytest.raises(ResolutionError):
        winding_number(values, max_step=0.01)
    values[3] = 0.0
    with pytest.raises(ResolutionError):
        winding_number(values)


def test_rectangle_boundary_runs_counter_clockwise() -> None:
    boundary = rectangle_boundary(np.array([1.0, 2.0]), np.array([0.5, 0.25]), 4)
    assert boundary.shape == (16, 2)
    np.testing.assert_allclose(boundary[0], [0.5, 1.75])
    np.testing.assert_allclose(boundary[4], [1.5, 1.75])
    np.testing.assert_allclose(boundary[8], [1.5, 2.25])
    np.testing.assert_allclose(boundary[12], [0.5, 2.25])


def test_boundary_index_is_stable_under_refinement() -> None:
    field = _linear(SADDLE)
    assert boundary_index(field, (0.0, 0.0), 1.0, samples=4) == -1
    assert boundary_index(field, (0.0, 0.0), 1.0, samples=16) == boundary_index(field, (0.0, 0.0), 1.0, samples=32)
    assert boundary_index(field, (5.0, 5.0), 1.0) == 0


def test_localize_zero_bisects_to_the_saddle() -> None:
    zero = np.array([0.3, -0.2])
    center, index = localize_zero(_linear(SADDLE, zero), (0.0, 0.0), 1.0)
    assert index == -1
    np.testing.assert_allclose(center, zero, atol=1e-9)
    with pytest.raises(InvalidInputError):
        localize_zero(_linear(SADDLE, zero), (5.0, 5.0), 1.0)


def test_skew_product_has_a_compact_fibre_through_the_fixed_point(skew) -> None:
    report = find_compact_periodic_center_leaf(skew, np.array([0.004, 0.003, 0.3]))
    assert report["verdict"] == "found"
    assert report["return_time"] == 1
    assert report["index"] == -1
    assert report["period"] == 1
    assert report["leaf_length"] == pytest.approx(1.0, abs=1e-6)
    assert report["closure_error"] < 1e-7
    assert float(dist_coords(np.array(report["point"]), np.array([0.0, 0.0, 0.3]), skew.manifold)) < 1e-8
    assert report["leaf"].tag == "c"


def test_compact_leaf_search_reports_exhausted_budgets(skew) -> None:
    report = find_compact_periodic_center_leaf(skew, np.array([0.3, 0.41, 0.1]), k_budget=1)
    assert report["verdict"] == "not-found"
    assert report["tried"] == []
    assert report["k_budget"] == 1


def test_compact_leaf_search_refuses_a_fixed_seed(skew) -> None:
    with pytest.raises(InvalidInputError):
        find_compact_periodic_center_leaf(skew, np.array([0.0, 0.0, 0.5]))
