# tests/test_chart_space.py

import numpy as np
import pytest

from daf_numerics.manifolds.chart_space import (
    ChartPoint,
    ManifoldDescriptor,
    displacement,
    dist,
    dist_coords,
    hausdorff_distance,
    hyperbolic_eigendata,
    normalize,
    normalize_coords,
    sample_grid,
)
from daf_numerics.utils.errors import InvalidInputError

CAT = ((2, 1), (1, 1))

TORUS = ManifoldDescriptor.torus()
MAPPING_TORUS = ManifoldDescriptor.mapping_torus(CAT)
QUOTIENT = ManifoldDescriptor.hhu_quotient(CAT)


def test_cat_matrix_eigendata() -> None:
    eig = hyperbolic_eigendata(CAT)
    assert eig["mu"] == pytest.approx(2.6180339887, abs=1e-10)
    assert eig["lam"] == pytest.approx(0.3819660113, abs=1e-10)
    A = np.asarray(CAT, dtype=float)
    np.testing.assert_allclose(A @ eig["e_u"], eig["mu"] * eig["e_u"], atol=1e-12)
    np.testing.assert_allclose(A @ eig["e_s"], eig["lam"] * eig["e_s"], atol=1e-12)


@pytest.mark.parametrize(
    "matrix",
    [((1, 1), (0, 1)), ((2, 0), (0, 1)), ((1.5, 1), (1, 1)), ((1, 0, 0), (0, 1, 0))],
)
def test_eigendata_rejects_non_hyperbolic_matrices(matrix) -> None:
    with pytest.raises(InvalidInputError):
        hyperbolic_eigendata(matrix)


def test_torus_normalization_reduces_every_coordinate() -> None:
    p = normalize((1.3, -0.6, 2.5), TORUS)
    np.testing.assert_allclose(p.array, [0.3, 0.4, 0.5], atol=1e-12)


def test_quotient_normalization_applies_inverse_gluing() -> None:
    coords, shifts = normalize_coords(np.array([0.3, 0.2, 2.1]), QUOTIENT)
    np.testing.assert_allclose(coords, [0.1, 0.1, 0.1], atol=1e-12)
    assert int(shifts) == 1


def test_mapping_torus_normalization_applies_gluing() -> None:
    coords, shifts = normalize_coords(np.array([0.1, 0.2, 1.25]), MAPPING_TORUS)
    np.testing.assert_allclose(coords, [0.4, 0.3, 0.25], atol=1e-12)
    assert int(shifts) == 1


@pytest.mark.parametrize("m", [TORUS, MAPPING_TORUS, QUOTIENT])
def test_normalize_is_idempotent(m, rng) -> None:
    raw = rng.uniform(-3.0, 3.0, size=(500, 3))
    once, _ = normalize_coords(raw, m)
    twice, shifts = normalize_coords(once, m)
    np.testing.assert_allclose(twice, once, atol=1e-15)
    assert np.all(shifts == 0)
    assert np.all((once[:, :2] >= 0.0) & (once[:, :2] < 1.0))
    assert np.all((once[:, 2] >= m.theta_origin) & (once[:, 2] < m.theta_origin + m.period))


@pytest.mark.parametrize("m", [TORUS, MAPPING_TORUS, QUOTIENT])
def test_integer_torus_translations_are_invisible(m, rng) -> None:
    raw = rng.uniform(0.0, 1.0, size=(200, 3))
    raw[:, 2] = m.theta_origin + m.period * raw[:, 2]
    shifted = raw + np.array([3.0, -2.0, 0.0])
    np.testing.assert_allclose(normalize_coords(shifted, m)[0], normalize_coords(raw, m)[0], atol=1e-12)


def test_mapping_torus_seam_identifies_x_with_ax() -> None:
    x = np.array([0.31, 0.47])
    above = normalize((x[0], x[1], 1.2), MAPPING_TORUS)
    ax = np.asarray(CAT, dtype=float) @ x
    below = normalize((ax[0], ax[1], 0.2), MAPPING_TORUS)
    assert dist(above, below) == pytest.approx(0.0, abs=1e-12)


def test_distance_wraps_around_the_torus() -> None:
    p = normalize((0.05, 0.5, 0.5), TORUS)
    q = normalize((0.95, 0.5, 0.5), TORUS)
    assert dist(p, q) == pytest.approx(0.1, abs=1e-12)


def test_distance_across_the_mapping_torus_seam() -> None:
    p = np.array([0.3, 0.2, 0.95])
    q, _ = normalize_coords(np.array([0.3, 0.2, 1.05]), MAPPING_TORUS)
    assert float(dist_coords(p, q, MAPPING_TORUS)) == pytest.approx(0.1, abs=1e-12)
    np.testing.assert_allclose(displacement(p, q, MAPPING_TORUS), [0.0, 0.0, 0.1], atol=1e-12)


def test_distance_across_the_quotient_seam() -> None:
    p = np.array([0.3, 0.2, 0.97])
    q, _ = normalize_coords(np.array([0.3, 0.2, 1.02]), QUOTIENT)
    assert float(dist_coords(p, q, QUOTIENT)) == pytest.approx(0.05, abs=1e-12)


def test_triangle_inequality_on_the_torus(rng) -> None:
    m = ManifoldDescriptor.torus()
    pts = rng.uniform(0.0, 1.0, size=(3, 10_000, 3))
    d_pq = dist_coords(pts[0], pts[1], m)
    d_qr = dist_coords(pts[1], pts[2], m)
    d_pr = dist_coords(pts[0], pts[2], m)
    assert np.all(d_pr <= d_pq + d_qr + 1e-12)
    assert np.all(d_pq >= 0.0)


def test_distance_is_symmetric_and_vanishes_on_the_diagonal(rng) -> None:
    p = rng.uniform(0.0, 1.0, size=(300, 3))
    q = rng.uniform(0.0, 1.0, size=(300, 3))
    np.testing.assert_allclose(dist_coords(p, q, TORUS), dist_coords(q, p, TORUS), atol=1e-12)
    glued = normalize_coords(rng.uniform(-1.0, 2.0, size=(300, 3)), MAPPING_TORUS)[0]
    assert np.max(dist_coords(glued, glued, MAPPING_TORUS)) == 0.0


@pytest.mark.parametrize("m", [MAPPING_TORUS, QUOTIENT])
def test_distance_is_symmetric_on_glued_manifolds(rng, m) -> None:
    p = normalize_coords(rng.uniform(-1.0, 2.0, size=(20_000, 3)), m)[0]
    q = normalize_coords(rng.uniform(-1.0, 2.0, size=(20_000, 3)), m)[0]
    np.testing.assert_allclose(dist_coords(p, q, m), dist_coords(q, p, m), atol=1e-12)


def test_distance_symmetric_at_a_far_seam_pair() -> None:
    p = np.array([0.1175, 0.2831, 0.9619])
    q = np.array([0.3147, 0.5496, 0.0847])
    a = float(dist_coords(p, q, MAPPING_TORUS))
    assert a == pytest.approx(float(dist_coords(q, p, MAPPING_TORUS)), abs=1e-12)
    assert a <= float(np.linalg.norm(displacement(p, q, MAPPING_TORUS))) + 1e-12
    assert dist(normalize(p, MAPPING_TORUS), normalize(q, MAPPING_TORUS)) == pytest.approx(a, abs=1e-12)


def test_hausdorff_across_the_quotient_seam() -> None:
    # one vertical arc sampled just below the top of the domain, the other just above the seam
    s = np.linspace(0.0, 0.04, 21)
    below = np.column_stack([np.full(21, 0.3), np.full(21, 0.2), 0.95 + s])
    above = normalize_coords(np.column_stack([np.full(21, 0.3), np.full(21, 0.2), 1.0 + s]), QUOTIENT)[0]
    assert np.all(above[:, 2] < -0.9)
    d = hausdorff_distance(below, above, manifold=QUOTIENT)
    assert d == pytest.approx(0.05, abs=1e-12)
    assert hausdorff_distance(above, below, manifold=QUOTIENT) == d


def test_hausdorff_between_shifted_circles() -> None:
    theta = np.linspace(0.0, 1.0, 200, endpoint=False)
    circle = np.column_stack([np.full(200, 0.3), np.full(200, 0.4), theta])
    shifted = circle + np.array([0.01, 0.0, 0.0])
    assert hausdorff_distance(circle, shifted, manifold=TORUS) == pytest.approx(0.01, abs=1e-12)


def test_hausdorff_is_exactly_symmetric(rng) -> None:
    a = rng.uniform(0.0, 1.0, size=(120, 3))
    b = rng.uniform(0.0, 1.0, size=(80, 3))
    assert hausdorff_distance(a, b, manifold=TORUS) == hausdorff_distance(b, a, manifold=TORUS)


def test_hausdorff_accepts_chart_points() -> None:
    pts = [normalize((0.1 * k, 0.2, 0.3), TORUS) for k in range(5)]
    assert hausdorff_distance(pts, pts) == 0.0


def test_hausdorff_rejects_empty_and_mixed_samples() -> None:
    with pytest.raises(InvalidInputError):
        hausdorff_distance([], [normalize((0.0, 0.0, 0.0), TORUS)])
    with pytest.raises(InvalidInputError):
        hausdorff_distance(np.zeros((2, 3)), np.zeros((2, 3)))
    with pytest.raises(InvalidInputError):
        hausdorff_distance([normalize((0.0, 0.0, 0.0), TORUS)], [normalize((0.0, 0.0, 0.0), MAPPING_TORUS)])


def test_descriptor_validation() -> None:
    with pytest.raises(InvalidInputError):
        ManifoldDescriptor("klein_bottle")
    with pytest.raises(InvalidInputError):
        ManifoldDescriptor.torus(period=0.0)
    with pytest.raises(InvalidInputError):
        ManifoldDescriptor("mapping_torus")
    with pytest.raises(InvalidInputError):
        ManifoldDescriptor.mapping_torus(((1, 1), (0, 1)))


def test_descriptor_serialization() -> None:
    for m in (TORUS, MAPPING_TORUS, QUOTIENT):
        assert ManifoldDescriptor.from_dict(m.to_dict()) == m
    assert QUOTIENT.period == 2.0 and QUOTIENT.theta_origin == -1.0
    np.testing.assert_array_equal(QUOTIENT.gluing, [[1.0, -1.0], [-1.0, 2.0]])


def test_point_validation() -> None:
    with pytest.raises(InvalidInputError):
        normalize((0.1, 0.2), TORUS)
    with pytest.raises(InvalidInputError):
        normalize((np.nan, 0.2, 0.3), TORUS)
    with pytest.raises(InvalidInputError):
        dist(normalize((0.1, 0.2, 0.3), TORUS), ChartPoint((0.1, 0.2, 0.3), MAPPING_TORUS))


def test_sample_grid_covers_the_fundamental_domain() -> None:
    grid = sample_grid(QUOTIENT, 4)
    assert grid.shape == (64, 3)
    assert grid[:, 2].min() == -1.0 and grid[:, 2].max() == pytest.approx(0.5)
    with pytest.raises(InvalidInputError):
        sample_grid(TORUS, 0)
