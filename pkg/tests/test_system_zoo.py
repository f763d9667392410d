# tests/test_system_zoo.py

import json

import numpy as np
import pytest

from daf_numerics.manifolds.chart_space import displacement, dist_coords, sample_grid
from daf_numerics.manifolds.system_zoo import (
    SYSTEM_CATALOG,
    build_system,
    make_hhu_map,
    make_skew_product,
    perturb,
    resolve_system,
)
from daf_numerics.utils.errors import InvalidInputError


def test_skew_product_acts_by_the_cat_matrix(skew) -> None:
    np.testing.assert_allclose(skew.forward(np.array([0.1, 0.1, 0.0])), [0.3, 0.2, 0.0], atol=1e-12)
    J = skew.jacobian(np.array([0.4, 0.7, 0.2]))
    eigenvalues = np.sort(np.abs(np.linalg.eigvals(J)))
    np.testing.assert_allclose(eigenvalues, [0.3819660113, 1.0, 2.6180339887], atol=1e-10)


def test_skew_product_fibres_are_invariant_circles(skew) -> None:
    theta = np.linspace(0.0, 1.0, 50, endpoint=False)
    fibre = np.column_stack([np.zeros(50), np.zeros(50), theta])
    np.testing.assert_array_equal(skew.forward(fibre), fibre)


def test_suspension_time_one_returns_through_the_seam(suspension) -> None:
    np.testing.assert_allclose(suspension.forward(np.array([0.1, 0.2, 0.3])), [0.4, 0.3, 0.3], atol=1e-12)
    np.testing.assert_allclose(suspension.jacobian(np.array([0.1, 0.2, 0.7]))[:2, :2], [[2.0, 1.0], [1.0, 1.0]], atol=1e-12)


def test_suspension_flow_map_moves_along_the_flow() -> None:
    g = build_system("suspension-flow")
    np.testing.assert_allclose(g.forward(np.array([0.1, 0.2, 0.3])), [0.1, 0.2, 0.8], atol=1e-12)
    assert g.params["time"] == 0.5


@pytest.mark.parametrize("name", sorted(SYSTEM_CATALOG))
def test_catalog_roundtrip_and_jacobians(name) -> None:
    f = build_system(name)
    pts = sample_grid(f.manifold, 10, offset=0.37)
    assert f.roundtrip_error(pts) < 1e-9
    assert f.jacobian_mismatch(pts) < 1e-5
    np.testing.assert_allclose(f.inverse_jacobian(f.forward(pts)) @ f.jacobian(pts), np.broadcast_to(np.eye(3), (len(pts), 3, 3)), atol=1e-9)


@pytest.mark.parametrize("theta", [-1.0, 0.0])
def test_hhu_tori_are_invariant(hhu, theta) -> None:
    pts = sample_grid(hhu.manifold, 6, offset=0.37)
    pts[:, 2] = theta
    images = hhu.forward(pts)
    assert np.max(np.abs(displacement(pts, images, hhu.manifold)[:, 2])) < 1e-12


def test_hhu_cu_torus_carries_the_linear_map(hhu) -> None:
    p = np.array([0.1, 0.1, 0.0])
    np.testing.assert_allclose(hhu.forward(p), [0.3, 0.2, 0.0], atol=1e-12)


@pytest.mark.parametrize("a0, a1", [(0.5, 1.5), (0.0, 1.5), (0.3, 0.9), (0.3, 3.0)])
def test_hhu_rejects_slopes_outside_the_window(a0, a1) -> None:
    with pytest.raises(InvalidInputError):
        make_hhu_map(a0=a0, a1=a1)


def test_hhu_rejects_nonpositive_amplitude() -> None:
    with pytest.raises(InvalidInputError):
        make_hhu_map(c=0.0)


def test_zero_perturbation_is_bitwise_identical(skew) -> None:
    g = perturb(skew, epsilon=0.0)
    pts = sample_grid(skew.manifold, 8, offset=0.37)
    np.testing.assert_array_equal(g.forward(pts), skew.forward(pts))
    np.testing.assert_array_equal(g.jacobian(pts), skew.jacobian(pts))
    assert g.name == "perturbed:skew"
    assert g.params["jacobian_constant"] == 0.0


@pytest.mark.parametrize("kind", ["fiber-shear", "translation-bump"])
@pytest.mark.parametrize("name", ["skew", "suspension"])
def test_perturbation_is_c0_small(name, kind) -> None:
    f = build_system(name)
    g = perturb(f, kind=kind, epsilon=1e-3)
    pts = sample_grid(f.manifold, 12, offset=0.37)
    gap = dist_coords(g.forward(pts), f.forward(pts), f.manifold)
    assert np.max(gap) <= 1e-3 + 1e-15
    assert np.max(gap) > 0.0
    assert g.roundtrip_error(pts) < 1e-9
    assert g.params["jacobian_constant"] > 0.0


def test_perturbation_validation(skew) -> None:
    with pytest.raises(InvalidInputError):
        perturb(skew, kind="twist")
    with pytest.raises(InvalidInputError):
        perturb(skew, epsilon=-1e-3)
    with pytest.raises(InvalidInputError):
        perturb(skew, epsilon=0.5)


def test_build_system_resolves_perturbed_names() -> None:
    g = build_system("perturbed:skew", {"epsilon": 1e-4, "kind": "translation-bump"})
    assert g.name == "perturbed:skew"
    assert g.params["epsilon"] == 1e-4
    assert g.params["kind"] == "translation-bump"
    assert g.params["base"]["name"] == "skew"


def test_build_system_rejects_unknown_names_and_params() -> None:
    with pytest.raises(InvalidInputError):
        build_system("henon")
    with pytest.raises(InvalidInputError):
        build_system("skew", {"bogus": 1})


def test_resolve_system_from_recipe(tmp_path) -> None:
    f = make_skew_product()
    assert resolve_system(f.recipe()).params == f.params

    recipe = tmp_path / "hhu.json"
    recipe.write_text(json.dumps({"name": "hhu", "params": {"c": 0.02}}), encoding="utf-8")
    g = resolve_system(str(recipe))
    assert g.name == "hhu" and g.params["c"] == 0.02

    broken = tmp_path / "broken.json"
    broken.write_text("{not json", encoding="utf-8")
    with pytest.raises(InvalidInputError):
        resolve_system(str(broken))
