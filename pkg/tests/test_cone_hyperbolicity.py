# tests/test_cone_hyperbolicity.py

import numpy as np
import pytest

from daf_numerics.analytics.cone_hyperbolicity import (
    NEIGHBOUR_DIRECTIONS,
    ConeField,
    certify_partial_hyperbolicity,
    derive_scale_cascade,
    estimate_rates,
    estimate_splitting,
    nearly_euclidean_scale,
    splitting_invariance,
    verify_cone_invariance,
)
from daf_numerics.manifolds.chart_space import ManifoldDescriptor, hyperbolic_eigendata
from daf_numerics.manifolds.system_zoo import SYSTEM_CATALOG, DynamicalSystem, perturb
from daf_numerics.utils.errors import InvalidInputError, ScaleNotFoundError
from daf_numerics.utils.grid_utils import line_angle

CAT = ((2, 1), (1, 1))
EIG = hyperbolic_eigendata(CAT)
E_U = np.append(EIG["e_u"], 0.0)
E_S = np.append(EIG["e_s"], 0.0)
E_C = np.array([0.0, 0.0, 1.0])


def _identity() -> DynamicalSystem:
    return DynamicalSystem(
        name="identity",
        params={},
        manifold=ManifoldDescriptor.torus(),
        raw_forward=lambda p: np.array(p, dtype=float),
        raw_inverse=lambda p: np.array(p, dtype=float),
        raw_jacobian=lambda p: np.broadcast_to(np.eye(3), np.shape(p)[:-1] + (3, 3)).copy(),
    )


def test_skew_splitting_matches_the_eigenvectors(skew) -> None:
    split = estimate_splitting(skew, grid=4)
    assert np.max(line_angle(split.e_u, E_U)) < 1e-10
    assert np.max(line_angle(split.e_s, E_S)) < 1e-10
    assert np.max(line_angle(split.e_c, E_C)) < 1e-10
    assert split.max_residual < 1e-10
    assert split.min_angle == pytest.approx(np.pi / 2, abs=1e-9)


def test_suspension_center_is_the_flow_direction(suspension) -> None:
    split = estimate_splitting(suspension, grid=4)
    assert np.max(line_angle(split.e_c, E_C)) < 1e-10


def test_splitting_is_invariant(skew) -> None:
    split = estimate_splitting(skew, grid=5)
    gaps = splitting_invariance(skew, split)
    assert max(gaps.values()) < 1e-6


def test_splitting_needs_enough_iterations(skew) -> None:
    with pytest.raises(InvalidInputError):
        estimate_splitting(skew, grid=4, n=10)
    with pytest.raises(InvalidInputError):
        estimate_splitting(skew)


def test_unstable_cone_of_the_skew_product_is_invariant(skew) -> None:
    cone = ConeField.constant(E_U, np.vstack([E_S, E_C]), 0.5, expanding=True, label="C^u")
    report = verify_cone_invariance(skew, cone, N=1, grid=8)
    assert report["pass"]
    assert report["worst_margin"] > 0.0
    assert report["min_expansion"] > 1.0


def test_identity_has_no_strictly_invariant_cone() -> None:
    f = _identity()
    cone = ConeField.constant(E_U, np.vstack([E_S, E_C]), 0.5)
    report = verify_cone_invariance(f, cone, N=1, grid=8)
    assert not report["pass"]
    assert len(report["worst_cell"]) == 3


def test_cone_validation(skew) -> None:
    with pytest.raises(InvalidInputError):
        ConeField.constant(E_U, np.vstack([E_S, E_C]), 0.0)
    with pytest.raises(InvalidInputError):
        ConeField.constant(E_U, np.vstack([E_U, E_C]), 0.5)
    cone = ConeField.constant(E_U, np.vstack([E_S, E_C]), 0.5)
    with pytest.raises(InvalidInputError):
        verify_cone_invariance(skew, cone, N=0, grid=8)
    with pytest.raises(InvalidInputError):
        verify_cone_invariance(skew, cone, N=1, grid=4)


def test_skew_product_certifies(skew) -> None:
    report = certify_partial_hyperbolicity(skew, iterates=1, grid=8)
    assert report["pass"]
    assert set(report["cones"]) == {"u", "s"}


def test_zero_perturbation_keeps_the_verdict(skew) -> None:
    g = perturb(skew, epsilon=0.0)
    assert certify_partial_hyperbolicity(g, grid=8)["worst_margin"] == certify_partial_hyperbolicity(skew, grid=8)["worst_margin"]


@pytest.mark.slow
def test_hhu_map_certifies(hhu) -> None:
    report = certify_partial_hyperbolicity(hhu, iterates=SYSTEM_CATALOG["hhu"]["certify_iterates"], grid=8)
    assert report["pass"]


def test_skew_rates_match_the_eigenvalues(skew) -> None:
    split = estimate_splitting(skew, grid=4)
    lam, kappa = estimate_rates(skew, split, grid=8)
    assert lam == pytest.approx(0.381966011 * 1.01, rel=1e-6)
    assert kappa == pytest.approx(2.6180339887 * 1.01, rel=1e-6)
    assert kappa >= 2.6180339887


def test_zero_perturbation_keeps_the_rates(skew) -> None:
    g = perturb(skew, epsilon=0.0)
    base = estimate_rates(skew, estimate_splitting(skew, grid=4), grid=8)
    same = estimate_rates(g, estimate_splitting(g, grid=4), grid=8)
    assert same == pytest.approx(base, abs=1e-12)


def test_constant_splitting_returns_the_cap(skew) -> None:
    split = estimate_splitting(skew, grid=4)
    assert nearly_euclidean_scale(skew, split) == 0.05
    with pytest.raises(ScaleNotFoundError):
        nearly_euclidean_scale(skew, split, eps=0.0)
    with pytest.raises(InvalidInputError):
        nearly_euclidean_scale(skew, split, eps=0.1)


def test_scale_search_neighbours_cover_the_diagonals() -> None:
    assert NEIGHBOUR_DIRECTIONS.shape == (26, 3)
    np.testing.assert_allclose(np.linalg.norm(NEIGHBOUR_DIRECTIONS, axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(NEIGHBOUR_DIRECTIONS.sum(axis=0), 0.0, atol=1e-12)
    body = np.ones(3) / np.sqrt(3.0)
    assert np.min(np.linalg.norm(NEIGHBOUR_DIRECTIONS - body, axis=1)) < 1e-12


@pytest.mark.slow
def test_nearly_euclidean_scale_is_monotone_in_eps(hhu) -> None:
    split = estimate_splitting(hhu, grid=3)
    coarse = nearly_euclidean_scale(hhu, split, eps=1.0 / 16.0)
    fine = nearly_euclidean_scale(hhu, split, eps=1.0 / 32.0)
    assert 0.0 < fine <= coarse


def test_scale_cascade_arithmetic(skew) -> None:
    report = derive_scale_cascade(0.05, 3.0, skew, skew, lam=0.5)
    assert report.delta1 == pytest.approx(0.008333333333, rel=1e-9)
    assert report.delta2 == pytest.approx(0.004166666667, rel=1e-9)
    assert report.delta3 == pytest.approx(0.000347222222, rel=1e-9)
    assert report.delta1 == report.delta / (2.0 * report.kappa)
    assert report.delta2 == report.delta1 / 2.0
    assert report.delta3 == report.delta2 / (4.0 * report.kappa)
    assert report.p5_bound == pytest.approx(4.340277e-5, rel=1e-6)
    assert report.delta_prime == 0.0
    assert report.accepted


def test_scale_cascade_gates_the_partner(skew, skew_partner) -> None:
    lam, kappa = 0.385786, 2.644214
    accepted = derive_scale_cascade(0.1, kappa, skew, skew_partner, lam=lam)
    assert accepted.delta_prime == pytest.approx(1e-4, rel=1e-6)
    assert accepted.accepted
    rejected = derive_scale_cascade(0.05, kappa, skew, skew_partner, lam=lam)
    assert not rejected.accepted
    assert set(rejected.to_dict()) == {"lambda", "kappa", "delta", "delta_prime", "delta1", "delta2", "delta3", "accepted"}


def test_scale_cascade_validation(skew, suspension) -> None:
    with pytest.raises(InvalidInputError):
        derive_scale_cascade(0.05, 1.0, skew, skew, lam=0.5)
    with pytest.raises(InvalidInputError):
        derive_scale_cascade(0.05, 3.0, skew, suspension, lam=0.5)
