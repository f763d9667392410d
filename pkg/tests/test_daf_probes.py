# tests/test_daf_probes.py

import numpy as np
import pandas as pd
import pytest

from daf_numerics.analytics.leaf_numerics import ConstantLineField, LineField, leaf_fields
from daf_numerics.daf import (
    PseudoOrbitPair,
    center_displacement,
    coherence_saturation_check,
    leaf_length_bound,
    plaque_expansivity_test,
    qi_check,
    recover_tau,
    tau_floor_check,
    topological_anosov_probe,
    unique_integrability_probe,
    uniform_compactness_check,
)
from daf_numerics.manifolds.chart_space import ManifoldDescriptor, hyperbolic_eigendata
from daf_numerics.manifolds.system_zoo import DynamicalSystem, build_system
from daf_numerics.utils.errors import InvalidInputError, ModelViolationError

EIG = hyperbolic_eigendata(((2, 1), (1, 1)))
E_U = np.append(EIG["e_u"], 0.0)
E_S = np.append(EIG["e_s"], 0.0)
X = np.array([0.3, 0.4, 0.5])


@pytest.fixture
def tau(suspension):
    return recover_tau(suspension, grid=2)


# --- tau and center displacement ---


def test_skew_product_does_not_fix_center_leaves(skew) -> None:
    report = center_displacement(skew, grid=2)
    assert report["verdict"] == "not-center-fixing"
    assert report["located"] < report["samples"]
    with pytest.raises(ModelViolationError):
        recover_tau(skew, grid=2)


def test_suspension_moves_points_one_unit_along_the_flow(suspension) -> None:
    report = center_displacement(suspension, grid=2)
    assert report["verdict"] == "center-fixing"
    assert report["L"] == pytest.approx(1.0, abs=1e-6)
    assert report["compact_leaves"] > 0


def test_suspension_tau_is_constant(tau) -> None:
    assert tau.orientation == 1
    assert tau.min == pytest.approx(1.0, abs=1e-6)
    assert tau.max == pytest.approx(1.0, abs=1e-6)
    assert tau.modulus < 1e-6
    # the fixed fibre of the cat map closes after one unit and is wound once
    assert tau.to_dict()["max_winding"] == 1


def test_tau_table(tau, tmp_path) -> None:
    frame = tau.to_frame()
    assert list(frame.columns) == ["x", "y", "theta", "tau", "winding", "leaf_length"]
    path = tau.write_csv(tmp_path / "tau.csv")
    assert len(pd.read_csv(path)) == len(tau.tau)


def test_tau_floor(tau) -> None:
    assert tau_floor_check(tau, 0.05)["verdict"] == "pass"
    report = tau_floor_check(tau, 0.2)
    assert report["verdict"] == "fail"
    assert report["margin"] == pytest.approx(-1.0, abs=1e-6)
    with pytest.raises(InvalidInputError):
        tau_floor_check(tau, 0.0)


def test_short_flow_time_fails_the_tau_floor() -> None:
    tau = recover_tau(build_system("suspension-flow", {"time": 0.3}), grid=2)
    assert tau.min == pytest.approx(0.3, abs=1e-6)
    assert tau_floor_check(tau, 0.05)["verdict"] == "fail"


SEAM_POINTS = np.array([[0.3, 0.4, 0.9], [0.6, 0.1, 0.95], [0.2, 0.7, 0.99]])


def _quotient_translation(step: float = 0.3) -> DynamicalSystem:
    """theta -> theta + step on the HHU quotient; commutes with the gluing, so it is well defined."""
    shift = np.array([0.0, 0.0, step])
    return DynamicalSystem(
        name="quotient-translation",
        params={"step": step},
        manifold=ManifoldDescriptor.hhu_quotient(((2, 1), (1, 1))),
        raw_forward=lambda p: np.asarray(p, dtype=float) + shift,
        raw_inverse=lambda p: np.asarray(p, dtype=float) - shift,
    )


def test_tau_across_the_quotient_seam(vertical) -> None:
    f = _quotient_translation()
    assert np.all(f.forward(SEAM_POINTS)[:, 2] < -0.5)
    tau = recover_tau(f, center=vertical(f), points=SEAM_POINTS)
    assert tau.orientation == 1
    np.testing.assert_allclose(tau.tau, 0.3, atol=1e-6)
    assert tau.modulus < 1e-6
    assert tau.to_dict()["max_winding"] == 0


def test_qi_arcs_across_the_quotient_seam(vertical) -> None:
    f = _quotient_translation()
    report = qi_check(f, center=vertical(f), points=SEAM_POINTS, l=0.1, n_iter=4)
    assert report["verdict"] == "quasi-isometric"
    assert report["L"] == pytest.approx(0.1, abs=1e-9)


# --- quasi-isometry and topological anosov probes ---


def test_invariant_fibres_are_quasi_isometric(skew) -> None:
    report = qi_check(skew, points=[X], n_iter=2)
    assert report["verdict"] == "quasi-isometric"
    assert report["L"] == pytest.approx(0.1, abs=1e-9)
    assert report["growth_rate"] == pytest.approx(0.0, abs=1e-9)
    assert sorted(report["growth_curve"]) == [-2, -1, 0, 1, 2]


def test_qi_check_validation(skew) -> None:
    with pytest.raises(InvalidInputError):
        qi_check(skew, points=[X], n_iter=0)
    with pytest.raises(InvalidInputError):
        qi_check(skew, points=[X], l=-1.0)


def test_stable_pairs_contract(skew) -> None:
    report = topological_anosov_probe(skew, X, X + 1e-3 * E_S, budget=8, lam=0.385786)
    assert report["verdict"] == "pass"
    assert report["monotone"]
    assert report["decay_factor"] == pytest.approx(0.3819660113, rel=1e-4)


def _shear_over_cat(amplitude: float) -> DynamicalSystem:
    """A x rotation by 0.3 + amplitude * sin(2 pi x) on T^3: vertical center, tau varying with x."""
    M = np.array([[2.0, 1.0], [1.0, 1.0]])
    M_inv = np.array([[1.0, -1.0], [-1.0, 2.0]])

    def forward(p):
        out = np.array(p, dtype=float)
        out[..., :2] = p[..., :2] @ M.T
        out[..., 2] = p[..., 2] + 0.3 + amplitude * np.sin(2.0 * np.pi * p[..., 0])
        return out

    def inverse(p):
        out = np.array(p, dtype=float)
        out[..., :2] = p[..., :2] @ M_inv.T
        out[..., 2] = p[..., 2] - 0.3 - amplitude * np.sin(2.0 * np.pi * out[..., 0])
        return out

    return DynamicalSystem(name="shear", params={}, manifold=ManifoldDescriptor.torus(), raw_forward=forward, raw_inverse=inverse)


def test_stable_pairs_are_compared_after_center_transport() -> None:
    f = _shear_over_cat(0.05)
    center = ConstantLineField((0.0, 0.0, 1.0), f.manifold)
    x = np.array([0.0, 0.0, 0.5])
    report = topological_anosov_probe(f, x, x + 1e-3 * E_S, budget=8, center=center)
    assert report["verdict"] == "pass"
    assert report["decay_factor"] == pytest.approx(0.3819660113, rel=1e-6)
    # the tau sums drift apart along the two orbits, so equal times stay apart
    assert report["equal_time_distances"][-1] > 1e-4
    assert report["equal_time_distances"][-1] > 100.0 * report["distances"][-1]
    assert abs(report["center_offsets"][-1]) > 1e-4
    assert report["center_offsets"][0] == pytest.approx(0.0, abs=1e-15)


def test_center_pairs_collapse_under_transport(skew) -> None:
    center = ConstantLineField((0.0, 0.0, 1.0), skew.manifold)
    report = topological_anosov_probe(skew, X, X + np.array([0.0, 0.0, 0.01]), budget=4, center=center)
    assert report["verdict"] == "coincident"
    assert report["center_offsets"][0] == pytest.approx(-0.01, abs=1e-12)


def test_unstable_pairs_escape(skew) -> None:
    report = topological_anosov_probe(skew, X, X + 1e-3 * E_U, mode="cu-expansivity")
    assert report["verdict"] == "pass"
    assert report["escape_time"] == 5


def test_pairs_on_one_center_leaf_never_separate(skew) -> None:
    report = topological_anosov_probe(skew, X, X + np.array([0.0, 0.0, 0.01]), mode="cu-expansivity")
    assert report["verdict"] == "coincident"
    assert topological_anosov_probe(skew, X, X)["verdict"] == "coincident"
    with pytest.raises(InvalidInputError):
        topological_anosov_probe(skew, X, X, mode="cs-expansivity")


# --- coherence and compactness ---


def test_linear_splitting_is_coherent(skew) -> None:
    report = coherence_saturation_check(skew, points=[X], delta=0.05)
    assert report["verdict"] == "coherent"
    assert report["cs_gap"] < 1e-6 and report["cu_gap"] < 1e-6
    assert report["witness"] is None


def test_coherence_validation(skew) -> None:
    with pytest.raises(InvalidInputError):
        coherence_saturation_check(skew, points=[X], delta=0.0)
    with pytest.raises(InvalidInputError):
        coherence_saturation_check(skew, points=[X], fields={"c": leaf_fields(skew)["c"]})


def test_fibres_are_uniformly_compact(skew) -> None:
    report = uniform_compactness_check(skew, grid=2)
    assert report["verdict"] == "uniformly-compact"
    assert report["closed"] == report["samples"]
    assert report["max_length"] == pytest.approx(1.0, abs=1e-6)
    assert report["max_diameter"] == pytest.approx(0.5, abs=1e-6)


def test_short_budget_leaves_leaves_open(skew) -> None:
    report = uniform_compactness_check(skew, grid=2, budget=0.5)
    assert report["verdict"] == "not-uniformly-compact"
    assert len(report["witnesses"]) == report["samples"]
    assert np.isnan(report["max_length"])


def test_leaf_length_bound_without_closed_leaves() -> None:
    bound = leaf_length_bound({}, np.array([np.nan]), ManifoldDescriptor.torus())
    assert np.isnan(bound["max_length"]) and np.isnan(bound["max_diameter"])


# --- plaque expansivity ---


def test_pseudo_orbit_pair_check(skew) -> None:
    center = LineField(skew, "c")
    y = X + 1e-3 * E_S
    pair = PseudoOrbitPair(np.vstack([X, skew.forward(X)]), np.vstack([y, skew.forward(y)]), [0.0], [0.0])
    assert pair.check(skew, center, 0.01)
    assert pair.separations[1] < pair.separations[0]
    assert set(pair.to_dict()) == {"start", "x", "y", "jumps_x", "jumps_y", "separations"}

    broken = PseudoOrbitPair(np.vstack([X, skew.forward(X) + np.array([0.005, 0.0, 0.0])]), pair.ys, [0.0], [0.0])
    assert not broken.check(skew, center, 0.01)
    greedy = PseudoOrbitPair(pair.xs, pair.ys, [0.05], [0.0])
    assert not greedy.check(skew, center, 0.01)


def test_anosov_skew_product_is_plaque_expansive(skew) -> None:
    report = plaque_expansivity_test(skew, delta=0.01, horizon=5, points=[X])
    assert report["verdict"] == "no-violation-found"
    assert report["seeds"] == 16
    assert report["witness"] is None
    assert report["horizon"] == 5
    assert not report["beam_truncated"]


def test_identity_map_has_a_violation_witness() -> None:
    identity = DynamicalSystem(
        name="identity",
        params={},
        manifold=ManifoldDescriptor.torus(),
        raw_forward=lambda p: np.array(p, dtype=float),
        raw_inverse=lambda p: np.array(p, dtype=float),
        raw_jacobian=lambda p: np.broadcast_to(np.eye(3), np.shape(p)[:-1] + (3, 3)).copy(),
    )
    center = ConstantLineField((0.0, 0.0, 1.0), identity.manifold)
    report = plaque_expansivity_test(identity, center=center, delta=0.01, horizon=3, points=[X])
    assert report["verdict"] == "violation"
    witness = report["witness"]
    assert witness["start"] == 0
    assert max(witness["separations"]) <= 0.02 + 1e-12


@pytest.mark.slow
def test_suspension_is_plaque_expansive(suspension) -> None:
    report = plaque_expansivity_test(suspension, delta=0.01, horizon=15)
    assert report["verdict"] == "no-violation-found"


def test_narrow_beam_makes_a_clean_search_inconclusive(skew) -> None:
    report = plaque_expansivity_test(skew, delta=0.01, horizon=5, points=[X], beam=1)
    assert report["verdict"] == "inconclusive"
    assert report["beam_truncated"]
    assert report["witness"] is None


def test_plaque_search_budget(skew) -> None:
    report = plaque_expansivity_test(skew, delta=0.01, horizon=5, points=[X], node_budget=10)
    assert report["verdict"] == "inconclusive"


def test_zero_delta_has_nothing_to_search(skew) -> None:
    report = plaque_expansivity_test(skew, delta=0.0)
    assert report["verdict"] == "no-violation-found"
    assert report["seeds"] == 0


@pytest.mark.parametrize(
    "kwargs",
    [
        {"delta": -0.01},
        {"horizon": 0},
        {"horizon": 31},
        {"jumps": 1},
        {"delta": 0.02, "scale": 0.01},
        {"beam": 0},
    ],
)
def test_plaque_expansivity_validation(skew, kwargs) -> None:
    with pytest.raises(InvalidInputError):
        plaque_expansivity_test(skew, **kwargs)


# --- unique integrability ---


def test_vertical_center_integrates_uniquely(skew) -> None:
    report = unique_integrability_probe(skew, X)
    assert report["verdict"] == "unique"
    assert not report["on_torus"]
    assert report["step_gap"] < 1e-7


def test_integrability_probe_validation(skew) -> None:
    with pytest.raises(InvalidInputError):
        unique_integrability_probe(skew, X, budget=0.5, detour=0.6)
    with pytest.raises(InvalidInputError):
        unique_integrability_probe(skew, X, detour=0.0)


@pytest.mark.slow
def test_center_branches_off_the_cu_torus(hhu) -> None:
    report = unique_integrability_probe(hhu, np.array([0.2, 0.3, 0.0]))
    assert report["on_torus"]
    assert report["verdict"] == "branching"
    assert report["separation"] > report["integration_error"]
    # the E^c integral from a torus point stays on the torus
    assert report["theta_drift"] < 1e-6
