# tests/test_graph_transform.py

import numpy as np
import pytest

from daf_numerics.analytics.cone_hyperbolicity import derive_scale_cascade
from daf_numerics.analytics.leaf_numerics import ConstantLineField, integrate_leaf
from daf_numerics.continuation.graph_transform import (
    FrameChain,
    build_tubular_frame,
    continuation_leaf,
    continue_immersion,
    iterate_to_fixed_point,
    trace_closed_leaf,
    transform_step,
    zero_section,
)
from daf_numerics.manifolds.chart_space import displacement
from daf_numerics.manifolds.system_zoo import make_suspension_flow_map, perturb
from daf_numerics.utils.errors import ConvergenceError, InvalidInputError, ModelViolationError, TubeOverlapError

LAM, KAPPA = 0.385786, 2.644214


def _fibre(system, x=(0.0, 0.0)):
    field = ConstantLineField((0.0, 0.0, 1.0), system.manifold)
    return trace_closed_leaf(field, np.array([x[0], x[1], 0.0]), 1.0)


def _rates(f, g, delta=0.1):
    return derive_scale_cascade(delta, KAPPA, f, g, lam=LAM)


def test_closed_fibre_tube_coordinates_invert_tube_points(skew) -> None:
    frame = build_tubular_frame(skew, _fibre(skew), _rates(skew, skew))
    assert frame.closed and frame.orientation_preserved
    assert frame.length == pytest.approx(1.0, abs=1e-9)
    q = frame.point(np.array([0.37, 0.81]), np.array([0.01, -0.004]), np.array([-0.02, 0.003]))
    t, a, b = frame.coords(q)
    np.testing.assert_allclose(t, [0.37, 0.81], atol=1e-10)
    np.testing.assert_allclose(a, [0.01, -0.004], atol=1e-10)
    np.testing.assert_allclose(b, [-0.02, 0.003], atol=1e-10)


def test_reversing_fibre_is_continued_on_the_double_cover() -> None:
    # -A glues e^u to -e^u, so the frame along the fibre over the fixed point comes back flipped
    f = make_suspension_flow_map(((-2, -1), (-1, -1)))
    rates = _rates(f, f)
    frame = build_tubular_frame(f, _fibre(f), rates)
    assert frame.closed and frame.sheets == 2
    assert frame.orientation_preserved is False
    assert frame.length == pytest.approx(2.0, abs=1e-9)

    base = np.array([0.0, 0.0, 0.37])
    first = displacement(base, frame.point(0.37, 0.01, 0.0), f.manifold)
    second = displacement(base, frame.point(1.37, 0.01, 0.0), f.manifold)
    assert abs(first[2]) < 1e-12 and abs(second[2]) < 1e-12
    cos = np.dot(first, second) / (np.linalg.norm(first) * np.linalg.norm(second))
    assert cos == pytest.approx(-1.0, abs=1e-12)

    q = frame.point(np.array([1.37]), np.array([0.01]), np.array([-0.002]))
    t, a, b = frame.coords(q, t0=np.array([1.37]))
    np.testing.assert_allclose([t[0], a[0], b[0]], [1.37, 0.01, -0.002], atol=1e-10)

    xi0 = zero_section(frame, "cu", rates, center_samples=40, transverse_samples=11)
    assert transform_step(xi0, f, frame, rates).sup() < 1e-12


def test_tube_overlap_is_reported(skew) -> None:
    field = ConstantLineField((0.0, 0.0, 1.0), skew.manifold)
    wound = integrate_leaf(field, np.array([0.3, 0.4, 0.5]), 1.2)
    with pytest.raises(TubeOverlapError):
        build_tubular_frame(skew, wound, _rates(skew, skew))


def test_zero_section_rejects_unknown_strips(skew) -> None:
    frame = build_tubular_frame(skew, _fibre(skew), _rates(skew, skew))
    with pytest.raises(InvalidInputError):
        zero_section(frame, "su", _rates(skew, skew))


def test_transform_step_fixes_the_zero_section_when_g_is_f(skew) -> None:
    rates = _rates(skew, skew)
    frame = build_tubular_frame(skew, _fibre(skew), rates)
    xi0 = zero_section(frame, "cu", rates, center_samples=40, transverse_samples=11)
    xi1 = transform_step(xi0, skew, frame, rates)
    assert xi1.iteration == 1
    assert xi1.sup() < 1e-12


def test_identical_pair_continues_a_leaf_to_itself(skew) -> None:
    rates = _rates(skew, skew)
    prime, report = continuation_leaf(skew, skew, _fibre(skew), rates, center_samples=40, transverse_samples=11)
    assert report["max_offset"] < 1e-12
    assert report["hausdorff_to_L"] < 1e-12
    assert report["tangency_ok"]
    assert report["equivariance_ok"]
    assert report["cu"]["bound_ok"] and report["cs"]["bound_ok"]
    assert len(prime) == 40


def test_periodic_orbit_of_fibres_continues_through_the_chain(skew) -> None:
    rates = _rates(skew, skew)
    L = _fibre(skew, x=(0.3, 0.4))
    chain = FrameChain(skew, L, rates)
    assert not chain.invariant
    prime, report = continuation_leaf(skew, skew, L, rates, center_samples=40, transverse_samples=11, chain=chain)
    assert report["hausdorff_to_L"] < 1e-10
    assert report["equivariance"] < 1e-10


def test_unaccepted_pair_is_refused(skew) -> None:
    g = perturb(skew, kind="fiber-shear", epsilon=1e-4)
    rates = _rates(skew, g, delta=0.05)
    assert not rates.accepted
    with pytest.raises(ModelViolationError):
        continuation_leaf(skew, g, _fibre(skew), rates)


def test_fixed_point_budget_is_enforced(skew) -> None:
    g = perturb(skew, kind="translation-bump", epsilon=1e-4)
    rates = _rates(skew, g)
    chain = FrameChain(skew, _fibre(skew), rates)
    xi0 = zero_section(chain.base, "cu", rates, center_samples=40, transverse_samples=11)
    with pytest.raises(ConvergenceError):
        iterate_to_fixed_point(xi0, chain, g, rates, max_iter=1)
    with pytest.raises(InvalidInputError):
        iterate_to_fixed_point(xi0, chain, g, rates, tol=0.0)


@pytest.mark.slow
def test_translated_partner_moves_the_fibre(skew) -> None:
    g = perturb(skew, kind="translation-bump", epsilon=1e-4)
    rates = _rates(skew, g)
    assert rates.accepted
    prime, report = continuation_leaf(skew, g, _fibre(skew), rates)
    assert 0.0 < report["hausdorff_to_L"] < rates.delta
    assert report["max_offset"] <= 2.0 * rates.delta_prime / (1.0 - rates.lam)
    assert report["tangency_ok"]
    assert report["equivariance_ok"]
    assert report["cu"]["bound_ok"] and report["cs"]["bound_ok"]
    history = report["cu"]["history"]
    assert history[0] <= 1.1 * 2.0 * rates.delta_prime


def test_open_window_immersion(skew) -> None:
    rates = _rates(skew, skew)
    field = ConstantLineField((0.0, 0.0, 1.0), skew.manifold)
    eta = integrate_leaf(field, np.array([0.3, 0.4, 0.5]), 0.3)
    result = continue_immersion(skew, skew, eta, rates, budget=1, center_samples=30, transverse_samples=11)
    assert set(result["gammas"]) == {-1, 0, 1}
    assert result["report"]["offset_ok"]
    assert result["report"]["equivariance_ok"]
    with pytest.raises(InvalidInputError):
        continue_immersion(skew, skew, eta, rates, budget=-1)
