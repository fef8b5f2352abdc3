import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from weakguide.core import Bound, Direction, GuidanceSet, Hyperparams, Neighbor, Relative, Similar
from weakguide.errors import BadInterval, BadThreshold, DimensionMismatch
from weakguide.losses import (
    LossKind,
    ObjectiveSpec,
    bound_loss,
    hinge_relative_loss,
    log_cdf_difference,
    logistic_cdf,
    neighbor_loss,
    objective_eval,
    relative_loss,
    similar_loss,
    softplus,
)

mp.mp.dps = 50


def mp_F(t):
    return 1 / (1 + mp.e ** (-mp.mpf(t)))


def mp_interval(u, v, eps):
    """-log(F(u) - F(v) + eps) in high precision."""
    return float(-mp.log(mp_F(u) - mp_F(v) + mp.mpf(eps)))


def test_logistic_cdf_values():
    assert logistic_cdf(0.0) == 0.5
    assert logistic_cdf(1.0) == pytest.approx(float(mp_F(1)), abs=1e-15)
    assert logistic_cdf(1.0) == pytest.approx(0.7310585786, abs=1e-10)


def test_logistic_cdf_far_tail():
    v = logistic_cdf(-800.0)
    assert 0.0 < v <= 1e-300


@given(st.floats(-1e4, 1e4))
def test_logistic_cdf_symmetry(t):
    assert abs(logistic_cdf(-t) - (1.0 - logistic_cdf(t))) <= 1e-15


def test_logistic_cdf_increasing():
    t = np.linspace(-30, 30, 2001)
    assert np.all(np.diff(logistic_cdf(t)) > 0)


def test_softplus_values():
    assert softplus(0.0) == pytest.approx(math.log(2.0), abs=1e-15)
    assert softplus(800.0) == pytest.approx(800.0, rel=1e-12)
    assert softplus(-2.0) == pytest.approx(float(mp.log(1 + mp.e ** -2)), abs=1e-15)
    assert softplus(-2.0) == pytest.approx(0.1269280, abs=1e-7)
    assert np.isfinite(softplus(1e4)) and softplus(-1e4) >= 0.0


def test_relative_loss_values():
    assert relative_loss(1.0, 1.0).value == pytest.approx(math.log(2.0), abs=1e-9)
    assert relative_loss(3.0, 1.0).value == pytest.approx(0.1269280, abs=1e-7)
    assert relative_loss(1.0, 3.0).value == pytest.approx(2.1269280, abs=1e-7)


def test_relative_loss_gradient():
    m = 0.7
    out = relative_loss(1.0 + m, 1.0)
    tail = 1.0 - float(mp_F(m))
    assert_allclose(out.grad, [-tail, tail], atol=1e-15)


@given(st.floats(-50, 50), st.floats(-50, 50))
def test_relative_pair_sum_at_least_two_ln2(a, b):
    total = relative_loss(a, b).value + relative_loss(b, a).value
    assert total >= 2 * math.log(2.0) - 1e-12
    if a == b:
        assert total == pytest.approx(2 * math.log(2.0), abs=1e-12)


def test_bound_loss_midpoint_against_high_precision_oracle():
    # oracle: -log(F(1) - F(-1) + 1e-10) = 0.77193683...
    expected = mp_interval(1, -1, "1e-10")
    assert bound_loss(0.0, -1.0, 1.0, 1e-10).value == pytest.approx(expected, abs=1e-12)


def test_bound_loss_wide_interval():
    expected = float(-mp.log(mp_F(10) - mp_F(-10)))
    assert expected == pytest.approx(9.08e-5, abs=5e-8)
    assert bound_loss(0.0, -10.0, 10.0, 1e-10).value == pytest.approx(expected, rel=1e-5)


def test_bound_loss_off_center():
    expected = mp_interval(12, 10, "1e-10")
    assert expected == pytest.approx(10.145, abs=1e-3)
    assert bound_loss(0.0, 10.0, 12.0, 1e-10).value == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("f, a, b", [(0.0, -1.0, 1.0), (3.0, -2.0, 0.5), (-40.0, 1.0, 1.001), (60.0, 0.0, 3.0)])
def test_bound_loss_matches_oracle_across_regimes(f, a, b):
    expected = mp_interval(b - f, a - f, "1e-10")
    assert bound_loss(f, a, b).value == pytest.approx(expected, rel=1e-10)


def test_bound_loss_rejects_bad_interval():
    with pytest.raises(BadInterval):
        bound_loss(0.0, 1.0, 1.0)


def test_bound_loss_minimum_at_midpoint():
    a, b = -0.3, 2.1
    grid = np.linspace(a - 5, b + 5, 2401)
    vals = [bound_loss(f, a, b).value for f in grid]
    assert grid[int(np.argmin(vals))] == pytest.approx((a + b) / 2, abs=grid[1] - grid[0])


def test_neighbor_loss_values():
    assert neighbor_loss(2.0, 3.0, 1.0, Direction.BELOW, 1.0).value == 0.0
    assert neighbor_loss(1.0, 2.0, 4.0, Direction.BELOW, 1.0).value == 3.0
    assert neighbor_loss(1.0, 2.0, 4.0, Direction.ABOVE, 1.0).value == 0.0


def test_neighbor_loss_rate_scales():
    assert neighbor_loss(1.0, 2.0, 4.0, Direction.BELOW, 2.5).value == 7.5


def test_neighbor_subgradient_single_active_piece():
    out = neighbor_loss(1.0, 2.0, 4.0, Direction.BELOW)
    # active piece f_k - f_i
    assert_allclose(out.grad, [-1.0, 0.0, 1.0])


def test_neighbor_subgradient_averaged_at_tie():
    out = neighbor_loss(1.0, 1.0, 4.0, Direction.BELOW)
    assert_allclose(out.grad, [-0.5, -0.5, 1.0])


def test_neighbor_mirror_symmetry():
    below = neighbor_loss(0.3, -1.2, 2.0, Direction.BELOW)
    above = neighbor_loss(-0.3, 1.2, -2.0, Direction.ABOVE)
    assert below.value == above.value


def test_similar_loss_values():
    assert similar_loss(0.0, 0.0, 1.0, 1e-10).value == pytest.approx(mp_interval(1, -1, "1e-10"), abs=1e-12)
    # d = 20, s = 1: -log(F(-19) - F(-21) + 1e-10) = 19.1250 (high precision)
    expected = mp_interval(-19, -21, "1e-10")
    assert similar_loss(20.0, 0.0, 1.0, 1e-10).value == pytest.approx(expected, rel=1e-10)


def test_similar_loss_swap_is_exact():
    a = similar_loss(2.0, 5.0, 1.3, 1e-10)
    b = similar_loss(5.0, 2.0, 1.3, 1e-10)
    assert a.value == b.value
    assert a.grad[0] == b.grad[1] and a.grad[1] == b.grad[0]


@given(st.floats(-30, 30), st.floats(-30, 30), st.floats(0.01, 10))
def test_similar_loss_even(fi, fj, s):
    assert similar_loss(fi, fj, s).value == similar_loss(fj, fi, s).value


def test_similar_loss_minimum_at_zero_difference():
    d = np.linspace(-5, 5, 1001)
    vals = [similar_loss(x, 0.0, 0.7).value for x in d]
    assert d[int(np.argmin(vals))] == 0.0


def test_similar_loss_rejects_threshold():
    with pytest.raises(BadThreshold):
        similar_loss(0.0, 1.0, 0.0)


@pytest.mark.parametrize("hi, lo, expected", [(3.0, 1.0, 0.0), (1.0, 1.0, 1.0), (0.0, 1.0, 2.0)])
def test_hinge_values(hi, lo, expected):
    assert hinge_relative_loss(hi, lo, 1.0).value == expected


def test_hinge_subgradient_zero_at_kink():
    assert_allclose(hinge_relative_loss(2.0, 1.0, 1.0).grad, [0.0, 0.0])
    assert_allclose(hinge_relative_loss(0.0, 1.0, 1.0).grad, [-1.0, 1.0])


@settings(max_examples=200)
@given(st.floats(-40, 40), st.floats(-5, 5), st.floats(1e-3, 10))
def test_loss_values_bounded_below(f, a, width):
    eps = 1e-10
    assert bound_loss(f, a, a + width, eps).value >= -math.log1p(eps) - 1e-12
    assert similar_loss(f, 0.0, width, eps).value >= -math.log1p(eps) - 1e-12


@given(st.floats(-40, 40), st.floats(-40, 40), st.floats(-40, 40), st.sampled_from(list(Direction)))
def test_piecewise_losses_nonnegative(a, b, c, direction):
    assert neighbor_loss(a, b, c, direction).value >= 0.0
    assert hinge_relative_loss(a, b).value >= 0.0


def test_log_cdf_difference_no_cancellation():
    # F(40.001) - F(40) is below double-precision spacing near 1
    expected = float(mp.log(mp_F("40.001") - mp_F(40)))
    assert log_cdf_difference(40.001, 40.0, 0.001) == pytest.approx(expected, rel=1e-9)


def _spec(kind, gs, lambda1=0.0, lambda2=1.0, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((6, 3))
    y = rng.standard_normal(6)
    return ObjectiveSpec(X, y, gs, Hyperparams(lambda1, lambda2), kind=kind)


def test_objective_zero_weights_empty_guidance():
    rng = np.random.default_rng(1)
    X, y = rng.standard_normal((5, 2)), rng.standard_normal(5)
    value, grad = objective_eval(np.zeros(2), ObjectiveSpec(X, y))
    assert value == pytest.approx(float(y @ y), rel=1e-15)


def test_objective_lambda2_zero_is_ridge():
    pool = np.random.default_rng(2).standard_normal((4, 3))
    gs = GuidanceSet([Relative(0, 1), Relative(2, 3)], "relative", pool)
    spec = _spec(None, gs, lambda1=0.3, lambda2=0.0)
    w = np.array([0.2, -0.5, 1.0])
    r = spec.X_labeled @ w - spec.y_labeled
    assert objective_eval(w, spec)[0] == pytest.approx(r @ r + 0.3 * w @ w, rel=1e-14)


def test_objective_adds_per_item_losses():
    pool = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    w = np.array([0.5, -1.0, 2.0])
    base = _spec(None, None, lambda1=0.0)
    r = base.X_labeled @ w - base.y_labeled
    ridge = r @ r
    cases = [
        (GuidanceSet([Relative(0, 1)], "relative", pool), None, relative_loss(0.5, -1.0).value),
        (GuidanceSet([Bound(2, 0.0, 1.0)], "bound", pool), None, bound_loss(2.0, 0.0, 1.0).value),
        (GuidanceSet([Neighbor(0, 1, 2)], "neighbor", pool), None, neighbor_loss(0.5, -1.0, 2.0).value),
        (GuidanceSet([Similar(0, 2)], "similar", pool, s=0.8), None, similar_loss(0.5, 2.0, 0.8).value),
        (GuidanceSet([Relative(0, 1)], "relative", pool), LossKind.HINGE_RELATIVE, hinge_relative_loss(0.5, -1.0).value),
    ]
    for gs, kind, term in cases:
        spec = _spec(kind, gs, lambda1=0.0, lambda2=2.0)
        assert objective_eval(w, spec)[0] == pytest.approx(ridge + 2.0 * term, rel=1e-13)


def test_bound_offset_shifts_interval():
    pool = np.eye(2)
    gs = GuidanceSet([Bound(0, 9.0, 11.0)], "bound", pool)
    spec = ObjectiveSpec(np.eye(2), np.zeros(2), gs, Hyperparams(0.0, 1.0), response_offset=10.0)
    # prediction 0 in centered units is the midpoint of the shifted interval
    assert spec.guidance_loss(np.zeros(2)) == pytest.approx(bound_loss(0.0, -1.0, 1.0).value)


def test_objective_dimension_mismatch():
    spec = ObjectiveSpec(np.ones((3, 2)), np.ones(3))
    with pytest.raises(DimensionMismatch):
        objective_eval(np.zeros(3), spec)


def test_hinge_loss_needs_relative_guidance():
    gs = GuidanceSet([Bound(0, 0.0, 1.0)], "bound", np.ones((1, 3)))
    with pytest.raises(ValueError):
        _spec(LossKind.HINGE_RELATIVE, gs)


def test_gradient_matches_finite_differences_small():
    from weakguide.solver import check_gradient

    pool = np.random.default_rng(3).standard_normal((5, 3))
    gs = GuidanceSet([Similar(0, 1), Similar(2, 4)], "similar", pool, s=0.5)
    spec = _spec(None, gs, lambda1=0.1)
    for w in np.random.default_rng(4).standard_normal((10, 3)):
        assert check_gradient(lambda v: objective_eval(v, spec), w, 1e-6) <= 1e-5
