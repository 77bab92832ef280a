import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from scipy.optimize import minimize_scalar
from scipy.special import log_softmax, softmax

from selfdistill import losses as L
from selfdistill.priors import lambert_w, omega

from conftest import assert_grad_close, finite_difference


def _instance(seed, m=3, k=4, scale=2.0):
    rng = np.random.default_rng(seed)
    return (rng.normal(scale=scale, size=(m, k)), rng.integers(0, k, size=m),
            rng.normal(scale=scale, size=(m, k)))


logit_arrays = st.integers(1, 4).flatmap(
    lambda m: st.integers(2, 6).flatmap(
        lambda k: arrays(np.float64, (m, k), elements=st.floats(-20, 20))))


def _labels_for(z, data):
    m, k = z.shape
    return np.array(data.draw(st.lists(st.integers(0, k - 1), min_size=m, max_size=m)))


# ---------------------------------------------------------------- softmax


def test_softmax_matches_scipy(rng):
    z = rng.normal(scale=5, size=(6, 5))
    np.testing.assert_allclose(L.softmax_t(z, 2.5), softmax(z / 2.5, axis=1), rtol=1e-14)
    np.testing.assert_allclose(L.log_softmax_t(z, 0.5), log_softmax(z / 0.5, axis=1), rtol=1e-13, atol=1e-14)


def test_softmax_extreme_logits_stay_finite():
    p = L.softmax_t(np.array([[1e308, -1e308, 0.0]]))
    assert np.all(np.isfinite(p))
    np.testing.assert_allclose(p, [[1, 0, 0]])


@pytest.mark.parametrize("T", [0.0, -1.0])
def test_temperature_must_be_positive(T):
    with pytest.raises(ValueError):
        L.softmax_t(np.zeros((1, 2)), T)
    with pytest.raises(ValueError):
        L.distill_loss(np.zeros((1, 2)), np.zeros((1, 2)), T)


# ---------------------------------------------------------------- cce


def test_cce_uniform_two_class():
    loss, _ = L.cce_loss(np.zeros((1, 2)), [0])
    assert loss == pytest.approx(math.log(2), abs=1e-12)


def test_cce_confident_correct_is_small():
    loss, _ = L.cce_loss(np.array([[50.0, 0.0]]), [0])
    assert loss < 1e-20


def test_cce_label_errors():
    with pytest.raises(ValueError):
        L.cce_loss(np.zeros((2, 3)), [0, 3])
    with pytest.raises(ValueError):
        L.cce_loss(np.zeros((2, 3)), [0])
    with pytest.raises(ValueError):
        L.cce_loss(np.zeros((2, 3)), [0.5, 1])


def test_cce_gradient_is_p_minus_onehot_over_m(rng):
    z = rng.normal(size=(4, 3))
    y = np.array([0, 2, 1, 1])
    _, g = L.cce_loss(z, y)
    np.testing.assert_allclose(g, (softmax(z, axis=1) - np.eye(3)[y]) / 4, rtol=1e-14)


# ---------------------------------------------------------------- distillation


def test_distill_uniform_teacher_uniform_student():
    loss, _ = L.distill_loss(np.zeros((3, 2)), np.full((3, 2), 7.0))
    assert loss == pytest.approx(math.log(2), abs=1e-12)


def test_distill_high_temperature_is_uniform_target(rng):
    s, _, t = _instance(0)
    a, _ = L.distill_loss(s, t, 1e6)
    b, _ = L.soft_target_ce(s, np.full_like(s, 1 / s.shape[1]))
    assert a == pytest.approx(b, abs=1e-5)


def test_distill_student_scaling_changes_student_only(rng):
    s, _, t = _instance(1)
    a, _ = L.distill_loss(s, t, 3.0, student_scaling=True)
    b, _ = L.soft_target_ce(s / 3.0, softmax(t / 3.0, axis=1))
    assert a == pytest.approx(b, rel=1e-13)


def test_distill_shape_mismatch():
    with pytest.raises(ValueError):
        L.distill_loss(np.zeros((2, 3)), np.zeros((2, 4)))


# ---------------------------------------------------------------- combined


def test_combined_endpoints_are_exact():
    s, y, t = _instance(2)
    ce = L.cce_loss(s, y)
    dist = L.distill_loss(s, t, 2.0)
    one = L.combined_loss(s, y, t, L.LossSpec(L.LossKind.COMBINED, alpha=1.0, temperature=2.0))
    zero = L.combined_loss(s, y, t, L.LossSpec(L.LossKind.COMBINED, alpha=0.0, temperature=2.0))
    assert one[0] == ce[0] and np.array_equal(one[1], ce[1])
    assert zero[0] == dist[0] and np.array_equal(zero[1], dist[1])


def test_combined_point_six():
    s, y, t = _instance(3)
    got, _ = L.combined_loss(s, y, t, L.LossSpec(L.LossKind.COMBINED, alpha=0.6))
    want = 0.6 * L.cce_loss(s, y)[0] + 0.4 * L.distill_loss(s, t)[0]
    assert abs(got - want) <= 1e-12


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 1), st.integers(0, 10_000))
def test_combined_is_affine_in_alpha(alpha, seed):
    s, y, t = _instance(seed)
    spec = lambda a: L.LossSpec(L.LossKind.COMBINED, alpha=a, temperature=1.5)
    got = L.combined_loss(s, y, t, spec(alpha))[0]
    ends = alpha * L.combined_loss(s, y, t, spec(1.0))[0] + (1 - alpha) * L.combined_loss(s, y, t, spec(0.0))[0]
    assert got == pytest.approx(ends, rel=1e-12, abs=1e-12)


def test_combined_rejects_other_kinds():
    s, y, t = _instance(4)
    with pytest.raises(ValueError):
        L.combined_loss(s, y, t, L.LossSpec(L.LossKind.CCE))


@pytest.mark.parametrize("kw", [{"temperature": 0}, {"alpha": 1.5}, {"alpha": -0.1}, {"beta": -1}])
def test_loss_spec_validation(kw):
    with pytest.raises(ValueError):
        L.LossSpec(L.LossKind.COMBINED, **kw)


# ---------------------------------------------------------------- label smoothing MAP


def test_ls_loss_zero_beta_is_cce():
    s, y, _ = _instance(5)
    assert L.ls_loss(s, y, 0.0)[0] == pytest.approx(L.cce_loss(s, y)[0], rel=1e-15)


@settings(max_examples=60, deadline=None)
@given(logit_arrays, st.floats(0, 50), st.data())
def test_ls_loss_equals_scaled_soft_target_ce(z, beta, data):
    y = _labels_for(z, data)
    k = z.shape[1]
    target = np.full(z.shape, beta / (k * (1 + beta)))
    target[np.arange(len(y)), y] = (k + beta) / (k * (1 + beta))
    lhs = L.ls_loss(z, y, beta)[0] / (1 + beta)
    rhs = L.soft_target_ce(z, target)[0]
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(rhs))


# ---------------------------------------------------------------- predictive uncertainty


def test_pu_loss_zero_beta_is_cce():
    s, y, _ = _instance(6)
    assert L.pu_loss(s, y, 0.0)[0] == pytest.approx(L.cce_loss(s, y)[0], rel=1e-15)


def test_pu_two_class_minimiser_matches_lambert_w():
    # minimise over the one free logit numerically, then compare with the closed form
    res = minimize_scalar(lambda u: L.pu_loss(np.array([[u, 0.0]]), [0], 1.0)[0],
                          bracket=(0, 3), tol=1e-12)
    z_y = softmax([res.x, 0.0])[0]
    closed = 1 / (lambert_w(math.exp(-1)) + 1)
    assert z_y == pytest.approx(closed, abs=1e-6)
    assert z_y == pytest.approx(0.7821883, abs=1e-6)


# ---------------------------------------------------------------- weighted self-distillation


def test_weighted_sd_per_sample_identity():
    s, y, t = _instance(7, m=4)
    T, beta = 2.0, 0.3
    full, _ = L.weighted_sd_loss(s, y, t, beta, T)
    per = []
    for i in range(4):
        ce = L.cce_loss(s[i:i + 1], y[i:i + 1])[0]
        dist = L.distill_loss(s[i:i + 1], t[i:i + 1], T)[0]
        w = omega(t[i], T)
        per.append(ce + beta * w * dist)
    assert abs(full - np.mean(per)) <= 1e-12 * max(1.0, abs(full))


def test_weighted_sd_constant_teacher_is_combined():
    s, y, _ = _instance(8)
    t = np.tile([1.0, 0.0, -1.0, 0.5], (3, 1))
    w = float(omega(t[0], 1.0))
    beta = 0.25
    got = L.weighted_sd_loss(s, y, t, beta, 1.0)[0]
    want = L.cce_loss(s, y)[0] + beta * w * L.distill_loss(s, t)[0]
    assert got == pytest.approx(want, rel=1e-13)


def test_weighted_sd_overflow():
    with pytest.raises(OverflowError):
        L.weighted_sd_loss(np.zeros((1, 2)), [0], np.array([[1e4, 0.0]]), 1.0, 1.0)


# ---------------------------------------------------------------- soft targets


def test_soft_target_onehot_is_cce():
    s, y, _ = _instance(9)
    a = L.soft_target_ce(s, np.eye(4)[y])
    b = L.cce_loss(s, y)
    assert a[0] == pytest.approx(b[0], rel=1e-15)
    np.testing.assert_allclose(a[1], b[1], rtol=1e-15)


@settings(max_examples=60, deadline=None)
@given(logit_arrays)
def test_soft_target_uniform_gibbs(z):
    k = z.shape[1]
    loss, _ = L.soft_target_ce(z[:1], np.full((1, k), 1 / k))
    assert loss >= math.log(k) - 1e-12


def test_soft_target_uniform_equality_iff_uniform():
    assert L.soft_target_ce(np.zeros((1, 3)), np.full((1, 3), 1 / 3))[0] == pytest.approx(math.log(3), abs=1e-15)
    assert L.soft_target_ce(np.array([[0.1, 0, 0]]), np.full((1, 3), 1 / 3))[0] > math.log(3)


def test_soft_target_rejects_invalid():
    with pytest.raises(ValueError):
        L.soft_target_ce(np.zeros((1, 2)), [[0.7, 0.7]])
    with pytest.raises(ValueError):
        L.soft_target_ce(np.zeros((1, 2)), [[1.5, -0.5]])
    with pytest.raises(ValueError):
        L.soft_target_ce(np.zeros((1, 2)), [[1.0, 0.0, 0.0]])


def test_zero_target_on_zero_probability_is_finite():
    loss, grad = L.soft_target_ce(np.array([[800.0, 0.0, -800.0]]), [[1.0, 0.0, 0.0]])
    assert np.isfinite(loss) and np.all(np.isfinite(grad))


def test_uniform_teacher_distill_equals_uniform_soft_target(rng):
    s = rng.normal(size=(3, 5))
    a = L.distill_loss(s, np.zeros((3, 5)))
    b = L.soft_target_ce(s, np.full((3, 5), 0.2))
    assert a[0] == pytest.approx(b[0], rel=1e-15)


# ---------------------------------------------------------------- Dirichlet prior loss


def test_dirichlet_prior_loss_flat_prior_is_cce():
    s, y, _ = _instance(10)
    assert L.dirichlet_prior_loss(s, y, np.ones_like(s))[0] == pytest.approx(L.cce_loss(s, y)[0], rel=1e-15)


def test_dirichlet_prior_loss_prunes_small_alpha():
    s, y, _ = _instance(11)
    a = np.full_like(s, 0.5)
    assert L.dirichlet_prior_loss(s, y, a)[0] == pytest.approx(L.cce_loss(s, y)[0], rel=1e-15)


# ---------------------------------------------------------------- properties


@settings(max_examples=60, deadline=None)
@given(logit_arrays, st.floats(0, 5), st.floats(0.1, 10), st.data())
def test_losses_nonnegative(z, beta, T, data):
    y = _labels_for(z, data)
    t = data.draw(arrays(np.float64, z.shape, elements=st.floats(-10, 10)))
    assert L.cce_loss(z, y)[0] >= 0
    assert L.distill_loss(z, t, T)[0] >= 0
    assert L.ls_loss(z, y, beta)[0] >= 0
    assert L.weighted_sd_loss(z, y, t, beta, T)[0] >= 0
    assert L.combined_loss(z, y, t, L.LossSpec(L.LossKind.COMBINED, alpha=0.4, temperature=T))[0] >= 0
    assert L.dirichlet_prior_loss(z, y, np.exp(t))[0] >= 0


def test_pu_loss_lower_bound(rng):
    # the entropy penalty can push the total below zero, but never below -beta*log k
    z = np.zeros((1, 4))
    loss = L.pu_loss(z, [0], 3.0)[0]
    assert loss == pytest.approx(math.log(4) - 3.0 * math.log(4), rel=1e-14)
    assert loss < 0


# ---------------------------------------------------------------- gradients


def _grad_cases():
    cases = []
    for seed in range(4):
        for T in (1.0, 2.5):
            cases += [
                ("cce", seed, T, lambda s, y, t, T: L.cce_loss(s, y)),
                ("distill", seed, T, lambda s, y, t, T: L.distill_loss(s, t, T)),
                ("distill_scaled", seed, T, lambda s, y, t, T: L.distill_loss(s, t, T, True)),
                ("combined", seed, T, lambda s, y, t, T: L.combined_loss(
                    s, y, t, L.LossSpec(L.LossKind.COMBINED, alpha=0.6, temperature=T))),
                ("ls", seed, T, lambda s, y, t, T: L.ls_loss(s, y, 0.7 * T)),
                ("pu", seed, T, lambda s, y, t, T: L.pu_loss(s, y, 0.7 * T)),
                ("weighted_sd", seed, T, lambda s, y, t, T: L.weighted_sd_loss(s, y, t, 0.2, T)),
                ("soft", seed, T, lambda s, y, t, T: L.soft_target_ce(s, softmax(t / T, axis=1))),
                ("dirichlet", seed, T, lambda s, y, t, T: L.dirichlet_prior_loss(s, y, np.exp(t / T))),
            ]
    return cases


@pytest.mark.parametrize("name,seed,T,fn", _grad_cases(), ids=lambda v: str(v) if not callable(v) else "")
def test_gradient_matches_finite_differences(name, seed, T, fn):
    s, y, t = _instance(seed)
    _, g = fn(s, y, t, T)
    num = finite_difference(lambda v: fn(v, y, t, T)[0], s)
    assert_grad_close(g, num)


def test_evaluate_loss_dispatch():
    s, y, t = _instance(12)
    assert L.evaluate_loss(L.LossSpec(L.LossKind.CCE), s, y)[0] == L.cce_loss(s, y)[0]
    assert L.evaluate_loss(L.LossSpec(L.LossKind.PRED_UNCERTAINTY, beta=0.5), s, y)[0] == L.pu_loss(s, y, 0.5)[0]
    spec = L.LossSpec(L.LossKind.WEIGHTED_SD, beta=0.5, temperature=2.0)
    assert L.evaluate_loss(spec, s, y, t)[0] == L.weighted_sd_loss(s, y, t, 0.5, 2.0)[0]
