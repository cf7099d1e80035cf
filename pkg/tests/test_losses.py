import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from screject.exceptions import ConfigError, InvalidInputError
from screject.losses import (
    LogOfZeroWarning,
    SmoothingConfig,
    grad_ce_logits,
    grad_ls_logits,
    grad_suppression,
    grad_suppression_onehot,
    kl_uniform,
    loss_ce,
    loss_ls,
    one_hot,
    smooth_target,
    suppression_at_max,
)
from screject.scores import softmax

from oracles import central_diff, naive_ce, rel_error


def _random_case(rng, soft=False, alpha_range=(0.0, 1.0)):
    k = int(rng.integers(2, 10))
    v = rng.normal(size=k) * 3
    if soft:
        t = rng.dirichlet(np.ones(k))
    else:
        t = one_hot(rng.integers(k), k)
    alpha = float(rng.uniform(*alpha_range))
    return v, t, SmoothingConfig(alpha, k)


def test_config_validation():
    with pytest.raises(ConfigError):
        SmoothingConfig(1.5, 3)
    with pytest.raises(ConfigError):
        SmoothingConfig(float("nan"), 3)
    with pytest.raises(ConfigError):
        SmoothingConfig(0.1, 1)
    assert SmoothingConfig(-0.5, 3).alpha == -0.5


def test_smooth_target_examples():
    np.testing.assert_allclose(smooth_target([1, 0], SmoothingConfig(0.2, 2)), [0.9, 0.1])
    np.testing.assert_allclose(smooth_target([1, 0], SmoothingConfig(-0.2, 2)), [1.1, -0.1])
    t = np.array([0.3, 0.7])
    np.testing.assert_array_equal(smooth_target(t, SmoothingConfig(0.0, 2)), t)


def test_loss_examples():
    assert loss_ce([0.5, 0.5], [1, 0]) == pytest.approx(math.log(2))
    assert loss_ce([1.0, 0.0], [1, 0]) == 0.0
    pi = np.array([0.2, 0.3, 0.5])
    assert loss_ce(pi, pi) == pytest.approx(-(pi * np.log(pi)).sum())
    cfg = SmoothingConfig(0.2, 2)
    # -0.9 log 0.8 - 0.1 log 0.2 = 0.3617729...
    assert loss_ls([0.8, 0.2], [1, 0], cfg) == pytest.approx(-0.9 * math.log(0.8) - 0.1 * math.log(0.2), abs=1e-15)
    assert loss_ls([0.8, 0.2], [1, 0], cfg) == pytest.approx(0.361773, abs=1e-6)
    assert loss_ls([0.5, 0.5], [0, 1], cfg) == pytest.approx(math.log(2))
    assert loss_ls([0.8, 0.2], [1, 0], SmoothingConfig(0.0, 2)) == loss_ce([0.8, 0.2], [1, 0])


def test_loss_matches_naive(rng):
    for _ in range(100):
        v, t, _ = _random_case(rng, soft=True)
        assert loss_ce(softmax(v), t) == pytest.approx(naive_ce(list(v), list(t)), rel=1e-12)


def test_log_of_zero_is_infinite_with_warning():
    with pytest.warns(LogOfZeroWarning):
        assert loss_ce([0.0, 1.0], [1, 0]) == math.inf
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert loss_ce([0.0, 1.0], [0, 1]) == 0.0


def test_gradient_examples():
    np.testing.assert_allclose(grad_ce_logits([0.8, 0.2], [1, 0]), [-0.2, 0.2], atol=1e-15)
    np.testing.assert_array_equal(grad_ce_logits([0.3, 0.7], [0.3, 0.7]), [0, 0])
    np.testing.assert_allclose(grad_ls_logits([0.8, 0.2], [1, 0], SmoothingConfig(0.2, 2)), [-0.1, 0.1], atol=1e-15)
    np.testing.assert_array_equal(grad_ls_logits([0.8, 0.2], [1, 0], SmoothingConfig(0.0, 2)),
                                  grad_ce_logits([0.8, 0.2], [1, 0]))
    g = grad_ls_logits([0.6, 0.4], [1, 0], SmoothingConfig(-0.2, 2))
    assert g[1] == pytest.approx(0.4 + 0.1)


def test_suppression_examples():
    np.testing.assert_allclose(grad_suppression(one_hot(0, 5), SmoothingConfig(0.2, 5)),
                               [0.16, -0.04, -0.04, -0.04, -0.04], atol=1e-15)
    np.testing.assert_array_equal(grad_suppression(one_hot(1, 3), SmoothingConfig(0.0, 3)), [0, 0, 0])
    np.testing.assert_allclose(grad_suppression(np.full(4, 0.25), SmoothingConfig(0.3, 4)), 0, atol=1e-16)
    cfg = SmoothingConfig(0.2, 5)
    assert suppression_at_max(0.3, cfg) == pytest.approx(0.10)
    assert suppression_at_max(1 - 1 / 5, cfg) == pytest.approx(0.0, abs=1e-15)
    assert suppression_at_max(0.4, SmoothingConfig(0.0, 5)) == 0
    assert grad_suppression_onehot(True, cfg) == pytest.approx(0.16)
    assert grad_suppression_onehot(False, cfg) == pytest.approx(-0.04)
    assert grad_suppression_onehot(True, SmoothingConfig(0.0, 5)) == 0
    with pytest.raises(InvalidInputError):
        suppression_at_max(1.2, cfg)


def test_suppression_at_max_is_expected_onehot_suppression(rng):
    cfg = SmoothingConfig(0.3, 6)
    for p in rng.uniform(0, 1, 20):
        expected = (1 - p) * grad_suppression_onehot(True, cfg) + p * grad_suppression_onehot(False, cfg)
        assert suppression_at_max(p, cfg) == pytest.approx(expected, abs=1e-15)


def test_gradient_difference_identity(rng):
    for _ in range(1000):
        v, t, cfg = _random_case(rng, soft=bool(rng.integers(2)))
        pi = softmax(v)
        diff = grad_ls_logits(pi, t, cfg) - grad_ce_logits(pi, t)
        assert np.max(np.abs(diff - grad_suppression(t, cfg))) <= 1e-14


def test_kl_decomposition(rng):
    for _ in range(1000):
        v, t, cfg = _random_case(rng, soft=bool(rng.integers(2)))
        pi = softmax(v)
        rhs = (1 - cfg.alpha) * loss_ce(pi, t) + cfg.alpha * kl_uniform(pi) + cfg.alpha * math.log(cfg.num_classes)
        assert abs(loss_ls(pi, t, cfg) - rhs) <= 1e-10


def test_logit_gradients_match_finite_differences(rng):
    for _ in range(100):
        v, t, cfg = _random_case(rng, soft=bool(rng.integers(2)))
        pi = softmax(v)
        fd_ce = central_diff(lambda z: loss_ce(softmax(z), t), v)
        fd_ls = central_diff(lambda z: loss_ls(softmax(z), t, cfg), v)
        assert rel_error(grad_ce_logits(pi, t), fd_ce) < 1e-6
        assert rel_error(grad_ls_logits(pi, t, cfg), fd_ls) < 1e-6


@given(st.integers(2, 20), st.floats(-1, -0.01), st.data())
def test_negative_smoothing_has_no_stationary_point(k, alpha, data):
    logits = np.array(data.draw(st.lists(st.floats(-20, 20), min_size=k, max_size=k)))
    label = data.draw(st.integers(0, k - 1))
    g = grad_ls_logits(softmax(logits), one_hot(label, k), SmoothingConfig(alpha, k))
    assert np.max(np.abs(g)) >= abs(alpha) / k - 1e-15


@given(st.floats(0.01, 1), st.integers(2, 50), st.floats(0, 1), st.floats(0, 1))
def test_suppression_monotone_in_p_error(alpha, k, p1, p2):
    if abs(p1 - p2) < 1e-9:
        return
    lo, hi = min(p1, p2), max(p1, p2)
    pos, neg = SmoothingConfig(alpha, k), SmoothingConfig(-alpha, k)
    assert suppression_at_max(lo, pos) > suppression_at_max(hi, pos)
    assert suppression_at_max(lo, neg) < suppression_at_max(hi, neg)


@given(st.integers(2, 10), st.floats(-1, 1), st.data())
def test_smoothed_target_sums_to_one(k, alpha, data):
    t = one_hot(data.draw(st.integers(0, k - 1)), k)
    assert smooth_target(t, SmoothingConfig(alpha, k)).sum() == pytest.approx(1.0, abs=1e-14)
