"""Layers, optimizer, metrics, gradient checking."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from eegnorm.learn import (
    AdamaxState,
    adamax_step,
    balanced_accuracy,
    cross_entropy,
    cross_entropy_grad,
    grad_check,
    linear_backward,
    linear_forward,
    mae,
    softmax,
)

LN21 = 3.044522437723423


# --- linear layer ---


def test_linear_identity(rng):
    x = rng.normal(size=8)
    y = linear_forward(x, np.eye(8), np.zeros(8))
    assert np.allclose(y, x, atol=1e-15)


def test_linear_bias_gradient_is_grad_out(rng):
    g = rng.normal(size=5)
    x = rng.normal(size=7)
    w = rng.normal(size=(5, 7))
    _, _, grad_b = linear_backward(g, x, w)
    assert np.array_equal(grad_b, g)


def test_linear_shape_mismatch():
    with pytest.raises(ValueError, match="mismatch"):
        linear_forward(np.zeros(3), np.zeros((2, 4)), np.zeros(2))


def test_linear_grad_check(rng):
    w = rng.normal(size=(8, 8)) / np.sqrt(8)
    b = rng.normal(size=8) * 0.1
    x = rng.normal(size=8)
    target = rng.normal(size=8)

    def f(params):
        y = linear_forward(x, params["w"], params["b"])
        diff = y - target
        loss = 0.5 * float(diff @ diff)
        gx, gw, gb = linear_backward(diff, x, params["w"])
        return loss, {"w": gw, "b": gb}

    assert grad_check(f, {"w": w, "b": b}, h=1e-5) < 1e-6


# --- adamax ---


def test_adamax_zero_gradient_is_identity(rng):
    params = {"w": rng.normal(size=(3, 3))}
    state = AdamaxState.init(params)
    out, new_state = adamax_step(params, {"w": np.zeros((3, 3))}, state)
    assert np.array_equal(out["w"], params["w"])
    assert not new_state.collapsed


def test_adamax_single_step_hand_value():
    # fresh state, scalar g=1: m=0.1, u=1, bias correction 10
    # => theta decreases by 0.002 / (1 + 1e-8)
    params = {"w": np.array([0.5])}
    state = AdamaxState.init(params)
    out, new_state = adamax_step(params, {"w": np.array([1.0])}, state)
    expected_step = 0.002 / (1.0 + 1e-8)
    assert out["w"][0] == pytest.approx(0.5 - expected_step, abs=1e-12)
    assert new_state.t == 1
    assert new_state.m["w"][0] == pytest.approx(0.1)
    assert new_state.u["w"][0] == 1.0


def test_adamax_nan_gradient_collapses(rng):
    params = {"w": rng.normal(size=4)}
    state = AdamaxState.init(params)
    out, new_state = adamax_step(params, {"w": np.array([1.0, np.nan, 0.0, 0.0])}, state)
    assert new_state.collapsed
    assert np.array_equal(out["w"], params["w"])
    assert new_state.t == 0


def test_adamax_defaults_match_contract():
    state = AdamaxState.init({"w": np.zeros(1)})
    assert (state.lr, state.beta1, state.beta2, state.eps) == (0.002, 0.9, 0.999, 1e-8)


# --- grad_check itself ---


def test_grad_check_quadratic_exact(rng):
    theta = rng.normal(size=6)

    def f(params):
        v = params["theta"]
        return 0.5 * float(v @ v), {"theta": v.copy()}

    assert grad_check(f, {"theta": theta}) < 1e-9


def test_grad_check_detects_scaled_gradient(rng):
    theta = rng.normal(size=6)

    def f(params):
        v = params["theta"]
        return 0.5 * float(v @ v), {"theta": 2.0 * v}

    err = grad_check(f, {"theta": theta})
    assert err == pytest.approx(1.0, abs=0.05)


def test_grad_check_mlp(rng):
    w1 = rng.normal(size=(6, 4)) / 2
    w2 = rng.normal(size=(2, 6)) / 2
    x = rng.normal(size=4)

    def f(params):
        h_pre = linear_forward(x, params["w1"], np.zeros(6))
        h = np.tanh(h_pre)
        logits = linear_forward(h, params["w2"], np.zeros(2))
        loss = cross_entropy(logits, 0)
        dlogits = cross_entropy_grad(logits, 0)
        dh, gw2, _ = linear_backward(dlogits, h, params["w2"])
        dpre = dh * (1 - h**2)
        _, gw1, _ = linear_backward(dpre, x, params["w1"])
        return loss, {"w1": gw1, "w2": gw2}

    assert grad_check(f, {"w1": w1, "w2": w2}) < 1e-6


# --- metrics ---


def test_mae_examples():
    assert mae([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert mae([10.0, 12.0], [11.0, 11.0]) == 1.0


@given(st.lists(st.tuples(st.floats(-50, 50), st.floats(-50, 50)), min_size=1, max_size=30), st.randoms())
def test_mae_permutation_invariant(pairs, pyrng):
    preds = [p for p, _ in pairs]
    targets = [t for _, t in pairs]
    base = mae(preds, targets)
    order = list(range(len(pairs)))
    pyrng.shuffle(order)
    shuffled = mae([preds[i] for i in order], [targets[i] for i in order])
    assert shuffled == pytest.approx(base, rel=1e-12, abs=1e-12)


def test_mae_length_mismatch():
    with pytest.raises(ValueError):
        mae([1.0], [1.0, 2.0])


def test_balanced_accuracy_perfect():
    assert balanced_accuracy([0, 1, 0, 1], [0, 1, 0, 1]) == 1.0


def test_balanced_accuracy_confusion_example():
    # TPR 0.8 (8/10), TNR 0.6 (6/10) -> 0.7
    labels = [1] * 10 + [0] * 10
    preds = [1] * 8 + [0] * 2 + [0] * 6 + [1] * 4
    assert balanced_accuracy(preds, labels) == pytest.approx(0.7)


@given(st.integers(1, 40), st.integers(1, 40), st.integers(0, 1))
def test_constant_predictor_scores_half(n_pos, n_neg, constant):
    labels = [1] * n_pos + [0] * n_neg
    preds = [constant] * (n_pos + n_neg)
    assert balanced_accuracy(preds, labels) == 0.5


def test_balanced_accuracy_single_class_rejected():
    with pytest.raises(ValueError, match="both classes"):
        balanced_accuracy([1, 1], [1, 1])


# --- cross entropy ---


def test_cross_entropy_equal_logits_is_ln_n():
    assert cross_entropy(np.zeros(21), 0) == pytest.approx(LN21, abs=1e-12)
    for n in range(2, 65):
        assert cross_entropy(np.full(n, 3.7), n - 1) == pytest.approx(np.log(n), abs=1e-12)


def test_cross_entropy_monotone_in_target_logit():
    logits = np.zeros(5)
    losses = []
    for v in (0.0, 2.0, 10.0, 50.0):
        logits[2] = v
        losses.append(cross_entropy(logits, 2))
    assert all(a > b for a, b in zip(losses, losses[1:]))
    assert losses[-1] < 1e-20


@given(st.lists(st.floats(-30, 30), min_size=2, max_size=16), st.floats(-100, 100))
def test_cross_entropy_shift_invariance(logits, shift):
    logits = np.asarray(logits)
    assert cross_entropy(logits + shift, 0) == pytest.approx(
        cross_entropy(logits, 0), abs=1e-12
    )


def test_cross_entropy_grad_is_softmax_minus_onehot(rng):
    logits = rng.normal(size=7)
    grad = cross_entropy_grad(logits, 3)
    expected = softmax(logits)
    expected[3] -= 1
    assert np.allclose(grad, expected, atol=1e-15)


def test_cross_entropy_grad_check(rng):
    logits = rng.normal(size=6)

    def f(params):
        return cross_entropy(params["z"], 2), {"z": cross_entropy_grad(params["z"], 2)}

    assert grad_check(f, {"z": logits}) < 1e-8
