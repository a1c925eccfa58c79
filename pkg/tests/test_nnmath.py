import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gcbatch.nnmath import (
    ConfigError, GradBundle, MlpParams, NumericError, ShapeError, adam_init, adam_step,
    forward_cache, backward_cache, grad_check, mlp_backward, mlp_forward, mlp_init, mse,
    sq_norm_loss, zeros_like,
)


def tiny():
    # 2 -> 2 -> 1 with hand-picked weights
    w1 = np.array([[0.5, -0.25], [0.1, 0.2]])
    b1 = np.array([0.0, 0.1])
    w2 = np.array([[1.0, -2.0]])
    b2 = np.array([0.3])
    return MlpParams([2, 2, 1], [w1, w2], [b1, b2])


def test_forward_matches_hand_computation():
    p = tiny()
    x = np.array([1.0, 2.0])
    h = np.tanh(np.array([0.5 - 0.5, 0.1 + 0.4 + 0.1]))
    want = h[0] - 2.0 * h[1] + 0.3
    assert mlp_forward(p, x)[0] == pytest.approx(want, abs=1e-15)
    # frozen value of the same expression
    assert mlp_forward(p, x)[0] == pytest.approx(-0.7740991339960703, abs=1e-14)


def test_forward_batch_equals_rowwise():
    p = mlp_init([3, 8, 8, 2], 4)
    X = np.random.default_rng(0).normal(size=(7, 3))
    Y = mlp_forward(p, X)
    for i in range(7):
        np.testing.assert_allclose(Y[i], mlp_forward(p, X[i]), rtol=0, atol=1e-15)


def test_forward_shape_error():
    with pytest.raises(ShapeError):
        mlp_forward(tiny(), np.zeros(3))


def test_init_bounds_and_determinism():
    p = mlp_init([5, 64, 2], 123)
    assert np.abs(p.weights[0]).max() <= 1 / math.sqrt(5)
    assert np.abs(p.weights[1]).max() <= 1 / 8
    assert all(np.all(b == 0) for b in p.biases)
    assert p.to_bytes() == mlp_init([5, 64, 2], 123).to_bytes()
    assert p.to_bytes() != mlp_init([5, 64, 2], 124).to_bytes()


@pytest.mark.parametrize("dims", [[3], [3, 0, 2], []])
def test_init_rejects_bad_dims(dims):
    with pytest.raises(ConfigError):
        mlp_init(dims, 0)


def test_params_validation():
    p = tiny()
    with pytest.raises(ShapeError):
        MlpParams([2, 3, 1], p.weights, p.biases)
    bad = [w.copy() for w in p.weights]
    bad[0][0, 0] = np.nan
    with pytest.raises(NumericError):
        MlpParams([2, 2, 1], bad, p.biases)


def test_backward_against_finite_differences():
    p = mlp_init([4, 6, 5, 3], 1)
    rng = np.random.default_rng(2)
    X = rng.normal(size=(9, 4))
    U = rng.normal(size=(9, 3))

    def f(q):
        out = forward_cache(q, X)
        loss = float(np.sum(out[-1] * U))
        g = backward_cache(q, out, U)
        return loss, g

    assert grad_check(p, f, eps=1e-6) < 1e-7


def test_input_gradient_matches_finite_differences():
    p = mlp_init([3, 7, 2], 5)
    x = np.array([0.3, -0.2, 0.9])
    u = np.array([1.0, -0.5])
    g = mlp_backward(p, x, u).input_grad
    eps = 1e-6
    for i in range(3):
        e = np.zeros(3)
        e[i] = eps
        fd = (mlp_forward(p, x + e) @ u - mlp_forward(p, x - e) @ u) / (2 * eps)
        assert g[i] == pytest.approx(fd, abs=1e-8)


def test_mlp_backward_shape_error():
    with pytest.raises(ShapeError):
        mlp_backward(tiny(), np.zeros(2), np.zeros(2))


def test_mse_and_sq_norm_loss():
    assert mse([1.0, 2.0], [1.0, 4.0]) == 2.0
    with pytest.raises(ShapeError):
        mse([1.0], [1.0, 2.0])
    pred = np.array([[1.0, 2.0], [0.0, 0.0]])
    tgt = np.array([[0.0, 0.0], [0.0, 3.0]])
    loss, g = sq_norm_loss(pred, tgt)
    assert loss == (1 + 4 + 9) / 2
    np.testing.assert_array_equal(g, 2 * (pred - tgt) / 2)


def test_adam_first_step_is_lr_times_sign():
    # after one step m_hat = g, v_hat = g^2, so the update is lr * g / (|g| + eps)
    p = MlpParams([1, 1], [np.array([[0.5]])], [np.array([0.0])])
    g = GradBundle([np.array([[2.0]])], [np.array([-1e-3])])
    q, s = adam_step(p, g, adam_init(p, lr=0.1))
    assert q.weights[0][0, 0] == pytest.approx(0.5 - 0.1 * 2.0 / (2.0 + 1e-8), abs=1e-15)
    assert q.biases[0][0] == pytest.approx(0.1 * 1e-3 / (1e-3 + 1e-8), abs=1e-15)
    assert s.step_count == 1
    assert p.weights[0][0, 0] == 0.5  # input not mutated


def test_adam_two_steps_frozen():
    # oracle: scalar Adam written out by hand for g = 1 then g = 3
    lr, b1, b2, eps = 0.001, 0.9, 0.999, 1e-8
    m1, v1 = 0.1, 0.001
    x1 = 1.0 - lr * (m1 / 0.1) / (math.sqrt(v1 / 0.001) + eps)
    m2, v2 = b1 * m1 + 0.1 * 3, b2 * v1 + 0.001 * 9
    x2 = x1 - lr * (m2 / (1 - b1 ** 2)) / (math.sqrt(v2 / (1 - b2 ** 2)) + eps)
    p = MlpParams([1, 1], [np.array([[1.0]])], [np.array([0.0])])
    s = adam_init(p)
    for gv in (1.0, 3.0):
        p, s = adam_step(p, GradBundle([np.array([[gv]])], [np.array([0.0])]), s)
    assert p.weights[0][0, 0] == pytest.approx(x2, abs=1e-15)
    assert p.weights[0][0, 0] == pytest.approx(0.9980822188951233, abs=1e-14)


def test_adam_layout_mismatch():
    p = tiny()
    with pytest.raises(ShapeError):
        adam_step(p, zeros_like(mlp_init([2, 3, 1], 0)), adam_init(p))


def test_grad_check_rejects_eps():
    with pytest.raises(ConfigError):
        grad_check(tiny(), lambda q: (0.0, zeros_like(q)), eps=0.1)


def test_grad_check_detects_wrong_gradient():
    p = tiny()
    X = np.ones((1, 2))

    def f(q):
        acts = forward_cache(q, X)
        return float(acts[-1].sum()), backward_cache(q, acts, np.ones((1, 1)))

    wrong = zeros_like(p)
    assert grad_check(p, f, analytic=wrong) > 1e-2


def test_serialization_roundtrip_exact():
    p = mlp_init([3, 5, 2], 9)
    d = json.loads(json.dumps(p.to_dict({"seed": 9})))
    assert MlpParams.from_dict(d).to_bytes() == p.to_bytes()
    assert d["meta"] == {"seed": 9}


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 4), st.integers(1, 6), st.integers(1, 3), st.integers(0, 2**31))
def test_property_forward_shape_and_bounded_hidden(nin, hidden, nout, seed):
    p = mlp_init([nin, hidden, nout], seed)
    X = np.random.default_rng(seed).normal(size=(4, nin)) * 100
    acts = forward_cache(p, X)
    assert acts[-1].shape == (4, nout)
    assert np.all(np.abs(acts[1]) <= 1.0)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31), st.floats(1e-4, 1e-1))
def test_property_adam_step_bounded_by_lr(seed, lr):
    # the first Adam step moves each coordinate by at most lr
    p = mlp_init([3, 4, 2], seed)
    g = mlp_init([3, 4, 2], seed + 1)
    grads = GradBundle(g.weights, g.biases)
    q, _ = adam_step(p, grads, adam_init(p, lr=lr))
    for a, b in zip(p.arrays(), q.arrays()):
        assert np.all(np.abs(a - b) <= lr * (1 + 1e-12))
