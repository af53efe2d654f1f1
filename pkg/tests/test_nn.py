"""Numerical-core tests: forwards, backwards, losses, Adam, gradcheck."""

import numpy as np
import pytest

from facefactor.gradcheck import finite_diff_check
from facefactor.losses import l1_loss, softmax_cross_entropy
from facefactor.nn import LEAKY_SLOPE, DenseLayer, DenseNet
from facefactor.optim import Adam


def matmul_oracle(net, x):
    """Straight-line re-implementation with explicit loops."""
    out = np.array(x, dtype=np.float64)
    for layer in net.layers:
        nxt = np.zeros(layer.out_dim)
        for i in range(layer.out_dim):
            acc = 0.0
            for j in range(layer.in_dim):
                acc += layer.weight[i, j] * out[j]
            if layer.bias is not None:
                acc += layer.bias[i]
            nxt[i] = acc
        if layer.activation == "leaky_relu":
            nxt = np.array([v if v > 0 else LEAKY_SLOPE * v for v in nxt])
        out = nxt
    return out


class TestForward:
    def test_zero_net_maps_to_zero(self):
        net = DenseNet.from_dims([4, 3, 2], rng=None)
        out = net.forward(np.array([1.0, -2.0, 3.0, 0.5]))
        assert np.all(out == 0.0)

    def test_identity_layer(self):
        layer = DenseLayer(np.eye(5), bias=None, activation="identity")
        net = DenseNet([layer])
        x = np.array([1.0, -1.0, 2.0, -2.0, 0.0])
        np.testing.assert_array_equal(net.forward(x), x)

    def test_matches_matmul_oracle(self):
        rng = np.random.default_rng(42)
        net = DenseNet.from_dims([6, 5, 4], rng)
        x = rng.standard_normal(6)
        expected = matmul_oracle(net, x)
        got = net.forward(x)
        np.testing.assert_allclose(got, expected, rtol=1e-12)

    def test_deterministic(self):
        rng = np.random.default_rng(0)
        net = DenseNet.from_dims([3, 4, 2], rng)
        x = rng.standard_normal(3)
        np.testing.assert_array_equal(net.forward(x), net.forward(x))

    def test_dim_mismatch_raises(self):
        net = DenseNet.from_dims([3, 2], np.random.default_rng(0))
        with pytest.raises(ValueError):
            net.forward(np.zeros(4))

    def test_nonfinite_raises(self):
        net = DenseNet.from_dims([2, 2], np.random.default_rng(0))
        with pytest.raises(ValueError):
            net.forward(np.array([np.inf, 1.0]))

    def test_batch_matches_per_sample(self):
        # batched and single-sample BLAS paths may differ in the last ulp
        rng = np.random.default_rng(3)
        net = DenseNet.from_dims([5, 7, 3], rng)
        X = rng.standard_normal((4, 5))
        batch = net.forward(X)
        for i in range(4):
            np.testing.assert_allclose(batch[i], net.forward(X[i]),
                                       rtol=1e-13, atol=1e-15)


class TestBackward:
    def test_zero_upstream_gives_zero_grads(self):
        rng = np.random.default_rng(1)
        net = DenseNet.from_dims([3, 4, 2], rng)
        _, trace = net.forward_trace(rng.standard_normal(3))
        grads, gx = net.backward(trace, np.zeros(2))
        assert all(np.all(g == 0.0) for g in grads)
        assert np.all(gx == 0.0)

    def test_grads_match_finite_differences(self):
        rng = np.random.default_rng(7)
        net = DenseNet.from_dims([5, 6, 4], rng)
        x = rng.standard_normal(5)
        upstream = rng.standard_normal(4)

        def loss_fn():
            out, trace = net.forward_trace(x)
            loss = float(out @ upstream)
            grads, _ = net.backward(trace, upstream)
            return loss, grads

        err = finite_diff_check(loss_fn, net.params(), h=1e-5, n_coords=250,
                                rng=np.random.default_rng(0))
        assert err < 1e-4

    def test_leaky_slope_in_input_grad(self):
        # single unit with negative pre-activation: d out / d x = 0.2 * w
        layer = DenseLayer(np.array([[2.0]]), np.array([-5.0]), "leaky_relu")
        net = DenseNet([layer])
        _, trace = net.forward_trace(np.array([1.0]))
        _, gx = net.backward(trace, np.array([1.0]))
        np.testing.assert_allclose(gx, [LEAKY_SLOPE * 2.0])

    def test_leaky_forward_backward_consistency(self):
        rng = np.random.default_rng(5)
        net = DenseNet.from_dims([4, 8, 3], rng)
        x = rng.standard_normal(4)
        eps = 1e-7
        _, trace = net.forward_trace(x)
        _, gx = net.backward(trace, np.ones(3))
        numeric = np.zeros(4)
        for j in range(4):
            xp = x.copy(); xp[j] += eps
            xm = x.copy(); xm[j] -= eps
            numeric[j] = (net.forward(xp).sum() - net.forward(xm).sum()) / (2 * eps)
        np.testing.assert_allclose(gx, numeric, rtol=1e-6, atol=1e-8)

    def test_shape_mismatch_raises(self):
        net = DenseNet.from_dims([3, 2], np.random.default_rng(0))
        _, trace = net.forward_trace(np.zeros(3))
        with pytest.raises(ValueError):
            net.backward(trace, np.zeros(5))


class TestSoftmaxCrossEntropy:
    def test_uniform_logits_give_log_k(self):
        for k in (2, 5, 9):
            loss, _ = softmax_cross_entropy(np.zeros(k), np.eye(k)[0])
            np.testing.assert_allclose(loss, np.log(k), rtol=1e-12)

    def test_saturated_correct_class(self):
        logits = np.zeros(4)
        logits[2] = 50.0
        loss, _ = softmax_cross_entropy(logits, np.eye(4)[2])
        assert loss < 1e-6

    def test_matches_direct_formula(self):
        rng = np.random.default_rng(11)
        logits = rng.standard_normal(7)
        label = np.eye(7)[3]
        loss, grad = softmax_cross_entropy(logits, label)
        # independent direct evaluation
        p = np.exp(logits) / np.exp(logits).sum()
        direct = -sum(label[i] * np.log(p[i]) for i in range(7))
        np.testing.assert_allclose(loss, direct, rtol=1e-12)
        np.testing.assert_allclose(grad, p - label, rtol=1e-12)

    def test_shift_invariance(self):
        rng = np.random.default_rng(12)
        logits = rng.standard_normal(6)
        label = np.eye(6)[1]
        a, _ = softmax_cross_entropy(logits, label)
        b, _ = softmax_cross_entropy(logits + 123.456, label)
        assert abs(a - b) < 1e-10

    def test_empty_raises(self):
        with pytest.raises(ValueError):
            softmax_cross_entropy(np.zeros(0), np.zeros(0))

    def test_grad_matches_finite_differences(self):
        rng = np.random.default_rng(13)
        logits = rng.standard_normal(5)
        label = np.eye(5)[4]

        def loss_fn():
            loss, grad = softmax_cross_entropy(logits, label)
            return loss, [grad]

        err = finite_diff_check(loss_fn, [logits], h=1e-5)
        assert err < 1e-6


class TestL1Loss:
    def test_equal_inputs(self):
        a = np.array([1.0, -2.0, 3.0])
        assert l1_loss(a, a.copy())[0] == 0.0

    def test_constant_offset(self):
        rng = np.random.default_rng(2)
        b = rng.standard_normal(10)
        loss, _ = l1_loss(b + 0.75, b)
        np.testing.assert_allclose(loss, 0.75, rtol=1e-12)

    def test_matches_elementwise_oracle(self):
        rng = np.random.default_rng(3)
        a = rng.standard_normal(20)
        b = rng.standard_normal(20)
        loss, grad = l1_loss(a, b)
        direct = sum(abs(a[i] - b[i]) for i in range(20)) / 20
        np.testing.assert_allclose(loss, direct, rtol=1e-12)
        expected_grad = np.array(
            [np.sign(a[i] - b[i]) / 20 for i in range(20)])
        np.testing.assert_array_equal(grad, expected_grad)

    def test_tie_subgradient_is_zero(self):
        a = np.array([1.0, 2.0])
        _, grad = l1_loss(a, a.copy())
        np.testing.assert_array_equal(grad, np.zeros(2))

    def test_shape_mismatch_raises(self):
        with pytest.raises(ValueError):
            l1_loss(np.zeros(3), np.zeros(4))


class TestAdam:
    def test_zero_gradient_leaves_params(self):
        w = np.array([1.0, -2.0])
        opt = Adam([w], lr=0.1)
        opt.step([np.zeros(2)])
        np.testing.assert_array_equal(w, [1.0, -2.0])

    def test_descends_quadratic(self):
        w = np.array([1.0])
        opt = Adam([w], lr=0.1)
        opt.step([2.0 * w])
        assert w[0] < 1.0

    def test_quadratic_monotone_after_warmup(self):
        rng = np.random.default_rng(9)
        target = rng.standard_normal(5)
        w = np.zeros(5)
        opt = Adam([w], lr=0.05)
        losses = []
        for _ in range(200):
            losses.append(float(((w - target) ** 2).sum()))
            opt.step([2.0 * (w - target)])
        tail = losses[20:]
        # moment estimates overshoot slightly near the optimum
        tol = 1e-3 * losses[0]
        assert all(b <= a + tol for a, b in zip(tail, tail[1:]))
        assert losses[-1] < 1e-6 * losses[0]

    def test_nonfinite_gradient_raises(self):
        w = np.zeros(2)
        opt = Adam([w])
        with pytest.raises(ValueError):
            opt.step([np.array([np.nan, 0.0])])


class TestFiniteDiffCheck:
    def test_linear_loss_is_exact(self):
        rng = np.random.default_rng(21)
        w = rng.standard_normal(6)
        c = rng.standard_normal(6)

        def loss_fn():
            return float(w @ c), [c]

        assert finite_diff_check(loss_fn, [w], h=1e-5) < 1e-10

    def test_flags_wrong_gradient(self):
        w = np.array([1.0, 2.0])

        def loss_fn():
            return float((w ** 2).sum()), [3.0 * w]  # wrong: should be 2w

        assert finite_diff_check(loss_fn, [w], h=1e-5) > 0.1

    def test_invalid_h_raises(self):
        with pytest.raises(ValueError):
            finite_diff_check(lambda: (0.0, []), [], h=0.0)
