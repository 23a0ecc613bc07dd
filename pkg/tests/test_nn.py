import numpy as np
import pytest

from nrsched import nn


def finite_diff_loss(params, state, action, target):
    q = nn.forward(params, state)
    return (q[action] - target) ** 2


def central_diff_grads(params, state, action, target, h=1e-5):
    """Independent oracle: central finite differences on every parameter."""
    gw = [np.zeros_like(w) for w in params.weights]
    gb = [np.zeros_like(b) for b in params.biases]
    for arrs, grads in ((params.weights, gw), (params.biases, gb)):
        for arr, g in zip(arrs, grads):
            it = np.nditer(arr, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                orig = arr[idx]
                arr[idx] = orig + h
                lp = finite_diff_loss(params, state, action, target)
                arr[idx] = orig - h
                lm = finite_diff_loss(params, state, action, target)
                arr[idx] = orig
                g[idx] = (lp - lm) / (2 * h)
    return gw, gb


class TestInitParams:
    def test_shapes(self):
        p = nn.init_params([8, 128, 128, 4], seed=7)
        assert [w.shape for w in p.weights] == [(128, 8), (128, 128), (4, 128)]
        assert [b.shape for b in p.biases] == [(128,), (128,), (4,)]

    def test_deterministic(self):
        a = nn.init_params([8, 128, 128, 4], seed=7)
        b = nn.init_params([8, 128, 128, 4], seed=7)
        for wa, wb in zip(a.weights, b.weights):
            assert np.array_equal(wa, wb)

    def test_seed_changes_weights(self):
        a = nn.init_params([4, 8, 2], seed=1)
        b = nn.init_params([4, 8, 2], seed=2)
        assert not np.array_equal(a.weights[0], b.weights[0])

    def test_zero_dim_rejected(self):
        with pytest.raises(ValueError):
            nn.init_params([8, 0, 4], seed=0)

    def test_too_few_layers_rejected(self):
        with pytest.raises(ValueError):
            nn.init_params([8], seed=0)

    def test_biases_zero(self):
        p = nn.init_params([3, 5, 2], seed=0)
        for b in p.biases:
            assert np.all(b == 0.0)


class TestForward:
    def test_zero_params_zero_output(self):
        p = nn.init_params([4, 6, 3], seed=0)
        for w in p.weights:
            w[:] = 0.0
        out = nn.forward(p, np.array([1.0, -2.0, 3.0, 0.5]))
        assert np.all(out == 0.0)

    def test_single_linear_layer_hand_value(self):
        # output layer is linear: 1*2 + (-1)*3 + 0.5 = -0.5, relu not applied
        p = nn.MlpParams([2, 1], [np.array([[1.0, -1.0]])], [np.array([0.5])])
        out = nn.forward(p, np.array([2.0, 3.0]))
        assert out.shape == (1,)
        assert out[0] == pytest.approx(-0.5, abs=1e-15)

    def test_pure_function(self):
        p = nn.init_params([5, 7, 3], seed=3)
        x = np.random.default_rng(1).normal(size=5)
        assert np.array_equal(nn.forward(p, x), nn.forward(p, x))

    def test_length_mismatch(self):
        p = nn.init_params([5, 3], seed=0)
        with pytest.raises(ValueError):
            nn.forward(p, np.zeros(4))

    def test_hidden_activations_nonnegative(self):
        p = nn.init_params([4, 16, 2], seed=5)
        x = np.random.default_rng(2).normal(size=4)
        h = np.maximum(p.weights[0] @ x + p.biases[0], 0.0)
        assert np.all(h >= 0.0)
        # forward agrees with the manual composition
        out = p.weights[1] @ h + p.biases[1]
        assert np.allclose(nn.forward(p, x), out)

    def test_batch_matches_single(self):
        p = nn.init_params([6, 9, 4], seed=11)
        xs = np.random.default_rng(3).normal(size=(10, 6))
        batch = nn.forward_batch(p, xs)
        for i in range(10):
            assert np.allclose(batch[i], nn.forward(p, xs[i]), atol=1e-12)


class TestTdGradients:
    def test_zero_loss_zero_grads(self):
        p = nn.init_params([3, 5, 2], seed=9)
        s = np.array([0.1, 0.2, 0.3])
        target = float(nn.forward(p, s)[1])
        loss, grads = nn.td_gradients(p, s, 1, target)
        assert loss == pytest.approx(0.0, abs=1e-24)
        for g in grads.tensors():
            assert np.allclose(g, 0.0, atol=1e-12)

    def test_scalar_net_hand_derivative(self):
        # w=2, b=0, s=[1], target=1: loss=(2-1)^2=1, dL/dw=2*(2-1)*1=2, dL/db=2
        p = nn.MlpParams([1, 1], [np.array([[2.0]])], [np.array([0.0])])
        loss, grads = nn.td_gradients(p, np.array([1.0]), 0, 1.0)
        assert loss == pytest.approx(1.0, abs=1e-15)
        assert grads.d_weights[0][0, 0] == pytest.approx(2.0, abs=1e-12)
        assert grads.d_biases[0][0] == pytest.approx(2.0, abs=1e-12)

    def test_action_out_of_range(self):
        p = nn.init_params([2, 3], seed=0)
        with pytest.raises(IndexError):
            nn.td_gradients(p, np.zeros(2), 3, 0.0)

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(17)
        for _ in range(5):
            dims = [int(rng.integers(1, 9)) for _ in range(int(rng.integers(2, 4)))]
            p = nn.init_params(dims, int(rng.integers(1e6)))
            for b in p.biases:
                b += rng.normal(0, 0.3, size=b.shape)
            s = rng.normal(size=dims[0])
            a = int(rng.integers(dims[-1]))
            t = float(rng.normal())
            loss, grads = nn.td_gradients(p, s, a, t)
            gw, gb = central_diff_grads(p, s, a, t)
            for got, ref in zip(grads.tensors(), gw + gb):
                denom = np.maximum(np.maximum(np.abs(got), np.abs(ref)), 1.0)
                assert np.max(np.abs(got - ref) / denom) < 1e-4


class TestClipGradients:
    def test_below_threshold_unchanged(self):
        g = nn.Gradients([np.array([[0.3]])], [np.array([0.4])])  # norm 0.5
        out = nn.clip_gradients(g, 1.0)
        assert out.d_weights[0][0, 0] == 0.3
        assert out.d_biases[0][0] == 0.4

    def test_rescaled_to_threshold(self):
        g = nn.Gradients([np.array([[3.0]])], [np.array([4.0])])  # norm 5
        out = nn.clip_gradients(g, 1.0)
        assert out.d_weights[0][0, 0] == pytest.approx(0.6, rel=1e-12)
        assert out.d_biases[0][0] == pytest.approx(0.8, rel=1e-12)
        assert nn.grad_norm(out) == pytest.approx(1.0, rel=1e-12)

    def test_zero_grads_stay_zero(self):
        g = nn.Gradients([np.zeros((2, 2))], [np.zeros(2)])
        out = nn.clip_gradients(g, 1.0)
        for t in out.tensors():
            assert np.all(t == 0.0)

    def test_bad_threshold(self):
        g = nn.Gradients([np.zeros((1, 1))], [np.zeros(1)])
        with pytest.raises(ValueError):
            nn.clip_gradients(g, 0.0)


class TestAdamStep:
    def test_zero_gradients_keep_params(self):
        p = nn.init_params([2, 3], seed=4)
        opt = nn.AdamState.zeros_like(p)
        g = nn.Gradients([np.zeros_like(w) for w in p.weights], [np.zeros_like(b) for b in p.biases])
        p2, opt2 = nn.adam_step(p, g, opt, 1e-4)
        for a, b in zip(p.weights, p2.weights):
            assert np.array_equal(a, b)
        assert opt2.step == 1

    def test_first_step_moves_by_lr(self):
        # scalar p=0, g=1, lr=1e-4: bias-corrected first step is -lr/(1+eps)
        p = nn.MlpParams([1, 1], [np.array([[0.0]])], [np.array([0.0])])
        opt = nn.AdamState.zeros_like(p)
        g = nn.Gradients([np.array([[1.0]])], [np.array([0.0])])
        p2, _ = nn.adam_step(p, g, opt, 1e-4)
        assert p2.weights[0][0, 0] == pytest.approx(-1e-4, rel=1e-6)

    def test_deterministic(self):
        p = nn.init_params([3, 4, 2], seed=8)
        opt = nn.AdamState.zeros_like(p)
        g = nn.Gradients([np.ones_like(w) for w in p.weights], [np.ones_like(b) for b in p.biases])
        a1, o1 = nn.adam_step(p, g, opt, 1e-3)
        a2, o2 = nn.adam_step(p, g, opt, 1e-3)
        for x, y in zip(a1.weights, a2.weights):
            assert np.array_equal(x, y)
        assert o1.step == o2.step

    def test_nan_refused(self):
        p = nn.init_params([1, 1], seed=0)
        opt = nn.AdamState.zeros_like(p)
        g = nn.Gradients([np.array([[np.nan]])], [np.zeros(1)])
        with pytest.raises(FloatingPointError):
            nn.adam_step(p, g, opt, 1e-4)

    def test_params_stay_finite(self):
        p = nn.init_params([4, 8, 3], seed=1)
        opt = nn.AdamState.zeros_like(p)
        rng = np.random.default_rng(0)
        for _ in range(50):
            g = nn.Gradients(
                [rng.normal(size=w.shape) for w in p.weights],
                [rng.normal(size=b.shape) for b in p.biases],
            )
            p, opt = nn.adam_step(p, g, opt, 1e-2)
        for t in p.weights + p.biases:
            assert np.all(np.isfinite(t))
        assert opt.step == 50


class TestSoftUpdate:
    def test_beta_one_copies_online(self):
        online = nn.init_params([2, 3], seed=1)
        target = nn.init_params([2, 3], seed=2)
        out = nn.soft_update(online, target, 1.0)
        for a, b in zip(out.weights, online.weights):
            assert np.array_equal(a, b)

    def test_small_beta_value(self):
        online = nn.MlpParams([1, 1], [np.array([[1.0]])], [np.array([1.0])])
        target = nn.MlpParams([1, 1], [np.array([[0.0]])], [np.array([0.0])])
        out = nn.soft_update(online, target, 1e-3)
        assert out.weights[0][0, 0] == pytest.approx(0.001, rel=1e-12)

    def test_fixed_point(self):
        p = nn.init_params([3, 4], seed=5)
        out = nn.soft_update(p, p.copy(), 0.37)
        for a, b in zip(out.weights, p.weights):
            assert np.allclose(a, b, atol=1e-15)

    def test_contraction(self):
        online = nn.init_params([3, 5, 2], seed=6)
        target = nn.init_params([3, 5, 2], seed=7)
        beta = 0.25
        out = nn.soft_update(online, target, beta)
        for o, t, u in zip(online.weights, target.weights, out.weights):
            assert np.allclose(np.abs(u - o), (1 - beta) * np.abs(t - o), atol=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            nn.soft_update(nn.init_params([2, 3], 0), nn.init_params([2, 4], 0), 0.5)


class TestPersistence:
    def test_round_trip_bit_exact(self, tmp_path):
        p = nn.init_params([5, 16, 3], seed=123)
        path = tmp_path / "params.json"
        nn.save_params(p, path)
        q = nn.load_params(path)
        assert q.layer_dims == p.layer_dims
        for a, b in zip(p.weights + p.biases, q.weights + q.biases):
            assert np.array_equal(a, b)

    def test_version_checked(self, tmp_path):
        path = tmp_path / "params.json"
        path.write_text('{"format_version": 99, "layer_dims": [1, 1], "weights": [], "biases": []}')
        with pytest.raises(ValueError):
            nn.load_params(path)
