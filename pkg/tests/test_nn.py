"""Tape engine: op gradients, optimizer worked examples, checkpoints."""

import numpy as np
import pytest

from gradcheck import check_gradients
from rlforge.core import NumericError, ShapeError, TapeStateError, make_rng
from rlforge.nn import (
    DecayedAdam,
    Dense,
    Mlp,
    MlpSpec,
    RmsProp,
    Tensor,
    concat,
    constant,
    gather_rows,
    huber,
    layer_norm,
    log_softmax,
    maximum,
    minimum,
    save_params,
    load_params,
    select_last_axis,
    softmax,
    take_axis,
)
from rlforge.nn import tape


class TestForward:
    def test_identity_dense(self):
        rng = make_rng(0)
        layer = Dense(2, 2, rng)
        layer.w.data = np.eye(2)
        layer.b.data = np.zeros(2)
        out = layer(constant([[3.0, -4.0]]))
        assert np.array_equal(out.data, [[3.0, -4.0]])

    def test_forward_purity_bit_identical(self):
        rng = make_rng(1)
        net = Mlp(MlpSpec((5, 8, 3), "tanh"), rng)
        x = make_rng(2).normal(size=(4, 5))
        a = net(constant(x)).data
        b = net(constant(x)).data
        assert np.array_equal(a, b)
        assert np.array_equal(a, net.apply(x))

    def test_softmax_is_valid_distribution(self):
        rng = make_rng(3)
        for _ in range(50):
            logits = rng.normal(scale=rng.uniform(0.1, 50.0), size=(2, 7))
            p = softmax(constant(logits)).data
            assert np.all(p >= 0)
            assert np.allclose(p.sum(axis=-1), 1.0, atol=1e-12)

    def test_input_width_checked(self):
        net = Mlp(MlpSpec((4, 2)), make_rng(0))
        with pytest.raises(ShapeError):
            net(constant(np.zeros((1, 3))))


class TestBackwardMechanics:
    def test_constant_loss_leaves_grads_zero(self):
        w = Tensor([2.0], requires_grad=True)
        loss = constant(3.5)
        loss.backward()
        assert np.array_equal(w.grad, [0.0])

    def test_second_backward_without_forward_raises(self):
        w = Tensor([2.0], requires_grad=True)
        loss = (w * w).sum()
        loss.backward()
        with pytest.raises(TapeStateError):
            loss.backward()

    def test_backward_needs_scalar(self):
        w = Tensor([1.0, 2.0], requires_grad=True)
        with pytest.raises(ShapeError):
            (w * w).backward()

    def test_grad_accumulates_across_reuse(self):
        w = Tensor([3.0], requires_grad=True)
        loss = (w + w).sum()
        loss.backward()
        assert np.array_equal(w.grad, [2.0])

    def test_non_finite_loss_rejected(self):
        w = Tensor([0.0], requires_grad=True)
        bad = w + constant([np.inf])
        with pytest.raises(NumericError):
            bad.sum().backward()


def composite_loss(params, x):
    """Touches dense/relu/tanh/softmax/log/square in one scalar."""
    w1, b1, w2, b2 = params
    h = tape.relu(tape.add(tape.matmul(x, w1), b1))
    h = tape.tanh(h)
    logits = tape.add(tape.matmul(h, w2), b2)
    logp = log_softmax(logits)
    picked = select_last_axis(logp, np.array([0, 2, 1]))
    probs = softmax(logits)
    ent = (probs * logp).sum()
    return picked.sum() * -1.0 + 0.5 * (tape.square(h).mean()) + 0.01 * ent + tape.log(tape.square(w2).sum() + constant(1.0))


class TestGradients:
    def test_all_core_ops_20_seeds(self):
        for seed in range(20):
            rng = make_rng(1000 + seed)
            w1 = Tensor(rng.normal(scale=0.6, size=(4, 5)), requires_grad=True)
            b1 = Tensor(rng.normal(scale=0.3, size=(5,)), requires_grad=True)
            w2 = Tensor(rng.normal(scale=0.6, size=(5, 3)), requires_grad=True)
            b2 = Tensor(rng.normal(scale=0.3, size=(3,)), requires_grad=True)
            params = [w1, b1, w2, b2]
            x = constant(rng.normal(size=(3, 4)))
            err = check_gradients(lambda: composite_loss(params, x), params)
            assert err < 1e-4, f"seed {seed}: rel err {err}"

    def test_structural_ops(self):
        rng = make_rng(42)
        a = Tensor(rng.normal(size=(2, 3, 4)), requires_grad=True)
        b = Tensor(rng.normal(size=(2, 4, 3)), requires_grad=True)
        table = Tensor(rng.normal(size=(6, 4)), requires_grad=True)
        idx = np.array([[1, 5], [0, 3]])

        def loss():
            prod = tape.matmul(a, b)                      # batched matmul
            sw = tape.swapaxes(prod, 1, 2)
            cut = sw[:, 1:, :]                            # slicing
            cat = concat([cut, cut], axis=1)
            rows = gather_rows(table, idx)                # (2,2,4)
            picked = take_axis(rows, np.array([1, 0]), axis=1)
            return cat.mean() + picked.sum() + tape.reshape(prod, (2, 9)).square().mean()

        err = check_gradients(loss, [a, b, table])
        assert err < 1e-4

    def test_piecewise_ops(self):
        rng = make_rng(43)
        a = Tensor(rng.normal(size=(8,)) * 2.0, requires_grad=True)
        b = Tensor(rng.normal(size=(8,)) * 2.0, requires_grad=True)

        def loss():
            lo = minimum(a, b)
            hi = maximum(a, b * 1.0)
            clipped = tape.clip(a, -0.9, 0.9)
            return lo.sum() + hi.square().mean() + clipped.sum() + huber(a + (-1.0 * b), delta=0.7).sum()

        err = check_gradients(loss, [a, b])
        assert err < 1e-4

    def test_layer_norm(self):
        rng = make_rng(44)
        x = Tensor(rng.normal(size=(3, 5)), requires_grad=True)
        g = Tensor(rng.uniform(0.5, 1.5, size=(5,)), requires_grad=True)
        c = Tensor(rng.normal(size=(5,)), requires_grad=True)
        err = check_gradients(lambda: layer_norm(x, g, c).square().mean(), [x, g, c])
        assert err < 1e-4

    def test_bias_broadcast_add(self):
        rng = make_rng(45)
        x = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
        b = Tensor(rng.normal(size=(3,)), requires_grad=True)
        err = check_gradients(lambda: (x + b).square().sum(), [x, b])
        assert err < 1e-4

    def test_incompatible_shapes_rejected(self):
        a = Tensor(np.zeros((2, 3)))
        with pytest.raises(ShapeError):
            tape.add(a, Tensor(np.zeros((2, 2))))
        with pytest.raises(ShapeError):
            tape.mul(a, Tensor(np.zeros((3, 2))))
        with pytest.raises(ShapeError):
            tape.matmul(a, Tensor(np.zeros((2, 3))))


class TestOptimizers:
    def test_rmsprop_worked_example(self):
        w = Tensor([1.0], requires_grad=True)
        opt = RmsProp([w], lr=0.1, smoothing=0.9, epsilon=0.0)
        w.grad = np.array([1.0])
        opt.step()
        assert opt.s[0][0] == pytest.approx(0.1, abs=1e-15)
        assert w.data[0] == pytest.approx(1.0 - 0.1 / np.sqrt(0.1), abs=1e-9)
        assert w.data[0] == pytest.approx(0.683772, abs=1e-6)

    def test_decayed_adam_pure_decay(self):
        w = Tensor([2.0], requires_grad=True)
        opt = DecayedAdam([w], lr=1.0, weight_decay=0.1)
        w.grad = np.array([0.0])
        opt.step()
        assert w.data[0] == pytest.approx(1.8, abs=1e-12)

    def test_non_finite_grad_rejected(self):
        w = Tensor([1.0], requires_grad=True)
        opt = RmsProp([w], lr=0.1)
        w.grad = np.array([np.nan])
        with pytest.raises(NumericError):
            opt.step()

    def test_rmsprop_descends_quadratic(self):
        w = Tensor([5.0], requires_grad=True)
        opt = RmsProp([w], lr=0.05, smoothing=0.9, epsilon=1e-8)
        for _ in range(200):
            opt.zero_grad()
            loss = (w * w).sum()
            loss.backward()
            opt.step()
        assert abs(w.data[0]) < 0.5


class TestCheckpoint:
    def test_round_trip_exact(self, tmp_path):
        rng = make_rng(77)
        net = Mlp(MlpSpec((3, 4, 2), "tanh"), rng)
        path = tmp_path / "net.ckpt"
        save_params(path, net.parameters())
        before = net.param_values()
        for _, t in net.parameters():
            t.data = t.data * 0.0
        load_params(path, net.parameters())
        for a, b in zip(before, net.param_values()):
            assert np.array_equal(a, b)

    def test_save_load_save_byte_identical(self, tmp_path):
        net = Mlp(MlpSpec((3, 4, 2)), make_rng(78))
        p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
        save_params(p1, net.parameters())
        load_params(p1, net.parameters())
        save_params(p2, net.parameters())
        assert p1.read_bytes() == p2.read_bytes()

    def test_shape_mismatch_rejected(self, tmp_path):
        net = Mlp(MlpSpec((3, 4, 2)), make_rng(79))
        path = tmp_path / "net.ckpt"
        save_params(path, net.parameters())
        other = Mlp(MlpSpec((3, 5, 2)), make_rng(80))
        with pytest.raises(ShapeError):
            load_params(path, other.parameters())

    def test_version_checked(self, tmp_path):
        path = tmp_path / "bad.ckpt"
        path.write_text("rlforge-checkpoint 999\n0\n")
        from rlforge.core import ConfigError

        with pytest.raises(ConfigError):
            load_params(path, [])


class TestInit:
    def test_uniform_fan_in_bounds(self):
        rng = make_rng(5)
        layer = Dense(16, 8, rng)
        bound = 1.0 / 4.0
        assert np.all(np.abs(layer.w.data) <= bound)
        assert np.all(np.abs(layer.b.data) <= bound)
        assert layer.w.data.std() > 0.05
