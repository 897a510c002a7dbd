import numpy as np
import pytest
from oracles import scalar_lstm_sequence, scalar_lstm_step

from spokentopic import gradcheck
from spokentopic.numerics import ContractError, ShapeError, Tensor, ops
from spokentopic.recurrent import BiLstm, LstmLayer, bilstm_forward, lstm_cell_step, lstm_direction


def _zero(layer):
    for p in layer.parameters().values():
        p.data[...] = 0.0


class TestLstmCell:
    def test_all_zero_weights_fixed_point(self, rng):
        layer = LstmLayer(3, 2, rng)
        _zero(layer)
        h, c = lstm_cell_step(Tensor(rng.normal(size=3)), Tensor(np.zeros(2)), Tensor(np.zeros(2)), layer)
        assert (h.data == 0).all() and (c.data == 0).all()

    def test_pure_memory(self, rng):
        layer = LstmLayer(3, 2, rng)
        _zero(layer)
        layer.bias.data[0:2] = -1e4  # input gate closed
        layer.bias.data[2:4] = 1e4   # forget gate open
        c_prev = np.array([0.3, -1.7])
        _, c = lstm_cell_step(Tensor(rng.normal(size=3)), Tensor(rng.normal(size=2)), Tensor(c_prev), layer)
        np.testing.assert_array_equal(c.data, c_prev)

    @pytest.mark.parametrize("seed", range(4))
    def test_matches_scalar_reference(self, seed):
        rng = np.random.default_rng(seed)
        layer = LstmLayer(3, 3, rng)
        x, h, c = rng.normal(size=3), rng.normal(size=3), rng.normal(size=3)
        h_t, c_t = lstm_cell_step(Tensor(x), Tensor(h), Tensor(c), layer)
        ref_h, ref_c = scalar_lstm_step(x, h, c, layer.w_ih.data, layer.w_hh.data, layer.bias.data)
        np.testing.assert_allclose(h_t.data, ref_h, atol=1e-14)
        np.testing.assert_allclose(c_t.data, ref_c, atol=1e-14)

    def test_shape_mismatch(self, rng):
        layer = LstmLayer(3, 2, rng)
        with pytest.raises(ShapeError):
            lstm_cell_step(Tensor(np.zeros(4)), Tensor(np.zeros(2)), Tensor(np.zeros(2)), layer)

    def test_forget_bias_initialised_to_one(self, rng):
        layer = LstmLayer(3, 2, rng)
        assert layer.bias.data.tolist() == [0, 0, 1, 1, 0, 0, 0, 0]

    @pytest.mark.parametrize("seed", range(3))
    def test_gradients(self, seed):
        errors = gradcheck.suite_lstm_cell(seed)
        assert max(errors.values()) < gradcheck.TOLERANCE, errors


class TestScan:
    @pytest.mark.parametrize("seed", range(3))
    def test_fused_scan_equals_cell_loop(self, seed):
        rng = np.random.default_rng(seed)
        layer = LstmLayer(3, 4, rng)
        x = rng.normal(size=(2, 5, 3))
        fused = lstm_direction(Tensor(x), layer, [5, 5], reverse=False).data
        for b in range(2):
            h, c = Tensor(np.zeros(4)), Tensor(np.zeros(4))
            for t in range(5):
                h, c = lstm_cell_step(Tensor(x[b, t]), h, c, layer)
                np.testing.assert_allclose(fused[b, t], h.data, atol=1e-14)

    def test_scan_matches_scalar_sequence(self, rng):
        layer = LstmLayer(2, 3, rng)
        x = rng.normal(size=(6, 2))
        out = lstm_direction(Tensor(x[None]), layer, [6], reverse=False).data[0]
        ref = scalar_lstm_sequence(x, layer.w_ih.data, layer.w_hh.data, layer.bias.data)
        np.testing.assert_allclose(out, ref, atol=1e-13)

    def test_fused_gradient_matches_composite(self, rng):
        layer = LstmLayer(2, 3, rng)
        x = rng.normal(size=(1, 4, 2))
        w = rng.normal(size=(1, 4, 3))

        xt = Tensor(x, requires_grad=True)
        ops.sum(lstm_direction(xt, layer, [4], reverse=False) * w).backward()
        fused = {k: v.grad.copy() for k, v in layer.parameters().items()}
        fused_x = xt.grad.copy()

        layer.zero_grad()
        xt2 = Tensor(x[0], requires_grad=True)
        h, c = Tensor(np.zeros(3)), Tensor(np.zeros(3))
        total = None
        for t in range(4):
            h, c = lstm_cell_step(xt2[t], h, c, layer)
            term = ops.sum(h * w[0, t])
            total = term if total is None else total + term
        total.backward()
        for k, v in layer.parameters().items():
            np.testing.assert_allclose(fused[k], v.grad, atol=1e-12)
        np.testing.assert_allclose(fused_x[0], xt2.grad, atol=1e-12)


class TestBiLstm:
    def test_output_shape(self, rng):
        net = BiLstm(3, 2, 1, rng)
        assert net(Tensor(rng.normal(size=(4, 3)))).shape == (4, 4)

    @pytest.mark.parametrize("layers", [1, 2, 3])
    def test_stack_shape(self, rng, layers):
        net = BiLstm(5, 7, layers, rng)
        assert net(Tensor(rng.normal(size=(2, 6, 5)))).shape == (2, 6, 14)

    def test_single_frame_is_two_cell_evaluations(self, rng):
        net = BiLstm(3, 2, 1, rng)
        x = rng.normal(size=(1, 3))
        out = net(Tensor(x)).data
        zeros = Tensor(np.zeros(2))
        fwd, _ = lstm_cell_step(Tensor(x[0]), zeros, zeros, net.layers[0].fwd)
        bwd, _ = lstm_cell_step(Tensor(x[0]), zeros, zeros, net.layers[0].bwd)
        np.testing.assert_allclose(out[0], np.concatenate([fwd.data, bwd.data]), atol=1e-15)

    def test_reversal_symmetry(self, rng):
        net = BiLstm(3, 2, 1, rng)
        x = rng.normal(size=(5, 3))
        out = net(Tensor(x)).data
        swapped = BiLstm(3, 2, 1, rng)
        swapped.layers[0].fwd, swapped.layers[0].bwd = net.layers[0].bwd, net.layers[0].fwd
        out_rev = swapped(Tensor(x[::-1].copy())).data
        np.testing.assert_allclose(out[:, 2:], out_rev[::-1, :2], atol=1e-14)
        np.testing.assert_allclose(out[:, :2], out_rev[::-1, 2:], atol=1e-14)

    def test_padding_does_not_leak(self, rng):
        net = BiLstm(3, 4, 2, rng)
        short = rng.normal(size=(3, 3))
        padded = np.zeros((2, 5, 3))
        padded[0, :3] = short
        padded[0, 3:] = rng.normal(size=(2, 3)) * 50
        padded[1] = rng.normal(size=(5, 3))
        batch = net(Tensor(padded), lengths=[3, 5]).data
        alone = net(Tensor(short)).data
        np.testing.assert_allclose(batch[0, :3], alone, atol=1e-14)

    def test_deterministic_and_permutation_sensitive(self, rng):
        net = BiLstm(3, 4, 2, rng)
        x = rng.normal(size=(6, 3))
        a, b = net(Tensor(x)).data, net(Tensor(x)).data
        assert a.tobytes() == b.tobytes()
        perm = np.random.default_rng(99).permutation(6)
        shuffled = net(Tensor(x[perm])).data
        assert not np.allclose(shuffled, a[perm])

    def test_dropout_only_in_training(self, rng):
        net = BiLstm(3, 4, 1, rng)
        x = Tensor(rng.normal(size=(6, 3)))
        base = net(x).data
        assert net(x, dropout_rate=0.5, training=False).data.tobytes() == base.tobytes()
        dropped = net(x, dropout_rate=0.5, training=True, rng=np.random.default_rng(0)).data
        assert not np.array_equal(dropped, base)

    def test_empty_sequence_rejected(self, rng):
        net = BiLstm(3, 2, 1, rng)
        with pytest.raises(ContractError):
            bilstm_forward(Tensor(np.zeros((0, 3))), net.layers)

    def test_feature_dim_mismatch(self, rng):
        net = BiLstm(3, 2, 1, rng)
        with pytest.raises(ShapeError):
            net(Tensor(np.zeros((4, 5))))

    @pytest.mark.parametrize("seed", range(3))
    def test_two_layer_gradients(self, seed):
        errors = gradcheck.suite_bilstm(seed)
        assert max(errors.values()) < gradcheck.TOLERANCE, errors
