import gzip
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from xbartrain.circuit import CrossbarConfig
from xbartrain.converters import AdcSpec, DacSpec, adc_quantize
from xbartrain.errors import MissingActivationsError
from xbartrain.mapping import MappingSpec, map_weights, signed_levels
from xbartrain.nn import (
    CrossbarConv2d,
    CrossbarCore,
    CrossbarLinear,
    Dataset,
    DigitalMLP,
    Flatten,
    HardwareSpec,
    MaxPool2d,
    ReLU,
    TrainState,
    batch_order,
    build_model,
    evaluate,
    init_weights,
    load_csv,
    load_idx,
    make_blobs,
    quantize,
    read_idx,
    softmax_xent,
    split,
    train_epoch,
    write_idx,
)
from xbartrain.nn import crossbar as crossbar_module
from xbartrain.update import UpdateSpec

MLP = [{"type": "linear", "out": 8}, {"type": "relu"}, {"type": "linear", "out": "classes"}]
WIRED = CrossbarConfig(rows=16, cols=16)
NO_WIRES = CrossbarConfig(rows=16, cols=16, r_row=0.0, r_col=0.0)


def hw(cfg=NO_WIRES, engine="ideal", adc=None, lr=0.1, **kw):
    tile = {"tile_rows": cfg.rows, "tile_cols": cfg.cols}
    mapping = MappingSpec(**{**tile, **kw.pop("mapping", {})})
    return HardwareSpec(crossbar=cfg, mapping=mapping, engine=engine, adc=adc or AdcSpec(bits=None),
                        update=UpdateSpec(lr=lr, **kw.pop("update", {})), **kw)


def blobs(n=200, features=2, classes=2, seed=0, separation=8.0):
    return split(make_blobs(n, features, classes, separation=separation, seed=seed), 0.25, seed=seed)


def loss_grad_model(model, x, y):
    logits = model.forward(x, train=True)
    loss, grad = softmax_xent(logits, y)
    model.backward(grad)
    return loss


class TestHardwareSpec:
    def test_unknown_engine(self):
        with pytest.raises(ValueError, match="engine"):
            hw(engine="spice")

    def test_bits_multiple_of_stream(self):
        with pytest.raises(ValueError, match="input_bits"):
            hw(dac=DacSpec(bits=4, stream_bits=3))

    def test_dac_above_crossbar_range(self):
        with pytest.raises(ValueError, match="DAC full scale"):
            hw(dac=DacSpec(v_fs=2.0))

    def test_tile_must_fit(self):
        with pytest.raises(ValueError):
            hw(mapping={"tile_rows": 32})

    def test_ideal_flag(self):
        assert hw().ideal
        assert not hw(update={"gamma": 1.0}).ideal
        assert not hw(WIRED, engine="fcm").ideal


class TestCoreIdeal:
    @settings(max_examples=25, deadline=None)
    @given(
        n_in=st.integers(1, 40), n_out=st.integers(1, 40), batch=st.integers(1, 6),
        bits=st.sampled_from([1, 4, 8]), seed=st.integers(0, 2**16),
    )
    def test_bit_exact_both_directions(self, n_in, n_out, batch, bits, seed):
        rng = np.random.default_rng(seed)
        h = hw()
        t = map_weights(rng.normal(size=(n_in, n_out)), h.mapping, h.crossbar)
        core = CrossbarCore(t, h)
        lim = 2**bits - 1
        x = rng.integers(-lim, lim + 1, size=(batch, n_in))
        dy = rng.integers(-lim, lim + 1, size=(batch, n_out))
        levels = signed_levels(t)
        np.testing.assert_array_equal(core.vmm(x, bits, "fwd"), x @ levels)
        np.testing.assert_array_equal(core.vmm(dy, bits, "bwd"), dy @ levels.T)

    def test_multi_bit_stream_matches(self):
        rng = np.random.default_rng(3)
        h = hw(dac=DacSpec(bits=4, stream_bits=4))
        t = map_weights(rng.normal(size=(20, 7)), h.mapping, h.crossbar)
        x = rng.integers(-255, 256, size=(5, 20))
        np.testing.assert_array_equal(CrossbarCore(t, h).vmm(x, 8), x @ signed_levels(t))

    def test_chunked_batch_equals_whole(self, monkeypatch):
        rng = np.random.default_rng(1)
        h = hw(WIRED, engine="fcm")
        t = map_weights(rng.normal(size=(20, 20)), h.mapping, h.crossbar)
        core = CrossbarCore(t, h)
        x = rng.integers(-255, 256, size=(9, 20))
        whole = core.vmm(x, 8)
        monkeypatch.setattr(crossbar_module, "_BLOCK", 1)
        np.testing.assert_array_equal(core.vmm(x, 8), whole)

    def test_argument_errors(self):
        h = hw()
        core = CrossbarCore(map_weights(np.ones((3, 2)), h.mapping, h.crossbar), h)
        with pytest.raises(ValueError, match="direction"):
            core.vmm(np.zeros((1, 3)), 8, "up")
        with pytest.raises(ValueError, match="shape|batch"):
            core.vmm(np.zeros((1, 2)), 8, "fwd")
        with pytest.raises(ValueError, match="bits"):
            core.vmm(np.full((1, 3), 256), 8, "fwd")


class TestForward:
    def test_zero_input_zero_output(self):
        for engine in ("ideal", "fcm", "aam"):
            layer = CrossbarLinear(np.random.default_rng(0).normal(size=(12, 5)), hw(WIRED, engine=engine))
            np.testing.assert_array_equal(layer.forward(np.zeros((3, 12))), 0.0)

    def test_ideal_matches_fixed_point_matmul(self):
        rng = np.random.default_rng(2)
        W = rng.normal(size=(30, 9))
        x = rng.normal(size=(4, 30))
        layer = CrossbarLinear(W, hw())
        xq = quantize(x, 8)
        expected = (xq.q @ signed_levels(layer.weights)) * (xq.scale * layer.w_step)
        np.testing.assert_array_equal(layer.forward(x), expected)

    def test_input_shape_checked(self):
        layer = CrossbarLinear(np.ones((3, 2)), hw())
        with pytest.raises(ValueError):
            layer.forward(np.ones((2, 4)))

    def test_oracle_and_fcm_agree_within_adc_lsb(self):
        rng = np.random.default_rng(4)
        cfg = CrossbarConfig(rows=8, cols=8)
        W = rng.normal(size=(8, 8))
        x = rng.integers(-255, 256, size=(16, 8))
        h = hw(cfg, engine="fcm", adc=AdcSpec(bits=8))
        cores = {e: CrossbarCore(map_weights(W, h.mapping, h.crossbar), replace(h, engine=e))
                 for e in ("oracle", "fcm")}
        # raw column currents of every one-bit input slice on every device array
        bits = ((np.abs(x)[None] >> np.arange(8)[:, None, None]) & 1).astype(float)
        raw = {e: bits[:, None, None, None, None] @ c.g_eff[None] for e, c in cores.items()}
        adc = h.adc.with_full_scale(float(raw["fcm"].max()))
        for c in cores.values():
            c.adc = {"fwd": adc, "bwd": adc}
        codes = {e: adc_quantize(r, adc) for e, r in raw.items()}
        assert np.max(np.abs(codes["oracle"] - codes["fcm"])) <= 1
        outs = {e: c.vmm(x, 8) for e, c in cores.items()}
        # one code step on the most significant conversion bounds the output difference
        unit = h.dac.v_lsb * cfg.g_range / h.mapping.device_levels
        step = 2.0**7 * 2.0**6 * adc.lsb / unit
        assert np.max(np.abs(outs["oracle"] - outs["fcm"])) <= 2 * step


class TestBackward:
    def test_zero_error(self):
        layer = CrossbarLinear(np.random.default_rng(0).normal(size=(6, 4)), hw(WIRED, engine="fcm"))
        layer.forward(np.random.default_rng(1).normal(size=(3, 6)), train=True)
        dx = layer.backward(np.zeros((3, 4)))
        assert np.all(dx == 0) and np.all(layer.dW == 0) and np.all(layer.db == 0)

    def test_ideal_matches_transposed_matmul(self):
        rng = np.random.default_rng(5)
        layer = CrossbarLinear(rng.normal(size=(10, 6)), hw())
        x, dy = rng.normal(size=(4, 10)), rng.normal(size=(4, 6))
        layer.forward(x, train=True)
        dx = layer.backward(dy)
        dq = quantize(dy, 8)
        expected = (dq.q @ signed_levels(layer.weights).T) * (dq.scale * layer.w_step)
        np.testing.assert_array_equal(dx, expected)

    def test_identity_with_parasitics_is_transposed_forward(self):
        cfg = CrossbarConfig(rows=4, cols=4, r_row=50.0, r_col=200.0)
        h = hw(cfg, engine="fcm")
        core = CrossbarCore(map_weights(np.eye(4), h.mapping, h.crossbar), h)
        probe = 255 * np.eye(4, dtype=np.int64)
        fwd, bwd = core.vmm(probe, 8, "fwd"), core.vmm(probe, 8, "bwd")
        # parasitics make the response differ from the ideal identity...
        assert not np.array_equal(fwd, probe * 255)
        # ...but backward reads the same distorted devices through their transpose
        np.testing.assert_array_equal(bwd, fwd.T)

    def test_effective_weights_direct_evaluation(self):
        rng = np.random.default_rng(6)
        cfg = CrossbarConfig(rows=4, cols=4, r_row=20.0, r_col=80.0)
        h = hw(cfg, engine="fcm")
        t = map_weights(rng.normal(size=(4, 4)), h.mapping, h.crossbar)
        core = CrossbarCore(t, h)
        unit = h.dac.v_lsb * cfg.g_range / h.mapping.device_levels
        slice_w = 2.0 ** (np.arange(h.mapping.n_slices) * h.mapping.device_bits)
        g = core.g_eff[:, :, 0, 0]
        w_eff = np.tensordot(slice_w, (g[:, 0] - g[:, 1]), axes=1) / unit
        dy = rng.integers(-255, 256, size=(5, 4))
        np.testing.assert_array_equal(core.vmm(dy, 8, "bwd"), np.rint(dy @ w_eff.T).astype(np.int64))
        np.testing.assert_array_equal(core.vmm(dy, 8, "fwd"), np.rint(dy @ w_eff).astype(np.int64))

    def test_missing_activations(self):
        layer = CrossbarLinear(np.ones((3, 2)), hw())
        with pytest.raises(MissingActivationsError):
            layer.backward(np.ones((1, 2)))
        layer.forward(np.ones((1, 3)), train=True)
        layer.backward(np.ones((1, 2)))
        with pytest.raises(MissingActivationsError):
            layer.backward(np.ones((1, 2)))

    def test_inference_does_not_cache(self):
        layer = CrossbarLinear(np.ones((3, 2)), hw())
        layer.forward(np.ones((1, 3)))
        with pytest.raises(MissingActivationsError):
            layer.backward(np.ones((1, 2)))


class TestPrecision:
    @pytest.mark.parametrize("input_bits, error_bits", [(8, 8), (4, 6), (16, 16)])
    def test_grid_membership(self, input_bits, error_bits, monkeypatch):
        seen = []
        original = CrossbarCore.vmm

        def spy(self, q, bits, direction="fwd", observe=False):
            seen.append((np.asarray(q), bits, direction))
            return original(self, q, bits, direction, observe)

        monkeypatch.setattr(CrossbarCore, "vmm", spy)
        h = hw(input_bits=input_bits, error_bits=error_bits)
        train, _ = blobs(64, features=5, classes=3)
        model = build_model(MLP, h, (5,), 3, seed=0)
        loss_grad_model(model, train.x[:16], train.y[:16])
        assert {d for _, _, d in seen} == {"fwd", "bwd"}
        for q, bits, direction in seen:
            assert bits == (input_bits if direction == "fwd" else error_bits)
            assert q.dtype.kind == "i" and np.all(np.abs(q) <= 2**bits - 1)

    def test_quantize_grid(self):
        x = np.random.default_rng(0).normal(size=100)
        q = quantize(x, 6)
        assert q.on_grid() and np.max(np.abs(q.q)) == 63
        assert np.max(np.abs(q.value - x)) <= q.scale / 2 + 1e-15

    def test_quantize_zero_and_nan(self):
        assert np.all(quantize(np.zeros(3), 8).q == 0)
        with pytest.raises(ValueError):
            quantize(np.array([np.nan]), 8)


class TestGradientCheck:
    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**16))
    def test_float_reference_matches_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        net = DigitalMLP([rng.normal(size=(6, 4))], weight_bits=None)
        x, y = rng.normal(size=(5, 6)), rng.integers(0, 4, size=5)
        _, grads = net.gradients(x, y)
        eps = 1e-6
        fd = np.zeros((6, 4))
        for idx in np.ndindex(6, 4):
            w = net.W[0][idx]
            net.W[0][idx] = w + eps
            up = net.loss(x, y)
            net.W[0][idx] = w - eps
            down = net.loss(x, y)
            net.W[0][idx] = w
            fd[idx] = (up - down) / (2 * eps)
        assert np.linalg.norm(grads[0][0] - fd) <= 1e-3 * np.linalg.norm(fd)

    def test_crossbar_gradient_equals_fixed_point_reference(self):
        train, _ = blobs(64, features=3, classes=3)
        model = build_model(MLP, hw(), (3,), 3, seed=1)
        ref = DigitalMLP(init_weights(MLP, (3,), 3, seed=1))
        loss = loss_grad_model(model, train.x[:16], train.y[:16])
        ref_loss, grads = ref.gradients(train.x[:16], train.y[:16])
        assert loss == ref_loss
        for layer, (dW, db) in zip(model.crossbar_layers, grads):
            np.testing.assert_array_equal(layer.dW, dW)
            np.testing.assert_array_equal(layer.db, db)


class TestTraining:
    def test_degenerate_equivalence(self):
        train, _ = blobs(120, features=4, classes=3, seed=2)
        model = build_model(MLP, hw(lr=0.05), (4,), 3, seed=3)
        ref = DigitalMLP(init_weights(MLP, (4,), 3, seed=3), lr=0.05)
        state = TrainState(model, batch_size=16, seed=3)
        for epoch in range(3):
            ours = train_epoch(state, train)["train_loss"]
            assert ours == ref.train_epoch(train, 16, seed=3, epoch=epoch)

    def test_iteration_counts_minibatches(self):
        train, _ = blobs(50)
        state = TrainState(build_model(MLP, hw(), (2,), 2), batch_size=16)
        train_epoch(state, train)
        train_epoch(state, train)
        assert state.iteration == 2 * len(batch_order(len(train), 16, 0, 0))
        assert [m["epoch"] for m in state.log] == [0, 1]

    def test_ideal_blobs_reach_99_percent(self):
        train, test = blobs(400, separation=8.0, seed=5)
        state = TrainState(build_model(MLP, hw(), (2,), 2, seed=5), batch_size=16, seed=5)
        for _ in range(20):
            m = train_epoch(state, train, test)
            if m["train_accuracy"] >= 0.99:
                break
        assert m["train_accuracy"] >= 0.99
        assert evaluate(state, test) >= 0.99

    def test_untrained_is_chance(self):
        rng = np.random.default_rng(7)
        n = 2000
        data = Dataset(rng.normal(size=(n, 4)), np.arange(n) % 2)
        state = TrainState(build_model(MLP, hw(), (4,), 2, seed=7))
        assert abs(evaluate(state, data) - 0.5) <= 3 * np.sqrt(0.25 / n)

    def test_determinism(self):
        def run():
            train, test = blobs(80, seed=1)
            h = hw(WIRED, engine="fcm", adc=AdcSpec(bits=6), update={"v": 0.1, "gamma": 2.0})
            state = TrainState(build_model(MLP, h, (2,), 2, seed=1), batch_size=16, seed=1)
            logs = [train_epoch(state, train, test) for _ in range(2)]
            return [{k: v for k, v in m.items() if k != "wall_time"} for m in logs]

        assert run() == run()

    def test_fcm_and_interp_interval_one_identical(self):
        train, test = blobs(80, seed=2)
        logs = {}
        for engine in ("fcm", "interp_fcm"):
            h = hw(WIRED, engine=engine, adc=AdcSpec(bits=8), interval=1)
            state = TrainState(build_model(MLP, h, (2,), 2, seed=2), batch_size=16, seed=2)
            logs[engine] = [train_epoch(state, train, test) for _ in range(2)]
        for a, b in zip(logs["fcm"], logs["interp_fcm"]):
            assert a["train_loss"] == b["train_loss"] and a["test_accuracy"] == b["test_accuracy"]

    def test_interp_refreshes_less(self):
        train, _ = blobs(80, seed=2)
        counts = {}
        for L in (1, 5):
            h = hw(WIRED, engine="interp_fcm", interval=L)
            state = TrainState(build_model(MLP, h, (2,), 2, seed=2), batch_size=8, seed=2)
            counts[L] = train_epoch(state, train)["engine_refreshes"]
        assert counts[5] < counts[1]

    def test_adc_calibrated_by_warm_up(self):
        train, _ = blobs(80)
        h = hw(WIRED, engine="fcm", adc=AdcSpec(bits=8))
        state = TrainState(build_model(MLP, h, (2,), 2), batch_size=16)
        assert not state.model.crossbar_layers[0].core.calibrated
        train_epoch(state, train)
        for layer in state.model.crossbar_layers:
            assert layer.core.calibrated and layer.core.adc["fwd"].i_fs > 0

    def test_divergence_recorded(self, monkeypatch):
        from xbartrain.nn import train as train_module

        train, test = blobs(64)
        state = TrainState(build_model(MLP, hw(), (2,), 2), batch_size=16)
        monkeypatch.setattr(train_module, "softmax_xent", lambda logits, y: (float("nan"), logits * 0))
        m = train_epoch(state, train, test)
        assert np.isnan(m["train_loss"]) and state.diverged
        assert state.iteration == 0

    def test_empty_sets(self):
        state = TrainState(build_model(MLP, hw(), (2,), 2))
        empty = Dataset(np.zeros((0, 2)), np.zeros(0))
        with pytest.raises(ValueError):
            train_epoch(state, empty)
        with pytest.raises(ValueError):
            evaluate(state, empty)

    def test_evaluate_does_not_mutate(self):
        train, test = blobs(60)
        state = TrainState(build_model(MLP, hw(), (2,), 2))
        before = [l.weights.g_pos.copy() for l in state.model.crossbar_layers]
        evaluate(state, test)
        evaluate(state, test)
        for b, l in zip(before, state.model.crossbar_layers):
            np.testing.assert_array_equal(b, l.weights.g_pos)
            assert l.dW is None


def direct_conv(x, W, kernel, stride, padding):
    """Reference cross-correlation with W rows in (channel, ky, kx) order."""
    B, C, H, Wd = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    Ho = (H + 2 * padding - kernel) // stride + 1
    Wo = (Wd + 2 * padding - kernel) // stride + 1
    K = W.reshape(C, kernel, kernel, -1)
    out = np.zeros((B, W.shape[1], Ho, Wo))
    for i in range(Ho):
        for j in range(Wo):
            patch = xp[:, :, i * stride:i * stride + kernel, j * stride:j * stride + kernel]
            out[:, :, i, j] = np.einsum("bcyx,cyxo->bo", patch, K)
    return out


class TestConvolution:
    @pytest.mark.parametrize("stride, padding", [(1, 0), (1, 1), (2, 1)])
    def test_forward_matches_direct(self, stride, padding):
        rng = np.random.default_rng(8)
        W = rng.normal(size=(2 * 9, 3))
        layer = CrossbarConv2d(W, hw(), 3, stride, padding)
        x = rng.normal(size=(2, 2, 6, 6))
        xq = quantize(x, 8)
        w = signed_levels(layer.weights) * layer.w_step
        np.testing.assert_allclose(layer.forward(x), direct_conv(xq.value, w, 3, stride, padding), atol=1e-12)

    def test_backward_is_adjoint(self):
        rng = np.random.default_rng(9)
        layer = CrossbarConv2d(rng.normal(size=(9, 2)), hw(), 3, 1, 1)
        x = rng.normal(size=(1, 1, 5, 5))
        y = layer.forward(x, train=True)
        dy = rng.normal(size=y.shape)
        dx = layer.backward(dy)
        # <conv(u), dy_q> == <u, conv^T(dy_q)> for the quantized weights
        dq = quantize(dy.transpose(0, 2, 3, 1).reshape(-1, 2), 8).value.reshape(1, 5, 5, 2).transpose(0, 3, 1, 2)
        u = rng.normal(size=x.shape)
        w = signed_levels(layer.weights) * layer.w_step
        lhs = np.sum(direct_conv(u, w, 3, 1, 1) * dq)
        assert np.sum(u * dx) == pytest.approx(lhs, rel=1e-10)

    def test_weight_gradient(self):
        rng = np.random.default_rng(10)
        layer = CrossbarConv2d(rng.normal(size=(4 * 4, 3)), hw(), 2, 2, 0)
        x = rng.normal(size=(2, 4, 4, 4))
        y = layer.forward(x, train=True)
        dy = np.zeros(y.shape)
        dy[0, 1, 0, 0] = 1.0
        layer.backward(dy)
        xq = quantize(x, 8)
        # one output position: the gradient is the patch that produced it
        np.testing.assert_allclose(layer.dW[:, 1], xq.value[0, :, :2, :2].reshape(-1) * quantize(dy, 8).scale
                                   * 255, rtol=1e-12)

    def test_kernel_mismatch(self):
        with pytest.raises(ValueError):
            CrossbarConv2d(np.ones((10, 2)), hw(), 3)

    def test_cnn_trains(self):
        rng = np.random.default_rng(11)
        n = 64
        y = np.arange(n) % 2
        x = rng.normal(scale=0.3, size=(n, 1, 6, 6))
        x[y == 1, 0, :3, :] += 1.0
        x[y == 0, 0, 3:, :] += 1.0
        topo = [{"type": "conv", "out": 2, "kernel": 3, "padding": 1}, {"type": "relu"},
                {"type": "maxpool", "size": 2}, {"type": "flatten"}, {"type": "linear", "out": "classes"}]
        state = TrainState(build_model(topo, hw(lr=0.1), (1, 6, 6), 2, seed=0), batch_size=8)
        losses = [train_epoch(state, Dataset(x, y))["train_loss"] for _ in range(5)]
        assert losses[-1] < losses[0]


class TestDigitalLayers:
    def test_relu(self):
        r = ReLU()
        out = r.forward(np.array([[-1.0, 0.0, 2.0]]), train=True)
        np.testing.assert_array_equal(out, [[0, 0, 2]])
        np.testing.assert_array_equal(r.backward(np.ones((1, 3))), [[0, 0, 1]])

    def test_maxpool(self):
        x = np.arange(16.0).reshape(1, 1, 4, 4)
        p = MaxPool2d(2)
        np.testing.assert_array_equal(p.forward(x, train=True)[0, 0], [[5, 7], [13, 15]])
        g = p.backward(np.ones((1, 1, 2, 2)))
        assert g.sum() == 4 and g[0, 0, 1, 1] == 1 and g[0, 0, 0, 0] == 0

    def test_maxpool_odd_edge_gets_no_gradient(self):
        p = MaxPool2d(2)
        p.forward(np.random.default_rng(0).normal(size=(1, 1, 5, 5)), train=True)
        g = p.backward(np.ones((1, 1, 2, 2)))
        assert g.shape == (1, 1, 5, 5) and np.all(g[..., 4, :] == 0)

    def test_flatten(self):
        f = Flatten()
        x = np.zeros((2, 3, 4, 5))
        assert f.forward(x, train=True).shape == (2, 60)
        assert f.backward(np.zeros((2, 60))).shape == x.shape

    def test_softmax_xent(self):
        loss, grad = softmax_xent(np.zeros((2, 4)), np.array([0, 3]))
        assert loss == pytest.approx(np.log(4))
        np.testing.assert_allclose(grad.sum(axis=1), 0, atol=1e-15)


class TestData:
    def test_blobs_seeded_and_balanced(self):
        a, b = make_blobs(100, 3, 4, seed=1), make_blobs(100, 3, 4, seed=1)
        np.testing.assert_array_equal(a.x, b.x)
        assert np.bincount(a.y).tolist() == [25] * 4

    def test_uninformative_features(self):
        d = make_blobs(4000, 5, 2, separation=10, seed=0, n_informative=2)
        means = np.array([d.x[d.y == k].mean(axis=0) for k in range(2)])
        assert np.all(np.abs(means[:, 2:]) < 0.1)
        with pytest.raises(ValueError):
            make_blobs(10, 3, 2, n_informative=4)

    def test_split(self):
        train, test = split(make_blobs(100), 0.2)
        assert len(train) == 80 and len(test) == 20

    def test_batch_order(self):
        order = batch_order(10, 4, seed=0, epoch=0)
        assert [len(b) for b in order] == [4, 4, 2]
        assert sorted(np.concatenate(order).tolist()) == list(range(10))
        assert not np.array_equal(np.concatenate(order), np.concatenate(batch_order(10, 4, 0, 1)))
        with pytest.raises(ValueError):
            batch_order(0, 4, 0, 0)
        with pytest.raises(ValueError):
            batch_order(10, 0, 0, 0)

    def test_idx_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        images = rng.integers(0, 256, size=(5, 3, 4), dtype=np.uint8)
        labels = np.array([0, 1, 2, 1, 0], dtype=np.uint8)
        write_idx(tmp_path / "img.idx", images)
        write_idx(tmp_path / "lab.idx", labels)
        raw = (tmp_path / "img.idx").read_bytes()
        assert raw[:4] == bytes([0, 0, 8, 3])
        (tmp_path / "img.idx.gz").write_bytes(gzip.compress(raw))
        np.testing.assert_array_equal(read_idx(tmp_path / "img.idx.gz"), images)
        data = load_idx(tmp_path / "img.idx", tmp_path / "lab.idx")
        assert data.x.shape == (5, 1, 3, 4) and data.x.max() <= 1.0
        np.testing.assert_array_equal(data.y, labels)

    def test_idx_errors(self, tmp_path):
        (tmp_path / "bad").write_bytes(b"\x00\x00\x09\x03" + b"\x00" * 12)
        with pytest.raises(ValueError, match="magic"):
            read_idx(tmp_path / "bad")
        (tmp_path / "short").write_bytes(b"\x00\x00\x08\x01" + (5).to_bytes(4, "big") + b"\x01\x02")
        with pytest.raises(ValueError, match="payload"):
            read_idx(tmp_path / "short")
        with pytest.raises(FileNotFoundError):
            read_idx(tmp_path / "missing")

    def test_csv(self, tmp_path):
        (tmp_path / "d.csv").write_text("label,p0,p1,p2,p3\n1,0,255,0,255\n0,255,0,255,0\n")
        d = load_csv(tmp_path / "d.csv", image_shape=(1, 2, 2), scale=1 / 255)
        assert d.x.shape == (2, 1, 2, 2) and d.y.tolist() == [1, 0] and d.x.max() == 1.0
        (tmp_path / "n.csv").write_text("1,0.5,0.25\n")
        assert load_csv(tmp_path / "n.csv").x.tolist() == [[0.5, 0.25]]

    def test_dataset_length_mismatch(self):
        with pytest.raises(ValueError):
            Dataset(np.zeros((3, 2)), np.zeros(2))
