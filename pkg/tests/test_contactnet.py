import numpy as np
import pytest

from proprio.contactnet import network as net
from proprio.contactnet import (
    ArchitectureSpec,
    Conv,
    Dense,
    Dropout,
    Flatten,
    LabelOutOfRangeError,
    Pool,
    Relu,
    ShapeMismatchError,
    backward,
    forward,
    init_params,
    load_params,
    loss,
    predict,
    preset,
    save_params,
    trace_shapes,
)
from proprio.dataio import decode_contact


def tiny_spec(dropout=0.2):
    return ArchitectureSpec(
        (
            Conv(3, 4), Relu(), Conv(4, 8), Relu(), Dropout(dropout), Pool(2),
            Flatten(), Dense(8 * 4, 16), Relu(), Dropout(dropout),
            Dense(16, 8), Relu(), Dense(8, 4),
        ),
        window=8,
        in_channels=3,
        n_classes=4,
    )


class TestShapes:
    def test_table_trace_w150(self):
        spec = preset("2blocks", window=150, in_channels=54, n_classes=16)
        shapes = trace_shapes(spec)
        assert shapes[0] == (54, 150)
        # conv/relu keep (64, 150); first pool halves; second block at 75
        assert (64, 150) in shapes and (64, 75) in shapes
        assert (128, 75) in shapes and (128, 37) in shapes
        assert (4736,) in shapes  # 128 * 37 flattened
        assert (2048,) in shapes and (512,) in shapes
        assert shapes[-1] == (16,)

    def test_all_presets_build(self):
        for name in net.PRESET_NAMES:
            spec = preset(name, window=48, in_channels=54, n_classes=16)
            assert trace_shapes(spec)[-1] == (16,)

    def test_biped_configuration(self):
        spec = preset("2blocks", window=600, in_channels=54, n_classes=4)
        shapes = trace_shapes(spec)
        assert (128, 150) in shapes and (19200,) in shapes
        assert shapes[-1] == (4,)

    def test_incompatible_dense(self):
        spec = ArchitectureSpec(
            (Flatten(), Dense(10, 4)), window=8, in_channels=3, n_classes=4
        )
        with pytest.raises(ShapeMismatchError):
            trace_shapes(spec)

    def test_wrong_window_shape(self):
        spec = tiny_spec()
        params = init_params(spec, np.random.default_rng(0))
        with pytest.raises(ShapeMismatchError):
            forward(params, spec, np.zeros((9, 3)))


class TestForward:
    def test_zero_params_zero_logits(self):
        spec = tiny_spec()
        params = init_params(spec, np.random.default_rng(0))
        params = [None if p is None else (np.zeros_like(p[0]), np.zeros_like(p[1])) for p in params]
        logits = forward(params, spec, np.random.default_rng(1).normal(size=(8, 3)))
        assert np.array_equal(logits, np.zeros(4))

    def test_eval_deterministic(self):
        spec = tiny_spec()
        rng = np.random.default_rng(2)
        params = init_params(spec, rng)
        window = rng.normal(size=(8, 3))
        a = forward(params, spec, window, mode="eval")
        b = forward(params, spec, window, mode="eval")
        assert np.array_equal(a, b)

    def test_batch_matches_single(self):
        spec = tiny_spec()
        rng = np.random.default_rng(3)
        params = init_params(spec, rng)
        wins = rng.normal(size=(5, 8, 3))
        batched = forward(params, spec, wins)
        for i in range(5):
            np.testing.assert_allclose(batched[i], forward(params, spec, wins[i]), atol=1e-12)


class TestLoss:
    def test_uniform_16(self):
        assert abs(loss(np.zeros(16), 3) - np.log(16)) < 1e-9

    def test_saturated(self):
        logits = np.zeros(16)
        logits[5] = 1000.0
        assert loss(logits, 5) < 1e-12

    def test_translation_invariance(self):
        rng = np.random.default_rng(4)
        logits = rng.normal(size=16)
        assert abs(loss(logits, 7) - loss(logits + 123.456, 7)) < 1e-12

    def test_label_out_of_range(self):
        with pytest.raises(LabelOutOfRangeError):
            loss(np.zeros(16), 16)

    def test_high_precision_oracle(self):
        import mpmath

        mpmath.mp.dps = 40
        rng = np.random.default_rng(5)
        for _ in range(20):
            logits = rng.normal(scale=5.0, size=16)
            label = int(rng.integers(16))
            denom = mpmath.fsum([mpmath.exp(mpmath.mpf(x)) for x in logits])
            expected = -mpmath.log(mpmath.exp(mpmath.mpf(logits[label])) / denom)
            assert abs(loss(logits, label) - float(expected)) < 1e-12


def relative_grad_error(spec, params, window, label, h=1e-5, seed=7):
    """Max relative error of analytic vs central-difference gradients."""

    def loss_at():
        value, _, _ = net.loss_and_grads(
            params, spec, window, [label], "train", np.random.default_rng(seed)
        )
        return value

    _, grads, _ = net.loss_and_grads(
        params, spec, window, [label], "train", np.random.default_rng(seed)
    )
    worst = 0.0
    for i, p in enumerate(params):
        if p is None:
            continue
        for j in range(2):
            arr = p[j]
            it = np.nditer(arr, flags=["multi_index"])
            for _ in it:
                ix = it.multi_index
                orig = arr[ix]
                arr[ix] = orig + h
                up = loss_at()
                arr[ix] = orig - h
                down = loss_at()
                arr[ix] = orig
                fd = (up - down) / (2 * h)
                g = grads[i][j][ix]
                worst = max(worst, abs(fd - g) / max(abs(fd), abs(g), 1e-8))
    return worst


class TestGradients:
    def test_end_to_end_tiny(self):
        spec = tiny_spec()
        rng = np.random.default_rng(6)
        params = init_params(spec, rng)
        window = rng.normal(size=(8, 3))
        assert relative_grad_error(spec, params, window, 2) < 1e-5

    @pytest.mark.parametrize(
        "layers,channels",
        [
            ((Conv(3, 5), Flatten(), Dense(5 * 8, 4)), 3),  # conv alone
            ((Pool(2), Flatten(), Dense(3 * 4, 4)), 3),  # pool alone
            ((Relu(), Flatten(), Dense(3 * 8, 4)), 3),  # relu alone
            ((Dropout(0.3), Flatten(), Dense(3 * 8, 4)), 3),  # dropout alone
            ((Flatten(), Dense(24, 6), Dense(6, 4)), 3),  # dense stack
        ],
    )
    def test_each_layer_type(self, layers, channels):
        spec = ArchitectureSpec(tuple(layers), window=8, in_channels=channels, n_classes=4)
        rng = np.random.default_rng(8)
        params = init_params(spec, rng)
        window = rng.normal(size=(8, channels))
        assert relative_grad_error(spec, params, window, 1) < 1e-5

    def test_zero_input_zero_conv_weight_grad(self):
        spec = tiny_spec(dropout=0.0)
        rng = np.random.default_rng(9)
        params = init_params(spec, rng)
        grads = backward(params, spec, np.zeros((8, 3)), 0)
        assert np.array_equal(grads[0][0], np.zeros_like(grads[0][0]))

    def test_gradient_additivity(self):
        # mean-reduced batch gradient equals the average of single gradients
        spec = tiny_spec(dropout=0.0)
        rng = np.random.default_rng(10)
        params = init_params(spec, rng)
        w1, w2 = rng.normal(size=(2, 8, 3))
        _, g_batch, _ = net.loss_and_grads(params, spec, np.stack([w1, w2]), [1, 3], "eval")
        _, g1, _ = net.loss_and_grads(params, spec, w1, [1], "eval")
        _, g2, _ = net.loss_and_grads(params, spec, w2, [3], "eval")
        for gb, ga, gc in zip(g_batch, g1, g2):
            if gb is None:
                continue
            for j in range(2):
                np.testing.assert_allclose(gb[j], (ga[j] + gc[j]) / 2.0, atol=1e-12)

    def test_duplicated_sample_scaling(self):
        # duplicating a window leaves the mean-reduced gradient unchanged,
        # i.e. the summed gradient doubles
        spec = tiny_spec(dropout=0.0)
        rng = np.random.default_rng(11)
        params = init_params(spec, rng)
        w = rng.normal(size=(8, 3))
        _, g1, _ = net.loss_and_grads(params, spec, w, [2], "eval")
        _, g2, _ = net.loss_and_grads(params, spec, np.stack([w, w]), [2, 2], "eval")
        for a, b in zip(g1, g2):
            if a is None:
                continue
            np.testing.assert_allclose(a[0], b[0], atol=1e-12)


class TestDropout:
    def test_eval_identity(self):
        spec = tiny_spec(dropout=0.5)
        rng = np.random.default_rng(12)
        params = init_params(spec, rng)
        window = rng.normal(size=(8, 3))
        no_drop = tiny_spec(dropout=0.0)
        np.testing.assert_allclose(
            forward(params, spec, window, "eval"),
            forward(params, no_drop, window, "eval"),
            atol=0,
        )

    def test_inverted_scaling_mean(self):
        from proprio.contactnet.layers import dropout_forward

        rng = np.random.default_rng(13)
        x = rng.normal(size=(4, 16)) + 2.0
        total = np.zeros_like(x)
        n = 10_000
        for _ in range(n):
            y, _ = dropout_forward(x, 0.2, "train", rng)
            total += y
        np.testing.assert_allclose(total / n, x, rtol=0.02, atol=0.02)


class TestTraining:
    def _toy(self, n=200, w=16, channels=6, seed=14):
        # two linearly separable classes via a strong mean shift
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(n, w, channels))
        y = rng.integers(0, 2, size=n)
        x[y == 1, :, 0] += np.linspace(0, 6, w)  # time-structured shift
        x[y == 1, :, 1] -= 3.0
        from proprio.dataio import WindowSet

        feats = x.reshape(n * w, channels)
        ends = np.arange(n) * w + (w - 1)
        return WindowSet(feats, ends, y, w)

    def _spec(self, w=16, channels=6, classes=2):
        return ArchitectureSpec(
            (
                Conv(channels, 8), Relu(), Pool(2), Flatten(),
                Dense(8 * (w // 2), 16), Relu(), Dense(16, classes),
            ),
            window=w,
            in_channels=channels,
            n_classes=classes,
        )

    def test_separable_toy(self):
        from proprio.contactnet import TrainConfig, evaluate_accuracy, train

        windows = self._toy()
        spec = self._spec()
        cfg = TrainConfig(batch_size=20, learning_rate=3e-3, epochs=10, dropout=0.0, seed=0)
        params, log = train(windows, cfg, spec)
        assert log[-1]["train_acc"] >= 0.99
        assert evaluate_accuracy(params, spec, windows) >= 0.99

    def test_loss_decreases(self):
        from proprio.contactnet import TrainConfig, train

        windows = self._toy(seed=15)
        cfg = TrainConfig(batch_size=20, learning_rate=1e-3, epochs=3, dropout=0.0, seed=1)
        _, log = train(windows, cfg, self._spec())
        losses = [row["train_loss"] for row in log]
        assert all(np.isfinite(losses))
        assert losses[1] < losses[0] and losses[2] < losses[1]

    def test_seed_determinism(self):
        from proprio.contactnet import TrainConfig, train

        windows = self._toy(n=60, seed=16)
        cfg = TrainConfig(batch_size=15, learning_rate=1e-3, epochs=2, seed=42)
        p1, log1 = train(windows, cfg, self._spec())
        p2, log2 = train(windows, cfg, self._spec())
        assert log1 == log2
        for a, b in zip(p1, p2):
            if a is None:
                continue
            assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])

    def test_full_batch_order_invariance(self):
        from proprio.contactnet import TrainConfig, train

        windows = self._toy(n=40, seed=17)
        perm = np.random.default_rng(0).permutation(40)
        shuffled = windows.subset(perm)
        cfg = TrainConfig(batch_size=40, learning_rate=1e-3, epochs=2, dropout=0.0, seed=3)
        p1, _ = train(windows, cfg, self._spec())
        p2, _ = train(shuffled, cfg, self._spec())
        for a, b in zip(p1, p2):
            if a is None:
                continue
            np.testing.assert_allclose(a[0], b[0], atol=1e-9)

    def test_empty_dataset(self):
        from proprio.contactnet import EmptyDatasetError, TrainConfig, train
        from proprio.dataio import WindowSet

        empty = WindowSet(np.zeros((16, 6)), np.array([], dtype=int), np.array([], dtype=int), 16)
        with pytest.raises(EmptyDatasetError):
            train(empty, TrainConfig(), self._spec())

    def test_sgd_option(self):
        from proprio.contactnet import TrainConfig, train

        windows = self._toy(n=40, seed=18)
        cfg = TrainConfig(batch_size=20, learning_rate=1e-2, epochs=2, dropout=0.0, seed=4, optimizer="sgd")
        _, log = train(windows, cfg, self._spec())
        assert log[-1]["train_loss"] < log[0]["train_loss"] * 1.2


class TestPredict:
    def test_forced_class_six(self):
        spec = tiny_spec()
        rng = np.random.default_rng(19)
        spec16 = preset("2blocks", window=16, in_channels=4, n_classes=16, dropout=0.0)
        params = init_params(spec16, rng)
        # force class 6 by rigging the last layer bias
        w_last, b_last = params[-1]
        params[-1] = (np.zeros_like(w_last), np.zeros_like(b_last))
        params[-1][1][6] = 10.0
        code, probs = predict(params, spec16, rng.normal(size=(16, 4)))
        assert code == 6
        assert decode_contact(code, 4) == (False, True, True, False)
        assert probs.argmax() == 6

    def test_uniform_tie_break(self):
        spec = tiny_spec(dropout=0.0)
        params = init_params(spec, np.random.default_rng(20))
        params = [None if p is None else (np.zeros_like(p[0]), np.zeros_like(p[1])) for p in params]
        code, probs = predict(params, spec, np.random.default_rng(21).normal(size=(8, 3)))
        assert code == 0  # ties resolve to the lowest class
        assert abs(probs.sum() - 1.0) < 1e-12

    def test_probabilities_sum(self):
        spec = tiny_spec()
        rng = np.random.default_rng(22)
        params = init_params(spec, rng)
        _, probs = predict(params, spec, rng.normal(size=(8, 3)))
        assert abs(probs.sum() - 1.0) < 1e-12


class TestSerialization:
    def test_roundtrip_bit_exact(self, tmp_path):
        spec = tiny_spec()
        rng = np.random.default_rng(23)
        params = init_params(spec, rng)
        path = tmp_path / "w.pcnw"
        save_params(params, spec, path)
        loaded, spec2 = load_params(path)
        assert spec2 == spec
        for a, b in zip(params, loaded):
            if a is None:
                assert b is None
                continue
            assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])

    def test_corrupted_byte(self, tmp_path):
        spec = tiny_spec()
        params = init_params(spec, np.random.default_rng(24))
        path = tmp_path / "w.pcnw"
        save_params(params, spec, path)
        blob = bytearray(path.read_bytes())
        blob[len(blob) // 2] ^= 0x01
        path.write_bytes(bytes(blob))
        with pytest.raises(net.ChecksumFailureError):
            load_params(path)

    def test_version_mismatch(self, tmp_path):
        import struct
        import zlib

        spec = tiny_spec()
        params = init_params(spec, np.random.default_rng(25))
        path = tmp_path / "w.pcnw"
        save_params(params, spec, path)
        blob = bytearray(path.read_bytes())
        blob[4:6] = struct.pack("<H", 99)
        body = bytes(blob[4:-4])
        blob[-4:] = struct.pack("<I", zlib.crc32(body))
        path.write_bytes(bytes(blob))
        with pytest.raises(net.VersionMismatchError):
            load_params(path)

    def test_load_4blocks_and_shape_check(self, tmp_path):
        spec = preset("4blocks", window=64, in_channels=54, n_classes=16)
        rng = np.random.default_rng(26)
        params = init_params(spec, rng)
        path = tmp_path / "w4.pcnw"
        save_params(params, spec, path)
        loaded, spec2 = load_params(path)
        logits = forward(loaded, spec2, rng.normal(size=(64, 54)))
        assert logits.shape == (16,)
