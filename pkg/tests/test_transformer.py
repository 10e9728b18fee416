"""Temporal transformer: forward oracle, gradients, shapes, determinism."""

from __future__ import annotations

import numpy as np
import pytest

from agora.errors import ConfigInvalid, NonFiniteWeights, OddDim, ShapeMismatch
from agora.transformer import (
    ModelConfig,
    ModelWeights,
    backward,
    desk_config,
    forward,
    init_weights,
    mse_loss,
    multi_head_attention,
    paper_config,
    parameter_shapes,
    positional_encoding,
    predict,
    softmax,
    tiny_config,
)


def _zero_weights(config: ModelConfig) -> ModelWeights:
    return ModelWeights(config, {name: np.zeros(shape) for name, shape in parameter_shapes(config)})


class TestConfig:
    def test_profiles(self):
        desk = desk_config()
        assert (desk.model_dim, desk.heads, desk.encoder_layers, desk.decoder_layers) == (64, 8, 2, 2)
        paper = paper_config()
        assert (paper.model_dim, paper.encoder_layers, paper.decoder_layers) == (2048, 6, 6)
        assert paper.dropout == 0.1
        tiny = tiny_config()
        assert (tiny.model_dim, tiny.heads, tiny.seq_len) == (8, 2, 4)

    def test_ff_dim_defaults_to_four_times_model_dim(self):
        assert ModelConfig(model_dim=10, heads=2).ff_dim == 40

    def test_validation(self):
        with pytest.raises(OddDim):
            ModelConfig(model_dim=7, heads=7)
        with pytest.raises(ConfigInvalid):
            ModelConfig(model_dim=8, heads=3)
        with pytest.raises(ConfigInvalid):
            ModelConfig(encoder_layers=0)
        with pytest.raises(ConfigInvalid):
            ModelConfig(dropout=1.0)
        with pytest.raises(ConfigInvalid):
            ModelConfig(layernorm_eps=0.0)


class TestPositionalEncoding:
    def test_first_row_alternates_zero_one(self):
        pe = positional_encoding(5, 6)
        assert np.array_equal(pe[0], [0.0, 1.0, 0.0, 1.0, 0.0, 1.0])

    def test_matches_formula_pointwise(self):
        pe = positional_encoding(4, 8)
        for t in range(4):
            for half in range(4):
                angle = t / 10000.0 ** (2.0 * half / 8.0)
                assert pe[t, 2 * half] == pytest.approx(np.sin(angle), abs=1e-9)
                assert pe[t, 2 * half + 1] == pytest.approx(np.cos(angle), abs=1e-9)

    def test_spot_values(self):
        pe = positional_encoding(4, 8)
        assert pe[1, 0] == pytest.approx(np.sin(1.0), abs=1e-9)
        assert pe[1, 1] == pytest.approx(np.cos(1.0), abs=1e-9)
        assert pe[2, 2] == pytest.approx(np.sin(0.2), abs=1e-9)
        assert pe[3, 7] == pytest.approx(np.cos(0.003), abs=1e-9)

    def test_odd_dim_rejected(self):
        with pytest.raises(OddDim):
            positional_encoding(4, 7)
        with pytest.raises(ConfigInvalid):
            positional_encoding(0, 8)


class TestAttention:
    def test_softmax_rows_sum_to_one(self):
        rng = np.random.Generator(np.random.PCG64(0))
        x = rng.standard_normal((5, 7)) * 30
        sums = softmax(x, axis=-1).sum(axis=-1)
        assert np.allclose(sums, 1.0, atol=1e-9)

    def test_zero_query_averages_value_rows(self):
        rng = np.random.Generator(np.random.PCG64(1))
        k = rng.standard_normal((3, 4))
        v = rng.standard_normal((3, 4))
        out = multi_head_attention(np.zeros((1, 4)), k, v, heads=2)
        assert np.allclose(out[0], v.mean(axis=0), atol=1e-9)

    def test_two_by_two_single_head_hand_example(self):
        q = np.array([[1.0, 0.0], [0.0, 1.0]])
        k = np.array([[1.0, 0.0], [0.0, 1.0]])
        v = np.array([[1.0, 2.0], [3.0, 4.0]])
        # scores = q k^T / sqrt(2) = diag(1, 1) / sqrt(2)
        s = 1.0 / np.sqrt(2.0)
        hi = np.exp(s) / (np.exp(s) + 1.0)
        lo = 1.0 / (np.exp(s) + 1.0)
        want = np.array(
            [
                [hi * 1.0 + lo * 3.0, hi * 2.0 + lo * 4.0],
                [lo * 1.0 + hi * 3.0, lo * 2.0 + hi * 4.0],
            ]
        )
        out = multi_head_attention(q, k, v, heads=1)
        assert np.allclose(out, want, atol=1e-9)

    def test_output_projection_applied(self):
        v = np.array([[2.0, 0.0], [2.0, 0.0]])
        w_out = np.array([[0.0, 1.0], [1.0, 0.0]])
        out = multi_head_attention(np.zeros((1, 2)), v, v, heads=1, w_out=w_out, b_out=np.array([1.0, 1.0]))
        assert np.allclose(out, [[1.0, 3.0]], atol=1e-12)

    def test_shape_errors(self):
        with pytest.raises(ShapeMismatch):
            multi_head_attention(np.zeros((2, 3)), np.zeros((2, 4)), np.zeros((2, 4)), heads=1)
        with pytest.raises(ShapeMismatch):
            multi_head_attention(np.zeros((2, 4)), np.zeros((2, 4)), np.zeros((2, 4)), heads=3)
        with pytest.raises(ShapeMismatch):
            multi_head_attention(np.zeros(4), np.zeros((2, 4)), np.zeros((2, 4)), heads=1)


def _oracle_forward_tiny(params: dict, x: np.ndarray, eps: float = 1e-5) -> float:
    """Straight-line reimplementation of the tiny-profile forward pass,
    written independently (per-head loops, inline softmax and layer norm)."""
    d, heads, seq_len = 8, 2, 4
    h = x @ params["input.w"] + params["input.b"]
    t = np.arange(float(seq_len))[:, None]
    half = np.arange(float(d // 2))[None, :]
    angle = t / 10000.0 ** (2.0 * half / d)
    pe = np.zeros((seq_len, d))
    pe[:, 0::2] = np.sin(angle)
    pe[:, 1::2] = np.cos(angle)
    h = h + pe

    def layer_norm(v, g, b):
        mean = v.mean(axis=-1, keepdims=True)
        var = ((v - mean) ** 2).mean(axis=-1, keepdims=True)
        return g * (v - mean) / np.sqrt(var + eps) + b

    def attention(prefix, x_q, x_kv):
        q = x_q @ params[f"{prefix}.wq"] + params[f"{prefix}.bq"]
        k = x_kv @ params[f"{prefix}.wk"] + params[f"{prefix}.bk"]
        v = x_kv @ params[f"{prefix}.wv"] + params[f"{prefix}.bv"]
        dk = d // heads
        pieces = []
        for head in range(heads):
            cols = slice(head * dk, (head + 1) * dk)
            scores = q[:, cols] @ k[:, cols].T / np.sqrt(dk)
            e = np.exp(scores - scores.max(axis=-1, keepdims=True))
            probs = e / e.sum(axis=-1, keepdims=True)
            pieces.append(probs @ v[:, cols])
        concat = np.concatenate(pieces, axis=-1)
        return concat @ params[f"{prefix}.wo"] + params[f"{prefix}.bo"]

    def block(prefix, x_q, x_kv):
        h1 = layer_norm(
            x_q + attention(f"{prefix}.attn", x_q, x_kv),
            params[f"{prefix}.ln1.g"],
            params[f"{prefix}.ln1.b"],
        )
        hidden = np.maximum(h1 @ params[f"{prefix}.ff.w1"] + params[f"{prefix}.ff.b1"], 0.0)
        ffn = hidden @ params[f"{prefix}.ff.w2"] + params[f"{prefix}.ff.b2"]
        return layer_norm(h1 + ffn, params[f"{prefix}.ln2.g"], params[f"{prefix}.ln2.b"])

    enc = block("enc0", h, h)
    s = block("dec0", enc[-1:, :], enc)
    return float(s[0] @ params["head.w"][:, 0] + params["head.b"][0])


class TestForward:
    def test_zero_weights_predict_zero(self):
        weights = _zero_weights(tiny_config())
        x = np.ones((4, 1036))
        assert predict(weights, x) == 0.0

    def test_matches_independent_oracle(self):
        config = tiny_config()
        for seed in range(3):
            weights = init_weights(config, seed=seed)
            rng = np.random.Generator(np.random.PCG64(100 + seed))
            x = rng.standard_normal((config.seq_len, config.input_dim))
            got = predict(weights, x)
            want = _oracle_forward_tiny(weights.params, x, eps=config.layernorm_eps)
            assert got == pytest.approx(want, abs=1e-6)

    def test_batch_matches_singles(self):
        config = tiny_config()
        weights = init_weights(config, seed=3)
        rng = np.random.Generator(np.random.PCG64(4))
        batch = rng.standard_normal((5, config.seq_len, config.input_dim))
        y, _ = forward(weights, batch)
        for i in range(5):
            assert y[i] == pytest.approx(predict(weights, batch[i]), abs=1e-12)

    def test_inference_is_deterministic(self):
        config = tiny_config()
        weights = init_weights(config, seed=5)
        x = np.random.Generator(np.random.PCG64(6)).standard_normal((4, 1036))
        assert predict(weights, x) == predict(weights, x)

    def test_dropout_only_active_in_training_with_rng(self):
        config = ModelConfig(
            model_dim=8, heads=2, encoder_layers=1, decoder_layers=1, seq_len=4, dropout=0.5
        )
        weights = init_weights(config, seed=7)
        x = np.random.Generator(np.random.PCG64(8)).standard_normal((1, 4, 1036))
        y_eval, _ = forward(weights, x, train=False, rng=np.random.Generator(np.random.PCG64(9)))
        y_eval2, _ = forward(weights, x, train=False)
        y_train, _ = forward(weights, x, train=True, rng=np.random.Generator(np.random.PCG64(9)))
        assert y_eval[0] == y_eval2[0]
        assert y_train[0] != y_eval[0]

    def test_layer_norm_output_rows_standardized(self):
        config = tiny_config()
        weights = init_weights(config, seed=10)  # fresh norms: gain 1, bias 0
        x = np.random.Generator(np.random.PCG64(11)).standard_normal((2, 4, 1036))
        _, cache = forward(weights, x)
        enc_out = cache["enc_out"]
        assert np.allclose(enc_out.mean(axis=-1), 0.0, atol=1e-6)
        assert np.allclose(enc_out.var(axis=-1), 1.0, atol=1e-4)

    def test_wrong_input_shape_rejected(self):
        weights = init_weights(tiny_config())
        with pytest.raises(ShapeMismatch):
            forward(weights, np.zeros((3, 1036)))
        with pytest.raises(ShapeMismatch):
            forward(weights, np.zeros((4, 1035)))

    def test_non_finite_weights_rejected_by_predict(self):
        weights = init_weights(tiny_config())
        weights.params["head.w"][0, 0] = np.nan
        with pytest.raises(NonFiniteWeights):
            predict(weights, np.zeros((4, 1036)))


class TestLossAndBackward:
    def test_mse_hand_values(self):
        loss, grad = mse_loss(np.array([1.0, 3.0]), np.array([0.0, 1.0]))
        assert loss == pytest.approx(2.5, abs=1e-12)
        assert np.allclose(grad, [1.0, 2.0], atol=1e-12)

    def test_mse_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            mse_loss(np.zeros(3), np.zeros(4))

    def test_zero_residual_means_zero_gradients(self):
        config = tiny_config()
        weights = init_weights(config, seed=12)
        x = np.random.Generator(np.random.PCG64(13)).standard_normal((2, 4, 1036))
        y, cache = forward(weights, x)
        _, dy = mse_loss(y, y.copy())
        grads = backward(weights, cache, dy)
        assert all(not g.any() for g in grads.values())

    def test_head_bias_gradient_is_twice_residual(self):
        config = tiny_config()
        weights = init_weights(config, seed=14)
        x = np.random.Generator(np.random.PCG64(15)).standard_normal((1, 4, 1036))
        y, cache = forward(weights, x)
        target = np.array([y[0] - 1.5])
        _, dy = mse_loss(y, target)
        grads = backward(weights, cache, dy)
        assert grads["head.b"][0] == pytest.approx(2.0 * 1.5, abs=1e-12)

    def test_gradients_match_central_differences_on_sample_tensors(self):
        config = tiny_config()
        weights = init_weights(config, seed=16)
        rng = np.random.Generator(np.random.PCG64(17))
        x = rng.standard_normal((2, config.seq_len, config.input_dim))
        target = rng.standard_normal(2)
        y, cache = forward(weights, x)
        _, dy = mse_loss(y, target)
        grads = backward(weights, cache, dy)
        eps = 1e-5
        for name in ("head.w", "input.b", "enc0.ln1.g", "dec0.attn.bq"):
            tensor = weights.params[name]
            for flat in range(tensor.size):
                idx = np.unravel_index(flat, tensor.shape)
                saved = tensor[idx]
                tensor[idx] = saved + eps
                up, _ = mse_loss(forward(weights, x)[0], target)
                tensor[idx] = saved - eps
                down, _ = mse_loss(forward(weights, x)[0], target)
                tensor[idx] = saved
                numeric = (up - down) / (2.0 * eps)
                assert grads[name][idx] == pytest.approx(numeric, abs=1e-6), name


class TestParameterShapes:
    def test_order_starts_with_input_and_ends_with_head(self):
        names = [name for name, _ in parameter_shapes(tiny_config())]
        assert names[0] == "input.w" and names[1] == "input.b"
        assert names[-2] == "head.w" and names[-1] == "head.b"
        assert len(names) == len(set(names))

    def test_initialized_weights_cover_every_shape(self):
        config = tiny_config()
        weights = init_weights(config, seed=18)
        for name, shape in parameter_shapes(config):
            assert weights.params[name].shape == shape
        assert np.array_equal(weights.params["enc0.ln1.g"], np.ones(8))
        assert not weights.params["enc0.ln1.b"].any()

    def test_same_seed_same_weights(self):
        a = init_weights(tiny_config(), seed=19)
        b = init_weights(tiny_config(), seed=19)
        assert all(np.array_equal(a.params[k], b.params[k]) for k in a.params)
