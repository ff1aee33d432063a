# ABOUTME: Tests for the numpy layer stack
# ABOUTME: Output shapes, normalization properties, dropout modes, and declarative layer specs

import numpy as np
import pytest
from pydantic import ValidationError

from edgesched.exceptions import InvalidArgumentError, ShapeError
from edgesched.nn.layers import (
    GELU,
    Dropout,
    EncoderLayer,
    FeedForward,
    LayerNorm,
    LayerSpec,
    Linear,
    MixerBlock,
    MlpBlock,
    MultiHeadSelfAttention,
    Sequential,
    Sigmoid,
    build_layer,
    sinusoidal_encoding,
    softmax_rows,
)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def x(rng):
    return rng.normal(size=(2, 5, 8))


class TestElementaryLayers:
    """Test Linear, activations, and LayerNorm."""

    def test_linear_shape(self, rng, x):
        assert Linear(8, 3, rng)(x).shape == (2, 5, 3)

    def test_linear_rejects_wrong_width(self, rng):
        with pytest.raises(ShapeError):
            Linear(8, 3, rng)(np.zeros((2, 5, 7)))

    def test_gelu_fixed_points(self):
        out = GELU()(np.array([0.0, 10.0, -10.0]))
        assert out[0] == 0.0
        assert out[1] == pytest.approx(10.0)
        assert out[2] == pytest.approx(0.0, abs=1e-12)

    def test_sigmoid_range(self):
        out = Sigmoid()(np.array([-50.0, 0.0, 50.0]))
        assert out[1] == 0.5
        assert 0.0 <= out.min() and out.max() <= 1.0

    @pytest.mark.parametrize("scale", [7.0, 1.0, 1e-3])
    def test_layer_norm_statistics(self, x, scale):
        out = LayerNorm(8).normalize(x * scale + 3.0)
        np.testing.assert_allclose(out.mean(axis=-1), 0.0, atol=1e-6)
        np.testing.assert_allclose(out.var(axis=-1), 1.0, atol=1e-6)

    def test_layer_norm_constant_rows(self):
        out = LayerNorm(4)(np.full((1, 2, 4), 5.0))
        np.testing.assert_array_equal(out, 0.0)

    def test_sequential_counts_parameters(self, rng):
        net = Sequential(Linear(4, 6, rng), GELU(), Linear(6, 2, rng))
        assert net.num_parameters() == 4 * 6 + 6 + 6 * 2 + 2
        assert [name for name, _, _ in net.named_parameters()] == ["0.W", "0.b", "2.W", "2.b"]

    def test_zero_grad(self, rng, x):
        ffn = FeedForward(8, 16, rng)
        ffn.backward(np.ones_like(ffn(x)))
        assert any(np.abs(g).sum() > 0 for _, _, g in ffn.named_parameters())
        ffn.zero_grad()
        assert all(np.abs(g).sum() == 0 for _, _, g in ffn.named_parameters())


def test_softmax_rows_sum_to_one():
    z = np.array([[1000.0, 1000.0, -1000.0], [0.0, 1.0, 2.0]])
    probs = softmax_rows(z)
    np.testing.assert_allclose(probs.sum(axis=-1), 1.0)
    assert np.all(np.isfinite(probs))
    assert probs[0, 0] == pytest.approx(0.5)


def test_sinusoidal_encoding_first_row():
    pe = sinusoidal_encoding(4, 6)
    assert pe.shape == (4, 6)
    np.testing.assert_allclose(pe[0], [0.0, 1.0, 0.0, 1.0, 0.0, 1.0])


class TestDropout:
    """Test inverted dropout."""

    def test_identity_in_eval_mode(self, rng, x):
        layer = Dropout(0.5, rng)
        np.testing.assert_array_equal(layer(x), x)

    def test_train_mode_scales_survivors(self, rng):
        layer = Dropout(0.5, rng).train()
        out = layer(np.ones((1, 200, 4)))
        assert set(np.unique(out)) <= {0.0, 2.0}
        assert 0.0 in out and 2.0 in out

    def test_rejects_rate_one(self, rng):
        with pytest.raises(InvalidArgumentError):
            Dropout(1.0, rng)


class TestBlocks:
    """Test attention, encoder, mixer, and per-position blocks."""

    def test_attention_rows_are_distributions(self, rng, x):
        attn = MultiHeadSelfAttention(8, 2, rng)
        assert attn(x).shape == x.shape
        assert attn.attention.shape == (2, 2, 5, 5)
        np.testing.assert_allclose(attn.attention.sum(axis=-1), 1.0)

    def test_attention_rejects_indivisible_heads(self, rng):
        with pytest.raises(InvalidArgumentError):
            MultiHeadSelfAttention(8, 3, rng)

    def test_encoder_is_permutation_equivariant(self, rng, x):
        layer = EncoderLayer(8, 2, 16, 0.0, rng)
        perm = np.array([3, 0, 4, 1, 2])
        np.testing.assert_allclose(layer(x[:, perm]), layer(x)[:, perm], atol=1e-12)

    def test_mixer_needs_fixed_length(self, rng, x):
        block = MixerBlock(5, 8, 6, 16, rng)
        assert block(x).shape == x.shape
        with pytest.raises(ShapeError):
            block(x[:, :4])

    def test_mlp_block_is_position_wise(self, rng, x):
        block = MlpBlock(8, 16, rng)
        out = block(x)
        np.testing.assert_allclose(block(x[:, :1]), out[:, :1], atol=1e-12)


class TestLayerSpec:
    """Test declarative layer construction."""

    def test_builds_each_variant(self, rng):
        specs = [
            LayerSpec(variant="linear", sizes={"in_dim": 4, "out_dim": 2}),
            LayerSpec(variant="layer-norm", sizes={"dim": 4}),
            LayerSpec(variant="multi-head-self-attention", sizes={"dim": 4}, head_count=2),
            LayerSpec(variant="feed-forward", sizes={"dim": 4, "hidden": 8}),
            LayerSpec(
                variant="mixer-block",
                sizes={"tokens": 3, "dim": 4, "token_hidden": 5, "channel_hidden": 6},
            ),
        ]
        kinds = [type(build_layer(s, rng)) for s in specs]
        assert kinds == [Linear, LayerNorm, MultiHeadSelfAttention, FeedForward, MixerBlock]

    def test_missing_size(self):
        with pytest.raises(ValidationError):
            LayerSpec(variant="linear", sizes={"in_dim": 4})

    def test_attention_needs_heads(self):
        with pytest.raises(ValidationError):
            LayerSpec(variant="multi-head-self-attention", sizes={"dim": 4})

    def test_heads_must_divide(self):
        with pytest.raises(ValidationError):
            LayerSpec(variant="multi-head-self-attention", sizes={"dim": 6}, head_count=4)

    def test_unknown_variant(self):
        with pytest.raises(ValidationError):
            LayerSpec(variant="conv", sizes={})
