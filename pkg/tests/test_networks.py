# ABOUTME: Tests for OffloadNet and ResourceNet construction and forward passes
# ABOUTME: Parameter counts, output ranges, equivariance, attention maps, and shape errors

import numpy as np
import pytest
from pydantic import ValidationError

from edgesched.exceptions import InvalidArgumentError, ShapeError
from edgesched.nn.networks import NetConfig, SchedulerNet, build_network, input_features


class TestNetConfig:
    """Test architecture validation."""

    def test_defaults(self):
        cfg = NetConfig()
        assert (cfg.embed_dim, cfg.encoder_layers, cfg.head_count) == (32, 2, 4)
        assert cfg.coupling == "dot"
        assert not cfg.positional_encoding

    def test_heads_must_divide_width(self):
        with pytest.raises(ValidationError):
            NetConfig(embed_dim=30, head_count=4)

    def test_concat_adds_a_feature(self):
        assert input_features("resource", NetConfig(coupling="concat")) == 5
        assert input_features("offload", NetConfig(coupling="concat")) == 4


class TestParameterCounts:
    """Test the default architecture sizes."""

    def test_offload_net(self):
        assert build_network("offload", NetConfig(), 40).num_parameters() == 19457

    def test_resource_net(self):
        assert build_network("resource", NetConfig(), 40).num_parameters() == 19523

    def test_concat_widens_the_embedding(self):
        net = build_network("resource", NetConfig(coupling="concat"), 40)
        assert net.num_parameters() == 19523 + 32

    def test_same_seed_same_weights(self):
        a = build_network("offload", NetConfig(seed=5), 10)
        b = build_network("offload", NetConfig(seed=5), 10)
        assert all(
            np.array_equal(p, q)
            for (_, p, _), (_, q, _) in zip(a.named_parameters(), b.named_parameters())
        )


class TestForward:
    """Test output shapes and ranges."""

    @pytest.fixture
    def small(self):
        return NetConfig(embed_dim=8, encoder_layers=2, head_count=2, ffn_dim=16)

    @pytest.mark.parametrize("backbone", ["transformer", "mlp", "mixer"])
    def test_output_shapes(self, small, backbone):
        cfg = small.model_copy(update={"backbone": backbone})
        x = np.random.default_rng(0).random((3, 10, 4))
        assert SchedulerNet("offload", cfg, 10).predict(x).shape == (3, 10)
        assert SchedulerNet("resource", cfg, 10).predict(x).shape == (3, 10, 3)

    def test_outputs_are_probabilities(self, small):
        x = np.random.default_rng(1).random((2, 10, 4))
        out = SchedulerNet("resource", small, 10).predict(x)
        assert np.all((out > 0.0) & (out < 1.0))

    def test_all_zero_input_is_finite(self, small):
        out = SchedulerNet("offload", small, 10).predict(np.zeros((1, 10, 4)))
        assert np.all(np.isfinite(out))

    def test_equivariant_without_positional_encoding(self, small):
        net = SchedulerNet("offload", small, 10)
        x = np.random.default_rng(2).random((1, 10, 4))
        perm = np.random.default_rng(3).permutation(10)
        np.testing.assert_allclose(net.predict(x[:, perm]), net.predict(x)[:, perm], atol=1e-12)

    def test_positional_encoding_breaks_equivariance(self, small):
        net = SchedulerNet("offload", small.model_copy(update={"positional_encoding": True}), 10)
        x = np.random.default_rng(2).random((1, 10, 4))
        perm = np.roll(np.arange(10), 1)
        assert not np.allclose(net.predict(x[:, perm]), net.predict(x)[:, perm])

    def test_attention_maps(self, small):
        net = SchedulerNet("offload", small, 10)
        net.predict(np.random.default_rng(4).random((2, 10, 4)))
        maps = net.attention_maps()
        assert len(maps) == 2
        assert maps[0].shape == (2, 2, 10, 10)
        np.testing.assert_allclose(maps[0].sum(axis=-1), 1.0)

    def test_mlp_has_no_attention(self, small):
        net = SchedulerNet("offload", small.model_copy(update={"backbone": "mlp"}), 10)
        net.predict(np.zeros((1, 10, 4)))
        assert net.attention_maps() == []


class TestShapeErrors:
    """Test rejected inputs."""

    @pytest.fixture
    def net(self):
        return SchedulerNet("offload", NetConfig(embed_dim=8, head_count=2), 6)

    def test_wrong_feature_count(self, net):
        with pytest.raises(ShapeError):
            net.predict(np.zeros((1, 6, 5)))

    def test_sequence_longer_than_n_bar(self, net):
        with pytest.raises(ShapeError):
            net.predict(np.zeros((1, 7, 4)))

    def test_unbatched_input(self, net):
        with pytest.raises(ShapeError):
            net.predict(np.zeros((6, 4)))

    def test_non_positive_n_bar(self):
        with pytest.raises(InvalidArgumentError):
            SchedulerNet("offload", NetConfig(), 0)
