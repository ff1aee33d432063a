# ABOUTME: Tests for checkpoint bundles
# ABOUTME: Save/load fidelity, merging bundles, and rejection of missing or malformed files

import json

import numpy as np
import pytest

from edgesched.exceptions import CheckpointError, MissingCheckpointError
from edgesched.nn.checkpoint import (
    CHECKPOINT_FORMAT,
    Checkpoint,
    load_checkpoint,
    save_checkpoint,
)
from edgesched.nn.networks import build_network
from tests.conftest import SMALL_EXT, SMALL_NET


@pytest.fixture
def bundle(untrained_nets):
    return Checkpoint(
        {"offload": untrained_nets.offload, "resource": untrained_nets.resource},
        untrained_nets.normalizer,
        untrained_nets.extender,
        training={"epochs": 3},
    )


class TestRoundTrip:
    """Test saving then loading a bundle."""

    def test_outputs_are_identical(self, tmp_path, bundle):
        path = tmp_path / "ckpt.json"
        save_checkpoint(path, bundle)
        loaded = load_checkpoint(path)
        x = np.random.default_rng(0).random((2, SMALL_EXT.n_bar, 4))
        for kind in ("offload", "resource"):
            np.testing.assert_array_equal(
                loaded.network(kind).predict(x), bundle.network(kind).predict(x)
            )

    def test_pipeline_state_survives(self, tmp_path, bundle):
        path = tmp_path / "nested" / "ckpt.json"
        save_checkpoint(path, bundle)
        loaded = load_checkpoint(path)
        assert loaded.normalizer == bundle.normalizer
        assert loaded.extender == bundle.extender
        assert loaded.training == {"epochs": 3}
        assert loaded.backbone == "transformer"
        assert loaded.network("offload").cfg == SMALL_NET

    def test_saving_twice_is_byte_identical(self, tmp_path, bundle):
        save_checkpoint(tmp_path / "a.json", bundle)
        save_checkpoint(tmp_path / "b.json", bundle)
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


class TestMerge:
    """Test combining single-network bundles."""

    def test_merged_holds_both_kinds(self, bundle):
        only_offload = Checkpoint(
            {"offload": bundle.network("offload")}, bundle.normalizer, bundle.extender
        )
        only_resource = Checkpoint(
            {"resource": bundle.network("resource")}, bundle.normalizer, bundle.extender
        )
        merged = only_offload.merged(only_resource)
        assert set(merged.networks) == {"offload", "resource"}

    def test_later_bundle_wins(self, bundle):
        replacement = build_network("offload", SMALL_NET.model_copy(update={"seed": 9}), 8)
        other = Checkpoint({"offload": replacement}, bundle.normalizer, bundle.extender)
        assert bundle.merged(other).network("offload") is replacement

    def test_missing_kind(self, bundle):
        partial = Checkpoint(
            {"offload": bundle.network("offload")}, bundle.normalizer, bundle.extender
        )
        with pytest.raises(MissingCheckpointError):
            partial.network("resource")


class TestLoadErrors:
    """Test rejected checkpoint files."""

    def test_missing_file(self, tmp_path):
        with pytest.raises(MissingCheckpointError):
            load_checkpoint(tmp_path / "absent.json")

    def test_not_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("weights")
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_wrong_format_tag(self, tmp_path):
        path = tmp_path / "other.json"
        path.write_text(json.dumps({"format": "something-else", "version": 1}))
        with pytest.raises(CheckpointError, match="not an edgesched checkpoint"):
            load_checkpoint(path)

    def test_future_version(self, tmp_path, bundle):
        path = tmp_path / "ckpt.json"
        save_checkpoint(path, bundle)
        raw = json.loads(path.read_text())
        raw["version"] = 99
        path.write_text(json.dumps(raw))
        with pytest.raises(CheckpointError, match="version"):
            load_checkpoint(path)

    def test_tampered_shape(self, tmp_path, bundle):
        path = tmp_path / "ckpt.json"
        save_checkpoint(path, bundle)
        raw = json.loads(path.read_text())
        assert raw["format"] == CHECKPOINT_FORMAT
        stored = raw["networks"][0]["params"]
        name = next(iter(stored))
        stored[name]["shape"] = [1, 1]
        stored[name]["values"] = [0.0]
        path.write_text(json.dumps(raw))
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_missing_checkpoint_maps_to_argument_exit_code(self):
        assert MissingCheckpointError.exit_code == 2
        assert CheckpointError.exit_code == 3
