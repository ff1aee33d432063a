# ABOUTME: Pytest fixtures for edgesched tests
# ABOUTME: System params, tiny instances, small GA-labeled datasets, and small trained networks

import json

import pytest

from edgesched.datagen import InstanceDistribution, build_dataset, fit_normalizer, sample_instance
from edgesched.ga import GaConfig, ga_solve
from edgesched.nn.networks import NetConfig, build_network
from edgesched.nn.training import TrainConfig
from edgesched.scheduling.extender import ExtenderConfig
from edgesched.scheduling.sac import TwoStageNet
from edgesched.types import Instance, SystemParams, TaskInfo

SMALL_GA = GaConfig(population_size=16, generations=15, seed=0)
SMALL_NET = NetConfig(embed_dim=8, encoder_layers=1, head_count=2, ffn_dim=16, seed=0)
SMALL_EXT = ExtenderConfig(n_bar=8)


def parse_output(text):
    """First JSON document in CLI output; stderr lines may be interleaved."""
    lines = text.splitlines()
    for i, line in enumerate(lines):
        if line.startswith("{") or line.startswith("["):
            doc, _ = json.JSONDecoder().raw_decode("\n".join(lines[i:]))
            return doc
    raise AssertionError(f"no JSON in output: {text!r}")


@pytest.fixture
def params():
    return SystemParams()


@pytest.fixture
def one_task():
    """A single task with c = 2e9 cycles (1 s locally at 2 GHz)."""
    return Instance(tasks=(TaskInfo.from_quad(5e5, 2e9, 5e4, 1e-6),))


@pytest.fixture
def mixed_dist():
    return InstanceDistribution.mixed(n_values=[4, 6], count_per_n=6, seed=3)


@pytest.fixture
def small_instances(mixed_dist, params):
    return [sample_instance(mixed_dist, 5, seed, params.n_bar) for seed in range(6)]


@pytest.fixture
def labeled(small_instances, params):
    return [ga_solve(inst, params, SMALL_GA) for inst in small_instances]


@pytest.fixture
def dataset_dir(tmp_path, mixed_dist, params):
    path = tmp_path / "data"
    build_dataset(mixed_dist, params, SMALL_GA, mixed_dist.count_per_n, path, val_fraction=0.25)
    return path


@pytest.fixture
def small_train_cfg():
    return TrainConfig(epochs=2, batch_size=4, seed=0)


@pytest.fixture
def untrained_nets(labeled):
    """Freshly initialised two-stage networks over an 8-row extender."""
    return TwoStageNet(
        offload=build_network("offload", SMALL_NET, SMALL_EXT.n_bar),
        resource=build_network("resource", SMALL_NET, SMALL_EXT.n_bar),
        normalizer=fit_normalizer(labeled),
        extender=SMALL_EXT,
    )


@pytest.fixture
def small_config(tmp_path):
    """A tiny run configuration file for CLI tests."""
    cfg = {
        "distribution": {
            "d_range": [1e6, 2e8],
            "n_values": [4],
            "count_per_n": 8,
            "seed": 1,
        },
        "ga": {"population_size": 10, "generations": 5},
        "net": {"embed_dim": 8, "encoder_layers": 1, "head_count": 2, "ffn_dim": 16},
        "extender": {"n_bar": 8},
        "sac": {"k": 4},
        "train": {"epochs": 1, "batch_size": 4, "val_fraction": 0.25},
        "eval": {"k_sweep": [1, 2, 4], "sigma_sweep": [0.3, 0.5], "oracle_max_n": 4},
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path
