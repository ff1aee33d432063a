# ABOUTME: Tests for the edgesched command line
# ABOUTME: generate/train/evaluate/solve/ablate-padding end to end, plus exit codes for bad input

import json

import pytest
from typer.testing import CliRunner

from edgesched.cli import app
from edgesched.datagen import load_dataset
from edgesched.nn.checkpoint import load_checkpoint
from edgesched.report import read_report
from tests.conftest import parse_output

runner = CliRunner()


def invoke(*args, **kwargs):
    return runner.invoke(app, [str(a) for a in args], **kwargs)


@pytest.fixture
def generated(tmp_path, small_config):
    data = tmp_path / "data"
    result = invoke("generate", "--out", data, "--config", small_config)
    assert result.exit_code == 0, result.output
    return data


@pytest.fixture
def trained(tmp_path, small_config, generated):
    paths = {}
    for net in ("offload", "resource"):
        path = tmp_path / "ckpt" / f"{net}.json"
        result = invoke(
            "train", "--net", net, "--data", generated, "--out", path, "--config", small_config
        )
        assert result.exit_code == 0, result.output
        paths[net] = path
    return paths


@pytest.fixture
def instance_file(tmp_path):
    path = tmp_path / "instance.json"
    tasks = [[5e5, 2e9, 5e6, 1e-6], [2e5, 5e8, 1e5, 1e-7], [8e5, 1.5e9, 3e7, 3e-6]]
    path.write_text(json.dumps({"tasks": tasks}))
    return path


class TestGenerate:
    """Test dataset generation."""

    def test_writes_dataset(self, generated, small_config):
        manifest, records = load_dataset(generated)
        assert manifest.counts == {"4": 8}
        assert len(records) == 8

    def test_summary(self, tmp_path, small_config):
        result = invoke(
            "generate", "--out", tmp_path / "d", "--config", small_config, "--count", "2"
        )
        assert result.exit_code == 0
        summary = parse_output(result.stdout)
        assert summary["counts"] == {"4": 2}
        assert summary["failures"] == 0
        assert summary["solver"] == "ga"

    def test_count_above_n_bar(self, tmp_path):
        config = tmp_path / "big.json"
        config.write_text(json.dumps({"distribution": {"n_values": [41]}}))
        result = invoke("generate", "--out", tmp_path / "d", "--config", config)
        assert result.exit_code == 2
        assert parse_output(result.output)["type"] == "ConfigError"

    def test_unknown_solver(self, tmp_path, small_config):
        result = invoke(
            "generate", "--out", tmp_path / "d", "--config", small_config, "--solver", "lp"
        )
        assert result.exit_code == 2


class TestTrain:
    """Test network training."""

    def test_writes_checkpoint_and_curve(self, trained):
        ckpt = load_checkpoint(trained["offload"])
        assert set(ckpt.networks) == {"offload"}
        assert ckpt.training["net"] == "offload"
        assert ckpt.extender.n_bar == 8
        curve = trained["offload"].with_name("offload.offload.curve.csv")
        assert curve.read_text().startswith("epoch,train_loss")

    def test_baseline_pair(self, tmp_path, small_config, generated):
        path = tmp_path / "mlp.json"
        result = invoke(
            "train", "--net", "mlp", "--data", generated, "--out", path, "--config", small_config
        )
        assert result.exit_code == 0, result.output
        summary = parse_output(result.stdout)
        assert summary["offload"]["backbone"] == "mlp"
        assert set(load_checkpoint(path).networks) == {"offload", "resource"}

    def test_unknown_net(self, tmp_path, generated):
        result = invoke("train", "--net", "cnn", "--data", generated, "--out", tmp_path / "x")
        assert result.exit_code == 2

    def test_missing_dataset(self, tmp_path, small_config):
        result = invoke(
            "train", "--net", "offload", "--data", tmp_path / "nowhere",
            "--out", tmp_path / "x.json", "--config", small_config,
        )
        assert result.exit_code == 3
        assert parse_output(result.output)["type"] == "DatasetError"


class TestEvaluate:
    """Test method evaluation."""

    def test_reference_methods(self, tmp_path, small_config, generated):
        out = tmp_path / "reports" / "report.csv"
        result = invoke(
            "evaluate", "--data", generated, "--out", out, "--config", small_config,
            "--methods", "all-local,all-offload,oracle",
        )
        assert result.exit_code == 0, result.output
        rows = read_report(out)
        assert [r.method for r in rows] == ["all-local", "all-offload", "oracle"]
        assert rows[2].mean_gap_vs_oracle == pytest.approx(0.0, abs=1e-9)
        assert (tmp_path / "reports" / "plots" / "utility_vs_n_oracle.txt").exists()

    def test_learned_methods_and_sweeps(self, tmp_path, small_config, generated, trained):
        out = tmp_path / "report.csv"
        result = invoke(
            "evaluate", "--data", generated, "--out", out, "--config", small_config,
            "--methods", "tsnet-sac,tsnet,all-local",
            "--ckpt", trained["offload"], "--ckpt", trained["resource"],
        )
        assert result.exit_code == 0, result.output
        summary = parse_output(result.stdout)
        assert summary["sac_dominance_violations"] == 0
        assert [row["method"] for row in summary["rows"]] == ["tsnet-sac", "tsnet", "all-local"]
        names = {p.rsplit("/", 1)[-1] for p in summary["plot_files"]}
        assert {"sac_gain_vs_k.txt", "utility_vs_sigma.txt"} <= names

    def test_learned_method_without_checkpoint(self, tmp_path, small_config, generated):
        result = invoke(
            "evaluate", "--data", generated, "--out", tmp_path / "r.csv",
            "--config", small_config, "--methods", "tsnet-sac",
        )
        assert result.exit_code == 2
        assert parse_output(result.output)["type"] == "MissingCheckpointError"

    def test_dataset_larger_than_n_bar(self, tmp_path, generated):
        config = tmp_path / "narrow.json"
        narrow = {
            "params": {"n_bar": 2},
            "extender": {"n_bar": 2},
            "distribution": {"n_values": [2]},
            "sac": {"k": 1},
            "eval": {"k_sweep": [1]},
        }
        config.write_text(json.dumps(narrow))
        result = invoke(
            "evaluate", "--data", generated, "--out", tmp_path / "r.csv",
            "--config", config, "--methods", "all-local",
        )
        assert result.exit_code == 2
        assert parse_output(result.output)["type"] == "InvalidArgumentError"

    def test_sweep_error_is_reported(self, tmp_path, small_config, generated, trained):
        # the checkpoints pad to 8 rows, so k = 16 has no valid offsets
        document = json.loads(small_config.read_text())
        document["extender"]["n_bar"] = 16
        document["eval"]["k_sweep"] = [1, 16]
        config = tmp_path / "wide.json"
        config.write_text(json.dumps(document))
        result = invoke(
            "evaluate", "--data", generated, "--out", tmp_path / "r.csv",
            "--config", config, "--methods", "tsnet-sac",
            "--ckpt", trained["offload"], "--ckpt", trained["resource"],
        )
        assert result.exit_code == 2
        assert parse_output(result.output)["type"] == "InvalidArgumentError"

    def test_unknown_method(self, tmp_path, small_config, generated):
        result = invoke(
            "evaluate", "--data", generated, "--out", tmp_path / "r.csv",
            "--config", small_config, "--methods", "greedy",
        )
        assert result.exit_code == 2
        assert parse_output(result.output)["type"] == "InvalidArgumentError"


class TestSolve:
    """Test single-instance scheduling."""

    def test_reference_method(self, instance_file):
        result = invoke("solve", "--instance", instance_file, "--method", "all-local")
        assert result.exit_code == 0, result.output
        answer = parse_output(result.stdout)
        assert answer["method"] == "all-local"
        assert answer["schedule"]["m"] == [0, 0, 0]
        assert answer["report"]["feasible"]

    def test_tsnet_sac(self, instance_file, small_config, trained):
        result = invoke(
            "solve", "--instance", instance_file, "--config", small_config,
            "--ckpt", trained["offload"], "--ckpt", trained["resource"],
        )
        assert result.exit_code == 0, result.output
        answer = parse_output(result.stdout)
        assert answer["method"] == "tsnet-sac"
        assert len(answer["schedule"]["m"]) == 3

    def test_missing_checkpoint_file(self, tmp_path, instance_file):
        result = invoke(
            "solve", "--instance", instance_file, "--ckpt", tmp_path / "absent.json"
        )
        assert result.exit_code == 2

    def test_malformed_instance(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"tasks": [[1.0, -2.0, 3.0, 1e-6]]}))
        result = invoke("solve", "--instance", path, "--method", "all-local")
        assert result.exit_code == 2
        assert parse_output(result.output)["type"] == "InvalidArgumentError"

    def test_more_tasks_than_n_bar(self, tmp_path):
        path = tmp_path / "crowded.json"
        path.write_text(json.dumps({"tasks": [[1e5, 1e9, 1e4, 1e-6]] * 41}))
        result = invoke("solve", "--instance", path, "--method", "all-local")
        assert result.exit_code == 2
        assert parse_output(result.output)["type"] == "InvalidArgumentError"

    def test_too_many_tasks_for_the_oracle(self, tmp_path):
        path = tmp_path / "big.json"
        path.write_text(json.dumps({"tasks": [[1e5, 1e9, 1e4, 1e-6]] * 17}))
        result = invoke("solve", "--instance", path, "--method", "oracle")
        assert result.exit_code == 2
        assert parse_output(result.output)["type"] == "ProblemTooLargeError"


def test_ablate_padding(tmp_path, small_config, generated):
    out = tmp_path / "ablation.csv"
    result = invoke("ablate-padding", "--data", generated, "--out", out, "--config", small_config)
    assert result.exit_code == 0, result.output
    rows = parse_output(result.stdout)["rows"]
    assert {row["pad_mode"] for row in rows} == {"outlier", "zero", "random"}
    assert out.read_text().startswith("pad_mode,n,offload_accuracy")


def test_invalid_log_level_from_environment(instance_file):
    result = invoke(
        "solve", "--instance", instance_file, "--method", "all-local",
        env={"EDGESCHED_LOG_LEVEL": "CHATTY"},
    )
    assert result.exit_code == 2
