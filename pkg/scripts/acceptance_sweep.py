#!/usr/bin/env python3
# ABOUTME: Desk-scale acceptance sweep for edgesched
# ABOUTME: Runs the statistical checks too slow for the unit suite and prints a summary

"""Acceptance sweep.

Labels seeded instances with the GA and the exact enumerator, verifies every
gradient, trains a small two-stage network, and checks the sliding-candidate
properties (dominance, gain, k-sweep shape), schedule feasibility and decision
latency against the GA.

Usage:
    uv run python scripts/acceptance_sweep.py
    uv run python scripts/acceptance_sweep.py --quick          # smaller sample sizes
    uv run python scripts/acceptance_sweep.py --skip-training  # solver and gradient checks only
    uv run python scripts/acceptance_sweep.py --json           # machine-readable output
"""

import argparse
import json
import sys
import time
from pathlib import Path
from typing import Any

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from edgesched.datagen import (  # noqa: E402
    InstanceDistribution,
    fit_normalizer,
    instance_seed,
    sample_instance,
    split_records,
)
from edgesched.ga import GaConfig, ga_solve, ga_solve_batch  # noqa: E402
from edgesched.model import check_constraints, evaluate  # noqa: E402
from edgesched.nn.gradcheck import grad_check  # noqa: E402
from edgesched.nn.layers import (  # noqa: E402
    EncoderLayer,
    LayerNorm,
    Linear,
    MixerBlock,
    MlpBlock,
    MultiHeadSelfAttention,
)
from edgesched.nn.networks import NetConfig, SchedulerNet  # noqa: E402
from edgesched.nn.training import TrainConfig, train_network  # noqa: E402
from edgesched.oracle import enumerate_optimal  # noqa: E402
from edgesched.scheduling.baselines import all_offload_schedule  # noqa: E402
from edgesched.scheduling.extender import ExtenderConfig, pad, unpad  # noqa: E402
from edgesched.scheduling.sac import (  # noqa: E402
    SacConfig,
    TwoStageNet,
    tsnet_sac_schedule,
)
from edgesched.types import LabeledInstance, SystemParams  # noqa: E402

K_SWEEP = (1, 5, 10, 20, 40)


def oracle_agreement(params: SystemParams, per_n: int) -> dict[str, Any]:
    dist = InstanceDistribution.mixed()
    gaps = []
    for n in (4, 6, 8):
        for j in range(per_n):
            inst = sample_instance(dist, n, instance_seed(0, n, j))
            ga_u = ga_solve(inst, params, GaConfig()).utility
            oracle_u = evaluate(inst, enumerate_optimal(inst, params), params).U
            gaps.append((ga_u - oracle_u) / oracle_u)
    within = sum(1 for g in gaps if g <= 0.01)
    return {
        "instances": len(gaps),
        "within_1pct": within,
        "mean_gap": float(np.mean(gaps)),
        "passed": within >= 0.95 * len(gaps),
    }


def ga_degradation(params: SystemParams, count: int) -> dict[str, Any]:
    dist = InstanceDistribution.mixed()
    cfg = GaConfig(generations=30)

    def mean_gap(n: int) -> float:
        gaps = []
        for j in range(count):
            inst = sample_instance(dist, n, instance_seed(1, n, j))
            ga_u = ga_solve(inst, params, cfg.model_copy(update={"seed": j})).utility
            oracle_u = evaluate(inst, enumerate_optimal(inst, params), params).U
            gaps.append((ga_u - oracle_u) / oracle_u)
        return float(np.mean(gaps))

    small, large = mean_gap(6), mean_gap(16)
    return {"gap_n6": small, "gap_n16": large, "passed": large > small}


def gradient_checks() -> dict[str, Any]:
    rng = np.random.default_rng(0)
    x = rng.normal(size=(2, 6, 8))
    modules = {
        "linear": Linear(8, 4, rng),
        "layer-norm": LayerNorm(8),
        "attention": MultiHeadSelfAttention(8, 2, rng),
        "encoder": EncoderLayer(8, 2, 16, 0.0, rng),
        "mixer": MixerBlock(6, 8, 12, 16, rng),
        "mlp": MlpBlock(8, 16, rng),
    }
    errors = {name: grad_check(module, x).max_rel_error for name, module in modules.items()}
    cfg = NetConfig(embed_dim=8, encoder_layers=2, head_count=2, ffn_dim=16)
    features = rng.random((2, 6, 4))
    for kind in ("offload", "resource"):
        errors[f"{kind}-net"] = grad_check(SchedulerNet(kind, cfg, 6), features).max_rel_error
    return {"max_rel_error": errors, "passed": max(errors.values()) < 1e-4}


def extender_invariants(cases: int) -> dict[str, Any]:
    rng = np.random.default_rng(0)
    cfg = ExtenderConfig()
    failures = 0
    for _ in range(cases):
        n = int(rng.integers(1, cfg.n_bar + 1))
        features = rng.random((n, 4))
        x, mask = pad(features, cfg)
        if int(mask.sum()) != n or not np.array_equal(unpad(x, mask), features):
            failures += 1
    return {"cases": cases, "failures": failures, "passed": failures == 0}


def train_two_stage(
    records: list[LabeledInstance], params: SystemParams, epochs: int
) -> tuple[TwoStageNet, dict[str, Any]]:
    train, val = split_records(records, 0.1, seed=0)
    normalizer = fit_normalizer(train)
    ext, net_cfg = ExtenderConfig(), NetConfig()
    cfg = TrainConfig(epochs=epochs)
    offload = train_network("offload", train, normalizer, params, net_cfg, ext, cfg, val)
    resource = train_network("resource", train, normalizer, params, net_cfg, ext, cfg, val)
    accuracy = offload.final.val_accuracy if offload.final else None
    mse = resource.final.val_mse if resource.final else None
    summary = {
        "offload_accuracy": accuracy,
        "resource_mse": mse,
        "passed": accuracy is not None and accuracy >= 0.85 and mse is not None and mse <= 0.05,
    }
    return TwoStageNet(offload.net, resource.net, normalizer, ext), summary


def sliding_checks(
    nets: TwoStageNet, records: list[LabeledInstance], params: SystemParams
) -> dict[str, Any]:
    utilities: dict[int, list[float]] = {k: [] for k in K_SWEEP}
    violations = 0
    for r in records:
        for k in K_SWEEP:
            decision = tsnet_sac_schedule(nets, r.instance, params, SacConfig(k=k))
            utilities[k].append(decision.utility)
            violations += len(check_constraints(decision.schedule, params).violations)
    means = {k: float(np.mean(v)) for k, v in utilities.items()}
    plain, sac = np.array(utilities[1]), np.array(utilities[20])
    dominated = bool(np.all(sac <= plain * (1 + 1e-12)))
    gain = float(np.mean((plain - sac) / np.abs(plain)))
    monotone = all(means[a] >= means[b] - 1e-12 for a, b in zip(K_SWEEP, K_SWEEP[1:]))
    diminishing = (means[20] - means[40]) < (means[1] - means[5])
    return {
        "mean_utility_by_k": means,
        "mean_gain_k20": gain,
        "dominance": dominated,
        "violations": violations,
        "passed": dominated and gain > 0 and monotone and diminishing and violations == 0,
    }


def latency(nets: TwoStageNet, params: SystemParams) -> dict[str, Any]:
    inst = sample_instance(InstanceDistribution.mixed(), 40, seed=99)
    start = time.perf_counter()
    tsnet_sac_schedule(nets, inst, params, SacConfig(k=20))
    sac_s = time.perf_counter() - start
    start = time.perf_counter()
    ga_solve(inst, params, GaConfig())
    ga_s = time.perf_counter() - start
    return {"tsnet_sac_ms": 1e3 * sac_s, "ga_ms": 1e3 * ga_s, "passed": ga_s >= 10 * sac_s}


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--quick", action="store_true", help="Use smaller sample sizes")
    parser.add_argument("--skip-training", action="store_true", help="Skip network checks")
    parser.add_argument("--json", action="store_true", help="Output JSON instead of a summary")
    parser.add_argument("--train-instances", type=int, default=5000)
    parser.add_argument("--epochs", type=int, default=30)
    args = parser.parse_args()

    params = SystemParams()
    scale = 0.2 if args.quick else 1.0
    results: dict[str, Any] = {
        "oracle_agreement": oracle_agreement(params, max(4, int(34 * scale))),
        "ga_degradation": ga_degradation(params, max(5, int(50 * scale))),
        "gradient_checks": gradient_checks(),
        "extender_invariants": extender_invariants(int(1000 * scale)),
    }

    if not args.skip_training:
        count = max(50, int(args.train_instances * scale))
        dist = InstanceDistribution.mixed()
        instances = [sample_instance(dist, 10, instance_seed(2, 10, j)) for j in range(count)]
        records = ga_solve_batch(instances, params, GaConfig())
        nets, results["learning"] = train_two_stage(records, params, args.epochs)
        eval_instances = [
            sample_instance(dist, n, instance_seed(3, n, j))
            for n in (10, 20)
            for j in range(max(10, int(100 * scale)))
        ]
        eval_records = ga_solve_batch(eval_instances, params, GaConfig())
        results["sliding"] = sliding_checks(nets, eval_records, params)
        results["all_offload_feasible"] = {
            "passed": all(
                check_constraints(all_offload_schedule(r.instance, params), params).feasible
                for r in eval_records
            )
        }
        results["latency"] = latency(nets, params)

    passed = all(section["passed"] for section in results.values())
    if args.json:
        print(json.dumps({"passed": passed, **results}, indent=2))
    else:
        for name, section in results.items():
            status = "PASS" if section["passed"] else "FAIL"
            details = {k: v for k, v in section.items() if k != "passed"}
            print(f"{status}  {name}  {json.dumps(details)}")
        print()
        print("ALL PASSED" if passed else "SOME CHECKS FAILED")
    return 0 if passed else 1


if __name__ == "__main__":
    sys.exit(main())
