# ABOUTME: Evaluation harness: runs named schedulers over labeled instances and aggregates metrics
# ABOUTME: Also the SAC k and threshold sweeps, coupling comparison, and pad-mode ablation

import logging
import time
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from edgesched.config import EvalConfig
from edgesched.datagen import Normalizer
from edgesched.model import check_constraints, evaluate
from edgesched.nn.networks import NetConfig, SchedulerNet
from edgesched.nn.training import TrainConfig, encode_offload, train_network, validate
from edgesched.oracle import enumerate_optimal
from edgesched.report import EvalRow, write_series, write_table
from edgesched.scheduling.baselines import LEARNED_METHODS, SchedulerContext, baseline_schedule
from edgesched.scheduling.extender import ExtenderConfig, PadMode
from edgesched.scheduling.sac import (
    SacConfig,
    TwoStageNet,
    allocation_to_unit,
    tsnet_sac_schedule,
)
from edgesched.types import LabeledInstance, Schedule, SystemParams

logger = logging.getLogger(__name__)

PAD_MODES: tuple[PadMode, ...] = ("outlier", "zero", "random")


@dataclass(frozen=True)
class Outcome:
    """One method's result on one instance."""

    method: str
    n: int
    utility: float
    latency_s: float
    violations: int
    gap_vs_label: float
    gap_vs_oracle: float | None
    accuracy: float
    sq_errors: tuple[float, float, float]
    error_tasks: int


@dataclass
class EvalResults:
    rows: list[EvalRow] = field(default_factory=list)
    outcomes: list[Outcome] = field(default_factory=list)

    def utilities(self, method: str) -> list[float]:
        return [o.utility for o in self.outcomes if o.method == method]


def relative_gap(value: float, reference: float) -> float:
    return (value - reference) / abs(reference) if reference != 0 else value - reference


def _allocation_errors(
    schedule: Schedule, label: Schedule, params: SystemParams
) -> tuple[tuple[float, float, float], int]:
    """Summed squared errors on [0, 1]-mapped allocations over tasks both offload."""
    pred, true = schedule.arrays(), label.arrays()
    both = (pred["m"] == 1) & (true["m"] == 1)
    if not both.any():
        return (0.0, 0.0, 0.0), 0
    keys = ("p_ul", "p_dl", "f_ap")
    a = allocation_to_unit(np.stack([pred[k][both] for k in keys], axis=1), params)
    b = allocation_to_unit(np.stack([true[k][both] for k in keys], axis=1), params)
    sq = ((a - b) ** 2).sum(axis=0)
    return (float(sq[0]), float(sq[1]), float(sq[2])), int(both.sum())


def _evaluate_record(
    job: tuple[LabeledInstance, Sequence[str], SchedulerContext, int],
) -> list[Outcome]:
    record, methods, ctx, oracle_max_n = job
    instance, params = record.instance, ctx.params
    oracle_u = None
    if instance.n <= oracle_max_n:
        oracle_u = evaluate(instance, enumerate_optimal(instance, params, ctx.oracle), params).U

    outcomes: list[Outcome] = []
    label_m = np.asarray(record.schedule.m)
    for method in methods:
        start = time.perf_counter()
        schedule = baseline_schedule(method, instance, ctx)
        elapsed = time.perf_counter() - start
        u = evaluate(instance, schedule, params).U
        sq_errors, error_tasks = _allocation_errors(schedule, record.schedule, params)
        outcomes.append(
            Outcome(
                method=method,
                n=instance.n,
                utility=u,
                latency_s=elapsed,
                violations=len(check_constraints(schedule, params).violations),
                gap_vs_label=relative_gap(u, record.utility),
                gap_vs_oracle=relative_gap(u, oracle_u) if oracle_u is not None else None,
                accuracy=float(np.mean(np.asarray(schedule.m) == label_m)),
                sq_errors=sq_errors,
                error_tasks=error_tasks,
            )
        )
    return outcomes


def _mean_or_none(values: list[float | None]) -> float | None:
    kept = [v for v in values if v is not None]
    return float(np.mean(kept)) if kept else None


def aggregate(outcomes: Sequence[Outcome]) -> list[EvalRow]:
    """One row per (method, N), in first-seen method order and ascending N."""
    groups: dict[tuple[str, int], list[Outcome]] = defaultdict(list)
    for o in outcomes:
        groups[(o.method, o.n)].append(o)
    method_order = list(dict.fromkeys(o.method for o in outcomes))

    rows: list[EvalRow] = []
    for method in method_order:
        for n in sorted(n for m, n in groups if m == method):
            group = groups[(method, n)]
            tasks = sum(o.error_tasks for o in group)
            mse = np.sum([o.sq_errors for o in group], axis=0) / tasks if tasks else None
            rows.append(
                EvalRow(
                    method=method,
                    n=n,
                    instances=len(group),
                    mean_utility=float(np.mean([o.utility for o in group])),
                    mean_gap_vs_label=float(np.mean([o.gap_vs_label for o in group])),
                    mean_gap_vs_oracle=_mean_or_none([o.gap_vs_oracle for o in group]),
                    offload_accuracy=float(np.mean([o.accuracy for o in group])),
                    mse_p_ul=float(mse[0]) if mse is not None else None,
                    mse_p_dl=float(mse[1]) if mse is not None else None,
                    mse_f_ap=float(mse[2]) if mse is not None else None,
                    latency_ms=1e3 * float(np.mean([o.latency_s for o in group])),
                    violations=sum(o.violations for o in group),
                )
            )
    return rows


def evaluate_methods(
    records: Sequence[LabeledInstance],
    ctx: SchedulerContext,
    methods: Sequence[str],
    eval_cfg: EvalConfig,
) -> EvalResults:
    """Run every method on every record; results are independent of the worker count."""
    jobs = [(r, list(methods), ctx, eval_cfg.oracle_max_n) for r in records]
    if eval_cfg.workers <= 1 or len(jobs) <= 1:
        per_record = [_evaluate_record(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=eval_cfg.workers) as pool:
            per_record = list(pool.map(_evaluate_record, jobs))
    outcomes = [o for batch in per_record for o in batch]
    logger.info(f"Evaluated {len(methods)} method(s) on {len(records)} instances")
    return EvalResults(rows=aggregate(outcomes), outcomes=outcomes)


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------


def _by_n(records: Sequence[LabeledInstance]) -> dict[int, list[LabeledInstance]]:
    groups: dict[int, list[LabeledInstance]] = defaultdict(list)
    for r in records:
        groups[r.instance.n].append(r)
    return dict(sorted(groups.items()))


def sac_k_sweep(
    records: Sequence[LabeledInstance],
    nets: TwoStageNet,
    params: SystemParams,
    sac: SacConfig,
    ks: Sequence[int],
) -> list[tuple[int, int, float, float]]:
    """Rows (n, k, mean utility, mean relative gain over the unshifted prediction)."""
    rows: list[tuple[int, int, float, float]] = []
    for n, group in _by_n(records).items():
        plain = sac.model_copy(update={"k": 1})
        base = [tsnet_sac_schedule(nets, r.instance, params, plain).utility for r in group]
        for k in ks:
            cfg = sac.model_copy(update={"k": k})
            utils = [tsnet_sac_schedule(nets, r.instance, params, cfg).utility for r in group]
            gains = [(b - u) / abs(b) for b, u in zip(base, utils)]
            rows.append((n, k, float(np.mean(utils)), float(np.mean(gains))))
    return rows


def sigma_sweep(
    records: Sequence[LabeledInstance],
    nets: TwoStageNet,
    params: SystemParams,
    sac: SacConfig,
    sigmas: Sequence[float],
) -> list[tuple[int, float, float]]:
    """Rows (n, sigma, mean utility) at the configured shift count."""
    rows: list[tuple[int, float, float]] = []
    for n, group in _by_n(records).items():
        for sigma in sigmas:
            cfg = sac.model_copy(update={"sigma": sigma})
            utils = [tsnet_sac_schedule(nets, r.instance, params, cfg).utility for r in group]
            rows.append((n, sigma, float(np.mean(utils))))
    return rows


def sac_dominance_violations(results: EvalResults) -> int:
    """Instances where the shifted candidates did worse than the plain prediction."""
    sac, plain = results.utilities("tsnet-sac"), results.utilities("tsnet")
    if not sac or not plain:
        return 0
    return sum(1 for s, p in zip(sac, plain) if s > p * (1 + 1e-12) + 1e-15)


def coupling_comparison(
    records: Sequence[LabeledInstance],
    variants: dict[str, TwoStageNet],
    params: SystemParams,
    sac: SacConfig,
) -> list[tuple[str, int, float, float | None]]:
    """Rows (coupling, n, mean utility, resource MSE vs labels) per ResourceNet variant."""
    rows: list[tuple[str, int, float, float | None]] = []
    for name, nets in variants.items():
        for n, group in _by_n(records).items():
            utils: list[float] = []
            sq, tasks = 0.0, 0
            for r in group:
                schedule = tsnet_sac_schedule(nets, r.instance, params, sac).schedule
                utils.append(evaluate(r.instance, schedule, params).U)
                errors, count = _allocation_errors(schedule, r.schedule, params)
                sq += sum(errors)
                tasks += count
            rows.append((name, n, float(np.mean(utils)), sq / (3 * tasks) if tasks else None))
    return rows


def pad_mode_ablation(
    train_records: Sequence[LabeledInstance],
    val_records: Sequence[LabeledInstance],
    normalizer: Normalizer,
    params: SystemParams,
    net_cfg: NetConfig,
    ext_cfg: ExtenderConfig,
    train_cfg: TrainConfig,
    modes: Sequence[PadMode] = PAD_MODES,
) -> list[tuple[str, int, float]]:
    """Train one OffloadNet per pad mode; rows (mode, n, held-out accuracy), n = 0 for all."""
    rows: list[tuple[str, int, float]] = []
    for mode in modes:
        ext = ext_cfg.model_copy(update={"pad_mode": mode})
        run = train_network("offload", train_records, normalizer, params, net_cfg, ext, train_cfg)
        rows.append((mode, 0, _offload_accuracy(run.net, val_records, normalizer, ext)))
        for n, group in _by_n(val_records).items():
            rows.append((mode, n, _offload_accuracy(run.net, group, normalizer, ext)))
        logger.info(f"Pad mode {mode}: held-out accuracy {rows[-1][2]:.4f}")
    return rows


def _offload_accuracy(
    net: SchedulerNet,
    records: Sequence[LabeledInstance],
    normalizer: Normalizer,
    ext: ExtenderConfig,
) -> float:
    _, accuracy = validate(net, encode_offload(records, normalizer, ext))
    return accuracy


# ---------------------------------------------------------------------------
# plot data
# ---------------------------------------------------------------------------


def write_plot_data(
    out_dir: Path,
    results: EvalResults,
    k_rows: Sequence[tuple[int, int, float, float]] = (),
    sigma_rows: Sequence[tuple[int, float, float]] = (),
) -> list[Path]:
    """Numeric text series: utility and accuracy vs N per method, SAC gain vs k, sigma sweep."""
    written: list[Path] = []
    for method in dict.fromkeys(row.method for row in results.rows):
        rows = [r for r in results.rows if r.method == method]
        path = out_dir / f"utility_vs_n_{method}.txt"
        write_series(path, ("n", "mean_utility"), [(r.n, r.mean_utility) for r in rows])
        written.append(path)
        if method in LEARNED_METHODS or method in ("ga", "oracle"):
            path = out_dir / f"accuracy_vs_n_{method}.txt"
            write_series(
                path, ("n", "offload_accuracy"), [(r.n, r.offload_accuracy) for r in rows]
            )
            written.append(path)
    if k_rows:
        path = out_dir / "sac_gain_vs_k.txt"
        write_series(path, ("n", "k", "mean_gain"), [(n, k, g) for n, k, _, g in k_rows])
        written.append(path)
    if sigma_rows:
        path = out_dir / "utility_vs_sigma.txt"
        write_series(path, ("n", "sigma", "mean_utility"), sigma_rows)
        written.append(path)
    return written


def write_ablation(path: Path, rows: Sequence[tuple[str, int, float]]) -> None:
    write_table(path, ("pad_mode", "n", "offload_accuracy"), rows)


def write_coupling(path: Path, rows: Sequence[tuple[str, int, float, float | None]]) -> None:
    write_table(path, ("coupling", "n", "mean_utility", "resource_mse"), rows)
