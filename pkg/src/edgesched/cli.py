# ABOUTME: CLI entry point for edgesched
# ABOUTME: Typer commands to generate datasets, train networks, evaluate methods, solve instances

import json
import logging
import sys
import time
from dataclasses import asdict
from pathlib import Path
from typing import Annotated, Any, Callable, NoReturn, TypeVar

import typer

from edgesched.bench import (
    coupling_comparison,
    evaluate_methods,
    pad_mode_ablation,
    sac_dominance_violations,
    sac_k_sweep,
    sigma_sweep,
    write_ablation,
    write_coupling,
    write_plot_data,
)
from edgesched.config import DEFAULT_LOG_LEVEL, LOG_LEVEL_ENV, WORKERS_ENV, RunConfig, load_config
from edgesched.datagen import (
    DatasetManifest,
    Normalizer,
    build_dataset,
    load_dataset,
    split_records,
)
from edgesched.exceptions import (
    DatasetError,
    EdgeSchedError,
    InvalidArgumentError,
)
from edgesched.model import check_access_count, evaluate
from edgesched.nn.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from edgesched.nn.networks import Backbone, NetKind, SchedulerNet
from edgesched.nn.training import train_network
from edgesched.report import write_report, write_training_curve
from edgesched.scheduling.baselines import (
    LEARNED_METHODS,
    SchedulerContext,
    baseline_schedule,
    check_method,
)
from edgesched.scheduling.sac import TwoStageNet
from edgesched.types import Instance, LabeledInstance, SystemParams

logger = logging.getLogger(__name__)

app = typer.Typer(help="MEC task offloading and resource allocation toolkit")

T = TypeVar("T")

NET_CHOICES: dict[str, list[tuple[NetKind, Backbone]]] = {
    "offload": [("offload", "transformer")],
    "resource": [("resource", "transformer")],
    "mlp": [("offload", "mlp"), ("resource", "mlp")],
    "mixer": [("offload", "mixer"), ("resource", "mixer")],
}

ConfigOption = Annotated[
    Path | None, typer.Option("--config", help="Run configuration JSON (defaults if omitted)")
]
WorkersOption = Annotated[
    int | None,
    typer.Option("--workers", envvar=WORKERS_ENV, min=1, help="Parallel worker processes"),
]
CkptOption = Annotated[
    list[Path] | None, typer.Option("--ckpt", "--ckpts", help="Checkpoint bundle (repeatable)")
]


def _output(data: Any) -> None:
    print(json.dumps(data, indent=2, default=str))


def _error(msg: str, exc_type: str = "Error", code: int = 1) -> NoReturn:
    print(json.dumps({"error": msg, "type": exc_type}), file=sys.stderr)
    raise typer.Exit(code)


def _run(fn: Callable[[], T]) -> T:
    try:
        return fn()
    except EdgeSchedError as exc:
        _error(str(exc), type(exc).__name__, exc.exit_code)


@app.callback()
def configure(
    log_level: Annotated[
        str, typer.Option("--log-level", envvar=LOG_LEVEL_ENV, help="Logging level")
    ] = DEFAULT_LOG_LEVEL,
) -> None:
    """Log to stderr at the given level; command results go to stdout as JSON."""
    level = logging.getLevelName(log_level.upper())
    if not isinstance(level, int):
        _error(f"unknown log level {log_level!r}", "ConfigError", 2)
    logging.basicConfig(
        level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s"
    )
    logging.getLogger("edgesched").setLevel(level)


def _config(path: Path | None) -> RunConfig:
    return _run(lambda: load_config(path))


def _workers(workers: int | None, cfg: RunConfig) -> int:
    return workers if workers is not None else cfg.eval.workers


def _two_stage(checkpoints: list[Checkpoint], backbone: Backbone) -> TwoStageNet | None:
    """Merge every bundle of one backbone into an offload + resource pair."""
    matching = [c for c in checkpoints if c.backbone == backbone]
    if not matching:
        return None
    merged = matching[0]
    for other in matching[1:]:
        merged = merged.merged(other)
    return TwoStageNet(
        offload=merged.network("offload"),
        resource=merged.network("resource"),
        normalizer=merged.normalizer,
        extender=merged.extender,
    )


def _context(cfg: RunConfig, ckpts: list[Path] | None, methods: list[str]) -> SchedulerContext:
    checkpoints = [load_checkpoint(p) for p in ckpts or []]
    ctx = SchedulerContext(
        params=cfg.params,
        sac=cfg.sac,
        ga=cfg.ga,
        oracle=cfg.oracle,
        tsnet=_two_stage(checkpoints, "transformer"),
        mlp=_two_stage(checkpoints, "mlp"),
        mixer=_two_stage(checkpoints, "mixer"),
    )
    for method in methods:
        if method in LEARNED_METHODS:
            ctx.nets_for(method)
    return ctx


def _dataset(
    path: Path, params: SystemParams
) -> tuple[DatasetManifest, Normalizer, list[LabeledInstance]]:
    manifest, records = _run(lambda: load_dataset(path))
    if manifest.normalizer is None or not records:
        _error(f"dataset {path} holds no records", "DatasetError", DatasetError.exit_code)
    largest = max(records, key=lambda r: r.instance.n).instance
    _run(lambda: check_access_count(largest, params))
    return manifest, manifest.normalizer, records


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------


@app.command("generate")
def generate(
    out: Annotated[Path, typer.Option("--out", help="Dataset directory to write")],
    config: ConfigOption = None,
    solver: Annotated[str, typer.Option(help="Labeling solver: ga or oracle")] = "ga",
    count: Annotated[
        int | None, typer.Option(min=0, help="Instances per access count (overrides config)")
    ] = None,
    workers: WorkersOption = None,
) -> None:
    """Sample instances, label them, and write dataset.jsonl plus manifest.json."""
    cfg = _config(config)
    if solver not in ("ga", "oracle"):
        _error(f"unknown solver {solver!r}; valid solvers: ga, oracle", "InvalidArgumentError", 2)
    dist = cfg.distribution
    manifest = _run(
        lambda: build_dataset(
            dist,
            cfg.params,
            cfg.ga,
            count if count is not None else dist.count_per_n,
            out,
            workers=_workers(workers, cfg),
            solver="oracle" if solver == "oracle" else "ga",
            oracle_cfg=cfg.oracle,
            val_fraction=cfg.train.val_fraction,
            split_seed=cfg.seed,
        )
    )
    _output(
        {
            "out": str(out),
            "solver": manifest.solver,
            "counts": manifest.counts,
            "failures": manifest.failures,
            "mean_utility": manifest.mean_utility,
        }
    )


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------


@app.command("train")
def train(
    net: Annotated[str, typer.Option("--net", help="offload, resource, mlp, or mixer")],
    data: Annotated[Path, typer.Option("--data", help="Dataset directory")],
    out: Annotated[Path, typer.Option("--out", help="Checkpoint file to write")],
    config: ConfigOption = None,
) -> None:
    """Train a network (or a baseline pair) and write a checkpoint plus training curves."""
    if net not in NET_CHOICES:
        valid = ", ".join(NET_CHOICES)
        _error(f"unknown net {net!r}; valid nets: {valid}", "InvalidArgumentError", 2)
    cfg = _config(config)
    manifest, normalizer, records = _dataset(data, cfg.params)
    train_records, val_records = split_records(records, manifest.val_fraction, manifest.split_seed)

    networks: dict[NetKind, SchedulerNet] = {}
    summary: dict[str, Any] = {}
    for kind, backbone in NET_CHOICES[net]:
        net_cfg = cfg.net.model_copy(update={"backbone": backbone})
        run = _run(
            lambda: train_network(
                kind,
                train_records,
                normalizer,
                cfg.params,
                net_cfg,
                cfg.extender,
                cfg.train,
                val_records,
            )
        )
        networks[kind] = run.net
        curve_path = out.with_name(f"{out.stem}.{kind}.curve.csv")
        _run(lambda: write_training_curve(curve_path, run.curve))
        final = run.final
        summary[kind] = {
            "backbone": backbone,
            "parameters": run.net.num_parameters(),
            "curve": str(curve_path),
            "final": asdict(final) if final is not None else None,
        }

    training = {
        "net": net,
        "epochs": cfg.train.epochs,
        "train_records": len(train_records),
        "val_records": len(val_records),
        "dataset": str(data),
    }
    checkpoint = Checkpoint(networks, normalizer, cfg.extender, training)
    _run(lambda: save_checkpoint(out, checkpoint))
    _output({"checkpoint": str(out), **summary})


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------


@app.command("evaluate")
def evaluate_cmd(
    data: Annotated[Path, typer.Option("--data", help="Dataset directory to evaluate on")],
    out: Annotated[Path, typer.Option("--out", help="Report CSV to write")],
    config: ConfigOption = None,
    ckpt: CkptOption = None,
    methods: Annotated[
        str | None, typer.Option(help="Comma-separated methods (overrides config)")
    ] = None,
    plots: Annotated[
        Path | None, typer.Option(help="Plot-data directory (default: <out dir>/plots)")
    ] = None,
    coupling_ckpt: Annotated[
        list[Path] | None,
        typer.Option("--coupling-ckpt", help="Extra ResourceNet checkpoint to compare"),
    ] = None,
    sweeps: Annotated[bool, typer.Option(help="Run the SAC k and threshold sweeps")] = True,
    workers: WorkersOption = None,
) -> None:
    """Run methods over a labeled dataset; write the report CSV and plot data."""
    cfg = _config(config)
    method_list = [m.strip() for m in methods.split(",") if m.strip()] if methods else None
    method_list = method_list or list(cfg.eval.methods)
    for method in method_list:
        _run(lambda: check_method(method))
    _, _, records = _dataset(data, cfg.params)
    ctx = _run(lambda: _context(cfg, ckpt, method_list))
    eval_cfg = cfg.eval.model_copy(update={"workers": _workers(workers, cfg)})

    results = _run(lambda: evaluate_methods(records, ctx, method_list, eval_cfg))
    _run(lambda: write_report(out, results.rows))

    plot_dir = plots if plots is not None else out.parent / "plots"
    k_rows: list[tuple[int, int, float, float]] = []
    sigma_rows: list[tuple[int, float, float]] = []
    if sweeps and ctx.tsnet is not None and "tsnet-sac" in method_list:
        tsnet = ctx.tsnet
        k_rows = _run(lambda: sac_k_sweep(records, tsnet, cfg.params, cfg.sac, cfg.eval.k_sweep))
        sigma_rows = _run(
            lambda: sigma_sweep(records, tsnet, cfg.params, cfg.sac, cfg.eval.sigma_sweep)
        )
    written = _run(lambda: write_plot_data(plot_dir, results, k_rows, sigma_rows))

    if coupling_ckpt:
        base = ctx.tsnet
        if base is None:
            _error("--coupling-ckpt needs a transformer --ckpt", "MissingCheckpointError", 2)
        variants: dict[str, TwoStageNet] = {base.coupling: base}
        for path in coupling_ckpt:
            resource = _run(lambda: load_checkpoint(path).network("resource"))
            variants[resource.cfg.coupling] = _run(
                lambda: TwoStageNet(base.offload, resource, base.normalizer, base.extender)
            )
        coupling_path = plot_dir / "coupling_comparison.csv"
        rows = _run(lambda: coupling_comparison(records, variants, cfg.params, cfg.sac))
        _run(lambda: write_coupling(coupling_path, rows))
        written.append(coupling_path)

    _output(
        {
            "report": str(out),
            "rows": [row.model_dump() for row in results.rows],
            "sac_dominance_violations": sac_dominance_violations(results),
            "plot_files": [str(p) for p in written],
        }
    )


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------


def _read_instance(path: Path, params: SystemParams) -> Instance:
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
        inst = Instance.from_quads(raw["tasks"])
    except FileNotFoundError as exc:
        raise InvalidArgumentError(f"instance file not found: {path}") from exc
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        # pydantic ValidationError is a ValueError
        raise InvalidArgumentError(f"malformed instance {path}: {exc}") from exc
    return check_access_count(inst, params)


@app.command("solve")
def solve(
    instance: Annotated[Path, typer.Option("--instance", help='JSON {"tasks": [[u,c,d,h], ...]}')],
    method: Annotated[str, typer.Option(help="Scheduling method")] = "tsnet-sac",
    config: ConfigOption = None,
    ckpt: CkptOption = None,
) -> None:
    """Schedule one instance; JSON result on stdout, decision latency on stderr."""
    cfg = _config(config)
    _run(lambda: check_method(method))
    inst = _run(lambda: _read_instance(instance, cfg.params))
    ctx = _run(lambda: _context(cfg, ckpt, [method]))

    start = time.perf_counter()
    schedule = _run(lambda: baseline_schedule(method, inst, ctx))
    latency_ms = 1e3 * (time.perf_counter() - start)
    report = evaluate(inst, schedule, cfg.params)

    _output({"method": method, "schedule": schedule.model_dump(), "report": report.model_dump()})
    print(json.dumps({"latency_ms": latency_ms}), file=sys.stderr)


# ---------------------------------------------------------------------------
# ablate-padding
# ---------------------------------------------------------------------------


@app.command("ablate-padding")
def ablate_padding(
    data: Annotated[Path, typer.Option("--data", help="Dataset directory")],
    out: Annotated[Path, typer.Option("--out", help="Ablation CSV to write")],
    config: ConfigOption = None,
) -> None:
    """Train one OffloadNet per pad mode and report held-out accuracy per mode and N."""
    cfg = _config(config)
    manifest, normalizer, records = _dataset(data, cfg.params)
    train_records, val_records = split_records(records, manifest.val_fraction, manifest.split_seed)
    if not val_records:
        _error("padding ablation needs a validation split", "DatasetError", 3)
    rows = _run(
        lambda: pad_mode_ablation(
            train_records,
            val_records,
            normalizer,
            cfg.params,
            cfg.net,
            cfg.extender,
            cfg.train,
        )
    )
    _run(lambda: write_ablation(out, rows))
    _output(
        {
            "ablation": str(out),
            "rows": [{"pad_mode": m, "n": n, "offload_accuracy": a} for m, n, a in rows],
        }
    )


def main() -> None:
    app()


if __name__ == "__main__":
    main()
