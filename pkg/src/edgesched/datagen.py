# ABOUTME: Instance sampling, feature normalization, and labeled dataset persistence
# ABOUTME: Datasets are JSON lines with a manifest.json carrying provenance and normalizer bounds

import json
import logging
from collections import Counter
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from edgesched.exceptions import (
    BatchItemError,
    DatasetError,
    InvalidArgumentError,
    NotFittedError,
    ProblemTooLargeError,
)
from edgesched.ga import GaConfig, ga_solve_settled
from edgesched.model import check_constraints
from edgesched.oracle import MAX_ENUMERATION_N, OracleConfig, oracle_label
from edgesched.types import Instance, LabeledInstance, Schedule, SolverTag, SystemParams

logger = logging.getLogger(__name__)

DATA_FILE = "dataset.jsonl"
MANIFEST_FILE = "manifest.json"
MANIFEST_VERSION = 1
FEATURE_NAMES = ("u", "c", "d", "log10_h")

Range = tuple[float, float]


class InstanceDistribution(BaseModel):
    """Sampling ranges for task features; h is log-uniform over h_log10_range."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    u_range: Range = (1e5, 1e6)
    c_range: Range = (1e8, 2e9)
    d_range: Range = (1e4, 1e5)
    h_log10_range: Range = (-7.0, -5.0)
    n_values: list[int] = Field(default_factory=lambda: [10])
    count_per_n: int = Field(default=100, ge=0)
    seed: int = Field(default=0, ge=0)

    @field_validator("u_range", "c_range", "d_range", "h_log10_range")
    @classmethod
    def _ordered(cls, value: Range) -> Range:
        if value[0] > value[1]:
            raise ValueError(f"range minimum exceeds maximum: {value}")
        return value

    @field_validator("n_values")
    @classmethod
    def _positive(cls, value: list[int]) -> list[int]:
        if not value or min(value) < 1:
            raise ValueError("n_values must be a non-empty list of positive counts")
        return value

    @classmethod
    def mixed(cls, **overrides: Any) -> "InstanceDistribution":
        """Ranges where both local execution and offloading are often optimal.

        Under the default system constants the default ranges make offloading win
        almost always; downlink volumes of 1-200 Mbit put the two branches in balance.
        """
        return cls(**{"d_range": (1e6, 2e8), **overrides})


class Normalizer(BaseModel):
    """Per-feature affine map of the training corpus into [0, 1]."""

    model_config = ConfigDict(frozen=True)

    mins: tuple[float, ...] | None = None
    maxs: tuple[float, ...] | None = None

    @classmethod
    def fit(cls, features: np.ndarray) -> "Normalizer":
        rows = np.asarray(features, dtype=np.float64).reshape(-1, len(FEATURE_NAMES))
        if rows.shape[0] == 0:
            raise InvalidArgumentError("cannot fit a normalizer on zero tasks")
        lo, hi = rows.min(axis=0), rows.max(axis=0)
        # Degenerate features get a unit span so the map stays invertible.
        hi = np.where(hi > lo, hi, lo + 1.0)
        return cls(mins=tuple(lo.tolist()), maxs=tuple(hi.tolist()))

    @property
    def fitted(self) -> bool:
        return self.mins is not None and self.maxs is not None

    def _bounds(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.fitted:
            raise NotFittedError("normalizer has not been fitted")
        return np.asarray(self.mins), np.asarray(self.maxs)


def task_features(instance: Instance) -> np.ndarray:
    """Raw network features per task: u, c, d, log10(h)."""
    cols = instance.arrays()
    return np.stack([cols["u"], cols["c"], cols["d"], np.log10(cols["h_ul"])], axis=1)


def normalize(features: np.ndarray, normalizer: Normalizer) -> np.ndarray:
    """Affine map into [0, 1] over training bounds; out-of-range values are not clamped."""
    lo, hi = normalizer._bounds()
    return (np.asarray(features, dtype=np.float64) - lo) / (hi - lo)


def denormalize(features: np.ndarray, normalizer: Normalizer) -> np.ndarray:
    lo, hi = normalizer._bounds()
    return np.asarray(features, dtype=np.float64) * (hi - lo) + lo


def instance_seed(base_seed: int, n: int, index: int) -> int:
    return int(np.random.SeedSequence([base_seed, n, index]).generate_state(1)[0])


def sample_instance(
    dist: InstanceDistribution, n: int, seed: int, n_bar: int = 40
) -> Instance:
    """Draw n tasks; deterministic per seed."""
    if n < 1 or n > n_bar:
        raise InvalidArgumentError(f"access count {n} outside [1, {n_bar}]")
    rng = np.random.default_rng(seed)
    u = rng.uniform(*dist.u_range, size=n)
    c = rng.uniform(*dist.c_range, size=n)
    d = rng.uniform(*dist.d_range, size=n)
    h = 10.0 ** rng.uniform(*dist.h_log10_range, size=n)
    return Instance.from_quads(np.stack([u, c, d, h], axis=1))


# ---------------------------------------------------------------------------
# records
# ---------------------------------------------------------------------------


def to_record(labeled: LabeledInstance) -> dict[str, Any]:
    s = labeled.schedule
    return {
        "tasks": labeled.instance.quads(),
        "m": list(s.m),
        "p_ul": list(s.p_ul),
        "p_dl": list(s.p_dl),
        "f_ap": list(s.f_ap),
        "utility": labeled.utility,
        "n": labeled.instance.n,
        "solver": labeled.solver_tag,
    }


def from_record(record: dict[str, Any]) -> LabeledInstance:
    try:
        instance = Instance.from_quads(record["tasks"])
        schedule = Schedule(
            m=tuple(record["m"]),
            p_ul=tuple(record["p_ul"]),
            p_dl=tuple(record["p_dl"]),
            f_ap=tuple(record["f_ap"]),
        )
        return LabeledInstance(
            instance=instance,
            schedule=schedule,
            utility=float(record["utility"]),
            solver_tag=record.get("solver", "ga"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetError(f"malformed dataset record: {exc}") from exc


def write_records(path: Path, labeled: Iterable[LabeledInstance]) -> int:
    count = 0
    try:
        with open(path, "w", encoding="utf-8") as f:
            for item in labeled:
                f.write(json.dumps(to_record(item)) + "\n")
                count += 1
    except OSError as exc:
        raise DatasetError(f"failed to write {path}: {exc}") from exc
    return count


def read_records(path: Path) -> list[LabeledInstance]:
    try:
        with open(path, encoding="utf-8") as f:
            lines = [line for line in f if line.strip()]
    except OSError as exc:
        raise DatasetError(f"failed to read {path}: {exc}") from exc
    try:
        return [from_record(json.loads(line)) for line in lines]
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{path} is not valid JSON lines: {exc}") from exc


def split_records(
    records: Sequence[LabeledInstance], val_fraction: float, seed: int
) -> tuple[list[LabeledInstance], list[LabeledInstance]]:
    """Deterministic train/validation split; both parts keep the original order."""
    total = len(records)
    n_val = int(round(total * val_fraction))
    if val_fraction > 0 and total >= 2:
        n_val = min(max(n_val, 1), total - 1)
    perm = np.random.default_rng(seed).permutation(total)
    val_idx = set(perm[:n_val].tolist())
    train = [r for i, r in enumerate(records) if i not in val_idx]
    val = [r for i, r in enumerate(records) if i in val_idx]
    return train, val


def fit_normalizer(records: Sequence[LabeledInstance]) -> Normalizer:
    return Normalizer.fit(np.concatenate([task_features(r.instance) for r in records]))


# ---------------------------------------------------------------------------
# dataset building
# ---------------------------------------------------------------------------


class DatasetManifest(BaseModel):
    format_version: int = MANIFEST_VERSION
    created_at: str
    data_file: str = DATA_FILE
    solver: SolverTag
    distribution: InstanceDistribution
    params: dict[str, Any]
    ga: GaConfig
    normalizer: Normalizer | None
    val_fraction: float
    split_seed: int
    requested: dict[str, int]
    counts: dict[str, int]
    failures: int
    seeds: dict[str, list[int]]
    mean_utility: float | None


def build_dataset(
    dist: InstanceDistribution,
    params: SystemParams,
    ga_cfg: GaConfig,
    count_per_n: int,
    path: Path,
    *,
    workers: int = 1,
    solver: SolverTag = "ga",
    oracle_cfg: OracleConfig | None = None,
    val_fraction: float = 0.1,
    split_seed: int = 0,
) -> DatasetManifest:
    """Sample, label, and write a dataset directory (dataset.jsonl + manifest.json)."""
    for n in dist.n_values:
        if n > params.n_bar:
            raise InvalidArgumentError(f"n_values entry {n} exceeds n_bar = {params.n_bar}")
        if solver == "oracle" and n > MAX_ENUMERATION_N:
            raise ProblemTooLargeError(
                f"oracle labeling is capped at N = {MAX_ENUMERATION_N}, n_values has {n}"
            )

    seeds = {
        str(n): [instance_seed(dist.seed, n, j) for j in range(count_per_n)]
        for n in dist.n_values
    }
    instances = [
        sample_instance(dist, n, seed, params.n_bar)
        for n in dist.n_values
        for seed in seeds[str(n)]
    ]
    logger.info(f"Labeling {len(instances)} instances with {solver}")

    if solver == "oracle":
        settled: list[LabeledInstance | BatchItemError] = []
        for i, inst in enumerate(instances):
            try:
                settled.append(oracle_label(inst, params, oracle_cfg))
            except Exception as exc:
                settled.append(BatchItemError(i, exc))
    else:
        settled = ga_solve_settled(instances, params, ga_cfg, workers, oracle_cfg)

    labeled: list[LabeledInstance] = []
    failures = 0
    for item in settled:
        if isinstance(item, BatchItemError):
            failures += 1
            logger.warning(f"Skipping {item}")
            continue
        if not check_constraints(item.schedule, params).feasible:
            failures += 1
            logger.warning("Skipping infeasible label")
            continue
        labeled.append(item)

    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DatasetError(f"cannot create dataset directory {path}: {exc}") from exc
    write_records(path / DATA_FILE, labeled)

    train, _ = split_records(labeled, val_fraction, split_seed)
    counts = Counter(str(r.instance.n) for r in labeled)
    manifest = DatasetManifest(
        created_at=datetime.now(timezone.utc).isoformat(),
        solver=solver,
        distribution=dist,
        params=params.to_json_dict(),
        ga=ga_cfg,
        normalizer=fit_normalizer(train) if train else None,
        val_fraction=val_fraction,
        split_seed=split_seed,
        requested={str(n): count_per_n for n in dist.n_values},
        counts={str(n): counts.get(str(n), 0) for n in dist.n_values},
        failures=failures,
        seeds=seeds,
        mean_utility=float(np.mean([r.utility for r in labeled])) if labeled else None,
    )
    write_manifest(path, manifest)
    logger.info(f"Wrote {len(labeled)} records to {path / DATA_FILE} ({failures} failures)")
    return manifest


def write_manifest(path: Path, manifest: DatasetManifest) -> None:
    try:
        with open(path / MANIFEST_FILE, "w", encoding="utf-8") as f:
            f.write(manifest.model_dump_json(indent=2))
    except OSError as exc:
        raise DatasetError(f"failed to write manifest in {path}: {exc}") from exc


def load_manifest(path: Path) -> DatasetManifest:
    manifest_path = path / MANIFEST_FILE
    if not manifest_path.exists():
        raise DatasetError(f"no {MANIFEST_FILE} in {path}")
    try:
        return DatasetManifest.model_validate_json(manifest_path.read_text(encoding="utf-8"))
    except ValueError as exc:
        raise DatasetError(f"invalid manifest {manifest_path}: {exc}") from exc


def load_dataset(path: Path) -> tuple[DatasetManifest, list[LabeledInstance]]:
    manifest = load_manifest(path)
    return manifest, read_records(path / manifest.data_file)
