# ABOUTME: Evaluation report CSV with a versioned column schema, and plain-text plot series
# ABOUTME: Reports are parsed back by read_report so downstream tooling can rely on the header

import csv
import logging
from pathlib import Path
from typing import Iterable, Sequence

from pydantic import BaseModel, Field

from edgesched.exceptions import DatasetError
from edgesched.nn.training import EpochStats

logger = logging.getLogger(__name__)

REPORT_SCHEMA_VERSION = 1


class EvalRow(BaseModel):
    """Aggregate metrics of one method over the instances of one access count."""

    method: str
    n: int
    instances: int
    mean_utility: float
    mean_gap_vs_label: float | None = Field(
        default=None, description="Mean (U - U_label) / |U_label|"
    )
    mean_gap_vs_oracle: float | None = Field(
        default=None, description="Mean (U - U_oracle) / |U_oracle|, N <= oracle_max_n only"
    )
    offload_accuracy: float | None = None
    mse_p_ul: float | None = Field(default=None, description="On [0, 1]-mapped allocations")
    mse_p_dl: float | None = None
    mse_f_ap: float | None = None
    latency_ms: float = Field(description="Mean wall-clock decision time per instance")
    violations: int = 0


REPORT_COLUMNS: tuple[str, ...] = ("schema_version", *EvalRow.model_fields)


def _cell(value: object) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_report(path: Path, rows: Iterable[EvalRow]) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(REPORT_COLUMNS)
            for row in rows:
                writer.writerow(
                    [REPORT_SCHEMA_VERSION, *(_cell(v) for v in row.model_dump().values())]
                )
    except OSError as exc:
        raise DatasetError(f"failed to write report {path}: {exc}") from exc
    logger.info(f"Wrote evaluation report to {path}")


def read_report(path: Path) -> list[EvalRow]:
    try:
        with open(path, newline="", encoding="utf-8") as f:
            reader = csv.DictReader(f)
            if tuple(reader.fieldnames or ()) != REPORT_COLUMNS:
                raise DatasetError(f"{path} does not have the report header")
            lines = list(reader)
    except OSError as exc:
        raise DatasetError(f"failed to read report {path}: {exc}") from exc

    rows = []
    for line in lines:
        if line.pop("schema_version") != str(REPORT_SCHEMA_VERSION):
            raise DatasetError(f"{path} has an unsupported schema version")
        rows.append(EvalRow.model_validate({k: (v if v != "" else None) for k, v in line.items()}))
    return rows


def write_series(path: Path, header: Sequence[str], rows: Iterable[Sequence[float]]) -> None:
    """Whitespace-separated numeric columns under a single '# name name ...' line."""
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            f.write("# " + " ".join(header) + "\n")
            for row in rows:
                f.write(" ".join(repr(float(v)) if isinstance(v, float) else str(v) for v in row))
                f.write("\n")
    except OSError as exc:
        raise DatasetError(f"failed to write {path}: {exc}") from exc


def read_series(path: Path) -> list[list[float]]:
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DatasetError(f"failed to read {path}: {exc}") from exc
    return [[float(v) for v in line.split()] for line in lines if line and not line.startswith("#")]


def write_table(path: Path, header: Sequence[str], rows: Iterable[Sequence[object]]) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(header)
            writer.writerows([_cell(v) for v in row] for row in rows)
    except OSError as exc:
        raise DatasetError(f"failed to write {path}: {exc}") from exc


TRAINING_CURVE_COLUMNS = ("epoch", "train_loss", "val_loss", "val_accuracy", "val_mse")


def write_training_curve(path: Path, curve: Sequence[EpochStats]) -> None:
    write_table(
        path,
        TRAINING_CURVE_COLUMNS,
        ([getattr(s, c) for c in TRAINING_CURVE_COLUMNS] for s in curve),
    )
