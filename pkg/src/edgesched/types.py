# ABOUTME: Pydantic models for edgesched inputs and outputs
# ABOUTME: Defines TaskInfo, SystemParams, Instance, Schedule, CostReport, and LabeledInstance

import math
from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

DEFAULT_N0_DBM_PER_HZ = -173.0


def dbm_per_hz_to_watts(dbm: float) -> float:
    """Convert a noise density in dBm/Hz to W/Hz."""
    return 10.0 ** (dbm / 10.0) * 1e-3


class TaskInfo(BaseModel):
    """One terminal's task: uplink bits, CPU cycles, downlink bits, and channel gains."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    u: float = Field(ge=0, description="Uplink data volume (bits)")
    c: float = Field(gt=0, description="Required CPU cycles")
    d: float = Field(ge=0, description="Downlink data volume (bits)")
    h_ul: float = Field(gt=0, description="Uplink channel gain")
    h_dl: float = Field(gt=0, description="Downlink channel gain")

    @classmethod
    def from_quad(
        cls, u: float, c: float, d: float, h: float, h_dl: float | None = None
    ) -> "TaskInfo":
        """Build a task from [u, c, d, h]; the channel is reciprocal unless h_dl is given."""
        return cls(u=u, c=c, d=d, h_ul=h, h_dl=h if h_dl is None else h_dl)

    def quad(self) -> list[float]:
        """[u, c, d, h], with h_dl appended only when the channel is not reciprocal."""
        row = [self.u, self.c, self.d, self.h_ul]
        return row if self.h_dl == self.h_ul else [*row, self.h_dl]


class SystemParams(BaseModel):
    """Physical constants of the single-server MEC system, all in SI units."""

    model_config = ConfigDict(frozen=True, extra="forbid", populate_by_name=True)

    f_loc: float = Field(default=2e9, gt=0, description="Terminal CPU frequency (Hz)")
    k_loc: float = Field(default=3e-27, ge=0, description="Terminal CPU energy constant")
    k_ap: float = Field(default=1e-27, ge=0, description="MEC CPU energy constant")
    p_ul_min: float = Field(default=0.05, gt=0)
    p_ul_max: float = Field(default=0.2, gt=0)
    p_dl_min: float = Field(default=20.0, gt=0)
    p_dl_max: float = Field(default=200.0, gt=0)
    f_ap_min: float = Field(default=1e9, gt=0)
    f_ap_max: float = Field(default=8e9, gt=0)
    f_total: float = Field(default=140e9, gt=0, description="Total MEC frequency budget (Hz)")
    n0_w_per_hz: float = Field(
        default_factory=lambda: dbm_per_hz_to_watts(DEFAULT_N0_DBM_PER_HZ), gt=0
    )
    w_ul: float = Field(default=10e6, gt=0, description="Uplink bandwidth per terminal (Hz)")
    w_dl: float = Field(default=10e6, gt=0, description="Downlink bandwidth per terminal (Hz)")
    lam: float = Field(default=0.5, ge=0, le=1, alias="lambda")
    n_bar: int = Field(default=40, ge=1, description="Maximum access count")

    @model_validator(mode="before")
    @classmethod
    def _convert_noise_density(cls, data: Any) -> Any:
        if not isinstance(data, dict) or "n0_dbm_per_hz" not in data:
            return data
        if "n0_w_per_hz" in data:
            raise ValueError("give exactly one of n0_dbm_per_hz and n0_w_per_hz")
        data = dict(data)
        data["n0_w_per_hz"] = dbm_per_hz_to_watts(float(data.pop("n0_dbm_per_hz")))
        return data

    @model_validator(mode="after")
    def _check_bounds(self) -> "SystemParams":
        for name in ("p_ul", "p_dl", "f_ap"):
            lo, hi = getattr(self, f"{name}_min"), getattr(self, f"{name}_max")
            if lo > hi:
                raise ValueError(f"{name}_min ({lo}) exceeds {name}_max ({hi})")
        return self

    def to_json_dict(self) -> dict[str, Any]:
        return self.model_dump(by_alias=True)


class Instance(BaseModel):
    """An ordered set of tasks sharing one MEC server."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    tasks: tuple[TaskInfo, ...] = Field(min_length=1)

    @classmethod
    def from_quads(cls, quads: list[list[float]] | np.ndarray) -> "Instance":
        return cls(tasks=tuple(TaskInfo.from_quad(*map(float, q)) for q in quads))

    @property
    def n(self) -> int:
        return len(self.tasks)

    def arrays(self) -> dict[str, np.ndarray]:
        """Column arrays u, c, d, h_ul, h_dl as float64."""
        return {
            key: np.array([getattr(t, key) for t in self.tasks], dtype=np.float64)
            for key in ("u", "c", "d", "h_ul", "h_dl")
        }

    def quads(self) -> list[list[float]]:
        return [t.quad() for t in self.tasks]


class Schedule(BaseModel):
    """Offload decisions plus per-task resource allocation.

    Allocations of local tasks (m_i = 0) are always stored as zero.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    m: tuple[int, ...]
    p_ul: tuple[float, ...]
    p_dl: tuple[float, ...]
    f_ap: tuple[float, ...]

    @field_validator("m")
    @classmethod
    def _binary(cls, m: tuple[int, ...]) -> tuple[int, ...]:
        if any(v not in (0, 1) for v in m):
            raise ValueError("offload decisions must be 0 or 1")
        return m

    @model_validator(mode="after")
    def _aligned(self) -> "Schedule":
        n = len(self.m)
        if not (len(self.p_ul) == len(self.p_dl) == len(self.f_ap) == n):
            raise ValueError("m, p_ul, p_dl, f_ap must have equal length")
        for i, mi in enumerate(self.m):
            if mi == 0 and (self.p_ul[i] or self.p_dl[i] or self.f_ap[i]):
                raise ValueError(f"task {i} is local but carries a non-zero allocation")
        return self

    @classmethod
    def from_arrays(
        cls,
        m: np.ndarray | list[int],
        p_ul: np.ndarray | list[float],
        p_dl: np.ndarray | list[float],
        f_ap: np.ndarray | list[float],
    ) -> "Schedule":
        """Build a schedule, zeroing the allocations of local tasks."""
        mask = np.asarray(m, dtype=np.int64)
        keep = mask == 1
        return cls(
            m=tuple(int(v) for v in mask),
            p_ul=tuple(float(v) for v in np.where(keep, p_ul, 0.0)),
            p_dl=tuple(float(v) for v in np.where(keep, p_dl, 0.0)),
            f_ap=tuple(float(v) for v in np.where(keep, f_ap, 0.0)),
        )

    @classmethod
    def all_local(cls, n: int) -> "Schedule":
        zeros = (0.0,) * n
        return cls(m=(0,) * n, p_ul=zeros, p_dl=zeros, f_ap=zeros)

    @property
    def n(self) -> int:
        return len(self.m)

    def arrays(self) -> dict[str, np.ndarray]:
        return {
            "m": np.array(self.m, dtype=np.int64),
            "p_ul": np.array(self.p_ul, dtype=np.float64),
            "p_dl": np.array(self.p_dl, dtype=np.float64),
            "f_ap": np.array(self.f_ap, dtype=np.float64),
        }


ConstraintId = Literal["f_ap_box", "p_ul_box", "p_dl_box", "f_ap_budget"]


class Violation(BaseModel):
    """One violated constraint; task_index is None for the shared frequency budget."""

    model_config = ConfigDict(frozen=True)

    constraint: ConstraintId
    task_index: int | None
    amount: float


class FeasibilityReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    feasible: bool
    violations: list[Violation] = Field(default_factory=list)


class CostReport(BaseModel):
    """Delay, energy, and utility of a schedule on an instance."""

    model_config = ConfigDict(frozen=True)

    per_task_delay: list[float]
    per_task_energy: list[float]
    T: float = Field(description="Mean delay (s)")
    E: float = Field(description="Total energy (J)")
    U: float = Field(description="Utility lambda*T + (1-lambda)*E")
    feasible: bool
    violations: list[Violation] = Field(default_factory=list)

    @field_validator("U")
    @classmethod
    def _finite(cls, value: float) -> float:
        if math.isnan(value):
            raise ValueError("utility is NaN")
        return value


SolverTag = Literal["ga", "oracle"]


class LabeledInstance(BaseModel):
    """An instance with a solver-produced schedule: the training unit."""

    model_config = ConfigDict(frozen=True)

    instance: Instance
    schedule: Schedule
    utility: float
    solver_tag: SolverTag = "ga"
