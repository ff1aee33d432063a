# ABOUTME: Two-stage inference: OffloadNet decisions coupled into ResourceNet allocations
# ABOUTME: Sliding shifts give k candidate schedules; the exact utility picks the winner

import logging
from dataclasses import dataclass, field

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from edgesched.datagen import Normalizer, normalize, task_features
from edgesched.exceptions import InfeasibleError, InvalidArgumentError, ShapeError
from edgesched.model import clip_to_constraints, evaluate
from edgesched.nn.networks import Coupling, SchedulerNet
from edgesched.scheduling.extender import (
    ExtenderConfig,
    inverse_shift,
    pad,
    shift,
    shift_offsets,
    unpad,
)
from edgesched.types import CostReport, Instance, Schedule, SystemParams

logger = logging.getLogger(__name__)

ALLOCATION_FIELDS = ("p_ul", "p_dl", "f_ap")


class SacConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    k: int = Field(default=20, ge=1, description="Number of shifted candidates")
    sigma: float = Field(default=0.3, gt=0, lt=1, description="Offload probability threshold")
    unit_shifts: bool = Field(default=False, description="Use offsets 0..k-1 instead of spread")


# ---------------------------------------------------------------------------
# coupling and allocation boxes
# ---------------------------------------------------------------------------


def padded_decisions(m: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Spread a length-N decision vector over padded positions; pad positions read 1."""
    mask = np.asarray(mask, dtype=bool)
    out = np.ones(mask.shape, dtype=np.float64)
    out[mask] = np.asarray(m, dtype=np.float64).ravel()
    return out


def couple_features(x: np.ndarray, m_padded: np.ndarray, coupling: Coupling) -> np.ndarray:
    """ResourceNet input: rows scaled by m (dot), m appended as a column (concat), or x."""
    if m_padded.shape != x.shape[:-1]:
        raise ShapeError(f"decisions {m_padded.shape} do not match features {x.shape}")
    if coupling == "dot":
        return x * m_padded[..., None]
    if coupling == "concat":
        return np.concatenate([x, m_padded[..., None]], axis=-1)
    return x


def _boxes(params: SystemParams) -> tuple[np.ndarray, np.ndarray]:
    lo = np.array([params.p_ul_min, params.p_dl_min, params.f_ap_min])
    hi = np.array([params.p_ul_max, params.p_dl_max, params.f_ap_max])
    return lo, hi


def allocation_to_unit(alloc: np.ndarray, params: SystemParams) -> np.ndarray:
    """Map (..., 3) allocations in their boxes to [0, 1]; a zero-width box maps to 0.5."""
    lo, hi = _boxes(params)
    span = hi - lo
    safe = np.where(span > 0, span, 1.0)
    return np.where(span > 0, (alloc - lo) / safe, 0.5)


def unit_to_allocation(unit: np.ndarray, params: SystemParams) -> np.ndarray:
    lo, hi = _boxes(params)
    return lo + unit * (hi - lo)


# ---------------------------------------------------------------------------
# two-stage network
# ---------------------------------------------------------------------------


@dataclass
class TwoStageNet:
    """OffloadNet and ResourceNet plus the feature pipeline they were trained with."""

    offload: SchedulerNet
    resource: SchedulerNet
    normalizer: Normalizer
    extender: ExtenderConfig

    def __post_init__(self) -> None:
        if self.offload.kind != "offload" or self.resource.kind != "resource":
            raise InvalidArgumentError("two-stage net needs an offload and a resource network")
        for net in (self.offload, self.resource):
            if net.n_bar != self.extender.n_bar:
                raise InvalidArgumentError(
                    f"{net.kind} net has n_bar {net.n_bar}, extender {self.extender.n_bar}"
                )

    @property
    def coupling(self) -> Coupling:
        return self.resource.cfg.coupling

    def features(self, instance: Instance) -> tuple[np.ndarray, np.ndarray]:
        """Normalized, padded n_bar x 4 features and the real-row mask."""
        return pad(normalize(task_features(instance), self.normalizer), self.extender)


def predict_offload(
    net: SchedulerNet, features: np.ndarray, mask: np.ndarray, sigma: float
) -> np.ndarray:
    """Binary decisions m_i = [p_i >= sigma] at real positions."""
    probs = net.predict(features[None])[0]
    return (unpad(probs, mask) >= sigma).astype(np.int64)


def allocate_batch(
    net: SchedulerNet, x: np.ndarray, m_padded: np.ndarray, params: SystemParams
) -> np.ndarray:
    """Denormalized (B, n_bar, 3) allocations for B decision vectors over padded features."""
    unit = net.predict(couple_features(x, m_padded, net.cfg.coupling))
    return unit_to_allocation(unit, params)


def couple_and_allocate(
    net: SchedulerNet,
    features: np.ndarray,
    mask: np.ndarray,
    m: np.ndarray,
    params: SystemParams,
) -> Schedule:
    """Unclipped schedule for decisions m; local tasks carry zero allocation."""
    m = np.asarray(m, dtype=np.int64)
    if m.size != int(np.sum(mask)):
        raise ShapeError(f"{m.size} decisions for {int(np.sum(mask))} real positions")
    m_padded = padded_decisions(m, mask)
    alloc = unpad(allocate_batch(net, features[None], m_padded[None], params)[0], mask)
    return Schedule.from_arrays(m, alloc[:, 0], alloc[:, 1], alloc[:, 2])


# ---------------------------------------------------------------------------
# sliding candidates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Candidate:
    m: tuple[int, ...]
    schedule: Schedule | None
    utility: float
    shift_index: int
    offset: int


@dataclass
class SacDecision:
    schedule: Schedule
    report: CostReport
    shift_index: int
    candidates: list[Candidate] = field(default_factory=list)
    fallback: bool = False

    @property
    def utility(self) -> float:
        return self.report.U


def shifted_probabilities(
    net: SchedulerNet, features: np.ndarray, mask: np.ndarray, offsets: list[int]
) -> np.ndarray:
    """Offload probabilities for each shifted input, realigned to task order: (k, N)."""
    batch = np.stack([shift(features, j) for j in offsets])
    probs = net.predict(batch)
    return np.stack([unpad(inverse_shift(p, j), mask) for p, j in zip(probs, offsets)])


def select_candidate(
    nets: TwoStageNet,
    instance: Instance,
    params: SystemParams,
    probs: np.ndarray,
    offsets: list[int],
    sigma: float,
    features: np.ndarray,
    mask: np.ndarray,
) -> SacDecision:
    """Threshold, allocate, clip, and evaluate each candidate; keep the minimum utility.

    Ties go to the smaller shift index. If no candidate can be clipped into the budget,
    the all-local schedule is returned with fallback set.
    """
    decisions = (probs >= sigma).astype(np.int64)
    unique, inverse = np.unique(decisions, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).ravel()
    m_padded = np.stack([padded_decisions(m, mask) for m in unique])
    x = np.broadcast_to(features, (len(unique),) + features.shape)
    allocs = allocate_batch(nets.resource, x, m_padded, params)

    solved: list[tuple[Schedule | None, float]] = []
    for m, alloc in zip(unique, allocs):
        a = unpad(alloc, mask)
        raw = Schedule.from_arrays(m, a[:, 0], a[:, 1], a[:, 2])
        try:
            clipped = clip_to_constraints(raw, params)
        except InfeasibleError:
            solved.append((None, np.inf))
            continue
        solved.append((clipped, evaluate(instance, clipped, params).U))

    candidates = [
        Candidate(
            m=tuple(int(v) for v in decisions[i]),
            schedule=solved[inverse[i]][0],
            utility=solved[inverse[i]][1],
            shift_index=i,
            offset=offsets[i],
        )
        for i in range(len(offsets))
    ]
    best: Candidate | None = None
    for cand in candidates:
        if cand.schedule is not None and (best is None or cand.utility < best.utility):
            best = cand

    if best is None or best.schedule is None:
        logger.warning(f"No feasible SAC candidate for N = {instance.n}; using all-local")
        local = Schedule.all_local(instance.n)
        return SacDecision(
            schedule=local,
            report=evaluate(instance, local, params),
            shift_index=-1,
            candidates=candidates,
            fallback=True,
        )
    return SacDecision(
        schedule=best.schedule,
        report=evaluate(instance, best.schedule, params),
        shift_index=best.shift_index,
        candidates=candidates,
    )


def tsnet_sac_schedule(
    nets: TwoStageNet, instance: Instance, params: SystemParams, cfg: SacConfig
) -> SacDecision:
    """Best of k shifted two-stage predictions under the exact utility."""
    features, mask = nets.features(instance)
    offsets = shift_offsets(cfg.k, nets.extender.n_bar, cfg.unit_shifts)
    probs = shifted_probabilities(nets.offload, features, mask, offsets)
    return select_candidate(nets, instance, params, probs, offsets, cfg.sigma, features, mask)


def tsnet_schedule(
    nets: TwoStageNet, instance: Instance, params: SystemParams, sigma: float
) -> SacDecision:
    """Plain two-stage prediction: the single unshifted candidate."""
    return tsnet_sac_schedule(nets, instance, params, SacConfig(k=1, sigma=sigma))
