# ABOUTME: Delay/energy/utility model of single-server MEC task offloading
# ABOUTME: Pure evaluation, constraint checking, and constraint clipping

import logging
from typing import NamedTuple

import numpy as np

from edgesched.exceptions import InfeasibleError, InvalidArgumentError
from edgesched.types import (
    CostReport,
    FeasibilityReport,
    Instance,
    Schedule,
    SystemParams,
    TaskInfo,
    Violation,
)

logger = logging.getLogger(__name__)

# Relative slack on bounds so that a rescaled budget sum is not flagged for rounding.
FEASIBILITY_RTOL = 1e-9


class OffloadCost(NamedTuple):
    t_ul: float
    t_dl: float
    t_exe: float
    e_ul: float
    e_dl: float
    e_exe: float


def local_cost(task: TaskInfo, params: SystemParams) -> tuple[float, float]:
    """Delay (s) and energy (J) of computing the task on the terminal."""
    delay = task.c / params.f_loc
    energy = params.k_loc * params.f_loc**2 * task.c
    return delay, energy


def link_rate(p: float, h: float, w_band: float, params: SystemParams) -> float:
    """Shannon rate (bit/s) of a link with power p, gain h, and bandwidth w_band."""
    if p <= 0 or h <= 0 or w_band <= 0:
        raise InvalidArgumentError(
            f"link rate needs positive power, gain, and bandwidth (got {p}, {h}, {w_band})"
        )
    return float(link_rates(np.float64(p), np.float64(h), w_band, params.n0_w_per_hz))


def link_rates(p: np.ndarray, h: np.ndarray, w_band: float, n0: float) -> np.ndarray:
    """Vectorised Shannon rate; callers guarantee positive inputs."""
    return w_band * np.log2(1.0 + p * h / (n0 * w_band))


def offload_cost(
    task: TaskInfo, p_ul: float, p_dl: float, f_ap: float, params: SystemParams
) -> OffloadCost:
    """Transfer and execution costs of running the task on the MEC server."""
    if f_ap <= 0:
        raise InvalidArgumentError(f"MEC frequency must be positive, got {f_ap}")
    t_ul = task.u / link_rate(p_ul, task.h_ul, params.w_ul, params)
    t_dl = task.d / link_rate(p_dl, task.h_dl, params.w_dl, params)
    t_exe = task.c / f_ap
    return OffloadCost(
        t_ul=t_ul,
        t_dl=t_dl,
        t_exe=t_exe,
        e_ul=p_ul * t_ul,
        e_dl=p_dl * t_dl,
        e_exe=params.k_ap * f_ap**2 * task.c,
    )


def task_costs(
    instance: Instance, schedule: Schedule, params: SystemParams
) -> tuple[np.ndarray, np.ndarray]:
    """Per-task delay and energy arrays for a schedule."""
    if schedule.n != instance.n:
        raise InvalidArgumentError(
            f"schedule has {schedule.n} entries but instance has {instance.n} tasks"
        )
    cols = instance.arrays()
    alloc = schedule.arrays()
    off = alloc["m"] == 1
    for key in ("p_ul", "p_dl", "f_ap"):
        if np.any(alloc[key][off] <= 0):
            raise InvalidArgumentError(f"offloaded tasks need positive {key}")

    c = cols["c"]
    delay = c / params.f_loc
    energy = params.k_loc * params.f_loc**2 * c

    if off.any():
        p_ul, p_dl, f_ap = alloc["p_ul"][off], alloc["p_dl"][off], alloc["f_ap"][off]
        n0 = params.n0_w_per_hz
        t_ul = cols["u"][off] / link_rates(p_ul, cols["h_ul"][off], params.w_ul, n0)
        t_dl = cols["d"][off] / link_rates(p_dl, cols["h_dl"][off], params.w_dl, n0)
        t_exe = c[off] / f_ap
        delay = delay.copy()
        energy = energy.copy()
        delay[off] = t_ul + t_dl + t_exe
        energy[off] = p_ul * t_ul + p_dl * t_dl + params.k_ap * f_ap**2 * c[off]
    return delay, energy


def evaluate(instance: Instance, schedule: Schedule, params: SystemParams) -> CostReport:
    """Evaluate delay, energy, utility, and feasibility of a schedule."""
    delay, energy = task_costs(instance, schedule, params)
    t_mean = float(np.mean(delay))
    e_total = float(np.sum(energy))
    feasibility = check_constraints(schedule, params)
    return CostReport(
        per_task_delay=delay.tolist(),
        per_task_energy=energy.tolist(),
        T=t_mean,
        E=e_total,
        U=params.lam * t_mean + (1.0 - params.lam) * e_total,
        feasible=feasibility.feasible,
        violations=feasibility.violations,
    )


def _box_violations(
    name: str, values: np.ndarray, off: np.ndarray, lo: float, hi: float
) -> list[Violation]:
    out = []
    for i in np.flatnonzero(off):
        v = float(values[i])
        if v < lo * (1 - FEASIBILITY_RTOL):
            out.append(Violation(constraint=name, task_index=int(i), amount=lo - v))
        elif v > hi * (1 + FEASIBILITY_RTOL):
            out.append(Violation(constraint=name, task_index=int(i), amount=v - hi))
    return out


def check_access_count(instance: Instance, params: SystemParams) -> Instance:
    """Reject instances with more tasks than the system admits."""
    if instance.n > params.n_bar:
        raise InvalidArgumentError(
            f"instance has {instance.n} tasks; at most n_bar={params.n_bar} are admitted"
        )
    return instance


def check_constraints(schedule: Schedule, params: SystemParams) -> FeasibilityReport:
    """Report every violated bound; only offloaded tasks are constrained."""
    alloc = schedule.arrays()
    off = alloc["m"] == 1
    violations = [
        *_box_violations("f_ap_box", alloc["f_ap"], off, params.f_ap_min, params.f_ap_max),
        *_box_violations("p_ul_box", alloc["p_ul"], off, params.p_ul_min, params.p_ul_max),
        *_box_violations("p_dl_box", alloc["p_dl"], off, params.p_dl_min, params.p_dl_max),
    ]
    total = float(alloc["f_ap"][off].sum())
    if total > params.f_total * (1 + FEASIBILITY_RTOL):
        violations.append(
            Violation(constraint="f_ap_budget", task_index=None, amount=total - params.f_total)
        )
    return FeasibilityReport(feasible=not violations, violations=violations)


def rescale_to_budget(f_ap: np.ndarray, params: SystemParams) -> np.ndarray:
    """Proportionally shrink frequencies to fit the budget, pinning at f_ap_min.

    Tasks that would drop below the minimum are pinned there and the remaining
    budget is re-spread over the others until no new task gets pinned.
    """
    n = f_ap.size
    if n * params.f_ap_min > params.f_total * (1 + FEASIBILITY_RTOL):
        raise InfeasibleError(
            f"{n} offloaded tasks need at least {n * params.f_ap_min:.4g} Hz "
            f"but the budget is {params.f_total:.4g} Hz"
        )
    out = f_ap.astype(np.float64, copy=True)
    pinned = np.zeros(n, dtype=bool)
    while True:
        free = ~pinned
        budget = params.f_total - params.f_ap_min * pinned.sum()
        scaled = out[free] * (budget / out[free].sum())
        newly = scaled < params.f_ap_min
        if not newly.any():
            out[free] = scaled
            return out
        idx = np.flatnonzero(free)[newly]
        out[idx] = params.f_ap_min
        pinned[idx] = True


def clip_to_constraints(schedule: Schedule, params: SystemParams) -> Schedule:
    """Clamp offloaded allocations into their boxes and repair the frequency budget.

    Raises InfeasibleError when even minimum frequencies exceed the budget.
    """
    if check_constraints(schedule, params).feasible:
        return schedule

    alloc = schedule.arrays()
    off = alloc["m"] == 1
    p_ul = np.clip(alloc["p_ul"], params.p_ul_min, params.p_ul_max)
    p_dl = np.clip(alloc["p_dl"], params.p_dl_min, params.p_dl_max)
    f_ap = np.clip(alloc["f_ap"], params.f_ap_min, params.f_ap_max)

    if f_ap[off].sum() > params.f_total * (1 + FEASIBILITY_RTOL):
        logger.debug(f"Rescaling {int(off.sum())} offloaded frequencies to the MEC budget")
        f_ap[off] = rescale_to_budget(f_ap[off], params)

    return Schedule.from_arrays(alloc["m"], p_ul, p_dl, f_ap)
