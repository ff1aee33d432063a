# ABOUTME: Exact small-N solver: continuous resource allocation for a fixed offload vector
# ABOUTME: plus exhaustive enumeration of offload vectors for ground-truth schedules

import logging
from typing import Callable, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from edgesched.exceptions import InfeasibleError, InvalidArgumentError, ProblemTooLargeError
from edgesched.model import FEASIBILITY_RTOL, evaluate, link_rates
from edgesched.types import Instance, LabeledInstance, Schedule, SystemParams

logger = logging.getLogger(__name__)

MAX_ENUMERATION_N = 16
_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0
_FREQ_BISECTION_STEPS = 80
_MULTIPLIER_MAX_STEPS = 200
# Utilities within this relative distance of the minimum count as ties.
_TIE_RTOL = 1e-12

OffloadVector = Sequence[int] | np.ndarray


class OracleConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    power_grid_points: int = Field(default=64, gt=0)
    refine_iterations: int = Field(default=40, gt=0)
    multiplier_tolerance: float = Field(default=1e-9, gt=0)


def _golden_section(
    objective: Callable[[np.ndarray], np.ndarray], lo: np.ndarray, hi: np.ndarray, iterations: int
) -> np.ndarray:
    """Vectorised golden-section search; each row of lo/hi is an independent bracket."""
    a, b = lo.copy(), hi.copy()
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = objective(x1), objective(x2)
    for _ in range(iterations):
        left = f1 <= f2
        a, b = np.where(left, a, x1), np.where(left, x2, b)
        x1_next = np.where(left, b - _GOLDEN * (b - a), x2)
        x2_next = np.where(left, x1, a + _GOLDEN * (b - a))
        f1_next = np.where(left, objective(x1_next), f2)
        f2_next = np.where(left, f1, objective(x2_next))
        x1, x2, f1, f2 = x1_next, x2_next, f1_next, f2_next
    return (a + b) / 2.0


class ResourceSolver:
    """Solves the continuous allocation for any offload vector of one instance.

    Each task's link powers affect only its own terms, so they are optimised once per
    instance. Frequencies couple through the MEC budget and are solved per offload
    vector by bisection on the budget multiplier.
    """

    def __init__(
        self, instance: Instance, params: SystemParams, cfg: OracleConfig | None = None
    ) -> None:
        self.instance = instance
        self.params = params
        self.cfg = cfg or OracleConfig()
        cols = instance.arrays()
        self._c = cols["c"]
        n = instance.n
        self._w_delay = params.lam / n
        self._w_energy = 1.0 - params.lam

        local_delay = self._c / params.f_loc
        local_energy = params.k_loc * params.f_loc**2 * self._c
        self.local_cost = self._w_delay * local_delay + self._w_energy * local_energy

        self.p_ul, ul_cost = self._optimise_power(
            cols["u"], cols["h_ul"], params.w_ul, params.p_ul_min, params.p_ul_max
        )
        self.p_dl, dl_cost = self._optimise_power(
            cols["d"], cols["h_dl"], params.w_dl, params.p_dl_min, params.p_dl_max
        )
        self.link_cost = ul_cost + dl_cost
        self.f_free = self.frequencies(0.0, np.ones(n, dtype=bool))

    # ------------------------------------------------------------------
    # link powers
    # ------------------------------------------------------------------

    def _optimise_power(
        self, volume: np.ndarray, gain: np.ndarray, band: float, p_min: float, p_max: float
    ) -> tuple[np.ndarray, np.ndarray]:
        n0 = self.params.n0_w_per_hz

        def cost(p: np.ndarray) -> np.ndarray:
            shape = (-1,) + (1,) * (p.ndim - 1)
            t = volume.reshape(shape) / link_rates(p, gain.reshape(shape), band, n0)
            return self._w_delay * t + self._w_energy * p * t

        grid = np.linspace(p_min, p_max, self.cfg.power_grid_points)
        grid_cost = cost(np.broadcast_to(grid, (volume.size, grid.size)))
        best = np.argmin(grid_cost, axis=1)
        lo = grid[np.maximum(best - 1, 0)]
        hi = grid[np.minimum(best + 1, grid.size - 1)]
        refined = _golden_section(cost, lo, hi, self.cfg.refine_iterations)

        grid_best = grid[best]
        refined_cost = cost(refined)
        grid_best_cost = grid_cost[np.arange(volume.size), best]
        p = np.where(refined_cost < grid_best_cost, refined, grid_best)
        # Nothing to send: any power costs zero, keep the minimum.
        p = np.where(volume == 0, p_min, p)
        return p, np.minimum(refined_cost, grid_best_cost)

    # ------------------------------------------------------------------
    # MEC frequencies
    # ------------------------------------------------------------------

    def exe_cost(self, f: np.ndarray, off: np.ndarray) -> np.ndarray:
        c = self._c[off]
        return self._w_delay * c / f + self._w_energy * self.params.k_ap * f**2 * c

    def frequencies(self, mu: float, off: np.ndarray) -> np.ndarray:
        """Per-task minimiser of exe cost + mu*f over the frequency box."""
        params = self.params
        c = self._c[off]
        a = self._w_delay * c
        b = self._w_energy * params.k_ap * c
        lo, hi = params.f_ap_min, params.f_ap_max

        if mu == 0.0:
            if self._w_energy == 0.0 or params.k_ap == 0.0:
                return np.full(c.size, hi)
            stationary = np.cbrt(self._w_delay / (2.0 * self._w_energy * params.k_ap))
            return np.clip(np.full(c.size, stationary), lo, hi)

        def slope(f: np.ndarray) -> np.ndarray:
            return -a / f**2 + 2.0 * b * f + mu

        f_lo = np.full(c.size, lo)
        f_hi = np.full(c.size, hi)
        at_min = slope(f_lo) >= 0
        at_max = slope(f_hi) <= 0
        for _ in range(_FREQ_BISECTION_STEPS):
            mid = (f_lo + f_hi) / 2.0
            up = slope(mid) < 0
            f_lo = np.where(up, mid, f_lo)
            f_hi = np.where(up, f_hi, mid)
        f = (f_lo + f_hi) / 2.0
        return np.where(at_min, lo, np.where(at_max, hi, f))

    def _budget_frequencies(self, off: np.ndarray) -> np.ndarray:
        params = self.params
        count = int(off.sum())
        f = self.f_free[off]
        if f.sum() <= params.f_total * (1 + FEASIBILITY_RTOL):
            return f
        if count * params.f_ap_min > params.f_total * (1 + FEASIBILITY_RTOL):
            raise InfeasibleError(
                f"{count} offloaded tasks exceed the MEC budget even at minimum frequency"
            )
        c = self._c[off]
        mu_lo, mu_hi = 0.0, float(np.max(self._w_delay * c / params.f_ap_min**2))
        for _ in range(_MULTIPLIER_MAX_STEPS):
            if mu_hi - mu_lo <= self.cfg.multiplier_tolerance * mu_hi:
                break
            mu = (mu_lo + mu_hi) / 2.0
            if self.frequencies(mu, off).sum() > params.f_total:
                mu_lo = mu
            else:
                mu_hi = mu
        return self.frequencies(mu_hi, off)

    # ------------------------------------------------------------------
    # offload vectors
    # ------------------------------------------------------------------

    def _as_mask(self, m: OffloadVector) -> np.ndarray:
        mask = np.asarray(m, dtype=np.int64)
        if mask.shape != (self.instance.n,) or np.any((mask != 0) & (mask != 1)):
            raise InvalidArgumentError(
                f"offload vector must be {self.instance.n} binary entries, got {list(m)}"
            )
        return mask == 1

    def utility(self, m: OffloadVector) -> float:
        """Optimal utility for offload vector m without building a Schedule."""
        off = self._as_mask(m)
        total = float(self.local_cost[~off].sum() + self.link_cost[off].sum())
        if off.any():
            total += float(self.exe_cost(self._budget_frequencies(off), off).sum())
        return total

    def allocate(self, m: OffloadVector) -> Schedule:
        off = self._as_mask(m)
        f_ap = np.zeros(self.instance.n)
        if off.any():
            f_ap[off] = self._budget_frequencies(off)
        return Schedule.from_arrays(off.astype(np.int64), self.p_ul, self.p_dl, f_ap)

    def enumerate(self) -> np.ndarray:
        """Return the best offload vector over all 2^N candidates."""
        n = self.instance.n
        if n > MAX_ENUMERATION_N:
            raise ProblemTooLargeError(
                f"enumeration is capped at N = {MAX_ENUMERATION_N}, got N = {n}"
            )
        codes = np.arange(2**n, dtype=np.int64)
        # Bit j of the row is m_j with m_0 most significant, so row order is lexicographic.
        vectors = ((codes[:, None] >> np.arange(n - 1, -1, -1)) & 1).astype(np.int8)

        all_off = np.ones(n, dtype=bool)
        off_cost = self.link_cost + self.exe_cost(self.f_free, all_off)
        utilities = vectors @ (off_cost - self.local_cost) + self.local_cost.sum()
        budget_used = vectors @ self.f_free
        binding = np.flatnonzero(budget_used > self.params.f_total * (1 + FEASIBILITY_RTOL))
        if binding.size:
            logger.debug(f"Solving {binding.size} budget-binding offload vectors")
        for row in binding:
            try:
                utilities[row] = self.utility(vectors[row])
            except InfeasibleError:
                utilities[row] = np.inf

        best = float(np.min(utilities))
        tied = np.flatnonzero(utilities <= best + _TIE_RTOL * abs(best))
        counts = vectors[tied].sum(axis=1)
        chosen = tied[np.lexsort((tied, counts))[0]]
        return vectors[chosen].astype(np.int64)


def solve_resources_given_m(
    instance: Instance, m: OffloadVector, params: SystemParams, cfg: OracleConfig | None = None
) -> tuple[Schedule, float]:
    """Optimal continuous allocation for a fixed offload vector and its utility."""
    schedule = ResourceSolver(instance, params, cfg).allocate(m)
    return schedule, evaluate(instance, schedule, params).U


def enumerate_optimal(
    instance: Instance, params: SystemParams, cfg: OracleConfig | None = None
) -> Schedule:
    """Minimum-utility feasible schedule by exhaustive enumeration (N <= 16).

    Ties go to fewer offloaded tasks, then the lexicographically smallest vector.
    """
    solver = ResourceSolver(instance, params, cfg)
    return solver.allocate(solver.enumerate())


def oracle_label(
    instance: Instance, params: SystemParams, cfg: OracleConfig | None = None
) -> LabeledInstance:
    schedule = enumerate_optimal(instance, params, cfg)
    return LabeledInstance(
        instance=instance,
        schedule=schedule,
        utility=evaluate(instance, schedule, params).U,
        solver_tag="oracle",
    )
