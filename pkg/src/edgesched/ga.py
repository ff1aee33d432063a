# ABOUTME: Hybrid genetic algorithm that labels instances with near-optimal schedules
# ABOUTME: Binary offload genes; the continuous allocation is solved exactly per candidate

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from edgesched.exceptions import BatchItemError, InfeasibleError
from edgesched.model import evaluate
from edgesched.oracle import OracleConfig, ResourceSolver
from edgesched.types import Instance, LabeledInstance, SystemParams

logger = logging.getLogger(__name__)


class GaConfig(BaseModel):
    """GA hyperparameters; mutation_rate None means 1/N."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    population_size: int = Field(default=100, ge=3)
    generations: int = Field(default=200, ge=0)
    tournament_size: int = Field(default=3, ge=1)
    crossover_rate: float = Field(default=0.9, ge=0, le=1)
    mutation_rate: float | None = Field(default=None, ge=0, le=1)
    elitism_count: int = Field(default=2, ge=0)
    seed: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _population_fits_elites(self) -> "GaConfig":
        if self.population_size < self.elitism_count + 2:
            raise ValueError("population_size must be at least elitism_count + 2")
        return self


@dataclass
class GaRun:
    """Outcome of one GA run: incumbent plus its per-generation utility history."""

    best_m: np.ndarray
    best_utility: float
    history: list[float] = field(default_factory=list)
    evaluations: int = 0


class GeneticSolver:
    def __init__(
        self,
        instance: Instance,
        params: SystemParams,
        cfg: GaConfig,
        oracle_cfg: OracleConfig | None = None,
    ) -> None:
        self.instance = instance
        self.params = params
        self.cfg = cfg
        self.resources = ResourceSolver(instance, params, oracle_cfg)
        self._rng = np.random.default_rng(cfg.seed)
        self._cache: dict[bytes, float] = {}
        n = instance.n
        self.mutation_rate = cfg.mutation_rate if cfg.mutation_rate is not None else 1.0 / n

    def fitness(self, chromosome: np.ndarray) -> float:
        """Negative utility; -inf for vectors the frequency budget cannot host."""
        key = chromosome.tobytes()
        if key not in self._cache:
            try:
                self._cache[key] = -self.resources.utility(chromosome)
            except InfeasibleError:
                self._cache[key] = -np.inf
        return self._cache[key]

    def _evaluate(self, population: np.ndarray) -> np.ndarray:
        return np.array([self.fitness(ind) for ind in population])

    def _tournament(self, population: np.ndarray, fit: np.ndarray) -> np.ndarray:
        picks = self._rng.integers(0, len(population), size=self.cfg.tournament_size)
        return population[picks[np.argmax(fit[picks])]]

    def _offspring(self, p1: np.ndarray, p2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        n = p1.size
        if self._rng.random() < self.cfg.crossover_rate:
            take = self._rng.random(n) < 0.5
            c1, c2 = np.where(take, p1, p2), np.where(take, p2, p1)
        else:
            c1, c2 = p1.copy(), p2.copy()
        c1 ^= (self._rng.random(n) < self.mutation_rate).astype(c1.dtype)
        c2 ^= (self._rng.random(n) < self.mutation_rate).astype(c2.dtype)
        return c1, c2

    def run(self, initial_population: np.ndarray | None = None) -> GaRun:
        cfg = self.cfg
        n = self.instance.n
        if initial_population is None:
            population = self._rng.integers(0, 2, size=(cfg.population_size, n), dtype=np.int8)
        else:
            population = np.asarray(initial_population, dtype=np.int8).reshape(-1, n)
        fit = self._evaluate(population)

        lead = int(np.argmax(fit))
        best_m, best_fit = population[lead].copy(), float(fit[lead])
        history = [-best_fit]

        for generation in range(cfg.generations):
            order = np.argsort(-fit, kind="stable")
            children = [population[i].copy() for i in order[: cfg.elitism_count]]
            while len(children) < len(population):
                c1, c2 = self._offspring(
                    self._tournament(population, fit), self._tournament(population, fit)
                )
                children.append(c1)
                if len(children) < len(population):
                    children.append(c2)
            population = np.stack(children)
            fit = self._evaluate(population)

            lead = int(np.argmax(fit))
            if fit[lead] > best_fit:
                best_m, best_fit = population[lead].copy(), float(fit[lead])
                logger.debug(f"Generation {generation}: incumbent utility {-best_fit:.6g}")
            history.append(-best_fit)

        if not np.isfinite(best_fit):
            raise InfeasibleError("GA found no offload vector that fits the MEC budget")
        return GaRun(
            best_m=best_m.astype(np.int64),
            best_utility=-best_fit,
            history=history,
            evaluations=len(self._cache),
        )


def ga_solve(
    instance: Instance,
    params: SystemParams,
    cfg: GaConfig,
    *,
    oracle_cfg: OracleConfig | None = None,
    initial_population: np.ndarray | None = None,
) -> LabeledInstance:
    """Label an instance with the best schedule the GA finds (deterministic per seed)."""
    solver = GeneticSolver(instance, params, cfg, oracle_cfg)
    result = solver.run(initial_population)
    schedule = solver.resources.allocate(result.best_m)
    return LabeledInstance(
        instance=instance,
        schedule=schedule,
        utility=evaluate(instance, schedule, params).U,
        solver_tag="ga",
    )


_Job = tuple[Instance, SystemParams, GaConfig, OracleConfig | None]


def _solve_one(job: _Job) -> LabeledInstance:
    instance, params, cfg, oracle_cfg = job
    return ga_solve(instance, params, cfg, oracle_cfg=oracle_cfg)


def _jobs(
    instances: Sequence[Instance],
    params: SystemParams,
    cfg: GaConfig,
    oracle_cfg: OracleConfig | None,
) -> list[_Job]:
    # Per-instance seeds depend only on the index, never on the worker layout.
    return [
        (inst, params, cfg.model_copy(update={"seed": cfg.seed ^ i}), oracle_cfg)
        for i, inst in enumerate(instances)
    ]


def ga_solve_settled(
    instances: Sequence[Instance],
    params: SystemParams,
    cfg: GaConfig,
    worker_count: int = 1,
    oracle_cfg: OracleConfig | None = None,
) -> list[LabeledInstance | BatchItemError]:
    """Like ga_solve_batch but returns per-instance errors in place of results."""
    jobs = _jobs(instances, params, cfg, oracle_cfg)
    results: list[LabeledInstance | BatchItemError] = []
    if worker_count <= 1 or len(jobs) <= 1:
        for i, job in enumerate(jobs):
            try:
                results.append(_solve_one(job))
            except Exception as exc:
                results.append(BatchItemError(i, exc))
        return results

    with ProcessPoolExecutor(max_workers=worker_count) as pool:
        futures = [pool.submit(_solve_one, job) for job in jobs]
        for i, future in enumerate(futures):
            try:
                results.append(future.result())
            except Exception as exc:
                results.append(BatchItemError(i, exc))
    return results


def ga_solve_batch(
    instances: Sequence[Instance],
    params: SystemParams,
    cfg: GaConfig,
    worker_count: int = 1,
    oracle_cfg: OracleConfig | None = None,
) -> list[LabeledInstance]:
    """Order-preserving batch GA; results do not depend on worker_count."""
    labeled = []
    for item in ga_solve_settled(instances, params, cfg, worker_count, oracle_cfg):
        if isinstance(item, BatchItemError):
            raise item from item.error
        labeled.append(item)
    return labeled
