# ABOUTME: Reference schedulers and the method-name dispatch shared by the CLI and the bench
# ABOUTME: Learned baselines reuse the two-stage pipeline with a different backbone and no shifts

from dataclasses import dataclass, field
from typing import Literal, get_args

import numpy as np

from edgesched.exceptions import InvalidArgumentError, MissingCheckpointError
from edgesched.ga import GaConfig, ga_solve
from edgesched.model import clip_to_constraints
from edgesched.oracle import OracleConfig, enumerate_optimal
from edgesched.scheduling.sac import SacConfig, TwoStageNet, tsnet_sac_schedule
from edgesched.types import Instance, Schedule, SystemParams

Method = Literal[
    "tsnet-sac", "tsnet", "mlp", "mlp-mixer", "all-local", "all-offload", "ga", "oracle"
]
METHODS: tuple[str, ...] = get_args(Method)
LEARNED_METHODS = ("tsnet-sac", "tsnet", "mlp", "mlp-mixer")


def all_local_schedule(instance: Instance) -> Schedule:
    return Schedule.all_local(instance.n)


def mid_box_schedule(instance: Instance, params: SystemParams) -> Schedule:
    """Every task offloaded at the midpoint of each allocation box, before clipping."""
    n = instance.n
    return Schedule.from_arrays(
        np.ones(n, dtype=np.int64),
        np.full(n, (params.p_ul_min + params.p_ul_max) / 2.0),
        np.full(n, (params.p_dl_min + params.p_dl_max) / 2.0),
        np.full(n, (params.f_ap_min + params.f_ap_max) / 2.0),
    )


def all_offload_schedule(instance: Instance, params: SystemParams) -> Schedule:
    return clip_to_constraints(mid_box_schedule(instance, params), params)


@dataclass
class SchedulerContext:
    """Everything the named methods may need; learned entries are optional."""

    params: SystemParams
    sac: SacConfig = field(default_factory=SacConfig)
    ga: GaConfig = field(default_factory=GaConfig)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    tsnet: TwoStageNet | None = None
    mlp: TwoStageNet | None = None
    mixer: TwoStageNet | None = None

    def nets_for(self, method: str) -> TwoStageNet:
        nets = {
            "tsnet-sac": self.tsnet,
            "tsnet": self.tsnet,
            "mlp": self.mlp,
            "mlp-mixer": self.mixer,
        }[method]
        if nets is None:
            raise MissingCheckpointError(f"method {method} needs a trained checkpoint")
        return nets


def check_method(method: str) -> str:
    if method not in METHODS:
        raise InvalidArgumentError(
            f"unknown method {method!r}; valid methods: {', '.join(METHODS)}"
        )
    return method


def baseline_schedule(method: str, instance: Instance, ctx: SchedulerContext) -> Schedule:
    """Schedule an instance with any named method."""
    check_method(method)
    params = ctx.params
    if method == "all-local":
        return all_local_schedule(instance)
    if method == "all-offload":
        return all_offload_schedule(instance, params)
    if method == "ga":
        return ga_solve(instance, params, ctx.ga, oracle_cfg=ctx.oracle).schedule
    if method == "oracle":
        return enumerate_optimal(instance, params, ctx.oracle)
    sac = ctx.sac if method == "tsnet-sac" else SacConfig(k=1, sigma=ctx.sac.sigma)
    return tsnet_sac_schedule(ctx.nets_for(method), instance, params, sac).schedule
