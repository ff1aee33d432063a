# ABOUTME: Encodes labeled instances into padded batches and trains one scheduling network
# ABOUTME: ResourceNet batches are teacher-forced: coupled with the label's offload vector

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from edgesched.datagen import Normalizer, normalize, task_features
from edgesched.exceptions import DivergenceError, InvalidArgumentError
from edgesched.nn.losses import bce, mse
from edgesched.nn.networks import Coupling, NetConfig, NetKind, SchedulerNet, build_network
from edgesched.nn.optim import Adam, Batch, LossFn, train_step
from edgesched.scheduling.extender import ExtenderConfig, pad_batch
from edgesched.scheduling.sac import allocation_to_unit, couple_features, padded_decisions
from edgesched.types import LabeledInstance, SystemParams

logger = logging.getLogger(__name__)


class TrainConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    epochs: int = Field(default=30, ge=0)
    batch_size: int = Field(default=64, ge=1)
    learning_rate: float = Field(default=1e-3, ge=0)
    betas: tuple[float, float] = (0.9, 0.999)
    val_fraction: float = Field(default=0.1, ge=0, lt=1)
    augment_shifts: bool = Field(
        default=False, description="Roll each minibatch by a random offset"
    )
    seed: int = Field(default=0, ge=0)


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float | None = None
    val_accuracy: float | None = None
    val_mse: float | None = None


@dataclass
class TrainingRun:
    net: SchedulerNet
    curve: list[EpochStats] = field(default_factory=list)

    @property
    def final(self) -> EpochStats | None:
        return self.curve[-1] if self.curve else None


BatchHook = Callable[[Batch], None]


def _padded_features(
    records: Sequence[LabeledInstance], normalizer: Normalizer, ext: ExtenderConfig
) -> tuple[np.ndarray, np.ndarray]:
    if not records:
        raise InvalidArgumentError("cannot encode an empty set of records")
    return pad_batch([normalize(task_features(r.instance), normalizer) for r in records], ext)


def encode_offload(
    records: Sequence[LabeledInstance], normalizer: Normalizer, ext: ExtenderConfig
) -> Batch:
    """Inputs (B, n_bar, 4), offload labels (B, n_bar), real-row mask."""
    x, mask = _padded_features(records, normalizer, ext)
    target = np.zeros(mask.shape)
    for i, r in enumerate(records):
        target[i, mask[i]] = r.schedule.m
    return Batch(x=x, target=target, mask=mask)


def encode_resource(
    records: Sequence[LabeledInstance],
    normalizer: Normalizer,
    ext: ExtenderConfig,
    params: SystemParams,
    coupling: Coupling,
) -> Batch:
    """Inputs coupled with label decisions; targets are allocations mapped to [0, 1].

    Only offloaded real tasks carry a target, so the mask is real AND offloaded.
    """
    x, mask = _padded_features(records, normalizer, ext)
    m_padded = np.stack([padded_decisions(r.schedule.m, mask[i]) for i, r in enumerate(records)])
    target = np.zeros(mask.shape + (3,))
    for i, r in enumerate(records):
        alloc = np.stack([r.schedule.p_ul, r.schedule.p_dl, r.schedule.f_ap], axis=1)
        target[i, mask[i]] = allocation_to_unit(alloc, params)
    loss_mask = mask & (m_padded == 1.0)
    return Batch(x=couple_features(x, m_padded, coupling), target=target, mask=loss_mask)


def _loss_fn(kind: NetKind) -> LossFn:
    return bce if kind == "offload" else mse


def validate(net: SchedulerNet, batch: Batch) -> tuple[float, float]:
    """Loss plus accuracy at 0.5 (offload) or MSE (resource) over masked positions."""
    prediction = net.predict(batch.x)
    value, _ = _loss_fn(net.kind)(prediction, batch.target, batch.mask)
    if not np.isfinite(value):
        raise DivergenceError(f"validation loss became {value}")
    if net.kind == "offload":
        hits = (prediction >= 0.5) == (batch.target >= 0.5)
        return value, float(hits[batch.mask].mean())
    return value, value


def _roll(batch: Batch, j: int) -> Batch:
    return Batch(
        x=np.roll(batch.x, j, axis=1),
        target=np.roll(batch.target, j, axis=1),
        mask=np.roll(batch.mask, j, axis=1),
    )


def fit(
    net: SchedulerNet,
    train: Batch,
    val: Batch | None,
    cfg: TrainConfig,
    on_batch: BatchHook | None = None,
) -> list[EpochStats]:
    """Minibatch Adam training; deterministic for a fixed seed and network init."""
    loss_fn = _loss_fn(net.kind)
    optimizer = Adam(lr=cfg.learning_rate, beta1=cfg.betas[0], beta2=cfg.betas[1])
    rng = np.random.default_rng(cfg.seed)
    total = train.x.shape[0]
    curve: list[EpochStats] = []

    for epoch in range(1, cfg.epochs + 1):
        net.train()
        order = rng.permutation(total)
        loss_sum, weight_sum = 0.0, 0.0
        for start in range(0, total, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            batch = Batch(x=train.x[idx], target=train.target[idx], mask=train.mask[idx])
            if cfg.augment_shifts:
                batch = _roll(batch, int(rng.integers(net.n_bar)))
            if not batch.mask.any():
                continue
            if on_batch is not None:
                on_batch(batch)
            optimizer, value = train_step(net, batch, optimizer, loss_fn)
            weight = float(batch.mask.sum())
            loss_sum += value * weight
            weight_sum += weight

        stats = EpochStats(
            epoch=epoch, train_loss=loss_sum / weight_sum if weight_sum else float("nan")
        )
        if val is not None and val.mask.any():
            stats.val_loss, metric = validate(net, val)
            if net.kind == "offload":
                stats.val_accuracy = metric
            else:
                stats.val_mse = metric
        curve.append(stats)
        logger.info(
            f"{net.kind} epoch {epoch}/{cfg.epochs}: train {stats.train_loss:.5f}"
            + (f", val {stats.val_loss:.5f}" if stats.val_loss is not None else "")
        )
    net.eval()
    return curve


def train_network(
    kind: NetKind,
    train_records: Sequence[LabeledInstance],
    normalizer: Normalizer,
    params: SystemParams,
    net_cfg: NetConfig,
    ext_cfg: ExtenderConfig,
    train_cfg: TrainConfig,
    val_records: Sequence[LabeledInstance] = (),
    on_batch: BatchHook | None = None,
) -> TrainingRun:
    """Build and train one network on labeled records."""
    net = build_network(kind, net_cfg, ext_cfg.n_bar)

    def encode(records: Sequence[LabeledInstance]) -> Batch:
        if kind == "offload":
            return encode_offload(records, normalizer, ext_cfg)
        return encode_resource(records, normalizer, ext_cfg, params, net_cfg.coupling)

    train = encode(train_records)
    val = encode(val_records) if val_records else None
    logger.info(
        f"Training {net_cfg.backbone} {kind} net ({net.num_parameters()} parameters) on "
        f"{len(train_records)} instances"
    )
    return TrainingRun(net=net, curve=fit(net, train, val, train_cfg, on_batch))
