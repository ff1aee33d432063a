# ABOUTME: JSON checkpoint bundles holding networks, the feature normalizer, and training metadata
# ABOUTME: Parameters are stored as {shape, values}; floats round-trip exactly through JSON

import json
import logging
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import BaseModel, Field, ValidationError

from edgesched.datagen import Normalizer
from edgesched.exceptions import CheckpointError, MissingCheckpointError
from edgesched.nn.networks import Backbone, NetConfig, NetKind, SchedulerNet
from edgesched.scheduling.extender import ExtenderConfig

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "edgesched-checkpoint"
CHECKPOINT_VERSION = 1


class StoredParam(BaseModel):
    shape: list[int]
    values: list[float]


class StoredNetwork(BaseModel):
    kind: NetKind
    backbone: Backbone
    n_bar: int
    in_features: int
    config: NetConfig
    params: dict[str, StoredParam]


class CheckpointFile(BaseModel):
    format: str = CHECKPOINT_FORMAT
    version: int = CHECKPOINT_VERSION
    normalizer: Normalizer
    extender: ExtenderConfig
    networks: list[StoredNetwork]
    training: dict[str, Any] = Field(default_factory=dict)


class Checkpoint:
    """Loaded bundle: networks keyed by kind plus the pipeline state they were trained with."""

    def __init__(
        self,
        networks: dict[NetKind, SchedulerNet],
        normalizer: Normalizer,
        extender: ExtenderConfig,
        training: dict[str, Any] | None = None,
    ) -> None:
        self.networks = networks
        self.normalizer = normalizer
        self.extender = extender
        self.training = training or {}

    @property
    def backbone(self) -> Backbone:
        return next(iter(self.networks.values())).cfg.backbone

    def network(self, kind: NetKind) -> SchedulerNet:
        if kind not in self.networks:
            raise MissingCheckpointError(f"checkpoint holds no {kind} network")
        return self.networks[kind]

    def merged(self, other: "Checkpoint") -> "Checkpoint":
        """Combine two bundles; networks of `other` win on kind collisions."""
        return Checkpoint(
            {**self.networks, **other.networks},
            self.normalizer,
            self.extender,
            {**self.training, **other.training},
        )


def _store(net: SchedulerNet) -> StoredNetwork:
    return StoredNetwork(
        kind=net.kind,
        backbone=net.cfg.backbone,
        n_bar=net.n_bar,
        in_features=net.in_features,
        config=net.cfg,
        params={
            name: StoredParam(shape=list(p.shape), values=p.ravel().tolist())
            for name, p, _ in net.named_parameters()
        },
    )


def _restore(stored: StoredNetwork) -> SchedulerNet:
    net = SchedulerNet(stored.kind, stored.config, stored.n_bar)
    if net.in_features != stored.in_features:
        raise CheckpointError(
            f"{stored.kind} network expects {net.in_features} features, file says "
            f"{stored.in_features}"
        )
    names = [name for name, _, _ in net.named_parameters()]
    if sorted(names) != sorted(stored.params):
        raise CheckpointError(f"parameter names of the stored {stored.kind} network do not match")
    for name, param, _ in net.named_parameters():
        entry = stored.params[name]
        if tuple(entry.shape) != param.shape:
            raise CheckpointError(f"{name}: stored shape {entry.shape} != {list(param.shape)}")
        param[...] = np.asarray(entry.values, dtype=np.float64).reshape(param.shape)
    return net


def save_checkpoint(path: Path, checkpoint: Checkpoint) -> None:
    """Write a checkpoint bundle; contents are deterministic for identical networks."""
    document = CheckpointFile(
        normalizer=checkpoint.normalizer,
        extender=checkpoint.extender,
        networks=[_store(net) for net in checkpoint.networks.values()],
        training=checkpoint.training,
    )
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(document.model_dump(mode="json"), f)
    except OSError as exc:
        raise CheckpointError(f"failed to write checkpoint {path}: {exc}") from exc
    logger.info(f"Saved checkpoint with {len(checkpoint.networks)} network(s) to {path}")


def load_checkpoint(path: Path) -> Checkpoint:
    if not path.exists():
        raise MissingCheckpointError(f"checkpoint not found: {path}")
    try:
        with open(path, encoding="utf-8") as f:
            raw = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"failed to read checkpoint {path}: {exc}") from exc
    if not isinstance(raw, dict) or raw.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path} is not an edgesched checkpoint")
    if raw.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {raw.get('version')}")
    try:
        document = CheckpointFile.model_validate(raw)
    except ValidationError as exc:
        raise CheckpointError(f"invalid checkpoint {path}: {exc}") from exc
    if not document.normalizer.fitted:
        raise CheckpointError(f"checkpoint {path} carries an unfitted normalizer")

    networks: dict[NetKind, SchedulerNet] = {}
    for stored in document.networks:
        if stored.kind in networks:
            raise CheckpointError(f"checkpoint {path} holds two {stored.kind} networks")
        networks[stored.kind] = _restore(stored)
    if not networks:
        raise CheckpointError(f"checkpoint {path} holds no networks")
    logger.debug(f"Loaded {sorted(networks)} from {path}")
    return Checkpoint(networks, document.normalizer, document.extender, document.training)
