# ABOUTME: OffloadNet and ResourceNet: embed MLP, encoder backbone, head MLP, logistic output
# ABOUTME: Backbones are the transformer encoder or the mlp / mlp-mixer baselines

import logging
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from edgesched.exceptions import InvalidArgumentError, ShapeError
from edgesched.nn.layers import (
    GELU,
    EncoderLayer,
    LayerNorm,
    Linear,
    MixerBlock,
    MlpBlock,
    Module,
    Sequential,
    Sigmoid,
    sinusoidal_encoding,
)

logger = logging.getLogger(__name__)

NetKind = Literal["offload", "resource"]
Backbone = Literal["transformer", "mlp", "mixer"]
Coupling = Literal["dot", "concat", "none"]

TASK_FEATURES = 4
RESOURCE_OUTPUTS = 3  # p_ul, p_dl, f_ap


class NetConfig(BaseModel):
    """Architecture of one scheduling network."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    embed_dim: int = Field(default=32, ge=1)
    encoder_layers: int = Field(default=2, ge=0)
    head_count: int = Field(default=4, ge=1)
    ffn_dim: int = Field(default=64, ge=1)
    dropout: float = Field(default=0.0, ge=0, lt=1)
    backbone: Backbone = "transformer"
    coupling: Coupling = Field(
        default="dot", description="How ResourceNet sees the offload vector"
    )
    positional_encoding: bool = False
    seed: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _heads_divide(self) -> "NetConfig":
        if self.embed_dim % self.head_count != 0:
            raise ValueError(
                f"embed_dim {self.embed_dim} not divisible by head_count {self.head_count}"
            )
        return self


def input_features(kind: NetKind, cfg: NetConfig) -> int:
    if kind == "resource" and cfg.coupling == "concat":
        return TASK_FEATURES + 1
    return TASK_FEATURES


class SchedulerNet(Module):
    """Per-position scheduling network over padded (B, N_bar, F) inputs.

    kind "offload" emits offload probabilities of shape (B, N_bar); kind "resource"
    emits normalized allocations in (0, 1) of shape (B, N_bar, 3).
    """

    def __init__(self, kind: NetKind, cfg: NetConfig, n_bar: int) -> None:
        super().__init__()
        if n_bar < 1:
            raise InvalidArgumentError(f"n_bar must be positive, got {n_bar}")
        self.kind, self.cfg, self.n_bar = kind, cfg, n_bar
        self.in_features = input_features(kind, cfg)
        self.out_features = 1 if kind == "offload" else RESOURCE_OUTPUTS
        rng = np.random.default_rng(cfg.seed)
        e = cfg.embed_dim

        self.embed = self.add_child(
            "embed", Sequential(Linear(self.in_features, e, rng), GELU(), Linear(e, e, rng))
        )
        self.blocks = self.add_child("blocks", Sequential(*self._backbone(rng)))
        self.norm = self.add_child("norm", LayerNorm(e))
        self.head = self.add_child(
            "head", Sequential(Linear(e, e, rng), GELU(), Linear(e, self.out_features, rng))
        )
        self.output = self.add_child("output", Sigmoid())
        self._pe = sinusoidal_encoding(n_bar, e) if cfg.positional_encoding else None

    def _backbone(self, rng: np.random.Generator) -> list[Module]:
        cfg = self.cfg
        e = cfg.embed_dim
        if cfg.backbone == "transformer":
            return [
                EncoderLayer(e, cfg.head_count, cfg.ffn_dim, cfg.dropout, rng)
                for _ in range(cfg.encoder_layers)
            ]
        if cfg.backbone == "mixer":
            return [
                MixerBlock(self.n_bar, e, cfg.ffn_dim, cfg.ffn_dim, rng)
                for _ in range(cfg.encoder_layers)
            ]
        return [MlpBlock(e, cfg.ffn_dim, rng) for _ in range(cfg.encoder_layers)]

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 3 or x.shape[2] != self.in_features:
            raise ShapeError(f"{self.kind} net expects (B, T, {self.in_features}), got {x.shape}")
        if x.shape[1] > self.n_bar:
            raise ShapeError(f"sequence length {x.shape[1]} exceeds n_bar {self.n_bar}")
        h = self.embed(x)
        if self._pe is not None:
            h = h + self._pe[: x.shape[1]]
        out = self.output(self.head(self.norm(self.blocks(h))))
        return out[..., 0] if self.kind == "offload" else out

    def backward(self, dy: np.ndarray) -> np.ndarray:
        if self.kind == "offload":
            dy = dy[..., None]
        dh = self.norm.backward(self.head.backward(self.output.backward(dy)))
        return self.embed.backward(self.blocks.backward(dh))

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Inference forward in eval mode."""
        self.eval()
        return self.forward(x)

    def attention_maps(self) -> list[np.ndarray]:
        """Attention weights of each encoder layer from the latest forward pass."""
        return [
            layer.attn.attention
            for layer in self.blocks.layers
            if isinstance(layer, EncoderLayer) and layer.attn.attention is not None
        ]


def build_network(kind: NetKind, cfg: NetConfig, n_bar: int) -> SchedulerNet:
    net = SchedulerNet(kind, cfg, n_bar)
    logger.debug(f"Built {cfg.backbone} {kind} net with {net.num_parameters()} parameters")
    return net
