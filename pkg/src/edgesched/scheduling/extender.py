# ABOUTME: Pads variable-length task sequences to n_bar rows and masks the pads back out
# ABOUTME: Also the circular shifts that rotate padded sequences and their inverses

from typing import Literal, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from edgesched.exceptions import InvalidArgumentError, ShapeError

PadMode = Literal["outlier", "zero", "random"]


class ExtenderConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    n_bar: int = Field(default=40, ge=1, description="Padded sequence length")
    pad_value: float = Field(default=-1.0, description="Token written to pad rows in outlier mode")
    pad_mode: PadMode = "outlier"
    seed: int = Field(default=0, ge=0, description="Seed of random-mode pad rows")


def pad(features: np.ndarray, cfg: ExtenderConfig) -> tuple[np.ndarray, np.ndarray]:
    """Extend N x F normalized features to n_bar x F; mask is true exactly on real rows.

    Random-mode pads are uniform in [0, 1], drawn from cfg.seed, so they look like tasks.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError(f"features must be N x F, got shape {x.shape}")
    n, f = x.shape
    if n > cfg.n_bar:
        raise InvalidArgumentError(f"{n} tasks exceed the padded length n_bar = {cfg.n_bar}")

    if cfg.pad_mode == "outlier":
        rows = np.full((cfg.n_bar - n, f), cfg.pad_value)
    elif cfg.pad_mode == "zero":
        rows = np.zeros((cfg.n_bar - n, f))
    else:
        rows = np.random.default_rng(cfg.seed).random((cfg.n_bar - n, f))
    mask = np.arange(cfg.n_bar) < n
    return np.concatenate([x, rows]), mask


def pad_batch(
    batch: Sequence[np.ndarray], cfg: ExtenderConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Pad each N_i x F array and stack to (B, n_bar, F) with a (B, n_bar) mask."""
    padded = [pad(x, cfg) for x in batch]
    return np.stack([p for p, _ in padded]), np.stack([m for _, m in padded])


def unpad(output: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Keep the real-position rows of output, in order."""
    mask = np.asarray(mask, dtype=bool)
    if output.shape[0] != mask.shape[0]:
        raise ShapeError(
            f"output has {output.shape[0]} positions but mask has {mask.shape[0]}"
        )
    return output[mask]


def _check_offset(seq: np.ndarray, j: int) -> None:
    if not 0 <= j < seq.shape[0]:
        raise InvalidArgumentError(f"shift {j} outside [0, {seq.shape[0]})")


def shift(seq: np.ndarray, j: int) -> np.ndarray:
    """Rotate rows right by j: [a, b, c] shifted by 1 is [c, a, b]."""
    _check_offset(seq, j)
    return np.roll(seq, j, axis=0)


def inverse_shift(seq: np.ndarray, j: int) -> np.ndarray:
    _check_offset(seq, j)
    return np.roll(seq, -j, axis=0)


def shift_offsets(k: int, n_bar: int, unit: bool = False) -> list[int]:
    """k distinct offsets in [0, n_bar), always starting at 0.

    Evenly spaced offsets floor(i * n_bar / k) are nested when k divides a larger k,
    so candidate sets grow monotonically along 1, 5, 10, 20, 40.
    """
    if not 1 <= k <= n_bar:
        raise InvalidArgumentError(f"shift count k = {k} outside [1, {n_bar}]")
    if unit:
        return list(range(k))
    return [(i * n_bar) // k for i in range(k)]
