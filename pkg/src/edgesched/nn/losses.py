# ABOUTME: Masked binary cross-entropy and mean-squared-error losses with gradients
# ABOUTME: Means run over real (unmasked) positions only; pad positions contribute nothing

from typing import Literal

import numpy as np

from edgesched.exceptions import InvalidArgumentError, ShapeError

LossKind = Literal["bce", "mse"]

_PROB_FLOOR = 1e-12


def _expand_mask(mask: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    m = np.asarray(mask, dtype=np.float64)
    while m.ndim < len(shape):
        m = m[..., None]
    try:
        m = np.broadcast_to(m, shape)
    except ValueError as exc:
        raise ShapeError(f"mask shape {np.shape(mask)} does not fit prediction {shape}") from exc
    if m.sum() == 0:
        raise InvalidArgumentError("loss mask selects no positions")
    return m


def _check(prediction: np.ndarray, target: np.ndarray) -> None:
    if prediction.shape != target.shape:
        raise ShapeError(f"prediction {prediction.shape} and target {target.shape} differ")


def bce(
    prediction: np.ndarray, target: np.ndarray, mask: np.ndarray
) -> tuple[float, np.ndarray]:
    """Binary cross-entropy on probabilities; returns (loss, dloss/dprediction)."""
    _check(prediction, target)
    m = _expand_mask(mask, prediction.shape)
    count = m.sum()
    p = np.clip(prediction, _PROB_FLOOR, 1.0 - _PROB_FLOOR)
    per = -(target * np.log(p) + (1.0 - target) * np.log(1.0 - p))
    grad = m * (p - target) / (p * (1.0 - p)) / count
    return float((per * m).sum() / count), grad


def mse(
    prediction: np.ndarray, target: np.ndarray, mask: np.ndarray
) -> tuple[float, np.ndarray]:
    _check(prediction, target)
    m = _expand_mask(mask, prediction.shape)
    count = m.sum()
    diff = prediction - target
    return float((m * diff**2).sum() / count), 2.0 * m * diff / count


def loss(
    kind: LossKind, prediction: np.ndarray, target: np.ndarray, mask: np.ndarray
) -> tuple[float, np.ndarray]:
    if kind == "bce":
        return bce(prediction, target, mask)
    if kind == "mse":
        return mse(prediction, target, mask)
    raise InvalidArgumentError(f"unknown loss kind {kind!r}")
