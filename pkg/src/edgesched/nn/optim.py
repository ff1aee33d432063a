# ABOUTME: Adam optimizer over a module's named parameters and the single-batch train step
# ABOUTME: Updates are in place, so parameter arrays keep their identity across steps

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from edgesched.exceptions import DivergenceError
from edgesched.nn.layers import Module


@dataclass
class Adam:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def step(self, module: Module) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for name, param, grad in module.named_parameters():
            if name not in self.m:
                self.m[name] = np.zeros_like(param)
                self.v[name] = np.zeros_like(param)
            m, v = self.m[name], self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad**2
            param -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


@dataclass(frozen=True)
class Batch:
    """Network inputs with targets and the real-position mask, all padded to N_bar."""

    x: np.ndarray
    target: np.ndarray
    mask: np.ndarray


LossFn = Callable[[np.ndarray, np.ndarray, np.ndarray], tuple[float, np.ndarray]]


def train_step(
    module: Module, batch: Batch, optimizer: Adam, loss_fn: LossFn
) -> tuple[Adam, float]:
    """One forward/backward/update pass; raises DivergenceError on a non-finite loss."""
    module.zero_grad()
    prediction = module.forward(batch.x)
    value, grad = loss_fn(prediction, batch.target, batch.mask)
    if not np.isfinite(value):
        raise DivergenceError(f"loss became {value}")
    module.backward(grad)
    optimizer.step(module)
    return optimizer, value
