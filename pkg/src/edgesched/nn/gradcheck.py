# ABOUTME: Central finite-difference verification of analytic gradients
# ABOUTME: Checks a random subset of parameter and input coordinates of any Module

from dataclasses import dataclass

import numpy as np

from edgesched.exceptions import InvalidArgumentError
from edgesched.nn.layers import Module


@dataclass(frozen=True)
class GradCheckResult:
    max_rel_error: float
    checked: int
    worst: str


def relative_error(analytic: float, numeric: float, floor: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def grad_check(
    module: Module,
    x: np.ndarray,
    epsilon: float = 1e-5,
    coordinates: int = 200,
    seed: int = 0,
    floor: float = 1e-5,
    include_input: bool = True,
) -> GradCheckResult:
    """Compare backprop against central differences of loss = sum(output * R).

    R is a fixed random projection so every output element contributes. At most
    `coordinates` coordinates are sampled; smaller modules are checked exhaustively.
    Relative errors use max(|analytic|, |numeric|, floor) as denominator.
    """
    if x.dtype != np.float64:
        raise InvalidArgumentError(f"gradient checks need float64 input, got {x.dtype}")
    module.eval()
    rng = np.random.default_rng(seed)
    x = x.copy()

    out = module.forward(x)
    projection = rng.normal(size=out.shape)

    def objective() -> float:
        return float((module.forward(x) * projection).sum())

    module.zero_grad()
    module.forward(x)
    dx = module.backward(projection)

    targets: list[tuple[str, np.ndarray, np.ndarray]] = [
        (name, param, grad.copy()) for name, param, grad in module.named_parameters()
    ]
    if include_input:
        targets.append(("input", x, dx))
    pool = [(t, i) for t, (_, arr, _) in enumerate(targets) for i in range(arr.size)]
    if len(pool) > coordinates:
        picks = rng.choice(len(pool), size=coordinates, replace=False)
        pool = [pool[i] for i in sorted(picks)]

    worst, worst_name = 0.0, ""
    for t, i in pool:
        name, arr, analytic = targets[t]
        original = arr.flat[i]
        arr.flat[i] = original + epsilon
        plus = objective()
        arr.flat[i] = original - epsilon
        minus = objective()
        arr.flat[i] = original
        numeric = (plus - minus) / (2.0 * epsilon)
        err = relative_error(float(analytic.flat[i]), numeric, floor)
        if err > worst:
            worst, worst_name = err, f"{name}[{i}]"
    return GradCheckResult(max_rel_error=worst, checked=len(pool), worst=worst_name)
