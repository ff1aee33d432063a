# ABOUTME: Layers with explicit forward/backward passes over (B, T, D) float64 arrays
# ABOUTME: Linear, activations, LayerNorm, attention, encoder, mixer, and per-position MLP blocks

from typing import Iterator, Literal, TypeVar

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from edgesched.exceptions import InvalidArgumentError, ShapeError

_GELU_C = np.sqrt(2.0 / np.pi)
_GELU_A = 0.044715

M = TypeVar("M", bound="Module")


class Module:
    """Base layer: owns named parameters, their gradients, and child modules.

    backward() overwrites gradients from the cache of the latest forward() call,
    so each module instance is applied once per forward pass.
    """

    def __init__(self) -> None:
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.children: dict[str, "Module"] = {}
        self.training = False

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dy: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)

    def add_param(self, name: str, value: np.ndarray) -> None:
        self.params[name] = value.astype(np.float64)
        self.grads[name] = np.zeros_like(self.params[name])

    def add_child(self, name: str, child: M) -> M:
        self.children[name] = child
        return child

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, np.ndarray, np.ndarray]]:
        """Yield (dotted name, parameter, gradient) in a fixed construction order."""
        for name, value in self.params.items():
            yield f"{prefix}{name}", value, self.grads[name]
        for child_name, child in self.children.items():
            yield from child.named_parameters(f"{prefix}{child_name}.")

    def zero_grad(self) -> None:
        for _, _, grad in self.named_parameters():
            grad.fill(0.0)

    def train(self, mode: bool = True) -> "Module":
        self.training = mode
        for child in self.children.values():
            child.train(mode)
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def num_parameters(self) -> int:
        return sum(p.size for _, p, _ in self.named_parameters())

    def _set_grad(self, name: str, value: np.ndarray) -> None:
        # In place, so references held by an optimizer stay valid.
        self.grads[name][...] = value


def _flat(x: np.ndarray) -> np.ndarray:
    return x.reshape(-1, x.shape[-1])


def softmax_rows(z: np.ndarray) -> np.ndarray:
    """Numerically stable softmax along the last axis."""
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def sinusoidal_encoding(length: int, dim: int) -> np.ndarray:
    """Sinusoidal positional encodings, shape (length, dim)."""
    pos = np.arange(length)[:, None]
    i = np.arange(dim)[None, :]
    angle = pos / (10000 ** (2 * (i // 2) / dim))
    pe = np.zeros((length, dim))
    pe[:, 0::2] = np.sin(angle[:, 0::2])
    pe[:, 1::2] = np.cos(angle[:, 1::2])
    return pe


# ---------------------------------------------------------------------------
# elementary layers
# ---------------------------------------------------------------------------


class Linear(Module):
    """y = x @ W + b over the last axis."""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator) -> None:
        super().__init__()
        self.in_dim, self.out_dim = in_dim, out_dim
        self.add_param("W", rng.normal(0.0, 1.0 / np.sqrt(in_dim), size=(in_dim, out_dim)))
        # Biases start small and random, not zero.
        self.add_param("b", rng.normal(0.0, 0.02, size=out_dim))

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.shape[-1] != self.in_dim:
            raise ShapeError(f"Linear expects last dim {self.in_dim}, got shape {x.shape}")
        self._x = x
        return x @ self.params["W"] + self.params["b"]

    def backward(self, dy: np.ndarray) -> np.ndarray:
        self._set_grad("W", _flat(self._x).T @ _flat(dy))
        self._set_grad("b", _flat(dy).sum(axis=0))
        return dy @ self.params["W"].T


class GELU(Module):
    """Tanh approximation of the Gaussian error linear unit."""

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._x = x
        self._t = np.tanh(_GELU_C * (x + _GELU_A * x**3))
        return 0.5 * x * (1.0 + self._t)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        x, t = self._x, self._t
        du = _GELU_C * (1.0 + 3.0 * _GELU_A * x**2)
        return dy * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t**2) * du)


class Sigmoid(Module):
    def forward(self, x: np.ndarray) -> np.ndarray:
        self._y = 0.5 * (1.0 + np.tanh(0.5 * x))
        return self._y

    def backward(self, dy: np.ndarray) -> np.ndarray:
        return dy * self._y * (1.0 - self._y)


class Dropout(Module):
    """Inverted dropout; identity in eval mode or when rate is zero."""

    def __init__(self, rate: float, rng: np.random.Generator) -> None:
        super().__init__()
        if not 0.0 <= rate < 1.0:
            raise InvalidArgumentError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate
        self._rng = rng
        self._keep: np.ndarray | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        if not self.training or self.rate == 0.0:
            self._keep = None
            return x
        self._keep = (self._rng.random(x.shape) >= self.rate) / (1.0 - self.rate)
        return x * self._keep

    def backward(self, dy: np.ndarray) -> np.ndarray:
        return dy if self._keep is None else dy * self._keep


class LayerNorm(Module):
    """Per-position normalization over the last axis with learned scale and shift.

    Variance is floored at var_floor; constant rows map to zero.
    """

    def __init__(self, dim: int, var_floor: float = 1e-8) -> None:
        super().__init__()
        self.dim, self.var_floor = dim, var_floor
        self.add_param("gamma", np.ones(dim))
        self.add_param("beta", np.zeros(dim))

    def normalize(self, x: np.ndarray) -> np.ndarray:
        """Pre-affine output: zero mean and unit variance per position."""
        mu = x.mean(axis=-1, keepdims=True)
        var = ((x - mu) ** 2).mean(axis=-1, keepdims=True)
        self._floored = var < self.var_floor
        self._sigma = np.sqrt(np.maximum(var, self.var_floor))
        self._xhat = (x - mu) / self._sigma
        return self._xhat

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.shape[-1] != self.dim:
            raise ShapeError(f"LayerNorm expects last dim {self.dim}, got shape {x.shape}")
        return self.normalize(x) * self.params["gamma"] + self.params["beta"]

    def backward(self, dy: np.ndarray) -> np.ndarray:
        xhat, sigma = self._xhat, self._sigma
        self._set_grad("gamma", _flat(dy * xhat).sum(axis=0))
        self._set_grad("beta", _flat(dy).sum(axis=0))
        g = dy * self.params["gamma"]
        m1 = g.mean(axis=-1, keepdims=True)
        # a floored sigma is constant in x
        m2 = np.where(self._floored, 0.0, (g * xhat).mean(axis=-1, keepdims=True))
        return (g - m1 - xhat * m2) / sigma


class Sequential(Module):
    def __init__(self, *layers: Module) -> None:
        super().__init__()
        self.layers = list(layers)
        for i, layer in enumerate(self.layers):
            self.add_child(str(i), layer)

    def forward(self, x: np.ndarray) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, dy: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            dy = layer.backward(dy)
        return dy


class FeedForward(Sequential):
    """Position-wise Linear -> GELU -> Linear."""

    def __init__(self, dim: int, hidden: int, rng: np.random.Generator) -> None:
        super().__init__(Linear(dim, hidden, rng), GELU(), Linear(hidden, dim, rng))


# ---------------------------------------------------------------------------
# attention and blocks
# ---------------------------------------------------------------------------


class MultiHeadSelfAttention(Module):
    """Unmasked multi-head self-attention; pad positions attend and are attended to."""

    def __init__(self, dim: int, heads: int, rng: np.random.Generator) -> None:
        super().__init__()
        if dim % heads != 0:
            raise InvalidArgumentError(f"model dim {dim} not divisible by {heads} heads")
        self.dim, self.heads, self.head_dim = dim, heads, dim // heads
        for name in ("q", "k", "v", "o"):
            self.add_param(f"W{name}", rng.normal(0.0, 1.0 / np.sqrt(dim), size=(dim, dim)))
            self.add_param(f"b{name}", rng.normal(0.0, 0.02, size=dim))
        self.attention: np.ndarray | None = None

    def _split(self, x: np.ndarray) -> np.ndarray:
        b, t, _ = x.shape
        return x.reshape(b, t, self.heads, self.head_dim).transpose(0, 2, 1, 3)

    @staticmethod
    def _merge(x: np.ndarray) -> np.ndarray:
        b, h, t, d = x.shape
        return x.transpose(0, 2, 1, 3).reshape(b, t, h * d)

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 3 or x.shape[-1] != self.dim:
            raise ShapeError(f"attention expects (B, T, {self.dim}), got {x.shape}")
        p = self.params
        q = self._split(x @ p["Wq"] + p["bq"])
        k = self._split(x @ p["Wk"] + p["bk"])
        v = self._split(x @ p["Wv"] + p["bv"])
        scores = q @ k.transpose(0, 1, 3, 2) / np.sqrt(self.head_dim)
        weights = softmax_rows(scores)
        merged = self._merge(weights @ v)
        self._cache = (x, q, k, v, weights, merged)
        self.attention = weights
        return merged @ p["Wo"] + p["bo"]

    def backward(self, dy: np.ndarray) -> np.ndarray:
        x, q, k, v, weights, merged = self._cache
        p = self.params
        self._set_grad("Wo", _flat(merged).T @ _flat(dy))
        self._set_grad("bo", _flat(dy).sum(axis=0))
        d_out = self._split(dy @ p["Wo"].T)

        d_v = weights.transpose(0, 1, 3, 2) @ d_out
        d_weights = d_out @ v.transpose(0, 1, 3, 2)
        d_scores = weights * (d_weights - (d_weights * weights).sum(axis=-1, keepdims=True))
        d_scores /= np.sqrt(self.head_dim)
        d_q = d_scores @ k
        d_k = d_scores.transpose(0, 1, 3, 2) @ q

        dx = np.zeros_like(x)
        for name, grad in (("q", d_q), ("k", d_k), ("v", d_v)):
            g = self._merge(grad)
            self._set_grad(f"W{name}", _flat(x).T @ _flat(g))
            self._set_grad(f"b{name}", _flat(g).sum(axis=0))
            dx += g @ p[f"W{name}"].T
        return dx


class EncoderLayer(Module):
    """Pre-norm encoder layer: x + Attn(LN(x)), then h + FFN(LN(h))."""

    def __init__(
        self, dim: int, heads: int, ffn_dim: int, dropout: float, rng: np.random.Generator
    ) -> None:
        super().__init__()
        self.norm1 = self.add_child("norm1", LayerNorm(dim))
        self.attn = self.add_child("attn", MultiHeadSelfAttention(dim, heads, rng))
        self.drop1 = self.add_child("drop1", Dropout(dropout, rng))
        self.norm2 = self.add_child("norm2", LayerNorm(dim))
        self.ffn = self.add_child("ffn", FeedForward(dim, ffn_dim, rng))
        self.drop2 = self.add_child("drop2", Dropout(dropout, rng))

    def forward(self, x: np.ndarray) -> np.ndarray:
        h = x + self.drop1(self.attn(self.norm1(x)))
        return h + self.drop2(self.ffn(self.norm2(h)))

    def backward(self, dy: np.ndarray) -> np.ndarray:
        dh = dy + self.norm2.backward(self.ffn.backward(self.drop2.backward(dy)))
        return dh + self.norm1.backward(self.attn.backward(self.drop1.backward(dh)))


class MixerBlock(Module):
    """Token mixing across positions then channel mixing per position, both residual.

    Token mixing has a weight per position, so the sequence length is fixed.
    """

    def __init__(
        self, tokens: int, dim: int, token_hidden: int, channel_hidden: int,
        rng: np.random.Generator,
    ) -> None:
        super().__init__()
        self.tokens = tokens
        self.norm1 = self.add_child("norm1", LayerNorm(dim))
        self.token_mlp = self.add_child("token_mlp", FeedForward(tokens, token_hidden, rng))
        self.norm2 = self.add_child("norm2", LayerNorm(dim))
        self.channel_mlp = self.add_child("channel_mlp", FeedForward(dim, channel_hidden, rng))

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 3 or x.shape[1] != self.tokens:
            raise ShapeError(f"mixer block expects {self.tokens} positions, got shape {x.shape}")
        mixed = self.token_mlp(self.norm1(x).transpose(0, 2, 1)).transpose(0, 2, 1)
        h = x + mixed
        return h + self.channel_mlp(self.norm2(h))

    def backward(self, dy: np.ndarray) -> np.ndarray:
        dh = dy + self.norm2.backward(self.channel_mlp.backward(dy))
        d_mixed = self.token_mlp.backward(dh.transpose(0, 2, 1)).transpose(0, 2, 1)
        return dh + self.norm1.backward(d_mixed)


class MlpBlock(Module):
    """Residual per-position feed-forward block with no interaction between positions."""

    def __init__(self, dim: int, hidden: int, rng: np.random.Generator) -> None:
        super().__init__()
        self.norm = self.add_child("norm", LayerNorm(dim))
        self.ffn = self.add_child("ffn", FeedForward(dim, hidden, rng))

    def forward(self, x: np.ndarray) -> np.ndarray:
        return x + self.ffn(self.norm(x))

    def backward(self, dy: np.ndarray) -> np.ndarray:
        return dy + self.norm.backward(self.ffn.backward(dy))


# ---------------------------------------------------------------------------
# declarative construction
# ---------------------------------------------------------------------------

LayerVariant = Literal[
    "linear", "layer-norm", "multi-head-self-attention", "feed-forward", "mixer-block"
]

_REQUIRED_SIZES: dict[str, tuple[str, ...]] = {
    "linear": ("in_dim", "out_dim"),
    "layer-norm": ("dim",),
    "multi-head-self-attention": ("dim",),
    "feed-forward": ("dim", "hidden"),
    "mixer-block": ("tokens", "dim", "token_hidden", "channel_hidden"),
}


class LayerSpec(BaseModel):
    """Declarative description of one layer."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    variant: LayerVariant
    sizes: dict[str, int] = Field(default_factory=dict)
    head_count: int | None = Field(default=None, ge=1)

    @model_validator(mode="after")
    def _consistent(self) -> "LayerSpec":
        missing = [k for k in _REQUIRED_SIZES[self.variant] if k not in self.sizes]
        if missing:
            raise ValueError(f"{self.variant} needs sizes {missing}")
        if any(v < 1 for v in self.sizes.values()):
            raise ValueError("layer sizes must be positive")
        if self.variant == "multi-head-self-attention":
            if self.head_count is None:
                raise ValueError("attention needs head_count")
            if self.sizes["dim"] % self.head_count != 0:
                raise ValueError(
                    f"dim {self.sizes['dim']} not divisible by head_count {self.head_count}"
                )
        return self


def build_layer(spec: LayerSpec, rng: np.random.Generator) -> Module:
    s = spec.sizes
    if spec.variant == "linear":
        return Linear(s["in_dim"], s["out_dim"], rng)
    if spec.variant == "layer-norm":
        return LayerNorm(s["dim"])
    if spec.variant == "multi-head-self-attention":
        assert spec.head_count is not None
        return MultiHeadSelfAttention(s["dim"], spec.head_count, rng)
    if spec.variant == "feed-forward":
        return FeedForward(s["dim"], s["hidden"], rng)
    return MixerBlock(s["tokens"], s["dim"], s["token_hidden"], s["channel_hidden"], rng)
