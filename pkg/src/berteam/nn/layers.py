"""Parameterised building blocks for the team transformer and policy nets."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .tensor import ShapeError, Tensor


class ConfigError(ValueError):
    """Invalid layer or architecture configuration."""


@dataclass
class ArchConfig:
    n_encoder_layers: int = 3
    n_decoder_layers: int = 3
    embed_dim: int = 128
    feedforward_dim: int = 512
    n_heads: int = 4
    dropout_rate: float = 0.1
    activation: str = "gelu"
    norm_first: bool = True

    def __post_init__(self):
        if self.embed_dim % self.n_heads:
            raise ConfigError(f"embed_dim {self.embed_dim} is not divisible by n_heads {self.n_heads}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f"dropout_rate must lie in [0, 1), got {self.dropout_rate}")
        if self.activation not in ("gelu", "relu"):
            raise ConfigError(f"unknown activation {self.activation!r}")


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None) -> np.ndarray:
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape or (fan_in, fan_out))


class Module:
    """Container that discovers parameters on its attributes in definition order."""

    training: bool = True

    def named_parameters(self, prefix: str = "") -> list[tuple[str, Tensor]]:
        out: list[tuple[str, Tensor]] = []
        for key, val in vars(self).items():
            name = f"{prefix}{key}"
            if isinstance(val, Tensor) and val.requires_grad:
                out.append((name, val))
            elif isinstance(val, Module):
                out.extend(val.named_parameters(name + "."))
            elif isinstance(val, list):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        out.extend(item.named_parameters(f"{name}.{i}."))
        return out

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def train(self, mode: bool = True):
        self.training = mode
        for val in vars(self).values():
            if isinstance(val, Module):
                val.train(mode)
            elif isinstance(val, list):
                for item in val:
                    if isinstance(item, Module):
                        item.train(mode)
        return self

    def eval(self):
        return self.train(False)

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        params = dict(self.named_parameters())
        missing = set(params) - set(state)
        extra = set(state) - set(params)
        if missing or extra:
            raise KeyError(f"state mismatch: missing={sorted(missing)} unexpected={sorted(extra)}")
        for name, p in params.items():
            arr = np.asarray(state[name], dtype=np.float64)
            if arr.shape != p.shape:
                raise ShapeError(f"{name}: expected {p.shape}, got {arr.shape}")
            p.data = arr.copy()


def param(data, name=None) -> Tensor:
    return Tensor(data, requires_grad=True, name=name)


def forward_linear(x: Tensor, W: Tensor, b: Tensor | None) -> Tensor:
    if x.shape[-1] != W.shape[0] or (b is not None and b.shape != (W.shape[1],)):
        raise ShapeError(
            f"linear: x {x.shape}, W {W.shape}, b {None if b is None else b.shape} are incompatible"
        )
    out = T.matmul(x, W)
    return out if b is None else T.add(out, b)


class Linear(Module):
    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator, bias: bool = True):
        self.W = param(glorot(rng, d_in, d_out))
        self.b = param(np.zeros(d_out)) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        return forward_linear(x, self.W, self.b)


class Embedding(Module):
    def __init__(self, n: int, d: int, rng: np.random.Generator):
        self.weight = param(glorot(rng, n, d))

    def __call__(self, ids) -> Tensor:
        return T.embedding(self.weight, ids)


class LayerNorm(Module):
    def __init__(self, d: int, eps: float = 1e-5):
        self.gamma = param(np.ones(d))
        self.beta = param(np.zeros(d))
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        return T.layer_norm(x, self.gamma, self.beta, self.eps)


class Dropout(Module):
    def __init__(self, rate: float):
        self.rate = rate
        self.rng: np.random.Generator | None = None

    def __call__(self, x: Tensor) -> Tensor:
        return T.dropout(x, self.rate, self.rng, self.training)


def scaled_dot_attention(q: Tensor, k: Tensor, v: Tensor, mask: np.ndarray | None = None):
    """Attention over the last two axes; returns (output, weights).

    ``mask`` is boolean, broadcastable to the score shape, True where a key
    may be attended to.
    """
    d = q.shape[-1]
    scores = T.mul(T.matmul(q, T.swapaxes(k, -1, -2)), 1.0 / math.sqrt(d))
    if mask is not None:
        scores = T.add(scores, np.where(mask, 0.0, -1e9))
    weights = T.softmax(scores, axis=-1)
    return T.matmul(weights, v), weights


def split_heads(x: Tensor, n_heads: int) -> Tensor:
    *lead, L, D = x.shape
    x = T.reshape(x, (*lead, L, n_heads, D // n_heads))
    return T.swapaxes(x, -2, -3)


def merge_heads(x: Tensor) -> Tensor:
    *lead, H, L, dh = x.shape
    x = T.swapaxes(x, -2, -3)
    return T.reshape(x, (*lead, L, H * dh))


class MultiHeadAttention(Module):
    def __init__(self, d: int, n_heads: int, rng: np.random.Generator):
        if d % n_heads:
            raise ConfigError(f"embed dim {d} is not divisible by {n_heads} heads")
        self.n_heads = n_heads
        self.q_proj = Linear(d, d, rng)
        self.k_proj = Linear(d, d, rng)
        self.v_proj = Linear(d, d, rng)
        self.out_proj = Linear(d, d, rng)
        self.last_weights: np.ndarray | None = None

    def __call__(self, q: Tensor, k: Tensor, v: Tensor, key_mask: np.ndarray | None = None) -> Tensor:
        """``key_mask`` is (..., L_k) boolean, True for real keys."""
        h = self.n_heads
        qh = split_heads(self.q_proj(q), h)
        kh = split_heads(self.k_proj(k), h)
        vh = split_heads(self.v_proj(v), h)
        mask = None if key_mask is None else np.asarray(key_mask, bool)[..., None, None, :]
        out, w = scaled_dot_attention(qh, kh, vh, mask)
        self.last_weights = w.data
        return self.out_proj(merge_heads(out))


def multi_head_attention(q, k, v, n_heads: int, mask=None, rng=None):
    """Functional form: a fresh randomly projected attention layer.

    Mostly useful in tests; models hold a ``MultiHeadAttention`` instance.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    layer = MultiHeadAttention(as_t(q).shape[-1], n_heads, rng)
    return layer(as_t(q), as_t(k), as_t(v), mask), layer


def as_t(x) -> Tensor:
    return T.as_tensor(x)


class FeedForward(Module):
    def __init__(self, d: int, d_ff: int, rng: np.random.Generator, activation: str = "gelu"):
        self.fc1 = Linear(d, d_ff, rng)
        self.fc2 = Linear(d_ff, d, rng)
        self.activation = activation

    def __call__(self, x: Tensor) -> Tensor:
        h = self.fc1(x)
        h = T.gelu(h) if self.activation == "gelu" else T.relu(h)
        return self.fc2(h)


class EncoderLayer(Module):
    def __init__(self, cfg: ArchConfig, rng: np.random.Generator):
        d = cfg.embed_dim
        self.norm_first = cfg.norm_first
        self.self_attn = MultiHeadAttention(d, cfg.n_heads, rng)
        self.ff = FeedForward(d, cfg.feedforward_dim, rng, cfg.activation)
        self.norm1 = LayerNorm(d)
        self.norm2 = LayerNorm(d)
        self.drop1 = Dropout(cfg.dropout_rate)
        self.drop2 = Dropout(cfg.dropout_rate)

    def __call__(self, x: Tensor, key_mask=None) -> Tensor:
        if self.norm_first:
            h = self.norm1(x)
            x = x + self.drop1(self.self_attn(h, h, h, key_mask))
            x = x + self.drop2(self.ff(self.norm2(x)))
            return x
        x = self.norm1(x + self.drop1(self.self_attn(x, x, x, key_mask)))
        return self.norm2(x + self.drop2(self.ff(x)))


class DecoderLayer(Module):
    """Bidirectional self-attention over the team, then cross-attention to memory."""

    def __init__(self, cfg: ArchConfig, rng: np.random.Generator):
        d = cfg.embed_dim
        self.norm_first = cfg.norm_first
        self.self_attn = MultiHeadAttention(d, cfg.n_heads, rng)
        self.cross_attn = MultiHeadAttention(d, cfg.n_heads, rng)
        self.ff = FeedForward(d, cfg.feedforward_dim, rng, cfg.activation)
        self.norm1 = LayerNorm(d)
        self.norm2 = LayerNorm(d)
        self.norm3 = LayerNorm(d)
        self.drop1 = Dropout(cfg.dropout_rate)
        self.drop2 = Dropout(cfg.dropout_rate)
        self.drop3 = Dropout(cfg.dropout_rate)

    def __call__(self, x: Tensor, memory: Tensor, memory_mask=None) -> Tensor:
        if self.norm_first:
            h = self.norm1(x)
            x = x + self.drop1(self.self_attn(h, h, h))
            h = self.norm2(x)
            x = x + self.drop2(self.cross_attn(h, memory, memory, memory_mask))
            return x + self.drop3(self.ff(self.norm3(x)))
        x = self.norm1(x + self.drop1(self.self_attn(x, x, x)))
        x = self.norm2(x + self.drop2(self.cross_attn(x, memory, memory, memory_mask)))
        return self.norm3(x + self.drop3(self.ff(x)))


def iter_dropouts(module: Module):
    for val in vars(module).values():
        if isinstance(val, Dropout):
            yield val
        elif isinstance(val, Module):
            yield from iter_dropouts(val)
        elif isinstance(val, list):
            for item in val:
                if isinstance(item, Module):
                    yield from iter_dropouts(item)
