from .gradcheck import GradCheckReport, PreconditionError, grad_check
from .layers import (
    ArchConfig,
    ConfigError,
    DecoderLayer,
    Dropout,
    Embedding,
    EncoderLayer,
    FeedForward,
    LayerNorm,
    Linear,
    Module,
    MultiHeadAttention,
    forward_linear,
    multi_head_attention,
    scaled_dot_attention,
)
from .optim import Adam, AdamState, adam_step
from .tensor import (
    NumericError,
    ShapeError,
    Tensor,
    no_grad,
    softmax,
    softmax_array,
    softmax_cross_entropy,
)

__all__ = [
    "Adam",
    "AdamState",
    "ArchConfig",
    "ConfigError",
    "DecoderLayer",
    "Dropout",
    "Embedding",
    "EncoderLayer",
    "FeedForward",
    "GradCheckReport",
    "LayerNorm",
    "Linear",
    "Module",
    "MultiHeadAttention",
    "NumericError",
    "PreconditionError",
    "ShapeError",
    "Tensor",
    "adam_step",
    "forward_linear",
    "grad_check",
    "multi_head_attention",
    "no_grad",
    "scaled_dot_attention",
    "softmax",
    "softmax_array",
    "softmax_cross_entropy",
]
