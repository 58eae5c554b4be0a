from __future__ import annotations

import numpy as np
import pytest

from berteam.model import BERTeam
from berteam.nn import tensor as T
from berteam.nn.gradcheck import PreconditionError, grad_check
from berteam.nn.layers import (
    ArchConfig,
    ConfigError,
    EncoderLayer,
    Linear,
    MultiHeadAttention,
    forward_linear,
    multi_head_attention,
    scaled_dot_attention,
)
from berteam.nn.tensor import ShapeError, Tensor


def test_forward_linear_identity():
    eye = Tensor(np.eye(2))
    out = forward_linear(eye, Tensor(np.eye(2)), Tensor(np.zeros(2)))
    np.testing.assert_array_equal(out.data, np.eye(2))


def test_forward_linear_hand_arithmetic():
    out = forward_linear(Tensor([[1.0, 2.0]]), Tensor([[1.0], [1.0]]), Tensor([0.0]))
    np.testing.assert_array_equal(out.data, [[3.0]])


def test_forward_linear_shape_mismatch_reports_shapes():
    with pytest.raises(ShapeError, match=r"\(2, 3\)"):
        forward_linear(Tensor(np.zeros((1, 2))), Tensor(np.zeros((2, 3))), Tensor(np.zeros(2)))


def test_linear_layer_grad_check(rng):
    layer = Linear(4, 3, rng)
    x = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
    proj = rng.normal(size=(3, 3))
    params = [("x", x), *layer.named_parameters()]
    rep = grad_check(lambda: T.tsum(T.mul(layer(x), proj)), params, h=1e-5, tol=1e-6)
    assert rep.passed, str(rep)


def test_attention_single_token_weight_is_one(rng):
    q = Tensor(rng.normal(size=(1, 4)))
    _, w = scaled_dot_attention(q, q, q)
    np.testing.assert_array_equal(w.data, [[1.0]])


def test_attention_equal_keys_give_uniform_weights(rng):
    q = Tensor(rng.normal(size=(3, 4)))
    k = Tensor(np.tile(rng.normal(size=(1, 4)), (3, 1)))
    _, w = scaled_dot_attention(q, k, k)
    np.testing.assert_allclose(w.data, np.full((3, 3), 1 / 3), atol=1e-15)


def test_multi_head_attention_rows_sum_to_one(rng):
    x = rng.normal(size=(3, 8))
    _, layer = multi_head_attention(x, x, x, n_heads=2, rng=rng)
    np.testing.assert_allclose(layer.last_weights.sum(axis=-1), 1.0, atol=1e-12)
    assert layer.last_weights.shape == (2, 3, 3)


def test_multi_head_attention_indivisible_dim():
    with pytest.raises(ConfigError):
        multi_head_attention(np.zeros((2, 6)), np.zeros((2, 6)), np.zeros((2, 6)), n_heads=4)


def test_multi_head_attention_grad_check(rng):
    layer = MultiHeadAttention(8, 2, rng)
    x = Tensor(rng.normal(size=(3, 8)), requires_grad=True)
    proj = rng.normal(size=(3, 8))
    rep = grad_check(lambda: T.tsum(T.mul(layer(x, x, x), proj)), [("x", x), *layer.named_parameters()])
    assert rep.max_rel_error < 1e-5, str(rep)


def test_transformer_block_grad_check(rng):
    cfg = ArchConfig(1, 1, 8, 16, 2, 0.1, "gelu", True)
    block = EncoderLayer(cfg, rng).eval()
    x = Tensor(rng.normal(size=(2, 3, 8)))
    proj = rng.normal(size=(2, 3, 8))
    rep = grad_check(lambda: T.tsum(T.mul(block(x), proj)), block, h=1e-4, tol=1e-4)
    assert rep.passed, str(rep)


def test_grad_check_rejects_dropout_in_training_mode():
    model = BERTeam(3, 2, ArchConfig(1, 1, 8, 16, 2, 0.1), seed=0)
    model.train()
    with pytest.raises(PreconditionError):
        grad_check(lambda: T.tsum(model.logits(np.array([[3, 3]]))), model)


def test_grad_check_reports_worst_parameters(rng):
    a = Tensor(rng.normal(size=3), requires_grad=True)

    def wrong():
        # forward computes sum(a^2) but the backward of a detached copy hides one factor
        return T.tsum(T.mul(a, Tensor(a.data.copy())))

    rep = grad_check(wrong, [("a", a)], tol=1e-4)
    assert not rep.passed
    assert rep.worst(1)[0][0] == "a"
    assert "FAILED" in str(rep)


@pytest.mark.parametrize("kwargs", [dict(embed_dim=10, n_heads=4), dict(dropout_rate=1.0), dict(activation="swish")])
def test_arch_config_validation(kwargs):
    with pytest.raises(ConfigError):
        ArchConfig(**kwargs)


def test_state_dict_round_trip(rng):
    a = Linear(3, 2, rng)
    b = Linear(3, 2, np.random.default_rng(99))
    b.load_state_dict(a.state_dict())
    x = Tensor(rng.normal(size=(1, 3)))
    np.testing.assert_array_equal(a(x).data, b(x).data)
