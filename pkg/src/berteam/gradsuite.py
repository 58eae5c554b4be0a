"""Randomized finite-difference checks over every differentiable op and the full models."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .model import BERTeam, MaskedExample, random_mask
from .nn import tensor as T
from .nn.gradcheck import grad_check
from .nn.layers import ArchConfig, DecoderLayer, EncoderLayer, FeedForward, MultiHeadAttention, scaled_dot_attention
from .nn.tensor import Tensor


@dataclass
class GradCase:
    name: str
    max_rel_error: float
    passed: bool
    n_params: int


def _p(rng, *shape, positive=False, away=False) -> Tensor:
    x = rng.normal(size=shape)
    if positive:
        x = 0.5 + np.abs(x)
    elif away:
        # keep clear of kinks at 0 by more than the finite-difference step
        x = np.sign(x) * (0.1 + np.abs(x))
    return T.Tensor(x, requires_grad=True)


def _scalar(out: Tensor, proj: np.ndarray) -> Tensor:
    return T.tsum(T.mul(out, proj))


def _shape(rng, lo=1, hi=4, ndim=None):
    ndim = ndim or int(rng.integers(1, 4))
    return tuple(int(s) for s in rng.integers(lo, hi + 1, size=ndim))


def _op_case(kind: str, rng: np.random.Generator):
    """Returns (params, loss_fn) for one random configuration of ``kind``."""
    if kind in ("add", "sub", "mul", "div"):
        shape = _shape(rng)
        # broadcast the second operand along a random subset of axes
        bshape = tuple(1 if rng.random() < 0.4 else s for s in shape)
        a = _p(rng, *shape)
        b = _p(rng, *bshape, positive=(kind == "div"))
        fn = {"add": T.add, "sub": T.sub, "mul": T.mul, "div": T.div}[kind]
        proj = rng.normal(size=shape)
        return [a, b], lambda: _scalar(fn(a, b), proj)
    if kind == "matmul":
        batch = _shape(rng, 1, 3, int(rng.integers(0, 3))) if rng.random() < 0.7 else ()
        n, m, p = (int(x) for x in rng.integers(1, 5, size=3))
        a = _p(rng, *batch, n, m)
        if rng.random() < 0.3:
            b = _p(rng, m)
            proj = rng.normal(size=(*batch, n))
        else:
            b = _p(rng, *(batch if rng.random() < 0.5 else ()), m, p)
            proj = rng.normal(size=np.broadcast_shapes(a.shape[:-1] + (p,), b.shape[:-2] + (n, p)))
        return [a, b], lambda: _scalar(T.matmul(a, b), proj)
    if kind in ("reshape", "transpose", "swapaxes"):
        shape = _shape(rng, 2, 4, 3)
        a = _p(rng, *shape)
        if kind == "reshape":
            f = lambda: T.reshape(a, (shape[0], -1))
        elif kind == "transpose":
            axes = tuple(int(i) for i in rng.permutation(3))
            f = lambda: T.transpose(a, axes)
        else:
            f = lambda: T.swapaxes(a, 0, 2)
        proj = rng.normal(size=f().shape)
        return [a], lambda: _scalar(f(), proj)
    if kind in ("tsum", "tmean"):
        shape = _shape(rng, 2, 4, 3)
        a = _p(rng, *shape)
        axis = [None, 0, 1, -1, (0, 2)][int(rng.integers(5))]
        keep = bool(rng.random() < 0.5)
        fn = T.tsum if kind == "tsum" else T.tmean
        proj = rng.normal(size=np.asarray(np.sum(np.zeros(shape), axis=axis, keepdims=keep)).shape)
        return [a], lambda: _scalar(fn(a, axis, keep), proj)
    if kind in ("exp", "log", "tanh", "relu", "gelu"):
        shape = _shape(rng)
        a = _p(rng, *shape, positive=(kind == "log"), away=(kind == "relu"))
        fn = getattr(T, kind)
        proj = rng.normal(size=shape)
        return [a], lambda: _scalar(fn(a), proj)
    if kind in ("softmax", "log_softmax"):
        shape = _shape(rng, 2, 5, int(rng.integers(1, 4)))
        a = _p(rng, *shape)
        axis = int(rng.integers(-len(shape), len(shape)))
        fn = getattr(T, kind)
        proj = rng.normal(size=shape)
        return [a], lambda: _scalar(fn(a, axis), proj)
    if kind == "embedding":
        n, d = int(rng.integers(2, 6)), int(rng.integers(1, 5))
        table = _p(rng, n, d)
        ids = rng.integers(n, size=_shape(rng, 1, 4, 2))
        proj = rng.normal(size=(*ids.shape, d))
        return [table], lambda: _scalar(T.embedding(table, ids), proj)
    if kind == "layer_norm":
        shape = _shape(rng, 2, 5, int(rng.integers(1, 4)))
        x, g, b = _p(rng, *shape), _p(rng, shape[-1]), _p(rng, shape[-1])
        proj = rng.normal(size=shape)
        return [x, g, b], lambda: _scalar(T.layer_norm(x, g, b), proj)
    if kind == "concat":
        shape = _shape(rng, 1, 4, 2)
        a, b = _p(rng, *shape), _p(rng, *shape)
        axis = int(rng.integers(2))
        proj = rng.normal(size=np.concatenate([a.data, b.data], axis=axis).shape)
        return [a, b], lambda: _scalar(T.concat([a, b], axis=axis), proj)
    if kind == "take":
        shape = _shape(rng, 2, 5, 2)
        a = _p(rng, *shape)
        axis = int(rng.integers(2))
        idx = rng.integers(shape[axis], size=int(rng.integers(1, 6)))
        proj = rng.normal(size=np.take(a.data, idx, axis=axis).shape)
        return [a], lambda: _scalar(T.take(a, idx, axis=axis), proj)
    if kind == "cross_entropy":
        b, n = int(rng.integers(1, 6)), int(rng.integers(2, 6))
        logits = _p(rng, b, n)
        targets = rng.integers(n, size=b)
        w = rng.random(b) + 0.1 if rng.random() < 0.5 else None
        return [logits], lambda: T.softmax_cross_entropy(logits, targets, w)
    if kind == "attention":
        lq, lk, d = (int(x) for x in rng.integers(1, 4, size=3))
        q, k, v = _p(rng, 2, lq, d), _p(rng, 2, lk, d), _p(rng, 2, lk, d)
        mask = None
        if rng.random() < 0.5:
            mask = rng.random((2, 1, lk)) < 0.7
            mask[..., 0] = True
        proj = rng.normal(size=(2, lq, d))
        return [q, k, v], lambda: _scalar(scaled_dot_attention(q, k, v, mask)[0], proj)
    raise ValueError(kind)


OP_KINDS = (
    "add", "sub", "mul", "div", "matmul", "reshape", "transpose", "swapaxes", "tsum", "tmean",
    "exp", "log", "tanh", "relu", "gelu", "softmax", "log_softmax", "embedding", "layer_norm",
    "concat", "take", "cross_entropy", "attention",
)  # fmt: skip


def _layer_case(kind: str, rng: np.random.Generator):
    heads = int(rng.choice([1, 2]))
    d = heads * int(rng.integers(2, 4))
    cfg = ArchConfig(1, 1, d, 2 * d, heads, 0.0, str(rng.choice(["gelu", "relu"])), bool(rng.random() < 0.5))
    x = Tensor(rng.normal(size=(2, 3, d)))
    mem = Tensor(rng.normal(size=(2, 2, d)))
    proj = rng.normal(size=(2, 3, d))
    if kind == "mha":
        layer = MultiHeadAttention(d, heads, rng)
        return layer, lambda: _scalar(layer(x, mem, mem, np.array([[True, True], [True, False]])), proj)
    if kind == "feedforward":
        layer = FeedForward(d, 2 * d, rng, cfg.activation)
        return layer, lambda: _scalar(layer(x), proj)
    if kind == "encoder":
        layer = EncoderLayer(cfg, rng)
        return layer, lambda: _scalar(layer(x), proj)
    layer = DecoderLayer(cfg, rng)
    return layer, lambda: _scalar(layer(x, mem), proj)


def _model_case(rng: np.random.Generator):
    n, k = int(rng.integers(2, 6)), int(rng.integers(1, 4))
    heads = int(rng.choice([1, 2]))
    cfg = ArchConfig(1, 1, 4 * heads, 8, heads, 0.1, "gelu", bool(rng.random() < 0.5))
    model = BERTeam(n, k, cfg, seed=int(rng.integers(2**31)))
    model.eval()
    batch = [
        MaskedExample(tuple(int(t) for t in rng.integers(n, size=k)), random_mask(k, rng), None, float(rng.random() + 0.1))
        for _ in range(3)
    ]
    return model, lambda: model.mlm_loss(batch)


def _learner_case(rng: np.random.Generator):
    from .games.base import Trajectory
    from .rl import LearnerConfig, PolicyLearner

    h = int(rng.integers(2, 6))
    kind = str(rng.choice(["reinforce-baseline", "reinforce"]))
    learner = PolicyLearner(LearnerConfig(kind=kind, hidden=(h, h), n_features=3, n_actions=4, entropy_coef=0.01), seed=int(rng.integers(2**31)))
    trajs = []
    for _ in range(2):
        t = Trajectory()
        for _ in range(int(rng.integers(1, 5))):
            t.append(rng.normal(size=3), int(rng.integers(4)), float(rng.normal()))
        trajs.append(t)

    # The advantage treats the value estimate as a constant, so each loss is
    # checked against its own network only.
    return (
        (learner.policy, lambda: learner.losses(trajs)[0]),
        (learner.value, lambda: learner.losses(trajs)[1]),
    )


def run_suite(n_op_configs: int = 92, n_layer_configs: int = 8, n_model_configs: int = 4, n_learner_configs: int = 4, seed: int = 0, tol: float = 1e-4, progress: Callable[[GradCase], None] | None = None) -> list[GradCase]:
    rng = np.random.default_rng(seed)
    cases: list[GradCase] = []

    def run(name, params, fn, max_coords=None):
        rep = grad_check(fn, params, tol=tol, max_coords=max_coords, rng=rng)
        n = sum(p.data.size for _, p in (params.named_parameters() if hasattr(params, "named_parameters") else params))
        case = GradCase(name, rep.max_rel_error, rep.passed, n)
        cases.append(case)
        if progress:
            progress(case)

    for i in range(n_op_configs):
        kind = OP_KINDS[i % len(OP_KINDS)]
        params, fn = _op_case(kind, rng)
        run(f"op:{kind}#{i}", [(f"p{j}", p) for j, p in enumerate(params)], fn)
    layer_kinds = ("mha", "feedforward", "encoder", "decoder")
    for i in range(n_layer_configs):
        kind = layer_kinds[i % len(layer_kinds)]
        layer, fn = _layer_case(kind, rng)
        run(f"layer:{kind}#{i}", layer, fn)
    for i in range(n_model_configs):
        model, fn = _model_case(rng)
        run(f"model:berteam#{i}", model, fn, max_coords=12)
    for i in range(n_learner_configs):
        (pnet, ploss), (vnet, vloss) = _learner_case(rng)
        run(f"model:learner-policy#{i}", pnet, ploss)
        run(f"model:learner-value#{i}", vnet, vloss)
    return cases
