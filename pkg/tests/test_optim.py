from __future__ import annotations

import numpy as np
import pytest

from berteam.nn.optim import Adam, AdamState, adam_step
from berteam.nn.tensor import ShapeError, Tensor


def test_zero_gradient_leaves_params_unchanged():
    p = np.array([1.0, -2.0])
    adam_step([p], [np.zeros(2)], AdamState())
    np.testing.assert_array_equal(p, [1.0, -2.0])


def test_first_step_moves_by_lr():
    # m_hat = g and v_hat = g^2 after bias correction, so the step is lr * g/|g|
    p = np.array([0.0])
    st = AdamState(lr=0.001)
    adam_step([p], [np.array([1.0])], st)
    assert p[0] == pytest.approx(-0.001, rel=1e-6)
    assert st.step == 1


def test_constant_gradient_step_approaches_lr():
    p = np.array([0.0])
    st = AdamState(lr=0.01)
    prev = 0.0
    for _ in range(500):
        adam_step([p], [np.array([3.0])], st)
        step, prev = prev - p[0], p[0]
    assert step == pytest.approx(0.01, rel=1e-3)


def test_shape_mismatch_raises():
    with pytest.raises(ShapeError):
        adam_step([np.zeros(2)], [np.zeros(3)], AdamState())


@pytest.mark.parametrize("betas", [(0.0, 0.9), (0.9, 1.0)])
def test_betas_must_lie_in_open_interval(betas):
    with pytest.raises(ValueError):
        AdamState(beta1=betas[0], beta2=betas[1])


def test_optimizer_minimizes_quadratic():
    x = Tensor(np.array([3.0, -4.0]), requires_grad=True)
    opt = Adam([x], lr=0.1)
    for _ in range(500):
        opt.zero_grad()
        loss = (x * x).sum()
        loss.backward()
        opt.step()
    np.testing.assert_allclose(x.data, 0.0, atol=1e-2)
