from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from berteam.games.base import Trajectory
from berteam.model import ContractError
from berteam.nn import tensor as T
from berteam.nn.gradcheck import grad_check
from berteam.rl import LearnerConfig, LearnerPolicy, PolicyLearner, discounted_returns


def small(kind="reinforce-baseline", **kw):
    return PolicyLearner(LearnerConfig(kind=kind, hidden=(8, 8), n_features=3, n_actions=4, **kw), seed=0)


def traj(rng, n=4, n_features=3, n_actions=4):
    t = Trajectory()
    for _ in range(n):
        t.append(rng.normal(size=n_features), int(rng.integers(n_actions)), float(rng.normal()))
    return t


def test_returns_examples():
    np.testing.assert_allclose(discounted_returns([1, 1, 1], 0.5), [1.75, 1.5, 1.0])
    np.testing.assert_array_equal(discounted_returns([0.3, -1.0, 2.0], 0.0), [0.3, -1.0, 2.0])
    with pytest.raises(ContractError):
        discounted_returns([], 0.9)


@given(st.lists(st.floats(-5, 5), min_size=2, max_size=20), st.floats(0, 0.99))
def test_returns_suffix_property(rewards, gamma):
    g = discounted_returns(rewards, gamma)
    np.testing.assert_allclose(g[:-1], np.asarray(rewards[:-1]) + gamma * g[1:], atol=1e-9)


def test_zero_head_is_uniform(rng):
    learner = small()
    learner.zero_policy_head()
    np.testing.assert_allclose(learner.action_probs(rng.normal(size=3)), 0.25, atol=1e-15)


def test_greedy_act_is_argmax(rng):
    learner = small()
    obs = rng.normal(size=3)
    assert learner.act(obs, rng, greedy=True) == int(np.argmax(learner.action_probs(obs)))


def test_action_marginals_match_policy(rng):
    learner = small()
    obs = rng.normal(size=3)
    p = learner.action_probs(obs)
    counts = np.bincount([learner.act(obs, rng) for _ in range(100_000)], minlength=4)
    assert stats.chisquare(counts, p * counts.sum()).pvalue > 0.01


def test_observation_shape_is_checked(rng):
    with pytest.raises(ContractError):
        small().act(np.zeros(5), rng)


def test_converged_value_gives_zero_policy_gradient(rng):
    learner = small()
    head = learner.value.layers[-1]
    head.W.data[:] = 0.0
    head.b.data[:] = 1.0  # V(s) = 1 = return of a one-step episode with reward 1
    trajs = []
    for _ in range(3):
        t = Trajectory()
        t.append(rng.normal(size=3), int(rng.integers(4)), 1.0)
        trajs.append(t)
    policy_loss, _ = learner.losses(trajs)
    learner.policy.zero_grad()
    policy_loss.backward()
    assert all(np.all(p.grad == 0) for p in learner.policy.parameters())


def test_two_armed_bandit(rng):
    learner = PolicyLearner(LearnerConfig(hidden=(8, 8), n_features=1, n_actions=2, lr=0.01, value_lr=0.01), seed=1)
    obs = np.ones(1)
    for _ in range(2000):
        a = learner.act(obs, rng)
        t = Trajectory()
        t.append(obs, a, 1.0 if a == 0 else 0.0)
        learner.update([t])
    assert learner.action_probs(obs)[0] > 0.9


def test_plain_reinforce_combined_loss_grad_check(rng):
    # without a baseline the advantage is the return itself, so the summed loss is exact
    learner = small("reinforce", entropy_coef=0.01)
    trajs = [traj(rng), traj(rng, 2)]
    rep = grad_check(lambda: T.add(*learner.losses(trajs)), learner, tol=1e-4)
    assert rep.passed, str(rep)


def test_baseline_losses_grad_check_per_network(rng):
    learner = small(entropy_coef=0.01)
    trajs = [traj(rng), traj(rng, 3)]
    assert grad_check(lambda: learner.losses(trajs)[0], learner.policy).passed
    assert grad_check(lambda: learner.losses(trajs)[1], learner.value).passed


def test_update_keeps_valid_distribution_and_ignores_order(rng):
    trajs = [traj(rng), traj(rng, 2), traj(rng, 5)]
    a, b = small(), small()
    a.update(trajs)
    b.update(trajs[::-1])
    obs = rng.normal(size=3)
    pa = a.action_probs(obs)
    assert pa.sum() == pytest.approx(1.0, abs=1e-12) and np.all(pa >= 0)
    np.testing.assert_allclose(pa, b.action_probs(obs), atol=1e-12)


def test_update_needs_trajectories():
    with pytest.raises(ContractError):
        small().update([Trajectory()])


def test_clone_is_independent(rng):
    a = small()
    b = a.clone()
    b.update([traj(rng)])
    obs = rng.normal(size=3)
    assert not np.allclose(a.action_probs(obs), b.action_probs(obs))


def test_learner_policy_plays_gridctf(rng):
    from berteam.games import GridCTF, StayPolicy

    learner = PolicyLearner(LearnerConfig(hidden=(8, 8)), seed=0)
    res = GridCTF(max_steps=20).play([[LearnerPolicy(learner)] * 2, [StayPolicy()] * 2], rng)
    assert len(res.trajectories[0, 0]) == res.steps
    assert (1, 0) not in res.trajectories
