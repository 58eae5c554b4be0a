from __future__ import annotations

import numpy as np
import pytest
from scipy import stats

from berteam.model import ContractError
from berteam.replay import OUTCOME_WEIGHTED, ReplayBuffer, WeightedExample

WIN = np.array([0.8, 0.5, 0.2])  # W(T) of the three-team toy
TEAMS = [(0, 1), (1, 2), (0, 2)]


def ipw_buffer(gen_probs, n_draws, rng, mode="winners"):
    buf = ReplayBuffer(capacity=n_draws, mode=OUTCOME_WEIGHTED if mode == "outcome" else "winners-inverse-prob")
    for i in rng.choice(3, size=n_draws, p=gen_probs):
        if mode == "outcome":
            buf.push_outcome_weighted(TEAMS[i], float(WIN[i]), gen_probs[i])
        elif rng.random() < WIN[i]:
            buf.push_winner(TEAMS[i], gen_probs[i])
    return buf


@pytest.mark.parametrize("prob, weight", [(0.5, 2.0), (1.0, 1.0), (0.25, 4.0)])
def test_push_winner_weight_is_inverse_probability(prob, weight):
    buf = ReplayBuffer()
    buf.push_winner((0, 1), prob)
    assert buf.entries[0].weight == weight


@pytest.mark.parametrize("prob", [0.0, -0.1, 1.5])
def test_push_winner_rejects_bad_probability(prob):
    with pytest.raises(ContractError):
        ReplayBuffer().push_winner((0,), prob)


def test_outcome_weighted_push():
    buf = ReplayBuffer(mode=OUTCOME_WEIGHTED)
    buf.push_outcome_weighted((0, 1), 0.0, 0.5)
    assert len(buf) == 0
    buf.push_outcome_weighted((0, 1), 1.0, 0.25)
    assert buf.entries[0].weight == 4.0
    with pytest.raises(ContractError):
        buf.push_outcome_weighted((0, 1), 1.2, 0.5)


def test_weight_clamp():
    buf = ReplayBuffer(max_weight=100.0)
    buf.push_winner((0,), 1e-6)
    assert buf.entries[0].weight == 100.0


def test_nonpositive_example_weight_is_rejected():
    with pytest.raises(ContractError):
        WeightedExample((0,), float("inf"))


def test_uniform_generator_gives_equal_weights(rng):
    buf = ReplayBuffer()
    for _ in range(20):
        buf.push_winner(TEAMS[rng.integers(3)] + (0,), 0.25)
    assert set(buf.weights()) == {4.0}


def test_eviction_keeps_newest_and_normalization(rng):
    buf = ReplayBuffer(capacity=5)
    for i in range(12):
        buf.push_winner((i % 4,), 1.0 / (1 + i % 3), epoch=i)
    assert len(buf) == 5
    assert [e.epoch_added for e in buf.entries] == list(range(7, 12))
    assert sum(buf.effective_distribution().values()) == pytest.approx(1.0, abs=1e-12)


def test_effective_distribution_examples():
    buf = ReplayBuffer()
    buf.push_winner((1, 2), 1.0)
    assert buf.effective_distribution() == {(1, 2): 1.0}
    buf = ReplayBuffer()
    buf.push_winner((0,), 0.5)
    buf.push_winner((1,), 0.5)
    assert buf.effective_distribution() == {(0,): 0.5, (1,): 0.5}


def test_empty_buffer_errors(rng):
    with pytest.raises(ContractError):
        ReplayBuffer().sample_minibatch(4, rng)
    with pytest.raises(ContractError):
        ReplayBuffer().effective_distribution()


def test_single_entry_minibatch(rng):
    buf = ReplayBuffer()
    buf.push_winner((2, 3), 0.5)
    batch = buf.sample_minibatch(8, rng)
    assert all(ex.target == (2, 3) and ex.weight == 1.0 and ex.mask_positions for ex in batch)


def test_equal_weights_sample_uniformly(rng):
    buf = ReplayBuffer()
    for t in range(5):
        buf.push_winner((t,), 0.5)
    counts = np.bincount([e.team[0] for e in buf.sample_entries(100_000, rng)], minlength=5)
    assert stats.chisquare(counts).pvalue > 0.01


def test_three_to_one_weights(rng):
    buf = ReplayBuffer()
    buf.push_winner((0,), 1 / 3)
    buf.push_winner((1,), 1.0)
    draws = np.array([e.team[0] for e in buf.sample_entries(100_000, rng)])
    assert np.mean(draws == 0) == pytest.approx(0.75, abs=0.02 * 0.75)


@pytest.mark.parametrize("gen", [np.full(3, 1 / 3), np.array([0.6, 0.3, 0.1])])
def test_inverse_probability_recovers_win_rates(gen, rng):
    dist = ipw_buffer(gen, 60_000, rng).effective_distribution()
    target = WIN / WIN.sum()
    for t, w in zip(TEAMS, target):
        assert dist[t] == pytest.approx(w, abs=0.03)


def test_outcome_weighted_mode_recovers_win_rates(rng):
    dist = ipw_buffer(np.array([0.1, 0.2, 0.7]), 30_000, rng, mode="outcome").effective_distribution()
    for t, w in zip(TEAMS, WIN / WIN.sum()):
        assert dist[t] == pytest.approx(w, abs=0.03)
