from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from berteam.model import ContractError
from berteam.nash import (
    CoachGame,
    best_response,
    exploitability,
    fictitious_play,
    grid_best_response,
    l1_loss,
    matching_pennies,
    outcome_weights,
    rock_paper_scissors,
)


def test_l1_loss_examples():
    assert l1_loss([0, 1, 0], 1) == 0.0
    assert l1_loss([0.25, 0.75], 0) == pytest.approx(1.5)
    assert l1_loss([0.0, 0.5, 0.5], 0) == pytest.approx(2.0)
    with pytest.raises(ContractError):
        l1_loss([0.5, 0.5], 2)


@given(st.lists(st.floats(0, 1), min_size=1, max_size=6).filter(lambda x: sum(x) > 1e-3), st.data())
def test_l1_loss_closed_form(raw, data):
    p = np.asarray(raw) / sum(raw)
    t = data.draw(st.integers(0, len(p) - 1))
    assert l1_loss(p, t) == pytest.approx(2 - 2 * p[t], abs=1e-12)


def test_outcome_weights_examples():
    const = CoachGame.two_coach("ab", "xyz", np.full((2, 3), 0.5))
    np.testing.assert_allclose(outcome_weights(const, 0, [None, np.array([0.2, 0.3, 0.5])]), 0.5)
    w = np.array([[0.1, 0.9], [0.6, 0.3]])
    g = CoachGame.two_coach("ab", "xy", w)
    np.testing.assert_allclose(outcome_weights(g, 0, [None, np.array([0.0, 1.0])]), w[:, 1])
    np.testing.assert_allclose(outcome_weights(g, 1, [np.array([1.0, 0.0]), None]), 1 - w[0])
    np.testing.assert_allclose(outcome_weights(matching_pennies(), 0, [None, np.array([0.5, 0.5])]), 0.5)


def test_outcome_weights_three_coaches_by_enumeration(rng):
    u = rng.random((3, 2, 3, 2))
    u /= u.sum(axis=0)
    g = CoachGame([list("ab"), list("xyz"), list("pq")], u)
    mix = [rng.dirichlet(np.ones(n)) for n in (2, 3, 2)]
    for i in range(3):
        expect = np.zeros(len(g.team_sets[i]))
        for idx in np.ndindex(2, 3, 2):
            p = np.prod([mix[j][idx[j]] for j in range(3) if j != i])
            expect[idx[i]] += p * u[(i, *idx)]
        np.testing.assert_allclose(outcome_weights(g, i, mix), expect, atol=1e-12)


def test_best_response_examples():
    np.testing.assert_array_equal(best_response([0.1, 0.7, 0.3]), [0, 1, 0])
    np.testing.assert_array_equal(best_response([0.7, 0.1, 0.7]), [0.5, 0, 0.5])
    with pytest.raises(ContractError):
        best_response([])


def test_best_response_matches_grid_oracle(rng):
    for _ in range(20):
        w = rng.random(4)
        if rng.random() < 0.3:
            w[int(rng.integers(4))] = w.max()  # force a tie
        br = best_response(w)
        grid = grid_best_response(w, 0.01)
        np.testing.assert_array_equal(br > 0, grid > 1e-12)
        assert br @ w == pytest.approx(grid @ w, abs=1e-12)


def test_symmetric_start_is_already_at_equilibrium():
    # every team ties against a uniform opponent, so the first best response is uniform
    res = fictitious_play(rock_paper_scissors(), 5)
    np.testing.assert_allclose(res.mixtures[0], 1 / 3)
    assert res.history[-1][2] == pytest.approx(0.0, abs=1e-15)


def test_dominant_strategy_in_one_iteration():
    g = CoachGame.two_coach("ab", "xy", [[0.9, 0.8], [0.3, 0.2]])
    res = fictitious_play(g, 1)
    np.testing.assert_array_equal(res.mixtures[0], [1, 0])
    np.testing.assert_array_equal(res.mixtures[1], [0, 1])
    assert res.history[-1][2] == 0.0


def pure_first(game):
    return [np.eye(len(t))[0] for t in game.team_sets]


def test_matching_pennies_converges():
    g = matching_pennies()
    res = fictitious_play(g, 10_000, record_every=1000, init=pure_first(g))
    for m in res.mixtures:
        assert np.max(np.abs(m - 0.5)) <= 0.05


def test_rock_paper_scissors_converges():
    g = rock_paper_scissors()
    res = fictitious_play(g, 100_000, record_every=10_000, init=pure_first(g))
    for m in res.mixtures:
        assert np.max(np.abs(m - 1 / 3)) <= 0.05


def test_exploitability_examples():
    assert exploitability(matching_pennies(), [np.full(2, 0.5)] * 2) == 0.0
    assert exploitability(rock_paper_scissors(), [np.full(3, 1 / 3)] * 2) == pytest.approx(0.0, abs=1e-15)
    assert exploitability(matching_pennies(), [np.array([1.0, 0.0]), np.full(2, 0.5)]) == pytest.approx(0.5)
    with pytest.raises(ContractError):
        exploitability(matching_pennies(), [np.array([0.7, 0.7]), np.full(2, 0.5)])


@pytest.mark.parametrize("game", [matching_pennies(), rock_paper_scissors()], ids=["pennies", "rps"])
def test_exploitability_decays_along_history(game):
    res = fictitious_play(game, 20_000, record_every=10, init=pure_first(game))
    its = np.array([h[0] for h in res.history], dtype=float)
    ex = np.array([h[2] for h in res.history])
    # single iterations oscillate; the trend is judged on the envelope over
    # successive doublings of t
    bounds = [1, 10, 100, 1000, 10_000, 20_001]
    env = [ex[(its >= lo) & (its < hi)].max() for lo, hi in zip(bounds[:-1], bounds[1:]) if np.any((its >= lo) & (its < hi))]
    assert all(b <= a + 1e-12 for a, b in zip(env, env[1:]))
    mask = (its >= 100) & (ex > 0)
    slope = np.polyfit(np.log(its[mask]), np.log(ex[mask]), 1)[0]
    assert slope <= -0.4


def test_init_and_validation():
    res = fictitious_play(matching_pennies(), 1, init=[np.array([0.3, 0.7]), np.array([0.5, 0.5])])
    np.testing.assert_allclose(res.mixtures[0], [0.3, 0.7])
    with pytest.raises(ContractError):
        fictitious_play(matching_pennies(), 0)
    with pytest.raises(ContractError):
        CoachGame.two_coach("ab", "xy", [[1.2, 0.0], [0.0, 1.0]])
    with pytest.raises(ContractError):
        CoachGame([list("ab"), list("xy")], np.full((2, 2, 2), 0.3))
    with pytest.raises(ContractError):
        CoachGame.two_coach("ab", "xyz", np.full((2, 2), 0.5))


def test_history_csv(tmp_path):
    g = rock_paper_scissors()
    res = fictitious_play(g, 50, record_every=20)
    assert [h[0] for h in res.history] == [20, 40, 50]
    path = tmp_path / "fp.csv"
    res.write_csv(path, g)
    lines = path.read_text().splitlines()
    assert lines[0].split(",") == ["iteration"] + [f"coach{i}:{t}" for i in range(2) for t in g.team_sets[i]] + ["exploitability"]
    assert len(lines) == 4 and lines[-1].startswith("50,")
