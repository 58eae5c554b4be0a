from __future__ import annotations

import math
from collections import Counter

import numpy as np
import pytest

from berteam.baselines import (
    MainlandDistribution,
    MapElitesConfig,
    MapElitesUpdate,
    MCAASelector,
    mcaa_sample_team,
    mcaa_team_probability,
    mcaa_update,
    me_removal_probabilities,
    me_select_removals,
    me_unique,
    neighborhood_fitness,
    update_agent_fitness_moving_avg,
)
from berteam.coevolution import CoevConfig, PopulationMember
from berteam.model import ContractError


def test_mcaa_update_alpha_one_all_island_zero():
    d = MainlandDistribution.uniform(3, 2, 6, ema_alpha=1.0)
    mcaa_update(d, [[(0, 0), (1, 0), (2, 0)], [(2, 0), (0, 0), (1, 0)]])
    np.testing.assert_array_equal(d.slot_probs, [[1, 0]] * 3)


def test_mcaa_update_without_winners_is_a_no_op():
    d = MainlandDistribution.uniform(2, 3, 6)
    before = d.slot_probs.copy()
    mcaa_update(d, [])
    np.testing.assert_array_equal(d.slot_probs, before)


def test_mcaa_update_half_alpha():
    d = MainlandDistribution.uniform(2, 2, 4, ema_alpha=0.5)
    mcaa_update(d, [[(0, 0), (1, 0)]])
    np.testing.assert_allclose(d.slot_probs, [[0.75, 0.25]] * 2)
    with pytest.raises(ContractError):
        mcaa_update(d, [[(0, 0)]])


def test_single_island_equal_fitness_is_uniform(rng):
    d = MainlandDistribution.uniform(1, 1, 4)
    counts = Counter(mcaa_sample_team(d, [[0, 1, 2, 3]], rng)[0][0] for _ in range(8000))
    for a in range(4):
        assert counts[a] / 8000 == pytest.approx(0.25, abs=0.02)


def test_slot_probability_one_uses_that_island(rng):
    d = MainlandDistribution([[0.0, 1.0]] * 3, np.full(6, 0.5))
    for _ in range(50):
        team, p = mcaa_sample_team(d, [[0, 1, 2], [3, 4, 5]], rng)
        assert all(a in (3, 4, 5) for a in team)
        assert p == pytest.approx(1 / 27)


def test_empty_island_is_renormalized_away(rng):
    d = MainlandDistribution.uniform(2, 3, 4)
    for _ in range(50):
        team, p = mcaa_sample_team(d, [[0, 1], [], [2, 3]], rng)
        assert p == pytest.approx(1 / 16)
    with pytest.raises(ContractError):
        mcaa_sample_team(d, [[], [], []], rng)


def test_team_distribution_factorizes(rng):
    d = MainlandDistribution([[0.7, 0.3], [0.2, 0.8]], [0.9, 0.1, 0.4, 0.6])
    islands = [[0, 1], [2, 3]]
    n = 100_000
    teams = [mcaa_sample_team(d, islands, rng)[0] for _ in range(n)]
    joint = Counter(teams)
    m0 = Counter(t[0] for t in teams)
    m1 = Counter(t[1] for t in teams)
    for a in range(4):
        for b in range(4):
            assert joint[(a, b)] / n == pytest.approx(m0[a] * m1[b] / n**2, abs=0.02)
            assert joint[(a, b)] / n == pytest.approx(mcaa_team_probability(d, islands, (a, b)), abs=0.02)


def test_moving_average_examples():
    d = MainlandDistribution.uniform(1, 1, 1, ema_alpha=1.0)
    update_agent_fitness_moving_avg(d, 0, 0.3)
    assert d.fitness[0] == 0.3
    d = MainlandDistribution.uniform(1, 1, 1, ema_alpha=0.5, initial_fitness=0.0)
    update_agent_fitness_moving_avg(d, 0, 1.0)
    update_agent_fitness_moving_avg(d, 0, 1.0)
    assert d.fitness[0] == 0.75
    d = MainlandDistribution.uniform(1, 1, 1, ema_alpha=0.1, initial_fitness=0.0)
    for _ in range(300):
        update_agent_fitness_moving_avg(d, 0, 0.6)
    assert d.fitness[0] == pytest.approx(0.6, abs=1e-9)
    with pytest.raises(ContractError):
        update_agent_fitness_moving_avg(d, 0, 1.5)


def test_distribution_validation():
    with pytest.raises(ContractError):
        MainlandDistribution([[0.5, 0.4]], [0.5])
    with pytest.raises(ContractError):
        MainlandDistribution.uniform(1, 2, 2, ema_alpha=0.0)


def test_me_unique_examples():
    assert me_unique({0: 1.0, 1: 1.0}, 1e-6)[0] == set()
    assert me_unique({0: 0.0, 1: 10.0}, 1.0)[0] == {0, 1}
    assert me_unique({0: [0.0, 0.0], 1: [3.0, 4.0], 2: [3.0, 4.5]}, 1.0)[0] == {0}
    with pytest.raises(ContractError):
        me_unique({0: 0.0}, 0.0)


def test_me_unique_lambda_escalation():
    behaviors = {i: float(i) for i in range(6)}
    uniq, lam = me_unique(behaviors, 0.5, max_unique=2)
    assert lam == 1.0 and uniq == set()
    uniq, lam = me_unique({0: 0.0, 1: 1.5, 2: 3.0, 3: 10.0}, 0.5, max_unique=1)
    assert lam == 2.0 and uniq == {3}


def test_neighborhood_fitness_and_fallback():
    pred = neighborhood_fitness({0: 0.0, 1: 0.2, 2: 0.3, 3: 5.0}, {0: 1.0, 1: 0.0, 2: 0.5, 3: 0.5}, lam=0.25)
    assert pred[0] == pytest.approx(0.0)
    assert pred[1] == pytest.approx(0.75)
    assert pred[2] == pytest.approx(0.0)
    assert pred[3] == pytest.approx(0.5)  # isolated: population mean


def test_removal_probabilities():
    f = {0: 0.5, 1: 0.5, 2: 0.5}
    zero = {0: 0.0, 1: 0.0, 2: 0.0}
    p = me_removal_probabilities(f, zero, set(), tau=1.0)
    assert all(v == pytest.approx(1 / 3) for v in p.values())
    p = me_removal_probabilities(f, zero, {1}, tau=1.0)
    assert p[1] == 0.0 and p[0] == pytest.approx(0.5)
    tau = 0.7
    p = me_removal_probabilities({0: -tau * math.log(2), 1: 0.0}, {0: 0.0, 1: 0.0}, set(), tau)
    assert p[0] / p[1] == pytest.approx(2.0)


def test_select_removals(rng):
    f = {i: float(i) for i in range(5)}
    zero = {i: 0.0 for i in range(5)}
    out = me_select_removals(f, zero, {0}, 2, 1.0, rng)
    assert len(set(out)) == 2 and 0 not in out
    assert me_select_removals(f, zero, {0}, 2, 1.0, rng, deterministic=True) == [1, 2]
    assert me_select_removals(f, zero, set(), 0, 1.0, rng) == []
    with pytest.raises(ContractError):
        me_select_removals(f, zero, {0, 1, 2, 3}, 2, 1.0, rng)
    counts = Counter(me_select_removals({0: 0.0, 1: 0.0}, {0: 0.0, 1: 0.0}, set(), 1, 1.0, rng)[0] for _ in range(4000))
    assert counts[0] / 4000 == pytest.approx(0.5, abs=0.03)


def test_mcaa_selector_records_and_replaces(rng):
    sel = MCAASelector([0, 0, 1, 1], k=2, ema_alpha=1.0)
    teams, probs = sel.sample(5, 2, rng)
    assert teams.shape == (5, 2) and np.all(probs > 0)
    sel.record(np.array([[0, 1], [2, 3]]), np.array([1.0, 0.0]), probs[:2], 0)
    assert sel.end_epoch(0, rng) == {"winners": 1}
    np.testing.assert_array_equal(sel.dist.slot_probs, [[1, 0], [1, 0]])
    assert sel.dist.fitness[0] == 1.0 and sel.dist.fitness[2] == 0.0
    sel.on_replace(2, 0)
    assert sel.island_of[2] == 0 and sel.dist.fitness[2] == 1.0
    with pytest.raises(ContractError):
        sel.sample(1, 3, rng)


def test_map_elites_update_protects_uniques_and_elites(rng):
    pop = [PopulationMember(agent_id=i, fitness=f) for i, f in enumerate([0.9, 0.1, 0.5, 0.2, 0.8, 0.3])]
    behaviors = {0: 0.0, 1: 0.05, 2: 0.1, 3: 5.0, 4: 0.15, 5: 0.2}
    upd = MapElitesUpdate([0] * 6, lambda m: behaviors[m.agent_id], MapElitesConfig(lam=0.5, max_unique_fraction=0.5))
    pairs = upd(pop, CoevConfig(n_rem=2), rng)
    removed = [r for r, _ in pairs]
    assert len(removed) == 2 and 3 not in removed and 0 not in removed
    assert pop[0].is_elite
