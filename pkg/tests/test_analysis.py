from __future__ import annotations

import itertools
from collections import Counter

import numpy as np
import pytest

from berteam.analysis import (
    check_distribution,
    cosine_table,
    count_teams,
    exact_generation_distribution,
    occurrence_elo_correlation,
    subset_cosine_means,
    top_teams,
    two_means_1d,
    unordered_aggregate,
)
from berteam.model import BERTeam, ContractError, GenerationPolicy
from berteam.nn.layers import ArchConfig

ARCH = ArchConfig(1, 1, 8, 16, 2, 0.0, "gelu", True)


def test_count_teams_known_values():
    assert count_teams(7, 2, ordered=False) == 28
    assert count_teams(50, 2, ordered=False) == 1275
    assert count_teams(7, 2, ordered=True) == 49
    assert count_teams(9, 1, ordered=False) == count_teams(9, 1, ordered=True) == 9
    with pytest.raises(ContractError):
        count_teams(0, 2, False)


def test_count_teams_matches_brute_force():
    for n in range(1, 9):
        for k in range(1, 5):
            multisets = {tuple(sorted(t)) for t in itertools.product(range(n), repeat=k)}
            assert count_teams(n, k, ordered=False) == len(multisets)
            assert count_teams(n, k, ordered=True) == n**k


def test_exact_distribution_k1_is_the_row():
    m = BERTeam(5, 1, ARCH, seed=2)
    dist = exact_generation_distribution(m, 1)
    np.testing.assert_allclose([dist[(a,)] for a in range(5)], m.captain_distribution(1), atol=1e-15)


def test_exact_distribution_uniform_model():
    m = BERTeam(3, 2, ARCH, seed=0)
    m.zero_output_head()
    dist = exact_generation_distribution(m, 2)
    assert len(dist) == 9
    assert all(p == pytest.approx(1 / 9, abs=1e-15) for p in dist.values())


def test_exact_distribution_matches_sampling(rng):
    m = BERTeam(3, 3, ARCH, seed=11)
    dist = exact_generation_distribution(m, 3)
    check_distribution(dist)
    n = 100_000
    teams, _ = m.generate(n, 3, GenerationPolicy(), rng)
    freq = Counter(map(tuple, teams.tolist()))
    for team, p in dist.items():
        assert freq[team] / n == pytest.approx(p, abs=0.01)


def test_exact_distribution_size_limit():
    with pytest.raises(ContractError, match="sampling"):
        exact_generation_distribution(BERTeam(2, 5, ARCH), 5)


def test_unordered_aggregate_examples(rng):
    assert unordered_aggregate({(0, 1): 0.1, (1, 0): 0.3, (1, 1): 0.6}) == {(0, 1): pytest.approx(0.4), (1, 1): 0.6}
    assert unordered_aggregate({(2, 2): 0.2}) == {(2, 2): 0.2}
    p = rng.dirichlet(np.ones(27))
    ordered = dict(zip(itertools.product(range(3), repeat=3), p))
    agg = unordered_aggregate(ordered, 3)
    assert len(agg) == count_teams(3, 3, False)
    assert sum(agg.values()) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ContractError):
        unordered_aggregate({(0, 1): 1.0}, 3)


def test_top_teams_breaks_ties_by_id():
    assert top_teams({(1, 1): 0.3, (0, 2): 0.3, (0, 0): 0.4}, 2) == [(0, 0), (0, 2)]


def test_check_distribution():
    check_distribution({"a": 0.5, "b": 0.5})
    with pytest.raises(ContractError):
        check_distribution({"a": 0.5, "b": 0.4})


def test_correlation_examples(rng):
    x = np.arange(10.0)
    rep = occurrence_elo_correlation(x, 3 * x + 1)
    assert rep.r_squared == pytest.approx(1.0)
    assert rep.spearman_rho == pytest.approx(1.0)
    with pytest.raises(ContractError):
        occurrence_elo_correlation(np.ones(5), np.arange(5.0))
    with pytest.raises(ContractError):
        occurrence_elo_correlation([1, 2], [1, 2])
    x = rng.random(2000)
    rep = occurrence_elo_correlation(x, 2.5 * x - 1 + rng.normal(scale=0.2, size=x.size))
    assert rep.slope == pytest.approx(2.5, rel=0.05)
    assert rep.intercept == pytest.approx(-1.0, abs=0.05)


def test_two_means_separates_clusters():
    res = two_means_1d({10: 0.9, 11: 1.1, 12: 5.0, 13: 5.2, 14: 1.0})
    assert res.low == [10, 11, 14] and res.high == [12, 13]
    assert res.low_mean == pytest.approx(1.0)
    assert 1.1 < res.threshold < 5.0
    assert res.silhouette > 0.9
    with pytest.raises(ContractError):
        two_means_1d([1.0])


def test_two_means_is_optimal_by_brute_force(rng):
    v = rng.normal(size=7)
    best = min(
        (sum(((v[list(g)] - v[list(g)].mean()) ** 2).sum() for g in (a, [i for i in range(7) if i not in a])), tuple(a))
        for r in range(1, 7)
        for a in itertools.combinations(range(7), r)
    )
    res = two_means_1d(list(v))
    split = {tuple(res.low), tuple(res.high)}
    assert best[1] in split or tuple(i for i in range(7) if i not in best[1]) in split


def test_subset_cosine_lemma(rng):
    for n in range(2, 9):
        vecs = rng.normal(size=(n, 4))
        whole = subset_cosine_means(vecs, n)
        for m in range(2, n + 1):
            assert abs(subset_cosine_means(vecs, m) - whole) < 1e-12


def test_cosine_table(rng):
    rows = cosine_table(rng.normal(size=(5, 3)), {"a": [0, 1], "solo": [4]})
    assert [r["group"] for r in rows] == ["all", "a"]
