"""Exact analytics over teams: counting, generation distributions, aggregation, statistics."""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy import stats

from .model import BERTeam, ContractError, mean_pairwise_cosine

MAX_EXACT_TEAM_SIZE = 4


def count_teams(n: int, k: int, ordered: bool) -> int:
    """Ordered: n^k.  Unordered (multisets): sum_i C(n, i) C(k-1, i-1)."""
    if n < 1 or k < 1:
        raise ContractError("n and k must be >= 1")
    if ordered:
        return n**k
    return sum(math.comb(n, i) * math.comb(k - 1, i - 1) for i in range(1, k + 1))


def canonical(team: Sequence[int]) -> tuple[int, ...]:
    return tuple(sorted(int(t) for t in team))


def exact_generation_distribution(model: BERTeam, k: int, unmask_order: str = "random", observation=None) -> dict[tuple[int, ...], float]:
    """Probability of every ordered team under temperature-1 generation.

    For random unmask order this averages, over all k! slot orders, the
    chain-rule product of the conditional rows; forward passes are cached
    per partially masked pattern and evaluated in batches.
    """
    if k > MAX_EXACT_TEAM_SIZE:
        raise ContractError(f"exact enumeration is limited to k <= {MAX_EXACT_TEAM_SIZE}; estimate larger teams by sampling")
    n, mask = model.n_agents, model.vocab.mask
    orders = list(itertools.permutations(range(k))) if unmask_order == "random" else [tuple(range(k))]
    cache: dict[tuple[int, ...], np.ndarray] = {}

    def rows_for(patterns: list[tuple[int, ...]]) -> None:
        todo = [p for p in dict.fromkeys(patterns) if p not in cache]
        for start in range(0, len(todo), 512):
            chunk = todo[start : start + 512]
            obs = None if observation is None else [observation] * len(chunk)
            probs = model.predict(np.array(chunk), obs)
            for p, row in zip(chunk, probs):
                cache[p] = row

    dist = np.zeros((n,) * k)
    for order in orders:
        # breadth-first over the order: all partial teams after each step
        partials = {tuple([mask] * k): 1.0}
        for pos in order:
            rows_for(list(partials))
            nxt: dict[tuple[int, ...], float] = {}
            for p, w in partials.items():
                row = cache[p]
                for a in range(n):
                    q = list(p)
                    q[pos] = a
                    nxt[tuple(q)] = w * row[pos, a]
            partials = nxt
        for team, w in partials.items():
            dist[team] += w / len(orders)
    return {team: float(dist[team]) for team in itertools.product(range(n), repeat=k)}


def unordered_aggregate(ordered_dist: Mapping[tuple[int, ...], float], k: int | None = None) -> dict[tuple[int, ...], float]:
    """Sum ordered probabilities over all reorderings of each multiset."""
    out: dict[tuple[int, ...], float] = {}
    for team, p in ordered_dist.items():
        if k is not None and len(team) != k:
            raise ContractError(f"team {team} does not have size {k}")
        key = canonical(team)
        out[key] = out.get(key, 0.0) + p
    return dict(sorted(out.items()))


def top_teams(dist: Mapping[tuple[int, ...], float], n: int) -> list[tuple[int, ...]]:
    """The ``n`` most probable teams, ties broken by team id."""
    return [t for t, _ in sorted(dist.items(), key=lambda kv: (-kv[1], kv[0]))[:n]]


@dataclass
class CorrelationReport:
    pearson_r: float
    r_squared: float
    spearman_rho: float
    spearman_p: float
    slope: float
    intercept: float
    n: int

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def occurrence_elo_correlation(occurrences, elos) -> CorrelationReport:
    x = np.asarray(occurrences, dtype=np.float64)
    y = np.asarray(elos, dtype=np.float64)
    if x.shape != y.shape or x.size < 3:
        raise ContractError("need at least 3 paired (occurrence, Elo) values")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise ContractError("zero variance in occurrences or Elos; correlation undefined")
    lin = stats.linregress(x, y)
    rho, p = stats.spearmanr(x, y)
    return CorrelationReport(float(lin.rvalue), float(lin.rvalue**2), float(rho), float(p), float(lin.slope), float(lin.intercept), int(x.size))


@dataclass
class TwoMeans:
    threshold: float
    low: list[int]
    high: list[int]
    low_mean: float
    high_mean: float
    silhouette: float


def two_means_1d(values: Mapping[int, float] | Sequence[float]) -> TwoMeans:
    """Optimal split of scalars into two groups by within-group squared error.

    In 1-D the optimum is a cut between consecutive sorted values, so every
    cut is tried.  Reports the mean silhouette of the split.
    """
    if isinstance(values, Mapping):
        ids = sorted(values)
        v = np.array([values[i] for i in ids], dtype=np.float64)
    else:
        v = np.asarray(values, dtype=np.float64)
        ids = list(range(v.size))
    if v.size < 2:
        raise ContractError("need at least two values to split")
    order = np.argsort(v, kind="stable")
    s = v[order]
    best = None
    for cut in range(1, s.size):
        a, b = s[:cut], s[cut:]
        sse = ((a - a.mean()) ** 2).sum() + ((b - b.mean()) ** 2).sum()
        if best is None or sse < best[0] - 1e-15:
            best = (sse, cut)
    cut = best[1]
    low_idx, high_idx = order[:cut], order[cut:]
    labels = np.zeros(v.size, int)
    labels[high_idx] = 1
    sil = silhouette_1d(v, labels)
    return TwoMeans(
        float((s[cut - 1] + s[cut]) / 2),
        sorted(ids[i] for i in low_idx),
        sorted(ids[i] for i in high_idx),
        float(v[low_idx].mean()),
        float(v[high_idx].mean()),
        sil,
    )


def silhouette_1d(v: np.ndarray, labels: np.ndarray) -> float:
    d = np.abs(v[:, None] - v[None, :])
    out = []
    for i in range(v.size):
        same = (labels == labels[i]) & (np.arange(v.size) != i)
        other = labels != labels[i]
        if not same.any():
            out.append(0.0)
            continue
        a = d[i, same].mean()
        b = d[i, other].mean()
        out.append((b - a) / max(a, b) if max(a, b) > 0 else 0.0)
    return float(np.mean(out))


def subset_cosine_means(vectors: np.ndarray, m: int) -> float:
    """Mean over all size-m subsets of each subset's mean pairwise cosine."""
    n = len(vectors)
    if not 2 <= m <= n:
        raise ContractError("need 2 <= m <= n")
    vals = [mean_pairwise_cosine(vectors[list(c)]) for c in itertools.combinations(range(n), m)]
    return float(np.mean(vals))


def cosine_table(embeddings: np.ndarray, groups: Mapping[str, Sequence[int]]) -> list[dict]:
    """Mean pairwise cosine similarity per named agent group, plus the whole population."""
    rows = [{"group": "all", "size": len(embeddings), "mean_cosine": mean_pairwise_cosine(embeddings)}]
    for name, ids in groups.items():
        if len(ids) >= 2:
            rows.append({"group": name, "size": len(ids), "mean_cosine": mean_pairwise_cosine(embeddings[sorted(ids)])})
    return rows


def check_distribution(dist: Mapping, tol: float = 1e-9) -> None:
    total = math.fsum(dist.values())
    if abs(total - 1.0) > tol:
        raise ContractError(f"distribution sums to {total!r}, not 1")


def write_rows(path, rows: Sequence[Mapping], fields: Sequence[str] | None = None) -> None:
    fields = list(fields or (rows[0].keys() if rows else []))
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
