"""Best-ranking comparators and baseline learners.

``best_ranking`` enumerates all ``N!`` orders. ``best_ranking_dp`` finds the
same optimum by dynamic programming over the set of actions already placed
at the top of the ranking: once an action is placed, every round offering it
is decided, and the remaining rounds only see the unplaced actions. Both
break ties toward the lexicographically smallest order.
"""

from __future__ import annotations

import itertools
import math
from typing import Sequence

import numpy as np

from .core import (
    DomainError,
    Environment,
    Ranking,
    RegretReport,
    RoundTrace,
    comparator_cumulative,
    regret_report,
    sigma_choice,
)
from .hedge import Hedge

ENUMERATION_CAP = 8
DP_CAP = 14
TIE_TOL = 1e-9


class CapabilityError(RuntimeError):
    pass


def ranking_losses(env: Environment, orders: np.ndarray) -> np.ndarray:
    """Total loss of each ranking, given as rows of action orders."""
    orders = np.asarray(orders)
    ranks = np.argsort(orders, axis=1)
    masks, totals = env.grouped_losses()
    out = np.zeros(len(orders))
    for m, row in zip(masks.tolist(), totals):
        avail = np.array([a for a in range(env.N) if m >> a & 1])
        best = avail[np.argmin(ranks[:, avail], axis=1)]
        out += row[best]
    return out


def ranking_round_losses(env: Environment, ranks: np.ndarray) -> np.ndarray:
    """``(S, T)`` per-round losses of rankings given as rows of ``rank_of``."""
    ranks = np.asarray(ranks)
    out = np.zeros((len(ranks), env.T))
    if env.T == 0:
        return out
    uniq, inverse = np.unique(env.masks, return_inverse=True)
    choice = np.zeros((len(ranks), len(uniq)), dtype=np.int64)
    for g, m in enumerate(uniq.tolist()):
        avail = np.array([a for a in range(env.N) if m >> a & 1])
        choice[:, g] = avail[np.argmin(ranks[:, avail], axis=1)]
    picks = choice[:, inverse]
    return env.loss_matrix[np.arange(env.T)[None, :], picks]


def best_ranking(env: Environment, max_n: int = ENUMERATION_CAP) -> tuple[Ranking, float]:
    """Exact best ranking by enumerating all ``N!`` orders."""
    if env.N > max_n:
        raise CapabilityError(
            f"N={env.N} exceeds the enumeration cap {max_n}; use best_ranking_dp "
            "or sampled_best_ranking"
        )
    orders = np.array(list(itertools.permutations(range(env.N))), dtype=np.int64)
    losses = ranking_losses(env, orders)
    lstar = losses.min()
    k = int(np.flatnonzero(losses <= lstar + TIE_TOL)[0])
    return Ranking(tuple(orders[k].tolist())), float(losses[k])


def best_ranking_dp(env: Environment, max_n: int = DP_CAP) -> tuple[Ranking, float]:
    """Exact best ranking by dynamic programming over placed-action subsets."""
    N = env.N
    if N > max_n:
        raise CapabilityError(f"N={N} exceeds the subset-DP cap {max_n}")
    masks, totals = env.grouped_losses()
    full = (1 << N) - 1
    f = np.zeros(1 << N)
    states = np.arange(1 << N, dtype=np.int64)
    popcount = np.array([bin(s).count("1") for s in range(1 << N)])
    bits = 1 << np.arange(N, dtype=np.int64)
    cost_rows: dict[int, np.ndarray] = {}

    def layer_cost(layer: np.ndarray) -> np.ndarray:
        # cost[s, a] = loss of a over rounds whose available set avoids s
        alive = (masks[None, :] & layer[:, None]) == 0
        return alive.astype(float) @ totals

    for k in range(N - 1, -1, -1):
        layer = states[popcount == k]
        cost = layer_cost(layer)
        nxt = layer[:, None] | bits[None, :]
        placed = (layer[:, None] & bits[None, :]) != 0
        cand = np.where(placed, np.inf, cost + f[nxt])
        f[layer] = cand.min(axis=1)
        for s, row in zip(layer.tolist(), cand):
            cost_rows[s] = row
    order = []
    s = 0
    while s != full:
        row = cost_rows[s]
        a = int(np.flatnonzero(row <= f[s] + TIE_TOL)[0])
        order.append(a)
        s |= 1 << a
    return Ranking(tuple(order)), float(f[0])


def best_ranking_bruteforce(env: Environment) -> tuple[Ranking, float]:
    """Reference enumeration in plain Python, visiting orders in Heap's-algorithm order.

    Slow; meant as an independent check on small ``N``.
    """
    best_loss = math.inf
    best_orders: list[tuple[int, ...]] = []
    for order in _heap_permutations(list(range(env.N))):
        sigma = Ranking(order)
        loss = sum(r.loss(sigma_choice(sigma, r.available)) for r in env.rounds)
        if loss < best_loss - TIE_TOL:
            best_loss, best_orders = loss, [order]
        elif loss <= best_loss + TIE_TOL:
            best_orders.append(order)
    return Ranking(min(best_orders)), float(best_loss)


def _heap_permutations(items: list[int]):
    n = len(items)
    c = [0] * n
    yield tuple(items)
    i = 0
    while i < n:
        if c[i] < i:
            if i % 2 == 0:
                items[0], items[i] = items[i], items[0]
            else:
                items[c[i]], items[i] = items[i], items[c[i]]
            yield tuple(items)
            c[i] += 1
            i = 0
        else:
            c[i] = 0
            i += 1


def sampled_best_ranking(env: Environment, n_samples: int, gen: np.random.Generator) -> tuple[Ranking, float]:
    """Best of ``n_samples`` uniformly random rankings; an upper bound on the optimum."""
    orders = np.array([gen.permutation(env.N) for _ in range(n_samples)], dtype=np.int64)
    losses = ranking_losses(env, orders)
    k = int(np.argmin(losses))
    return Ranking(tuple(orders[k].tolist())), float(losses[k])


def solve(env: Environment, gen: np.random.Generator | None = None, n_samples: int = 20000) -> tuple[Ranking, float, bool]:
    """Best ranking, its loss, and whether that loss is exact.

    Exact up to the subset-DP cap; sampled beyond it.
    """
    if env.N <= DP_CAP:
        sigma, lstar = best_ranking_dp(env)
        return sigma, lstar, True
    if gen is None:
        gen = np.random.default_rng(0)
    sigma, lstar = sampled_best_ranking(env, n_samples, gen)
    return sigma, lstar, False


class PerSubsetHedge:
    """One Hedge per distinct available set, each treated as a fixed-action problem."""

    name = "per-subset"
    feedback = "full"
    zero_count = None

    def __init__(self, rng, eta: float = 1.0):
        self.rng = rng
        self.eta = eta
        self.hedges: dict[tuple[int, ...], Hedge] = {}
        self._current: Hedge | None = None

    def act(self, available: Sequence[int]) -> int:
        key = tuple(sorted(available))
        h = self.hedges.get(key)
        if h is None:
            h = self.hedges[key] = Hedge(key, self.eta, 1.0)
        self._current = h
        return h.sample(self.rng)

    def learn(self, round: RoundTrace) -> None:
        self._current.update(round.losses)


class RankingHedge:
    """Hedge over all ``N!`` rankings; plays the sampled ranking's top available action."""

    name = "ranking-hedge"
    feedback = "full"
    zero_count = None
    cap = 7

    def __init__(self, rng, N: int, eta: float = 1.0):
        if N > self.cap:
            raise CapabilityError(f"N={N} exceeds the ranking-hedge cap {self.cap}")
        self.rng = rng
        self.orders = np.array(list(itertools.permutations(range(N))), dtype=np.int64)
        self.ranks = np.argsort(self.orders, axis=1)
        self.hedge = Hedge(range(len(self.orders)), eta, 1.0)
        self._choices: np.ndarray | None = None

    def act(self, available: Sequence[int]) -> int:
        avail = np.array(sorted(available))
        self._choices = avail[np.argmin(self.ranks[:, avail], axis=1)]
        k = self.hedge.sample(self.rng)
        return int(self._choices[k])

    def learn(self, round: RoundTrace) -> None:
        loss_of = round.loss_of
        lookup = np.zeros(max(round.available) + 1)
        for a, x in loss_of.items():
            lookup[a] = x
        self.hedge.update(lookup[self._choices].tolist())


def _replay_full(env: Environment, learner) -> list[float]:
    losses = []
    for r in env.rounds:
        a = learner.act(r.available)
        losses.append(r.loss(a))
        learner.learn(r)
    return losses


def _report(env: Environment, losses: list[float], alphas) -> RegretReport:
    sigma, _, exact = solve(env)
    comp = comparator_cumulative(sigma, env)
    per_round = np.diff([0.0] + comp).tolist()
    return regret_report(losses, per_round, sigma, alphas, exact)


def per_subset_baseline(env: Environment, rng, alphas=(1.0,)) -> RegretReport:
    if env.loss_mode != "binary":
        raise DomainError("per-subset baseline expects binary losses")
    return _report(env, _replay_full(env, PerSubsetHedge(rng)), alphas)


def ranking_hedge_baseline(env: Environment, rng, alphas=(1.0,)) -> RegretReport:
    return _report(env, _replay_full(env, RankingHedge(rng, env.N)), alphas)
