"""Hedges over pairs of pairs (HOPP), for rounds with exactly two zero-loss actions.

Two kinds of Hedge are kept, both created lazily with uniform weights:

* for each pair of disjoint action pairs ``{X, Y}``, a two-choice Hedge
  picking ``X`` or ``Y``;
* for each 3-set ``S``, a three-choice Hedge picking one of its actions.

A pair ``X`` of available actions is *good* when it wins every sampled
matchup against a disjoint available pair. Good pairs always intersect, so
either they share a common action (played, lowest id first) or they form a
triangle ``{i,j}, {j,k}, {k,i}`` and the triple Hedge on ``{i,j,k}`` decides.
With no good pair the lowest available id is played.

Matchups are only sampled inside the available set, in lexicographic order
of ``(X, Y)``. The triple Hedge is sampled only in the triangle branch.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

from .core import DomainError, Ranking, RoundTrace, require_zero_count
from .hedge import Hedge

Pair = tuple[int, int]
Matchup = tuple[Pair, Pair]
Triple = tuple[int, int, int]

NO_GOOD_PAIR = "no-good-pair"
COMMON_ACTION = "common-action"
TRIANGLE = "triangle"


@lru_cache(maxsize=None)
def local_matchups(k: int) -> tuple[tuple[tuple[int, int], ...], tuple[tuple[int, int], ...]]:
    """Pairs of ``range(k)`` and the disjoint matchups between them, by pair index."""
    pairs = tuple(itertools.combinations(range(k), 2))
    matchups = tuple(
        (p, q)
        for p, q in itertools.combinations(range(len(pairs)), 2)
        if not set(pairs[p]) & set(pairs[q])
    )
    return pairs, matchups


def matchup_key(X: Pair, Y: Pair) -> Matchup:
    return (X, Y) if X < Y else (Y, X)


class PairPairHedgeBank:
    def __init__(self, eta: float = 1.0):
        self.eta = eta
        self.pair_hedges: dict[Matchup, Hedge] = {}
        self.triple_hedges: dict[Triple, Hedge] = {}

    def pair_hedge(self, key: Matchup) -> Hedge:
        h = self.pair_hedges.get(key)
        if h is None:
            X, Y = key
            if set(X) & set(Y):
                raise DomainError(f"pairs {X} and {Y} are not disjoint")
            h = self.pair_hedges[key] = Hedge(key, self.eta, 1.0)
        return h

    def triple_hedge(self, key: Triple) -> Hedge:
        h = self.triple_hedges.get(key)
        if h is None:
            h = self.triple_hedges[key] = Hedge(key, self.eta, 1.0)
        return h

    def snapshot(self) -> dict:
        out: dict = {k: tuple(h.log_weights) for k, h in self.pair_hedges.items()}
        out.update({k: tuple(h.log_weights) for k, h in self.triple_hedges.items()})
        return out


@dataclass(frozen=True)
class SelectionOutcome:
    chosen: int
    pair_samples: dict[Matchup, Pair]
    triple_sample: tuple[Triple, int] | None
    good_pairs: tuple[Pair, ...]
    branch: str


def find_good_pairs(available: Sequence[int], pair_samples: dict[Matchup, Pair]) -> tuple[Pair, ...]:
    """Pairs of ``available`` that win all their sampled matchups, ascending."""
    avail = sorted(available)
    pairs = list(itertools.combinations(avail, 2))
    good = []
    for X in pairs:
        for Y in pairs:
            if set(X) & set(Y):
                continue
            key = matchup_key(X, Y)
            if key not in pair_samples:
                raise KeyError(f"no sample for matchup {key}")
            if pair_samples[key] != X:
                break
        else:
            good.append(X)
    return tuple(good)


def classify(available: Sequence[int], good: Sequence[Pair]) -> tuple[str, int | None, Triple | None]:
    """Branch, common action (if any) and triangle triple (if any) for ``good``."""
    if not good:
        return NO_GOOD_PAIR, min(available), None
    common = set(good[0])
    for X in good[1:]:
        common &= set(X)
    if common:
        return COMMON_ACTION, min(common), None
    union = sorted(set().union(*good))
    if len(good) != 3 or len(union) != 3:
        raise AssertionError(f"good pairs {good} neither share an action nor form a triangle")
    return TRIANGLE, None, tuple(union)


def select(available: Sequence[int], bank: PairPairHedgeBank, rng) -> SelectionOutcome:
    avail = sorted(available)
    if not avail:
        raise DomainError("selection over an empty action set")
    local_pairs, local_m = local_matchups(len(avail))
    pairs = [(avail[a], avail[b]) for a, b in local_pairs]
    good = [True] * len(pairs)
    samples: dict[Matchup, Pair] = {}
    hedges = bank.pair_hedges
    for p, q in local_m:
        key = (pairs[p], pairs[q])
        h = hedges.get(key)
        if h is None:
            h = bank.pair_hedge(key)
        w = h.sample(rng)
        samples[key] = w
        if w == key[0]:
            good[q] = False
        else:
            good[p] = False
    good_pairs = tuple(X for X, g in zip(pairs, good) if g)
    branch, chosen, triple = classify(avail, good_pairs)
    triple_sample = None
    if branch == TRIANGLE:
        chosen = bank.triple_hedge(triple).sample(rng)
        triple_sample = (triple, chosen)
    return SelectionOutcome(chosen, samples, triple_sample, good_pairs, branch)


@dataclass(frozen=True)
class HoppCertificate:
    """Sub-problem losses of one HOPP round.

    Every pair ``X`` inside ``available - zero_pair`` has loss 1 on ``X`` in
    its matchup against ``zero_pair``; every triple ``zero_pair + {i}`` has
    loss 1 on ``i``. All other entries are zero. ``learner_cost`` is the
    loss of the sampled picks (matchups inside the available set and the
    triangle triple, if one was sampled).
    """

    t: int
    zero_pair: Pair
    available: tuple[int, ...]
    learner_cost: int

    @property
    def others(self) -> tuple[int, ...]:
        return tuple(a for a in self.available if a not in self.zero_pair)

    @property
    def pair_losses(self) -> dict[Matchup, dict[Pair, float]]:
        Z = self.zero_pair
        return {
            matchup_key(X, Z): {X: 1.0, Z: 0.0}
            for X in itertools.combinations(self.others, 2)
        }

    @property
    def triple_losses(self) -> dict[Triple, dict[int, float]]:
        Z = self.zero_pair
        out = {}
        for i in self.others:
            S = tuple(sorted(Z + (i,)))
            out[S] = {a: (1.0 if a == i else 0.0) for a in S}
        return out


def hopp_certificate(t: int, available: Sequence[int], Z: Pair, outcome: SelectionOutcome) -> HoppCertificate:
    avail = tuple(sorted(available))
    cost = 0
    for X in itertools.combinations([a for a in avail if a not in Z], 2):
        if outcome.pair_samples[matchup_key(X, Z)] == X:
            cost += 1
    if outcome.triple_sample is not None:
        S, b = outcome.triple_sample
        if set(Z) <= set(S) and b not in Z:
            cost += 1
    return HoppCertificate(t, Z, avail, cost)


def apply_certificate(bank: PairPairHedgeBank, cert: HoppCertificate) -> None:
    Z = cert.zero_pair
    others = cert.others
    for X in itertools.combinations(others, 2):
        bank.pair_hedge(matchup_key(X, Z)).charge(X, 1.0)
    for i in others:
        bank.triple_hedge(tuple(sorted(Z + (i,)))).charge(i, 1.0)


def hopp_step(bank: PairPairHedgeBank, round: RoundTrace, rng) -> tuple[int, HoppCertificate]:
    Z = require_zero_count(round, 2)
    outcome = select(round.available, bank, rng)
    cert = hopp_certificate(round.t, round.available, Z, outcome)
    apply_certificate(bank, cert)
    return outcome.chosen, cert


def hopp_certificate_comparator_cost(cert: HoppCertificate, sigma: Ranking) -> tuple[int, int]:
    """``(pair_cost, triple_cost)`` of ``sigma`` on the certificate's sub-problems."""
    rank = sigma.rank_of
    z_rank = min(rank[a] for a in cert.zero_pair)
    above = [i for i in cert.others if rank[i] < z_rank]
    below = len(cert.others) - len(above)
    # sigma(X + Z) lands in X iff X holds an action ranked above both zeros.
    pair_cost = math.comb(len(cert.others), 2) - math.comb(below, 2)
    return pair_cost, len(above)


def hopp_bound(eta: float, K: int, N: int, lstar: float, pair_term: bool = False) -> float:
    """Expected-loss bound of HOPP against best-ranking loss ``lstar``.

    The additive part sums the Hedge overhead of the ``3 C(N,4)`` matchup
    Hedges (``ln 2`` each) and the ``C(N,3)`` triple Hedges (``ln 3`` each).
    ``pair_term=True`` adds a further ``C(N,2) ln 2``, giving a looser form.
    """
    denom = -math.expm1(-eta)
    ratio = math.comb(max(K - 2, 0), 2) + max(K - 2, 0)
    additive = 3 * math.comb(N, 4) * math.log(2) + math.comb(N, 3) * math.log(3)
    if pair_term:
        additive += math.comb(N, 2) * math.log(2)
    return eta / denom * ratio * lstar + additive / denom


class HOPP:
    """Full-information learner for rounds with exactly two zero-loss actions."""

    name = "hopp"
    feedback = "full"
    zero_count = 2

    def __init__(self, rng, eta: float = 1.0):
        self.bank = PairPairHedgeBank(eta)
        self.rng = rng
        self.outcome: SelectionOutcome | None = None
        self.certificate: HoppCertificate | None = None

    def act(self, available: Sequence[int]) -> int:
        self.outcome = select(available, self.bank, self.rng)
        return self.outcome.chosen

    def learn(self, round: RoundTrace) -> None:
        Z = require_zero_count(round, 2)
        self.certificate = hopp_certificate(round.t, round.available, Z, self.outcome)
        apply_certificate(self.bank, self.certificate)
