"""Hedges aggregated with tournament trees (HATT).

One two-choice Hedge per unordered action pair decides the matches of a
single-elimination bracket over the available actions. For rounds with
exactly one zero-loss action ``z``, only the consulted pairs containing
``z`` are updated, charging loss 1 to the other member.

The bracket for ``n`` leaves takes the available actions in ascending order
and splits them recursively into halves of sizes ``ceil(n/2)`` and
``floor(n/2)``. Matches are played deepest level first, left to right.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

from .core import DomainError, Ranking, RoundTrace, require_zero_count
from .hedge import Hedge

Pair = tuple[int, int]


def pair(i: int, j: int) -> Pair:
    return (i, j) if i < j else (j, i)


def depth_bound(K: int) -> int:
    """``1 + ceil(log2 K)``: most consulted pairs any one action can appear in."""
    return 1 + math.ceil(math.log2(K)) if K > 1 else 1


@lru_cache(maxsize=None)
def bracket_schedule(n: int) -> tuple[tuple[int, int], ...]:
    """Match schedule for ``n`` leaves.

    Slots ``0..n-1`` hold the leaves; match ``m`` reads two earlier slots and
    writes its winner to slot ``n + m``. The last match is the root.
    """
    if n < 1:
        raise DomainError("bracket needs at least one leaf")
    nodes: list[tuple[int, int, int, int]] = []  # (depth, leftmost leaf, left, right)

    def build(lo: int, hi: int, depth: int) -> int:
        if hi - lo == 1:
            return lo
        mid = lo + (hi - lo + 1) // 2
        left = build(lo, mid, depth + 1)
        right = build(mid, hi, depth + 1)
        nodes.append((depth, lo, left, right))
        return -len(nodes)  # placeholder id for internal node

    build(0, n, 0)
    order = sorted(range(len(nodes)), key=lambda k: (-nodes[k][0], nodes[k][1]))
    slot_of = {-(k + 1): n + pos for pos, k in enumerate(order)}

    def resolve(ref: int) -> int:
        return ref if ref >= 0 else slot_of[ref]

    return tuple((resolve(nodes[k][2]), resolve(nodes[k][3])) for k in order)


class PairHedgeBank:
    """Lazily created two-choice Hedges, one per unordered pair ``(i, j)``, ``i < j``."""

    def __init__(self, eta: float = 1.0, loss_range: float = 1.0):
        self.eta = eta
        self.loss_range = loss_range
        self.hedges: dict[Pair, Hedge] = {}

    def __len__(self) -> int:
        return len(self.hedges)

    def __contains__(self, key: Pair) -> bool:
        return key in self.hedges

    def get(self, key: Pair) -> Hedge:
        h = self.hedges.get(key)
        if h is None:
            h = self.hedges[key] = Hedge(key, self.eta, self.loss_range)
        return h

    def probability(self, i: int, j: int) -> float:
        """Current probability that the ``{i, j}`` Hedge picks ``i``."""
        key = pair(i, j)
        h = self.hedges.get(key)
        return 0.5 if h is None else h.prob(i)

    def snapshot(self) -> dict[Pair, tuple[float, ...]]:
        return {k: tuple(h.log_weights) for k, h in self.hedges.items()}


class TournamentOutcome:
    """Bracket result: the winner, the consulted pairs and each pair's sampled winner."""

    __slots__ = ("winner", "consulted", "sub_winners")

    def __init__(self, winner: int, consulted: tuple[Pair, ...], sub_winners: dict[Pair, int]):
        self.winner = winner
        self.consulted = consulted
        self.sub_winners = sub_winners

    def __repr__(self) -> str:
        return f"TournamentOutcome(winner={self.winner}, consulted={self.consulted})"


def run_tournament(available: Sequence[int], bank: PairHedgeBank, rng) -> TournamentOutcome:
    """Play the bracket over ``available``, sampling each match from its pair Hedge."""
    leaves = sorted(available)
    n = len(leaves)
    if n == 0:
        raise DomainError("tournament over an empty action set")
    slots = leaves
    sub_winners = {}
    hedges = bank.hedges
    for a, b in bracket_schedule(n):
        i, j = slots[a], slots[b]
        key = (i, j) if i < j else (j, i)
        h = hedges.get(key)
        if h is None:
            h = bank.get(key)
        w = h.sample(rng)
        slots.append(w)
        sub_winners[key] = w
    return TournamentOutcome(slots[-1], tuple(sub_winners), sub_winners)


@dataclass(frozen=True)
class PairLossCertificate:
    """Per-pair losses of one HATT round.

    Each ``i`` in ``charged`` has ``{i, zero_action}`` among the consulted
    pairs, and its loss vector puts 1 on ``i`` and 0 on ``zero_action``.
    Every other pair has the all-zero loss vector. ``learner_cost`` is the
    loss the pair Hedges' own sampled picks incur.
    """

    t: int
    zero_action: int
    charged: tuple[int, ...]
    learner_cost: int

    def loss(self, key: Pair, choice: int) -> float:
        z = self.zero_action
        if choice != z and choice in key and z in key and choice in self.charged:
            return 1.0
        return 0.0

    @property
    def losses(self) -> dict[Pair, dict[int, float]]:
        z = self.zero_action
        return {pair(i, z): {i: 1.0, z: 0.0} for i in self.charged}


def pair_certificate(t: int, outcome: TournamentOutcome, z: int) -> PairLossCertificate:
    charged = []
    cost = 0
    for key in outcome.consulted:
        i, j = key
        if i == z or j == z:
            other = j if i == z else i
            charged.append(other)
            if outcome.sub_winners[key] == other:
                cost += 1
    return PairLossCertificate(t, z, tuple(charged), cost)


def certificate_comparator_cost(cert: PairLossCertificate, sigma: Ranking) -> int:
    """Sum over pairs of the certificate loss of ``sigma``'s pairwise choice."""
    rank = sigma.rank_of
    rz = rank[cert.zero_action]
    return sum(1 for i in cert.charged if rank[i] < rz)


def hatt_step(bank: PairHedgeBank, round: RoundTrace, rng) -> tuple[int, PairLossCertificate]:
    """One full-information HATT round: tournament, certificate, pair updates."""
    (z,) = require_zero_count(round, 1)
    outcome = run_tournament(round.available, bank, rng)
    cert = pair_certificate(round.t, outcome, z)
    for i in cert.charged:
        bank.get(pair(i, z)).charge(i, 1.0)
    return outcome.winner, cert


def hatt_bound(eta: float, K: int, N: int, lstar: float) -> float:
    """Expected-loss bound of HATT with rate ``eta`` against best-ranking loss ``lstar``."""
    denom = -math.expm1(-eta)
    return eta * depth_bound(K) / denom * lstar + math.comb(N, 2) * math.log(2) / denom


class HATT:
    """Full-information learner for rounds with exactly one zero-loss action."""

    name = "hatt"
    feedback = "full"
    zero_count = 1

    def __init__(self, rng, eta: float = 1.0):
        self.bank = PairHedgeBank(eta, 1.0)
        self.rng = rng
        self.outcome: TournamentOutcome | None = None
        self.certificate: PairLossCertificate | None = None

    def act(self, available: Sequence[int]) -> int:
        self.outcome = run_tournament(available, self.bank, self.rng)
        return self.outcome.winner

    def learn(self, round: RoundTrace) -> None:
        (z,) = require_zero_count(round, 1)
        cert = self.certificate = pair_certificate(round.t, self.outcome, z)
        hedges = self.bank.hedges
        for i in cert.charged:
            hedges[(i, z) if i < z else (z, i)].charge(i, 1.0)
