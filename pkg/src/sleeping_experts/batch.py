"""Many independent replicates of one learner on one environment, vectorized.

Repeated-trial experiments run the same learner on the same environment
with independent randomness. Here the replicates advance in lockstep: every
sampling step is a numpy operation over a replicate axis of length ``R``.
Each replicate draws uniforms in exactly the order the scalar learner in
:mod:`hatt`, :mod:`hopp` or :mod:`bandit` would, so a source that replays a
scalar stream (see :class:`StreamUniforms`) reproduces the scalar choices.

Pair Hedges are stored as log-odds ``D[r, i*N + j] = lw_j - lw_i`` for
``i < j``; the probability of picking ``i`` is ``1 / (1 + exp(D))``, the same
expression the scalar two-choice Hedge evaluates.

The per-round guarantees are checked along the way on every replicate:

* HATT: learner loss is at most the pair Hedges' certificate cost, and for
  each supplied ranking the ranking's certificate cost is at most
  ``(1 + ceil(log2 K))`` times its own round loss.
* HOPP: good pairs pairwise intersect, the learner loss is at most the
  sampled certificate cost, and each ranking's pair and triple certificate
  costs stay within ``C(K-2, 2)`` and ``K - 2`` times its round loss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Protocol, Sequence

import numpy as np

from .core import Environment, Ranking, require_zero_count
from .hatt import bracket_schedule, depth_bound
from .hopp import HoppCertificate, PairPairHedgeBank, apply_certificate, local_matchups

EXP_GUARD = 700.0


class UniformSource(Protocol):
    def draw(self, n: int, active: np.ndarray | None = None) -> np.ndarray:
        """``(n, R)`` uniforms; rows of inactive replicates may be arbitrary."""


class NumpyUniforms:
    def __init__(self, gen: np.random.Generator, R: int):
        self.gen = gen
        self.R = R

    def draw(self, n: int, active: np.ndarray | None = None) -> np.ndarray:
        return self.gen.random((n, self.R))


class StreamUniforms:
    """Per-replicate scalar streams, consumed exactly as the scalar learners consume them."""

    def __init__(self, streams: Sequence):
        self.streams = list(streams)

    def draw(self, n: int, active: np.ndarray | None = None) -> np.ndarray:
        out = np.zeros((n, len(self.streams)))
        for r, s in enumerate(self.streams):
            if active is None or active[r]:
                for k in range(n):
                    out[k, r] = s.random()
        return out


@dataclass
class BatchResult:
    """Per-replicate total losses plus any per-round check violations found."""

    losses: np.ndarray
    violations: list[str] = field(default_factory=list)
    choices: np.ndarray | None = None

    @property
    def mean(self) -> float:
        return float(self.losses.mean())

    @property
    def standard_error(self) -> float:
        R = len(self.losses)
        return float(self.losses.std(ddof=1) / math.sqrt(R)) if R > 1 else 0.0


def _rank_matrix(rankings: Sequence[Ranking]) -> np.ndarray:
    return np.array([r.rank_of for r in rankings], dtype=np.int64).reshape(len(rankings), -1)


def _p_first(d: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        p = 1.0 / (1.0 + np.exp(np.minimum(d, EXP_GUARD)))
    return np.where(d < EXP_GUARD, p, 0.0)


def _tournament(D: np.ndarray, avail: np.ndarray, N: int, U: np.ndarray):
    """Vectorized bracket. Returns winners and per-match ``(i, j, winner)`` arrays."""
    R = D.shape[0]
    n = len(avail)
    rows = np.arange(R)
    slots = np.empty((R, 2 * n - 1), dtype=np.int64)
    slots[:, :n] = avail
    matches = []
    for m, (a, b) in enumerate(bracket_schedule(n)):
        # The left subtree holds the lower ids, so i < j in every match.
        i = slots[:, a]
        j = slots[:, b]
        lin = i * N + j
        w = np.where(U[m] < _p_first(D[rows, lin]), i, j)
        slots[:, n + m] = w
        matches.append((i, j, lin, w))
    return slots[:, -1], matches


def hatt_replicates(
    env: Environment,
    uniforms: UniformSource,
    R: int,
    eta: float = 1.0,
    rankings: Sequence[Ranking] = (),
    record_choices: bool = False,
) -> BatchResult:
    """Run ``R`` replicates of full-information HATT on a one-zero environment."""
    N = env.N
    D = np.zeros((R, N * N))
    rows = np.arange(R)
    total = np.zeros(R)
    depth = depth_bound(env.K)
    Q = _rank_matrix(rankings) if rankings else None
    violations: list[str] = []
    choices = np.zeros((env.T, R), dtype=np.int64) if record_choices else None

    for k, rnd in enumerate(env.rounds):
        (z,) = require_zero_count(rnd, 1)
        avail = np.asarray(rnd.available, dtype=np.int64)
        n = len(avail)
        U = uniforms.draw(n - 1)
        winner, matches = _tournament(D, avail, N, U)
        if choices is not None:
            choices[k] = winner
        loss = (winner != z).astype(float)
        total += loss

        cost = np.zeros(R)
        charged = np.zeros((R, N), dtype=bool)
        for i, j, lin, w in matches:
            hit = (i == z) | (j == z)
            if not hit.any():
                continue
            other = np.where(i == z, j, i)
            cost += hit & (w == other)
            charged[rows[hit], other[hit]] = True
            # Loss 1 on `other`: raises D when other is the first choice i.
            D[rows, lin] += np.where(other == i, eta, -eta) * hit

        bad = np.flatnonzero(loss > cost)
        if bad.size:
            violations.append(
                f"round {rnd.t}: learner loss exceeds pair certificate cost "
                f"(replicate {int(bad[0])})"
            )
        if Q is not None:
            above = Q < Q[:, z][:, None]
            sigma_loss = above[:, avail].any(axis=1).astype(float)
            comp = charged.astype(float) @ above.T.astype(float)
            over = comp > depth * sigma_loss[None, :]
            if over.any():
                r, s = np.argwhere(over)[0]
                violations.append(
                    f"round {rnd.t}: ranking {rankings[s].order} certificate cost "
                    f"{comp[r, s]:.0f} exceeds {depth} x {sigma_loss[s]:.0f} (replicate {r})"
                )
    return BatchResult(total, violations, choices)


def bandit_hatt_replicates(
    env: Environment,
    uniforms: UniformSource,
    R: int,
    mu: float,
    eta: float,
    record_choices: bool = False,
) -> BatchResult:
    """Run ``R`` replicates of Bandit-HATT on a one-zero environment.

    The update condition (explored and zero loss on the played action) makes
    the played action the zero-loss action, so the consulted pairs that
    receive the importance-weighted loss are those containing it.
    """
    N = env.N
    D = np.zeros((R, N * N))
    rows = np.arange(R)
    total = np.zeros(R)
    choices = np.zeros((env.T, R), dtype=np.int64) if record_choices else None

    for k, rnd in enumerate(env.rounds):
        avail = np.asarray(rnd.available, dtype=np.int64)
        n = len(avail)
        loss_row = np.zeros(N)
        loss_row[avail] = rnd.losses
        U = uniforms.draw(n - 1)
        winner, matches = _tournament(D, avail, N, U)
        explored = uniforms.draw(1)[0] < mu
        idx = np.minimum((uniforms.draw(1, explored)[0] * n).astype(np.int64), n - 1)
        chosen = np.where(explored, avail[idx], winner)
        if choices is not None:
            choices[k] = chosen
        loss = loss_row[chosen]
        total += loss
        update = explored & (loss == 0.0)
        if not update.any():
            continue
        step = eta * n / mu
        for i, j, lin, w in matches:
            hit = update & ((i == chosen) | (j == chosen))
            if hit.any():
                D[rows, lin] += np.where(j == chosen, step, -step) * hit
    return BatchResult(total, [], choices)


@lru_cache(maxsize=None)
def _hopp_tables(n: int):
    pairs, matchups = local_matchups(n)
    P = len(pairs)
    member = np.zeros((P, n), dtype=bool)
    for p, (a, b) in enumerate(pairs):
        member[p, [a, b]] = True
    disjoint = ~(member.astype(int) @ member.T.astype(int)).astype(bool)
    mp = np.array([p for p, _ in matchups], dtype=np.int64)
    mq = np.array([q for _, q in matchups], dtype=np.int64)
    return pairs, matchups, member, disjoint, mp, mq


class _Fixed:
    __slots__ = ("u",)

    def __init__(self, u: float):
        self.u = u

    def random(self) -> float:
        return self.u


def hopp_replicates(
    env: Environment,
    uniforms: UniformSource,
    R: int,
    eta: float = 1.0,
    rankings: Sequence[Ranking] = (),
    record_choices: bool = False,
) -> BatchResult:
    """Run ``R`` replicates of HOPP on a two-zero environment.

    HOPP's updates depend only on the round, never on the samples, so one
    Hedge bank serves every replicate; only the sampling is vectorized.
    """
    bank = PairPairHedgeBank(eta)
    total = np.zeros(R)
    Q = _rank_matrix(rankings) if rankings else None
    K = env.K
    violations: list[str] = []
    choices = np.zeros((env.T, R), dtype=np.int64) if record_choices else None

    for k, rnd in enumerate(env.rounds):
        Z = require_zero_count(rnd, 2)
        avail = rnd.available
        n = len(avail)
        pairs, matchups, member, disjoint, mp, mq = _hopp_tables(n)
        P = len(pairs)
        keys = [((avail[pairs[p][0]], avail[pairs[p][1]]), (avail[pairs[q][0]], avail[pairs[q][1]])) for p, q in matchups]
        d = np.array([_log_odds(bank.pair_hedge(key)) for key in keys])
        U = uniforms.draw(len(keys))

        if keys:
            loser = np.where(U.T < _p_first(d)[None, :], mq[None, :], mp[None, :])
            bad = np.zeros((R, P), dtype=bool)
            np.put_along_axis(bad, loser, True, axis=1)
            good = ~bad
        else:
            loser = np.zeros((R, 0), dtype=np.int64)
            good = np.ones((R, P), dtype=bool)
        g = good.astype(np.int64)

        clash = ((g @ disjoint.astype(np.int64)) * g).sum(axis=1)
        if clash.any():
            violations.append(f"round {rnd.t}: two disjoint good pairs (replicate {int(np.flatnonzero(clash)[0])})")

        n_good = g.sum(axis=1)
        outside = g @ (~member).astype(np.int64)
        common = (outside == 0) & (n_good > 0)[:, None]
        has_common = common.any(axis=1)
        local = np.where(has_common, common.argmax(axis=1), 0)
        chosen = np.asarray(avail)[local]
        triangle = (n_good > 0) & ~has_common
        u3 = uniforms.draw(1, triangle)[0]
        tri_cost = np.zeros(R)
        z_set = set(Z)
        for r in np.flatnonzero(triangle):
            in_union = (g[r] @ member.astype(np.int64)) > 0
            if n_good[r] != 3 or in_union.sum() != 3:
                violations.append(f"round {rnd.t}: good pairs neither share an action nor form a triangle")
                continue
            triple = tuple(avail[a] for a in np.flatnonzero(in_union))
            b = bank.triple_hedge(triple).sample(_Fixed(float(u3[r])))
            chosen[r] = b
            if z_set <= set(triple) and b not in z_set:
                tri_cost[r] = 1.0
        if choices is not None:
            choices[k] = chosen

        loss = np.array([0.0 if c in z_set else 1.0 for c in chosen.tolist()])
        total += loss
        zl = pairs.index((avail.index(Z[0]), avail.index(Z[1])))
        vs_z = np.array([m for m, (p, q) in enumerate(matchups) if zl in (p, q)], dtype=np.int64)
        pair_cost = (loser[:, vs_z] == zl).sum(axis=1) if vs_z.size else np.zeros(R)
        short = np.flatnonzero(loss > pair_cost + tri_cost)
        if short.size:
            violations.append(f"round {rnd.t}: learner loss exceeds certificate cost (replicate {int(short[0])})")

        cert = HoppCertificate(rnd.t, Z, avail, 0)
        if Q is not None:
            others = [a for a in avail if a not in z_set]
            z_rank = Q[:, list(Z)].min(axis=1)
            above = (Q[:, others] < z_rank[:, None]).sum(axis=1) if others else np.zeros(len(Q), dtype=np.int64)
            k_other = len(others)
            below = k_other - above
            pc = k_other * (k_other - 1) // 2 - below * (below - 1) // 2
            sl = (above > 0).astype(np.int64)
            lim_p = math.comb(max(K - 2, 0), 2) * sl
            lim_t = max(K - 2, 0) * sl
            over = (pc > lim_p) | (above > lim_t)
            if over.any():
                s = int(np.flatnonzero(over)[0])
                violations.append(
                    f"round {rnd.t}: ranking {rankings[s].order} costs ({pc[s]}, {above[s]}) "
                    f"exceed ({lim_p[s]}, {lim_t[s]})"
                )
        apply_certificate(bank, cert)
    return BatchResult(total, violations, choices)


def _log_odds(h) -> float:
    lw = h.log_weights
    return lw[1] - lw[0]
