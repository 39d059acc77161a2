"""Replay learners over environments and check their per-round guarantees.

:func:`replay` enforces the feedback model: full-information learners see
the whole round after acting, bandit learners only get a one-action loss
query. With ``check_invariants`` it also asserts, round by round, the
inequalities each learner's analysis relies on, and returns every failure
as a :class:`Violation` naming the check, the round and a witness.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .bandit import (
    BanditHATT,
    ChosenLossQuery,
    Level,
    bandit_defaults,
    level_bound,
    round_environment,
)
from .core import (
    BINARY,
    EXACTLY_ONE,
    EXACTLY_TWO,
    REAL,
    ConfigError,
    Environment,
    Ranking,
    sigma_choice,
)
from .hatt import HATT, certificate_comparator_cost, depth_bound
from .hopp import HOPP, TRIANGLE, hopp_certificate_comparator_cost
from .oracle import PerSubsetHedge, RankingHedge, ranking_round_losses

ALGORITHMS = ("hatt", "hopp", "bandit-hatt", "level", "per-subset", "ranking-hedge")
REQUIRED_CLASS = {"hatt": EXACTLY_ONE, "bandit-hatt": EXACTLY_ONE, "hopp": EXACTLY_TWO}
RANDOM_RANKINGS = 20
LEVEL_RANDOM_RANKINGS = 50
LEVEL_EXHAUSTIVE_MAX_N = 5


@dataclass(frozen=True)
class RoundRecord:
    t: int
    chosen: int
    loss: float


@dataclass(frozen=True)
class Violation:
    check: str
    t: int
    witness: str

    def __str__(self) -> str:
        return f"{self.check} failed at round {self.t}: {self.witness}"


class InvariantViolation(AssertionError):
    def __init__(self, violations: Sequence[Violation]):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations[:5]))


@dataclass
class ReplayResult:
    records: list[RoundRecord]
    violations: list[Violation] = field(default_factory=list)

    @property
    def losses(self) -> list[float]:
        return [r.loss for r in self.records]

    @property
    def total_loss(self) -> float:
        return float(sum(self.losses))

    def raise_for_violations(self) -> None:
        if self.violations:
            raise InvariantViolation(self.violations)


def check_compatible(algorithm: str, env: Environment) -> None:
    """Raise :class:`ConfigError` if ``algorithm`` cannot run on ``env``."""
    if algorithm not in ALGORITHMS:
        raise ConfigError(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}")
    need = REQUIRED_CLASS.get(algorithm)
    if need is not None:
        if env.zero_count_class != need or env.loss_mode != BINARY:
            raise ConfigError(
                f"{algorithm} needs a binary {need} environment, got "
                f"{env.loss_mode} {env.zero_count_class}"
            )
    if algorithm == "per-subset" and env.loss_mode != BINARY:
        raise ConfigError("per-subset needs binary losses")
    if algorithm == "ranking-hedge" and env.N > RankingHedge.cap:
        raise ConfigError(f"ranking-hedge supports N <= {RankingHedge.cap}, got N={env.N}")


def check_rankings(N: int, gen: np.random.Generator, extra: Sequence[Ranking] = (), n_random: int = RANDOM_RANKINGS) -> list[Ranking]:
    """Identity, ``n_random`` uniform rankings, then ``extra``."""
    out = [Ranking.identity(N)]
    out += [Ranking.random(N, gen) for _ in range(n_random)]
    out += list(extra)
    return out


def level_rankings(N: int, gen: np.random.Generator, extra: Sequence[Ranking] = ()) -> list[Ranking]:
    """Every ranking for small ``N``; otherwise a random sample plus ``extra``."""
    if N <= LEVEL_EXHAUSTIVE_MAX_N:
        return [Ranking(p) for p in itertools.permutations(range(N))]
    return check_rankings(N, gen, extra, LEVEL_RANDOM_RANKINGS)


def replay(
    env: Environment,
    learner,
    check_invariants: bool = False,
    rankings: Sequence[Ranking] = (),
    lstar: float | None = None,
) -> ReplayResult:
    """Play ``learner`` through ``env``.

    ``rankings`` are the comparators used by the ranking-dependent checks.
    ``lstar``, when exact, enables the Level total-loss check.
    """
    records: list[RoundRecord] = []
    violations: list[Violation] = []
    bandit = learner.feedback == "bandit"
    checker = _checker_for(learner, env, rankings) if check_invariants else None
    for r in env.rounds:
        if checker is not None:
            checker.before(r)
        if bandit:
            query = ChosenLossQuery(r)
            a = learner.step(r.available, query)
            loss = r.loss(a)
        else:
            a = learner.act(r.available)
            loss = r.loss(a)
            learner.learn(r)
        records.append(RoundRecord(r.t, a, loss))
        if checker is not None:
            violations.extend(checker.after(r, a, loss))
    if checker is not None:
        violations.extend(checker.finish(records, lstar))
    return ReplayResult(records, violations)


def _checker_for(learner, env: Environment, rankings: Sequence[Ranking]):
    if isinstance(learner, HATT):
        return HattChecker(learner, env, rankings)
    if isinstance(learner, HOPP):
        return HoppChecker(learner, env, rankings)
    if isinstance(learner, BanditHATT):
        return BanditChecker(learner)
    if isinstance(learner, Level):
        return LevelChecker(learner, env, rankings)
    return _NullChecker()


class _NullChecker:
    def before(self, r) -> None:
        pass

    def after(self, r, a, loss) -> list[Violation]:
        return []

    def finish(self, records, lstar) -> list[Violation]:
        return []


def _changed(before: dict, after: dict) -> set:
    """Keys whose weights moved; Hedges created since ``before`` started uniform."""
    return {k for k, w in after.items() if before.get(k, (0.0,) * len(w)) != w}


class HattChecker(_NullChecker):
    """Certificate bound on the learner, ranking certificate costs, bracket shape, update support."""

    def __init__(self, learner: HATT, env: Environment, rankings: Sequence[Ranking]):
        self.learner = learner
        self.rankings = list(rankings)
        self.depth = depth_bound(env.K)
        self._snap: dict = {}

    def before(self, r) -> None:
        self._snap = self.learner.bank.snapshot()

    def after(self, r, a, loss) -> list[Violation]:
        out = []
        outcome, cert = self.learner.outcome, self.learner.certificate
        n = len(r.available)
        if loss > cert.learner_cost:
            out.append(Violation("learner-loss-within-certificate", r.t, f"loss {loss} > certificate cost {cert.learner_cost}"))
        if len(outcome.consulted) != n - 1:
            out.append(Violation("bracket-structure", r.t, f"{len(outcome.consulted)} consulted pairs for {n} actions"))
        counts: dict[int, int] = {}
        for i, j in outcome.consulted:
            counts[i] = counts.get(i, 0) + 1
            counts[j] = counts.get(j, 0) + 1
        worst = max(counts.values(), default=0)
        if worst > depth_bound(n):
            out.append(Violation("bracket-structure", r.t, f"an action appears in {worst} consulted pairs"))
        z = cert.zero_action
        for sigma in self.rankings:
            cost = certificate_comparator_cost(cert, sigma)
            sl = r.loss(sigma_choice(sigma, r.available))
            if cost > self.depth * sl:
                out.append(Violation("ranking-certificate-cost", r.t, f"ranking {sigma.order}: {cost} > {self.depth} x {sl}"))
        expected = {(i, z) if i < z else (z, i) for i in cert.charged}
        moved = _changed(self._snap, self.learner.bank.snapshot())
        if not moved <= expected:
            out.append(Violation("update-support", r.t, f"pairs {sorted(moved - expected)} changed"))
        return out


class HoppChecker(_NullChecker):
    """Good pairs intersect, certificate bound on the learner, ranking certificate costs, update support."""

    def __init__(self, learner: HOPP, env: Environment, rankings: Sequence[Ranking]):
        self.learner = learner
        self.rankings = list(rankings)
        self.K = env.K
        self._snap: dict = {}

    def before(self, r) -> None:
        self._snap = self.learner.bank.snapshot()

    def after(self, r, a, loss) -> list[Violation]:
        out = []
        outcome, cert = self.learner.outcome, self.learner.certificate
        good = outcome.good_pairs
        for X, Y in itertools.combinations(good, 2):
            if not set(X) & set(Y):
                out.append(Violation("good-pairs-intersect", r.t, f"good pairs {X} and {Y} are disjoint"))
        if outcome.branch == TRIANGLE and len(good) != 3:
            out.append(Violation("good-pairs-intersect", r.t, f"triangle branch with good pairs {good}"))
        if loss > cert.learner_cost:
            out.append(Violation("learner-loss-within-certificate", r.t, f"loss {loss} > certificate cost {cert.learner_cost}"))
        km2 = max(self.K - 2, 0)
        for sigma in self.rankings:
            pc, tc = hopp_certificate_comparator_cost(cert, sigma)
            sl = r.loss(sigma_choice(sigma, r.available))
            if pc > math.comb(km2, 2) * sl or tc > km2 * sl:
                out.append(Violation("ranking-certificate-cost", r.t, f"ranking {sigma.order}: ({pc}, {tc}) with loss {sl}"))
        Z = cert.zero_pair
        expected = set(cert.pair_losses) | set(cert.triple_losses)
        moved = _changed(self._snap, self.learner.bank.snapshot())
        if not moved <= expected:
            out.append(Violation("update-support", r.t, f"hedges {sorted(moved - expected)} changed outside {Z}"))
        return out


class BanditChecker(_NullChecker):
    """State changes only on explored rounds whose played action had zero loss."""

    def __init__(self, learner: BanditHATT):
        self.learner = learner
        self._snap: dict = {}

    def before(self, r) -> None:
        self._snap = self.learner.bank.snapshot()

    def after(self, r, a, loss) -> list[Violation]:
        allowed = self.learner.explored and loss == 0.0
        moved = _changed(self._snap, self.learner.bank.snapshot())
        if moved and not allowed:
            return [Violation("bandit-update-condition", r.t, f"pairs {sorted(moved)} changed without an explored zero")]
        return []


class LevelChecker(_NullChecker):
    """Levels sum to the cumulative loss; each level stays under every ranking's potential; total bound."""

    def __init__(self, learner: Level, env: Environment, rankings: Sequence[Ranking]):
        self.learner = learner
        self.env = env
        self.rankings = list(rankings)
        self.history: list[list[int]] = []
        self.cum = 0.0

    def after(self, r, a, loss) -> list[Violation]:
        self.cum += loss
        levels = self.learner.levels
        self.history.append(list(levels))
        if sum(levels) != self.cum:
            return [Violation("level-sum", r.t, f"levels sum to {sum(levels)}, cumulative loss {self.cum}")]
        return []

    def finish(self, records, lstar) -> list[Violation]:
        out = level_potential_violations(self.env, np.array(self.history).reshape(-1, self.env.N), self.rankings)
        if lstar is not None:
            total = sum(rec.loss for rec in records)
            bound = level_bound(self.env.N, lstar)
            if total > bound:
                out.append(Violation("level-total", self.env.T, f"total {total} > {bound}"))
        return out


def level_potential_violations(env: Environment, levels_after: np.ndarray, rankings: Sequence[Ranking]) -> list[Violation]:
    """Check ``level(a) <= rank(a) + loss of sigma so far`` after every round, for every ranking.

    ``levels_after[t]`` holds the levels once round ``t + 1`` is done; ranks
    are 0-based here, matching ``rank_of``.
    """
    if env.T == 0 or not rankings:
        return []
    Q = np.array([s.rank_of for s in rankings], dtype=np.int64)
    cum = np.cumsum(ranking_round_losses(env, Q), axis=1)  # (S, T)
    slack = Q[:, None, :] + cum[:, :, None] - levels_after[None, :, :]
    bad = np.argwhere(slack < 0)
    if not bad.size:
        return []
    s, t, a = bad[0]
    return [
        Violation(
            "level-potential",
            int(t) + 1,
            f"action {a} level {levels_after[t, a]} above rank {Q[s, a]} + {cum[s, t]:g} "
            f"under ranking {rankings[s].order}",
        )
    ]


def make_learner(algorithm: str, env: Environment, rng, eta: float | None = None, mu: float | None = None):
    """Construct a learner with its default parameters, overridden by ``eta``/``mu``."""
    if algorithm == "hatt":
        return HATT(rng, 1.0 if eta is None else eta)
    if algorithm == "hopp":
        return HOPP(rng, 1.0 if eta is None else eta)
    if algorithm == "bandit-hatt":
        d_mu, d_eta = bandit_defaults(env.N, env.K, env.T)
        m = d_mu if mu is None else mu
        return BanditHATT(rng, env.K, m, m / env.K if eta is None else eta)
    if algorithm == "level":
        return Level(env.N)
    if algorithm == "per-subset":
        return PerSubsetHedge(rng, 1.0 if eta is None else eta)
    if algorithm == "ranking-hedge":
        return RankingHedge(rng, env.N, 1.0 if eta is None else eta)
    raise ConfigError(f"unknown algorithm {algorithm!r}")


def prepare_level_environment(env: Environment, rng) -> Environment:
    """Round real losses to binary; binary environments pass through."""
    return round_environment(env, rng) if env.loss_mode == REAL else env
