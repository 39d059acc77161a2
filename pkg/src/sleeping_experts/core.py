"""Domain types for online learning with changing action sets.

Actions are integers in ``[0, N)``. A round exposes a sorted available set
and a loss for each available action; an environment is a finite sequence of
rounds. A ranking is a total order over all ``N`` actions and plays, in each
round, its highest-ranked available action.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

EXACTLY_ONE = "exactly-one"
EXACTLY_TWO = "exactly-two"
UNCONSTRAINED = "unconstrained"
ZERO_COUNT_CLASSES = (EXACTLY_ONE, EXACTLY_TWO, UNCONSTRAINED)
REQUIRED_ZEROS = {EXACTLY_ONE: 1, EXACTLY_TWO: 2}

BINARY = "binary"
REAL = "real"


class DomainError(ValueError):
    """Input outside the domain of an operation."""


class PreconditionError(ValueError):
    """A round does not satisfy an algorithm's structural assumption."""


class ConfigError(ValueError):
    """Invalid or mutually inconsistent parameters."""


@dataclass(frozen=True)
class Ranking:
    """Total order over ``N`` actions.

    ``order[k]`` is the action ranked ``k``-th (0 is best) and ``rank_of`` is
    the inverse permutation.
    """

    order: tuple[int, ...]
    rank_of: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        order = tuple(int(a) for a in self.order)
        n = len(order)
        if sorted(order) != list(range(n)):
            raise DomainError(f"ranking order is not a permutation of [0, {n}): {order}")
        rank_of = [0] * n
        for k, a in enumerate(order):
            rank_of[a] = k
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "rank_of", tuple(rank_of))

    @classmethod
    def identity(cls, n: int) -> "Ranking":
        return cls(tuple(range(n)))

    @classmethod
    def random(cls, n: int, gen: np.random.Generator) -> "Ranking":
        return cls(tuple(int(a) for a in gen.permutation(n)))

    @property
    def n(self) -> int:
        return len(self.order)

    def position(self, action: int) -> int:
        """1-based rank position of ``action``."""
        return self.rank_of[action] + 1

    def choice(self, actions: Iterable[int]) -> int:
        return sigma_choice(self, actions)


def sigma_choice(sigma: Ranking, actions: Iterable[int]) -> int:
    """Highest-ranked element of ``actions`` under ``sigma``."""
    rank_of = sigma.rank_of
    best = -1
    best_rank = math.inf
    for a in actions:
        if a < 0 or a >= len(rank_of):
            raise DomainError(f"action {a} outside [0, {len(rank_of)})")
        r = rank_of[a]
        if r < best_rank:
            best, best_rank = a, r
    if best < 0:
        raise DomainError("sigma_choice of an empty action set")
    return best


@dataclass(frozen=True)
class RoundTrace:
    """One round: round index ``t`` (1-based), available actions, their losses."""

    t: int
    available: tuple[int, ...]
    losses: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "available", tuple(int(a) for a in self.available))
        object.__setattr__(self, "losses", tuple(float(x) for x in self.losses))
        if len(self.available) != len(self.losses):
            raise DomainError(
                f"round {self.t}: {len(self.available)} available actions but "
                f"{len(self.losses)} losses"
            )

    @cached_property
    def loss_of(self) -> dict[int, float]:
        return dict(zip(self.available, self.losses))

    def loss(self, action: int) -> float:
        try:
            return self.loss_of[action]
        except KeyError:
            raise DomainError(f"round {self.t}: action {action} is not available") from None

    @property
    def zeros(self) -> tuple[int, ...]:
        """Available actions with zero loss, ascending."""
        return tuple(a for a, x in zip(self.available, self.losses) if x == 0.0)

    @property
    def mask(self) -> int:
        m = 0
        for a in self.available:
            m |= 1 << a
        return m

    @classmethod
    def from_mapping(cls, t: int, losses: Mapping[int, float]) -> "RoundTrace":
        avail = tuple(sorted(losses))
        return cls(t, avail, tuple(losses[a] for a in avail))


@dataclass(frozen=True)
class Environment:
    """A fixed (oblivious) sequence of rounds.

    ``K`` is the declared bound on ``|A_t|``; :func:`make_environment` sets it
    to the realized maximum when not given.
    """

    N: int
    K: int
    rounds: tuple[RoundTrace, ...]
    zero_count_class: str = UNCONSTRAINED
    loss_mode: str = BINARY

    def __post_init__(self) -> None:
        object.__setattr__(self, "rounds", tuple(self.rounds))

    @property
    def T(self) -> int:
        return len(self.rounds)

    def __iter__(self):
        return iter(self.rounds)

    def __len__(self) -> int:
        return len(self.rounds)

    @cached_property
    def masks(self) -> np.ndarray:
        """Bitmask of the available set, per round (int64, shape ``(T,)``)."""
        return np.array([r.mask for r in self.rounds], dtype=np.int64)

    @cached_property
    def loss_matrix(self) -> np.ndarray:
        """``(T, N)`` losses, zero where an action is unavailable."""
        out = np.zeros((self.T, self.N))
        for k, r in enumerate(self.rounds):
            out[k, list(r.available)] = r.losses
        return out

    @cached_property
    def availability(self) -> np.ndarray:
        """``(T, N)`` boolean availability."""
        out = np.zeros((self.T, self.N), dtype=bool)
        for k, r in enumerate(self.rounds):
            out[k, list(r.available)] = True
        return out

    def grouped_losses(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct available-set masks and per-action loss totals for each.

        Returns ``(masks, totals)`` with ``totals[g, a]`` the summed loss of
        action ``a`` over rounds whose available set is ``masks[g]``.
        Ranking losses depend on the environment only through these totals.
        """
        if self.T == 0:
            return np.zeros(0, dtype=np.int64), np.zeros((0, self.N))
        uniq, inverse = np.unique(self.masks, return_inverse=True)
        totals = np.zeros((len(uniq), self.N))
        np.add.at(totals, inverse, self.loss_matrix)
        return uniq, totals


def make_environment(
    rounds: Sequence[RoundTrace],
    N: int,
    K: int | None = None,
    zero_count_class: str = UNCONSTRAINED,
    loss_mode: str = BINARY,
) -> Environment:
    if K is None:
        K = max((len(r.available) for r in rounds), default=0)
    return Environment(N, K, tuple(rounds), zero_count_class, loss_mode)


def comparator_loss_of(sigma: Ranking, env: Environment) -> float:
    """Cumulative loss of always playing ``sigma``'s top available action."""
    return float(sum(r.loss(sigma_choice(sigma, r.available)) for r in env.rounds))


def comparator_cumulative(sigma: Ranking, env: Environment) -> list[float]:
    """Running cumulative loss of ``sigma`` after each round."""
    out, total = [], 0.0
    for r in env.rounds:
        total += r.loss(sigma_choice(sigma, r.available))
        out.append(total)
    return out


def validate_environment(env: Environment) -> list[str]:
    """Every invariant violation in ``env``; an empty list means valid."""
    problems: list[str] = []
    if env.zero_count_class not in ZERO_COUNT_CLASSES:
        problems.append(f"unknown zero_count_class {env.zero_count_class!r}")
    if env.loss_mode not in (BINARY, REAL):
        problems.append(f"unknown loss_mode {env.loss_mode!r}")
    if env.N < 1:
        problems.append(f"N must be positive, got {env.N}")
    required = REQUIRED_ZEROS.get(env.zero_count_class)
    for k, r in enumerate(env.rounds):
        where = f"round {r.t}"
        if r.t != k + 1:
            problems.append(f"{where}: expected round index {k + 1}")
        if not r.available:
            problems.append(f"{where}: empty available set")
            continue
        if list(r.available) != sorted(set(r.available)):
            problems.append(f"{where}: available set not sorted and duplicate-free")
        if r.available[0] < 0 or r.available[-1] >= env.N:
            problems.append(f"{where}: action id outside [0, {env.N})")
        if len(r.available) > env.K:
            problems.append(f"{where}: |A_t|={len(r.available)} exceeds K={env.K}")
        for a, x in zip(r.available, r.losses):
            if env.loss_mode == BINARY and x not in (0.0, 1.0):
                problems.append(f"{where}: loss {x} of action {a} is not binary")
            elif not 0.0 <= x <= 1.0:
                problems.append(f"{where}: loss {x} of action {a} outside [0, 1]")
        if required is not None:
            zeros = sum(1 for x in r.losses if x == 0.0)
            if zeros != required:
                problems.append(
                    f"{where}: {zeros} zero-loss actions, class "
                    f"{env.zero_count_class} requires {required}"
                )
    return problems


def require_zero_count(r: RoundTrace, count: int) -> tuple[int, ...]:
    """Zero-loss actions of a binary round, which must number exactly ``count``."""
    losses = r.losses
    n0 = losses.count(0.0)
    if n0 + losses.count(1.0) != len(losses):
        raise PreconditionError(f"round {r.t}: losses {losses} are not binary")
    if n0 != count:
        raise PreconditionError(
            f"round {r.t}: expected exactly {count} zero-loss action(s), found {n0}"
        )
    return tuple(a for a, x in zip(r.available, losses) if x == 0.0)


@dataclass(frozen=True)
class RegretReport:
    """Learner loss against the best ranking, with approximate regret per ratio."""

    learner_loss: float
    comparator_loss: float
    best_ranking: Ranking | None
    approx_regret: dict[float, float]
    per_round_cumulative: tuple[tuple[float, float], ...] = ()
    lstar_exact: bool = True

    def to_dict(self) -> dict:
        return {
            "learner_loss": self.learner_loss,
            "comparator_loss": self.comparator_loss,
            "best_ranking": list(self.best_ranking.order) if self.best_ranking else None,
            "approx_regret": {repr(float(a)): v for a, v in self.approx_regret.items()},
            "lstar_exact": self.lstar_exact,
        }


def regret_report(
    learner_losses: Sequence[float],
    comparator_losses: Sequence[float],
    best: Ranking | None,
    alphas: Iterable[float] = (1.0,),
    lstar_exact: bool = True,
) -> RegretReport:
    """Build a report from per-round learner and comparator losses."""
    cum_learner = np.cumsum(np.asarray(learner_losses, dtype=float)).tolist()
    cum_comp = np.cumsum(np.asarray(comparator_losses, dtype=float)).tolist()
    total = cum_learner[-1] if cum_learner else 0.0
    lstar = cum_comp[-1] if cum_comp else 0.0
    return RegretReport(
        learner_loss=total,
        comparator_loss=lstar,
        best_ranking=best,
        approx_regret={float(a): total - float(a) * lstar for a in alphas},
        per_round_cumulative=tuple(zip(cum_learner, cum_comp)),
        lstar_exact=lstar_exact,
    )
