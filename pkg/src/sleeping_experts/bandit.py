"""Bandit-feedback learners: Bandit-HATT, Level, and randomized rounding of real losses."""

from __future__ import annotations

import math
from typing import Callable, Sequence

from .core import BINARY, UNCONSTRAINED, ConfigError, DomainError, Environment, Ranking, RoundTrace
from .hatt import PairHedgeBank, TournamentOutcome, depth_bound, run_tournament
from .rng import uniform_index

LossQuery = Callable[[int], float]


class FeedbackError(RuntimeError):
    """A bandit learner asked for a loss it is not entitled to see."""


class ChosenLossQuery:
    """Reveals the loss of exactly one action per round: the one played.

    The first query fixes the played action; any later query for a different
    action raises :class:`FeedbackError`.
    """

    __slots__ = ("_round", "queried")

    def __init__(self, round: RoundTrace):
        self._round = round
        self.queried: int | None = None

    def __call__(self, action: int) -> float:
        if self.queried is None:
            self.queried = action
        elif action != self.queried:
            raise FeedbackError(
                f"round {self._round.t}: loss of {action} requested after playing {self.queried}"
            )
        return self._round.loss(action)


def bandit_defaults(N: int, K: int, T: int) -> tuple[float, float]:
    """Exploration rate and learning rate ``(mu, eta)`` tuned for horizon ``T``."""
    mu = min(N * math.sqrt(K / T), 1.0) if T > 0 else 1.0
    return mu, mu / K


def bandit_hatt_bound(K: int, N: int, T: int, mu: float, eta: float, lstar: float) -> float:
    """Expected-loss bound of Bandit-HATT, with the additive constants made explicit."""
    x = K * eta / mu
    denom = -math.expm1(-x)
    ratio = depth_bound(K) * x / denom
    additive = math.comb(N, 2) * math.log(2) * (K / mu) / denom + mu * T
    return ratio * lstar + additive


def importance_weighted_losses(
    outcome: TournamentOutcome, n_available: int, explored: bool, chosen: int, loss: float, mu: float
) -> dict[int, float]:
    """Estimated pair losses: ``{i: c(i)}`` for consulted pairs ``{i, chosen}``.

    Non-empty only on an exploration round whose played action had zero loss;
    the weight ``|A_t| / mu`` makes each entry unbiased for the
    full-information pair loss.
    """
    if not (explored and loss == 0.0):
        return {}
    value = n_available / mu
    out = {}
    for i, j in outcome.consulted:
        if i == chosen:
            out[j] = value
        elif j == chosen:
            out[i] = value
    return out


class BanditHATT:
    """HATT with uniform exploration and inverse-propensity pair losses."""

    name = "bandit-hatt"
    feedback = "bandit"
    zero_count = 1

    def __init__(self, rng, K: int, mu: float, eta: float):
        if not 0.0 < mu <= 1.0:
            raise ConfigError(f"mu must lie in (0, 1], got {mu}")
        if not eta > 0:
            raise ConfigError(f"eta must be positive, got {eta}")
        self.K = K
        self.mu = mu
        self.eta = eta
        self.rng = rng
        self.bank = PairHedgeBank(eta, K / mu)
        self.outcome: TournamentOutcome | None = None
        self.explored = False
        self.updated = False
        self.pair_losses: dict[int, float] = {}

    def step(self, available: Sequence[int], loss_query: LossQuery) -> int:
        if len(available) > self.K:
            raise DomainError(f"|A_t|={len(available)} exceeds K={self.K}")
        rng = self.rng
        outcome = self.outcome = run_tournament(available, self.bank, rng)
        self.explored = rng.random() < self.mu
        if self.explored:
            avail = sorted(available)
            chosen = avail[uniform_index(rng, len(avail))]
        else:
            chosen = outcome.winner
        loss = loss_query(chosen)
        self.pair_losses = importance_weighted_losses(
            outcome, len(available), self.explored, chosen, loss, self.mu
        )
        hedges = self.bank.hedges
        for i, value in self.pair_losses.items():
            hedges[(i, chosen) if i < chosen else (chosen, i)].charge(i, value)
        self.updated = bool(self.pair_losses)
        return chosen


def bandit_hatt_step(state: BanditHATT, available: Sequence[int], loss_query: LossQuery) -> tuple[int, bool]:
    chosen = state.step(available, loss_query)
    return chosen, state.updated


class Level:
    """Deterministic level algorithm.

    Plays an available action of minimum level (lowest id on ties) and
    raises that action's level by one whenever it incurs loss 1.
    """

    name = "level"
    feedback = "bandit"
    zero_count = None

    def __init__(self, N: int):
        self.levels = [0] * N

    def step(self, available: Sequence[int], loss_query: LossQuery) -> int:
        if not available:
            raise DomainError("level step over an empty action set")
        levels = self.levels
        chosen = min(sorted(available), key=levels.__getitem__)
        loss = loss_query(chosen)
        if loss == 1.0:
            levels[chosen] += 1
        elif loss != 0.0:
            raise DomainError(f"level needs binary losses, got {loss}; round real losses first")
        return chosen


def level_step(state: Level, available: Sequence[int], loss_query: LossQuery) -> int:
    return state.step(available, loss_query)


def level_certificate(levels: Sequence[int], sigma: Ranking, cum_sigma_loss: float) -> int | None:
    """First action whose level exceeds ``rank - 1 + cum_sigma_loss``, or ``None``.

    ``rank`` is the 1-based position under ``sigma``; ``cum_sigma_loss`` is
    sigma's loss over the rounds already played.
    """
    for a, lv in enumerate(levels):
        if lv > sigma.rank_of[a] + cum_sigma_loss:
            return a
    return None


def level_bound(N: int, lstar: float) -> float:
    return N * lstar + N * (N - 1) / 2


def round_losses(round: RoundTrace, rng) -> RoundTrace:
    """Independently round each loss to 1 with probability equal to the loss."""
    out = []
    for a, x in zip(round.available, round.losses):
        if not 0.0 <= x <= 1.0:
            raise DomainError(f"round {round.t}: loss {x} of action {a} outside [0, 1]")
        out.append(1.0 if rng.random() < x else 0.0)
    return RoundTrace(round.t, round.available, tuple(out))


def round_environment(env: Environment, rng) -> Environment:
    """Binary environment obtained by rounding every loss of ``env``."""
    return Environment(
        env.N, env.K, tuple(round_losses(r, rng) for r in env.rounds), UNCONSTRAINED, BINARY
    )

