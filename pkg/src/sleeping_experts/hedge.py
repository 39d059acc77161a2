"""Exponential weights (Hedge) over small finite choice sets.

Weights are kept in log space and shifted so the largest log-weight is zero
after every update; over long horizons ``eta * loss`` sums would otherwise
underflow plain weights.
"""

from __future__ import annotations

import math
from typing import Hashable, Mapping, Sequence

from .core import DomainError

Choice = Hashable


class Hedge:
    """One Hedge instance with choices ``choices``, rate ``eta`` and loss range ``[0, R]``.

    Choice labels are opaque: actions, pairs of actions and pairs of pairs
    all work.
    """

    __slots__ = ("choices", "eta", "loss_range", "log_weights", "_index")

    def __init__(self, choices: Sequence[Choice], eta: float = 1.0, loss_range: float = 1.0):
        if not choices:
            raise DomainError("Hedge needs at least one choice")
        if not eta > 0:
            raise DomainError(f"eta must be positive, got {eta}")
        if not loss_range > 0:
            raise DomainError(f"loss_range must be positive, got {loss_range}")
        self.choices = tuple(choices)
        self._index = {c: k for k, c in enumerate(self.choices)}
        if len(self._index) != len(self.choices):
            raise DomainError(f"duplicate choices in {self.choices}")
        self.eta = float(eta)
        self.loss_range = float(loss_range)
        self.log_weights = [0.0] * len(self.choices)

    def __len__(self) -> int:
        return len(self.choices)

    def __repr__(self) -> str:
        probs = ", ".join(f"{c!r}: {p:.4f}" for c, p in zip(self.choices, self.probabilities()))
        return f"Hedge({{{probs}}}, eta={self.eta}, R={self.loss_range})"

    def copy(self) -> "Hedge":
        h = Hedge.__new__(Hedge)
        h.choices = self.choices
        h._index = self._index
        h.eta = self.eta
        h.loss_range = self.loss_range
        h.log_weights = list(self.log_weights)
        return h

    def probabilities(self) -> list[float]:
        lw = self.log_weights
        top = max(lw)
        w = [math.exp(x - top) for x in lw]
        total = math.fsum(w)
        return [x / total for x in w]

    def prob(self, choice: Choice) -> float:
        return self.probabilities()[self._index[choice]]

    def sample(self, rng) -> Choice:
        """Draw one choice with probability ``p(choice)``.

        ``rng`` is anything with a ``random()`` method returning a uniform
        on ``[0, 1)``; exactly one uniform is consumed per call.
        """
        u = rng.random()
        lw = self.log_weights
        if len(lw) == 2:
            # p(first) = 1 / (1 + exp(lw1 - lw0))
            d = lw[1] - lw[0]
            p0 = 1.0 / (1.0 + math.exp(d)) if d < 700.0 else 0.0
            return self.choices[0] if u < p0 else self.choices[1]
        probs = self.probabilities()
        acc = 0.0
        for c, p in zip(self.choices, probs):
            acc += p
            if u < acc:
                return c
        # Rounding left acc slightly below 1: fall back to the last positive-mass choice.
        for c, p in zip(reversed(self.choices), reversed(probs)):
            if p > 0.0:
                return c
        return self.choices[-1]

    def update(self, losses: Mapping[Choice, float] | Sequence[float]) -> None:
        """Exponential weight update in place.

        ``losses`` is either a mapping over every choice or a sequence aligned
        with ``choices``.
        """
        if isinstance(losses, Mapping):
            try:
                vec = [losses[c] for c in self.choices]
            except KeyError as exc:
                raise DomainError(f"loss missing for choice {exc.args[0]!r}") from None
        else:
            vec = list(losses)
            if len(vec) != len(self.choices):
                raise DomainError(f"expected {len(self.choices)} losses, got {len(vec)}")
        R = self.loss_range
        for x in vec:
            if not 0.0 <= x <= R:
                raise DomainError(f"loss {x} outside [0, {R}]")
        eta = self.eta
        lw = [w - eta * x for w, x in zip(self.log_weights, vec)]
        top = max(lw)
        self.log_weights = [w - top for w in lw]

    def charge(self, choice: Choice, loss: float) -> None:
        """Update with ``loss`` on ``choice`` and zero on every other choice."""
        if not 0.0 <= loss <= self.loss_range:
            raise DomainError(f"loss {loss} outside [0, {self.loss_range}]")
        lw = self.log_weights
        lw[self._index[choice]] -= self.eta * loss
        top = max(lw)
        if top != 0.0:
            self.log_weights = [w - top for w in lw]


def ewu(p: Sequence[float], losses: Sequence[float], eta: float) -> list[float]:
    """One exponential weight update of a probability vector."""
    if len(p) != len(losses):
        raise DomainError("probability and loss vectors differ in length")
    shift = min(losses) if losses else 0.0
    w = [pi * math.exp(-eta * (x - shift)) for pi, x in zip(p, losses)]
    total = math.fsum(w)
    return [x / total for x in w]


def ewu_update(h: Hedge, losses: Mapping[Choice, float] | Sequence[float]) -> Hedge:
    """Return an updated copy of ``h``; ``h`` itself is left untouched."""
    out = h.copy()
    out.update(losses)
    return out


def sample(h: Hedge, rng) -> Choice:
    return h.sample(rng)


def hedge_bound(eta: float, R: float, n_choices: int, comparator_loss: float) -> float:
    """Upper bound on Hedge's expected cumulative loss.

    ``eta*R / (1 - exp(-eta*R)) * L + R * ln(n) / (1 - exp(-eta*R))`` where
    ``L`` is the cumulative loss of the best fixed choice.
    """
    if not (eta > 0 and R > 0 and n_choices >= 1):
        raise DomainError("hedge_bound needs eta > 0, R > 0 and n_choices >= 1")
    denom = -math.expm1(-eta * R)
    return eta * R / denom * comparator_loss + R * math.log(n_choices) / denom
