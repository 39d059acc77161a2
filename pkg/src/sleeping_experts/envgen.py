"""Environment generators and the one-one to one-zero loss randomization.

Generators draw every round in bulk with numpy and are pure functions of
``(spec, seed)``. Available-set sizes are uniform on
``[max(2, zeros required), K]`` (clipped to ``K`` when ``K == 1``), and each
available set is a uniformly random subset of that size.

Kinds
-----
planted-ranking
    A hidden ranking ``sigma*`` puts the zero(s) on its top available
    action(s). With probability ``epsilon`` per round the zero(s) move to a
    uniformly random position instead. In the unconstrained class the top
    action gets loss 0, the rest are fair coin flips, and ``epsilon`` flips
    the top action's loss to 1.
uniform-random
    Zero positions uniform over the available set; unconstrained rounds use
    i.i.d. fair coins.
adversarial-rotation
    The zero goes to the available action that held it least recently
    (lowest id among never-zeroed actions first), so the zero keeps moving
    away from whatever a greedy learner has learned.
real-valued
    Losses i.i.d. uniform on ``[0, 1]``; unconstrained class only.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import (
    BINARY,
    EXACTLY_ONE,
    REAL,
    REQUIRED_ZEROS,
    UNCONSTRAINED,
    ZERO_COUNT_CLASSES,
    ConfigError,
    DomainError,
    Environment,
    Ranking,
    RoundTrace,
)
from .rng import generator, uniform_index

PLANTED = "planted-ranking"
UNIFORM = "uniform-random"
ROTATION = "adversarial-rotation"
REAL_VALUED = "real-valued"
KINDS = (PLANTED, UNIFORM, ROTATION, REAL_VALUED)


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str
    N: int
    K: int
    T: int
    epsilon: float = 0.0
    zero_count_class: str = EXACTLY_ONE
    seed: int = 0

    def check(self) -> None:
        """Raise :class:`ConfigError` if no environment can satisfy the spec."""
        if self.kind not in KINDS:
            raise ConfigError(f"unknown generator kind {self.kind!r}; expected one of {KINDS}")
        if self.zero_count_class not in ZERO_COUNT_CLASSES:
            raise ConfigError(f"unknown zero_count_class {self.zero_count_class!r}")
        if not 1 <= self.K <= self.N:
            raise ConfigError(f"need 1 <= K <= N, got K={self.K}, N={self.N}")
        if self.T < 1:
            raise ConfigError(f"need T >= 1, got {self.T}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ConfigError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        need = REQUIRED_ZEROS.get(self.zero_count_class, 0)
        if self.K < need:
            raise ConfigError(f"class {self.zero_count_class} needs K >= {need}, got K={self.K}")
        if self.kind == REAL_VALUED and self.zero_count_class != UNCONSTRAINED:
            raise ConfigError("real-valued environments must use the unconstrained class")


def size_range(K: int, zero_count_class: str) -> tuple[int, int]:
    need = REQUIRED_ZEROS.get(zero_count_class, 0)
    return max(min(2, K), need), K


def _available_sets(gen: np.random.Generator, N: int, K: int, T: int, lo: int) -> tuple[np.ndarray, np.ndarray]:
    """``(perm, sizes)``: the first ``sizes[t]`` entries of ``perm[t]`` form ``A_t``."""
    sizes = gen.integers(lo, K + 1, size=T)
    perm = np.argsort(gen.random((T, N)), axis=1)
    return perm, sizes


def _top_by_rank(perm: np.ndarray, sizes: np.ndarray, rank: np.ndarray, count: int) -> np.ndarray:
    """Indices into ``perm`` rows of the ``count`` best-ranked available actions."""
    T, N = perm.shape
    r = rank[perm].astype(float)
    r[np.arange(N)[None, :] >= sizes[:, None]] = np.inf
    return np.argsort(r, axis=1, kind="stable")[:, :count]


def _uniform_positions(gen: np.random.Generator, sizes: np.ndarray, count: int) -> np.ndarray:
    """``count`` distinct uniform positions below ``sizes[t]`` for every row."""
    T = len(sizes)
    N = int(sizes.max())
    keys = gen.random((T, N))
    keys[np.arange(N)[None, :] >= sizes[:, None]] = np.inf
    return np.argsort(keys, axis=1, kind="stable")[:, :count]


def _rounds_from_positions(perm, sizes, zero_pos) -> list[RoundTrace]:
    rounds = []
    for t in range(len(sizes)):
        n = int(sizes[t])
        row = perm[t, :n].tolist()
        zeros = {row[p] for p in zero_pos[t].tolist()}
        avail = sorted(row)
        rounds.append(RoundTrace(t + 1, tuple(avail), tuple(0.0 if a in zeros else 1.0 for a in avail)))
    return rounds


def _rounds_from_losses(perm, sizes, losses) -> list[RoundTrace]:
    rounds = []
    for t in range(len(sizes)):
        n = int(sizes[t])
        pairs = sorted(zip(perm[t, :n].tolist(), losses[t, :n].tolist()))
        rounds.append(RoundTrace(t + 1, tuple(a for a, _ in pairs), tuple(x for _, x in pairs)))
    return rounds


def generate(spec: GeneratorSpec, rng: np.random.Generator | None = None) -> Environment:
    """Draw an environment for ``spec``; ``rng`` defaults to the stream keyed by ``spec.seed``."""
    return generate_planted(spec, rng)[0]


def generate_planted(spec: GeneratorSpec, rng: np.random.Generator | None = None) -> tuple[Environment, Ranking | None]:
    """Like :func:`generate`, also returning the hidden ranking of planted kinds (else ``None``)."""
    spec.check()
    gen = rng if rng is not None else generator(spec.seed, 0, "envgen")
    N, K, T = spec.N, spec.K, spec.T
    cls = spec.zero_count_class
    lo, _ = size_range(K, cls)
    perm, sizes = _available_sets(gen, N, K, T, lo)
    count = REQUIRED_ZEROS.get(cls, 1)

    if spec.kind == REAL_VALUED:
        rounds = _rounds_from_losses(perm, sizes, gen.random((T, N)))
        return Environment(N, K, tuple(rounds), UNCONSTRAINED, REAL), None

    if spec.kind == ROTATION:
        rounds = _rotation_rounds(perm, sizes, count)
        return Environment(N, K, tuple(rounds), cls, BINARY), None

    hidden = None
    if spec.kind == PLANTED:
        order = gen.permutation(N)
        hidden = Ranking(tuple(order.tolist()))
        rank = np.argsort(order)
        zero_pos = _top_by_rank(perm, sizes, rank, count)
        noisy = gen.random(T) < spec.epsilon
    else:
        zero_pos = None
        noisy = np.ones(T, dtype=bool)

    if cls == UNCONSTRAINED:
        losses = (gen.random((T, N)) < 0.5).astype(float)
        if zero_pos is not None:
            top = zero_pos[:, 0]
            losses[np.arange(T), top] = noisy.astype(float)
        return Environment(N, K, tuple(_rounds_from_losses(perm, sizes, losses)), cls, BINARY), hidden

    relocated = _uniform_positions(gen, sizes, count)
    if zero_pos is None:
        zero_pos = relocated
    else:
        zero_pos = np.where(noisy[:, None], relocated, zero_pos)
    return Environment(N, K, tuple(_rounds_from_positions(perm, sizes, zero_pos)), cls, BINARY), hidden


def _rotation_rounds(perm: np.ndarray, sizes: np.ndarray, count: int) -> list[RoundTrace]:
    N = perm.shape[1]
    last_zero = [0] * N  # round of each action's most recent zero; 0 = never
    rounds = []
    for t in range(len(sizes)):
        avail = sorted(perm[t, : int(sizes[t])].tolist())
        zeros = set(sorted(avail, key=lambda a: (last_zero[a], a))[:count])
        for a in zeros:
            last_zero[a] = t + 1
        rounds.append(RoundTrace(t + 1, tuple(avail), tuple(0.0 if a in zeros else 1.0 for a in avail)))
    return rounds


def z01_to_z0(round: RoundTrace, K: int, rng) -> RoundTrace:
    """Randomize a round with exactly one zero or exactly one one into a one-zero round.

    One zero: with probability ``1/(K-1)`` the round passes through;
    otherwise a uniform available action becomes the only zero. One one: a
    uniform action among the ``K - 1`` zero-loss actions keeps its zero and
    every other action gets loss 1. When ``K == 2`` both descriptions match
    and the round is treated as one-zero, so it always passes through.

    Consumes one uniform in the pass-through test and one for the zero
    position (when drawn).
    """
    avail = round.available
    if len(avail) != K:
        raise DomainError(f"round {round.t}: need |A_t| = K = {K}, got {len(avail)}")
    if K < 2:
        raise DomainError("the randomization needs K >= 2")
    losses = round.losses
    zeros = losses.count(0.0)
    ones = losses.count(1.0)
    if zeros + ones != K:
        raise DomainError(f"round {round.t}: losses {losses} are not binary")
    if zeros == 1:
        if rng.random() < 1.0 / (K - 1):
            return round
        z = avail[uniform_index(rng, K)]
    elif ones == 1:
        candidates = [a for a, x in zip(avail, losses) if x == 0.0]
        z = candidates[uniform_index(rng, K - 1)]
    else:
        raise DomainError(
            f"round {round.t}: {zeros} zeros and {ones} ones; need exactly one of either"
        )
    return RoundTrace(round.t, avail, tuple(0.0 if a == z else 1.0 for a in avail))


def z01_conditional_mean(K: int, loss: float, one_zero: bool) -> float:
    """Expected output loss of an action whose input loss is ``loss``."""
    if one_zero:
        return (K - 2) / K + loss / (K - 1)
    return (K - 2) / (K - 1) + loss / (K - 1)


Adversary = Callable[[int, "int | None"], RoundTrace]


class RotatingAdversary:
    """Adaptive one-zero adversary: never gives the zero to the learner's last pick.

    Each round offers all ``K`` actions of a sliding window over ``[0, N)``
    and puts the zero on the lowest-id available action other than the
    learner's previous choice.
    """

    def __init__(self, N: int, K: int):
        if not 2 <= K <= N:
            raise ConfigError(f"need 2 <= K <= N, got K={K}, N={N}")
        self.N = N
        self.K = K

    def __call__(self, t: int, last_action: int | None) -> RoundTrace:
        start = (t - 1) % self.N
        avail = sorted((start + k) % self.N for k in range(self.K))
        z = next(a for a in avail if a != last_action)
        return RoundTrace(t, tuple(avail), tuple(0.0 if a == z else 1.0 for a in avail))


def play_adaptive(adversary: Adversary, learner, T: int, N: int, K: int) -> tuple[Environment, list[int]]:
    """Run a full-information learner against an adaptive adversary.

    Returns the realized environment (fixed after the fact) and the choices.
    """
    rounds, chosen = [], []
    last = None
    for t in range(1, T + 1):
        r = adversary(t, last)
        a = learner.act(r.available)
        learner.learn(r)
        rounds.append(r)
        chosen.append(a)
        last = a
    return Environment(N, K, tuple(rounds), EXACTLY_ONE, BINARY), chosen


def zero_frequencies(env: Environment) -> np.ndarray:
    """Fraction of rounds in which each action holds a zero loss."""
    counts = np.zeros(env.N)
    for r in env.rounds:
        for a in r.zeros:
            counts[a] += 1
    return counts / max(env.T, 1)

