"""Seeded random streams.

Every stochastic component draws from its own stream, derived from a 64-bit
root seed and a ``(trial, tag)`` key through :class:`numpy.random.SeedSequence`.
The underlying bit generator is PCG64. Identical seed and key give identical
draws; distinct keys give statistically independent streams.
"""

from __future__ import annotations

import zlib

import numpy as np

BLOCK_SIZE = 4096


def tag_key(tag: str) -> int:
    """Stable 32-bit integer for a module tag (CRC32 of its UTF-8 bytes)."""
    return zlib.crc32(tag.encode("utf-8"))


def generator(seed: int, trial: int = 0, tag: str = "") -> np.random.Generator:
    """Return a PCG64 generator keyed by ``(seed, trial, tag)``."""
    if seed < 0 or seed >= 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(int(trial), tag_key(tag)))
    return np.random.Generator(np.random.PCG64(ss))


class Stream:
    """Buffered uniform stream over a numpy generator.

    Scalar draws from :class:`numpy.random.Generator` cost a few hundred
    nanoseconds each; the per-round loops draw millions of them, so uniforms
    are pulled in fixed-size blocks. The block size is constant, which keeps
    the draw sequence a pure function of the seed.
    """

    __slots__ = ("_gen", "_buf", "_pos")

    def __init__(self, gen: np.random.Generator):
        self._gen = gen
        self._buf: list[float] = []
        self._pos = 0

    @classmethod
    def from_key(cls, seed: int, trial: int = 0, tag: str = "") -> "Stream":
        return cls(generator(seed, trial, tag))

    def random(self) -> float:
        """One uniform draw on [0, 1)."""
        if self._pos >= len(self._buf):
            self._buf = self._gen.random(BLOCK_SIZE).tolist()
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return u

    def below(self, n: int) -> int:
        """Uniform integer in ``[0, n)``."""
        k = int(self.random() * n)
        return k if k < n else n - 1

    def bernoulli(self, p: float) -> bool:
        return self.random() < p

    @property
    def numpy(self) -> np.random.Generator:
        """The wrapped generator, for bulk draws (permutations, arrays)."""
        return self._gen


def uniform_index(rng, n: int) -> int:
    """Uniform index in ``[0, n)`` from anything exposing ``random()``."""
    k = int(rng.random() * n)
    return k if k < n else n - 1
