"""Seeded, forkable randomness.

Every stochastic operation in pufsim takes an explicit :class:`Rng`.  An
``Rng`` is built from a 64-bit seed and carries two generators derived from
it: a numpy ``PCG64`` generator for array draws and a Mersenne Twister
(``random.Random``) for cheap scalar bit draws.  Both are bit-reproducible
across platforms for a fixed seed.

Forking is keyed: the child seed is the first 8 bytes of
``SHA-256(parent_seed as 8 big-endian bytes || label)``, so a child stream
depends only on the parent seed and the label, never on how much of the
parent stream was consumed.
"""
from __future__ import annotations

import hashlib
import random

import numpy as np

from .bits import BitString

SEED_MASK = (1 << 64) - 1


class Rng:
    def __init__(self, seed: int):
        seed = int(seed)
        if not 0 <= seed <= SEED_MASK:
            raise ValueError("seed must be a 64-bit unsigned integer")
        self.seed = seed
        self.np = np.random.Generator(np.random.PCG64(seed))
        self._py = random.Random(seed)

    def __repr__(self):
        return f"Rng(seed={self.seed})"

    def fork(self, label: "bytes | str") -> Rng:
        if isinstance(label, str):
            label = label.encode()
        digest = hashlib.sha256(self.seed.to_bytes(8, "big") + bytes(label)).digest()
        return Rng(int.from_bytes(digest[:8], "big"))

    def bit(self) -> int:
        return self._py.getrandbits(1)

    def getrandbits(self, n: int) -> int:
        return self._py.getrandbits(n) if n > 0 else 0

    def bits(self, n: int) -> BitString:
        return BitString.from_int(self._py.getrandbits(n), n)

    def below(self, n: int) -> int:
        """Uniform integer in ``[0, n)``."""
        return self._py.randrange(n)

    def random(self) -> float:
        return self._py.random()

    def bytes(self, n: int) -> bytes:
        return self._py.getrandbits(8 * n).to_bytes(n, "big")


def rng_fork(parent: Rng, label: "bytes | str") -> Rng:
    return parent.fork(label)
