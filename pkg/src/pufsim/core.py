"""Device interface, challenge sets and the PUF definition checker.

A simulated device implements only the physical read-out step: ``evaluate``
maps a challenge to a raw secret.  Error correction and the cryptographic
response live in :mod:`pufsim.extractor`.

Hidden device state is reachable only through the ``god_mode_*`` methods.
Those exist for tests and for scoring attacks; each call is counted in
``god_mode_accesses`` so tests can check that attack code stays on the
public side of the boundary.
"""
from __future__ import annotations

import copy
import enum
import itertools
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .bits import BitString
from .errors import ChallengeNotForeseen, LengthMismatch, SampleTooSmall
from .rng import Rng

DEFAULT_DEFINITION1_SAMPLES = 64


class Majority(enum.Enum):
    MORE_ONES = "MoreOnes"
    MORE_ZEROS_OR_EQUAL = "MoreZerosOrEqual"


def popcount_majority(c: BitString) -> Majority:
    ones = c.popcount()
    return Majority.MORE_ONES if ones > len(c) - ones else Majority.MORE_ZEROS_OR_EQUAL


# ---------------------------------------------------------------- challenge sets

class ChallengeSet(ABC):
    """Descriptor of the foreseen challenges of a device."""

    length: int

    @abstractmethod
    def __contains__(self, c: BitString) -> bool: ...

    @property
    @abstractmethod
    def size(self) -> int: ...

    @abstractmethod
    def sample(self, rng: Rng) -> BitString:
        """One uniformly drawn member."""

    def sample_distinct(self, rng: Rng, n: int) -> list[BitString]:
        if n > self.size:
            raise SampleTooSmall(f"cannot draw {n} distinct challenges from a set of {self.size}")
        seen: dict[BitString, None] = {}
        while len(seen) < n:
            seen.setdefault(self.sample(rng))
        return list(seen)


class AllStrings(ChallengeSet):
    def __init__(self, length: int):
        self.length = length

    def __contains__(self, c) -> bool:
        return isinstance(c, BitString) and len(c) == self.length

    @property
    def size(self) -> int:
        return 1 << self.length

    def sample(self, rng: Rng) -> BitString:
        return rng.bits(self.length)

    def __iter__(self):
        for v in range(self.size):
            yield BitString.from_int(v, self.length)

    def __repr__(self):
        return f"AllStrings({self.length})"


class ExplicitChallengeSet(ChallengeSet):
    def __init__(self, challenges: Iterable[BitString]):
        self._items = list(dict.fromkeys(challenges))
        if not self._items:
            raise ValueError("empty challenge set")
        lengths = {len(c) for c in self._items}
        if len(lengths) != 1:
            raise LengthMismatch("challenges of mixed length")
        self.length = lengths.pop()
        self._members = set(self._items)

    def __contains__(self, c) -> bool:
        return c in self._members

    @property
    def size(self) -> int:
        return len(self._items)

    def sample(self, rng: Rng) -> BitString:
        return self._items[rng.below(len(self._items))]

    def sample_distinct(self, rng: Rng, n: int) -> list[BitString]:
        if n > self.size:
            raise SampleTooSmall(f"cannot draw {n} distinct challenges from a set of {self.size}")
        idx = rng.np.choice(self.size, size=n, replace=False)
        return [self._items[i] for i in idx]

    def __iter__(self):
        return iter(self._items)

    def __repr__(self):
        return f"ExplicitChallengeSet(<{self.size} x {self.length} bits>)"


class PredicateChallengeSet(ChallengeSet):
    """Length-``length`` strings accepted by ``predicate``; sampled by rejection."""

    def __init__(self, length: int, predicate: Callable[[BitString], bool], size: int | None = None):
        self.length = length
        self.predicate = predicate
        self._size = size

    def __contains__(self, c) -> bool:
        return isinstance(c, BitString) and len(c) == self.length and bool(self.predicate(c))

    @property
    def size(self) -> int:
        if self._size is None:
            self._size = sum(1 for c in AllStrings(self.length) if self.predicate(c))
        return self._size

    def sample(self, rng: Rng) -> BitString:
        while True:
            c = rng.bits(self.length)
            if self.predicate(c):
                return c


# ---------------------------------------------------------------- devices

class PufDevice(ABC):
    """A simulated physical function exposing the raw read-out step.

    Subclasses set ``family_id``, ``challenge_length``,
    ``raw_secret_length`` and ``foreseen`` and implement ``_read`` and
    ``_reference``.
    """

    family_id: str = "abstract"
    mechanism: str = "none"
    challenge_length: int
    raw_secret_length: int
    foreseen: ChallengeSet
    # structural attestation for the "challenges not contained in the PUF" requirement
    challenges_stored_externally: bool = True

    evaluations: int = 0
    god_mode_accesses: int = 0

    def evaluate(self, c: BitString) -> BitString:
        self.evaluations += 1
        return self._read(c)

    @abstractmethod
    def _read(self, c: BitString) -> BitString: ...

    @abstractmethod
    def _reference(self, c: BitString) -> BitString:
        """Noise-free raw secret for ``c`` without disturbing the device."""

    def god_mode_snapshot(self) -> PufDevice:
        self.god_mode_accesses += 1
        twin = self._clone()
        twin.evaluations = 0
        twin.god_mode_accesses = 0
        return twin

    def _clone(self) -> PufDevice:
        return copy.deepcopy(self)

    def god_mode_reference(self, c: BitString) -> BitString:
        self.god_mode_accesses += 1
        return self._reference(c)

    def structure(self) -> dict:
        """Public structural parameters (no instance secrets)."""
        return {"family": self.family_id, "l": self.challenge_length,
                "l_r": self.raw_secret_length}

    def declared_entropy(self) -> float | None:
        """Entropy in bits of all challenge/secret pairs; None if structured."""
        return None

    def describe(self) -> dict:
        return {"pf1": "unspecified", "pf2": "unspecified"}

    def _check_length(self, c: BitString, n: int | None = None):
        n = self.challenge_length if n is None else n
        if len(c) != n:
            raise LengthMismatch(f"challenge has {len(c)} bits, device expects {n}")


# ---------------------------------------------------------------- PUF definition check

@dataclass
class Definition1Verdict:
    deterministic_on_M: bool
    non_constant: bool
    witness_pair: tuple[BitString, BitString] | None = None
    nondeterministic_witness: BitString | None = None
    samples: int = 0
    repeats: int = 0

    @property
    def is_puf(self) -> bool:
        return self.deterministic_on_M and self.non_constant

    def to_dict(self) -> dict:
        return {
            "deterministic_on_M": self.deterministic_on_M,
            "non_constant": self.non_constant,
            "is_puf": self.is_puf,
            "witness_pair": [str(c) for c in self.witness_pair] if self.witness_pair else None,
            "samples": self.samples,
            "repeats": self.repeats,
        }


def check_definition1(device: PufDevice, sample: Sequence[BitString] | None = None,
                      repeats: int = 3, *, rng: Rng | None = None,
                      n_samples: int = DEFAULT_DEFINITION1_SAMPLES,
                      pf2: Callable[[BitString], BitString] | None = None) -> Definition1Verdict:
    """Sampled check that ``pf2(evaluate(.))`` is deterministic and non-constant.

    Each sampled challenge is evaluated ``repeats`` times on its own
    god-mode snapshot, so the device itself is never consumed.  If no
    ``sample`` is given, ``n_samples`` distinct challenges are drawn from
    the device's foreseen set using ``rng``.
    """
    if repeats < 2:
        raise ValueError("repeats must be >= 2")
    if sample is None:
        if rng is None:
            raise ValueError("either sample or rng is required")
        sample = device.foreseen.sample_distinct(rng, min(n_samples, device.foreseen.size))
    sample = list(sample)
    if len(sample) < 2:
        raise SampleTooSmall("the PUF definition check needs at least two challenges")
    for c in sample:
        if c not in device.foreseen:
            raise ChallengeNotForeseen(f"{c!r} is not a foreseen challenge")
    post = pf2 if pf2 is not None else (lambda s: s)

    deterministic = True
    bad = None
    first_secret: dict[BitString, BitString] = {}
    for c in sample:
        twin = device.god_mode_snapshot()
        outs = [post(twin.evaluate(c)) for _ in range(repeats)]
        if any(o != outs[0] for o in outs[1:]):
            deterministic = False
            bad = bad or c
        first_secret.setdefault(c, outs[0])

    witness = None
    for a, b in itertools.combinations(first_secret, 2):
        if first_secret[a] != first_secret[b]:
            witness = (a, b)
            break
    return Definition1Verdict(deterministic, witness is not None, witness, bad,
                              len(sample), repeats)
