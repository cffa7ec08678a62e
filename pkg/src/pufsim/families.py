"""Simulated PUF families (the physical read-out step).

* :class:`ToyMajorityPuf` - two fixed outputs selected by the challenge majority.
* :class:`TableMrtPuf` - a random lookup table; the minimum-read-out-time construction.
* :class:`ArbiterPuf` - parallel arbiters under the additive delay model.
* :class:`KeyedHashPuf` - an algorithmic stand-in built from HMAC; clonable by whoever holds the key.
* :class:`QuantumEurPuf` - registers of conjugate-basis qubits that erase on wrong-basis reads.

:class:`ConstantCuf` is a negative fixture: its read-out ignores the challenge.

The arbiter uses the usual parity linearisation of the additive delay
model, ``bit = [w . phi(c) > 0]`` with
``phi_i = prod_{j >= i} (1 - 2 c_j)`` and a trailing constant ``+1``.
"""
from __future__ import annotations

import copy
import hashlib
import hmac
import json
import math
from pathlib import Path

import numpy as np

from .bits import BitString
from .core import AllStrings, ExplicitChallengeSet, PufDevice, Majority, popcount_majority
from .errors import ChallengeNotForeseen, FamilyFileError, IndexOutOfRange, LengthMismatch
from .rng import Rng

TOY_MORE_ONES = BitString("1001101101")
TOY_OTHERWISE = BitString("0001101000")


def _array_to_bits(arr: np.ndarray) -> BitString:
    n = arr.shape[0]
    packed = np.packbits(arr.astype(np.uint8))
    pad = len(packed) * 8 - n
    return BitString.from_int(int.from_bytes(packed.tobytes(), "big") >> pad, n)


def _noise_mask(rng: Rng, n: int, p: float) -> int:
    if p <= 0:
        return 0
    return _array_to_bits(rng.np.random(n) < p).value


def _repeat_bits(s: BitString, r: int) -> BitString:
    if r == 1:
        return s
    return _array_to_bits(np.repeat(s.to_array(), r))


# ---------------------------------------------------------------- toy

def toy_eval(c: BitString) -> BitString:
    if popcount_majority(c) is Majority.MORE_ONES:
        return TOY_MORE_ONES
    return TOY_OTHERWISE


class ToyMajorityPuf(PufDevice):
    """Trivially clonable PUF: output depends only on the challenge majority."""

    family_id = "toy"
    mechanism = "MRT"
    challenges_stored_externally = False

    def __init__(self, length: int = 4):
        self.challenge_length = length
        self.raw_secret_length = 10
        self.foreseen = AllStrings(length)

    def _read(self, c):
        self._check_length(c)
        return toy_eval(c)

    def _reference(self, c):
        return toy_eval(c)

    def describe(self):
        return {"pf1": "two 10-bit constants selected by whether the challenge has more ones than zeros",
                "mechanism": "none (the read-out rule is public and tiny)"}


# ---------------------------------------------------------------- table

class TableMrtPuf(PufDevice):
    """``N`` random challenge/secret pairs.

    With ``repetition`` r > 1 every stored bit is read out r times, so the
    raw secret has ``r * l_S`` bits; ``noise_p`` flips each read bit
    independently.
    """

    family_id = "table"
    mechanism = "MRT"

    def __init__(self, N: int, l: int, l_S: int, seed: int, noise_p: float = 0.0, repetition: int = 1):
        if N < 1 or l < 1 or l_S < 1:
            raise ValueError("N, l and l_S must be >= 1")
        if N > (1 << l):
            raise ValueError(f"cannot place {N} distinct challenges in {l} bits")
        if not 0 <= noise_p < 0.5:
            raise ValueError("noise_p must be in [0, 0.5)")
        self.N, self.l_S, self.seed = N, l_S, seed
        self.noise_p, self.repetition = float(noise_p), int(repetition)
        self.challenge_length = l
        self.raw_secret_length = self.repetition * l_S
        rng = Rng(seed)
        challenges = AllStrings(l).sample_distinct(rng.fork("challenges"), N)
        srng = rng.fork("secrets")
        self._table = {c: srng.bits(l_S) for c in challenges}
        self.foreseen = ExplicitChallengeSet(challenges)
        self._noise = rng.fork("noise")

    def _read(self, c):
        try:
            s = self._table[c]
        except KeyError:
            raise ChallengeNotForeseen(f"{c!r} is not in the table") from None
        raw = _repeat_bits(s, self.repetition)
        if self.noise_p:
            raw = BitString.from_int(raw.value ^ _noise_mask(self._noise, len(raw), self.noise_p), len(raw))
        return raw

    def _reference(self, c):
        return _repeat_bits(self._table[c], self.repetition)

    def _clone(self):
        # the table itself is never mutated; only the noise stream needs its own copy
        twin = copy.copy(self)
        twin._noise = copy.deepcopy(self._noise)
        return twin

    def god_mode_table(self) -> dict[BitString, BitString]:
        self.god_mode_accesses += 1
        return dict(self._table)

    def structure(self):
        return {"family": self.family_id, "N": self.N, "l": self.challenge_length, "l_S": self.l_S,
                "noise_p": self.noise_p, "r": self.repetition}

    def declared_entropy(self):
        # uniform, independent challenges and secrets
        return float(self.N * (self.challenge_length + self.l_S))

    def describe(self):
        return {"pf1": f"lookup of one of N={self.N} stored random {self.l_S}-bit secrets",
                "mechanism": "minimum read-out time: N pairs cannot all be read during access"}


# ---------------------------------------------------------------- arbiter

def arbiter_feature(c: BitString) -> np.ndarray:
    """Parity feature vector of length ``k + 1`` with entries in {-1, +1}."""
    return arbiter_features(c.to_array()[None, :])[0]


def arbiter_features(challenges: np.ndarray) -> np.ndarray:
    """Row-wise :func:`arbiter_feature` for an ``(n, k)`` 0/1 array."""
    challenges = np.atleast_2d(np.asarray(challenges))
    signs = 1 - 2 * challenges.astype(np.int8)
    phi = np.cumprod(signs[:, ::-1], axis=1)[:, ::-1]
    return np.hstack([phi, np.ones((phi.shape[0], 1), dtype=phi.dtype)]).astype(np.float64)


class ArbiterPuf(PufDevice):
    """``l_S`` parallel ``k``-stage arbiters with standard-normal weights."""

    family_id = "arbiter"
    mechanism = "MRT"

    def __init__(self, k: int, l_S: int = 1, seed: int = 0, noise_p: float = 0.0,
                 repetition: int = 1, weights: np.ndarray | None = None):
        if not 0 <= noise_p < 0.5:
            raise ValueError("noise_p must be in [0, 0.5)")
        self.k, self.l_S, self.seed = k, l_S, seed
        self.noise_p, self.repetition = float(noise_p), int(repetition)
        rng = Rng(seed)
        if weights is None:
            weights = rng.fork("weights").np.standard_normal((l_S, k + 1))
        weights = np.atleast_2d(np.asarray(weights, dtype=np.float64))
        if weights.shape != (l_S, k + 1):
            raise LengthMismatch(f"weights must have shape {(l_S, k + 1)}, got {weights.shape}")
        self._weights = weights
        self.challenge_length = k
        self.raw_secret_length = self.repetition * l_S
        self.foreseen = AllStrings(k)
        self._noise = rng.fork("noise")

    def _clean(self, c: BitString) -> np.ndarray:
        self._check_length(c)
        return self._weights @ arbiter_feature(c) > 0

    def _read(self, c):
        raw = _array_to_bits(np.repeat(self._clean(c), self.repetition))
        if self.noise_p:
            raw = BitString.from_int(raw.value ^ _noise_mask(self._noise, len(raw), self.noise_p), len(raw))
        return raw

    def _reference(self, c):
        return _array_to_bits(np.repeat(self._clean(c), self.repetition))

    def evaluate_batch(self, challenges: np.ndarray) -> np.ndarray:
        """Noise-free responses for an ``(n, k)`` array; returns ``(n, l_S)`` 0/1.

        Counts as ``n`` evaluations.
        """
        challenges = np.atleast_2d(challenges)
        self.evaluations += challenges.shape[0]
        return (arbiter_features(challenges) @ self._weights.T > 0).astype(np.uint8)

    def god_mode_weights(self) -> np.ndarray:
        self.god_mode_accesses += 1
        return self._weights.copy()

    def structure(self):
        return {"family": self.family_id, "k": self.k, "l": self.k, "l_S": self.l_S,
                "noise_p": self.noise_p, "r": self.repetition,
                "weight_distribution": "standard_normal"}

    def describe(self):
        return {"pf1": f"sign of accumulated delay difference over {self.k} switch stages, "
                       f"{self.l_S} parallel arbiter(s)",
                "mechanism": "minimum read-out time (structured: linear in the parity features)"}


# ---------------------------------------------------------------- keyed hash

class KeyedHashPuf(PufDevice):
    """HMAC-SHA-256 of the challenge under a 128-bit key, truncated to ``l_S`` bits.

    Longer outputs chain blocks ``HMAC(key, c || counter)``.
    """

    family_id = "keyed_hash"
    mechanism = "MRT"
    challenges_stored_externally = True

    def __init__(self, l: int, l_S: int, key: bytes | None = None, seed: int | None = None):
        if key is None:
            if seed is None:
                raise ValueError("need a key or a seed")
            key = Rng(seed).fork("key").bytes(16)
        if len(key) != 16:
            raise ValueError("key must be 16 bytes")
        self.seed = seed
        self._key = bytes(key)
        self.l_S = l_S
        self.challenge_length = l
        self.raw_secret_length = l_S
        self.foreseen = AllStrings(l)

    def _read(self, c):
        self._check_length(c)
        return keyed_hash_eval(self._key, c, self.l_S)

    def _reference(self, c):
        return keyed_hash_eval(self._key, c, self.l_S)

    def god_mode_key(self) -> bytes:
        self.god_mode_accesses += 1
        return self._key

    def structure(self):
        return {"family": self.family_id, "l": self.challenge_length, "l_S": self.l_S}

    def describe(self):
        return {"pf1": "keyed hash of the challenge (algorithmic simulation)",
                "mechanism": "none physical; anyone holding the key clones it"}


def keyed_hash_eval(key: bytes, c: BitString, l_S: int) -> BitString:
    msg = c.to_bytes()
    if l_S <= 256:
        digest = hmac.new(key, msg, hashlib.sha256).digest()
    else:
        blocks = (l_S + 255) // 256
        digest = b"".join(hmac.new(key, msg + i.to_bytes(4, "big"), hashlib.sha256).digest()
                          for i in range(blocks))
    full = int.from_bytes(digest, "big")
    return BitString.from_int(full >> (len(digest) * 8 - l_S), l_S)


# ---------------------------------------------------------------- constant CUF

class ConstantCuf(PufDevice):
    """Conventional unclonable function: one protected secret regardless of challenge."""

    family_id = "cuf"
    mechanism = "none"

    def __init__(self, l: int, l_S: int, seed: int = 0):
        self.challenge_length = l
        self.raw_secret_length = l_S
        self.l_S = l_S
        self.seed = seed
        self._secret = Rng(seed).fork("secret").bits(l_S)
        self.foreseen = AllStrings(l)

    def _read(self, c):
        self._check_length(c)
        return self._secret

    def _reference(self, c):
        return self._secret

    def structure(self):
        return {"family": self.family_id, "l": self.challenge_length, "l_S": self.l_S}


# ---------------------------------------------------------------- quantum

class QubitRegister:
    """``l`` qubits, each a (basis, value) pair with collapse on measurement.

    Measuring a cell in its current basis returns its value unchanged.
    Measuring in the other basis returns a uniform bit and the cell becomes
    (measured basis, returned bit), so a repeat in that same basis repeats
    the bit and a return to the original basis is again uniform.
    """

    __slots__ = ("length", "_bases", "_values", "prepared_bases", "_prepared_secret", "_measured")

    def __init__(self, s_r: BitString, bases: BitString):
        if len(s_r) != len(bases):
            raise LengthMismatch("secret and bases must have equal length")
        self.length = len(s_r)
        self._bases = bases.value
        self._values = s_r.value
        self.prepared_bases = bases
        self._prepared_secret = s_r
        self._measured = 0

    @property
    def cells(self) -> list[tuple[int, int]]:
        n = self.length
        return [((self._bases >> (n - 1 - i)) & 1, (self._values >> (n - 1 - i)) & 1) for i in range(n)]

    @property
    def measured(self) -> list[bool]:
        n = self.length
        return [bool((self._measured >> (n - 1 - i)) & 1) for i in range(n)]

    @property
    def current_bases(self) -> BitString:
        return BitString.from_int(self._bases, self.length)

    @property
    def current_values(self) -> BitString:
        return BitString.from_int(self._values, self.length)

    def measure(self, m: BitString, rng: Rng) -> BitString:
        if len(m) != self.length:
            raise LengthMismatch(f"basis string has {len(m)} bits, register has {self.length}")
        wrong = self._bases ^ m.value
        if wrong:
            fresh = rng.getrandbits(self.length) & wrong
            self._values = (self._values & ~wrong) | fresh
            self._bases = m.value
        self._measured = (1 << self.length) - 1
        return BitString.from_int(self._values, self.length)

    def __eq__(self, other):
        if not isinstance(other, QubitRegister):
            return NotImplemented
        return (self.length, self._bases, self._values, self.prepared_bases, self._measured) == \
            (other.length, other._bases, other._values, other.prepared_bases, other._measured)

    def __repr__(self):
        return f"QubitRegister(cells={self.cells})"


def quantum_prepare(s_r: BitString, bases: BitString, rng: Rng | None = None) -> QubitRegister:
    # preparation is deterministic; rng kept for interface symmetry with measurement
    return QubitRegister(s_r, bases)


def quantum_measure(reg: QubitRegister, m: BitString, rng: Rng) -> BitString:
    return reg.measure(m, rng)


class QuantumEurPuf(PufDevice):
    """Erasure-upon-read-out device holding ``N`` qubit registers.

    A challenge is ``index || bases`` with ``index_bits = ceil(log2 N)``
    (zero when N = 1).  Only ``i || prepared_bases(i)`` is foreseen.
    """

    family_id = "quantum"
    mechanism = "EUR"

    def __init__(self, registers: list[QubitRegister], rng: Rng):
        if not registers:
            raise ValueError("need at least one register")
        lengths = {r.length for r in registers}
        if len(lengths) != 1:
            raise LengthMismatch("registers must share one length")
        self.registers = registers
        self.N = len(registers)
        self.l = lengths.pop()
        self.index_bits = math.ceil(math.log2(self.N)) if self.N > 1 else 0
        self.challenge_length = self.index_bits + self.l
        self.raw_secret_length = self.l
        self.seed = None
        self._rng = rng
        self.foreseen = ExplicitChallengeSet(self.challenge_for(i, r.prepared_bases)
                                             for i, r in enumerate(registers))

    @classmethod
    def random(cls, l: int, N: int, rng: Rng) -> QuantumEurPuf:
        """Uniform secrets and bases drawn from ``rng``, which also drives measurement."""
        regs = [QubitRegister(rng.bits(l), rng.bits(l)) for _ in range(N)]
        return cls(regs, rng)

    @classmethod
    def from_seed(cls, seed: int, N: int, l: int) -> QuantumEurPuf:
        rng = Rng(seed)
        srng, brng = rng.fork("secrets"), rng.fork("bases")
        regs = [QubitRegister(srng.bits(l), brng.bits(l)) for _ in range(N)]
        dev = cls(regs, rng.fork("measure"))
        dev.seed = seed
        return dev

    def challenge_for(self, index: int, bases: BitString) -> BitString:
        if self.index_bits == 0:
            return bases
        return BitString.from_int(index, self.index_bits) + bases

    def split(self, c: BitString) -> tuple[int, BitString]:
        self._check_length(c)
        i = c.value >> self.l
        if i >= self.N:
            raise IndexOutOfRange(f"register index {i} >= {self.N}")
        return i, BitString.from_int(c.value & ((1 << self.l) - 1), self.l)

    def _read(self, c):
        i, m = self.split(c)
        return self.registers[i].measure(m, self._rng)

    def _reference(self, c):
        i, _ = self.split(c)
        return self.registers[i]._prepared_secret

    def god_mode_register(self, i: int) -> tuple[BitString, BitString]:
        """(prepared secret, prepared bases) of register ``i``."""
        self.god_mode_accesses += 1
        reg = self.registers[i]
        return reg._prepared_secret, reg.prepared_bases

    def structure(self):
        return {"family": self.family_id, "N": self.N, "l": self.l, "l_S": self.l,
                "index_bits": self.index_bits}

    def declared_entropy(self):
        return float(2 * self.N * self.l)

    def describe(self):
        return {"pf1": f"measurement of {self.l} qubits in the bases named by the challenge",
                "mechanism": "erasure upon read-out: a wrong basis randomises the qubit"}


def quantum_eval(p: QuantumEurPuf, c: BitString) -> BitString:
    return p.evaluate(c)


def table_eval(p: TableMrtPuf, c: BitString) -> BitString:
    return p.evaluate(c)


def arbiter_eval(p: ArbiterPuf, c: BitString) -> BitString:
    return p.evaluate(c)


# ---------------------------------------------------------------- parameter files

FAMILY_FIELDS = {"family", "seed", "N", "l", "l_S", "k", "noise_p", "index_bits", "r"}
_REQUIRED = {
    "toy": {"l"},
    "table": {"seed", "N", "l", "l_S"},
    "arbiter": {"seed", "k"},
    "keyed_hash": {"seed", "l", "l_S"},
    "quantum": {"seed", "N", "l"},
    "cuf": {"seed", "l", "l_S"},
}


def device_from_params(params: dict) -> PufDevice:
    """Build a device from a family parameter document; unknown fields are rejected."""
    unknown = set(params) - FAMILY_FIELDS
    if unknown:
        raise FamilyFileError(f"unknown field(s): {sorted(unknown)}")
    fam = params.get("family")
    if fam not in _REQUIRED:
        raise FamilyFileError(f"unknown family {fam!r}; expected one of {sorted(_REQUIRED)}")
    missing = {f for f in _REQUIRED[fam] if params.get(f) is None}
    if missing:
        raise FamilyFileError(f"family {fam} needs field(s) {sorted(missing)}")
    g = params.get
    noise_p = g("noise_p") or 0.0
    r = g("r") or 1
    if fam == "toy":
        return ToyMajorityPuf(g("l"))
    if fam == "table":
        return TableMrtPuf(g("N"), g("l"), g("l_S"), g("seed"), noise_p, r)
    if fam == "arbiter":
        if g("l") is not None and g("l") != g("k"):
            raise FamilyFileError("arbiter challenge length l must equal k")
        return ArbiterPuf(g("k"), g("l_S") or 1, g("seed"), noise_p, r)
    if noise_p or r != 1:
        raise FamilyFileError("noise_p and r are only available for table and arbiter families")
    if fam == "keyed_hash":
        return KeyedHashPuf(g("l"), g("l_S"), seed=g("seed"))
    if fam == "quantum":
        dev = QuantumEurPuf.from_seed(g("seed"), g("N"), g("l"))
        if g("index_bits") is not None and g("index_bits") != dev.index_bits:
            raise FamilyFileError(f"index_bits must be {dev.index_bits} for N={dev.N}")
        return dev
    return ConstantCuf(g("l"), g("l_S"), g("seed"))


def device_params(device: PufDevice) -> dict:
    """Parameter document that regenerates ``device`` (inverse of :func:`device_from_params`)."""
    fam = device.family_id
    out = {"family": fam, "seed": getattr(device, "seed", None)}
    if fam == "toy":
        out.update(l=device.challenge_length)
    elif fam == "table":
        out.update(N=device.N, l=device.challenge_length, l_S=device.l_S,
                   noise_p=device.noise_p, r=device.repetition)
    elif fam == "arbiter":
        out.update(k=device.k, l=device.k, l_S=device.l_S, noise_p=device.noise_p, r=device.repetition)
    elif fam in ("keyed_hash", "cuf"):
        out.update(l=device.challenge_length, l_S=device.l_S)
    elif fam == "quantum":
        out.update(N=device.N, l=device.l, l_S=device.l, index_bits=device.index_bits)
    if out["seed"] is None and fam != "toy":
        raise FamilyFileError("device was not built from a seed and cannot be serialised")
    if fam == "quantum":
        out.pop("l_S")
    return out


def load_family(path: "str | Path") -> PufDevice:
    try:
        params = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FamilyFileError(f"{path}: {exc}") from exc
    if not isinstance(params, dict):
        raise FamilyFileError(f"{path}: expected a JSON object")
    return device_from_params(params)


def save_family(device: PufDevice, path: "str | Path") -> None:
    Path(path).write_text(json.dumps(device_params(device), indent=2, sort_keys=True) + "\n")
