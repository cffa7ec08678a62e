"""Secret extraction and keyed response.

``pf2_correct`` decodes a repetition code by per-group majority,
``pf2_amplify`` compresses with ``SHA-256(salt || s)`` truncated to the
requested number of bits, and ``pf3_respond`` is ``HMAC-SHA-256(key=s,
msg=nonce)``.  Bit strings enter the hash functions through
:meth:`BitString.to_bytes` (MSB-first, right zero-padded).
"""
from __future__ import annotations

import hashlib
import hmac
from dataclasses import dataclass

from scipy.stats import binom

from .bits import BitString
from .errors import LengthMismatch, LengthNotDivisible, OutLenTooLarge

DIGEST_BITS = 256
NONCE_BYTES = 16
SALT_BYTES = 16


def pf2_correct(s_raw: BitString, r: int) -> BitString:
    """Majority-decode groups of ``r`` consecutive bits."""
    if r < 1 or r % 2 == 0:
        raise ValueError("repetition factor must be odd and >= 1")
    if len(s_raw) % r:
        raise LengthNotDivisible(f"{len(s_raw)} bits do not split into groups of {r}")
    if r == 1:
        return s_raw
    groups = s_raw.to_array().reshape(-1, r)
    return BitString.from_array(groups.sum(axis=1) > r // 2)


def pf2_amplify(s: BitString, salt: bytes, out_len: int) -> BitString:
    if out_len < 1:
        raise OutLenTooLarge(f"out_len must be >= 1, got {out_len}")
    if out_len > DIGEST_BITS:
        raise OutLenTooLarge(f"out_len {out_len} exceeds the {DIGEST_BITS}-bit digest")
    digest = hashlib.sha256(bytes(salt) + s.to_bytes()).digest()
    return BitString.from_int(int.from_bytes(digest, "big") >> (DIGEST_BITS - out_len), out_len)


def pf3_respond(s: BitString, nonce: bytes) -> BitString:
    if len(nonce) != NONCE_BYTES:
        raise LengthMismatch(f"nonce must be {NONCE_BYTES} bytes")
    mac = hmac.new(s.to_bytes(), bytes(nonce), hashlib.sha256).digest()
    return BitString.from_bytes(mac, DIGEST_BITS)


@dataclass(frozen=True)
class ExtractorParams:
    """Repetition factor, optional amplification length and public salt.

    ``out_len=None`` skips amplification, so ``S`` is the decoded block.
    """

    r: int = 1
    out_len: int | None = None
    salt: bytes = bytes(SALT_BYTES)

    def __post_init__(self):
        if self.r < 1 or self.r % 2 == 0:
            raise ValueError("repetition factor must be odd and >= 1")
        if len(self.salt) != SALT_BYTES:
            raise ValueError(f"salt must be {SALT_BYTES} bytes")
        if self.out_len is not None and not 1 <= self.out_len <= DIGEST_BITS:
            raise OutLenTooLarge(f"out_len must be in [1, {DIGEST_BITS}]")

    def __call__(self, s_raw: BitString) -> BitString:
        s = pf2_correct(s_raw, self.r)
        if self.out_len is not None:
            s = pf2_amplify(s, self.salt, self.out_len)
        return s

    def describe(self) -> str:
        parts = ["majority decoding of a %d-fold repetition code" % self.r if self.r > 1
                 else "identity (no error correction)"]
        if self.out_len is not None:
            parts.append(f"SHA-256(salt || s) truncated to {self.out_len} bits")
        return "; ".join(parts)

    def to_dict(self) -> dict:
        return {"r": self.r, "out_len": self.out_len, "salt": self.salt.hex()}


IDENTITY = ExtractorParams()


def majority_failure_probability(p: float, r: int) -> float:
    """Probability that more than ``r // 2`` of ``r`` independent reads flip."""
    return float(binom.sf(r // 2, r, p))


def block_recovery_probability(p: float, r: int, blocks: int) -> float:
    return float((1.0 - majority_failure_probability(p, r)) ** blocks)


__all__ = ["pf2_correct", "pf2_amplify", "pf3_respond", "ExtractorParams", "IDENTITY",
           "majority_failure_probability", "block_recovery_probability"]
