"""Immutable fixed-length bit strings.

Bits are stored in a Python ``int`` with the first bit as the most
significant one, so ``BitString("1000").value == 8``.  Byte and hex
encodings are MSB-first with the final byte zero-padded on the right.
"""
from __future__ import annotations

from typing import Iterable

import numpy as np

from .errors import LengthMismatch

__all__ = ["BitString", "hamming_distance"]


class BitString:
    __slots__ = ("_value", "_length")

    def __init__(self, bits: "str | Iterable[int] | BitString"):
        if isinstance(bits, BitString):
            value, length = bits._value, bits._length
        elif isinstance(bits, str):
            if not bits or any(ch not in "01" for ch in bits):
                raise ValueError(f"not a non-empty binary string: {bits!r}")
            value, length = int(bits, 2), len(bits)
        else:
            value, length = 0, 0
            for b in bits:
                b = int(b)
                if b not in (0, 1):
                    raise ValueError(f"bit values must be 0 or 1, got {b}")
                value = (value << 1) | b
                length += 1
            if length == 0:
                raise ValueError("a BitString needs at least one bit")
        self._value = value
        self._length = length

    @classmethod
    def from_int(cls, value: int, length: int) -> BitString:
        if length < 1:
            raise ValueError("length must be >= 1")
        if value < 0 or value >> length:
            raise ValueError(f"{value} does not fit in {length} bits")
        out = cls.__new__(cls)
        out._value = value
        out._length = length
        return out

    @classmethod
    def zeros(cls, length: int) -> BitString:
        return cls.from_int(0, length)

    @classmethod
    def ones(cls, length: int) -> BitString:
        return cls.from_int((1 << length) - 1, length)

    @classmethod
    def from_bytes(cls, data: bytes, length: int) -> BitString:
        """Decode ``length`` bits from MSB-first, right-padded bytes."""
        nbytes = (length + 7) // 8
        if len(data) != nbytes:
            raise LengthMismatch(f"{length} bits need {nbytes} bytes, got {len(data)}")
        pad = nbytes * 8 - length
        raw = int.from_bytes(data, "big")
        if raw & ((1 << pad) - 1):
            raise ValueError("non-zero padding bits")
        return cls.from_int(raw >> pad, length)

    @classmethod
    def from_hex(cls, text: str, length: int) -> BitString:
        return cls.from_bytes(bytes.fromhex(text), length)

    @classmethod
    def from_array(cls, arr) -> BitString:
        return cls(np.asarray(arr, dtype=np.int64).tolist())

    @property
    def value(self) -> int:
        return self._value

    def __len__(self) -> int:
        return self._length

    def __getitem__(self, idx):
        if isinstance(idx, slice):
            return BitString(self.to_list()[idx])
        n = self._length
        if idx < 0:
            idx += n
        if not 0 <= idx < n:
            raise IndexError("bit index out of range")
        return (self._value >> (n - 1 - idx)) & 1

    def __iter__(self):
        n = self._length
        v = self._value
        for i in range(n - 1, -1, -1):
            yield (v >> i) & 1

    def __eq__(self, other) -> bool:
        if not isinstance(other, BitString):
            return NotImplemented
        return self._length == other._length and self._value == other._value

    def __hash__(self) -> int:
        return hash((self._length, self._value))

    def __add__(self, other: BitString) -> BitString:
        """Concatenation."""
        return BitString.from_int((self._value << other._length) | other._value,
                                  self._length + other._length)

    def __xor__(self, other: BitString) -> BitString:
        if self._length != other._length:
            raise LengthMismatch("XOR of bit strings with different lengths")
        return BitString.from_int(self._value ^ other._value, self._length)

    def __str__(self) -> str:
        return format(self._value, f"0{self._length}b")

    def __repr__(self) -> str:
        s = str(self)
        if len(s) > 40:
            s = s[:37] + "..."
        return f"BitString('{s}')" if self._length <= 40 else f"BitString<{self._length}:{s}>"

    def popcount(self) -> int:
        return bin(self._value).count("1")

    def flip(self, idx: int) -> BitString:
        return BitString.from_int(self._value ^ (1 << (self._length - 1 - idx)), self._length)

    def to_list(self) -> list[int]:
        return list(self)

    def to_array(self) -> np.ndarray:
        return np.fromiter(self, dtype=np.uint8, count=self._length)

    def to_bytes(self) -> bytes:
        nbytes = (self._length + 7) // 8
        pad = nbytes * 8 - self._length
        return (self._value << pad).to_bytes(nbytes, "big")

    def to_hex(self) -> str:
        return self.to_bytes().hex()


def hamming_distance(a: BitString, b: BitString) -> int:
    return (a ^ b).popcount()
