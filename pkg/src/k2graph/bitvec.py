"""Packed bit vectors with rank support.

Bits are packed LSB-first within each byte, bytes in ascending position
order.  Three flavours are provided:

* :class:`BitVector` - a plain immutable packed sequence,
* :class:`RankBitVector` - immutable, with a two-level rank directory,
* :class:`ClearableBitVector` - mutable, but only 1 -> 0 transitions.
"""
from __future__ import annotations

import struct
from typing import Iterable

import numpy as np

SUPERBLOCK_BITS = 512
BLOCK_BITS = 64
_WORDS_PER_SUPERBLOCK = SUPERBLOCK_BITS // BLOCK_BITS

_LEN = struct.Struct("<Q")


class BitVectorFormatError(ValueError):
    """Raised when a serialized bit vector cannot be decoded."""


def _nbytes(length: int) -> int:
    return (length + 7) >> 3


def _canonical_bytes(data: np.ndarray, length: int) -> np.ndarray:
    data = np.ascontiguousarray(data, dtype=np.uint8)
    if len(data) != _nbytes(length):
        raise ValueError(f"expected {_nbytes(length)} bytes for {length} bits, got {len(data)}")
    if length & 7:
        data = data.copy()
        data[-1] &= (1 << (length & 7)) - 1
    return data


class BitVector:
    """Immutable packed bit sequence."""

    __slots__ = ("_bytes", "_len")

    def __init__(self, data: np.ndarray | bytes, length: int):
        if isinstance(data, (bytes, bytearray, memoryview)):
            data = np.frombuffer(bytes(data), dtype=np.uint8)
        self._bytes = _canonical_bytes(data, length)
        self._len = int(length)

    @classmethod
    def from_bools(cls, bits: Iterable[bool] | np.ndarray) -> "BitVector":
        arr = np.asarray(bits, dtype=bool).ravel()
        return cls(np.packbits(arr, bitorder="little"), len(arr))

    @classmethod
    def from_string(cls, text: str) -> "BitVector":
        """Build from a string of '0'/'1' characters; spaces are ignored."""
        text = text.replace(" ", "")
        if set(text) - {"0", "1"}:
            raise ValueError(f"not a bit string: {text!r}")
        return cls.from_bools([c == "1" for c in text])

    def __len__(self) -> int:
        return self._len

    @property
    def packed(self) -> np.ndarray:
        return self._bytes

    def access(self, i: int) -> int:
        if not 0 <= i < self._len:
            raise IndexError(f"bit index {i} out of range [0, {self._len})")
        return (self._bytes.item(i >> 3) >> (i & 7)) & 1

    __getitem__ = access

    def access_many(self, positions: np.ndarray) -> np.ndarray:
        """Vectorised access; positions are not range-checked."""
        positions = np.asarray(positions, dtype=np.int64)
        return ((self._bytes[positions >> 3] >> (positions & 7).astype(np.uint8)) & 1).astype(bool)

    def to_bools(self) -> np.ndarray:
        return np.unpackbits(self._bytes, count=self._len, bitorder="little").astype(bool)

    def popcount(self) -> int:
        return int(np.bitwise_count(self._bytes).sum())

    def to_string(self) -> str:
        return "".join("1" if b else "0" for b in self.to_bools())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BitVector):
            return NotImplemented
        return self._len == other._len and np.array_equal(self._bytes, other._bytes)

    def __repr__(self) -> str:
        if self._len <= 64:
            return f"{type(self).__name__}({self.to_string()!r})"
        return f"{type(self).__name__}(len={self._len})"

    def serialize(self) -> bytes:
        return _LEN.pack(self._len) + self._bytes.tobytes()

    @classmethod
    def deserialize(cls, buf: bytes, offset: int = 0) -> tuple["BitVector", int]:
        """Decode a vector at ``offset``; returns it with the offset just past it."""
        if len(buf) - offset < _LEN.size:
            raise BitVectorFormatError("truncated bit vector header")
        (length,) = _LEN.unpack_from(buf, offset)
        offset += _LEN.size
        nbytes = _nbytes(length)
        if len(buf) - offset < nbytes:
            raise BitVectorFormatError("truncated bit vector payload")
        data = np.frombuffer(buf, dtype=np.uint8, count=nbytes, offset=offset)
        if length & 7 and data[-1] >> (length & 7):
            raise BitVectorFormatError("non-zero padding bits")
        return cls(data, length), offset + nbytes


class RankBitVector(BitVector):
    """Immutable bit vector answering ``rank1`` in constant time.

    The directory stores a cumulative 64-bit count per 512-bit superblock
    and a 16-bit count per 64-bit block, relative to its superblock.
    """

    __slots__ = ("_words", "_super", "_block")

    def __init__(self, data: np.ndarray | bytes, length: int):
        super().__init__(data, length)
        nwords = length // BLOCK_BITS + 1
        padded = np.zeros(nwords * 8, dtype=np.uint8)
        padded[: len(self._bytes)] = self._bytes
        self._bytes = padded[: len(self._bytes)]
        self._words = padded.view("<u8")
        counts = np.bitwise_count(self._words).astype(np.uint64)
        cum = np.zeros(nwords + 1, dtype=np.uint64)
        np.cumsum(counts, out=cum[1:])
        before = cum[:-1]
        self._super = np.ascontiguousarray(before[::_WORDS_PER_SUPERBLOCK])
        sb_of_word = np.arange(nwords) // _WORDS_PER_SUPERBLOCK
        self._block = (before - self._super[sb_of_word]).astype(np.uint16)
        padded.flags.writeable = False

    def rank1(self, i: int) -> int:
        """Number of set bits in positions ``[0, i)``."""
        if not 0 <= i <= self._len:
            raise IndexError(f"rank position {i} out of range [0, {self._len}]")
        w = i >> 6
        r = self._super.item(w >> 3) + self._block.item(w)
        rem = i & 63
        if rem:
            r += (self._words.item(w) & ((1 << rem) - 1)).bit_count()
        return r

    def directory_accessors(self):
        """Scalar readers ``(superblock_count, block_count, word)`` by index.

        For tight navigation loops that fold the bit test into the rank
        computation.
        """
        return self._super.item, self._block.item, self._words.item

    def rank1_many(self, positions: np.ndarray) -> np.ndarray:
        """Vectorised :meth:`rank1`; positions are not range-checked."""
        positions = np.asarray(positions, dtype=np.int64)
        w = positions >> 6
        mask = (np.uint64(1) << (positions & 63).astype(np.uint64)) - np.uint64(1)
        partial = np.bitwise_count(self._words[w] & mask)
        return (
            self._super[w >> 3].astype(np.int64)
            + self._block[w].astype(np.int64)
            + partial.astype(np.int64)
        )

    def popcount(self) -> int:
        return self.rank1(self._len)


class ClearableBitVector(BitVector):
    """Bit vector whose bits may only be cleared after construction."""

    __slots__ = ()

    def __init__(self, data: np.ndarray | bytes, length: int):
        super().__init__(data, length)
        self._bytes = self._bytes.copy()

    def clear(self, i: int) -> int:
        """Set bit ``i`` to zero and return its previous value."""
        if not 0 <= i < self._len:
            raise IndexError(f"bit index {i} out of range [0, {self._len})")
        byte = self._bytes.item(i >> 3)
        bit = 1 << (i & 7)
        if byte & bit:
            self._bytes[i >> 3] = byte & ~bit
            return 1
        return 0

    def copy(self) -> "ClearableBitVector":
        return ClearableBitVector(self._bytes.copy(), self._len)


def build_rank(bits: BitVector) -> RankBitVector:
    return RankBitVector(bits.packed, len(bits))
