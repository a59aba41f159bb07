"""Static k^2-trees over square boolean adjacency matrices.

The matrix side is padded to ``k**h``.  Each level splits every non-empty
submatrix into ``k*k`` children in row-major order and stores one bit per
child.  Internal levels are concatenated breadth-first into ``T`` (with a
rank directory); the last level is ``L``.  The children of the 1-bit at
position ``p`` of ``T`` start at position ``rank1(T, p + 1) * k*k`` of the
virtual concatenation ``T + L``.

Deleting an edge clears its bit in ``L`` and nothing else, so a tree that
has seen deletions may contain internal 1-bits with no live leaf below
them.  Set operations always produce canonical trees, so they double as
the compaction step.
"""
from __future__ import annotations

import struct
from typing import Iterable, Iterator

import numpy as np

from .bitvec import ClearableBitVector, RankBitVector

MAGIC = b"K2TR"
VERSION = 1
_HEADER = struct.Struct("<4sBBBBQQQQ")
HEADER_SIZE = _HEADER.size

MAX_SIDE = 1 << 32


class K2TreeFormatError(ValueError):
    """Serialized tree is corrupt, truncated or of an unknown version."""


class IncompatibleTreesError(ValueError):
    """Set operation between trees of different arity."""


class VertexRangeError(ValueError):
    """Vertex id outside ``[0, n)``."""


def height_for(n: int, k: int) -> int:
    """Smallest ``h >= 1`` with ``k**h >= max(n, 2)``."""
    n = max(n, 2)
    h, side = 1, k
    while side < n:
        side *= k
        h += 1
    return h


def _as_arrays(edges) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(edges, tuple) and len(edges) == 2 and isinstance(edges[0], np.ndarray):
        u, v = edges
    else:
        arr = np.asarray(edges if isinstance(edges, np.ndarray) else list(edges), dtype=np.int64)
        if arr.size == 0:
            arr = arr.reshape(0, 2)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValueError("edges must be a sequence of (u, v) pairs")
        u, v = arr[:, 0], arr[:, 1]
    return np.asarray(u, dtype=np.int64), np.asarray(v, dtype=np.int64)


class K2Tree:
    __slots__ = ("k", "h", "n", "T", "L", "m_live", "canonical", "_k2", "_top_div", "_nav")

    def __init__(self, k: int, h: int, n: int, T: RankBitVector, L: ClearableBitVector,
                 m_live: int | None = None, canonical: bool = False):
        if k < 2 or k > 255:
            raise ValueError(f"arity k must be in [2, 255], got {k}")
        self.k = k
        self.h = h
        self.n = n
        self.T = T
        self.L = L
        self.m_live = L.popcount() if m_live is None else m_live
        # True only when known to have no dead subtrees; False means "unknown"
        self.canonical = canonical
        self._k2 = k * k
        self._top_div = k ** (h - 1)
        self._nav = T.directory_accessors() + (len(T),)

    # -- construction -------------------------------------------------------

    @classmethod
    def empty(cls, n: int, k: int = 2) -> "K2Tree":
        h = height_for(n, k)
        T = RankBitVector.from_bools(np.zeros(k * k, dtype=bool))
        L = ClearableBitVector.from_bools(np.zeros(0, dtype=bool))
        return cls(k, h, n, T, L, 0, canonical=True)

    @classmethod
    def build(cls, n: int, k: int, edges) -> "K2Tree":
        """Build a canonical tree holding the distinct ``edges``.

        ``edges`` is an iterable of ``(u, v)`` pairs, an ``(m, 2)`` array or
        a ``(u_array, v_array)`` tuple.  Duplicates are dropped.
        """
        h = height_for(n, k)
        if k ** h > MAX_SIDE:
            raise ValueError(f"matrix side {k}**{h} exceeds {MAX_SIDE}")
        u, v = _as_arrays(edges)
        if len(u) == 0:
            return cls.empty(n, k)
        if u.min() < 0 or v.min() < 0 or u.max() >= n or v.max() >= n:
            raise VertexRangeError(f"edge endpoint outside [0, {n})")
        k2 = k * k
        uu = u.astype(np.uint64)
        vv = v.astype(np.uint64)
        key = np.zeros(len(u), dtype=np.uint64)
        div = k ** (h - 1)
        for _ in range(h):
            key = key * np.uint64(k2) + (uu // np.uint64(div) % np.uint64(k)) * np.uint64(k) \
                + (vv // np.uint64(div) % np.uint64(k))
            div //= k
        # z-order at arity k; breadth-first order of every level follows it
        cur = np.unique(key)
        levels: list[np.ndarray] = []
        for _ in range(h):
            parent = cur // np.uint64(k2)
            child = (cur % np.uint64(k2)).astype(np.int64)
            first = np.empty(len(cur), dtype=bool)
            first[0] = True
            np.not_equal(parent[1:], parent[:-1], out=first[1:])
            block = np.cumsum(first) - 1
            bits = np.zeros(int(block[-1] + 1) * k2, dtype=bool)
            bits[block * k2 + child] = True
            levels.append(bits)
            cur = parent[first]
        levels.reverse()
        T = RankBitVector.from_bools(np.concatenate(levels[:-1]) if h > 1 else np.zeros(0, bool))
        L = ClearableBitVector.from_bools(levels[-1])
        return cls(k, h, n, T, L, int(levels[-1].sum()), canonical=True)

    # -- queries ------------------------------------------------------------

    @property
    def is_empty(self) -> bool:
        """True for the canonical empty layout (no leaf level at all)."""
        return len(self.L) == 0

    def _check(self, x: int) -> None:
        if not 0 <= x < self.n:
            raise VertexRangeError(f"vertex {x} outside [0, {self.n})")

    def _leaf_position(self, u: int, v: int) -> int:
        """Index into L of cell (u, v), or -1 if an internal 0-bit rules it out."""
        if len(self.L) == 0:
            return -1
        # rank1(T, p + 1) from the directory and the word holding bit p
        super_at, block_at, word_at, tlen = self._nav
        k = self.k
        start = 0
        if k == 2:
            for shift in range(self.h - 1, 0, -1):
                p = start + (((u >> shift) & 1) << 1) + ((v >> shift) & 1)
                w = p >> 6
                word = word_at(w)
                bit = p & 63
                if not (word >> bit) & 1:
                    return -1
                start = (super_at(w >> 3) + block_at(w)
                         + (word & ((2 << bit) - 1)).bit_count()) << 2
            return start - tlen + ((u & 1) << 1) + (v & 1)
        k2 = self._k2
        div = self._top_div
        for _ in range(self.h - 1):
            p = start + (u // div % k) * k + (v // div % k)
            w = p >> 6
            word = word_at(w)
            bit = p & 63
            if not (word >> bit) & 1:
                return -1
            start = (super_at(w >> 3) + block_at(w) + (word & ((2 << bit) - 1)).bit_count()) * k2
            div //= k
        return start - tlen + (u % k) * k + (v % k)

    def contains(self, u: int, v: int) -> bool:
        self._check(u)
        self._check(v)
        p = self._leaf_position(u, v)
        return p >= 0 and bool(self.L.access(p))

    def __contains__(self, edge: tuple[int, int]) -> bool:
        return self.contains(*edge)

    def has_edge(self, u: int, v: int) -> bool:
        """Like :meth:`contains` but ids outside the matrix just read as absent."""
        if not (0 <= u < self.n and 0 <= v < self.n):
            return False
        p = self._leaf_position(u, v)
        return p >= 0 and (self.L.packed.item(p >> 3) >> (p & 7)) & 1 == 1

    def delete(self, u: int, v: int) -> bool:
        """Tombstone edge (u, v).  Returns False if it was not live."""
        self._check(u)
        self._check(v)
        p = self._leaf_position(u, v)
        if p >= 0 and self.L.clear(p):
            self.m_live -= 1
            self.canonical = False
            return True
        return False

    def _line(self, x: int, by_row: bool) -> list[int]:
        if len(self.L) == 0:
            return []
        k, k2 = self.k, self._k2
        tbytes = self.T.packed
        rank1 = self.T.rank1
        lbytes = self.L.packed
        tlen = len(self.T)
        div = self._top_div
        frontier = [(0, 0)]
        for _ in range(self.h - 1):
            d = x // div % k
            nxt = []
            for start, base in frontier:
                for j in range(k):
                    p = start + (d * k + j if by_row else j * k + d)
                    if (tbytes.item(p >> 3) >> (p & 7)) & 1:
                        nxt.append((rank1(p + 1) * k2, base + j * div))
            if not nxt:
                return []
            frontier = nxt
            div //= k
        d = x % k
        out = []
        for start, base in frontier:
            for j in range(k):
                p = start - tlen + (d * k + j if by_row else j * k + d)
                if (lbytes.item(p >> 3) >> (p & 7)) & 1:
                    out.append(base + j)
        return out

    def neighbors(self, u: int) -> list[int]:
        """Sorted out-neighbours of ``u``."""
        self._check(u)
        return self._line(u, True)

    def reverse_neighbors(self, v: int) -> list[int]:
        """Sorted in-neighbours of ``v``."""
        self._check(v)
        return self._line(v, False)

    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """All live edges as two int64 arrays, sorted row-major."""
        if len(self.L) == 0:
            return np.zeros(0, np.int64), np.zeros(0, np.int64)
        k, k2 = self.k, self._k2
        child = np.arange(k2, dtype=np.int64)
        starts = np.zeros(1, dtype=np.int64)
        rows = np.zeros(1, dtype=np.int64)
        cols = np.zeros(1, dtype=np.int64)
        div = self._top_div
        for level in range(self.h):
            pos = (starts[:, None] + child).ravel()
            rows = (rows[:, None] + (child // k) * div).ravel()
            cols = (cols[:, None] + (child % k) * div).ravel()
            if level == self.h - 1:
                bits = self.L.access_many(pos - len(self.T))
            else:
                bits = self.T.access_many(pos)
                starts = self.T.rank1_many(pos[bits] + 1) * k2
            rows, cols = rows[bits], cols[bits]
            div //= k
        order = np.lexsort((cols, rows))
        return rows[order], cols[order]

    def edges(self) -> Iterator[tuple[int, int]]:
        """Live edges in row-major order."""
        rows, cols = self.edge_arrays()
        for u, v in zip(rows.tolist(), cols.tolist()):
            yield u, v

    def __len__(self) -> int:
        return self.m_live

    # -- set operations -----------------------------------------------------

    def union(self, other: "K2Tree") -> "K2Tree":
        return _combine(self, other, "union")

    def intersection(self, other: "K2Tree") -> "K2Tree":
        return _combine(self, other, "intersection")

    def difference(self, other: "K2Tree") -> "K2Tree":
        return _combine(self, other, "difference")

    __or__ = union
    __and__ = intersection
    __sub__ = difference

    def compact(self) -> "K2Tree":
        """Canonical copy with tombstoned subtrees pruned."""
        return _combine(self, K2Tree.empty(self.n, self.k), "union")

    def is_canonical(self) -> bool:
        """Check (not just trust) that no internal 1-bit has an empty subtree."""
        probe = self.copy()
        probe.canonical = False
        return self == probe.compact()

    # -- structure ----------------------------------------------------------

    def level_lengths(self) -> list[int]:
        """Bit length of each level, top to bottom (the last one is L)."""
        if self.is_empty:
            return [self._k2] + [0] * (self.h - 1)
        lengths = []
        start, length = 0, self._k2
        for _ in range(self.h - 1):
            lengths.append(length)
            ones = self.T.rank1(start + length) - self.T.rank1(start)
            start += length
            length = ones * self._k2
        lengths.append(length)
        return lengths

    def validate(self) -> None:
        """Raise :class:`K2TreeFormatError` if the layout is inconsistent."""
        if self.h != height_for(self.n, self.k):
            raise K2TreeFormatError(f"height {self.h} does not match n={self.n}, k={self.k}")
        if self.k ** self.h > MAX_SIDE:
            raise K2TreeFormatError("matrix side too large")
        if self.is_empty:
            if len(self.T) != self._k2 or self.T.popcount() != 0:
                raise K2TreeFormatError("empty tree must have an all-zero first level")
        else:
            lengths = self.level_lengths()
            if sum(lengths[:-1]) > len(self.T) or lengths[-1] == 0:
                raise K2TreeFormatError("internal levels overrun T")
            if sum(lengths[:-1]) != len(self.T) or lengths[-1] != len(self.L):
                raise K2TreeFormatError("level lengths inconsistent with T/L sizes")
        if self.L.popcount() != self.m_live:
            raise K2TreeFormatError("m_live does not match popcount(L)")

    @property
    def serialized_size(self) -> int:
        return HEADER_SIZE + len(self.T.packed) + len(self.L.packed)

    def serialize(self) -> bytes:
        header = _HEADER.pack(MAGIC, VERSION, self.k, self.h, 0, self.n, self.m_live,
                              len(self.T), len(self.L))
        return header + self.T.packed.tobytes() + self.L.packed.tobytes()

    @classmethod
    def deserialize(cls, buf: bytes) -> "K2Tree":
        tree, end = cls.deserialize_from(buf, 0)
        if end != len(buf):
            raise K2TreeFormatError(f"{len(buf) - end} trailing bytes")
        return tree

    @classmethod
    def deserialize_from(cls, buf: bytes, offset: int) -> tuple["K2Tree", int]:
        """Decode one tree at ``offset``; returns it with the end offset."""
        if len(buf) - offset < HEADER_SIZE:
            raise K2TreeFormatError("truncated header")
        magic, version, k, h, _, n, m_live, tlen, llen = _HEADER.unpack_from(buf, offset)
        if magic != MAGIC:
            raise K2TreeFormatError(f"bad magic {magic!r}")
        if version != VERSION:
            raise K2TreeFormatError(f"unsupported version {version}")
        if k < 2:
            raise K2TreeFormatError(f"bad arity {k}")
        offset += HEADER_SIZE
        tbytes, lbytes = (tlen + 7) >> 3, (llen + 7) >> 3
        if len(buf) - offset < tbytes + lbytes:
            raise K2TreeFormatError("truncated payload")
        tdata = np.frombuffer(buf, np.uint8, tbytes, offset)
        ldata = np.frombuffer(buf, np.uint8, lbytes, offset + tbytes)
        for data, length in ((tdata, tlen), (ldata, llen)):
            if length & 7 and data[-1] >> (length & 7):
                raise K2TreeFormatError("non-zero padding bits")
        tree = cls(k, h, n, RankBitVector(tdata, tlen), ClearableBitVector(ldata, llen), m_live)
        tree.validate()
        return tree, offset + tbytes + lbytes

    def copy(self) -> "K2Tree":
        return K2Tree(self.k, self.h, self.n, self.T, self.L.copy(), self.m_live, self.canonical)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, K2Tree):
            return NotImplemented
        return (self.k, self.h, self.n, self.m_live) == (other.k, other.h, other.n, other.m_live) \
            and self.T == other.T and self.L == other.L

    def __repr__(self) -> str:
        return f"K2Tree(k={self.k}, h={self.h}, n={self.n}, m_live={self.m_live}, " \
               f"|T|={len(self.T)}, |L|={len(self.L)})"


def build(n: int, k: int, edges: Iterable[tuple[int, int]]) -> K2Tree:
    return K2Tree.build(n, k, edges)


class _LevelWalker:
    """Reads one input tree level by level during a set operation.

    Blocks are addressed by their index within a level.  ``pad`` leading
    virtual levels hold a single block whose only 1-bit is child 0, which
    places a smaller tree in the top-left corner of a taller one.
    """

    def __init__(self, tree: K2Tree, h: int):
        self.tree = tree
        self.k2 = tree._k2
        self.pad = h - tree.h
        self.offsets = [0]
        for length in tree.level_lengths():
            self.offsets.append(self.offsets[-1] + length)

    def rows(self, level: int, idx: np.ndarray) -> np.ndarray:
        """Bits of blocks ``idx`` (-1 = absent) as an ``(len(idx), k2)`` array."""
        real = level - self.pad
        present = idx >= 0
        if real <= 0:
            bits = np.zeros((len(idx), self.k2), dtype=bool)
            bits[:, 0] = present
            return bits
        if not present.any():
            return np.zeros((len(idx), self.k2), dtype=bool)
        tree = self.tree
        start, end = self.offsets[real - 1], self.offsets[real]
        if real == tree.h:
            packed, start, end = tree.L.packed, start - len(tree.T), end - len(tree.T)
        else:
            packed = tree.T.packed
        # levels start on byte boundaries only by accident, so unpack with slack
        lo = start >> 3
        raw = np.unpackbits(packed[lo:(end + 7) >> 3], bitorder="little").view(bool)
        level_bits = raw[start - 8 * lo:end - 8 * lo].reshape(-1, self.k2)
        if present.all():
            return _take_rows(level_bits, idx)
        bits = _take_rows(level_bits, np.where(present, idx, 0))
        bits[~present] = False
        return bits

    def children(self, level: int, flat: np.ndarray) -> np.ndarray:
        """Next-level block index of the 1-bits at level-relative positions ``flat``."""
        real = level - self.pad
        if real <= 0:
            return np.zeros(len(flat), dtype=np.int64)
        start = self.offsets[real - 1]
        return self.tree.T.rank1_many(flat + start) - self.tree.T.rank1(start)


_ROW_VIEWS = {1: np.uint8, 2: np.uint16, 4: np.uint32, 8: np.uint64}


def _take_rows(table: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """``table[idx]`` for a C-contiguous bool table, gathering whole rows as words."""
    width = table.shape[1]
    view = _ROW_VIEWS.get(width)
    if view is None:
        return np.take(table, idx, axis=0)
    return table.view(view).ravel().take(idx).view(bool).reshape(-1, width)


def _combine(a: K2Tree, b: K2Tree, op: str) -> K2Tree:
    """Union/intersection/difference by a synchronized breadth-first walk.

    The walk goes top-down collecting, for every candidate block of the
    result, the matching block of each input (if any).  Leaf bits are then
    decided, and a bottom-up pass clears every internal bit whose subtree
    came out empty, which makes the output canonical.  Trees of smaller
    height are aligned into the top-left corner of the larger matrix.
    """
    if a.k != b.k:
        raise IncompatibleTreesError(f"arity mismatch: {a.k} vs {b.k}")
    if op not in ("union", "intersection", "difference"):
        raise ValueError(f"unknown set operation {op!r}")
    k = a.k
    n = max(a.n, b.n)
    h = height_for(n, k)
    wa, wb = _LevelWalker(a, h), _LevelWalker(b, h)
    ia = np.array([-1 if a.is_empty else 0], dtype=np.int64)
    ib = np.array([-1 if b.is_empty else 0], dtype=np.int64)
    candidates: list[np.ndarray] = []
    for level in range(1, h + 1):
        bits_a = wa.rows(level, ia)
        bits_b = wb.rows(level, ib)
        leaf = level == h
        if op == "union":
            keep = bits_a | bits_b
        elif op == "intersection":
            keep = bits_a & bits_b
        else:
            keep = bits_a & ~bits_b if leaf else bits_a
        if not keep.any():
            return K2Tree.empty(n, k)
        candidates.append(keep)
        if leaf:
            break
        k2 = a._k2
        flat = np.flatnonzero(keep)
        rows = flat // k2
        cols = flat - rows * k2
        next_a = np.full(len(flat), -1, dtype=np.int64)
        has_a = bits_a.ravel()[flat]
        next_a[has_a] = wa.children(level, ia[rows[has_a]] * k2 + cols[has_a])
        next_b = np.full(len(flat), -1, dtype=np.int64)
        has_b = bits_b.ravel()[flat]
        next_b[has_b] = wb.children(level, ib[rows[has_b]] * k2 + cols[has_b])
        ia, ib = next_a, next_b

    if op == "union" and a.canonical and b.canonical:
        # every kept bit already has a live leaf below it
        T = RankBitVector.from_bools(np.concatenate([x.ravel() for x in candidates[:-1]])
                                     if h > 1 else np.zeros(0, bool))
        L = ClearableBitVector.from_bools(candidates[-1].ravel())
        return K2Tree(k, h, n, T, L, canonical=True)

    # bottom-up pruning of subtrees left empty
    blocks = candidates[-1]
    nonempty = blocks.any(axis=1)
    kept = [blocks[nonempty]]
    for bits in reversed(candidates[:-1]):
        bits = bits.copy()
        bits[bits] = nonempty
        nonempty = bits.any(axis=1)
        kept.append(bits[nonempty])
    if not nonempty[0]:
        return K2Tree.empty(n, k)
    kept.reverse()
    T = RankBitVector.from_bools(np.concatenate([x.ravel() for x in kept[:-1]])
                                 if h > 1 else np.zeros(0, bool))
    L = ClearableBitVector.from_bools(kept[-1].ravel())
    return K2Tree(k, h, n, T, L, canonical=True)


def union(a: K2Tree, b: K2Tree) -> K2Tree:
    return _combine(a, b, "union")


def intersection(a: K2Tree, b: K2Tree) -> K2Tree:
    return _combine(a, b, "intersection")


def difference(a: K2Tree, b: K2Tree) -> K2Tree:
    return _combine(a, b, "difference")
