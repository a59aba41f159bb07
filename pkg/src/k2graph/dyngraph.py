"""Semi-dynamic graph built from a buffer and a collection of static k^2-trees.

New edges land in an uncompressed buffer (``E0``).  When the buffer is
full it is compressed and merged, together with every smaller static set,
into the first slot ``E_j`` able to hold the result.  Slot capacities grow
geometrically with the slot index::

    capacity(i, m) = max(64, floor(m / log2(m) ** (2 - i * epsilon)))

Deleted edges are removed from the buffer directly, or tombstoned in their
static tree.  Once tombstones exceed ``m / log2(log2(m))`` the whole
collection is rebuilt into a single slot.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .k2tree import K2Tree, K2TreeFormatError

MIN_CAPACITY = 64
MAGIC = b"SDKC"
VERSION = 1
_HEADER = struct.Struct("<4sBBBBdQQQ")


class CollectionFormatError(ValueError):
    """Saved collection is corrupt or truncated."""


class InvariantViolation(AssertionError):
    pass


def slot_count(epsilon: float) -> int:
    """Number of static slots, ``ceil(2 / epsilon)``."""
    if not 0 < epsilon <= 2:
        raise ValueError(f"epsilon must be in (0, 2], got {epsilon}")
    return math.ceil(2 / epsilon - 1e-9)


def capacity(i: int, m: int, epsilon: float) -> int:
    """Maximum number of edges in set ``E_i`` when the graph has ``m`` edges."""
    m = max(m, 4)
    exponent = 2 - i * epsilon
    if abs(exponent) < 1e-9:
        exponent = 0.0
    return max(MIN_CAPACITY, math.floor(m / math.log2(m) ** exponent))


def tombstone_threshold(m: int) -> float:
    """Tombstones tolerated before a full rebuild, ``m / log2(log2(m))``."""
    m = max(m, 4)
    return m / math.log2(math.log2(m))


class EdgeBuffer:
    """Uncompressed edge set with forward and reverse adjacency."""

    __slots__ = ("forward", "reverse", "members")

    def __init__(self):
        self.forward: dict[int, set[int]] = {}
        self.reverse: dict[int, set[int]] = {}
        self.members: set[tuple[int, int]] = set()

    @property
    def count(self) -> int:
        return len(self.members)

    def __len__(self) -> int:
        return len(self.members)

    def __contains__(self, edge: tuple[int, int]) -> bool:
        return edge in self.members

    def __iter__(self) -> Iterator[tuple[int, int]]:
        return iter(self.members)

    def add(self, u: int, v: int) -> bool:
        if (u, v) in self.members:
            return False
        self.members.add((u, v))
        self.forward.setdefault(u, set()).add(v)
        self.reverse.setdefault(v, set()).add(u)
        return True

    def remove(self, u: int, v: int) -> bool:
        if (u, v) not in self.members:
            return False
        self.members.remove((u, v))
        out = self.forward[u]
        out.discard(v)
        if not out:
            del self.forward[u]
        inc = self.reverse[v]
        inc.discard(u)
        if not inc:
            del self.reverse[v]
        return True

    def neighbors(self, u: int) -> list[int]:
        return sorted(self.forward.get(u, ()))

    def reverse_neighbors(self, v: int) -> list[int]:
        return sorted(self.reverse.get(v, ()))

    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.members:
            return np.zeros(0, np.int64), np.zeros(0, np.int64)
        arr = np.array(list(self.members), dtype=np.int64)
        return arr[:, 0], arr[:, 1]

    def clear(self) -> None:
        self.forward.clear()
        self.reverse.clear()
        self.members.clear()

    def check(self) -> None:
        fwd = sum(len(s) for s in self.forward.values())
        rev = sum(len(s) for s in self.reverse.values())
        if not fwd == rev == len(self.members):
            raise InvariantViolation(f"buffer counts disagree: {fwd}, {rev}, {len(self.members)}")
        for u, v in self.members:
            if v not in self.forward.get(u, ()) or u not in self.reverse.get(v, ()):
                raise InvariantViolation(f"buffer adjacency missing ({u}, {v})")


@dataclass
class MaintenanceCounters:
    """How much merging the collection has done.

    ``max_moves[j]`` is the largest number of times any edge now in slot
    ``j`` has been moved into a static slot.
    """

    flushes: int = 0
    full_rebuilds: int = 0
    edges_moved: int = 0
    slot_rebuilds: list[int] = field(default_factory=list)
    max_moves: list[int] = field(default_factory=list)


@dataclass
class GraphStats:
    m: int
    deleted: int
    buffer_size: int
    slot_sizes: list[int]
    slot_bytes: list[int]
    serialized_size: int
    n_bound: int
    epsilon: float
    k: int
    r: int

    def as_lines(self) -> list[str]:
        return [
            f"m={self.m}",
            f"deleted={self.deleted}",
            f"buffer={self.buffer_size}",
            "slots=" + ",".join(map(str, self.slot_sizes)),
            "slot_bytes=" + ",".join(map(str, self.slot_bytes)),
            f"bytes={self.serialized_size}",
            f"n_bound={self.n_bound}",
            f"epsilon={self.epsilon}",
            f"k={self.k}",
            f"r={self.r}",
        ]


class DynamicGraph:
    """Directed graph supporting edge insertions, deletions and queries.

    ``slots[j]`` holds the static set ``E_j`` for ``1 <= j <= r``;
    ``slots[0]`` is always ``None`` since ``E_0`` is :attr:`buffer`.
    """

    def __init__(self, epsilon: float = 0.25, k: int = 2, n_bound: int = 2):
        self.r = slot_count(epsilon)
        if k < 2 or k > 255:
            raise ValueError(f"arity k must be in [2, 255], got {k}")
        self.epsilon = float(epsilon)
        self.k = k
        self.n_bound = max(int(n_bound), 1)
        self.buffer = EdgeBuffer()
        self.slots: list[K2Tree | None] = [None] * (self.r + 1)
        self.tombstones = [0] * (self.r + 1)
        self.m = 0
        self.deleted = 0
        self.counters = MaintenanceCounters(
            slot_rebuilds=[0] * (self.r + 1), max_moves=[0] * (self.r + 1))

    def capacity(self, i: int, m: int | None = None) -> int:
        return capacity(i, self.m if m is None else m, self.epsilon)

    # -- queries ------------------------------------------------------------

    def contains(self, u: int, v: int) -> bool:
        if (u, v) in self.buffer.members:
            return True
        for tree in self.slots:
            if tree is not None and tree.has_edge(u, v):
                return True
        return False

    def __contains__(self, edge: tuple[int, int]) -> bool:
        return self.contains(*edge)

    def locate(self, u: int, v: int) -> list[int]:
        """Indices of every set holding (u, v); 0 is the buffer."""
        found = [0] if (u, v) in self.buffer.members else []
        found += [j for j, t in enumerate(self.slots) if t is not None and t.has_edge(u, v)]
        return found

    def neighbors(self, u: int) -> list[int]:
        out = self.buffer.neighbors(u)
        for tree in self.slots:
            if tree is not None and 0 <= u < tree.n:
                out.extend(tree.neighbors(u))
        out.sort()
        return out

    def reverse_neighbors(self, v: int) -> list[int]:
        out = self.buffer.reverse_neighbors(v)
        for tree in self.slots:
            if tree is not None and 0 <= v < tree.n:
                out.extend(tree.reverse_neighbors(v))
        out.sort()
        return out

    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """All live edges, sorted row-major."""
        parts = [self.buffer.edge_arrays()]
        parts += [t.edge_arrays() for t in self.slots if t is not None]
        u = np.concatenate([p[0] for p in parts])
        v = np.concatenate([p[1] for p in parts])
        order = np.lexsort((v, u))
        return u[order], v[order]

    def edges(self) -> Iterator[tuple[int, int]]:
        u, v = self.edge_arrays()
        return zip(u.tolist(), v.tolist())

    def __len__(self) -> int:
        return self.m

    # -- updates ------------------------------------------------------------

    def add_edge(self, u: int, v: int) -> bool:
        """Insert (u, v); returns False if it was already present."""
        if u < 0 or v < 0:
            raise ValueError(f"negative vertex id in ({u}, {v})")
        if self.contains(u, v):
            return False
        while max(u, v) >= self.n_bound:
            self.n_bound *= 2
        if len(self.buffer) >= self.capacity(0):
            self._flush()
        self.buffer.add(u, v)
        self.m += 1
        return True

    def remove_edge(self, u: int, v: int) -> bool:
        """Delete (u, v); returns False if it was not present."""
        if self.buffer.remove(u, v):
            self.m -= 1
        else:
            for j in range(1, self.r + 1):
                tree = self.slots[j]
                if tree is not None and tree.has_edge(u, v):
                    tree.delete(u, v)
                    self.tombstones[j] += 1
                    self.deleted += 1
                    self.m -= 1
                    break
            else:
                return False
        if self.deleted > tombstone_threshold(self.m):
            self.rebuild()
        elif len(self.buffer) > self.capacity(0):
            # capacities shrink with m; keep the buffer within bound
            self._flush()
        return True

    def _flush(self) -> None:
        """Compress the buffer and merge it into the first slot that fits."""
        total = len(self.buffer)
        for j in range(1, self.r + 1):
            tree = self.slots[j]
            total += tree.m_live if tree is not None else 0
            if total <= self.capacity(j):
                break
        else:  # pragma: no cover - slot r always has capacity >= m
            raise RuntimeError("no slot can absorb the buffer")
        merged = K2Tree.build(self.n_bound, self.k, self.buffer.edge_arrays())
        moved = len(self.buffer)
        moves = 1
        for i in range(1, j + 1):
            tree = self.slots[i]
            if tree is None:
                continue
            merged = merged.union(tree)
            if i < j:
                moved += tree.m_live
                moves = max(moves, self.counters.max_moves[i] + 1)
            else:
                moves = max(moves, self.counters.max_moves[i])
            self.deleted -= self.tombstones[i]
            self.tombstones[i] = 0
            self.slots[i] = None
            self.counters.max_moves[i] = 0
        self.buffer.clear()
        self.slots[j] = merged
        self.counters.max_moves[j] = moves
        self.counters.flushes += 1
        self.counters.slot_rebuilds[j] += 1
        self.counters.edges_moved += moved

    def rebuild(self) -> None:
        """Merge everything into one slot, dropping all tombstones."""
        merged = K2Tree.build(self.n_bound, self.k, self.buffer.edge_arrays())
        moves = 1
        for j in range(1, self.r + 1):
            tree = self.slots[j]
            if tree is not None:
                merged = merged.union(tree)
                moves = max(moves, self.counters.max_moves[j] + 1)
        self.buffer.clear()
        self.slots = [None] * (self.r + 1)
        self.tombstones = [0] * (self.r + 1)
        self.counters.max_moves = [0] * (self.r + 1)
        self.deleted = 0
        self.counters.full_rebuilds += 1
        if merged.m_live == 0:
            return
        j = next(j for j in range(1, self.r + 1) if merged.m_live <= self.capacity(j))
        self.slots[j] = merged
        self.counters.max_moves[j] = moves
        self.counters.slot_rebuilds[j] += 1
        self.counters.edges_moved += merged.m_live

    # -- reporting ----------------------------------------------------------

    def stats(self) -> GraphStats:
        slot_bytes = [t.serialized_size if t is not None else 0 for t in self.slots[1:]]
        size = (_HEADER.size + 16 * len(self.buffer) + self.r + sum(slot_bytes))
        return GraphStats(
            m=self.m,
            deleted=self.deleted,
            buffer_size=len(self.buffer),
            slot_sizes=[t.m_live if t is not None else 0 for t in self.slots[1:]],
            slot_bytes=slot_bytes,
            serialized_size=size,
            n_bound=self.n_bound,
            epsilon=self.epsilon,
            k=self.k,
            r=self.r,
        )

    def check_invariants(self, full: bool = False) -> None:
        """Raise :class:`InvariantViolation` if the collection is inconsistent.

        The cheap checks cover counts and bounds; ``full`` also enumerates
        every set to verify that no edge is stored twice.
        """
        live = len(self.buffer) + sum(t.m_live for t in self.slots if t is not None)
        if live != self.m:
            raise InvariantViolation(f"m={self.m} but sets hold {live} edges")
        if len(self.buffer) > self.capacity(0):
            raise InvariantViolation(f"buffer {len(self.buffer)} over capacity {self.capacity(0)}")
        if self.deleted > max(1.0, tombstone_threshold(self.m)):
            raise InvariantViolation(f"{self.deleted} tombstones over threshold for m={self.m}")
        if self.deleted != sum(self.tombstones) or min(self.tombstones) < 0:
            raise InvariantViolation("tombstone accounting is off")
        if self.slots[0] is not None:
            raise InvariantViolation("slot 0 must stay empty")
        for tree in self.slots:
            if tree is not None and tree.n > self.n_bound:
                raise InvariantViolation("tree wider than n_bound")
        if self.buffer.members and max(max(e) for e in self.buffer.members) >= self.n_bound:
            raise InvariantViolation("buffer vertex beyond n_bound")
        if not full:
            return
        self.buffer.check()
        for tree in self.slots:
            if tree is not None:
                tree.validate()
        u, v = self.edge_arrays()
        keys = u * self.n_bound + v
        if len(np.unique(keys)) != len(keys):
            raise InvariantViolation("an edge is stored in more than one set")

    # -- persistence --------------------------------------------------------

    def save(self) -> bytes:
        """Serialize; tombstoned slots are compacted on the way out."""
        bu, bv = self.buffer.edge_arrays()
        order = np.lexsort((bv, bu))
        pairs = np.empty(2 * len(bu), dtype="<u8")
        pairs[0::2] = bu[order]
        pairs[1::2] = bv[order]
        chunks = [
            _HEADER.pack(MAGIC, VERSION, self.k, self.r, 0, self.epsilon, self.n_bound, self.m,
                         len(bu)),
            pairs.tobytes(),
        ]
        for tree in self.slots[1:]:
            if tree is not None and not tree.canonical:
                tree = tree.compact()
            if tree is None or tree.m_live == 0:
                chunks.append(b"\x00")
            else:
                chunks.append(b"\x01")
                chunks.append(tree.serialize())
        return b"".join(chunks)

    @classmethod
    def load(cls, buf: bytes) -> "DynamicGraph":
        if len(buf) < _HEADER.size:
            raise CollectionFormatError("truncated header")
        magic, version, k, r, _, epsilon, n_bound, m, nbuf = _HEADER.unpack_from(buf, 0)
        if magic != MAGIC:
            raise CollectionFormatError(f"bad magic {magic!r}")
        if version != VERSION:
            raise CollectionFormatError(f"unsupported version {version}")
        try:
            g = cls(epsilon=epsilon, k=k, n_bound=n_bound)
        except ValueError as exc:
            raise CollectionFormatError(str(exc)) from exc
        if g.r != r:
            raise CollectionFormatError(f"slot count {r} does not match epsilon {epsilon}")
        offset = _HEADER.size
        if len(buf) - offset < 16 * nbuf:
            raise CollectionFormatError("truncated buffer edges")
        pairs = np.frombuffer(buf, dtype="<u8", count=2 * nbuf, offset=offset)
        offset += 16 * nbuf
        if nbuf and pairs.max() >= n_bound:
            raise CollectionFormatError("buffer edge beyond n_bound")
        for u, v in pairs.reshape(-1, 2).tolist():
            g.buffer.add(u, v)
        for j in range(1, r + 1):
            if offset >= len(buf):
                raise CollectionFormatError("truncated slot table")
            flag = buf[offset]
            offset += 1
            if flag == 0:
                continue
            if flag != 1:
                raise CollectionFormatError(f"bad presence byte {flag}")
            try:
                tree, offset = K2Tree.deserialize_from(buf, offset)
            except K2TreeFormatError as exc:
                raise CollectionFormatError(f"slot {j}: {exc}") from exc
            if tree.k != k or tree.n > n_bound:
                raise CollectionFormatError(f"slot {j} incompatible with collection header")
            g.slots[j] = tree
        if offset != len(buf):
            raise CollectionFormatError(f"{len(buf) - offset} trailing bytes")
        g.m = len(g.buffer) + sum(t.m_live for t in g.slots if t is not None)
        if g.m != m:
            raise CollectionFormatError(f"header says m={m}, sets hold {g.m}")
        if len(g.buffer) != nbuf or any(g.locate(u, v) != [0] for u, v in g.buffer):
            raise CollectionFormatError("buffer edges duplicated")
        return g
