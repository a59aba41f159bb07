"""Acceptance criteria, one test each; every test prints a PASS/FAIL line."""
import random
import time

import numpy as np
import pytest

from conftest import record_criterion
from k2graph.cli import bench_delete
from k2graph.dyngraph import DynamicGraph
from k2graph.genmodel import GeneratorConfig, generate, write_edge_list
from k2graph.k2tree import K2Tree

MIXED_OPS = 100_000
MIXED_N = 1024


def mixed_workload(seed=20240601):
    """40% add, 20% remove, 30% query, 10% neighbours over n=1024.

    Half of the removals and queries target a live edge so that tombstones
    and positive lookups are exercised as much as misses.
    """
    rng = random.Random(seed)
    kinds = rng.choices("arqn", weights=[40, 20, 30, 10], k=MIXED_OPS)
    return rng, kinds


def run_mixed(check_every_op):
    rng, kinds = mixed_workload()
    g = DynamicGraph(epsilon=0.25, k=2)
    model = set()
    out_adj = {}
    live = []  # live edges for targeted picks; lazily pruned
    mismatches = []
    violations = []
    maintenance = 0

    def pick():
        while live:
            i = rng.randrange(len(live))
            e = live[i]
            if e in model:
                return e
            live[i] = live[-1]
            live.pop()
        return rng.randrange(MIXED_N), rng.randrange(MIXED_N)

    t0 = time.perf_counter()
    for step, kind in enumerate(kinds):
        events = g.counters.flushes + g.counters.full_rebuilds
        if kind == "n":
            u = rng.randrange(MIXED_N)
            got, want = g.neighbors(u), sorted(out_adj.get(u, ()))
            e = None
        else:
            e = pick() if kind in "rq" and rng.random() < 0.5 else (
                rng.randrange(MIXED_N), rng.randrange(MIXED_N))
            if kind == "a":
                got, want = g.add_edge(*e), e not in model
                if want:
                    model.add(e)
                    out_adj.setdefault(e[0], set()).add(e[1])
                    live.append(e)
            elif kind == "r":
                got, want = g.remove_edge(*e), e in model
                if want:
                    model.discard(e)
                    out_adj[e[0]].discard(e[1])
            else:
                got, want = g.contains(*e), e in model
        if got != want:
            mismatches.append((step, kind, e, got, want))
        if check_every_op:
            try:
                g.check_invariants()
                if g.m != len(model):
                    raise AssertionError(f"m={g.m}, oracle holds {len(model)}")
                if e is not None and len(g.locate(*e)) != (e in model):
                    raise AssertionError(f"{e} stored in sets {g.locate(*e)}")
                if g.counters.flushes + g.counters.full_rebuilds != events:
                    maintenance += 1
                    g.check_invariants(full=True)
                    if set(g.edges()) != model:
                        raise AssertionError("edge set differs from oracle after maintenance")
            except AssertionError as exc:
                violations.append((step, kind, str(exc)))
    elapsed = time.perf_counter() - t0
    if set(g.edges()) != model:
        mismatches.append(("final", "edges", None, None, None))
    return g, elapsed, mismatches, violations, maintenance


def test_criterion_1_oracle_equivalence():
    g, elapsed, mismatches, _, _ = run_mixed(check_every_op=False)
    ok = not mismatches and elapsed < 60
    record_criterion(
        1, "oracle equivalence", ok,
        f"{MIXED_OPS} ops, {len(mismatches)} mismatches, {elapsed:.1f}s (limit 60s), "
        f"final m={g.m}, flushes={g.counters.flushes}, rebuilds={g.counters.full_rebuilds}")
    assert not mismatches, mismatches[:5]
    assert elapsed < 60


def test_criterion_2_set_operation_canonicality():
    rng = np.random.default_rng(7)
    bad = {"union": 0, "intersection": 0, "difference": 0}
    for _ in range(1000):
        sets = []
        for _ in range(2):
            size = int(rng.integers(0, 2049))
            keys = np.unique(rng.integers(0, 256 * 256, size=size))
            sets.append({(int(x) // 256, int(x) % 256) for x in keys})
        a, b = sets
        ta, tb = K2Tree.build(256, 2, a), K2Tree.build(256, 2, b)
        for name, got, want in (
            ("union", ta.union(tb), a | b),
            ("intersection", ta.intersection(tb), a & b),
            ("difference", ta.difference(tb), a - b),
        ):
            if got.serialize() != K2Tree.build(256, 2, want).serialize():
                bad[name] += 1
    ok = not any(bad.values())
    record_criterion(2, "set-operation canonicality", ok,
                     f"1000 pairs, byte mismatches {bad}")
    assert ok


@pytest.fixture(scope="module")
def dm50k(tmp_path_factory):
    edges = generate(GeneratorConfig(50_000, 0.5, 0))
    path = tmp_path_factory.mktemp("dm") / "dm50k.txt"
    write_edge_list(edges, path)
    return path, edges


def test_criterion_3_space_parity(dm50k):
    _, edges = dm50k
    g = DynamicGraph(epsilon=0.25, k=2)
    for u, v in edges:
        g.add_edge(u, v)
    dynamic = len(g.save())
    static = len(K2Tree.build(50_000, 2, edges).serialize())
    ratio = dynamic / static
    ok = abs(ratio - 1) <= 0.15
    record_criterion(3, "space parity", ok,
                     f"dm50k p=0.5: {len(edges)} edges, saved {dynamic} B vs static {static} B, "
                     f"ratio {ratio:.4f} (limit 1 +/- 0.15)")
    assert ok


class WatchedGraph(DynamicGraph):
    """Records slot sizes around every removal."""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.log = []

    def remove_edge(self, u, v):
        before = self.stats()
        events = self.counters.flushes + self.counters.full_rebuilds
        ok = super().remove_edge(u, v)
        maintained = self.counters.flushes + self.counters.full_rebuilds != events
        self.log.append((before, self.stats(), maintained))
        return ok


def test_criterion_4_deletion_space_monotonicity(dm50k):
    path, edges = dm50k
    g = WatchedGraph(epsilon=0.25, k=2)
    for u, v in edges:
        g.add_edge(u, v)
    initial = g.stats()
    report = bench_delete(str(path), 0.5, seed=0, graph=g)
    grown_slots = 0
    grown_total = 0
    batches = 1
    for before, after, maintained in g.log:
        if maintained:
            batches += 1
        elif any(a > b for a, b in zip(after.slot_bytes, before.slot_bytes)):
            grown_slots += 1
        if after.serialized_size > before.serialized_size:
            grown_total += 1
    ok = (report.successes == report.op_count == len(set(edges)) // 2
          and grown_slots == 0 and grown_total == 0)
    record_criterion(
        4, "deletion space monotonicity", ok,
        f"{report.successes} removals in {batches} batches, slot growth within a batch: "
        f"{grown_slots}, total-size growth: {grown_total}, "
        f"bytes {initial.serialized_size} -> {report.stats.serialized_size}")
    assert ok


def test_criterion_5_amortized_scaling():
    rng = np.random.default_rng(11)
    n = 2**14
    keys = rng.choice(n * n, size=2**20, replace=False)
    us, vs = (keys // n).tolist(), (keys % n).tolist()
    g = DynamicGraph(epsilon=0.25, k=2)
    add = g.add_edge
    split = 2**17
    t0 = time.perf_counter_ns()
    for u, v in zip(us[:split], vs[:split]):
        add(u, v)
    t1 = time.perf_counter_ns()
    for u, v in zip(us[split:], vs[split:]):
        add(u, v)
    t2 = time.perf_counter_ns()
    mean_small = (t1 - t0) / split
    mean_large = (t2 - t0) / 2**20
    tail = (t2 - t1) / (2**20 - split)
    ratio = mean_large / mean_small
    ok = g.m == 2**20 and ratio <= 3
    record_criterion(
        5, "amortized scaling", ok,
        f"mean add {mean_small / 1e3:.1f}us at m=2^17, {mean_large / 1e3:.1f}us at m=2^20, "
        f"ratio {ratio:.2f} (limit 3); mean over inserts 2^17..2^20 alone "
        f"{tail / 1e3:.1f}us")
    assert ok


class SlotEntryGraph(DynamicGraph):
    """Tracks, per edge, every static slot it has been merged into."""

    def __init__(self, keys, side, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.side = side
        self.keys = np.sort(keys)
        self.entries = np.zeros(len(keys), dtype=np.int64)
        self.visited = np.zeros(len(keys), dtype=np.int64)
        self.reentries = 0

    def _key_index(self, tree):
        u, v = tree.edge_arrays()
        return np.searchsorted(self.keys, u * self.side + v)

    def _flush(self):
        old = list(self.slots)
        super()._flush()
        j = next(i for i in range(1, self.r + 1)
                 if self.slots[i] is not None and self.slots[i] is not old[i])
        now = self._key_index(self.slots[j])
        if old[j] is not None:
            now = np.setdiff1d(now, self._key_index(old[j]), assume_unique=True)
        bit = np.int64(1) << j
        self.reentries += int(np.count_nonzero(self.visited[now] & bit))
        self.visited[now] |= bit
        self.entries[now] += 1


def test_criterion_6_rebuild_accounting():
    rng = np.random.default_rng(12)
    n = 2**14
    count = 10**6
    keys = rng.choice(n * n, size=count, replace=False)
    g = SlotEntryGraph(keys, n, epsilon=0.25, k=2)
    for u, v in zip((keys // n).tolist(), (keys % n).tolist()):
        g.add_edge(u, v)
    worst = int(g.entries.max())
    ok = (g.r == 8 and worst <= g.r and g.reentries == 0
          and max(g.counters.max_moves) <= g.r)
    hist = np.bincount(g.entries).tolist()
    record_criterion(
        6, "rebuild accounting", ok,
        f"{count} inserts, r={g.r}, max slot entries per edge {worst}, "
        f"re-entries into a slot {g.reentries}, entries histogram {hist}, "
        f"flushes={g.counters.flushes}")
    assert ok


def test_criterion_7_invariants_every_operation():
    g, elapsed, mismatches, violations, maintenance = run_mixed(check_every_op=True)
    ok = not violations and not mismatches
    record_criterion(
        7, "invariant suite", ok,
        f"{MIXED_OPS} ops checked, {len(violations)} violations, "
        f"{maintenance} full checks after flush/rebuild, {elapsed:.1f}s")
    assert not violations, violations[:5]
    assert not mismatches


def random_tree(rng):
    k = int(rng.choice([2, 3, 4]))
    n = int(rng.integers(1, 3000))
    m = int(rng.integers(0, 3000))
    u, v = rng.integers(0, n, size=m), rng.integers(0, n, size=m)
    t = K2Tree.build(n, k, (u, v))
    for i in rng.choice(m, size=min(m, int(rng.integers(0, 50))), replace=False).tolist():
        t.delete(int(u[i]), int(v[i]))
    return t


def random_collection(rng):
    g = DynamicGraph(epsilon=float(rng.choice([0.25, 0.5, 1.0, 0.3])),
                     k=int(rng.choice([2, 3])))
    n = int(rng.integers(2, 400))
    for _ in range(int(rng.integers(0, 3000))):
        u, v = rng.integers(0, n, size=2).tolist()
        if rng.random() < 0.25:
            g.remove_edge(u, v)
        else:
            g.add_edge(u, v)
    return g


def test_criterion_8_round_trips(tmp_path):
    rng = np.random.default_rng(8)
    tree_bad = 0
    for _ in range(100):
        t = random_tree(rng)
        blob = t.serialize()
        back = K2Tree.deserialize(blob)
        if back.serialize() != blob or list(back.edges()) != list(t.edges()):
            tree_bad += 1
    coll_bad = 0
    for _ in range(100):
        g = random_collection(rng)
        blob = g.save()
        back = DynamicGraph.load(blob)
        if back.save() != blob or list(back.edges()) != list(g.edges()):
            coll_bad += 1
    gen_bad = 0
    for seed in range(10):
        cfg = GeneratorConfig(3000, 0.5, seed)
        a, b = tmp_path / f"a{seed}.txt", tmp_path / f"b{seed}.txt"
        write_edge_list(generate(cfg), a)
        write_edge_list(generate(cfg), b)
        if a.read_bytes() != b.read_bytes():
            gen_bad += 1
    ok = tree_bad == coll_bad == gen_bad == 0
    record_criterion(
        8, "round-trips", ok,
        f"tree failures {tree_bad}/100, collection failures {coll_bad}/100, "
        f"generator nondeterminism {gen_bad}/10 seeds")
    assert ok
