"""Command line front end.

``k2graph run`` reads one instruction per line from stdin::

    a U V     add edge            d U V     delete edge
    q U V     query edge (1/0)    n U       out-neighbours of U
    r V       in-neighbours of V  s         stats as key=value lines
    w PATH    save collection     x         quit

The ``bench-*`` commands time one operation family over an edge-list
file and print a ``key=value`` report.
"""
from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass, field
from typing import IO, Sequence

import numpy as np

from .dyngraph import CollectionFormatError, DynamicGraph, GraphStats
from .genmodel import GeneratorConfig, generate, read_edge_list, write_edge_list, write_meta

OPCODES = {"a": 2, "d": 2, "q": 2, "n": 1, "r": 1, "s": 0, "w": 1, "x": 0}


@dataclass
class Instruction:
    opcode: str
    operands: tuple = ()


def parse_instruction(line: str) -> Instruction | None:
    """Parse one protocol line; returns None for blank and comment lines."""
    parts = line.split()
    if not parts or parts[0].startswith("#"):
        return None
    op, args = parts[0], parts[1:]
    if op not in OPCODES:
        raise ValueError(f"unknown instruction {op!r}")
    if len(args) != OPCODES[op]:
        raise ValueError(f"{op!r} takes {OPCODES[op]} operand(s), got {len(args)}")
    if op == "w":
        return Instruction(op, (args[0],))
    try:
        ids = tuple(int(a) for a in args)
    except ValueError:
        raise ValueError(f"vertex ids must be integers: {' '.join(args)}") from None
    if any(x < 0 for x in ids):
        raise ValueError("vertex ids must be non-negative")
    return Instruction(op, ids)


def run_loop(graph: DynamicGraph, instream: IO[str], out: IO[str], err: IO[str]) -> int:
    for lineno, line in enumerate(instream, 1):
        try:
            ins = parse_instruction(line)
        except ValueError as exc:
            print(f"error: line {lineno}: {exc}", file=err)
            continue
        if ins is None:
            continue
        op, args = ins.opcode, ins.operands
        if op == "a":
            graph.add_edge(*args)
        elif op == "d":
            graph.remove_edge(*args)
        elif op == "q":
            print("1" if graph.contains(*args) else "0", file=out)
        elif op == "n":
            print(" ".join(map(str, graph.neighbors(*args))), file=out)
        elif op == "r":
            print(" ".join(map(str, graph.reverse_neighbors(*args))), file=out)
        elif op == "s":
            print("\n".join(graph.stats().as_lines()), file=out)
        elif op == "w":
            try:
                with open(args[0], "wb") as fh:
                    fh.write(graph.save())
            except OSError as exc:
                print(f"error: line {lineno}: {exc}", file=err)
        elif op == "x":
            break
    return 0


@dataclass
class BenchReport:
    operation: str
    op_count: int
    total_ns: int
    successes: int
    stats: GraphStats
    params: dict = field(default_factory=dict)

    @property
    def mean_ns(self) -> float:
        return self.total_ns / self.op_count if self.op_count else 0.0

    @property
    def serialized_size(self) -> int:
        return self.stats.serialized_size

    def as_lines(self) -> list[str]:
        lines = [
            f"operation={self.operation}",
            f"op_count={self.op_count}",
            f"total_ns={self.total_ns}",
            f"mean_ns={self.mean_ns:.1f}",
            f"successes={self.successes}",
        ]
        lines += [f"{k}={v}" for k, v in self.params.items()]
        lines += [f"final.{line}" for line in self.stats.as_lines()]
        return lines


def _load_graph(edges: list[tuple[int, int]], epsilon: float, k: int) -> DynamicGraph:
    g = DynamicGraph(epsilon=epsilon, k=k)
    for u, v in edges:
        g.add_edge(u, v)
    return g


def _distinct(edges: list[tuple[int, int]]) -> list[tuple[int, int]]:
    return list(dict.fromkeys(edges))


def _sample_size(fraction: float, population: int) -> int:
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"sample fraction must be in [0, 1], got {fraction}")
    return int(fraction * population)


def bench_add(path: str, epsilon: float = 0.25, k: int = 2) -> BenchReport:
    """Insert every edge of the file in order and time the insertions."""
    edges = read_edge_list(path)
    g = DynamicGraph(epsilon=epsilon, k=k)
    add = g.add_edge
    ok = 0
    t0 = time.perf_counter_ns()
    for u, v in edges:
        ok += add(u, v)
    total = time.perf_counter_ns() - t0
    return BenchReport("add", len(edges), total, ok, g.stats(),
                       {"dataset": path, "epsilon": epsilon, "k": k})


def deletion_sample(edges: list[tuple[int, int]], fraction: float,
                    seed: int) -> list[tuple[int, int]]:
    """Uniform sample without replacement of the distinct edges."""
    distinct = _distinct(edges)
    rng = np.random.Generator(np.random.PCG64(seed))
    picks = rng.choice(len(distinct), size=_sample_size(fraction, len(distinct)), replace=False)
    return [distinct[i] for i in picks.tolist()]


def bench_delete(path: str, fraction: float = 0.5, seed: int = 0, epsilon: float = 0.25,
                 k: int = 2, graph: DynamicGraph | None = None) -> BenchReport:
    """Insert all edges, then time the removal of a sample of them."""
    edges = read_edge_list(path)
    g = graph if graph is not None else _load_graph(edges, epsilon, k)
    victims = deletion_sample(edges, fraction, seed)
    remove = g.remove_edge
    ok = 0
    t0 = time.perf_counter_ns()
    for u, v in victims:
        ok += remove(u, v)
    total = time.perf_counter_ns() - t0
    return BenchReport("delete", len(victims), total, ok, g.stats(),
                       {"dataset": path, "epsilon": g.epsilon, "k": g.k, "seed": seed,
                        "sample": fraction})


def bench_list(path: str, fraction: float = 0.5, seed: int = 0, epsilon: float = 0.25,
               k: int = 2) -> BenchReport:
    """Insert all edges, then time neighbourhood listing of sampled vertices."""
    edges = read_edge_list(path)
    g = _load_graph(edges, epsilon, k)
    nvert = 1 + max((max(u, v) for u, v in edges), default=-1)
    rng = np.random.Generator(np.random.PCG64(seed))
    picks = rng.choice(nvert, size=_sample_size(fraction, nvert), replace=False).tolist()
    listed = 0
    t0 = time.perf_counter_ns()
    for u in picks:
        listed += len(g.neighbors(u))
    total = time.perf_counter_ns() - t0
    return BenchReport("list", len(picks), total, listed, g.stats(),
                       {"dataset": path, "epsilon": epsilon, "k": k, "seed": seed,
                        "sample": fraction})


def query_sample(edges: list[tuple[int, int]], fraction: float,
                 seed: int) -> tuple[list[tuple[int, int]], int]:
    """Sampled edges mixed with as many random non-edges, shuffled.

    Returns the queries and how many of them are real edges.
    """
    distinct = _distinct(edges)
    present = set(distinct)
    rng = np.random.Generator(np.random.PCG64(seed))
    picks = rng.choice(len(distinct), size=_sample_size(fraction, len(distinct)), replace=False)
    queries = [distinct[i] for i in picks.tolist()]
    nvert = 1 + max((max(u, v) for u, v in distinct), default=-1)
    absent: list[tuple[int, int]] = []
    if nvert and len(present) < nvert * nvert:
        while len(absent) < len(queries):
            u, v = rng.integers(nvert, size=2).tolist()
            if (u, v) not in present:
                absent.append((u, v))
    n_present = len(queries)
    queries += absent
    order = rng.permutation(len(queries)).tolist()
    return [queries[i] for i in order], n_present


def bench_query(path: str, fraction: float = 0.5, seed: int = 0, epsilon: float = 0.25,
                k: int = 2) -> BenchReport:
    """Insert all edges, then time membership queries on edges and non-edges."""
    edges = read_edge_list(path)
    g = _load_graph(edges, epsilon, k)
    queries, n_present = query_sample(edges, fraction, seed)
    contains = g.contains
    hits = 0
    t0 = time.perf_counter_ns()
    for u, v in queries:
        hits += contains(u, v)
    total = time.perf_counter_ns() - t0
    return BenchReport("query", len(queries), total, hits, g.stats(),
                       {"dataset": path, "epsilon": epsilon, "k": k, "seed": seed,
                        "sample": fraction, "present": n_present})


def _fraction(text: str) -> float:
    x = float(text)
    if not 0.0 <= x <= 1.0:
        raise argparse.ArgumentTypeError(f"must be in [0, 1], got {text}")
    return x


def _epsilon(text: str) -> float:
    x = float(text)
    if not 0.0 < x <= 2.0:
        raise argparse.ArgumentTypeError(f"must be in (0, 2], got {text}")
    return x


def _arity(text: str) -> int:
    x = int(text)
    if not 2 <= x <= 255:
        raise argparse.ArgumentTypeError(f"must be in [2, 255], got {text}")
    return x


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="k2graph", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def graph_opts(p):
        p.add_argument("--epsilon", type=_epsilon, default=0.25)
        p.add_argument("--k", type=_arity, default=2)

    run = sub.add_parser("run", help="stdin instruction loop")
    graph_opts(run)
    run.add_argument("--load", metavar="PATH", help="start from a saved collection")

    for name in ("add", "delete", "list", "query"):
        p = sub.add_parser(f"bench-{name}", help=f"time {name} operations over an edge list")
        p.add_argument("dataset")
        graph_opts(p)
        if name != "add":
            p.add_argument("--sample", type=_fraction, default=0.5)
            p.add_argument("--seed", type=int, default=0)

    gen = sub.add_parser("generate", help="write a partial duplication graph")
    gen.add_argument("out")
    gen.add_argument("--vertices", type=int, required=True)
    gen.add_argument("--p", type=_fraction, default=0.5)
    gen.add_argument("--seed", type=int, default=0)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command == "run":
        if args.load:
            try:
                with open(args.load, "rb") as fh:
                    graph = DynamicGraph.load(fh.read())
            except (OSError, CollectionFormatError) as exc:
                print(f"error: {exc}", file=sys.stderr)
                return 1
        else:
            graph = DynamicGraph(epsilon=args.epsilon, k=args.k)
        return run_loop(graph, sys.stdin, sys.stdout, sys.stderr)

    if args.command == "generate":
        try:
            cfg = GeneratorConfig(args.vertices, args.p, args.seed)
        except ValueError as exc:
            parser.error(str(exc))
        edges = generate(cfg)
        try:
            write_edge_list(edges, args.out)
            write_meta(cfg, args.out, len(edges))
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        return 0

    op = args.command.removeprefix("bench-")
    try:
        if op == "add":
            report = bench_add(args.dataset, args.epsilon, args.k)
        else:
            bench = {"delete": bench_delete, "list": bench_list, "query": bench_query}[op]
            report = bench(args.dataset, args.sample, args.seed, args.epsilon, args.k)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print("\n".join(report.as_lines()))
    return 0


if __name__ == "__main__":
    sys.exit(main())
