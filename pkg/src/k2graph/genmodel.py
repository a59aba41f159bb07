"""Partial duplication random graphs and plain-text edge lists."""
from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

PRNG_NAME = "numpy.random.PCG64"
SEED_EDGES = ((0, 1), (1, 0))


class EdgeListError(ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclass(frozen=True)
class GeneratorConfig:
    target_vertices: int
    p: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.target_vertices < 2:
            raise ValueError(f"target_vertices must be >= 2, got {self.target_vertices}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"selection probability p must be in [0, 1], got {self.p}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")


def generate(cfg: GeneratorConfig) -> list[tuple[int, int]]:
    """Directed partial duplication graph, edges in creation order.

    Starting from the 2-cycle on vertices 0 and 1, each step picks an
    existing vertex ``u`` uniformly at random and adds a new vertex ``v``
    that copies every out-edge ``(u, w)`` as ``(v, w)`` and every in-edge
    ``(w, u)`` as ``(w, v)``, each independently with probability ``p``.
    Per step the generator draws the vertex, then one uniform per
    out-edge of ``u``, then one per in-edge, in edge insertion order.
    """
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    out_adj: list[list[int]] = [[1], [0]]
    in_adj: list[list[int]] = [[1], [0]]
    edges = list(SEED_EDGES)
    p = cfg.p
    for v in range(2, cfg.target_vertices):
        u = int(rng.integers(v))
        outs = out_adj[u]
        ins = in_adj[u]
        new_out = [w for w, x in zip(outs, rng.random(len(outs)).tolist()) if x < p] if outs else []
        new_in = [w for w, x in zip(ins, rng.random(len(ins)).tolist()) if x < p] if ins else []
        out_adj.append(new_out)
        in_adj.append(new_in)
        for w in new_out:
            in_adj[w].append(v)
            edges.append((v, w))
        for w in new_in:
            out_adj[w].append(v)
            edges.append((w, v))
    return edges


def read_edge_list(path: str | os.PathLike) -> list[tuple[int, int]]:
    """Parse whitespace-separated ``u v`` lines; blank and ``#`` lines are skipped."""
    edges = []
    with open(path, encoding="ascii") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise EdgeListError(lineno, f"expected 2 fields, got {len(parts)}")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise EdgeListError(lineno, f"not an integer pair: {line!r}") from None
            if u < 0 or v < 0:
                raise EdgeListError(lineno, "negative vertex id")
            edges.append((u, v))
    return edges


def write_edge_list(edges: Iterable[tuple[int, int]], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.writelines(f"{u} {v}\n" for u, v in edges)


def meta_path(path: str | os.PathLike) -> Path:
    return Path(f"{os.fspath(path)}.meta")


def write_meta(cfg: GeneratorConfig, path: str | os.PathLike, edge_count: int) -> Path:
    """Write the ``.meta`` file describing how ``path`` was generated."""
    target = meta_path(path)
    target.write_text(
        "model=partial-duplication-directed\n"
        f"target_vertices={cfg.target_vertices}\n"
        f"p={cfg.p!r}\n"
        f"seed={cfg.seed}\n"
        f"prng={PRNG_NAME}\n"
        f"edges={edge_count}\n",
        encoding="ascii",
    )
    return target
