"""Semi-dynamic compressed graphs from collections of static k^2-trees."""
from .bitvec import BitVector, ClearableBitVector, RankBitVector, build_rank
from .dyngraph import DynamicGraph, EdgeBuffer, capacity, tombstone_threshold
from .genmodel import GeneratorConfig, generate, read_edge_list, write_edge_list
from .k2tree import K2Tree

__all__ = [
    "BitVector",
    "ClearableBitVector",
    "DynamicGraph",
    "EdgeBuffer",
    "GeneratorConfig",
    "K2Tree",
    "RankBitVector",
    "build_rank",
    "capacity",
    "generate",
    "read_edge_list",
    "tombstone_threshold",
    "write_edge_list",
]
