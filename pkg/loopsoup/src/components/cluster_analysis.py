"""Cluster partition of a loop configuration and the censuses built on it."""

from collections import Counter
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable

import numpy as np

from loopsoup.src.components.loop_sampler import Loop, LoopConfig
from loopsoup.src.components.partition_lattice import Partition
from loopsoup.src.utils.exception import domain_error


class UnionFind:
    """Disjoint sets over 0..n-1 with path halving and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, v: int) -> int:
        parent = self.parent
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]

    def roots(self) -> Iterable[int]:
        return (v for v in range(len(self.parent)) if self.parent[v] == v)


@dataclass(frozen=True)
class ClusterPartition:
    partition: Partition
    built_from: int

    @property
    def n(self) -> int:
        return self.partition.ground_size


@dataclass(frozen=True)
class SizeCensus:
    """|I_d| for every cluster size d that occurs; sum_d d |I_d| = n."""
    counts: Dict[int, int]
    n: int

    def __getitem__(self, d: int) -> int:
        return self.counts.get(d, 0)

    def to_json(self) -> Dict[str, int]:
        return {str(d): c for d, c in sorted(self.counts.items())}


def _merge_loops(config: LoopConfig, n: int) -> UnionFind:
    uf = UnionFind(n)
    for walk in config.walks:
        walk = np.asarray(walk)
        if walk.size and (walk.min() < 0 or walk.max() >= n):
            raise domain_error("loop visits a vertex outside 0..n-1", "VertexOutOfRange",
                               n=n, vertex=int(walk.max() if walk.max() >= n else walk.min()))
        # every edge of a loop joins its vertices, so tying each vertex to the first one is enough
        first = int(walk[0]) if walk.size else 0
        for v in np.unique(walk).tolist():
            uf.union(first, v)
    return uf


def clusters(config: LoopConfig, n: int) -> ClusterPartition:
    """Connected components of the edges traversed by the loops."""
    uf = _merge_loops(config, n)
    labels = [uf.find(v) for v in range(n)]
    return ClusterPartition(partition=Partition.from_labels(labels), built_from=len(config))


def cluster_sizes(config: LoopConfig, n: int) -> np.ndarray:
    """Component sizes straight from union-find, singletons included."""
    uf = _merge_loops(config, n)
    return np.array([uf.size[r] for r in uf.roots()], dtype=np.int64)


def size_census(p: ClusterPartition) -> SizeCensus:
    return SizeCensus(counts=dict(Counter(p.partition.sizes)), n=p.n)


def census_from_sizes(sizes: np.ndarray, n: int) -> SizeCensus:
    values, counts = np.unique(sizes, return_counts=True)
    return SizeCensus(counts={int(d): int(c) for d, c in zip(values, counts)}, n=n)


def max_cluster_size(p: ClusterPartition) -> int:
    return max(p.partition.sizes)


def support(loop: Loop) -> FrozenSet[int]:
    return loop.support()


def count_isolated_dgons(config: LoopConfig, n: int, d: int) -> int:
    """Clusters of size d whose loops all trace the same d-gon, i.e. one d-gon up to rotation and repetition."""
    if d < 2:
        raise domain_error("a d-gon has d >= 2", "DomainError", d=d)
    uf = _merge_loops(config, n)
    roots_by_cluster: Dict[int, set] = {}
    for loop in config.loops():
        root, _ = loop.primitive()
        roots_by_cluster.setdefault(uf.find(loop.vertices[0]), set()).add(root)
    count = 0
    for cluster_root, roots in roots_by_cluster.items():
        if uf.size[cluster_root] != d or len(roots) != 1:
            continue
        (root,) = roots
        if len(root) == d:
            count += 1
    return count
