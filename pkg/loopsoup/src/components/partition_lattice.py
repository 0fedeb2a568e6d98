"""Set partitions, the refinement order and the Moebius weights of the partition lattice.

Orientation: ``refines(sigma, pi)`` (written sigma ⪰ pi) means sigma is finer than pi,
i.e. every block of sigma sits inside a block of pi. Cluster partitions of a loop
soup are compared to target partitions in this direction everywhere.
"""

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, Iterable, Iterator, List, Sequence, Tuple

from sympy import bell

from loopsoup.src.constants import BELL_10
from loopsoup.src.utils.exception import LoopSoupException, domain_error


@lru_cache(maxsize=None)
def bell_number(m: int) -> int:
    return int(bell(m))


@dataclass(frozen=True)
class Partition:
    """A partition of a finite vertex set, stored with blocks sorted by their smallest element."""
    blocks: Tuple[Tuple[int, ...], ...]
    _index: Dict[int, int] = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        canonical = tuple(sorted((tuple(sorted(set(int(v) for v in b))) for b in self.blocks),
                                 key=lambda b: b[0] if b else -1))
        index: Dict[int, int] = {}
        for i, block in enumerate(canonical):
            if not block:
                raise domain_error("partition blocks must be nonempty", "InvalidPartition")
            for v in block:
                if v in index:
                    raise domain_error("partition blocks must be disjoint", "InvalidPartition", vertex=v)
                index[v] = i
        object.__setattr__(self, "blocks", canonical)
        object.__setattr__(self, "_index", index)

    @classmethod
    def from_blocks(cls, blocks: Iterable[Iterable[int]]) -> "Partition":
        return cls(tuple(tuple(b) for b in blocks))

    @classmethod
    def from_labels(cls, labels: Sequence[int], vertices: Sequence[int] = None) -> "Partition":
        """Group `vertices` (default 0..len-1) by label."""
        vertices = range(len(labels)) if vertices is None else vertices
        groups: Dict[int, List[int]] = {}
        for v, label in zip(vertices, labels):
            groups.setdefault(label, []).append(v)
        return cls(tuple(tuple(g) for g in groups.values()))

    @classmethod
    def singletons(cls, n: int) -> "Partition":
        return cls(tuple((v,) for v in range(n)))

    @classmethod
    def single_block(cls, n: int) -> "Partition":
        return cls((tuple(range(n)),))

    @classmethod
    def from_json(cls, data: Sequence[Sequence[int]]) -> "Partition":
        return cls.from_blocks(data)

    def to_json(self) -> List[List[int]]:
        return [list(b) for b in self.blocks]

    @property
    def ground(self) -> frozenset:
        return frozenset(self._index)

    @property
    def ground_size(self) -> int:
        return len(self._index)

    @property
    def sizes(self) -> Tuple[int, ...]:
        return tuple(len(b) for b in self.blocks)

    def block_of(self, v: int) -> int:
        return self._index[v]

    def __len__(self) -> int:
        return len(self.blocks)


def full_partition(blocks: Iterable[Iterable[int]], n: int) -> Partition:
    """A partition of {0..n-1}; raises if `blocks` do not cover it exactly."""
    pi = Partition.from_blocks(blocks)
    if pi.ground != frozenset(range(n)):
        raise domain_error("blocks do not cover {0..n-1}", "PartitionMismatch", n=n, ground_size=pi.ground_size)
    return pi


def refines(sigma: Partition, pi: Partition) -> bool:
    """True iff each block of sigma lies inside some block of pi."""
    if sigma.ground != pi.ground:
        raise domain_error("partitions live on different ground sets", "PartitionMismatch",
                           sigma=sigma.ground_size, pi=pi.ground_size)
    return all(len({pi.block_of(v) for v in block}) == 1 for block in sigma.blocks)


def restrict(pi: Partition, subset: Iterable[int]) -> Partition:
    """pi|A: the nonempty intersections of the blocks of pi with A."""
    subset = sorted(set(subset))
    if not subset:
        raise domain_error("cannot restrict to an empty set", "DomainError")
    missing = [v for v in subset if v not in pi.ground]
    if missing:
        raise domain_error("restriction set leaves the ground set", "PartitionMismatch", missing=missing[:5])
    return Partition.from_labels([pi.block_of(v) for v in subset], subset)


def restricted_growth_strings(m: int) -> Iterator[List[int]]:
    """All restricted growth strings of length m (a_0 = 0, a_i <= 1 + max(a_0..a_{i-1})), in lexicographic order."""
    if m == 0:
        yield []
        return
    labels = [0] * m
    maxima = [0] * m

    def extend(i: int) -> Iterator[List[int]]:
        if i == m:
            yield list(labels)
            return
        for label in range(maxima[i - 1] + 2):
            labels[i] = label
            maxima[i] = max(maxima[i - 1], label)
            yield from extend(i + 1)

    yield from extend(1)


def enumerate_all(n: int, cap: int = 10) -> Iterator[Partition]:
    """All Bell(n) partitions of {0..n-1}. The cap is checked on the call, not on the first iteration."""
    if n > cap:
        raise LoopSoupException(ValueError(f"enumeration of all partitions of {n} points exceeds the cap {cap}"),
                                error_type="EnumerationCapExceeded", context={"n": n, "required": bell_number(n)})
    return _iter_all(n)


def _iter_all(n: int) -> Iterator[Partition]:
    for labels in restricted_growth_strings(n):
        yield Partition.from_labels(labels)


def _block_partitions(block: Tuple[int, ...]) -> List[Tuple[Tuple[int, ...], ...]]:
    out = []
    for labels in restricted_growth_strings(len(block)):
        groups: Dict[int, List[int]] = {}
        for v, label in zip(block, labels):
            groups.setdefault(label, []).append(v)
        out.append(tuple(tuple(g) for g in groups.values()))
    return out


def refinement_count(pi: Partition) -> int:
    return math.prod(bell_number(size) for size in pi.sizes)


def enumerate_refinements(pi: Partition, cap: int = BELL_10) -> Iterator[Partition]:
    """Every partition finer than or equal to pi, once each."""
    required = refinement_count(pi)
    if required > cap:
        raise LoopSoupException(ValueError(f"{required} refinements exceed the cap {cap}"),
                                error_type="EnumerationCapExceeded", context={"required": required, "cap": cap})
    return _iter_refinements(pi)


def _iter_refinements(pi: Partition) -> Iterator[Partition]:
    per_block = [_block_partitions(block) for block in pi.blocks]
    for choice in itertools.product(*per_block):
        yield Partition(tuple(sub for parts in choice for sub in parts))


def mobius_weight(pi_tilde: Partition, pi: Partition) -> int:
    """(-1)^(|pi~| - |pi|) prod_i (|pi~ restricted to B_i| - 1)! for pi~ finer than pi."""
    if not refines(pi_tilde, pi):
        raise domain_error("pi_tilde is not finer than pi", "IncomparablePartitions")
    counts = [0] * len(pi)
    for block in pi_tilde.blocks:
        counts[pi.block_of(block[0])] += 1
    sign = -1 if (len(pi_tilde) - len(pi)) % 2 else 1
    return sign * math.prod(math.factorial(c - 1) for c in counts)
