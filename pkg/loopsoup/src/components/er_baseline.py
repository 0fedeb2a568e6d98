"""Erdos-Renyi G(n, c/n) baseline: sampling, isolated-tree censuses and their factorial moments."""

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Tuple, Union

import networkx as nx
import numpy as np

from loopsoup.src.utils.exception import domain_error
from loopsoup.src.utils.rng import child_int_seed

Number = Union[float, Fraction]

# 2^binom(6, 2) graphs is the largest exhaustive sum we allow
EXHAUSTIVE_MAX_N = 6


@dataclass(frozen=True)
class ErParams:
    n: int
    c: float

    def __post_init__(self):
        if self.n < 2 or not 0 < self.c < self.n:
            raise domain_error("need n >= 2 and 0 < c < n", "DomainError", n=self.n, c=self.c)

    @property
    def p(self) -> float:
        return self.c / self.n


def sample_gnp(rng: np.random.Generator, params: ErParams) -> nx.Graph:
    """G(n, c/n) by geometric edge skipping; `graph.edges` is the sampled edge list."""
    return nx.fast_gnp_random_graph(params.n, params.p, seed=child_int_seed(rng))


def _component_shapes(graph: nx.Graph):
    degree = dict(graph.degree())
    for component in nx.connected_components(graph):
        yield len(component), sum(degree[v] for v in component) // 2


def isolated_tree_census(graph: nx.Graph, d: int) -> int:
    """Connected components with d vertices and d-1 edges."""
    if d < 1:
        raise domain_error("d must be positive", "DomainError", d=d)
    return sum(1 for size, edges in _component_shapes(graph) if size == d and edges == d - 1)


def isolated_cluster_census(graph: nx.Graph, d: int) -> int:
    if d < 1:
        raise domain_error("d must be positive", "DomainError", d=d)
    return sum(1 for size, _ in _component_shapes(graph) if size == d)


def er_tree_factorial_moment(n: int, c: Number, d: int, k: int, uncorrected_form: bool = False) -> Number:
    """E[(T_d)_k] for the number T_d of isolated trees of size d in G(n, c/n).

    Exact rationals come out when `c` is a Fraction. `uncorrected_form=True` evaluates the
    expression as usually displayed, without the (d^(d-2))^k spanning-tree count and
    with the within-block exponent d(d-1)/2 - d + 1 counted once instead of k times.
    """
    if d < 1 or k < 0:
        raise domain_error("need d >= 1 and k >= 0", "DomainError", d=d, k=k)
    if k * d > n:
        return Fraction(0) if isinstance(c, Fraction) else 0.0
    p = c / n
    choose = math.prod(math.comb(n - j * d, d) for j in range(k))
    between = k * d * (n - k * d) + k * (k - 1) * d * d // 2
    inside = d * (d - 1) // 2 - (d - 1)
    if uncorrected_form:
        return choose * p ** (k * (d - 1)) * (1 - p) ** (between + inside)
    cayley = d ** (d - 2) if d >= 2 else 1
    return choose * (cayley * p ** (d - 1) * (1 - p) ** inside) ** k * (1 - p) ** between


def er_cluster_count_asymptotic(n: int, c: float, d: int) -> float:
    """n d^(d-2) c^(d-1) e^(-cd) / d!, the leading order of the mean cluster (and tree) census."""
    cayley = d ** (d - 2) if d >= 2 else 1
    return n * cayley * c ** (d - 1) * math.exp(-c * d) / math.factorial(d)


@lru_cache(maxsize=EXHAUSTIVE_MAX_N + 1)
def _all_graph_shapes(n: int) -> Tuple[Tuple[int, Tuple[Tuple[int, int], ...]], ...]:
    """(edge count, component shapes) for each of the 2^binom(n, 2) graphs on n labelled vertices."""
    pairs = list(itertools.combinations(range(n), 2))
    shapes = []
    for mask in range(1 << len(pairs)):
        graph = nx.Graph()
        graph.add_nodes_from(range(n))
        graph.add_edges_from(pair for i, pair in enumerate(pairs) if mask >> i & 1)
        shapes.append((graph.number_of_edges(), tuple(_component_shapes(graph))))
    return tuple(shapes)


def er_exhaustive_factorial_moment(n: int, p: Fraction, d: int, k: int, trees_only: bool = True) -> Fraction:
    """Exact E[(T_d)_k] by summing over every graph on n labelled vertices."""
    if n > EXHAUSTIVE_MAX_N:
        raise domain_error(f"exhaustive enumeration is limited to n <= {EXHAUSTIVE_MAX_N}", "EnumerationCapExceeded",
                           n=n)
    p = Fraction(p)
    total_pairs = n * (n - 1) // 2
    weights = [p ** m * (1 - p) ** (total_pairs - m) for m in range(total_pairs + 1)]
    total = Fraction(0)
    for edge_count, components in _all_graph_shapes(n):
        count = sum(1 for size, edges in components if size == d and (edges == d - 1 or not trees_only))
        falling = math.prod(range(count - k + 1, count + 1)) if k <= count else 0
        if falling:
            total += weights[edge_count] * falling
    return total
