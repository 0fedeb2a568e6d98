"""Exact sampling of the Poisson loop ensemble with intensity alpha * nu.

A loop is drawn as a pointed closed walk: its length k with probability
proportional to tr(P^k)/k, its base point proportionally to (P^k)_xx, then a
random-walk bridge conditioned to come back to the base point after k steps.
Forgetting the base point gives nu normalised, multiplicity included. On K_n
every closed walk of a given length has the same weight, so the base point is
uniform and the bridge only needs the two-valued closed-walk counts.
"""

import json
import math
import time
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from loopsoup.src.components.exact_engine import loop_mass
from loopsoup.src.components.graph_model import (GraphSpec, build_transition, complete_trace_powers,
                                                 log_det_i_minus_theta_p)
from loopsoup.src.config_entity.config_params import ModelParams, SamplerSettings
from loopsoup.src.utils.exception import LoopSoupException, domain_error
from loopsoup.src.utils.logger import logger

# beyond this many remaining steps the (-1)^m correction of the bridge is below double precision
EXACT_BRIDGE_STEPS = 64


def least_rotation(word: Sequence[int]) -> int:
    """Start index of the lexicographically least rotation (Booth)."""
    doubled = list(word) + list(word)
    failure = [-1] * len(doubled)
    k = 0
    for j in range(1, len(doubled)):
        sj = doubled[j]
        i = failure[j - k - 1]
        while i != -1 and sj != doubled[k + i + 1]:
            if sj < doubled[k + i + 1]:
                k = j - i - 1
            i = failure[i]
        if sj != doubled[k + i + 1]:
            if sj < doubled[k]:
                k = j
            failure[j - k] = -1
        else:
            failure[j - k] = i + 1
    return k


def smallest_period(word: Sequence[int]) -> int:
    """Length of the shortest w with word = w^m, from the prefix function."""
    m = len(word)
    prefix = [0] * m
    for i in range(1, m):
        j = prefix[i - 1]
        while j and word[i] != word[j]:
            j = prefix[j - 1]
        if word[i] == word[j]:
            j += 1
        prefix[i] = j
    period = m - prefix[-1]
    return period if m % period == 0 else m


@dataclass(frozen=True)
class Loop:
    """An unrooted discrete loop, stored in its least rotation."""
    vertices: Tuple[int, ...]

    def __post_init__(self):
        word = tuple(int(v) for v in self.vertices)
        if len(word) < 2:
            raise domain_error("a loop has at least two vertices", "DomainError", length=len(word))
        if any(word[i] == word[i - 1] for i in range(len(word))):
            raise domain_error("a loop never stays at a vertex", "DomainError", loop=list(word[:10]))
        start = least_rotation(word)
        object.__setattr__(self, "vertices", word[start:] + word[:start])

    @classmethod
    def from_walk(cls, walk: Iterable[int]) -> "Loop":
        return cls(tuple(walk))

    def __len__(self) -> int:
        return len(self.vertices)

    def primitive(self) -> Tuple["Loop", int]:
        """Primitive root and multiplicity."""
        period = smallest_period(self.vertices)
        return Loop(self.vertices[:period]), len(self.vertices) // period

    def support(self) -> FrozenSet[int]:
        return frozenset(self.vertices)

    def to_json(self) -> List[int]:
        return list(self.vertices)


@dataclass(frozen=True, eq=False)
class LoopConfig:
    """A finite multiset of loops, kept as the sampled vertex arrays."""
    walks: Tuple[np.ndarray, ...]
    n: Optional[int] = None

    @property
    def total_size(self) -> int:
        return int(sum(len(w) for w in self.walks))

    def __len__(self) -> int:
        return len(self.walks)

    def loops(self) -> List[Loop]:
        return [Loop.from_walk(w.tolist()) for w in self.walks]

    def multiset(self) -> Counter:
        return Counter(self.loops())

    def to_json_line(self) -> str:
        return json.dumps({"loops": [loop.to_json() for loop in self.loops()], "total_size": self.total_size})

    @classmethod
    def from_json_line(cls, line: str, n: Optional[int] = None) -> "LoopConfig":
        data = json.loads(line)
        walks = tuple(np.asarray(Loop(tuple(v)).vertices, dtype=np.int64) for v in data["loops"])
        config = cls(walks=walks, n=n)
        if "total_size" in data and int(data["total_size"]) != config.total_size:
            raise domain_error("total_size does not match the loops", "DomainError",
                               declared=data["total_size"], actual=config.total_size)
        return config


@dataclass(frozen=True, eq=False)
class LengthWeights:
    """w_k = tr(P^k)/k for k = 2..K on K_n, or the rejection law when K is too large for a table."""
    n: int
    kappa: float
    exact_mass: float
    lengths: np.ndarray
    weights: np.ndarray
    rejection: bool = False

    @property
    def cutoff_length(self) -> int:
        return int(self.lengths[-1]) if self.lengths.size else 0

    @property
    def total(self) -> float:
        return float(self.weights.sum()) if self.weights.size else self.exact_mass

    @property
    def probabilities(self) -> np.ndarray:
        return self.weights / self.weights.sum()


def _complete_tail_bound(n: int, kappa: float, k: int) -> float:
    """Upper bound on sum_{j > k} tr(P^j)/j on K_n."""
    s = n - 1 + kappa
    q = (n - 1) / s
    main = math.exp((k + 1) * math.log(q)) / (1 - q)
    correction = (n - 1) * math.exp(-(k + 1) * math.log(s)) / (1 - 1 / s)
    return (main + correction) / (k + 1)


def _smallest_cutoff(tail, target: float, start: int = 2) -> int:
    """Smallest k >= start with tail(k) < target, for a decreasing tail bound."""
    hi = start
    while tail(hi) >= target:
        hi *= 2
    lo = max(start, hi // 2)
    while lo < hi:
        mid = (lo + hi) // 2
        if tail(mid) < target:
            hi = mid
        else:
            lo = mid + 1
    return hi


def length_weights(n: int, kappa: float, cutoff: float, max_table_length: int = 1 << 22) -> LengthWeights:
    """Loop-length weights on K_n truncated where the tail drops below cutoff * |nu|."""
    mass = loop_mass(n, kappa).exact
    target = cutoff * mass
    if _complete_tail_bound(n, kappa, max_table_length) >= target:
        empty = np.empty(0)
        return LengthWeights(n=n, kappa=kappa, exact_mass=mass, lengths=empty.astype(np.int64),
                             weights=empty, rejection=True)
    cutoff_length = _smallest_cutoff(lambda k: _complete_tail_bound(n, kappa, k), target)
    lengths = np.arange(2, cutoff_length + 1, dtype=np.int64)
    weights = complete_trace_powers(n, kappa, lengths) / lengths
    return LengthWeights(n=n, kappa=kappa, exact_mass=mass, lengths=lengths, weights=weights)


@lru_cache(maxsize=64)
def _home_table(n: int) -> np.ndarray:
    """P(next vertex is the base point | at another vertex, m steps left after this one), m <= 64."""
    b = n - 1
    return np.array([(b ** m + b * (-1) ** m) / (b ** (m + 1) + (-1) ** m)
                     for m in range(EXACT_BRIDGE_STEPS + 1)])


def _rejection_acceptance(n: int, k: np.ndarray) -> np.ndarray:
    sign = np.where(k % 2 == 0, 1.0, -1.0)
    return (1.0 + sign * np.exp((1.0 - k) * math.log(n - 1))) / 2.0


@dataclass(frozen=True, eq=False)
class GeneralWalkTables:
    """Matrix powers P^0..P^K and the length law of a small general graph."""
    graph: GraphSpec
    transition: np.ndarray
    powers: np.ndarray
    lengths: np.ndarray
    weights: np.ndarray
    exact_mass: float


class LoopSampler:
    """Draws loops and loop soups; one instance per worker, never shared."""

    def __init__(self, settings: SamplerSettings):
        if not isinstance(settings, SamplerSettings):
            raise TypeError("settings must be an instance of SamplerSettings")
        self.settings = settings
        self._length_tables: Dict[Tuple[int, float], LengthWeights] = {}
        self._general_tables: Dict[int, GeneralWalkTables] = {}
        self._complete_graphs: Dict[Tuple[int, float], GraphSpec] = {}
        logger.debug(f"LoopSampler initialized in {settings.mode} mode, "
                     f"tail cutoff {settings.tail_cutoff_epsilon:.3g}")

    # --- lengths ---

    def length_table(self, n: int, kappa: float) -> LengthWeights:
        key = (int(n), float(kappa))
        if key not in self._length_tables:
            start_time = time.time()
            table = length_weights(n, kappa, self.settings.tail_cutoff_epsilon, self.settings.max_table_length)
            self._length_tables[key] = table
            if table.rejection:
                logger.info(f"Length law for n={n}, kappa={kappa} drawn by rejection (table would be too long)")
            else:
                logger.info(f"Length table for n={n}, kappa={kappa}: K={table.cutoff_length}, "
                            f"elapsed_time={time.time() - start_time:.2f}s")
        return self._length_tables[key]

    def sample_lengths(self, rng: np.random.Generator, n: int, kappa: float, size: int) -> np.ndarray:
        """Independent loop lengths from the normalised loop measure."""
        table = self.length_table(n, kappa)
        if size == 0:
            return np.empty(0, dtype=np.int64)
        if not table.rejection:
            cdf = np.cumsum(table.weights)
            idx = np.searchsorted(cdf, rng.random(size) * cdf[-1], side="right")
            return table.lengths[np.minimum(idx, table.lengths.size - 1)]
        q = (n - 1) / (n - 1 + kappa)
        out = np.empty(size, dtype=np.int64)
        filled = 0
        while filled < size:
            batch = max(2 * (size - filled), 16)
            proposals = rng.logseries(q, size=batch)
            accepted = proposals[rng.random(batch) < _rejection_acceptance(n, proposals)][: size - filled]
            out[filled:filled + accepted.size] = accepted
            filled += accepted.size
        return out

    # --- walks on K_n ---

    def sample_closed_walk(self, rng: np.random.Generator, n: int, length: int) -> np.ndarray:
        """Uniform pointed closed walk of the given length on K_n (vertex k-1 steps back home)."""
        if length < 2:
            raise domain_error("closed walks have length >= 2", "DomainError", length=length)
        x = int(rng.integers(n))
        walk = np.empty(length, dtype=np.int64)
        if n == 2:
            if length % 2:
                raise domain_error("K_2 has no closed walks of odd length", "DomainError", length=length)
            walk[0::2], walk[1::2] = x, 1 - x
            return walk
        remaining = length - 1 - np.arange(length)
        home = np.where(remaining <= EXACT_BRIDGE_STEPS,
                        _home_table(n)[np.minimum(remaining, EXACT_BRIDGE_STEPS)], 1.0 / (n - 1))
        coins = rng.random(length)
        away = rng.integers(0, n - 1, size=length)
        other = rng.integers(0, n - 2, size=length)
        walk[0] = v = x
        for t in range(length - 1):
            if v == x:
                w = int(away[t])
                w += w >= x
            elif coins[t] < home[t]:
                w = x
            else:
                w = int(other[t])
                lo, hi = (v, x) if v < x else (x, v)
                w += w >= lo
                w += w >= hi
            walk[t + 1] = v = w
        return walk

    def sample_loop(self, rng: np.random.Generator, n: int, kappa: float) -> Loop:
        length = int(self.sample_lengths(rng, n, kappa, 1)[0])
        return Loop.from_walk(self.sample_closed_walk(rng, n, length).tolist())

    def sample_soup(self, rng: np.random.Generator, params: ModelParams) -> LoopConfig:
        """Poisson(alpha |nu|) loops on K_n, each from the normalised loop measure."""
        if self.settings.mode == "general":
            key = (params.n, float(params.kappa))
            if key not in self._complete_graphs:
                self._complete_graphs[key] = GraphSpec.complete(params.n, params.kappa)
            return self.sample_soup_general(rng, self._complete_graphs[key], params.alpha)
        table = self.length_table(params.n, params.kappa)
        count = int(rng.poisson(params.alpha * table.exact_mass))
        lengths = self.sample_lengths(rng, params.n, params.kappa, count)
        walks = tuple(self.sample_closed_walk(rng, params.n, int(k)) for k in lengths)
        return LoopConfig(walks=walks, n=params.n)

    # --- small general graphs ---

    def prepare_general(self, graph: GraphSpec) -> GeneralWalkTables:
        """Matrix powers up to the cutoff length; cached per graph object."""
        cached = self._general_tables.get(id(graph))
        if cached is not None and cached.graph is graph:
            return cached
        n = graph.n
        if n > self.settings.general_graph_cap:
            raise LoopSoupException(ValueError(f"general-graph sampling is limited to {self.settings.general_graph_cap} "
                                               f"vertices"), error_type="CapExceeded",
                                    context={"n": n, "cap": self.settings.general_graph_cap})
        start_time = time.time()
        p = build_transition(graph)
        rho = p.spectral_radius
        if rho >= 1:
            raise domain_error("the loop measure has infinite mass (a component carries no killing)",
                               "DomainError", spectral_radius=rho)
        mass = -log_det_i_minus_theta_p(graph, 1.0)
        target = self.settings.tail_cutoff_epsilon * mass

        def tail(k: int) -> float:
            return n * math.exp((k + 1) * math.log(rho)) / ((1 - rho) * (k + 1)) if rho > 0 else 0.0

        cutoff_length = _smallest_cutoff(tail, target)
        if (cutoff_length + 1) * n * n > self.settings.max_power_entries:
            raise LoopSoupException(ValueError("matrix powers up to the cutoff length do not fit the configured cap"),
                                    error_type="CapExceeded",
                                    context={"n": n, "cutoff_length": cutoff_length,
                                             "max_power_entries": self.settings.max_power_entries})
        powers = np.empty((cutoff_length + 1, n, n))
        powers[0] = np.eye(n)
        for r in range(1, cutoff_length + 1):
            powers[r] = powers[r - 1] @ p.entries
        lengths = np.arange(2, cutoff_length + 1, dtype=np.int64)
        weights = np.maximum(np.trace(powers[2:], axis1=1, axis2=2), 0.0) / lengths
        tables = GeneralWalkTables(graph=graph, transition=np.asarray(p.entries), powers=powers,
                                   lengths=lengths, weights=weights, exact_mass=mass)
        self._general_tables[id(graph)] = tables
        logger.info(f"Prepared {cutoff_length} matrix powers for a {n}-vertex graph, "
                    f"elapsed_time={time.time() - start_time:.2f}s")
        return tables

    @staticmethod
    def _draw(rng: np.random.Generator, weights: np.ndarray) -> int:
        cdf = np.cumsum(weights)
        return int(min(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"), weights.size - 1))

    def sample_soup_general(self, rng: np.random.Generator, graph: GraphSpec, alpha: float) -> LoopConfig:
        """Same law as sample_soup on any small graph, bridges read off the matrix powers."""
        tables = self.prepare_general(graph)
        count = int(rng.poisson(alpha * tables.exact_mass))
        cdf = np.cumsum(tables.weights)
        picks = np.searchsorted(cdf, rng.random(count) * cdf[-1], side="right")
        walks = []
        for idx in np.minimum(picks, tables.lengths.size - 1):
            length = int(tables.lengths[idx])
            x = self._draw(rng, np.diag(tables.powers[length]))
            walk = np.empty(length, dtype=np.int64)
            walk[0] = v = x
            for t in range(1, length):
                # next vertex w with weight P[v, w] (P^(length - t))[w, x]
                v = self._draw(rng, tables.transition[v] * tables.powers[length - t][:, x])
                walk[t] = v
            walks.append(walk)
        return LoopConfig(walks=tuple(walks), n=graph.n)


def project_primitive(config: LoopConfig) -> FrozenSet[Loop]:
    """Primitive roots of the loops of a configuration, without repetition."""
    return frozenset(loop.primitive()[0] for loop in config.loops())
