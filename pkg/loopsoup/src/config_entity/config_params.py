from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

from loopsoup.src.constants import DEFAULT_TAIL_CUTOFF, MAX_TAIL_CUTOFF, BELL_10
from loopsoup.src.utils.exception import domain_error


# ---- Model Params ----
@dataclass(frozen=True)
class ModelParams:
    """Complete graph K_n with constant killing kappa and soup intensity alpha."""
    n: int
    kappa: float
    alpha: float = 1.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise domain_error("n must be an integer >= 2", "DomainError", n=self.n)
        if not self.kappa > 0:
            raise domain_error("kappa must be positive", "DomainError", kappa=self.kappa)
        if not self.alpha > 0:
            raise domain_error("alpha must be positive", "DomainError", alpha=self.alpha)


# ---- Exact Engine Config ----
@dataclass(frozen=True)
class EngineConfig:
    """Working precision, enumeration caps and quadrature tolerance of the exact engine."""
    precision_bits: int = 256
    auto_precision: bool = True
    enumeration_cap: int = 10
    refinement_cap: int = BELL_10
    quadrature_tolerance: float = 1e-10
    quadrature_bits: int = 96
    mixture_series_terms: int = 80


# ---- Sampler Settings ----
@dataclass(frozen=True)
class SamplerSettings:
    """Loop sampler settings; `seed` is the default seed of the `sample` command."""
    seed: int = 0
    tail_cutoff_epsilon: float = DEFAULT_TAIL_CUTOFF
    mode: str = "complete"
    general_graph_cap: int = 64
    max_table_length: int = 1 << 22
    max_power_entries: int = 1 << 24

    def __post_init__(self):
        if not 0 < self.tail_cutoff_epsilon <= MAX_TAIL_CUTOFF:
            raise domain_error("tail_cutoff_epsilon must lie in (0, 2^-20]", "InvalidConfig",
                               tail_cutoff_epsilon=self.tail_cutoff_epsilon)
        if self.mode not in ("complete", "general"):
            raise domain_error("mode must be 'complete' or 'general'", "InvalidConfig", mode=self.mode)


# ---- Experiment Config ----
@dataclass(frozen=True)
class ExperimentConfig:
    """One verification experiment: what to sample, how much, and how to report it."""
    model: ModelParams
    kind: str
    samples: int
    seed: int
    batches: int
    precision_bits: int = 256
    d: int = 2
    k: int = 2
    epsilon: float = 0.5
    c: float = 1.0
    thetas: Tuple[float, ...] = (0.0, 0.5, 0.9)
    partitions: Optional[List[List[List[int]]]] = None
    graph: Optional[dict] = None
    z_band: float = 4.0
    threads: int = 1
    output: Optional[Path] = None
    format: str = "json"
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.samples < 1 or self.batches < 1 or self.batches > self.samples:
            raise domain_error("require samples >= 1 and 1 <= batches <= samples", "InvalidConfig",
                               samples=self.samples, batches=self.batches)
        if self.format not in ("csv", "json"):
            raise domain_error("format must be csv or json", "InvalidConfig", format=self.format)

    def batch_sizes(self) -> List[int]:
        """Deterministic split of `samples` into `batches` chunks."""
        base, rest = divmod(self.samples, self.batches)
        return [base + (1 if i < rest else 0) for i in range(self.batches)]
