import json
import math
import multiprocessing
import time
from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Dict, Iterator, List, Literal, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from loopsoup.src.components.cluster_analysis import cluster_sizes, clusters, count_isolated_dgons
from loopsoup.src.components.er_baseline import (ErParams, er_cluster_count_asymptotic, er_exhaustive_factorial_moment,
                                                 er_tree_factorial_moment, isolated_cluster_census,
                                                 isolated_tree_census, sample_gnp)
from loopsoup.src.components.exact_engine import (ExactEngine, dgon_measure, large_cluster_probability_bound,
                                                  limit_moment_R, long_loop_mass, loop_mass, loop_mass_reference,
                                                  size_gf)
from loopsoup.src.components.graph_model import GraphSpec, complete_trace_powers, det_ratio
from loopsoup.src.components.loop_sampler import Loop, LoopConfig, LoopSampler, project_primitive
from loopsoup.src.components.partition_lattice import Partition, refines
from loopsoup.src.components.statistics import (chi_square, estimate_falling_factorial, estimate_mean,
                                                ks_critical_value, ks_uniform, z_score)
from loopsoup.src.config_entity.config_params import ExperimentConfig, ModelParams, SamplerSettings
from loopsoup.src.config_settings.config_manager import ConfigurationManager
from loopsoup.src.utils.common import write_text
from loopsoup.src.utils.exception import LoopSoupException, EXIT_USAGE
from loopsoup.src.utils.logger import logger
from loopsoup.src.utils.rng import generator_from, make_generator, spawn_seeds

CheckType = Literal["z", "relative", "absolute", "min", "pvalue", "exact"]


# --- Report models ---
class ReportRow(BaseModel):
    """One checked statistic of an experiment."""
    name: str
    exact: Optional[float] = None
    estimate: Optional[float] = None
    stderr: Optional[float] = None
    z_score: Optional[float] = None
    check: CheckType
    tolerance: float
    passed: bool
    detail: Dict[str, Any] = Field(default_factory=dict)


class ReportMetadata(BaseModel):
    kind: str
    seed: int
    samples: int
    batches: int
    threads: int
    precision_bits: int
    n: int
    kappa: float
    alpha: float
    wall_time: float
    parameters: Dict[str, Any] = Field(default_factory=dict)


class ExperimentReport(BaseModel):
    metadata: ReportMetadata
    rows: List[ReportRow]

    @property
    def passed(self) -> bool:
        return all(row.passed for row in self.rows)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame([row.model_dump(exclude={"detail"}) for row in self.rows])
        frame.insert(0, "kind", self.metadata.kind)
        return frame

    def to_json(self, include_wall_time: bool = True) -> str:
        exclude = None if include_wall_time else {"metadata": {"wall_time"}}
        return self.model_dump_json(indent=2, exclude=exclude)

    def render(self, format: str = "json") -> str:
        return self.to_frame().to_csv(index=False) if format == "csv" else self.to_json()

    def save(self, path: Path, format: str = "json") -> Path:
        return write_text(self.render(format), Path(path))


# --- Row builders ---
def _row(name: str, check: CheckType, tolerance: float, passed: bool, exact: Optional[float] = None,
         estimate: Optional[float] = None, stderr: Optional[float] = None, **detail: Any) -> ReportRow:
    z = z_score(estimate, exact, stderr or 0.0) if exact is not None and estimate is not None else None
    return ReportRow(name=name, exact=exact, estimate=estimate, stderr=stderr, z_score=z, check=check,
                     tolerance=tolerance, passed=bool(passed), detail=detail)


def z_row(name: str, exact: float, estimate: float, stderr: float, band: float, **detail: Any) -> ReportRow:
    passed = abs(z_score(estimate, float(exact), stderr)) <= band
    return _row(name, "z", band, passed, float(exact), estimate, stderr, **detail)


def relative_row(name: str, reference: float, value: float, tolerance: float, stderr: Optional[float] = None,
                 **detail: Any) -> ReportRow:
    passed = abs(value - reference) <= tolerance * abs(reference)
    return _row(name, "relative", tolerance, passed, float(reference), float(value), stderr, **detail)


def absolute_row(name: str, reference: float, value: float, tolerance: float, stderr: Optional[float] = None,
                 **detail: Any) -> ReportRow:
    passed = abs(value - reference) <= tolerance
    return _row(name, "absolute", tolerance, passed, float(reference), float(value), stderr, **detail)


def min_row(name: str, threshold: float, value: float, stderr: Optional[float] = None, band: float = 0.0,
            **detail: Any) -> ReportRow:
    """value >= threshold, with `band` standard errors of slack for Monte Carlo estimates."""
    passed = value + band * (stderr or 0.0) >= threshold
    return _row(name, "min", threshold, passed, float(threshold), float(value), stderr, **detail)


def pvalue_row(name: str, statistic: float, pvalue: float, level: float = 1e-3, **detail: Any) -> ReportRow:
    return _row(name, "pvalue", level, pvalue > level, estimate=float(pvalue), statistic=float(statistic), **detail)


def exact_row(name: str, expected: Fraction, value: Fraction, **detail: Any) -> ReportRow:
    return _row(name, "exact", 0.0, expected == value, float(expected), float(value), 0.0,
                expected_rational=str(expected), value_rational=str(value), **detail)


def _label(pi: Partition) -> str:
    return json.dumps(pi.to_json(), separators=(",", ":"))


# --- Batch side (runs inside pool workers) ---
@dataclass(frozen=True, eq=False)
class BatchContext:
    """Everything a worker needs besides its seed; built from the config inside each worker."""
    config: ExperimentConfig
    params: ModelParams
    graph: Optional[GraphSpec]
    partitions: List[Partition]

    @property
    def n(self) -> int:
        return self.graph.n if self.graph is not None else self.params.n

    @classmethod
    def build(cls, config: ExperimentConfig) -> "BatchContext":
        graph = GraphSpec.from_dict(config.graph) if config.graph is not None else None
        n = graph.n if graph is not None else config.model.n
        return cls(config=config, params=config.model, graph=graph, partitions=target_partitions(config, n))

    def draw(self, sampler: LoopSampler, rng: np.random.Generator) -> LoopConfig:
        if self.graph is not None:
            return sampler.sample_soup_general(rng, self.graph, self.params.alpha)
        return sampler.sample_soup(rng, self.params)


def target_partitions(config: ExperimentConfig, n: int) -> List[Partition]:
    """Partitions from the config, or halves / one pair / all singletons."""
    if config.partitions:
        return [Partition.from_json(p) for p in config.partitions]
    half = max(1, n // 2)
    defaults = [Partition.from_blocks([range(half), range(half, n)]) if half < n else Partition.single_block(n),
                Partition.from_blocks([(0, 1)] + [(v,) for v in range(2, n)]),
                Partition.singletons(n)]
    if config.kind == "exact-prob":
        defaults.append(Partition.single_block(n))
    unique: List[Partition] = []
    for pi in defaults:
        if pi not in unique:
            unique.append(pi)
    return unique


def _collect_partitions(ctx: BatchContext, soup: LoopConfig) -> Dict[str, Any]:
    partition = clusters(soup, ctx.n).partition
    return {"finer": [refines(partition, pi) for pi in ctx.partitions],
            "equal": [partition == pi for pi in ctx.partitions],
            "connected": len(partition) == 1}


def _collect_isolated(ctx: BatchContext, soup: LoopConfig) -> Dict[str, Any]:
    return {"isolated": int(np.count_nonzero(cluster_sizes(soup, ctx.n) == 1))}


def _collect_size_d(ctx: BatchContext, soup: LoopConfig) -> Dict[str, Any]:
    return {"size_d": int(np.count_nonzero(cluster_sizes(soup, ctx.n) == ctx.config.d))}


def _collect_limit_laws(ctx: BatchContext, soup: LoopConfig) -> Dict[str, Any]:
    sizes = cluster_sizes(soup, ctx.n)
    return {"isolated": int(np.count_nonzero(sizes == 1)),
            "size_d": int(np.count_nonzero(sizes == ctx.config.d)),
            "dgons": count_isolated_dgons(soup, ctx.n, ctx.config.d)}


def _collect_large_clusters(ctx: BatchContext, soup: LoopConfig) -> Dict[str, Any]:
    largest_support = max((np.unique(w).size for w in soup.walks), default=0)
    return {"max_cluster": int(cluster_sizes(soup, ctx.n).max()), "max_support": int(largest_support)}


def _collect_size_gf(ctx: BatchContext, soup: LoopConfig) -> Dict[str, Any]:
    return {"total_size": soup.total_size, "loop_count": len(soup)}


def _collect_primitive(ctx: BatchContext, soup: LoopConfig) -> Dict[str, Any]:
    roots = project_primitive(soup)
    return {"first": Loop((0, 1)) in roots, "second": ctx.n >= 4 and Loop((2, 3)) in roots}


SOUP_COLLECTORS: Dict[str, Callable[[BatchContext, LoopConfig], Dict[str, Any]]] = {
    "finer-prob": _collect_partitions,
    "exact-prob": _collect_partitions,
    "isolated-moments": _collect_isolated,
    "size-d-moments": _collect_size_d,
    "limit-laws": _collect_limit_laws,
    "large-clusters": _collect_large_clusters,
    "size-gf": _collect_size_gf,
    "primitive-loops": _collect_primitive,
}


def _stack(records: List[Dict[str, Any]]) -> Dict[str, np.ndarray]:
    return {key: np.asarray([record[key] for record in records]) for key in records[0]}


def run_batch(config: ExperimentConfig, settings: SamplerSettings, seed_sequence: np.random.SeedSequence,
              size: int) -> Dict[str, np.ndarray]:
    """Simulate one batch of `size` samples on the batch's own random stream."""
    rng = generator_from(seed_sequence)
    if config.kind == "er-baseline":
        params = ErParams(n=config.model.n, c=config.c)
        records = []
        for _ in range(size):
            graph = sample_gnp(rng, params)
            records.append({"trees": [isolated_tree_census(graph, d) for d in range(1, config.d + 1)],
                            "clusters": [isolated_cluster_census(graph, d) for d in range(1, config.d + 1)],
                            "edges": graph.number_of_edges()})
        return _stack(records)
    sampler = LoopSampler(settings)
    if config.kind == "loop-length-law":
        return {"lengths": sampler.sample_lengths(rng, config.model.n, config.model.kappa, size)}
    ctx = BatchContext.build(config)
    collect = SOUP_COLLECTORS[config.kind]
    return _stack([collect(ctx, ctx.draw(sampler, rng)) for _ in range(size)])


def merge_batches(batches: Sequence[Dict[str, np.ndarray]]) -> Dict[str, np.ndarray]:
    """Concatenate batch results in batch-index order."""
    return {key: np.concatenate([batch[key] for batch in batches]) for key in batches[0]}


# --- Experiment Pipeline Class ---
class ExperimentPipeline:
    """Runs verification experiments and pairs every Monte Carlo estimate with an exact or asymptotic value."""
    def __init__(self, config_manager: ConfigurationManager):
        try:
            logger.info("Initializing ExperimentPipeline")
            self.config_manager = config_manager
            self.engine_config = config_manager.get_engine_config()
            self.sampler_settings = config_manager.get_sampler_settings()
            self.summarizers: Dict[str, Callable[[ExperimentConfig, Dict[str, np.ndarray]], List[ReportRow]]] = {
                "finer-prob": self._summarize_finer_prob,
                "exact-prob": self._summarize_exact_prob,
                "isolated-moments": self._summarize_isolated_moments,
                "size-d-moments": self._summarize_size_d_moments,
                "limit-laws": self._summarize_limit_laws,
                "large-clusters": self._summarize_large_clusters,
                "loop-length-law": self._summarize_loop_length_law,
                "size-gf": self._summarize_size_gf,
                "er-baseline": self._summarize_er_baseline,
                "primitive-loops": self._summarize_primitive_loops,
            }
            logger.info("ExperimentPipeline initialized successfully")
        except LoopSoupException:
            raise
        except Exception as e:
            logger.error(f"Failed to initialize ExperimentPipeline: {e}")
            raise LoopSoupException(e, error_type="InvalidConfig", exit_code=EXIT_USAGE)

    def engine_for(self, config: ExperimentConfig) -> ExactEngine:
        return ExactEngine(replace(self.engine_config, precision_bits=config.precision_bits))

    def collect(self, config: ExperimentConfig) -> Dict[str, np.ndarray]:
        """Run all batches, concurrently when threads > 1, and merge them by batch index."""
        seeds = spawn_seeds(config.seed, config.batches)
        sizes = config.batch_sizes()
        settings = replace(self.sampler_settings, seed=config.seed)
        args = [(config, settings, seeds[i], sizes[i]) for i in range(config.batches)]
        if config.threads == 1:
            results = [run_batch(*arg) for arg in args]
        else:
            # starmap returns results in submission order
            with multiprocessing.Pool(min(config.threads, config.batches)) as pool:
                results = pool.starmap(run_batch, args)
        return merge_batches(results)

    def run(self, config: ExperimentConfig) -> ExperimentReport:
        """Simulate, compare and (when an output path is set) save the report."""
        try:
            start_time = time.time()
            logger.info(f"Running {config.kind} with n={config.model.n}, kappa={config.model.kappa}, "
                        f"alpha={config.model.alpha}, samples={config.samples}, batches={config.batches}, "
                        f"threads={config.threads}, seed={config.seed}")
            summarize = self.summarizers.get(config.kind)
            if summarize is None:
                raise LoopSoupException(ValueError(f"unknown experiment kind '{config.kind}'"),
                                        error_type="InvalidConfig", exit_code=EXIT_USAGE)
            data = self.collect(config)
            rows = summarize(config, data)
            elapsed_time = time.time() - start_time
            report = ExperimentReport(
                metadata=ReportMetadata(
                    kind=config.kind, seed=config.seed, samples=config.samples, batches=config.batches,
                    threads=config.threads, precision_bits=config.precision_bits, n=config.model.n,
                    kappa=config.model.kappa, alpha=config.model.alpha, wall_time=round(elapsed_time, 3),
                    parameters={"d": config.d, "k": config.k, "epsilon": config.epsilon, "c": config.c,
                                "thetas": list(config.thetas), "z_band": config.z_band}),
                rows=rows)
            failed = [row.name for row in rows if not row.passed]
            logger.info(f"{config.kind} finished in {elapsed_time:.2f} seconds: "
                        f"{len(rows) - len(failed)}/{len(rows)} rows within their bands")
            if failed:
                logger.warning(f"Rows outside their bands: {failed}")
            if config.output is not None:
                report.save(config.output, config.format)
            return report
        except LoopSoupException:
            raise
        except Exception as e:
            logger.error(f"Error running experiment {config.kind}: {e}")
            raise LoopSoupException(e, context={"kind": config.kind})

    # --- Summaries per experiment kind ---

    def _summarize_finer_prob(self, config: ExperimentConfig, data: Dict[str, np.ndarray]) -> List[ReportRow]:
        ctx = BatchContext.build(config)
        engine = self.engine_for(config)
        rows = []
        for j, pi in enumerate(ctx.partitions):
            if ctx.graph is None:
                exact = float(engine.prob_finer(pi, ctx.params))
            else:
                exact = det_ratio(ctx.graph, pi) ** ctx.params.alpha
            estimate, stderr = estimate_mean(data["finer"][:, j])
            rows.append(z_row(f"prob_finer{_label(pi)}", exact, estimate, stderr, config.z_band))
        return rows

    def _summarize_exact_prob(self, config: ExperimentConfig, data: Dict[str, np.ndarray]) -> List[ReportRow]:
        ctx = BatchContext.build(config)
        if ctx.graph is not None:
            raise LoopSoupException(ValueError("exact-prob is defined on complete graphs only"),
                                    error_type="InvalidConfig", exit_code=EXIT_USAGE)
        engine = self.engine_for(config)
        params, rows = ctx.params, []
        deterministic_tolerance = float(config.extra.get("deterministic_tolerance", 1e-9))
        if params.n <= int(config.extra.get("partition_sum_max_n", 6)):
            rows.append(absolute_row("partition_sum", 1.0, float(engine.partition_sum(params)),
                                     deterministic_tolerance))
        connected = float(engine.prob_connected(params))
        rows.append(absolute_row("prob_connected_vs_prob_exact_single_block",
                                 float(engine.prob_exact(Partition.single_block(params.n), params)), connected,
                                 deterministic_tolerance))
        estimate, stderr = estimate_mean(data["connected"])
        rows.append(z_row("connected_frequency", connected, estimate, stderr, config.z_band))
        for j, pi in enumerate(ctx.partitions):
            estimate, stderr = estimate_mean(data["equal"][:, j])
            rows.append(z_row(f"prob_exact{_label(pi)}", float(engine.prob_exact(pi, params)), estimate, stderr,
                              config.z_band))
        return rows

    def _summarize_isolated_moments(self, config: ExperimentConfig, data: Dict[str, np.ndarray]) -> List[ReportRow]:
        engine = self.engine_for(config)
        rows = []
        for k in range(1, config.k + 1):
            estimate, stderr = estimate_falling_factorial(data["isolated"], k)
            exact = float(engine.factorial_moment_isolated_vertices(k, config.model))
            rows.append(z_row(f"isolated_factorial_moment[k={k}]", exact, estimate, stderr, config.z_band))
        return rows

    def _summarize_size_d_moments(self, config: ExperimentConfig, data: Dict[str, np.ndarray]) -> List[ReportRow]:
        engine = self.engine_for(config)
        rows = []
        for k in range(1, config.k + 1):
            estimate, stderr = estimate_falling_factorial(data["size_d"], k)
            exact = float(engine.factorial_moment_size_d(config.d, k, config.model))
            rows.append(z_row(f"size_d_factorial_moment[d={config.d},k={k}]", exact, estimate, stderr,
                              config.z_band))
        return rows

    def _summarize_limit_laws(self, config: ExperimentConfig, data: Dict[str, np.ndarray]) -> List[ReportRow]:
        engine = self.engine_for(config)
        params, d = config.model, config.d
        rows = []
        fraction = data["isolated"] / params.n
        for k in range(1, config.k + 1):
            estimate, stderr = estimate_mean(fraction ** k)
            rows.append(z_row(f"isolated_fraction_moment[k={k}]", float(engine.moment_isolated_fraction(k, params)),
                              estimate, stderr, config.z_band))
            rows.append(relative_row(f"isolated_fraction_moment_limit[k={k}]",
                                     limit_moment_R(k, params.kappa, params.alpha), estimate,
                                     float(config.extra.get("limit_band", 0.02)), stderr))
        counts = data["size_d"].astype(int)
        support = np.arange(counts.max() + 1)
        observed = np.bincount(counts, minlength=support.size).astype(float)
        pmf = np.array([float(engine.poisson_mixture_pmf(int(k), d, params.kappa, params.alpha)) for k in support])
        # the last bin collects the mixture's tail beyond the largest observed count
        observed = np.append(observed, 0.0)
        expected = np.append(pmf, max(0.0, 1.0 - pmf.sum())) * counts.size
        statistic, pvalue = chi_square(observed, expected)
        rows.append(pvalue_row(f"size_d_poisson_mixture[d={d}]", statistic, pvalue,
                               float(config.extra.get("pvalue_level", 1e-3))))
        estimate, stderr = estimate_mean(data["size_d"] - data["dgons"])
        rows.append(absolute_row(f"size_d_minus_isolated_dgons[d={d}]", 0.0, estimate,
                                 float(config.extra.get("dgon_band", 0.01)), stderr))
        return rows

    def _summarize_large_clusters(self, config: ExperimentConfig, data: Dict[str, np.ndarray]) -> List[ReportRow]:
        n, kappa, alpha, eps = config.model.n, config.model.kappa, config.model.alpha, config.epsilon
        rows = []
        threshold = n ** (1 - eps)
        estimate, stderr = estimate_mean(data["max_cluster"] >= threshold)
        rows.append(min_row("max_cluster_reaches_n^(1-eps)", float(config.extra.get("large_cluster_fraction", 0.95)),
                            estimate, stderr, band=config.z_band, cluster_threshold=threshold))
        estimate, stderr = estimate_mean(data["max_support"] > (1 - eps) * threshold)
        rows.append(min_row("long_loop_support_fraction", large_cluster_probability_bound(n, alpha, eps), estimate,
                            stderr, band=config.z_band, support_threshold=(1 - eps) * threshold))
        rows.append(min_row("long_loop_mass", eps * math.log(n) / 2, long_loop_mass(n, kappa, int(threshold)),
                            min_length=int(threshold)))
        mass = loop_mass(n, kappa)
        band = float(config.extra.get("mass_band", 0.05))
        rows.append(relative_row("loop_mass_exact", loop_mass_reference(n, kappa), mass.exact, band,
                                 log_n_over_kappa=math.log(n / kappa)))
        rows.append(relative_row("loop_mass_display", mass.exact, mass.closed_form, band))
        return rows

    def _summarize_loop_length_law(self, config: ExperimentConfig, data: Dict[str, np.ndarray]) -> List[ReportRow]:
        n, kappa = config.model.n, config.model.kappa
        lengths = data["lengths"]
        bins = int(config.extra.get("length_bins", 40))
        log_n = math.log(n)

        def bin_of(u: np.ndarray) -> np.ndarray:
            # bins of width 1/bins on [0, 1], one more bin for u > 1
            return np.where(u > 1, bins, np.minimum((u * bins).astype(int), bins - 1))

        u = np.log(lengths) / log_n
        observed = np.bincount(bin_of(u), minlength=bins + 1).astype(float)
        ks = np.arange(2, n + 1)
        weights = complete_trace_powers(n, kappa, ks) / ks
        mass = loop_mass(n, kappa).exact
        expected = np.bincount(bin_of(np.log(ks) / log_n), weights=weights / mass, minlength=bins + 1)
        expected[bins] = max(0.0, 1.0 - expected[:bins].sum())
        statistic, pvalue = chi_square(observed, expected * lengths.size)
        rows = [pvalue_row("length_law_vs_exact", statistic, pvalue, float(config.extra.get("pvalue_level", 1e-3)))]
        ks_statistic = ks_uniform(np.minimum(u, 1.0))
        rows.append(absolute_row("length_law_ks_to_uniform", 0.0, ks_statistic, 1.0 / log_n,
                                 critical_value_0_001=ks_critical_value(lengths.size),
                                 mass_above_n=float(expected[bins])))
        return rows

    def _summarize_size_gf(self, config: ExperimentConfig, data: Dict[str, np.ndarray]) -> List[ReportRow]:
        params = config.model
        rows = []
        for theta in config.thetas:
            estimate, stderr = estimate_mean(np.power(float(theta), data["total_size"]))
            rows.append(z_row(f"size_gf[theta={theta}]", size_gf(theta, params), estimate, stderr, config.z_band))
        estimate, stderr = estimate_mean(data["loop_count"])
        rows.append(z_row("loop_count_mean", params.alpha * loop_mass(params.n, params.kappa).exact, estimate,
                          stderr, config.z_band))
        return rows

    def _summarize_er_baseline(self, config: ExperimentConfig, data: Dict[str, np.ndarray]) -> List[ReportRow]:
        n, c = config.model.n, config.c
        rows = []
        trees, cluster_counts = data["trees"], data["clusters"]
        for d in range(1, config.d + 1):
            for k in range(1, config.k + 1):
                if k * d > n:
                    continue
                estimate, stderr = estimate_falling_factorial(trees[:, d - 1], k)
                rows.append(z_row(f"er_tree_factorial_moment[d={d},k={k}]", er_tree_factorial_moment(n, c, d, k),
                                  estimate, stderr, config.z_band))
            estimate, stderr = estimate_mean(cluster_counts[:, d - 1])
            rows.append(relative_row(f"er_cluster_count_asymptotic[d={d}]", er_cluster_count_asymptotic(n, c, d),
                                     estimate, float(config.extra.get("asymptotic_band", 0.05)), stderr))
        violations = int(np.count_nonzero(trees > cluster_counts))
        rows.append(exact_row("tree_census_le_cluster_census_violations", Fraction(0), Fraction(violations)))
        estimate, stderr = estimate_mean(data["edges"])
        rows.append(z_row("edge_count_mean", math.comb(n, 2) * c / n, estimate, stderr, config.z_band))
        if n <= 6:
            p = Fraction(str(c)) / n
            for d in range(1, n + 1):
                for k in range(1, config.k + 1):
                    rows.append(exact_row(f"er_formula_vs_exhaustive[d={d},k={k}]",
                                          er_exhaustive_factorial_moment(n, p, d, k),
                                          er_tree_factorial_moment(n, p * n, d, k)))
        return rows

    def _summarize_primitive_loops(self, config: ExperimentConfig, data: Dict[str, np.ndarray]) -> List[ReportRow]:
        params = config.model
        u = dgon_measure(2, params.n, params.kappa)
        inclusion = 1 - (1 - u) ** params.alpha
        estimate, stderr = estimate_mean(data["first"])
        rows = [z_row("primitive_inclusion[(0,1)]", inclusion, estimate, stderr, config.z_band)]
        if params.n >= 4:
            estimate, stderr = estimate_mean(data["second"])
            rows.append(z_row("primitive_inclusion[(2,3)]", inclusion, estimate, stderr, config.z_band))
            estimate, stderr = estimate_mean(data["first"] & data["second"])
            rows.append(z_row("primitive_joint_inclusion[(0,1),(2,3)]", inclusion ** 2, estimate, stderr,
                              config.z_band))
        return rows

    # --- Streams and tables used by the CLI ---

    def stream_soups(self, params: ModelParams, count: int, seed: int,
                     graph: Optional[GraphSpec] = None) -> Iterator[LoopConfig]:
        """`count` soups from one generator seeded with `seed`."""
        rng = make_generator(seed)
        sampler = LoopSampler(replace(self.sampler_settings, seed=seed))
        for _ in range(count):
            if graph is not None:
                yield sampler.sample_soup_general(rng, graph, params.alpha)
            else:
                yield sampler.sample_soup(rng, params)

    def asymptotics_table(self, n_values: Sequence[int], d_values: Sequence[int], kappa: float,
                          alpha: float) -> pd.DataFrame:
        """Cumulant ratios c_d / (alpha (d-1)! n^-d) and the loop mass against log(n/kappa)."""
        engine = ExactEngine(self.engine_config)
        records = []
        for n in n_values:
            params = ModelParams(n=int(n), kappa=kappa, alpha=alpha)
            mass = loop_mass(int(n), kappa)
            record = {"n": int(n), "kappa": kappa, "alpha": alpha, "loop_mass": mass.exact,
                      "loop_mass_display": mass.closed_form, "log_n_over_kappa": math.log(n / kappa),
                      "loop_mass_reference": loop_mass_reference(int(n), kappa)}
            for d in d_values:
                record[f"cumulant_ratio_d{d}"] = float(engine.cumulant_asymptotic_ratio(int(d), params))
            records.append(record)
        return pd.DataFrame.from_records(records)
