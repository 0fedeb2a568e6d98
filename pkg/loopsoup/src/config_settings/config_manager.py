
import os
from dotenv import load_dotenv
from pathlib import Path
from typing import Any, Dict, List, Optional, Union
from pydantic import BaseModel, ConfigDict, ValidationError
from loopsoup.src.utils.common import read_json, read_yaml
from loopsoup.src.utils.logger import logger
from loopsoup.src.utils.exception import LoopSoupException, EXIT_USAGE
from loopsoup.src.constants import CONFIG_FILEPATH, EXPERIMENT_KINDS, THREADS_ENV_VAR
from loopsoup.src.config_entity.config_params import (EngineConfig, ExperimentConfig, ModelParams, SamplerSettings)

load_dotenv()


# --- Experiment file schema ---
class ExperimentFile(BaseModel):
    """Keys accepted in a JSON experiment file (and in merged YAML defaults and CLI flags)."""
    model_config = ConfigDict(extra="forbid")

    n: Optional[int] = None
    kappa: Optional[float] = None
    alpha: float = 1.0
    conductances: Optional[Union[List[float], List[List[float]]]] = None
    killing: Optional[List[float]] = None
    samples: int = 100000
    seed: int = 0
    batches: int = 1
    precision_bits: int = 256
    d: int = 2
    k: int = 2
    epsilon: float = 0.5
    c: float = 1.0
    thetas: List[float] = [0.0, 0.5, 0.9]
    partitions: Optional[List[List[List[int]]]] = None
    z_band: float = 4.0
    threads: Optional[int] = None
    output: Optional[str] = None
    format: str = "json"
    extra: Dict[str, Any] = {}


# --- Configuration Manager Class ---
class ConfigurationManager:
    """Manages loading and validation of configuration from YAML, JSON experiment files and environment variables."""
    def __init__(self, config_path: Union[str, Path] = CONFIG_FILEPATH):
        try:
            logger.info(f"Initializing ConfigurationManager with config file: {config_path}")
            self.config_path = Path(config_path)
            self.config = read_yaml(self.config_path)
            if not self.config:
                raise ValueError("Configuration error: config file is empty or invalid")
            logger.info("Configuration loaded successfully.")
        except LoopSoupException:
            raise
        except Exception as e:
            logger.error(f"Error initializing ConfigurationManager: {e}")
            raise LoopSoupException(e, error_type="InvalidConfig", exit_code=EXIT_USAGE)

    @staticmethod
    def _validate_section(section: str, config: Any, required_fields: List[str]) -> None:
        """Validates that required fields exist in a config section."""
        for field in required_fields:
            if not hasattr(config, field):
                raise ValueError(f"{field} not found in {section} configuration.")

    def _section(self, name: str, required_fields: List[str]) -> Any:
        section = self.config.get(name)
        if not section:
            raise ValueError(f"Configuration error: '{name}' section missing")
        self._validate_section(name, section, required_fields)
        return section

    def get_engine_config(self) -> EngineConfig:
        """Extracts and validates exact-engine configuration."""
        try:
            logger.info("Loading engine configuration")
            engine = self._section("engine", ["precision_bits", "auto_precision"])
            return EngineConfig(
                precision_bits=int(engine.precision_bits),
                auto_precision=bool(engine.auto_precision),
                enumeration_cap=int(engine.get("enumeration_cap", 10)),
                refinement_cap=int(engine.get("refinement_cap", EngineConfig.refinement_cap)),
                quadrature_tolerance=float(engine.get("quadrature_tolerance", 1e-10)),
                quadrature_bits=int(engine.get("quadrature_bits", 96)),
                mixture_series_terms=int(engine.get("mixture_series_terms", 80)),
            )
        except Exception as e:
            logger.error(f"Error loading engine configuration: {e}")
            raise LoopSoupException(e, error_type="InvalidConfig", exit_code=EXIT_USAGE)

    def get_sampler_settings(self, seed: Optional[int] = None) -> SamplerSettings:
        """Extracts and validates loop-sampler settings."""
        try:
            logger.info("Loading sampler configuration")
            sampler = self._section("sampler", ["tail_cutoff_epsilon", "mode"])
            return SamplerSettings(
                seed=int(sampler.get("seed", 0) if seed is None else seed),
                tail_cutoff_epsilon=float(sampler.tail_cutoff_epsilon),
                mode=str(sampler.mode),
                general_graph_cap=int(sampler.get("general_graph_cap", 64)),
                max_table_length=int(sampler.get("max_table_length", 1 << 22)),
                max_power_entries=int(sampler.get("max_power_entries", 1 << 24)),
            )
        except Exception as e:
            logger.error(f"Error loading sampler configuration: {e}")
            raise LoopSoupException(e, error_type="InvalidConfig", exit_code=EXIT_USAGE)

    def get_report_directory(self) -> Path:
        """Directory that relative report paths are written under (relative to the working directory)."""
        reports = self.config.get("reports") or {}
        return Path(reports.get("directory", "."))

    @staticmethod
    def get_thread_count(requested: Optional[int] = None) -> int:
        """Worker count: the request (default: all cores) capped by LOOPSOUP_THREADS."""
        threads = int(requested) if requested else (os.cpu_count() or 1)
        cap = os.getenv(THREADS_ENV_VAR)
        if cap:
            try:
                threads = min(threads, max(1, int(cap)))
            except ValueError:
                logger.warning(f"{THREADS_ENV_VAR}={cap!r} is not an integer, ignoring it")
        return max(1, threads)

    def get_experiment_config(self, kind: str, overrides: Optional[Dict[str, Any]] = None,
                              config_file: Optional[Path] = None) -> ExperimentConfig:
        """Merges YAML defaults <- per-kind YAML defaults <- JSON file <- CLI overrides into an ExperimentConfig."""
        try:
            logger.info(f"Loading experiment configuration for {kind}")
            if kind not in EXPERIMENT_KINDS:
                raise ValueError(f"unknown experiment kind '{kind}', expected one of {', '.join(EXPERIMENT_KINDS)}")
            experiment = self._section("experiment", ["defaults", "kinds"])
            merged: Dict[str, Any] = dict(experiment.defaults.to_dict())
            if kind == "er-baseline" and self.config.get("er_baseline"):
                merged.update(self.config.er_baseline.to_dict())
            kind_defaults = experiment.kinds.get(kind)
            if kind_defaults:
                merged.update(kind_defaults.to_dict())
            if config_file is not None:
                merged.update(read_json(Path(config_file)))
            merged.update({key: value for key, value in (overrides or {}).items() if value is not None})
            spec = ExperimentFile(**merged)
            if spec.n is None:
                raise ValueError("n must be given")
            if spec.kappa is None and kind != "er-baseline":
                raise ValueError("kappa must be given")
            graph = None
            if spec.conductances is not None or spec.killing is not None:
                graph = {"n": spec.n, "kappa": spec.kappa, "conductances": spec.conductances,
                         "killing": spec.killing}
            output = Path(spec.output) if spec.output else None
            if output is not None and not output.is_absolute():
                output = self.get_report_directory() / output
            return ExperimentConfig(
                model=ModelParams(n=spec.n, kappa=spec.kappa if spec.kappa is not None else 1.0, alpha=spec.alpha),
                kind=kind,
                samples=spec.samples,
                seed=spec.seed,
                batches=min(spec.batches, spec.samples),
                precision_bits=spec.precision_bits,
                d=spec.d,
                k=spec.k,
                epsilon=spec.epsilon,
                c=spec.c,
                thetas=tuple(spec.thetas),
                partitions=spec.partitions,
                graph=graph,
                z_band=spec.z_band,
                threads=self.get_thread_count(spec.threads),
                output=output,
                format=spec.format,
                extra=dict(spec.extra),
            )
        except LoopSoupException as e:
            logger.error(f"Error loading experiment configuration: {e.error}")
            raise
        except (ValidationError, ValueError, TypeError) as e:
            logger.error(f"Error loading experiment configuration: {e}")
            raise LoopSoupException(e, error_type="InvalidConfig", context={"kind": kind}, exit_code=EXIT_USAGE)
