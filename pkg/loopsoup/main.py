import argparse
import json
import sys
import time
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, List, Optional

from loopsoup.src.components.exact_engine import ExactEngine, loop_mass
from loopsoup.src.components.graph_model import GraphSpec
from loopsoup.src.config_entity.config_params import ModelParams
from loopsoup.src.config_settings.config_manager import ConfigurationManager
from loopsoup.src.constants import CONFIG_FILEPATH, EXPERIMENT_KINDS, REPORT_FORMATS
from loopsoup.src.pipeline.experiment_pipeline import ExperimentPipeline
from loopsoup.src.utils.common import read_json, read_json_any, write_text
from loopsoup.src.utils.exception import LoopSoupException, EXIT_IO, EXIT_USAGE
from loopsoup.src.utils.logger import LoggerConfigurator, logger

# flag name -> ExperimentConfig field
OVERRIDE_FLAGS = ("n", "kappa", "alpha", "d", "k", "samples", "seed", "batches", "precision_bits", "epsilon", "c",
                  "threads", "format")


def _json_list(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise argparse.ArgumentTypeError(f"not valid JSON: {e}")


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--n", type=int, help="number of vertices")
    common.add_argument("--kappa", type=float, help="killing rate at every vertex")
    common.add_argument("--alpha", type=float, help="soup intensity")
    common.add_argument("--d", type=int, help="cluster size")
    common.add_argument("--k", type=int, help="moment order")
    common.add_argument("--samples", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--batches", type=int)
    common.add_argument("--precision-bits", dest="precision_bits", type=int)
    common.add_argument("--epsilon", type=float)
    common.add_argument("--c", type=float, help="Erdos-Renyi edge constant, p = c/n")
    common.add_argument("--theta", dest="thetas", type=float, action="append")
    common.add_argument("--partition", dest="partitions", type=_json_list, action="append",
                        help='JSON list of blocks, e.g. "[[0],[1,2]]"; repeatable')
    common.add_argument("--config", dest="config_file", type=Path, help="JSON experiment file")
    common.add_argument("--threads", type=int)
    common.add_argument("--out", type=Path, help="write the result here instead of stdout")
    common.add_argument("--format", choices=REPORT_FORMATS)
    common.add_argument("--log-level", dest="log_level", default=None)
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="loopsoup", description="Loop soup clusters on complete graphs: "
                                     "exact values, sampling and Monte Carlo verification.")
    parser.add_argument("--settings", type=Path, default=CONFIG_FILEPATH, help="YAML settings file")
    sub = parser.add_subparsers(dest="command", required=True)

    exact = sub.add_parser("exact", parents=[common], help="print exact-engine values")
    exact.add_argument("--requests", type=Path, help='JSON list of {"op": ..., "args": {...}}')
    exact.add_argument("--upto", type=int, help="number of moments and cumulants (default n)")

    sample = sub.add_parser("sample", parents=[common], help="emit loop configurations as JSON lines")
    sample.add_argument("--count", type=int, default=1, help="number of soups")

    verify = sub.add_parser("verify", parents=[common], help="run a verification experiment")
    verify.add_argument("kind", choices=EXPERIMENT_KINDS)

    sub.add_parser("er", parents=[common], help="Erdos-Renyi baseline (verify er-baseline)")

    asymptotics = sub.add_parser("asymptotics", parents=[common], help="cumulant-ratio and loop-mass tables")
    asymptotics.add_argument("--n-values", dest="n_values", type=int, nargs="+", default=[100, 1000, 10000])
    asymptotics.add_argument("--d-values", dest="d_values", type=int, nargs="+", default=[2, 3])
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    overrides = {name: getattr(args, name, None) for name in OVERRIDE_FLAGS}
    overrides["thetas"] = args.thetas
    overrides["partitions"] = args.partitions
    overrides["output"] = str(args.out) if args.out else None
    return overrides


def _emit(text: str, out: Optional[Path]) -> None:
    if out is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        write_text(text, out)


def run_exact(args: argparse.Namespace, manager: ConfigurationManager) -> int:
    engine_config = manager.get_engine_config()
    if args.precision_bits:
        # an explicit precision is binding: too few bits is an error, not a silent upgrade
        engine_config = replace(engine_config, precision_bits=args.precision_bits, auto_precision=False)
    engine = ExactEngine(engine_config)
    if args.requests is not None:
        requests = read_json_any(args.requests)
        if not isinstance(requests, list):
            raise LoopSoupException(ValueError("request file must hold a JSON list"), error_type="InvalidConfig",
                                    exit_code=EXIT_USAGE)
        results = engine.evaluate_batch(requests)
    else:
        if args.n is None or args.kappa is None:
            raise LoopSoupException(ValueError("exact needs --n and --kappa (or --requests)"),
                                    error_type="InvalidConfig", exit_code=EXIT_USAGE)
        params = ModelParams(n=args.n, kappa=args.kappa, alpha=args.alpha or 1.0)
        upto = args.upto or params.n
        table = engine.cumulants(upto, params, args.precision_bits)
        results = {"cumulants": table.to_dict(),
                   "loop_mass": engine.render(loop_mass(params.n, params.kappa))}
        if upto >= params.n:
            results["prob_connected"] = engine.render(table.cumulant(params.n) / table.moment(params.n))
        if args.partitions:
            results["partitions"] = engine.evaluate_batch(
                [{"op": op, "args": {"n": params.n, "kappa": params.kappa, "alpha": params.alpha, "partition": p}}
                 for p in args.partitions for op in ("prob_finer", "prob_exact")])
    _emit(json.dumps(results, indent=2), args.out)
    return 0


def run_sample(args: argparse.Namespace, manager: ConfigurationManager) -> int:
    pipeline = ExperimentPipeline(manager)
    spec = read_json(args.config_file) if args.config_file else {}
    n = args.n or spec.get("n")
    kappa = args.kappa or spec.get("kappa", 1.0)
    if n is None:
        raise LoopSoupException(ValueError("sample needs --n"), error_type="InvalidConfig", exit_code=EXIT_USAGE)
    graph = GraphSpec.from_dict({**spec, "n": n, "kappa": kappa}) if spec.get("conductances") or spec.get(
        "killing") else None
    params = ModelParams(n=int(n), kappa=kappa, alpha=args.alpha or spec.get("alpha", 1.0))
    seed = args.seed if args.seed is not None else pipeline.sampler_settings.seed
    start_time = time.time()
    lines = (soup.to_json_line() for soup in pipeline.stream_soups(params, args.count, seed, graph))
    if args.out is None:
        for line in lines:
            sys.stdout.write(line + "\n")
    else:
        write_text("".join(line + "\n" for line in lines), args.out)
    logger.info(f"Sampled {args.count} soups in {time.time() - start_time:.2f} seconds")
    return 0


def run_verify(args: argparse.Namespace, manager: ConfigurationManager, kind: str) -> int:
    pipeline = ExperimentPipeline(manager)
    config = manager.get_experiment_config(kind, _overrides(args), args.config_file)
    report = pipeline.run(config)
    if config.output is None:
        _emit(report.render(config.format), None)
    return 0 if report.passed else 1


def run_asymptotics(args: argparse.Namespace, manager: ConfigurationManager) -> int:
    pipeline = ExperimentPipeline(manager)
    table = pipeline.asymptotics_table(args.n_values, args.d_values, args.kappa or 1.0, args.alpha or 1.0)
    text = table.to_csv(index=False) if args.format == "csv" else table.to_json(orient="records", indent=2)
    _emit(text, args.out)
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    """Entry point; returns 0 iff every claimed band holds."""
    args = build_parser().parse_args(argv)
    if args.log_level:
        LoggerConfigurator.set_level(args.log_level)
    try:
        manager = ConfigurationManager(args.settings)
        if args.command == "exact":
            return run_exact(args, manager)
        if args.command == "sample":
            return run_sample(args, manager)
        if args.command == "verify":
            return run_verify(args, manager, args.kind)
        if args.command == "er":
            return run_verify(args, manager, "er-baseline")
        return run_asymptotics(args, manager)
    except LoopSoupException as e:
        logger.error(f"{args.command} failed: {e.error_type}: {e.error}")
        sys.stderr.write(json.dumps(e.to_dict()) + "\n")
        return e.exit_code
    except OSError as e:
        logger.error(f"{args.command} failed with an I/O error: {e}")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
