"""Command-line interface for level-synth."""

import argparse
import logging
import sys
import time
from pathlib import Path
from typing import Callable, Dict, Optional

import pydantic

from level_synth.errors import MissingArtifactError, ValidationError
from level_synth.pipeline.config import PathsConfig, PipelineConfig
from level_synth.pipeline.runner import PipelineRunner
from level_synth.utils.logger import (
    create_log_directory,
    save_run_metadata,
    save_run_summary,
    setup_logger,
    setup_run_logger,
)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2

STAGES = [
    "ingest",
    "segment",
    "cluster",
    "model",
    "generate",
    "evaluate",
    "sweep",
    "render",
    "pipeline",
    "synth",
]


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="Path to YAML configuration file")
    parser.add_argument(
        "--output", type=Path, default=None, help="Output directory (overrides config)"
    )
    parser.add_argument(
        "--seed", type=int, default=None, help="Master seed (required without --config)"
    )
    parser.add_argument(
        "--log-level",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        default="INFO",
        help="Console and file log level",
    )
    parser.add_argument(
        "--no-progress", action="store_true", help="Disable progress bars"
    )
    parser.add_argument(
        "--no-log-dir",
        action="store_true",
        help="Do not create a per-run log directory (overrides config)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="level-synth",
        description="Learn level-design style from gameplay traces and generate new sections",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Full run on the synthetic treetop corpus
  level-synth pipeline --config configs/treetop.yaml

  # Single stages, each reading the previous stage's artifact
  level-synth segment --config configs/default.yaml --trace out/ingest/trace.json
  level-synth generate --config configs/default.yaml --p-C 0.6 --p-E 0.05

  # Without a config file the output directory and seed are required
  level-synth synth --output ./out --seed 7
        """,
    )
    subparsers = parser.add_subparsers(dest="command", help="Stage to run")

    synth = subparsers.add_parser("synth", help="Write a synthetic corpus with ground truth")
    _add_common(synth)
    synth.add_argument(
        "--kind", choices=["treetop", "random"], default=None, help="Corpus kind (overrides config)"
    )
    synth.add_argument(
        "--walker", action="store_true", help="Animate a walker sprite (overrides config)"
    )

    ingest = subparsers.add_parser("ingest", help="Turn raster frames into a trace")
    _add_common(ingest)
    ingest.add_argument("--frames", type=Path, default=None, help="Directory of frame_<n>.png")
    ingest.add_argument("--atlas", type=Path, default=None, help="Atlas manifest (YAML)")
    ingest.add_argument(
        "--tolerance", type=float, default=None, help="Match tolerance (overrides config)"
    )
    ingest.add_argument("--trace-id", default=None, help="Trace id (default: directory name)")

    segment = subparsers.add_parser("segment", help="Split traces into level sections")
    _add_common(segment)
    segment.add_argument(
        "--trace", type=Path, action="append", default=None, help="Trace file (repeatable)"
    )
    segment.add_argument(
        "--threshold", type=float, default=None, help="Boundary threshold (overrides config)"
    )

    cluster = subparsers.add_parser("cluster", help="Categorize high-interaction sections")
    _add_common(cluster)
    cluster.add_argument(
        "--sections", type=Path, action="append", default=None, help="Section report (repeatable)"
    )
    cluster.add_argument(
        "--k-max",
        "--kmax",
        dest="k_max",
        type=int,
        default=None,
        help="Largest K (overrides config)",
    )
    cluster.add_argument(
        "--fk-threshold", type=float, default=None, help="f(K) acceptance threshold"
    )

    model = subparsers.add_parser("model", help="Build the style model")
    _add_common(model)
    model.add_argument("--clusters", type=Path, default=None, help="Cluster file")
    model.add_argument(
        "--cluster-id", type=int, default=None, help="Cluster to model (default: largest)"
    )
    model.add_argument(
        "--fk-threshold", type=float, default=None, help="f(K) threshold for S node clustering"
    )

    generate = subparsers.add_parser("generate", help="Enumerate new sections")
    _add_common(generate)
    generate.add_argument("--model", type=Path, default=None, help="Style model file")
    generate.add_argument(
        "--p-E", dest="p_E", type=float, default=None, help="Required-edge threshold"
    )
    generate.add_argument(
        "--p-C", dest="p_C", type=float, default=None, help="Coexistence threshold"
    )
    generate.add_argument("--l-node", type=int, default=None, help="Restrict to one L node")
    generate.add_argument("--no-dedup", action="store_true", help="Keep duplicate outputs")

    evaluate = subparsers.add_parser("evaluate", help="Score generated sections")
    _add_common(evaluate)
    evaluate.add_argument("--model", type=Path, default=None, help="Style model file")
    evaluate.add_argument(
        "--generated", type=Path, default=None, help="Directory holding manifest.json"
    )
    evaluate.add_argument("--sample-size", type=int, default=None, help="Sections sampled")

    sweep = subparsers.add_parser("sweep", help="Sweep p_C and p_E")
    _add_common(sweep)
    sweep.add_argument("--model", type=Path, default=None, help="Style model file")
    sweep.add_argument("--sample-size", type=int, default=None, help="Sections sampled per row")

    render = subparsers.add_parser("render", help="ASCII and PNG images of sections")
    _add_common(render)
    render.add_argument(
        "--section", type=Path, action="append", default=None, help="Section file (repeatable)"
    )
    render.add_argument("--atlas", type=Path, default=None, help="Atlas manifest for sprite art")
    render.add_argument("--print", action="store_true", help="Also print the ASCII grids")

    pipeline = subparsers.add_parser(
        "pipeline", help="synth, ingest, segment, cluster, model, generate, evaluate, sweep, render"
    )
    _add_common(pipeline)
    return parser


def load_config(args: argparse.Namespace) -> PipelineConfig:
    """Config file plus the flags that were explicitly given."""
    if args.config:
        if not args.config.exists():
            raise MissingArtifactError(args.config, stage=args.command)
        config = PipelineConfig.from_yaml(args.config)
    else:
        if args.output is None or args.seed is None:
            raise ValidationError("--output and --seed are required when not using --config")
        config = PipelineConfig(seed=args.seed, paths=PathsConfig(output_dir=args.output))

    # Apply command-line overrides only if explicitly provided
    if args.output is not None:
        config.paths.output_dir = args.output
    if args.seed is not None:
        config.seed = args.seed
    if args.no_log_dir:
        config.log_to_file = False

    command = args.command
    if command == "synth":
        if args.kind is not None:
            config.corpus.kind = args.kind
        if args.walker:
            config.corpus.walker = True
    elif command == "ingest":
        if args.tolerance is not None:
            config.vision.tolerance = args.tolerance
    elif command == "segment":
        if args.threshold is not None:
            config.segmentation.boundary_threshold = args.threshold
    elif command == "cluster":
        if args.k_max is not None:
            config.clustering.k_max = args.k_max
        if args.fk_threshold is not None:
            config.clustering.fk_threshold = args.fk_threshold
    elif command == "model":
        if args.cluster_id is not None:
            config.model.cluster = args.cluster_id
        if args.fk_threshold is not None:
            config.model.fk_threshold = args.fk_threshold
    elif command == "generate":
        if args.model is not None:
            config.paths.model = args.model
        if args.p_E is not None:
            config.generation.p_E = args.p_E
        if args.p_C is not None:
            config.generation.p_C = args.p_C
        if args.l_node is not None:
            config.generation.l_node = args.l_node
        if args.no_dedup:
            config.generation.dedup = False
    elif command in ("evaluate", "sweep"):
        if args.model is not None:
            config.paths.model = args.model
        if args.sample_size is not None:
            config.evaluation.sample_size = args.sample_size
            config.sweep.sample_size = args.sample_size
    elif command == "render":
        if args.atlas is not None:
            config.paths.atlas_manifest = args.atlas

    # re-run field validation on the overridden values
    return PipelineConfig.model_validate(config.model_dump())


def run_command(args: argparse.Namespace, config: PipelineConfig, logger: logging.Logger) -> Dict:
    runner = PipelineRunner(config, progress=not args.no_progress)
    command = args.command
    handlers: Dict[str, Callable[[], object]] = {
        "synth": runner.synth,
        "ingest": lambda: runner.ingest(args.frames, args.atlas, args.trace_id),
        "segment": lambda: runner.segment(args.trace),
        "cluster": lambda: runner.cluster(args.sections),
        "model": lambda: runner.model(args.clusters),
        "generate": runner.generate,
        "evaluate": lambda: runner.evaluate(generate_dir=args.generated),
        "sweep": runner.sweep,
        "render": lambda: runner.render(args.section),
        "pipeline": runner.run,
    }
    result = handlers[command]()

    if command == "render" and args.print:
        for path in result:
            if path.suffix == ".png":
                print(path.with_suffix(".txt").read_text(), end="")
    details = result if isinstance(result, dict) else {}
    details["timings"] = dict(runner.timings)
    logger.info(f"{command} finished; artifacts in {config.paths.output_dir}")
    return details


def main(argv: Optional[list] = None) -> int:
    """Main CLI entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help()
        return EXIT_VALIDATION

    level = getattr(logging, args.log_level)
    logger = setup_logger(level=level)

    try:
        config = load_config(args)
        log_dir: Optional[Path] = None
        if config.log_to_file:
            log_dir = create_log_directory(Path(config.paths.output_dir), run_type=args.command)
            logger = setup_run_logger(log_dir, run_type=args.command, level=level)
            save_run_metadata(log_dir, args.command, vars(args), args.config)

        started = time.perf_counter()
        details = run_command(args, config, logger)
        if log_dir is not None:
            save_run_summary(log_dir, args.command, time.perf_counter() - started, details)
        return EXIT_OK
    except (ValidationError, pydantic.ValidationError) as e:
        logger.error(f"Error: {e}")
        return EXIT_VALIDATION
    except Exception as e:
        logger.error(f"Error: {e}", exc_info=True)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
