#! /usr/bin/env python
# -*- coding: utf-8 -*-

import argparse
import asyncio
import logging
import sys
import time
from dataclasses import asdict, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

from analysis.convergence_analyzer import ConvergenceAnalyzer
from analysis.verification import run_verification_suites
from core.config_loader import ConfigLoader
from core.decomposition import Decomposition, DualIterate
from core.duality import discrete_certificate
from core.exceptions import ImageFormatError, InvalidInputError, ProjectionConvergenceError, SubmodularError
from core.image_io import load_image
from core.instances import parse_synthetic_spec, random_decomposition
from core.models import ClaimStatus, FullConfig, GapTrace, LogLevel, RunSpec, SolverKind, VerifySuite
from core.resource_monitor import RunResourceMonitor
from core.segmentation import SegmentationInstance, instance_from_image, load_unary, synthetic_segmentation
from core.set_functions import brute_force_min, close_enough
from core.solvers import run_solver
from core.trace_writer import TraceWriter
from utils.logger import close_logger, setup_logger
from utils.rng import make_rng

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_BAD_INPUT = 2
EXIT_IO = 3


def _solver_list(text: str) -> List[SolverKind]:
    try:
        return [SolverKind(part.strip().lower()) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"unknown solver in {text!r}; choose from rcdm, acdm, ap") from e


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Decomposable submodular minimization by block coordinate descent")
    subparsers = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, help="YAML file with solver, segmentation and run sections.")
    common.add_argument("--seed", type=int, help="Seed of every random stream in the run.")
    common.add_argument("--out", type=str, help="Output directory.")
    common.add_argument("--log-level", type=str.upper, choices=[level.value for level in LogLevel])
    common.add_argument("--wall-clock", action="store_true", help="Write measured seconds into traces.")

    instance = argparse.ArgumentParser(add_help=False)
    instance.add_argument("--max-projections", type=_positive_int)
    instance.add_argument("--gap-tol", type=float)
    instance.add_argument("--trace-every", type=_positive_int)
    instance.add_argument("--stop-on-discrete", action="store_true", default=None)
    instance.add_argument("--epoch-length", type=_positive_int, help="ACDM iterations per epoch.")
    instance.add_argument("--record-theta", action="store_true", default=None)
    instance.add_argument("--image", type=str, help="Binary PPM (P6) or PGM (P5) image.")
    instance.add_argument("--unary", type=str, help="Unary potentials, one float per pixel.")
    instance.add_argument("--lambda", dest="lambda_", type=float)
    instance.add_argument("--sigma", type=float)
    instance.add_argument("--synthetic", type=str, help="Random instance, e.g. n=6,r=3,seed=1.")
    instance.add_argument("--synthetic-grid", type=_positive_int, help="Side of a synthetic square image.")

    solve = subparsers.add_parser("solve", parents=[common, instance], help="Run one solver.")
    solve.add_argument("--solver", type=SolverKind, choices=list(SolverKind), default=SolverKind.RCDM)
    solve.add_argument("--verify", action="store_true", help="Cross-check F(S) against brute force (n <= 25).")

    compare = subparsers.add_parser("compare", parents=[common, instance], help="Run several solvers.")
    compare.add_argument("--solvers", type=_solver_list, default=list(SolverKind))

    verify = subparsers.add_parser("verify", parents=[common], help="Run verification suites.")
    verify.add_argument("suite", type=VerifySuite, choices=list(VerifySuite))
    verify.add_argument("--trials", type=_positive_int, default=100_000, help="Monte Carlo samples.")
    verify.add_argument("--rate-seeds", type=_positive_int, default=200)
    verify.add_argument("--lipschitz", type=float, default=2.0)
    return parser


def build_run_spec(args: argparse.Namespace, config: FullConfig) -> RunSpec:
    """Defaults < YAML < flags."""
    overrides = {key: getattr(args, attr) for key, attr in (
        ("seed", "seed"), ("max_projections", "max_projections"), ("gap_tol", "gap_tol"),
        ("trace_every", "trace_every"), ("stop_on_discrete", "stop_on_discrete"),
        ("epoch_length", "epoch_length"), ("record_theta", "record_theta"), ("lipschitz", "lipschitz"),
    ) if getattr(args, attr, None) is not None}
    solver_config = replace(config.solver, **overrides)
    segmentation = replace(config.segmentation, **{key: getattr(args, key) for key in ("lambda_", "sigma")
                                                   if getattr(args, key, None) is not None})
    run = config.run
    if args.out is not None:
        run = replace(run, output_directory=args.out)
    if args.log_level is not None:
        run = replace(run, log_level=LogLevel(args.log_level))
    if args.wall_clock:
        run = replace(run, deterministic_trace=False)

    if args.command == "compare":
        solvers = args.solvers
        if len(set(solvers)) < 2:
            raise InvalidInputError("compare needs at least two distinct solvers")
    elif args.command == "solve":
        solvers = [args.solver]
    else:
        solvers = []

    synthetic = None
    if getattr(args, "synthetic", None) is not None:
        synthetic = parse_synthetic_spec(args.synthetic, default_seed=solver_config.seed)
    return RunSpec(command=args.command, solvers=solvers, synthetic=synthetic,
                   synthetic_grid=getattr(args, "synthetic_grid", None), image_path=getattr(args, "image", None),
                   unary_path=getattr(args, "unary", None), solver_config=solver_config, segmentation=segmentation,
                   run=run, verify_brute_force=bool(getattr(args, "verify", False)))


def build_instance(spec: RunSpec) -> Tuple[Decomposition, Dict[str, Any], Optional[SegmentationInstance]]:
    seed = spec.solver_config.seed
    if spec.synthetic is not None:
        decomposition = random_decomposition(spec.synthetic)
        return decomposition, {"source": "synthetic", **asdict(spec.synthetic), "r": decomposition.r}, None
    if spec.synthetic_grid is not None:
        segmentation = synthetic_segmentation(spec.synthetic_grid, seed, spec.segmentation,
                                              make_rng(seed, "synthetic-image"))
        return segmentation.decomposition, dict(segmentation.metadata), segmentation

    image = load_image(spec.image_path)
    unary = load_unary(spec.unary_path, image.n) if spec.unary_path else None
    segmentation = instance_from_image(image, spec.segmentation, unary, source=spec.image_path)
    if spec.unary_path:
        segmentation.metadata["unary_path"] = spec.unary_path
    return segmentation.decomposition, dict(segmentation.metadata), segmentation


async def run_solvers(spec: RunSpec, decomposition: Decomposition, writer: TraceWriter
                      ) -> Tuple[Dict[SolverKind, Tuple[DualIterate, GapTrace]], float, int]:
    """Runs every requested solver concurrently; returns results, wall seconds and peak RSS."""
    monitor = RunResourceMonitor(writer, spec.run.monitoring_interval_seconds, label=spec.command)
    if spec.run.monitor_resources:
        await monitor.start_monitoring()
    start = time.perf_counter()
    try:
        results = await asyncio.gather(*(asyncio.to_thread(run_solver, kind, decomposition, spec.solver_config)
                                         for kind in spec.solvers))
    finally:
        elapsed = time.perf_counter() - start
        if spec.run.monitor_resources:
            await monitor.stop_monitoring()
    logger.info(f"Solvers finished in {elapsed:.3f}s")
    return dict(zip(spec.solvers, results)), elapsed, monitor.peak_rss_bytes


def report_solution(kind: SolverKind, decomposition: Decomposition, y: DualIterate, trace: GapTrace,
                    writer: TraceWriter, segmentation: Optional[SegmentationInstance], suffix: str = "") -> float:
    certificate = discrete_certificate(decomposition, y)
    last = trace.last
    writer.write_solution(y.primal(), name=f"solution{suffix}.txt")
    if segmentation is not None:
        writer.write_mask(certificate.subset, segmentation.grid.width, segmentation.grid.height,
                          name=f"mask{suffix}.pgm")
    prefix = f"solver={kind.value} " if suffix else ""
    print(f"{prefix}nu_s={last.nu_s:.17g} nu_d={last.nu_d:.17g} F={certificate.value:.17g}")
    return certificate.value


async def cmd_solve(spec: RunSpec, writer: TraceWriter) -> int:
    decomposition, metadata, segmentation = build_instance(spec)
    results, elapsed, peak_rss = await run_solvers(spec, decomposition, writer)
    kind = spec.solvers[0]
    y, trace = results[kind]

    writer.write_trace(trace)
    value = report_solution(kind, decomposition, y, trace, writer, segmentation)
    metadata.update({"solver": kind.value, "seed": spec.solver_config.seed, "projections": trace.last.projections,
                     "converged": trace.converged, "stop_reason": trace.stop_reason,
                     "wall_seconds": elapsed, "peak_rss_bytes": peak_rss})

    exit_code = EXIT_OK
    if spec.verify_brute_force:
        subset, best = brute_force_min(decomposition.oracle)
        metadata["brute_force_min"] = best
        if close_enough(value, best):
            logger.info(f"Brute force agrees: F={best:.12g} (minimizer {sorted(subset)})")
        else:
            logger.error(f"Brute force disagrees: solver F={value:.12g}, minimum F={best:.12g}")
            exit_code = EXIT_VIOLATION
    writer.write_metadata(metadata)
    return exit_code


async def cmd_compare(spec: RunSpec, writer: TraceWriter) -> int:
    decomposition, metadata, segmentation = build_instance(spec)
    results, elapsed, peak_rss = await run_solvers(spec, decomposition, writer)

    traces = {}
    for kind, (y, trace) in results.items():
        writer.write_trace(trace, name=f"trace_{kind.value}.csv")
        report_solution(kind, decomposition, y, trace, writer, segmentation, suffix=f"_{kind.value}")
        traces[kind.value] = trace

    analyzer = ConvergenceAnalyzer(traces)
    summary = analyzer.summary()
    analyzer.log_summary(summary)
    writer.write_summary(summary)
    metadata.update({"solvers": [kind.value for kind in spec.solvers], "seed": spec.solver_config.seed,
                     "wall_seconds": elapsed, "peak_rss_bytes": peak_rss})
    writer.write_metadata(metadata)
    return EXIT_OK


async def cmd_verify(args: argparse.Namespace, spec: RunSpec, writer: TraceWriter) -> int:
    reports = await asyncio.to_thread(run_verification_suites, args.suite, spec.solver_config.seed,
                                      args.trials, args.lipschitz, args.rate_seeds)
    for report in reports:
        print(report.to_line())
    writer.write_verification(reports)
    failed = [r.claim_id for r in reports if r.status is ClaimStatus.FAILED]
    skipped = [r.claim_id for r in reports if r.status is ClaimStatus.SKIPPED]
    if skipped:
        logger.warning(f"Skipped claims: {', '.join(skipped)}")
    if failed:
        logger.error(f"Violated claims: {', '.join(failed)}")
        return EXIT_VIOLATION
    return EXIT_OK


async def main_async(args: argparse.Namespace) -> int:
    """Async entry point."""
    # bootstrap logger for config loading, before the output directory is known
    root = setup_logger("", None, level=args.log_level or LogLevel.INFO)
    try:
        try:
            full_config = ConfigLoader(args.config).get_config()
            spec = build_run_spec(args, full_config)
            writer = TraceWriter(spec.run.output_directory, deterministic=spec.run.deterministic_trace)
            root = setup_logger("", writer.log_path, level=spec.run.log_level)
            logger.info(f"Command {spec.command}; output directory {writer.output_dir}")

            if spec.command == "solve":
                return await cmd_solve(spec, writer)
            if spec.command == "compare":
                return await cmd_compare(spec, writer)
            return await cmd_verify(args, spec, writer)
        except ImageFormatError as e:
            logger.error(f"Unreadable image: {e}", exc_info=True)
            return EXIT_IO
        except ProjectionConvergenceError as e:
            logger.error(f"Projection failed: {e}", exc_info=True)
            return EXIT_VIOLATION
        except SubmodularError as e:
            logger.error(f"Invalid input: {e}")
            return EXIT_BAD_INPUT
        except OSError as e:
            logger.error(f"I/O failure: {e}", exc_info=True)
            return EXIT_IO
    finally:
        close_logger(root)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_BAD_INPUT
    if getattr(args, "lipschitz", None) is not None and args.lipschitz <= 0:
        parser.print_usage(sys.stderr)
        return EXIT_BAD_INPUT
    return asyncio.run(main_async(args))


if __name__ == "__main__":
    sys.exit(main())
