from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Callable, Sequence

import structlog

from src.core.errors import ConfigurationError, ParameterError, SimulationError
from src.core.params import IcicMode, IcicState, Objective
from src.repositories.results import ResultRepository
from src.utils.config import SimConfig, get_settings, load_config
from src.workflows.campaign import build_scene, evaluate_scene, run_campaign
from src.workflows.experiments import compare_icic_modes, path_loss_cdfs, tau_surface
from src.workflows.optimizer import optimize


logger = structlog.get_logger(__name__)


def configure_logging(level: str = "INFO") -> None:
    """Configure structlog for JSON logs with reasonable defaults."""
    timestamper = structlog.processors.TimeStamper(fmt="iso")

    structlog.configure(
        processors=[
            structlog.stdlib.filter_by_level,
            structlog.contextvars.merge_contextvars,
            timestamper,
            structlog.processors.add_log_level,
            structlog.processors.EventRenamer("message"),
            structlog.processors.dict_tracebacks,
            structlog.processors.JSONRenderer(),
        ],
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )

    # Ensure stdlib logs are forwarded in JSON too
    handler = logging.StreamHandler(sys.stdout)
    handler.setFormatter(logging.Formatter("%(message)s"))
    root = logging.getLogger()
    root.handlers.clear()
    root.addHandler(handler)
    root.setLevel(getattr(logging, level.upper(), logging.INFO))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON simulation config; absent fields take defaults")
    common.add_argument("--seed", type=int, help="master seed (mandatory unless set in the config)")
    common.add_argument("--trials", type=int, help="Monte-Carlo trials per state")
    common.add_argument(
        "--icic", choices=[m.value for m in IcicMode], help="restrict the ICIC family"
    )
    common.add_argument(
        "--uabs-height", type=float, choices=[36.0, 50.0], help="UABS height scenario in meters"
    )
    common.add_argument(
        "--objective", choices=[o.value for o in Objective], help="KPI maximised by the search"
    )
    common.add_argument("--threads", type=int, help="worker threads; never changes results")
    common.add_argument("--out", help="JSON result document")
    common.add_argument("--layout-csv", help="node positions of the first trial")
    common.add_argument("--assignments-csv", help="per-UE association of the first trial")
    common.add_argument("--flat-csv", help="per-trial KPI table")
    common.add_argument("--trace-csv", help="every evaluated state with both KPIs")
    common.add_argument("--surface-csv", help="peak KPIs per CRE bias pair")
    common.add_argument("--cdf-csv", help="path-loss CDF per link class")

    parser = argparse.ArgumentParser(
        prog="aghetnet",
        description="Monte-Carlo simulator of an air/ground HetNet under eICIC/FeICIC and CRE",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="evaluate the configured ICIC state")
    sub.add_parser("optimize", parents=[common], help="brute-force search over the ICIC grid")
    sub.add_parser("plcdf", parents=[common], help="path-loss CDF per link class")
    sub.add_parser("surface", parents=[common], help="peak KPIs over the CRE bias grid")
    sub.add_parser("compare", parents=[common], help="optimised KPIs of none/eICIC/FeICIC")
    return parser


def config_from_args(args: argparse.Namespace) -> SimConfig:
    return load_config(
        args.config,
        seed=args.seed,
        trials=args.trials,
        icic_mode=args.icic,
        uabs_height_m=args.uabs_height,
        objective=args.objective,
        threads=args.threads,
    )


def simulation_state(config: SimConfig) -> IcicState:
    """The configured state with α pinned by the ICIC family of `none` and `eicic`."""
    if config.icic_mode is IcicMode.NONE:
        return config.state.model_copy(update={"alpha_mbs": 1.0, "alpha_pbs": 1.0})
    if config.icic_mode is IcicMode.EICIC:
        return config.state.model_copy(update={"alpha_mbs": 0.0, "alpha_pbs": 0.0})
    return config.state


def _path(flag: str | None, configured: str | None, default: str) -> str:
    return flag or configured or default


def _optional_path(flag: str | None, configured: str | None) -> str | None:
    return flag or configured


def cmd_simulate(args: argparse.Namespace, config: SimConfig, repo: ResultRepository) -> None:
    state = simulation_state(config)
    report = run_campaign(config, state, seed=config.master_seed, threads=args.threads)
    outputs = config.outputs
    repo.write_report(_path(args.out, outputs.report, "simulate.json"), report)
    if flat := _optional_path(args.flat_csv, outputs.flat_csv):
        repo.write_flat_csv(flat, report)
    layout_csv = _optional_path(args.layout_csv, outputs.layout_csv)
    assignments_csv = _optional_path(args.assignments_csv, outputs.assignments_csv)
    if layout_csv or assignments_csv:
        scene = build_scene(config, 0, config.master_seed)
        if layout_csv:
            repo.write_layout_csv(layout_csv, scene.layout)
        if assignments_csv:
            outcome = evaluate_scene(scene, config.evaluated_state(state), config)
            repo.write_assignments_csv(assignments_csv, outcome.batch)


def cmd_optimize(args: argparse.Namespace, config: SimConfig, repo: ResultRepository) -> None:
    result = optimize(config.search_grid(), config, seed=config.master_seed, threads=args.threads)
    outputs = config.outputs
    repo.write_search(_path(args.out, outputs.report, "optimize.json"), result)
    if trace := _optional_path(args.trace_csv, outputs.trace_csv):
        repo.write_trace_csv(trace, result)


def cmd_surface(args: argparse.Namespace, config: SimConfig, repo: ResultRepository) -> None:
    points, result = tau_surface(config, seed=config.master_seed, threads=args.threads)
    outputs = config.outputs
    repo.write_surface_csv(_path(args.surface_csv, outputs.surface_csv, "surface.csv"), points)
    if out := _optional_path(args.out, outputs.report):
        repo.write_surface_report(out, points, result)
    if trace := _optional_path(args.trace_csv, outputs.trace_csv):
        repo.write_trace_csv(trace, result)


def cmd_plcdf(args: argparse.Namespace, config: SimConfig, repo: ResultRepository) -> None:
    cdfs, checks = path_loss_cdfs(config, seed=config.master_seed)
    outputs = config.outputs
    repo.write_cdf_csv(_path(args.cdf_csv, outputs.cdf_csv, "plcdf.csv"), cdfs)
    if out := _optional_path(args.out, outputs.report):
        repo.write_cdf_report(out, checks)
    for check in checks:
        logger.info(
            "path_loss_endpoint",
            link_class=check.link_class.value,
            endpoint_db=check.endpoint_db,
            expected_db=check.expected_db,
            within=check.within,
            informative=check.informative,
        )


def cmd_compare(args: argparse.Namespace, config: SimConfig, repo: ResultRepository) -> None:
    comparison = compare_icic_modes(config, seed=config.master_seed, threads=args.threads)
    repo.write_comparison(_path(args.out, config.outputs.report, "compare.json"), comparison)


Handler = Callable[[argparse.Namespace, SimConfig, ResultRepository], None]

HANDLERS: dict[str, Handler] = {
    "simulate": cmd_simulate,
    "optimize": cmd_optimize,
    "plcdf": cmd_plcdf,
    "surface": cmd_surface,
    "compare": cmd_compare,
}


def main(argv: Sequence[str] | None = None) -> int:
    """Run one subcommand; returns 0 on success, 1 on runtime failure, 2 on usage errors."""
    settings = get_settings()
    configure_logging(settings.log_level)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    structlog.contextvars.bind_contextvars(command=args.command)
    try:
        config = config_from_args(args)
        repo = ResultRepository(
            config.model_dump(mode="json"), app_version=settings.app_version
        )
        HANDLERS[args.command](args, config, repo)
        logger.info("command_completed")
    except (ConfigurationError, ParameterError) as exc:
        logger.error("command_failed", code=exc.code, field=exc.field, error=str(exc))
        sys.stderr.write(f"aghetnet {args.command}: {exc}\n")
        return 2
    except SimulationError as exc:
        logger.error("command_failed", code=exc.code, field=exc.field, error=str(exc))
        sys.stderr.write(f"aghetnet {args.command}: {exc}\n")
        return 1
    except OSError as exc:
        logger.error("command_failed", code="sim.io_error", error=str(exc))
        sys.stderr.write(f"aghetnet {args.command}: {exc}\n")
        return 1
    finally:
        structlog.contextvars.unbind_contextvars("command")
    return 0


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
