from __future__ import annotations

import itertools
from collections.abc import Iterator, Sequence
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import structlog
from pydantic import ValidationError

from src.adapters.metrics import Metrics
from src.core.errors import ConfigurationError
from src.core.params import IcicState, Objective, SearchGrid
from src.core.results import SearchResult, StateEvaluation
from src.utils.config import SimConfig
from src.workflows.campaign import TrialScene, build_scenes, evaluate_state, worker_count


logger = structlog.get_logger(__name__)

_DIMENSIONS = (
    "alpha_values",
    "beta_values",
    "rho_mbs_values",
    "rho_pbs_values",
    "rho_uabs_values",
    "tau_pbs_values",
    "tau_uabs_values",
)


def enumerate_states(grid: SearchGrid, *, uabs_height_m: float | None = None) -> Iterator[IcicState]:
    """Cartesian product of the grid in lexicographic order.

    Order of dimensions, slowest first: alpha_mbs, alpha_pbs, beta_mbs, beta_pbs,
    rho_mbs, rho_pbs, rho_uabs, tau_pbs, tau_uabs. With tied tiers the PBS α and β
    follow the MBS value instead of varying on their own.
    """
    for name in _DIMENSIONS:
        if not getattr(grid, name):
            raise ConfigurationError(f"grid.{name} must not be empty", field=f"grid.{name}")

    alphas = (
        [(a, a) for a in grid.alpha_values]
        if grid.tie_tiers
        else list(itertools.product(grid.alpha_values, repeat=2))
    )
    betas = (
        [(b, b) for b in grid.beta_values]
        if grid.tie_tiers
        else list(itertools.product(grid.beta_values, repeat=2))
    )
    for (a_m, a_p), (b_m, b_p), r_m, r_p, r_u, t_p, t_u in itertools.product(
        alphas,
        betas,
        grid.rho_mbs_values,
        grid.rho_pbs_values,
        grid.rho_uabs_values,
        grid.tau_pbs_values,
        grid.tau_uabs_values,
    ):
        try:
            yield IcicState(
                alpha_mbs=a_m,
                alpha_pbs=a_p,
                beta_mbs=b_m,
                beta_pbs=b_p,
                rho_mbs=r_m,
                rho_pbs=r_p,
                rho_uabs=r_u,
                tau_pbs=t_p,
                tau_uabs=t_u,
                uabs_height_m=uabs_height_m,
            )
        except ValidationError as exc:
            first = exc.errors()[0]
            field = f"grid.{first['loc'][0]}"
            raise ConfigurationError(f"{field}: {first['msg']}", field=field) from exc


def objective_value(objective: Objective, fifth_percentile_se: float, coverage: float) -> float:
    return fifth_percentile_se if objective is Objective.FIVE_PSE else coverage


def best_index(trace: Sequence[StateEvaluation]) -> int:
    """Index of the maximum value; the first one wins ties."""
    best = 0
    for i, evaluation in enumerate(trace):
        if evaluation.value > trace[best].value:
            best = i
    return best


def search_scenes(
    scenes: Sequence[TrialScene],
    grid: SearchGrid,
    config: SimConfig,
    *,
    threads: int | None = None,
) -> SearchResult:
    """Evaluate every grid state on the same scenes and keep the argmax."""
    total = grid.cardinality
    logger.info("search_started", states=total, objective=grid.objective.value)
    states = list(enumerate_states(grid, uabs_height_m=config.uabs_height_m))

    def evaluate(item: tuple[int, IcicState]) -> StateEvaluation:
        index, state = item
        records = evaluate_state(scenes, state, config)
        fifth = float(np.mean([r.fifth_percentile_se for r in records]))
        coverage = float(np.mean([r.coverage_probability for r in records]))
        evaluation = StateEvaluation(
            index=index,
            state=state,
            fifth_percentile_se=fifth,
            coverage_probability=coverage,
            value=objective_value(grid.objective, fifth, coverage),
        )
        Metrics.inc("states_evaluated")
        logger.info(
            "state_evaluated",
            index=index,
            total=total,
            value=evaluation.value,
            objective=grid.objective.value,
        )
        return evaluation

    with ThreadPoolExecutor(max_workers=worker_count(config, threads)) as pool:
        trace = list(pool.map(evaluate, enumerate(states)))

    best = best_index(trace)
    return SearchResult(
        best_state=trace[best].state,
        best_value=trace[best].value,
        evaluated=len(trace),
        trace=trace,
        objective=grid.objective,
        best_index=best,
    )


def optimize(
    grid: SearchGrid,
    config: SimConfig,
    trials: int | None = None,
    seed: int | None = None,
    *,
    threads: int | None = None,
) -> SearchResult:
    """Brute-force argmax of the grid objective with common random numbers across states."""
    scenes = build_scenes(config, trials, seed, threads)
    result = search_scenes(scenes, grid, config, threads=threads)
    logger.info(
        "optimization_completed",
        evaluated=result.evaluated,
        best_index=result.best_index,
        best_value=result.best_value,
        objective=result.objective.value,
    )
    return result
