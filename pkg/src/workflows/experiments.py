from __future__ import annotations

import math
from collections.abc import Sequence

import numpy as np
import structlog

from src.core.params import IcicMode, LinkClass, Objective
from src.core.results import (
    EmpiricalCdf,
    EndpointCheck,
    IcicComparison,
    ModeOutcome,
    SearchResult,
    SurfacePoint,
)
from src.services.channel import path_loss_cdf
from src.services.deployment import build_layout
from src.utils.config import SimConfig
from src.workflows.campaign import TrialScene, build_scenes, trial_seed
from src.workflows.optimizer import search_scenes


logger = structlog.get_logger(__name__)

# Expected maximum path loss per link class: (dB, tolerance dB, informative only).
ENDPOINT_EXPECTATIONS: dict[LinkClass, tuple[float, float, bool]] = {
    LinkClass.ATA: (216.0, 10.0, False),
    LinkClass.ATG: (154.0, 10.0, False),
    LinkClass.GTG: (255.0, 25.0, True),
}

COMPARED_MODES = (IcicMode.NONE, IcicMode.EICIC, IcicMode.FEICIC)


def tau_surface(
    config: SimConfig,
    *,
    trials: int | None = None,
    seed: int | None = None,
    threads: int | None = None,
    scenes: Sequence[TrialScene] | None = None,
) -> tuple[list[SurfacePoint], SearchResult]:
    """Peak coverage and peak 5pSE at every (τ_pbs, τ_uabs) pair of the mode's grid.

    Peaks are taken over every other dimension of the grid; the full search result is
    returned alongside for the trace export.
    """
    grid = config.search_grid()
    if scenes is None:
        scenes = build_scenes(config, trials, seed, threads)
    result = search_scenes(scenes, grid, config, threads=threads)

    peaks: dict[tuple[float, float], list[float]] = {}
    for evaluation in result.trace:
        key = (evaluation.state.tau_pbs, evaluation.state.tau_uabs)
        cov, fifth = peaks.get(key, [-math.inf, -math.inf])
        peaks[key] = [
            max(cov, evaluation.coverage_probability),
            max(fifth, evaluation.fifth_percentile_se),
        ]

    points = [
        SurfacePoint(tau_pbs=t_p, tau_uabs=t_u, coverage=peaks[(t_p, t_u)][0], fivepse=peaks[(t_p, t_u)][1])
        for t_p in grid.tau_pbs_values
        for t_u in grid.tau_uabs_values
    ]
    logger.info("surface_computed", points=len(points), mode=config.icic_mode.value)
    return points, result


def surface_argmax(points: Sequence[SurfacePoint], objective: Objective) -> SurfacePoint:
    """First surface point with the highest value of the objective KPI."""
    values = [p.fivepse if objective is Objective.FIVE_PSE else p.coverage for p in points]
    return points[int(np.argmax(values))]


def percent_improvement(new: float, old: float) -> float:
    """(new − old) / old in percent; nan when both are zero, inf over a zero baseline."""
    if old == 0.0:
        return math.nan if new == 0.0 else math.copysign(math.inf, new)
    return (new - old) / old * 100.0


def compare_icic_modes(
    config: SimConfig,
    *,
    trials: int | None = None,
    seed: int | None = None,
    threads: int | None = None,
) -> IcicComparison:
    """Optimise no-ICIC, eICIC and FeICIC on shared scenes and report the gains.

    Each mode reports its best 5pSE and its best coverage over the mode's grid.
    """
    scenes = build_scenes(config, trials, seed, threads)
    outcomes: dict[str, ModeOutcome] = {}
    for mode in COMPARED_MODES:
        grid = config.grid.for_mode(mode)
        result = search_scenes(scenes, grid, config, threads=threads)
        by_fifth = max(result.trace, key=lambda e: e.fifth_percentile_se)
        by_cov = max(result.trace, key=lambda e: e.coverage_probability)
        outcomes[mode.value] = ModeOutcome(
            mode=mode.value,
            fifth_percentile_se=by_fifth.fifth_percentile_se,
            coverage_probability=by_cov.coverage_probability,
            best_state_fivepse=by_fifth.state,
            best_state_coverage=by_cov.state,
            evaluated=result.evaluated,
        )

    none, eicic, feicic = (outcomes[m.value] for m in COMPARED_MODES)
    improvements = {
        "eicic_over_none_fivepse": percent_improvement(
            eicic.fifth_percentile_se, none.fifth_percentile_se
        ),
        "feicic_over_eicic_fivepse": percent_improvement(
            feicic.fifth_percentile_se, eicic.fifth_percentile_se
        ),
        "eicic_over_none_coverage": percent_improvement(
            eicic.coverage_probability, none.coverage_probability
        ),
        "feicic_over_eicic_coverage": percent_improvement(
            feicic.coverage_probability, eicic.coverage_probability
        ),
    }
    logger.info("icic_modes_compared", **improvements)
    return IcicComparison(outcomes=outcomes, improvements=improvements)


def check_endpoints(cdfs: dict[LinkClass, EmpiricalCdf]) -> list[EndpointCheck]:
    checks: list[EndpointCheck] = []
    for link_class, (expected, tolerance, informative) in ENDPOINT_EXPECTATIONS.items():
        check = EndpointCheck(
            link_class=link_class,
            endpoint_db=cdfs[link_class].endpoint_db,
            expected_db=expected,
            tolerance_db=tolerance,
            informative=informative,
        )
        if not check.within:
            log = logger.info if informative else logger.warning
            log(
                "path_loss_endpoint_out_of_band",
                link_class=link_class.value,
                endpoint_db=check.endpoint_db,
                expected_db=expected,
                tolerance_db=tolerance,
            )
        checks.append(check)
    return checks


def path_loss_cdfs(
    config: SimConfig, *, seed: int | None = None
) -> tuple[dict[LinkClass, EmpiricalCdf], list[EndpointCheck]]:
    """Path-loss CDFs of the first trial's layout, with endpoint checks."""
    master = config.master_seed if seed is None else seed
    layout_ss, _, los_ss, _ = trial_seed(master, 0).spawn(4)
    layout = build_layout(config.tier_specs(), config.area, np.random.default_rng(layout_ss))
    cdfs = path_loss_cdf(layout, config.channel, np.random.default_rng(los_ss))
    return cdfs, check_endpoints(cdfs)
