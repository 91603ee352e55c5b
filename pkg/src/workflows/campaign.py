"""Monte-Carlo trials with common random numbers.

Trial t of a campaign with master seed s draws everything from
SeedSequence(s, spawn_key=(t,)), split into independent streams for the layout,
UE fading, ATA LOS draws and probe links. Everything that does not depend on the
ICIC state (node placement and the per-UE received powers) is computed once per
trial as a `TrialScene` and reused for every state, so states compared against
each other see identical draws.
"""

from __future__ import annotations

import hashlib
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import structlog

from src.adapters.metrics import Metrics
from src.core.params import BS_TIERS, IcicState, Tier
from src.core.results import (
    AssociationBatch,
    CellLoads,
    FloatArray,
    InterestPowers,
    KpiReport,
    NetworkLayout,
    TrialRecord,
)
from src.services.association import associate_batch, batch_loads
from src.services.deployment import build_layout
from src.services.kpi import coverage_from_batch, fifth_percentile, probe_grid, spectral_efficiency
from src.services.linkbudget import concat_powers, interest_powers
from src.utils.config import SimConfig, get_settings


logger = structlog.get_logger(__name__)


@dataclass(frozen=True)
class TrialScene:
    trial: int
    layout: NetworkLayout
    ue_powers: InterestPowers
    probe_powers: InterestPowers
    fingerprint: str


@dataclass(frozen=True)
class SceneOutcome:
    """State-dependent evaluation of one scene."""

    record: TrialRecord
    batch: AssociationBatch
    loads: CellLoads


def trial_seed(master_seed: int, trial: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master_seed, spawn_key=(trial,))


def _boresights(
    layout: NetworkLayout, rng: np.random.Generator, mode: str
) -> dict[Tier, FloatArray] | None:
    if mode != "random":
        return None
    return {tier: rng.uniform(-180.0, 180.0, layout.count(tier)) for tier in BS_TIERS}


def build_scene(config: SimConfig, trial: int, master_seed: int) -> TrialScene:
    layout_ss, fading_ss, los_ss, probe_ss = trial_seed(master_seed, trial).spawn(4)
    layout_rng = np.random.default_rng(layout_ss)
    layout = build_layout(config.tier_specs(), config.area, layout_rng)
    boresights = _boresights(layout, layout_rng, config.channel.azimuth_mode)

    fading_rng = np.random.default_rng(fading_ss)
    los_rng = np.random.default_rng(los_ss)
    tx = config.tx_power_dbm()
    ue_powers = concat_powers(
        *(
            interest_powers(
                layout,
                ue_tier,
                layout.positions(ue_tier),
                config.channel,
                tx,
                fading_rng,
                los_rng,
                boresights,
            )
            for ue_tier in (Tier.GUE, Tier.AUE)
        )
    )

    probe_rng = np.random.default_rng(probe_ss)
    probes = probe_grid(config.area, config.coverage.grid_resolution_m)
    probe_powers = interest_powers(
        layout, Tier.GUE, probes, config.channel, tx, probe_rng, probe_rng, boresights
    )

    digest = hashlib.sha256(layout.fingerprint().encode())
    digest.update(ue_powers.fingerprint().encode())
    digest.update(probe_powers.fingerprint().encode())
    return TrialScene(
        trial=trial,
        layout=layout,
        ue_powers=ue_powers,
        probe_powers=probe_powers,
        fingerprint=digest.hexdigest(),
    )


def evaluate_scene(scene: TrialScene, state: IcicState, config: SimConfig) -> SceneOutcome:
    floor = config.channel.sir_floor_mw
    normalization = config.uabs_duty_normalization
    batch = associate_batch(scene.ue_powers, state, floor_mw=floor)
    loads = batch_loads(batch, scene.layout)
    se = spectral_efficiency(batch, loads, state, normalization)
    probes = associate_batch(scene.probe_powers, state, floor_mw=floor)
    record = TrialRecord(
        trial=scene.trial,
        fifth_percentile_se=fifth_percentile(se),
        coverage_probability=coverage_from_batch(
            probes, loads, state, config.coverage.threshold_se, normalization
        ),
        per_ue_se=se,
        scene_fingerprint=scene.fingerprint,
    )
    return SceneOutcome(record=record, batch=batch, loads=loads)


def worker_count(config: SimConfig, threads: int | None) -> int:
    return threads or config.threads or get_settings().default_threads


def build_scenes(
    config: SimConfig,
    trials: int | None = None,
    seed: int | None = None,
    threads: int | None = None,
) -> list[TrialScene]:
    """Scenes for trials 0..trials-1, in trial order regardless of thread count."""
    count = trials or config.trials
    master = config.master_seed if seed is None else seed
    with ThreadPoolExecutor(max_workers=worker_count(config, threads)) as pool:
        return list(pool.map(lambda t: build_scene(config, t, master), range(count)))


def aggregate(
    records: Sequence[TrialRecord], state: IcicState, config: SimConfig, seed: int
) -> KpiReport:
    """Mean of the per-trial KPIs; per-UE SE is pooled across trials."""
    return KpiReport(
        fifth_percentile_se=float(np.mean([r.fifth_percentile_se for r in records])),
        coverage_probability=float(np.mean([r.coverage_probability for r in records])),
        per_ue_se=np.concatenate([r.per_ue_se for r in records]),
        trials=len(records),
        threshold_se=config.coverage.threshold_se,
        state=state,
        seed=seed,
        records=list(records),
    )


def evaluate_state(
    scenes: Sequence[TrialScene], state: IcicState, config: SimConfig
) -> list[TrialRecord]:
    return [evaluate_scene(scene, state, config).record for scene in scenes]


def run_trial(
    config: SimConfig, state: IcicState, seed: int, trial_index: int = 0
) -> KpiReport:
    """One PPP snapshot evaluated at one state; deterministic in (config, state, seed)."""
    state = config.evaluated_state(state)
    record = evaluate_scene(build_scene(config, trial_index, seed), state, config).record
    Metrics.inc("trials_completed")
    logger.info(
        "trial_completed",
        trial=trial_index,
        fifth_percentile_se=record.fifth_percentile_se,
        coverage_probability=record.coverage_probability,
    )
    return aggregate([record], state, config, seed)


def run_campaign(
    config: SimConfig,
    state: IcicState | None = None,
    trials: int | None = None,
    *,
    seed: int | None = None,
    threads: int | None = None,
) -> KpiReport:
    """Average `trials` independent snapshots at one state.

    Trials run on a thread pool; results are reduced in trial order, so the thread
    count never changes the report.
    """
    master = config.master_seed if seed is None else seed
    count = trials or config.trials
    state = config.evaluated_state(state)

    def one(trial: int) -> TrialRecord:
        record = evaluate_scene(build_scene(config, trial, master), state, config).record
        Metrics.inc("trials_completed")
        logger.info(
            "trial_completed",
            trial=trial,
            fifth_percentile_se=record.fifth_percentile_se,
            coverage_probability=record.coverage_probability,
        )
        return record

    with ThreadPoolExecutor(max_workers=worker_count(config, threads)) as pool:
        records = list(pool.map(one, range(count)))

    report = aggregate(records, state, config, master)
    Metrics.inc("campaigns_completed")
    logger.info(
        "campaign_completed",
        trials=count,
        fifth_percentile_se=report.fifth_percentile_se,
        coverage_probability=report.coverage_probability,
    )
    return report
