from __future__ import annotations

import math
from collections.abc import Mapping

import numpy as np
import structlog

from src.core.errors import ConsistencyError, ParameterError
from src.core.params import (
    BS_TIERS,
    ChannelParams,
    DutyNormalization,
    IcicState,
    SimArea,
    Subframe,
    Tier,
)
from src.core.results import AssociationBatch, CellLoads, FloatArray, NetworkLayout, UeAssignment
from src.services.association import associate_batch, batch_loads, layout_nodes, node_powers
from src.services.linkbudget import interest_powers


logger = structlog.get_logger(__name__)

GUE_HEIGHT_M = 1.5


def _uabs_scale(normalization: DutyNormalization) -> float:
    return 0.5 if normalization is DutyNormalization.HALF else 1.0


def duty_weights(
    serving_tier: np.ndarray,
    csf: np.ndarray,
    state: IcicState,
    normalization: DutyNormalization = DutyNormalization.HALF,
) -> FloatArray:
    """Time share of each UE's subframe.

    MBS and PBS split their frame β / (1−β). A UABS UE sees the MBS and PBS split
    combined, (β_mbs+β_pbs) against 2−(β_mbs+β_pbs), scaled by ½ under `half`.
    """
    beta_sum = state.beta_mbs + state.beta_pbs
    scale = _uabs_scale(normalization)
    usf = np.array([state.beta_mbs, state.beta_pbs, scale * beta_sum])
    csf_w = np.array([1.0 - state.beta_mbs, 1.0 - state.beta_pbs, scale * (2.0 - beta_sum)])
    return np.where(csf, csf_w[serving_tier], usf[serving_tier])


def serving_loads(batch: AssociationBatch, loads: CellLoads) -> np.ndarray:
    """Load of each UE's own cell and subframe."""
    out = np.zeros(len(batch), dtype=np.int64)
    for code, tier in enumerate(BS_TIERS):
        for subframe, flag in ((Subframe.USF, False), (Subframe.CSF, True)):
            mask = (batch.serving_tier == code) & (batch.csf == flag)
            out[mask] = loads.counts(tier, subframe)[batch.serving_cell[mask]]
    return out


def serving_sir(batch: AssociationBatch) -> FloatArray:
    rows = np.arange(len(batch))
    usf = batch.sir.usf_matrix()[rows, batch.serving_tier]
    csf = batch.sir.csf_matrix()[rows, batch.serving_tier]
    return np.where(batch.csf, csf, usf)


def spectral_efficiency(
    batch: AssociationBatch,
    loads: CellLoads,
    state: IcicState,
    normalization: DutyNormalization = DutyNormalization.HALF,
    *,
    extra_load: int = 0,
) -> FloatArray:
    """Per-UE SE in bps/Hz: duty weight · log2(1 + Γ) shared equally within the subframe.

    `extra_load` adds UEs to every cell that are not in `loads` (a coverage probe
    counts itself this way).
    """
    n = serving_loads(batch, loads) + extra_load
    if np.any(n < 1):
        bad = int(np.flatnonzero(n < 1)[0])
        raise ConsistencyError(
            f"UE {bad} assigned to a cell with zero load", field="loads"
        )
    weights = duty_weights(batch.serving_tier, batch.csf, state, normalization)
    return weights * np.log2(1.0 + serving_sir(batch)) / n


def ue_spectral_efficiency(
    assignment: UeAssignment,
    loads: CellLoads,
    state: IcicState,
    normalization: DutyNormalization = DutyNormalization.HALF,
) -> float:
    load = int(loads.counts(assignment.serving_tier, assignment.subframe)[assignment.serving_cell])
    if load < 1:
        raise ConsistencyError(
            f"UE {assignment.ue_index} assigned to "
            f"{assignment.serving_tier.value}[{assignment.serving_cell}] "
            f"{assignment.subframe.value} with zero load",
            field="loads",
        )
    code = BS_TIERS.index(assignment.serving_tier)
    weight = duty_weights(
        np.array([code]), np.array([assignment.subframe is Subframe.CSF]), state, normalization
    )[0]
    return float(weight * math.log2(1.0 + assignment.serving_sir) / load)


def fifth_percentile(se: FloatArray) -> float:
    """Lower nearest-rank 5th percentile: sorted ascending, element ceil(0.05·n) − 1."""
    values = np.asarray(se, dtype=np.float64).ravel()
    if not values.size:
        raise ParameterError("fifth percentile of an empty SE vector", field="se")
    k = max(math.ceil(0.05 * values.size) - 1, 0)
    return float(np.partition(values, k)[k])


def probe_grid(area: SimArea, resolution_m: float, height_m: float = GUE_HEIGHT_M) -> FloatArray:
    """Probe points at the centres of a square grid over the area."""
    if resolution_m <= 0:
        raise ParameterError(
            f"grid resolution must be positive, got {resolution_m}", field="grid_resolution_m"
        )
    xs = np.arange(resolution_m / 2.0, area.width_m, resolution_m)
    ys = np.arange(resolution_m / 2.0, area.height_m, resolution_m)
    gx, gy = np.meshgrid(xs, ys)
    return np.column_stack([gx.ravel(), gy.ravel(), np.full(gx.size, height_m)])


def coverage_from_batch(
    batch: AssociationBatch,
    loads: CellLoads,
    state: IcicState,
    threshold_se: float,
    normalization: DutyNormalization = DutyNormalization.HALF,
) -> float:
    """Fraction of probes whose SE, with loads frozen and the probe itself added, exceeds the threshold."""
    if not len(batch):
        return 0.0
    se = spectral_efficiency(batch, loads, state, normalization, extra_load=1)
    return float(np.mean(se > threshold_se))


def coverage_probability(
    layout: NetworkLayout,
    state: IcicState,
    channel: ChannelParams,
    threshold_se: float,
    grid_resolution_m: float,
    rng: np.random.Generator,
    *,
    area: SimArea,
    tx_power_dbm: Mapping[Tier, float],
    loads: CellLoads | None = None,
    normalization: DutyNormalization = DutyNormalization.HALF,
) -> float:
    """Area coverage of one snapshot.

    Without `loads` the layout's own UEs are associated first to obtain them.
    """
    if loads is None:
        powers = node_powers(layout_nodes(layout), layout, channel, rng, tx_power_dbm=tx_power_dbm)
        loads = batch_loads(associate_batch(powers, state, floor_mw=channel.sir_floor_mw), layout)
    probes = probe_grid(area, grid_resolution_m)
    probe_powers = interest_powers(layout, Tier.GUE, probes, channel, tx_power_dbm, rng, rng)
    batch = associate_batch(probe_powers, state, floor_mw=channel.sir_floor_mw)
    return coverage_from_batch(batch, loads, state, threshold_se, normalization)
