"""Cell selection with range-expansion bias and the USF/CSF scheduling split.

A UE camps on the tier maximising its USF SIR plus the tier's CRE bias (MBS carries
no bias), then occupies the serving cell's USF when that SIR reaches the tier's
scheduling threshold ρ, else its CSF.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence

import numpy as np
import structlog

from src.core.params import BS_TIERS, ChannelParams, IcicState, Subframe, Tier
from src.core.results import (
    AssociationBatch,
    CellLoads,
    FloatArray,
    IntArray,
    InterestPowers,
    NetworkLayout,
    Node,
    SirSextet,
    UeAssignment,
)
from src.services.linkbudget import interest_powers, sextet_from_powers
from src.utils.units import linear_to_db


logger = structlog.get_logger(__name__)


def _biases(state: IcicState) -> FloatArray:
    return np.array([0.0, state.tau_pbs, state.tau_uabs])


def _thresholds(state: IcicState) -> FloatArray:
    return np.array([state.rho_mbs, state.rho_pbs, state.rho_uabs])


def select_cell(sir: SirSextet, state: IcicState) -> tuple[IntArray, FloatArray]:
    """Serving-tier codes (indices into BS_TIERS) and the winning biased metric in dB.

    argmax returns the first maximum, which gives the MBS > PBS > UABS tie-break.
    """
    metric = linear_to_db(sir.usf_matrix()) + _biases(state)[None, :]
    codes = np.argmax(metric, axis=1)
    return codes.astype(np.int64), metric[np.arange(len(codes)), codes]


def schedule_subframe(
    serving_tier: IntArray, sir: SirSextet, state: IcicState
) -> np.ndarray:
    """True where the UE is pushed into CSF (serving USF SIR below the tier's ρ)."""
    usf_db = linear_to_db(sir.usf_matrix())[np.arange(len(serving_tier)), serving_tier]
    return ~(usf_db >= _thresholds(state)[serving_tier])


def tally_loads(
    serving_tier: IntArray,
    serving_cell: IntArray,
    csf: np.ndarray,
    n_cells: Sequence[int],
) -> CellLoads:
    counts: dict[str, IntArray] = {}
    for code, tier in enumerate(BS_TIERS):
        on_tier = serving_tier == code
        for subframe, mask in ((Subframe.USF, on_tier & ~csf), (Subframe.CSF, on_tier & csf)):
            counts[f"n_{subframe.value}_{tier.value}"] = np.bincount(
                serving_cell[mask], minlength=n_cells[code]
            ).astype(np.int64)
    return CellLoads(**counts)


def serving_cells(powers: InterestPowers, serving_tier: IntArray) -> IntArray:
    cells = np.column_stack([powers.moi, powers.poi, powers.uoi])
    return cells[np.arange(len(serving_tier)), serving_tier]


def associate_batch(
    powers: InterestPowers,
    state: IcicState,
    *,
    floor_mw: float = 1e-30,
) -> AssociationBatch:
    """Vectorised selection and scheduling of a whole UE population."""
    sir = sextet_from_powers(powers, state, floor_mw)
    codes, metric = select_cell(sir, state)
    return AssociationBatch(
        serving_tier=codes,
        serving_cell=serving_cells(powers, codes),
        csf=schedule_subframe(codes, sir, state),
        biased_metric_db=metric,
        sir=sir,
    )


def batch_loads(batch: AssociationBatch, layout: NetworkLayout) -> CellLoads:
    return tally_loads(
        batch.serving_tier,
        batch.serving_cell,
        batch.csf,
        [layout.count(t) for t in BS_TIERS],
    )


def to_assignments(batch: AssociationBatch) -> list[UeAssignment]:
    return [
        UeAssignment(
            ue_index=i,
            serving_tier=BS_TIERS[int(batch.serving_tier[i])],
            serving_cell=int(batch.serving_cell[i]),
            subframe=Subframe.CSF if batch.csf[i] else Subframe.USF,
            sir=batch.sir.take(i),
            biased_metric_db=float(batch.biased_metric_db[i]),
        )
        for i in range(len(batch))
    ]


def node_powers(
    ues: Sequence[Node],
    layout: NetworkLayout,
    channel: ChannelParams,
    rng: np.random.Generator,
    *,
    tx_power_dbm: Mapping[Tier, float],
) -> InterestPowers:
    """Interest powers of an arbitrary UE list, in list order (GUEs and AUEs may mix)."""
    n = len(ues)
    columns = {
        name: np.zeros(n, dtype=np.int64 if name in ("moi", "poi", "uoi") else np.float64)
        for name in ("r_mbs", "r_pbs", "r_uabs", "i_agg", "moi", "poi", "uoi")
    }
    for ue_tier in (Tier.GUE, Tier.AUE):
        rows = np.array([i for i, ue in enumerate(ues) if ue.tier is ue_tier], dtype=np.int64)
        if not rows.size:
            continue
        positions = np.stack([ues[i].position for i in rows])
        part = interest_powers(layout, ue_tier, positions, channel, tx_power_dbm, rng, rng)
        for name, column in columns.items():
            column[rows] = getattr(part, name)
    return InterestPowers(**columns)


def associate_all(
    ues: Sequence[Node],
    layout: NetworkLayout,
    state: IcicState,
    channel: ChannelParams,
    rng: np.random.Generator,
    *,
    tx_power_dbm: Mapping[Tier, float],
) -> tuple[list[UeAssignment], CellLoads]:
    """One assignment per UE plus the per-cell loads they produce."""
    powers = node_powers(ues, layout, channel, rng, tx_power_dbm=tx_power_dbm)
    batch = associate_batch(powers, state, floor_mw=channel.sir_floor_mw)
    loads = batch_loads(batch, layout)
    logger.debug("ues_associated", ues=len(batch), scheduled=loads.total())
    return to_assignments(batch), loads


def layout_nodes(layout: NetworkLayout) -> list[Node]:
    """Every UE of the layout as a node list, GUEs first."""
    return [
        Node(tier, index, position)
        for tier in (Tier.GUE, Tier.AUE)
        for index, position in enumerate(layout.positions(tier))
    ]
