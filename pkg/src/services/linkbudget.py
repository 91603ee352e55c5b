from __future__ import annotations

from collections.abc import Mapping

import numpy as np
import structlog

from src.adapters.metrics import Metrics
from src.core.errors import TierMissingError
from src.core.params import BS_TIERS, ChannelParams, IcicState, Tier
from src.core.results import (
    FloatArray,
    InterestPowers,
    LinkBudget,
    LinkGeometry,
    NetworkLayout,
    Node,
    SirSextet,
)
from src.services.channel import (
    CHUNK_ROWS,
    antenna_gain,
    fading_shape,
    link_geometry,
    link_path_loss,
    nakagami_power_gain,
)
from src.utils.units import db_to_linear, dbm_to_mw


logger = structlog.get_logger(__name__)


def rx_power_mw(
    tx_power_dbm: float,
    antenna_db: FloatArray | float,
    fading: FloatArray | float,
    pl_db: FloatArray | float,
) -> FloatArray | float:
    """P · 10^(A/10) · H / 10^(PL/10), in mW."""
    return dbm_to_mw(tx_power_dbm) * db_to_linear(np.asarray(antenna_db, dtype=np.float64) - pl_db) * fading  # type: ignore[no-any-return]


def _draw_fading(
    p_los: FloatArray, channel: ChannelParams, rng: np.random.Generator
) -> FloatArray:
    if not channel.fading_enabled:
        return np.ones_like(p_los)
    return np.asarray(nakagami_power_gain(fading_shape(p_los, channel), rng), dtype=np.float64)


def received_power(
    bs: Node,
    ue: Node,
    tier_power_dbm: float,
    channel: ChannelParams,
    rng: np.random.Generator,
    *,
    boresight_deg: float | None = None,
) -> LinkBudget:
    """Received reference-signal power of one BS-UE pair."""
    bores = None if boresight_deg is None else np.array([boresight_deg])
    geom = link_geometry(bs.position[None, :], ue.position[None, :], bores)
    link_class, pl, p_los = link_path_loss(
        bs.tier,
        ue.tier,
        geom,
        channel,
        rng,
        bs_height_m=float(bs.position[2]),
        ue_height_m=float(ue.position[2]),
    )
    gain = np.asarray(
        antenna_gain(geom.azimuth_deg, geom.elevation_deg, channel.antenna_for(bs.tier)),
        dtype=np.float64,
    )
    fading = _draw_fading(p_los, channel, rng)
    rx = rx_power_mw(tier_power_dbm, gain, fading, pl)
    return LinkBudget(
        rx_power_mw=float(np.asarray(rx).ravel()[0]),
        pl_db=float(pl.ravel()[0]),
        antenna_db=float(np.broadcast_to(gain, pl.shape).ravel()[0]),
        fading=float(fading.ravel()[0]),
        geometry=LinkGeometry(
            d2_m=float(np.asarray(geom.d2_m).ravel()[0]),
            d3_m=float(np.asarray(geom.d3_m).ravel()[0]),
            elevation_deg=float(np.asarray(geom.elevation_deg).ravel()[0]),
            azimuth_deg=float(np.asarray(geom.azimuth_deg).ravel()[0]),
        ),
        bs_index=bs.index,
        bs_tier=bs.tier,
        link_class=link_class,
    )


def nearest_cells(ue: Node, layout: NetworkLayout) -> tuple[int, int, int]:
    """Indices of the nearest MBS, PBS and UABS by 3D distance; ties go to the lowest index."""
    found: list[int] = []
    for tier in BS_TIERS:
        bs = layout.positions(tier)
        if not len(bs):
            raise TierMissingError(f"no {tier.value} in layout", field=tier.value)
        d3 = np.linalg.norm(bs - ue.position[None, :], axis=1)
        found.append(int(np.argmin(d3)))
    return found[0], found[1], found[2]


def interest_powers(
    layout: NetworkLayout,
    ue_tier: Tier,
    ue_positions: FloatArray,
    channel: ChannelParams,
    tx_power_dbm: Mapping[Tier, float],
    fading_rng: np.random.Generator,
    los_rng: np.random.Generator | None = None,
    boresights: Mapping[Tier, FloatArray] | None = None,
) -> InterestPowers:
    """Received powers from MOI/POI/UOI and the aggregate of every other BS, per UE.

    Every BS transmits at full power in the aggregate. Fading is drawn tier by tier,
    block by block, so a fixed stream always yields the same per-pair draws.
    """
    n = len(ue_positions)
    nearest: dict[Tier, np.ndarray] = {}
    signal: dict[Tier, FloatArray] = {}
    i_agg = np.zeros(n, dtype=np.float64)

    for tier in BS_TIERS:
        bs = layout.positions(tier)
        if not len(bs):
            raise TierMissingError(f"no {tier.value} in layout", field=tier.value)
        idx = np.empty(n, dtype=np.int64)
        sig = np.empty(n, dtype=np.float64)
        bores = None if boresights is None else boresights.get(tier)
        for start in range(0, n, CHUNK_ROWS):
            block = ue_positions[start : start + CHUNK_ROWS]
            rows = np.arange(len(block))
            geom = link_geometry(bs, block, bores)
            _, pl, p_los = link_path_loss(
                tier,
                ue_tier,
                geom,
                channel,
                los_rng,
                bs_height_m=float(bs[0, 2]),
                ue_height_m=float(block[0, 2]),
            )
            gain = antenna_gain(geom.azimuth_deg, geom.elevation_deg, channel.antenna_for(tier))
            rx = np.asarray(
                rx_power_mw(tx_power_dbm[tier], gain, _draw_fading(p_los, channel, fading_rng), pl),
                dtype=np.float64,
            )
            near = np.argmin(np.asarray(geom.d3_m), axis=1)
            sig[start : start + len(block)] = rx[rows, near]
            rx[rows, near] = 0.0
            i_agg[start : start + len(block)] += rx.sum(axis=1)
            idx[start : start + len(block)] = near
        nearest[tier] = idx
        signal[tier] = sig

    return InterestPowers(
        r_mbs=signal[Tier.MBS],
        r_pbs=signal[Tier.PBS],
        r_uabs=signal[Tier.UABS],
        i_agg=i_agg,
        moi=nearest[Tier.MBS],
        poi=nearest[Tier.PBS],
        uoi=nearest[Tier.UABS],
    )


def aggregate_interference(
    ue: Node,
    layout: NetworkLayout,
    moi: int,
    poi: int,
    uoi: int,
    channel: ChannelParams,
    rng: np.random.Generator,
    *,
    tx_power_dbm: Mapping[Tier, float],
) -> float:
    """Sum of full-power received powers from every BS except the three given cells."""
    total = 0.0
    for tier, excluded in zip(BS_TIERS, (moi, poi, uoi)):
        for index, position in enumerate(layout.positions(tier)):
            if index == excluded:
                continue
            link = received_power(Node(tier, index, position), ue, tx_power_dbm[tier], channel, rng)
            total += link.rx_power_mw
    return total


def sextet_from_powers(
    powers: InterestPowers, state: IcicState, floor_mw: float = 1e-30
) -> SirSextet:
    """The six USF/CSF SIR expressions with MBS/PBS reduced by α in coordinated subframes."""
    r_m, r_p, r_u, i_agg = powers.r_mbs, powers.r_pbs, powers.r_uabs, powers.i_agg
    a_m, a_p = state.alpha_mbs, state.alpha_pbs

    denominators = (
        r_p + r_u + i_agg,
        a_p * r_p + r_u + i_agg,
        r_m + r_u + i_agg,
        a_m * r_m + r_u + i_agg,
        r_m + r_p + i_agg,
        a_m * r_m + a_p * r_p + i_agg,
    )
    floored = sum(int(np.count_nonzero(d < floor_mw)) for d in denominators)
    if floored:
        Metrics.inc("sir_denominator_floored", amount=floored)
    d = [np.maximum(den, floor_mw) for den in denominators]
    return SirSextet(
        mbs_usf=r_m / d[0],
        mbs_csf=a_m * r_m / d[1],
        pbs_usf=r_p / d[2],
        pbs_csf=a_p * r_p / d[3],
        uabs_usf=r_u / d[4],
        uabs_csf=r_u / d[5],
    )


def sir_sextet(
    ue: Node,
    layout: NetworkLayout,
    state: IcicState,
    channel: ChannelParams,
    rng: np.random.Generator,
    *,
    tx_power_dbm: Mapping[Tier, float],
) -> SirSextet:
    """Sextet of a single UE (arrays of length one)."""
    powers = interest_powers(
        layout, ue.tier, ue.position[None, :], channel, tx_power_dbm, rng, rng
    )
    return sextet_from_powers(powers, state, channel.sir_floor_mw)


def concat_powers(*parts: InterestPowers) -> InterestPowers:
    """Stack several UE populations (e.g. GUEs then AUEs) along the UE axis."""
    return InterestPowers(
        *(
            np.concatenate([getattr(p, name) for p in parts])
            for name in ("r_mbs", "r_pbs", "r_uabs", "i_agg", "moi", "poi", "uoi")
        )
    )
