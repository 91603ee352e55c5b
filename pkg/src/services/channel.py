"""Path-loss models for the three link classes, Nakagami-m fading and the 3D element pattern.

Link classes:
    GTG  terrestrial BS (MBS/PBS) to GUE, urban Okumura-Hata
    ATA  any BS to AUE, aerial-UE urban-macro model averaged over LOS/NLOS
    ATG  UABS to GUE, elevation-angle LOS sigmoid over free-space plus excess loss

All functions accept scalars or equally shaped arrays and return the same shape.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
import structlog
from scipy.spatial.distance import cdist

from src.core.errors import DegenerateGeometryError, LinkClassificationError, ParameterError
from src.core.params import AntennaParams, ChannelParams, LinkClass, Tier
from src.core.results import EmpiricalCdf, FloatArray, LinkGeometry, NetworkLayout


logger = structlog.get_logger(__name__)

SPEED_OF_LIGHT = 299_792_458.0
AERIAL_MIN_HEIGHT_M = 22.5
# UE rows per distance-matrix block; bounds memory on full-scale layouts.
CHUNK_ROWS = 2048


def _as_float(value: FloatArray | float) -> FloatArray:
    return np.asarray(value, dtype=np.float64)


def _out(value: FloatArray) -> FloatArray | float:
    return float(value) if value.ndim == 0 else value


@lru_cache(maxsize=8)
def _warn_carrier_outside_hata(carrier_mhz: float) -> None:
    logger.warning("carrier_outside_hata_range", carrier_mhz=carrier_mhz, valid_mhz=[150, 1500])


def fspl_db(d3_m: FloatArray | float, carrier_mhz: float) -> FloatArray | float:
    """Free-space loss 20·log10(4π d f / c)."""
    d = _as_float(d3_m)
    f_hz = carrier_mhz * 1e6
    return _out(20.0 * np.log10(4.0 * math.pi * d * f_hz / SPEED_OF_LIGHT))


def pl_gtg(
    geom: LinkGeometry, params: ChannelParams, bs_height_m: float, ue_height_m: float
) -> FloatArray | float:
    """Okumura-Hata urban loss with the large-city mobile-height correction."""
    d2 = _as_float(geom.d2_m)
    if np.any(d2 <= 0):
        raise DegenerateGeometryError("GTG link with zero horizontal distance", field="d2_m")
    f = params.carrier_mhz
    if not 150.0 <= f <= 1500.0:
        _warn_carrier_outside_hata(f)

    d_km = np.maximum(d2, params.min_distance_m) / 1000.0
    if f >= 300.0:
        a_hm = 3.2 * math.log10(11.75 * ue_height_m) ** 2 - 4.97
    else:
        a_hm = 8.29 * math.log10(1.54 * ue_height_m) ** 2 - 1.1
    log_hb = math.log10(bs_height_m)
    loss = (
        69.55
        + 26.16 * math.log10(f)
        - 13.82 * log_hb
        - a_hm
        + (44.9 - 6.55 * log_hb) * np.log10(d_km)
    )
    return _out(loss)


def ata_los_probability(d2_m: FloatArray | float, ue_height_m: float) -> FloatArray | float:
    """LOS probability of an aerial UE in urban macro (22.5 m ≤ h ≤ 300 m)."""
    d2 = _as_float(d2_m)
    if ue_height_m > 100.0:
        return _out(np.ones_like(d2))
    log_h = math.log10(ue_height_m)
    d1 = max(460.0 * log_h - 700.0, 18.0)
    p1 = 4300.0 * log_h - 3800.0
    safe = np.maximum(d2, d1)
    p = d1 / safe + np.exp(-safe / p1) * (1.0 - d1 / safe)
    return _out(np.where(d2 <= d1, 1.0, p))


def _ata_branches(
    d3: FloatArray, params: ChannelParams, ue_height_m: float
) -> tuple[FloatArray, FloatArray]:
    fc = params.carrier_mhz if params.ata_frequency_unit == "mhz" else params.carrier_mhz / 1e3
    log_d = np.log10(d3)
    los = 28.0 + 22.0 * log_d + 20.0 * math.log10(fc)
    nlos = (
        -17.5
        + (46.0 - 7.0 * math.log10(ue_height_m)) * log_d
        + 20.0 * math.log10(40.0 * math.pi * fc / 3.0)
    )
    return los, np.maximum(nlos, los)


def pl_ata(
    geom: LinkGeometry,
    params: ChannelParams,
    rng: np.random.Generator | None = None,
    *,
    ue_height_m: float = AERIAL_MIN_HEIGHT_M,
) -> FloatArray | float:
    """Aerial-UE loss over the LOS/NLOS probabilities.

    `expected` mode returns the probability-weighted dB average; `bernoulli` draws the
    LOS state per link from `rng`.
    """
    if ue_height_m < AERIAL_MIN_HEIGHT_M:
        raise ParameterError(
            f"ATA model needs an aerial UE height >= {AERIAL_MIN_HEIGHT_M} m, got {ue_height_m}",
            field="ue_height_m",
        )
    d3 = np.maximum(_as_float(geom.d3_m), params.min_distance_m)
    p_los = _as_float(ata_los_probability(geom.d2_m, ue_height_m))
    los, nlos = _ata_branches(d3, params, ue_height_m)
    if params.ata_los_mode == "bernoulli":
        if rng is None:
            raise ParameterError("bernoulli ATA mode needs a random stream", field="rng")
        is_los = rng.random(p_los.shape) < p_los
        return _out(np.where(is_los, los, nlos))
    return _out(p_los * los + (1.0 - p_los) * nlos)


def atg_los_probability(elevation_deg: FloatArray | float, params: ChannelParams) -> FloatArray | float:
    """Elevation sigmoid 1 / (1 + a·exp(-b(θ - a))), θ in degrees."""
    theta = _as_float(elevation_deg)
    a, b = params.atg_los_a, params.atg_los_b
    return _out(1.0 / (1.0 + a * np.exp(-b * (theta - a))))


def pl_atg(geom: LinkGeometry, params: ChannelParams) -> FloatArray | float:
    """UABS-to-GUE loss averaged over LOS/NLOS, each branch free-space plus excess loss."""
    theta = _as_float(geom.elevation_deg)
    if np.any(theta <= 0):
        raise DegenerateGeometryError("ATG link needs a positive elevation angle", field="elevation_deg")
    d3 = np.maximum(_as_float(geom.d3_m), params.min_distance_m)
    p_los = _as_float(atg_los_probability(theta, params))
    free_space = _as_float(fspl_db(d3, params.carrier_mhz))
    # exponents other than 2 steepen the free-space slope
    log_d = np.log10(d3)
    los = free_space + 10.0 * (params.atg_pl_exponent_los - 2.0) * log_d + params.atg_excess_los_db
    nlos = free_space + 10.0 * (params.atg_pl_exponent_nlos - 2.0) * log_d + params.atg_excess_nlos_db
    return _out(p_los * los + (1.0 - p_los) * nlos)


def nakagami_power_gain(
    m: FloatArray | float, rng: np.random.Generator, size: int | tuple[int, ...] | None = None
) -> FloatArray | float:
    """Power gain H ~ Gamma(shape=m, scale=1/m), so E[H] = 1."""
    shape = _as_float(m)
    if np.any(shape < 0.5):
        raise ParameterError(f"Nakagami shape must be >= 0.5, got {m}", field="m")
    if size is None and shape.ndim:
        size = shape.shape
    return _out(np.asarray(rng.gamma(shape, 1.0 / shape, size), dtype=np.float64))


def antenna_gain(
    azimuth_deg: FloatArray | float, elevation_deg: FloatArray | float, params: AntennaParams
) -> FloatArray | float:
    """3GPP element gain in dBi; elevation is the depression angle below the BS horizon.

    A nadir-referenced element (the UABS) compares 90° minus the depression against its
    tilt, so tilt 0 points straight down.
    """
    phi = (_as_float(azimuth_deg) + 180.0) % 360.0 - 180.0
    theta = _as_float(elevation_deg)
    if params.vertical_reference == "nadir":
        theta = 90.0 - theta
    a_v = -np.minimum(12.0 * ((theta - params.downtilt_deg) / params.theta_3db_deg) ** 2, params.sla_v_db)
    a_h = -np.minimum(12.0 * (phi / params.phi_3db_deg) ** 2, params.a_max_db)
    return _out(params.g_max_dbi - np.minimum(-(a_v + a_h), params.a_max_db))


def link_geometry(
    bs_positions: FloatArray,
    ue_positions: FloatArray,
    boresight_deg: FloatArray | None = None,
) -> LinkGeometry:
    """Geometry of every (UE, BS) pair as (n_ue, n_bs) arrays."""
    d2 = cdist(ue_positions[:, :2], bs_positions[:, :2])
    dh = bs_positions[None, :, 2] - ue_positions[:, None, 2]
    d3 = np.hypot(d2, dh)
    elevation = np.degrees(np.arctan2(dh, d2))
    azimuth: FloatArray | float = 0.0
    if boresight_deg is not None:
        dx = ue_positions[:, None, 0] - bs_positions[None, :, 0]
        dy = ue_positions[:, None, 1] - bs_positions[None, :, 1]
        azimuth = np.degrees(np.arctan2(dy, dx)) - boresight_deg[None, :]
    return LinkGeometry(d2_m=d2, d3_m=d3, elevation_deg=elevation, azimuth_deg=azimuth)


def classify_link(bs_tier: Tier, ue_tier: Tier) -> LinkClass:
    if ue_tier is Tier.AUE and bs_tier in (Tier.MBS, Tier.PBS, Tier.UABS):
        return LinkClass.ATA
    if ue_tier is Tier.GUE and bs_tier in (Tier.MBS, Tier.PBS):
        return LinkClass.GTG
    if ue_tier is Tier.GUE and bs_tier is Tier.UABS:
        return LinkClass.ATG
    raise LinkClassificationError(f"no link class for {bs_tier.value} -> {ue_tier.value}")


def link_path_loss(
    bs_tier: Tier,
    ue_tier: Tier,
    geom: LinkGeometry,
    params: ChannelParams,
    rng: np.random.Generator | None,
    *,
    bs_height_m: float,
    ue_height_m: float,
) -> tuple[LinkClass, FloatArray, FloatArray]:
    """Path loss of the class implied by the tier pair, with each link's LOS probability.

    GTG links report LOS probability 0.
    """
    link_class = classify_link(bs_tier, ue_tier)
    if link_class is LinkClass.GTG:
        pl = _as_float(pl_gtg(geom, params, bs_height_m, ue_height_m))
        p_los = np.zeros_like(pl)
    elif link_class is LinkClass.ATA:
        pl = _as_float(pl_ata(geom, params, rng, ue_height_m=ue_height_m))
        p_los = np.broadcast_to(_as_float(ata_los_probability(geom.d2_m, ue_height_m)), pl.shape)
    else:
        pl = _as_float(pl_atg(geom, params))
        p_los = _as_float(atg_los_probability(geom.elevation_deg, params))
    return link_class, pl, p_los


def fading_shape(p_los: FloatArray, params: ChannelParams) -> FloatArray:
    """Nakagami shape per link: m_los when LOS is the likelier state, else m_nlos."""
    return np.where(p_los >= 0.5, params.m_los, params.m_nlos)


_CDF_PAIRS: dict[LinkClass, tuple[tuple[Tier, Tier], ...]] = {
    LinkClass.GTG: ((Tier.MBS, Tier.GUE), (Tier.PBS, Tier.GUE)),
    LinkClass.ATA: ((Tier.MBS, Tier.AUE), (Tier.PBS, Tier.AUE), (Tier.UABS, Tier.AUE)),
    LinkClass.ATG: ((Tier.UABS, Tier.GUE),),
}


def path_loss_cdf(
    layout: NetworkLayout, params: ChannelParams, rng: np.random.Generator | None = None
) -> dict[LinkClass, EmpiricalCdf]:
    """Empirical path-loss CDF over every BS-UE pair of each link class."""
    cdfs: dict[LinkClass, EmpiricalCdf] = {}
    for link_class, pairs in _CDF_PAIRS.items():
        chunks: list[FloatArray] = []
        for bs_tier, ue_tier in pairs:
            bs = layout.positions(bs_tier)
            ues = layout.positions(ue_tier)
            if not len(bs) or not len(ues):
                logger.warning(
                    "path_loss_cdf_empty_tier",
                    link_class=link_class.value,
                    bs_tier=bs_tier.value,
                    ue_tier=ue_tier.value,
                )
                continue
            for start in range(0, len(ues), CHUNK_ROWS):
                block = ues[start : start + CHUNK_ROWS]
                geom = link_geometry(bs, block)
                _, pl, _ = link_path_loss(
                    bs_tier,
                    ue_tier,
                    geom,
                    params,
                    rng,
                    bs_height_m=float(bs[0, 2]),
                    ue_height_m=float(block[0, 2]),
                )
                chunks.append(pl.ravel())
        values = np.sort(np.concatenate(chunks)) if chunks else np.empty(0)
        probs = np.arange(1, values.size + 1, dtype=np.float64) / max(values.size, 1)
        cdfs[link_class] = EmpiricalCdf(link_class=link_class, values_db=values, probabilities=probs)
        logger.info(
            "path_loss_cdf_computed",
            link_class=link_class.value,
            pairs=int(values.size),
            endpoint_db=cdfs[link_class].endpoint_db,
        )
    return cdfs
