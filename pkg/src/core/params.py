from __future__ import annotations

import math
from enum import Enum
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator


class Tier(str, Enum):
    MBS = "mbs"
    PBS = "pbs"
    UABS = "uabs"
    GUE = "gue"
    AUE = "aue"


# Order matters: tier codes used in association arrays index this tuple, and the
# MBS > PBS > UABS tie-break follows from argmax picking the first maximum.
BS_TIERS: tuple[Tier, Tier, Tier] = (Tier.MBS, Tier.PBS, Tier.UABS)
UE_TIERS: tuple[Tier, Tier] = (Tier.GUE, Tier.AUE)


class Subframe(str, Enum):
    USF = "usf"
    CSF = "csf"


class LinkClass(str, Enum):
    GTG = "gtg"
    ATA = "ata"
    ATG = "atg"


class Objective(str, Enum):
    FIVE_PSE = "5pse"
    COVERAGE = "coverage"


class IcicMode(str, Enum):
    ALL = "all"
    NONE = "none"
    EICIC = "eicic"
    FEICIC = "feicic"


class DutyNormalization(str, Enum):
    HALF = "half"
    AS_WRITTEN = "as-written"


class SimArea(BaseModel):
    model_config = ConfigDict(frozen=True)

    width_m: float = Field(default=10_000.0, gt=0)
    height_m: float = Field(default=10_000.0, gt=0)

    @property
    def area_km2(self) -> float:
        return self.width_m * self.height_m / 1e6


class TierSpec(BaseModel):
    """Placement and radio parameters of one node tier.

    PPP tiers are driven by `intensity_per_km2`; the UABS grid tier by `count`.
    """

    model_config = ConfigDict(frozen=True)

    tier: Tier
    intensity_per_km2: float | None = Field(default=None, ge=0)
    count: int | None = Field(default=None, ge=0)
    tx_power_dbm: float | None = None
    height_m: float = Field(gt=0)

    @model_validator(mode="after")
    def _check_placement(self) -> "TierSpec":
        if (self.intensity_per_km2 is None) == (self.count is None):
            raise ValueError("exactly one of intensity_per_km2 or count must drive placement")
        if self.tier in BS_TIERS and self.tx_power_dbm is None:
            raise ValueError(f"tx_power_dbm is required for base-station tier {self.tier.value}")
        return self

    @property
    def is_grid(self) -> bool:
        return self.count is not None


def default_tier_specs(uabs_height_m: float = 36.0) -> list[TierSpec]:
    """Tier defaults of the reference scenario (MBS 36 m, PBS 15 m, UABS on a 60-node grid)."""
    return [
        TierSpec(tier=Tier.MBS, intensity_per_km2=4.0, tx_power_dbm=46.0, height_m=36.0),
        TierSpec(tier=Tier.PBS, intensity_per_km2=12.0, tx_power_dbm=30.0, height_m=15.0),
        TierSpec(tier=Tier.UABS, count=60, tx_power_dbm=26.0, height_m=uabs_height_m),
        TierSpec(tier=Tier.GUE, intensity_per_km2=100.0, height_m=1.5),
        TierSpec(tier=Tier.AUE, intensity_per_km2=1.8, height_m=22.5),
    ]


class AntennaParams(BaseModel):
    """3GPP element pattern parameters (gain and limits in dB, angles in degrees)."""

    model_config = ConfigDict(frozen=True)

    g_max_dbi: float = 8.0
    theta_3db_deg: float = Field(default=65.0, gt=0)
    phi_3db_deg: float = Field(default=65.0, gt=0)
    sla_v_db: float = Field(default=30.0, gt=0)
    a_max_db: float = Field(default=30.0, gt=0)
    downtilt_deg: float = 6.0
    # horizon: tilt is measured below the horizon; nadir: tilt is measured off straight down
    vertical_reference: Literal["horizon", "nadir"] = "horizon"


class ChannelParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    carrier_mhz: float = Field(default=763.0, gt=0)
    m_los: float = Field(default=3.0, ge=1)
    m_nlos: float = Field(default=1.0, ge=0.5)
    atg_los_a: float = 9.61
    atg_los_b: float = 0.16
    atg_pl_exponent_los: float = 2.0
    atg_pl_exponent_nlos: float = 2.0
    atg_excess_los_db: float = 1.0
    atg_excess_nlos_db: float = 40.0
    ata_los_mode: Literal["expected", "bernoulli"] = "expected"
    ata_frequency_unit: Literal["mhz", "ghz"] = "mhz"
    azimuth_mode: Literal["steered", "random"] = "steered"
    min_distance_m: float = Field(default=1.0, gt=0)
    sir_floor_mw: float = Field(default=1e-30, gt=0)
    fading_enabled: bool = True
    antenna: AntennaParams = AntennaParams()
    uabs_antenna: AntennaParams = AntennaParams(downtilt_deg=0.0, vertical_reference="nadir")

    def antenna_for(self, tier: Tier) -> AntennaParams:
        return self.uabs_antenna if tier is Tier.UABS else self.antenna


class IcicState(BaseModel):
    """One point of the ICIC/CRE search space, applied uniformly to every cell of a tier.

    `uabs_height_m` records the UABS height scenario the state was evaluated under; the
    horizontal UABS placement is the fixed grid of the layout.
    """

    model_config = ConfigDict(frozen=True)

    alpha_mbs: float = Field(default=1.0, ge=0, le=1)
    alpha_pbs: float = Field(default=1.0, ge=0, le=1)
    beta_mbs: float = Field(default=0.5, ge=0, le=1)
    beta_pbs: float = Field(default=0.5, ge=0, le=1)
    rho_mbs: float = 30.0
    rho_pbs: float = 0.0
    rho_uabs: float = 0.0
    tau_pbs: float = Field(default=0.0, ge=0)
    tau_uabs: float = Field(default=0.0, ge=0)
    uabs_height_m: float | None = None

    @property
    def icic_mode(self) -> IcicMode:
        if self.alpha_mbs == 1.0 and self.alpha_pbs == 1.0:
            return IcicMode.NONE
        if self.alpha_mbs == 0.0 and self.alpha_pbs == 0.0:
            return IcicMode.EICIC
        return IcicMode.FEICIC


class SearchGrid(BaseModel):
    """Candidate values per ICIC dimension.

    With `tie_tiers` the MBS and PBS share one α and one β per state; otherwise both
    tiers range over the value lists independently.
    """

    model_config = ConfigDict(frozen=True)

    alpha_values: list[float] = Field(default_factory=lambda: [0.0, 0.25, 0.5, 0.75, 1.0])
    beta_values: list[float] = Field(default_factory=lambda: [0.3, 0.5, 0.7])
    rho_mbs_values: list[float] = Field(default_factory=lambda: [20.0, 25.0, 30.0, 35.0, 40.0])
    rho_pbs_values: list[float] = Field(default_factory=lambda: [-10.0, -5.0, 0.0, 5.0, 10.0])
    rho_uabs_values: list[float] = Field(default_factory=lambda: [-5.0, 0.0, 5.0])
    tau_pbs_values: list[float] = Field(default_factory=lambda: [0.0, 3.0, 6.0, 9.0, 12.0])
    tau_uabs_values: list[float] = Field(default_factory=lambda: [0.0, 3.0, 6.0, 9.0, 12.0])
    objective: Objective = Objective.FIVE_PSE
    tie_tiers: bool = True

    def for_mode(self, mode: IcicMode) -> "SearchGrid":
        """Restrict the α dimension to an ICIC family."""
        if mode is IcicMode.NONE:
            return self.model_copy(update={"alpha_values": [1.0]})
        if mode is IcicMode.EICIC:
            return self.model_copy(update={"alpha_values": [0.0]})
        if mode is IcicMode.FEICIC:
            inside = [a for a in self.alpha_values if 0.0 < a < 1.0]
            return self.model_copy(update={"alpha_values": inside})
        return self

    @property
    def cardinality(self) -> int:
        alphas = len(self.alpha_values) ** (1 if self.tie_tiers else 2)
        betas = len(self.beta_values) ** (1 if self.tie_tiers else 2)
        return math.prod(
            [
                alphas,
                betas,
                len(self.rho_mbs_values),
                len(self.rho_pbs_values),
                len(self.rho_uabs_values),
                len(self.tau_pbs_values),
                len(self.tau_uabs_values),
            ]
        )
