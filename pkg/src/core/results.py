from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt

from src.core.params import BS_TIERS, IcicState, LinkClass, Objective, Subframe, Tier


FloatArray = npt.NDArray[np.float64]
IntArray = npt.NDArray[np.int64]


@dataclass(frozen=True)
class NetworkLayout:
    """3D node positions per tier, each an (N, 3) array in meters."""

    mbs: FloatArray
    pbs: FloatArray
    uabs: FloatArray
    gue: FloatArray
    aue: FloatArray

    def positions(self, tier: Tier) -> FloatArray:
        return getattr(self, tier.value)  # type: ignore[no-any-return]

    def count(self, tier: Tier) -> int:
        return int(self.positions(tier).shape[0])

    @property
    def ue_count(self) -> int:
        return self.count(Tier.GUE) + self.count(Tier.AUE)

    def fingerprint(self) -> str:
        digest = hashlib.sha256()
        for tier in Tier:
            digest.update(np.ascontiguousarray(self.positions(tier)).tobytes())
        return digest.hexdigest()


@dataclass(frozen=True)
class Node:
    tier: Tier
    index: int
    position: FloatArray


@dataclass(frozen=True)
class LinkGeometry:
    """BS-to-UE geometry; fields are scalars or equally shaped arrays.

    `elevation_deg` is the depression angle below the BS horizon toward the UE
    (negative when the UE is above the BS).
    """

    d2_m: FloatArray | float
    d3_m: FloatArray | float
    elevation_deg: FloatArray | float
    azimuth_deg: FloatArray | float = 0.0


@dataclass(frozen=True)
class LinkBudget:
    rx_power_mw: float
    pl_db: float
    antenna_db: float
    fading: float
    geometry: LinkGeometry
    bs_index: int
    bs_tier: Tier
    link_class: LinkClass


@dataclass(frozen=True)
class InterestPowers:
    """Per-UE received powers from the cells of interest plus residual interference.

    All arrays share the UE axis. `moi`/`poi`/`uoi` index the nearest MBS/PBS/UABS.
    """

    r_mbs: FloatArray
    r_pbs: FloatArray
    r_uabs: FloatArray
    i_agg: FloatArray
    moi: IntArray
    poi: IntArray
    uoi: IntArray

    def __len__(self) -> int:
        return int(self.r_mbs.shape[0])

    def fingerprint(self) -> str:
        digest = hashlib.sha256()
        for arr in (self.r_mbs, self.r_pbs, self.r_uabs, self.i_agg, self.moi, self.poi, self.uoi):
            digest.update(np.ascontiguousarray(arr).tobytes())
        return digest.hexdigest()


@dataclass(frozen=True)
class SirSextet:
    """The six USF/CSF SIRs (linear) toward MOI, POI and UOI, one entry per UE."""

    mbs_usf: FloatArray
    mbs_csf: FloatArray
    pbs_usf: FloatArray
    pbs_csf: FloatArray
    uabs_usf: FloatArray
    uabs_csf: FloatArray

    def usf_matrix(self) -> FloatArray:
        """(n, 3) USF SIRs in BS_TIERS column order."""
        return np.column_stack([self.mbs_usf, self.pbs_usf, self.uabs_usf])

    def csf_matrix(self) -> FloatArray:
        return np.column_stack([self.mbs_csf, self.pbs_csf, self.uabs_csf])

    def take(self, index: int) -> "SirSextet":
        return SirSextet(
            *(np.atleast_1d(getattr(self, name))[index : index + 1] for name in _SEXTET_FIELDS)
        )

    def __len__(self) -> int:
        return int(np.atleast_1d(self.mbs_usf).shape[0])


_SEXTET_FIELDS = ("mbs_usf", "mbs_csf", "pbs_usf", "pbs_csf", "uabs_usf", "uabs_csf")


@dataclass(frozen=True)
class AssociationBatch:
    """Vectorised association outcome for a UE population.

    `serving_tier` holds codes into BS_TIERS; `csf` is True for UEs scheduled in CSF.
    """

    serving_tier: IntArray
    serving_cell: IntArray
    csf: npt.NDArray[np.bool_]
    biased_metric_db: FloatArray
    sir: SirSextet

    def __len__(self) -> int:
        return int(self.serving_tier.shape[0])


@dataclass(frozen=True)
class UeAssignment:
    ue_index: int
    serving_tier: Tier
    serving_cell: int
    subframe: Subframe
    sir: SirSextet
    biased_metric_db: float

    @property
    def serving_sir(self) -> float:
        prefix = self.serving_tier.value
        return float(getattr(self.sir, f"{prefix}_{self.subframe.value}")[0])


@dataclass(frozen=True)
class CellLoads:
    """Per-cell scheduled-UE counts; each array is indexed by cell within its tier."""

    n_usf_mbs: IntArray
    n_csf_mbs: IntArray
    n_usf_pbs: IntArray
    n_csf_pbs: IntArray
    n_usf_uabs: IntArray
    n_csf_uabs: IntArray

    def counts(self, tier: Tier, subframe: Subframe) -> IntArray:
        return getattr(self, f"n_{subframe.value}_{tier.value}")  # type: ignore[no-any-return]

    def total(self) -> int:
        return int(
            sum(int(self.counts(t, s).sum()) for t in BS_TIERS for s in Subframe)
        )


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    fifth_percentile_se: float
    coverage_probability: float
    per_ue_se: FloatArray
    scene_fingerprint: str = ""


@dataclass(frozen=True)
class KpiReport:
    fifth_percentile_se: float
    coverage_probability: float
    per_ue_se: FloatArray
    trials: int
    threshold_se: float
    state: IcicState
    seed: int
    records: list[TrialRecord] = field(default_factory=list)


@dataclass(frozen=True)
class StateEvaluation:
    index: int
    state: IcicState
    fifth_percentile_se: float
    coverage_probability: float
    value: float


@dataclass(frozen=True)
class SearchResult:
    best_state: IcicState
    best_value: float
    evaluated: int
    trace: list[StateEvaluation]
    objective: Objective
    best_index: int = 0

    @property
    def best(self) -> StateEvaluation:
        return self.trace[self.best_index]


@dataclass(frozen=True)
class EmpiricalCdf:
    link_class: LinkClass
    values_db: FloatArray
    probabilities: FloatArray

    @property
    def endpoint_db(self) -> float:
        return float(self.values_db[-1]) if self.values_db.size else float("nan")

    def __len__(self) -> int:
        return int(self.values_db.shape[0])


@dataclass(frozen=True)
class EndpointCheck:
    """Maximum path loss of a link class against its expected value.

    Informative checks are reported but never count as failures.
    """

    link_class: LinkClass
    endpoint_db: float
    expected_db: float
    tolerance_db: float
    informative: bool = False

    @property
    def within(self) -> bool:
        return abs(self.endpoint_db - self.expected_db) <= self.tolerance_db


@dataclass(frozen=True)
class SurfacePoint:
    """Peak KPIs at one (τ_pbs, τ_uabs) pair, maximised over the other ICIC dimensions."""

    tau_pbs: float
    tau_uabs: float
    coverage: float
    fivepse: float


@dataclass(frozen=True)
class ModeOutcome:
    mode: str
    fifth_percentile_se: float
    coverage_probability: float
    best_state_fivepse: IcicState
    best_state_coverage: IcicState
    evaluated: int


@dataclass(frozen=True)
class IcicComparison:
    """Optimised KPIs per ICIC mode and relative gains in percent."""

    outcomes: dict[str, ModeOutcome]
    improvements: dict[str, float]
