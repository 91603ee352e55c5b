from __future__ import annotations

import json
from functools import lru_cache
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from src.core.errors import ConfigurationError
from src.core.params import (
    BS_TIERS,
    ChannelParams,
    DutyNormalization,
    IcicMode,
    IcicState,
    Objective,
    SearchGrid,
    SimArea,
    Tier,
    TierSpec,
    default_tier_specs,
)


class Settings(BaseSettings):
    """Process-level settings.

    Loads from environment with safe local defaults.
    """

    app_name: str = Field(default="aghetnet-sim")
    app_version: str = Field(default="0.1.0", alias="APP_VERSION")
    log_level: Literal["DEBUG", "INFO", "WARNING", "ERROR"] = Field(
        default="INFO", alias="AGHETNET_LOG"
    )
    # Worker threads when --threads is absent; results never depend on it.
    default_threads: int = Field(default=1, ge=1, alias="AGHETNET_THREADS")

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    @field_validator("log_level", mode="before")
    @classmethod
    def _upper(cls, value: Any) -> Any:
        return value.upper() if isinstance(value, str) else value


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Return a cached Settings instance."""
    return Settings()  # type: ignore[call-arg]


# Documented bounds of the ICIC/CRE dimensions, in the state's own units.
PARAMETER_BOUNDS: dict[str, tuple[float, float, str]] = {
    "alpha_mbs": (0.0, 1.0, ""),
    "alpha_pbs": (0.0, 1.0, ""),
    "beta_mbs": (0.0, 1.0, ""),
    "beta_pbs": (0.0, 1.0, ""),
    "rho_mbs": (20.0, 40.0, " dB"),
    "rho_pbs": (-10.0, 10.0, " dB"),
    "rho_uabs": (-5.0, 5.0, " dB"),
    "tau_pbs": (0.0, 12.0, " dB"),
    "tau_uabs": (0.0, 12.0, " dB"),
}

_GRID_BOUNDS: dict[str, str] = {
    "alpha_values": "alpha_mbs",
    "beta_values": "beta_mbs",
    "rho_mbs_values": "rho_mbs",
    "rho_pbs_values": "rho_pbs",
    "rho_uabs_values": "rho_uabs",
    "tau_pbs_values": "tau_pbs",
    "tau_uabs_values": "tau_uabs",
}


class CoverageSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    threshold_se: float = Field(default=0.01, ge=0)
    grid_resolution_m: float = Field(default=200.0, gt=0)


class OutputPaths(BaseModel):
    """Where result files go; unset paths are simply not written."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    report: str | None = None
    layout_csv: str | None = None
    assignments_csv: str | None = None
    flat_csv: str | None = None
    trace_csv: str | None = None
    surface_csv: str | None = None
    cdf_csv: str | None = None


class SimConfig(BaseModel):
    """A complete simulation run description.

    `uabs_height_m` is authoritative for the UABS tier height; `objective` is
    authoritative over `grid.objective`.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    area: SimArea = SimArea()
    tiers: list[TierSpec] = Field(default_factory=default_tier_specs)
    uabs_height_m: float = Field(default=36.0, gt=0)
    channel: ChannelParams = ChannelParams()
    state: IcicState = IcicState()
    icic_mode: IcicMode = IcicMode.ALL
    grid: SearchGrid = SearchGrid()
    objective: Objective = Objective.FIVE_PSE
    coverage: CoverageSpec = CoverageSpec()
    uabs_duty_normalization: DutyNormalization = DutyNormalization.HALF
    trials: int = Field(default=1, ge=1)
    threads: int | None = Field(default=None, ge=1)
    seed: int | None = Field(default=None, ge=0)
    outputs: OutputPaths = OutputPaths()

    @field_validator("tiers")
    @classmethod
    def _one_spec_per_tier(cls, tiers: list[TierSpec]) -> list[TierSpec]:
        seen = [t.tier for t in tiers]
        duplicated = sorted({t.value for t in seen if seen.count(t) > 1})
        if duplicated:
            raise ValueError(f"duplicate tiers: {', '.join(duplicated)}")
        missing = [t.value for t in Tier if t not in seen]
        if missing:
            raise ValueError(f"missing tiers: {', '.join(missing)}")
        return tiers

    def tier_specs(self) -> list[TierSpec]:
        return [
            spec.model_copy(update={"height_m": self.uabs_height_m})
            if spec.tier is Tier.UABS
            else spec
            for spec in self.tiers
        ]

    def tx_power_dbm(self) -> dict[Tier, float]:
        powers = {spec.tier: spec.tx_power_dbm for spec in self.tiers}
        return {tier: float(powers[tier]) for tier in BS_TIERS}  # type: ignore[arg-type]

    def search_grid(self) -> SearchGrid:
        """The configured grid restricted to `icic_mode`, carrying the run objective."""
        return self.grid.for_mode(self.icic_mode).model_copy(update={"objective": self.objective})

    def evaluated_state(self, state: IcicState | None = None) -> IcicState:
        """`state` (default: the configured one) stamped with the UABS height scenario."""
        base = self.state if state is None else state
        return base.model_copy(update={"uabs_height_m": self.uabs_height_m})

    @property
    def master_seed(self) -> int:
        if self.seed is None:
            raise ConfigurationError(
                "seed is mandatory: set it in the config file or pass --seed", field="seed"
            )
        return self.seed


def _check_bound(value: float, name: str, path: str) -> None:
    low, high, unit = PARAMETER_BOUNDS[name]
    if not low <= value <= high:
        raise ConfigurationError(
            f"{path}={value:g} outside the allowed range [{low:g}, {high:g}]{unit}", field=path
        )


def check_ranges(config: SimConfig) -> None:
    """Raise ConfigurationError naming the first state or grid value out of bounds."""
    for name in PARAMETER_BOUNDS:
        _check_bound(getattr(config.state, name), name, f"state.{name}")
    for list_name, name in _GRID_BOUNDS.items():
        values = getattr(config.grid, list_name)
        if not values:
            raise ConfigurationError(f"grid.{list_name} must not be empty", field=f"grid.{list_name}")
        for i, value in enumerate(values):
            _check_bound(value, name, f"grid.{list_name}[{i}]")


def _from_dict(raw: dict[str, Any]) -> SimConfig:
    try:
        config = SimConfig.model_validate(raw)
    except ValidationError as exc:
        first = exc.errors()[0]
        path = ".".join(str(part) for part in first["loc"])
        raise ConfigurationError(f"{path}: {first['msg']}", field=path or None) from exc
    check_ranges(config)
    return config


def parse_config(text: str) -> dict[str, Any]:
    if not text.strip():
        return {}
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(
            f"config parse error at line {exc.lineno} column {exc.colno}: {exc.msg}",
            line=exc.lineno,
            column=exc.colno,
        ) from exc
    if not isinstance(raw, dict):
        raise ConfigurationError("config root must be a JSON object")
    return raw


def load_config(
    path: str | Path | None = None,
    *,
    seed: int | None = None,
    require_seed: bool = True,
    **overrides: Any,
) -> SimConfig:
    """Load a JSON config (absent fields take defaults) and apply command-line overrides.

    Overrides whose value is None are ignored. The merged result is validated again.
    """
    raw: dict[str, Any] = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}", field="config") from exc
        raw = parse_config(text)

    if seed is not None:
        raw["seed"] = seed
    raw.update({key: value for key, value in overrides.items() if value is not None})
    config = _from_dict(raw)
    if require_seed and config.seed is None:
        raise ConfigurationError(
            "seed is mandatory: set it in the config file or pass --seed", field="seed"
        )
    return config
