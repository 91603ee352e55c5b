import os
import sys


PROJECT_ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
if PROJECT_ROOT not in sys.path:
    sys.path.insert(0, PROJECT_ROOT)

import numpy as np
import pytest

from src.adapters.metrics import Metrics
from src.core.params import ChannelParams, SimArea, Tier, TierSpec
from src.core.results import NetworkLayout
from src.utils.config import CoverageSpec, SimConfig


TOY_TX_POWER_DBM = {Tier.MBS: 46.0, Tier.PBS: 30.0, Tier.UABS: 26.0}


@pytest.fixture
def toy_layout() -> NetworkLayout:
    """One BS per tier and five UEs (four ground, one aerial) on a 2 km square."""
    return NetworkLayout(
        mbs=np.array([[500.0, 500.0, 36.0]]),
        pbs=np.array([[1500.0, 500.0, 15.0]]),
        uabs=np.array([[1000.0, 1500.0, 36.0]]),
        gue=np.array(
            [
                [600.0, 700.0, 1.5],
                [1400.0, 600.0, 1.5],
                [1000.0, 1300.0, 1.5],
                [200.0, 1800.0, 1.5],
            ]
        ),
        aue=np.array([[900.0, 900.0, 22.5]]),
    )


@pytest.fixture
def toy_tx_power() -> dict[Tier, float]:
    return dict(TOY_TX_POWER_DBM)


@pytest.fixture
def deterministic_channel() -> ChannelParams:
    """Default channel with fading switched off (H = 1 on every link)."""
    return ChannelParams(fading_enabled=False)


def small_tiers(uabs_count: int = 4) -> list[TierSpec]:
    return [
        TierSpec(tier=Tier.MBS, intensity_per_km2=3.0, tx_power_dbm=46.0, height_m=36.0),
        TierSpec(tier=Tier.PBS, intensity_per_km2=6.0, tx_power_dbm=30.0, height_m=15.0),
        TierSpec(tier=Tier.UABS, count=uabs_count, tx_power_dbm=26.0, height_m=36.0),
        TierSpec(tier=Tier.GUE, intensity_per_km2=40.0, height_m=1.5),
        TierSpec(tier=Tier.AUE, intensity_per_km2=4.0, height_m=22.5),
    ]


@pytest.fixture
def small_config() -> SimConfig:
    """A 2 km x 2 km scenario that runs in well under a second per trial."""
    return SimConfig(
        area=SimArea(width_m=2000.0, height_m=2000.0),
        tiers=small_tiers(),
        coverage=CoverageSpec(threshold_se=0.01, grid_resolution_m=250.0),
        trials=2,
        seed=11,
    )


@pytest.fixture(autouse=True)
def _reset_metrics():
    Metrics.reset()
    yield
    Metrics.reset()
