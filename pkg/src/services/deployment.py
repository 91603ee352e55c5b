from __future__ import annotations

import math
from collections.abc import Sequence

import numpy as np
import structlog

from src.core.errors import ConfigurationError, ParameterError
from src.core.params import SimArea, Tier, TierSpec
from src.core.results import FloatArray, NetworkLayout


logger = structlog.get_logger(__name__)

# Grid pitches below this would stack UABSs closer than the link-distance clamp.
_MIN_GRID_PITCH_M = 1.0


def sample_ppp(
    area: SimArea, intensity_per_km2: float, height_m: float, rng: np.random.Generator
) -> FloatArray:
    """Sample a homogeneous 2D PPP over the area, lifted to a fixed height.

    Draws a Poisson count with mean intensity × area, then places that many points
    uniformly. Returns an (N, 3) array.
    """
    if intensity_per_km2 < 0:
        raise ParameterError(
            f"intensity must be non-negative, got {intensity_per_km2}", field="intensity_per_km2"
        )
    n = int(rng.poisson(intensity_per_km2 * area.area_km2))
    points = np.empty((n, 3), dtype=np.float64)
    points[:, 0] = rng.uniform(0.0, area.width_m, n)
    points[:, 1] = rng.uniform(0.0, area.height_m, n)
    points[:, 2] = height_m
    return points


def _grid_shape(count: int, aspect: float) -> tuple[int, int]:
    """Rows × columns factorisation of `count` whose column/row ratio is closest to `aspect`.

    Equal distance in log-ratio prefers fewer rows.
    """
    best: tuple[float, int, int] | None = None
    for rows in range(1, count + 1):
        if count % rows:
            continue
        cols = count // rows
        score = abs(math.log((cols / rows) / aspect))
        if best is None or score < best[0] - 1e-12:
            best = (score, rows, cols)
    assert best is not None
    return best[1], best[2]


def hex_grid(area: SimArea, count: int, height_m: float) -> FloatArray:
    """Deterministic offset-row lattice of exactly `count` nodes centred in the area.

    Rows sit at the centres of equal-height bands; odd rows are shifted half a column
    pitch against even rows (a quarter pitch either way, keeping the lattice centred).
    """
    if count < 1:
        raise ParameterError(f"hex grid needs at least one node, got {count}", field="count")
    rows, cols = _grid_shape(count, area.width_m / area.height_m)
    pitch_x = area.width_m / cols
    pitch_y = area.height_m / rows
    if min(pitch_x, pitch_y) < _MIN_GRID_PITCH_M:
        raise ParameterError(
            f"{count} nodes do not fit a {rows}x{cols} grid at positive spacing", field="count"
        )
    shift = pitch_x / 4.0 if rows > 1 else 0.0

    points = np.empty((rows * cols, 3), dtype=np.float64)
    for row in range(rows):
        offset = shift if row % 2 else -shift
        xs = (np.arange(cols) + 0.5) * pitch_x + offset
        block = slice(row * cols, (row + 1) * cols)
        points[block, 0] = xs
        points[block, 1] = (row + 0.5) * pitch_y
    points[:, 2] = height_m
    return points


def build_layout(
    specs: Sequence[TierSpec], area: SimArea, rng: np.random.Generator
) -> NetworkLayout:
    """Place every tier: PPP tiers from independent child streams, grid tiers by hex_grid."""
    by_tier: dict[Tier, TierSpec] = {}
    for spec in specs:
        if spec.tier in by_tier:
            raise ConfigurationError(f"duplicate tier {spec.tier.value}", field="tiers")
        by_tier[spec.tier] = spec
    missing = [t.value for t in Tier if t not in by_tier]
    if missing:
        raise ConfigurationError(f"missing tiers: {', '.join(missing)}", field="tiers")

    # One child stream per tier in Tier order, so a tier's draws never depend on
    # another tier's Poisson count.
    streams = dict(zip(Tier, rng.spawn(len(Tier))))
    positions: dict[str, FloatArray] = {}
    for tier in Tier:
        spec = by_tier[tier]
        if spec.count is not None:
            positions[tier.value] = (
                hex_grid(area, spec.count, spec.height_m)
                if spec.count > 0
                else np.empty((0, 3), dtype=np.float64)
            )
        else:
            assert spec.intensity_per_km2 is not None
            positions[tier.value] = sample_ppp(
                area, spec.intensity_per_km2, spec.height_m, streams[tier]
            )

    layout = NetworkLayout(**positions)
    logger.debug(
        "layout_built",
        **{f"n_{t.value}": layout.count(t) for t in Tier},
    )
    return layout
