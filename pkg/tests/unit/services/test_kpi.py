import math
from dataclasses import replace

import numpy as np
import pytest

from src.core.errors import ConsistencyError, ParameterError
from src.core.params import ChannelParams, DutyNormalization, IcicState, SimArea, Subframe, Tier
from src.core.results import AssociationBatch, CellLoads, SirSextet, UeAssignment
from src.services.association import associate_all, layout_nodes, tally_loads
from src.services.kpi import (
    coverage_probability,
    duty_weights,
    fifth_percentile,
    probe_grid,
    spectral_efficiency,
    ue_spectral_efficiency,
)


def _one_ue_sextet(value: float) -> SirSextet:
    col = np.array([value])
    return SirSextet(col, col, col, col, col, col)


def _assignment(tier: Tier, subframe: Subframe, sir: float) -> UeAssignment:
    return UeAssignment(
        ue_index=0,
        serving_tier=tier,
        serving_cell=0,
        subframe=subframe,
        sir=_one_ue_sextet(sir),
        biased_metric_db=10 * math.log10(sir),
    )


def _loads(tier: Tier, subframe: Subframe, n: int) -> CellLoads:
    code = {Tier.MBS: 0, Tier.PBS: 1, Tier.UABS: 2}[tier]
    return tally_loads(
        np.full(n, code), np.zeros(n, dtype=np.int64), np.full(n, subframe is Subframe.CSF), [1, 1, 1]
    )


def test_se_single_mbs_usf_ue():
    state = IcicState(beta_mbs=0.5)
    a = _assignment(Tier.MBS, Subframe.USF, 3.0)
    assert ue_spectral_efficiency(a, _loads(Tier.MBS, Subframe.USF, 1), state) == pytest.approx(1.0)


def test_se_shared_four_ways():
    state = IcicState(beta_mbs=0.5)
    a = _assignment(Tier.MBS, Subframe.USF, 3.0)
    assert ue_spectral_efficiency(a, _loads(Tier.MBS, Subframe.USF, 4), state) == pytest.approx(0.25)


def test_se_uabs_duty_normalization():
    state = IcicState(beta_mbs=0.5, beta_pbs=0.5)
    a = _assignment(Tier.UABS, Subframe.USF, 3.0)
    loads = _loads(Tier.UABS, Subframe.USF, 1)
    half = ue_spectral_efficiency(a, loads, state, DutyNormalization.HALF)
    as_written = ue_spectral_efficiency(a, loads, state, DutyNormalization.AS_WRITTEN)
    assert half == pytest.approx(0.5 * 2.0)
    assert as_written == pytest.approx(1.0 * 2.0)


def test_se_csf_uses_complementary_duty():
    state = IcicState(beta_mbs=0.5, beta_pbs=0.3)
    a = _assignment(Tier.PBS, Subframe.CSF, 1.0)
    se = ue_spectral_efficiency(a, _loads(Tier.PBS, Subframe.CSF, 2), state)
    assert se == pytest.approx(0.7 * 1.0 / 2)


def test_se_rejects_zero_load():
    a = _assignment(Tier.PBS, Subframe.USF, 3.0)
    with pytest.raises(ConsistencyError):
        ue_spectral_efficiency(a, _loads(Tier.MBS, Subframe.USF, 1), IcicState())


def test_duty_weights_full_frame_without_split():
    # UABS USF and CSF weights under half normalization add up to one frame
    state = IcicState(beta_mbs=0.2, beta_pbs=0.6)
    codes = np.array([2, 2])
    w = duty_weights(codes, np.array([False, True]), state)
    assert w.sum() == pytest.approx(1.0)


def test_batch_se_equal_share_within_subframe():
    n = 6
    sir = SirSextet(*(np.full(n, 7.0) for _ in range(6)))
    batch = AssociationBatch(
        serving_tier=np.zeros(n, dtype=np.int64),
        serving_cell=np.zeros(n, dtype=np.int64),
        csf=np.zeros(n, dtype=bool),
        biased_metric_db=np.zeros(n),
        sir=sir,
    )
    loads = tally_loads(batch.serving_tier, batch.serving_cell, batch.csf, [1, 0, 0])
    se = spectral_efficiency(batch, loads, IcicState(beta_mbs=0.6))
    assert np.allclose(se, 0.6 * 3.0 / n)
    # doubling the cell population halves every share
    bigger = spectral_efficiency(batch, loads, IcicState(beta_mbs=0.6), extra_load=n)
    assert np.allclose(bigger, se / 2)


def test_fifth_percentile_nearest_rank():
    assert fifth_percentile(np.arange(1.0, 101.0)) == 5.0
    assert fifth_percentile(np.array([2.5] * 7)) == 2.5
    assert fifth_percentile(np.array([9.0])) == 9.0


def test_fifth_percentile_matches_sort_oracle():
    values = np.random.default_rng(17).exponential(size=10_000)
    expected = np.sort(values)[math.ceil(0.05 * values.size) - 1]
    assert fifth_percentile(values) == expected
    assert fifth_percentile(values) <= np.median(values)


def test_fifth_percentile_empty_vector():
    with pytest.raises(ParameterError):
        fifth_percentile(np.array([]))


def test_probe_grid_centres():
    probes = probe_grid(SimArea(width_m=1000.0, height_m=500.0), 250.0)
    assert probes.shape == (8, 3)
    assert sorted(set(probes[:, 0])) == [125.0, 375.0, 625.0, 875.0]
    assert sorted(set(probes[:, 1])) == [125.0, 375.0]
    assert np.all(probes[:, 2] == 1.5)
    with pytest.raises(ParameterError):
        probe_grid(SimArea(), 0.0)


def _coverage(layout, threshold, tx, state=None):
    return coverage_probability(
        layout,
        state or IcicState(),
        ChannelParams(),
        threshold,
        250.0,
        np.random.default_rng(3),
        area=SimArea(width_m=2000.0, height_m=2000.0),
        tx_power_dbm=tx,
    )


def test_coverage_bounds_and_monotone_threshold(toy_layout, toy_tx_power):
    assert _coverage(toy_layout, 0.0, toy_tx_power) == 1.0
    assert _coverage(toy_layout, math.inf, toy_tx_power) == 0.0
    values = [_coverage(toy_layout, t, toy_tx_power) for t in (0.001, 0.01, 0.1, 1.0)]
    assert values == sorted(values, reverse=True)
    assert all(0.0 <= v <= 1.0 for v in values)


def test_coverage_with_frozen_loads_uses_them(toy_layout, toy_tx_power):
    _, loads = associate_all(
        layout_nodes(toy_layout), toy_layout, IcicState(), ChannelParams(),
        np.random.default_rng(1), tx_power_dbm=toy_tx_power,
    )
    crowded = CellLoads(*(counts * 50 for counts in (
        loads.n_usf_mbs, loads.n_csf_mbs, loads.n_usf_pbs,
        loads.n_csf_pbs, loads.n_usf_uabs, loads.n_csf_uabs,
    )))
    kwargs = dict(
        area=SimArea(width_m=2000.0, height_m=2000.0), tx_power_dbm=toy_tx_power
    )
    light = coverage_probability(
        toy_layout, IcicState(), ChannelParams(), 0.05, 250.0, np.random.default_rng(3),
        loads=loads, **kwargs,
    )
    heavy = coverage_probability(
        toy_layout, IcicState(), ChannelParams(), 0.05, 250.0, np.random.default_rng(3),
        loads=crowded, **kwargs,
    )
    assert heavy <= light


def test_no_icic_collapses_subframes(toy_layout, toy_tx_power):
    # α = 1 and β = 0.5: a UE earns the same SE in either subframe when the loads match
    state = IcicState(alpha_mbs=1.0, alpha_pbs=1.0, beta_mbs=0.5, beta_pbs=0.5)
    assignments, _ = associate_all(
        layout_nodes(toy_layout), toy_layout, state, ChannelParams(),
        np.random.default_rng(5), tx_power_dbm=toy_tx_power,
    )
    sizes = {t: toy_layout.count(t) for t in (Tier.MBS, Tier.PBS, Tier.UABS)}
    balanced = CellLoads(
        **{
            f"n_{s.value}_{t.value}": np.full(n, 3, dtype=np.int64)
            for t, n in sizes.items()
            for s in Subframe
        }
    )
    for a in assignments:
        assert a.sir.usf_matrix()[0].tolist() == a.sir.csf_matrix()[0].tolist()
        usf = ue_spectral_efficiency(replace(a, subframe=Subframe.USF), balanced, state)
        csf = ue_spectral_efficiency(replace(a, subframe=Subframe.CSF), balanced, state)
        assert usf > 0
        assert usf == pytest.approx(csf, rel=1e-12)
