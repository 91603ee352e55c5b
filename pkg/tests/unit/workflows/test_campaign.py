import math

import numpy as np
import pytest

from src.adapters.metrics import Metrics
from src.core.errors import ConfigurationError
from src.core.params import ChannelParams, IcicState, Tier
from src.core.results import NetworkLayout
from src.services.association import associate_batch, batch_loads, layout_nodes, node_powers
from src.services.kpi import spectral_efficiency
from src.workflows.campaign import (
    aggregate,
    build_scene,
    build_scenes,
    evaluate_scene,
    run_campaign,
    run_trial,
    trial_seed,
)


FC_MHZ = 763.0
C = 299_792_458.0


def _hata(d2: float, h_bs: float) -> float:
    a_hm = 3.2 * math.log10(11.75 * 1.5) ** 2 - 4.97
    d_km = max(d2, 1.0) / 1000.0
    return (
        69.55 + 26.16 * math.log10(FC_MHZ) - 13.82 * math.log10(h_bs) - a_hm
        + (44.9 - 6.55 * math.log10(h_bs)) * math.log10(d_km)
    )


def _aerial(d2: float, d3: float, h_ue: float) -> float:
    d1 = max(460.0 * math.log10(h_ue) - 700.0, 18.0)
    p1 = 4300.0 * math.log10(h_ue) - 3800.0
    p = 1.0 if d2 <= d1 else d1 / d2 + math.exp(-d2 / p1) * (1.0 - d1 / d2)
    d = max(d3, 1.0)
    los = 28.0 + 22.0 * math.log10(d) + 20.0 * math.log10(FC_MHZ)
    nlos = -17.5 + (46.0 - 7.0 * math.log10(h_ue)) * math.log10(d) + 20.0 * math.log10(
        40.0 * math.pi * FC_MHZ / 3.0
    )
    return p * los + (1.0 - p) * max(nlos, los)


def _air_to_ground(d3: float, theta: float) -> float:
    p = 1.0 / (1.0 + 9.61 * math.exp(-0.16 * (theta - 9.61)))
    fs = 20.0 * math.log10(4.0 * math.pi * max(d3, 1.0) * FC_MHZ * 1e6 / C)
    return p * (fs + 1.0) + (1.0 - p) * (fs + 40.0)


def _gain(theta: float, tilt: float) -> float:
    return 8.0 - min(12.0 * ((theta - tilt) / 65.0) ** 2, 30.0)


def _link(bs, ue, tier: Tier, aerial: bool, tx: float) -> tuple[float, float]:
    """(received power in mW, 3D distance) of one link without fading."""
    d2 = math.hypot(ue[0] - bs[0], ue[1] - bs[1])
    dh = bs[2] - ue[2]
    d3 = math.hypot(d2, dh)
    theta = math.degrees(math.atan2(dh, d2))
    if aerial:
        pl = _aerial(d2, d3, ue[2])
    elif tier is Tier.UABS:
        pl = _air_to_ground(d3, theta)
    else:
        pl = _hata(d2, bs[2])
    # UABS element: tilt 0 measured off nadir
    gain = _gain(90.0 - theta, 0.0) if tier is Tier.UABS else _gain(theta, 6.0)
    return 10 ** (tx / 10) * 10 ** ((gain - pl) / 10), d3


def _oracle_se(layout: NetworkLayout, state: IcicState, tx: dict[Tier, float]) -> list[float]:
    """Per-UE SE from scalar formulas, GUEs first, half UABS duty normalization."""
    tiers = (Tier.MBS, Tier.PBS, Tier.UABS)
    ues = [(p, False) for p in layout.gue] + [(p, True) for p in layout.aue]
    picks = []
    for ue, aerial in ues:
        best = []
        others = []
        for tier in tiers:
            links = [_link(bs, ue, tier, aerial, tx[tier]) for bs in layout.positions(tier)]
            k = min(range(len(links)), key=lambda i: links[i][1])
            best.append((k, links[k][0]))
            others.extend(r for i, (r, _) in enumerate(links) if i != k)
        (m_i, r_m), (p_i, r_p), (u_i, r_u) = best
        i_agg = sum(others)
        a_m, a_p = state.alpha_mbs, state.alpha_pbs
        # denominators floored at 1e-30 mW like the pipeline
        usf = [
            r_m / max(r_p + r_u + i_agg, 1e-30),
            r_p / max(r_m + r_u + i_agg, 1e-30),
            r_u / max(r_m + r_p + i_agg, 1e-30),
        ]
        csf = [
            a_m * r_m / max(a_p * r_p + r_u + i_agg, 1e-30),
            a_p * r_p / max(a_m * r_m + r_u + i_agg, 1e-30),
            r_u / max(a_m * r_m + a_p * r_p + i_agg, 1e-30),
        ]
        metric = [10 * math.log10(usf[0]), 10 * math.log10(usf[1]) + state.tau_pbs,
                  10 * math.log10(usf[2]) + state.tau_uabs]
        code = metric.index(max(metric))
        rho = (state.rho_mbs, state.rho_pbs, state.rho_uabs)[code]
        in_csf = 10 * math.log10(usf[code]) < rho
        picks.append((code, (m_i, p_i, u_i)[code], in_csf, (csf if in_csf else usf)[code]))

    load: dict[tuple[int, int, bool], int] = {}
    for code, cell, in_csf, _ in picks:
        load[(code, cell, in_csf)] = load.get((code, cell, in_csf), 0) + 1

    b_sum = state.beta_mbs + state.beta_pbs
    usf_w = (state.beta_mbs, state.beta_pbs, 0.5 * b_sum)
    csf_w = (1 - state.beta_mbs, 1 - state.beta_pbs, 0.5 * (2 - b_sum))
    return [
        (csf_w if in_csf else usf_w)[code] * math.log2(1 + sir) / load[(code, cell, in_csf)]
        for code, cell, in_csf, sir in picks
    ]


@pytest.fixture
def fading_free_config(small_config):
    return small_config.model_copy(update={"channel": ChannelParams(fading_enabled=False)})


@pytest.mark.parametrize(
    "state",
    [
        IcicState(alpha_mbs=1.0, alpha_pbs=1.0, tau_pbs=6.0, tau_uabs=3.0),
        IcicState(alpha_mbs=0.0, alpha_pbs=0.0, beta_mbs=0.3, beta_pbs=0.7, rho_pbs=5.0),
        IcicState(alpha_mbs=0.5, alpha_pbs=0.25, rho_mbs=25.0, rho_uabs=-5.0, tau_uabs=9.0),
    ],
    ids=["no_icic", "eicic", "feicic"],
)
def test_trial_matches_scalar_oracle(fading_free_config, state):
    scene = build_scene(fading_free_config, 0, 11)
    outcome = evaluate_scene(scene, state, fading_free_config)
    expected = _oracle_se(scene.layout, state, fading_free_config.tx_power_dbm())
    assert len(expected) == scene.layout.ue_count
    assert np.allclose(outcome.record.per_ue_se, expected, rtol=1e-9, atol=0.0)
    assert outcome.loads.total() == scene.layout.ue_count


def test_run_trial_is_deterministic(small_config):
    a = run_trial(small_config, IcicState(), seed=5)
    b = run_trial(small_config, IcicState(), seed=5)
    c = run_trial(small_config, IcicState(), seed=6)
    assert a.fifth_percentile_se == b.fifth_percentile_se
    assert a.coverage_probability == b.coverage_probability
    assert np.array_equal(a.per_ue_se, b.per_ue_se)
    assert a.records[0].scene_fingerprint != c.records[0].scene_fingerprint
    assert Metrics.get("trials_completed") == 3


def test_single_trial_campaign_equals_run_trial(small_config):
    campaign = run_campaign(small_config, IcicState(), trials=1, seed=5)
    trial = run_trial(small_config, IcicState(), seed=5)
    assert campaign.fifth_percentile_se == trial.fifth_percentile_se
    assert campaign.coverage_probability == trial.coverage_probability


def test_campaign_is_mean_of_trials(small_config):
    report = run_campaign(small_config, trials=3, seed=2)
    assert report.trials == 3
    assert [r.trial for r in report.records] == [0, 1, 2]
    assert report.fifth_percentile_se == pytest.approx(
        np.mean([r.fifth_percentile_se for r in report.records])
    )
    assert report.coverage_probability == pytest.approx(
        np.mean([r.coverage_probability for r in report.records])
    )
    assert 0.0 <= report.coverage_probability <= 1.0
    assert Metrics.get("campaigns_completed") == 1


def test_campaign_independent_of_thread_count(small_config):
    one = run_campaign(small_config, trials=4, seed=9, threads=1)
    four = run_campaign(small_config, trials=4, seed=9, threads=4)
    assert one.fifth_percentile_se == four.fifth_percentile_se
    assert one.coverage_probability == four.coverage_probability
    assert np.array_equal(one.per_ue_se, four.per_ue_se)


def test_scene_is_shared_across_states(small_config):
    scenes = build_scenes(small_config, trials=2, seed=3)
    no_icic = evaluate_scene(scenes[0], IcicState(), small_config).record
    eicic = evaluate_scene(
        scenes[0], IcicState(alpha_mbs=0.0, alpha_pbs=0.0), small_config
    ).record
    assert no_icic.scene_fingerprint == eicic.scene_fingerprint
    assert scenes[0].fingerprint != scenes[1].fingerprint
    rebuilt = build_scene(small_config, 1, 3)
    assert rebuilt.fingerprint == scenes[1].fingerprint


def test_trial_streams_are_keyed_by_index():
    a = trial_seed(7, 3).generate_state(4)
    b = trial_seed(7, 3).generate_state(4)
    c = trial_seed(7, 4).generate_state(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_campaign_stamps_uabs_height(small_config):
    config = small_config.model_copy(update={"uabs_height_m": 50.0})
    report = run_campaign(config, trials=1)
    assert report.state.uabs_height_m == 50.0
    assert report.seed == 11


def test_campaign_without_seed_is_rejected(small_config):
    config = small_config.model_copy(update={"seed": None})
    with pytest.raises(ConfigurationError):
        run_campaign(config, trials=1)


def test_aggregate_pools_per_ue_se(small_config):
    scenes = build_scenes(small_config, trials=2, seed=1)
    records = [evaluate_scene(s, IcicState(), small_config).record for s in scenes]
    report = aggregate(records, IcicState(), small_config, seed=1)
    assert len(report.per_ue_se) == sum(len(r.per_ue_se) for r in records)


@pytest.mark.parametrize(
    "state",
    [
        IcicState(alpha_mbs=1.0, alpha_pbs=1.0),
        IcicState(alpha_mbs=0.0, alpha_pbs=0.0, rho_mbs=40.0, rho_pbs=10.0),
        IcicState(alpha_mbs=0.75, alpha_pbs=0.25, rho_mbs=40.0, tau_pbs=12.0),
    ],
    ids=["no_icic", "eicic", "feicic"],
)
def test_toy_layout_matches_scalar_oracle(toy_layout, deterministic_channel, toy_tx_power, state):
    powers = node_powers(
        layout_nodes(toy_layout), toy_layout, deterministic_channel, np.random.default_rng(0),
        tx_power_dbm=toy_tx_power,
    )
    batch = associate_batch(powers, state)
    se = spectral_efficiency(batch, batch_loads(batch, toy_layout), state)
    expected = _oracle_se(toy_layout, state, toy_tx_power)
    assert np.allclose(se, expected, rtol=1e-9, atol=0.0)
