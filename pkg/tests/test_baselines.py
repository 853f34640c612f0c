"""Comparison strategies: single-hop designs, DF chains, time sharing, bounds."""

import numpy as np
import pytest

from relayalign.baselines import (
    SingleHopProblem,
    af_tdma,
    df_multiplexing_upper_bound,
    df_two_hop,
    selfish_bf,
    single_hop_leakage_ia,
    single_hop_wmmse,
)
from relayalign.channel import TrialStream, generate_channels, generate_direct_channels
from relayalign.config import StoppingRule, symmetric_config
from relayalign.network import effective_channels, feasible_init
from relayalign.metrics import sum_rate
from relayalign.wmse import POWER_CONTROL_PER_RELAY, wmse_run

from conftest import cgauss


def direct_problem(shape, seed, p=10.0):
    config = symmetric_config(shape, p_tx=p, p_relay=p)
    channels = generate_direct_channels(TrialStream(master_seed=seed, trial=0), config)
    return SingleHopProblem(
        channels=channels,
        d=list(config.d),
        p_tx_max=list(config.p_tx_max),
        sigma2=list(config.sigma2_rx),
    )


def test_upper_bound_hand_values():
    assert df_multiplexing_upper_bound(
        symmetric_config("(2x2,1)^3+2^3")
    ) == pytest.approx(1.5)
    assert df_multiplexing_upper_bound(
        symmetric_config("(2x2,1)^1+2^1")
    ) == pytest.approx(1.0)
    # equal terminal arrays make the two hop bounds coincide
    config = symmetric_config("(3x3,1)^2+5^2")
    k, n, x = 2, 3, 5
    assert df_multiplexing_upper_bound(config) == pytest.approx(
        0.5 * ((k * (x + n)) // (k + 1))
    )


def test_upper_bound_rejects_bad_configs():
    with pytest.raises(ValueError):
        df_multiplexing_upper_bound(symmetric_config("(2x2,1)^3+2^2"))
    config = symmetric_config("(2x2,1)^2+2^2")
    config.n_tx[0] = 3
    with pytest.raises(ValueError):
        df_multiplexing_upper_bound(config)


def test_selfish_scalar_rate():
    h = np.array([[1.5 - 0.5j]])
    prob = SingleHopProblem(channels=[[h]], d=[1], p_tx_max=[4.0], sigma2=[2.0])
    expected = np.log2(1 + 4.0 * abs(h[0, 0]) ** 2 / 2.0)
    assert selfish_bf(prob).rates_bits[0] == pytest.approx(expected, abs=1e-12)


def test_selfish_no_interference_is_eigen_beamforming():
    rng = np.random.default_rng(3)
    k = 2
    channels = [
        [cgauss(rng, 3, 3) if i == q else np.zeros((3, 3)) for q in range(k)]
        for i in range(k)
    ]
    prob = SingleHopProblem(
        channels=channels, d=[2, 2], p_tx_max=[6.0, 6.0], sigma2=[1.0, 1.0]
    )
    result = selfish_bf(prob)
    for i in range(k):
        s = np.linalg.svd(channels[i][i], compute_uv=False)[:2]
        expected = sum(np.log2(1 + 3.0 * val**2) for val in s)
        assert result.rates_bits[i] == pytest.approx(expected, abs=1e-9)


def test_selfish_symmetric_channels_give_equal_rates():
    rng = np.random.default_rng(4)
    h = cgauss(rng, 2, 2)
    channels = [[h.copy() for _ in range(3)] for _ in range(3)]
    prob = SingleHopProblem(
        channels=channels, d=[1, 1, 1], p_tx_max=[5.0] * 3, sigma2=[1.0] * 3
    )
    rates = selfish_bf(prob).rates_bits
    assert max(rates) - min(rates) <= 1e-9


def test_leakage_ia_single_pair_full_streams():
    # one pair leaks nothing, and with d = n_tx the precoder basis is unitary
    # so the rate is the full point-to-point rate
    rng = np.random.default_rng(7)
    h = cgauss(rng, 2, 2)
    prob = SingleHopProblem(channels=[[h]], d=[2], p_tx_max=[8.0], sigma2=[1.0])
    result = single_hop_leakage_ia(prob, StoppingRule(max_iter=5))
    assert result.trace[-1] == pytest.approx(0.0, abs=1e-12)
    sign, logdet = np.linalg.slogdet(np.eye(2) + 4.0 * h.conj().T @ h)
    assert result.rates_bits[0] == pytest.approx(float(logdet) / np.log(2), abs=1e-9)


def test_leakage_ia_feasible_shape_aligns():
    # three pairs of 2x2 with one stream satisfy the classical alignment
    # count, so some restart reaches numerically zero leakage
    prob = direct_problem("(2x2,1)^3+2^3", 5)
    best = min(
        single_hop_leakage_ia(
            prob, StoppingRule(max_iter=3000, tol=0.0), np.random.default_rng(s)
        ).trace[-1]
        for s in range(3)
    )
    assert best <= 1e-6


def test_leakage_ia_infeasible_shape_stays_away():
    prob = direct_problem("(2x2,1)^4+2^4", 5)
    vals = [
        single_hop_leakage_ia(
            prob, StoppingRule(max_iter=800, tol=1e-10), np.random.default_rng(s)
        ).trace[-1]
        for s in range(20)
    ]
    assert min(vals) >= 1e-2


def test_leakage_ia_trace_monotone():
    prob = direct_problem("(3x3,2)^3+2^3", 11)
    trace = single_hop_leakage_ia(prob, StoppingRule(max_iter=200)).trace
    assert all(b <= a + 1e-10 for a, b in zip(trace, trace[1:]))


def test_wmmse_trace_monotone_and_budget():
    prob = direct_problem("(2x2,1)^4+2^4", 5)
    result = single_hop_wmmse(prob, StoppingRule(max_iter=80), np.random.default_rng(1))
    trace = result.trace
    assert all(b <= a + 1e-8 for a, b in zip(trace, trace[1:]))
    for k in range(prob.K):
        power = float(np.linalg.norm(result.precoders[k]) ** 2)
        assert power <= prob.p_tx_max[k] * (1 + 1e-6)
    assert all(r >= 0 for r in result.rates_bits)


def test_df_zeroed_second_hop_gives_zero():
    config = symmetric_config("(2x2,1)^2+2^2", p_tx=10.0, p_relay=10.0)
    ch = generate_channels(TrialStream(master_seed=13, trial=0), config)
    for k in range(config.K):
        for m in range(config.M):
            ch.g[k][m] = np.zeros_like(ch.g[k][m])
    rates = df_two_hop(ch, config, "sf")
    assert rates == [0.0, 0.0]


def test_df_identical_hops_halve_the_rate():
    config = symmetric_config("(2x2,1)^2+2^2", p_tx=10.0, p_relay=10.0)
    ch = generate_channels(TrialStream(master_seed=17, trial=0), config)
    for k in range(config.K):
        for m in range(config.M):
            ch.g[k][m] = ch.h[k][m].copy()
    from relayalign.baselines import first_hop_problem

    solo = selfish_bf(first_hop_problem(ch, config)).rates_bits
    rates = df_two_hop(ch, config, "sf")
    for r, s in zip(rates, solo):
        assert r == pytest.approx(0.5 * s, abs=1e-12)


def test_df_requires_one_relay_per_pair():
    config = symmetric_config("(2x2,1)^3+2^2", p_tx=10.0, p_relay=10.0)
    ch = generate_channels(TrialStream(master_seed=19, trial=0), config)
    with pytest.raises(ValueError):
        df_two_hop(ch, config, "sf")
    with pytest.raises(ValueError):
        df_two_hop(
            generate_channels(
                TrialStream(master_seed=19, trial=0),
                symmetric_config("(2x2,1)^2+2^2"),
            ),
            symmetric_config("(2x2,1)^2+2^2"),
            "unknown",
        )


def test_af_tdma_single_pair_equals_solo_run():
    config = symmetric_config("(2x2,1)^1+2^2", p_tx=10.0, p_relay=10.0)
    ch = generate_channels(TrialStream(master_seed=23, trial=0), config)
    stop = StoppingRule(max_iter=40)
    rates = af_tdma(ch, config, stop)
    state, _ = wmse_run(
        ch, config, feasible_init(ch, config), POWER_CONTROL_PER_RELAY, stop=stop
    )
    solo = sum_rate(effective_channels(ch, state), config)
    assert rates[0] == pytest.approx(solo, abs=1e-12)


def test_af_tdma_divides_solo_rates_by_k():
    config = symmetric_config("(2x2,1)^2+2^2", p_tx=10.0, p_relay=10.0)
    ch = generate_channels(TrialStream(master_seed=29, trial=0), config)
    stop = StoppingRule(max_iter=40)
    rates = af_tdma(ch, config, stop)
    from relayalign.baselines import _subnetwork

    for k in range(config.K):
        sub_ch, sub_config = _subnetwork(ch, config, k)
        state, _ = wmse_run(
            sub_ch,
            sub_config,
            feasible_init(sub_ch, sub_config),
            POWER_CONTROL_PER_RELAY,
            stop=stop,
        )
        solo = sum_rate(effective_channels(sub_ch, state), sub_config)
        assert rates[k] == pytest.approx(solo / config.K, abs=1e-12)


def test_direct_channel_draws_are_stable_and_separate():
    config = symmetric_config("(2x3,1)^2+2^2")
    a = generate_direct_channels(TrialStream(master_seed=31, trial=0), config)
    b = generate_direct_channels(TrialStream(master_seed=31, trial=0), config)
    for k in range(config.K):
        for q in range(config.K):
            assert np.array_equal(a[k][q], b[k][q])
            assert a[k][q].shape == (config.n_rx[k], config.n_tx[q])
    # two-hop draws are untouched by the extra consumer
    ch1 = generate_channels(TrialStream(master_seed=31, trial=0), config)
    generate_direct_channels(TrialStream(master_seed=31, trial=0), config)
    ch2 = generate_channels(TrialStream(master_seed=31, trial=0), config)
    assert np.array_equal(ch1.h[0][0], ch2.h[0][0])
