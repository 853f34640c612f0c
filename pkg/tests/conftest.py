"""Shared helpers for the test suite."""

from __future__ import annotations

import numpy as np

from relayalign.channel import ChannelRealization, TrialStream, generate_channels
from relayalign.config import SystemConfig, symmetric_config
from relayalign.network import NetworkState


def cgauss(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    re = rng.standard_normal((rows, cols))
    im = rng.standard_normal((rows, cols))
    return (re + 1j * im) / np.sqrt(2.0)


def random_config(rng: np.random.Generator, k_max: int = 3, m_max: int = 3) -> SystemConfig:
    big_k = int(rng.integers(1, k_max + 1))
    big_m = int(rng.integers(1, m_max + 1))
    n_tx = [int(rng.integers(1, 4)) for _ in range(big_k)]
    n_rx = [int(rng.integers(1, 4)) for _ in range(big_k)]
    d = [int(rng.integers(1, min(n_tx[k], n_rx[k]) + 1)) for k in range(big_k)]
    n_relay = [int(rng.integers(1, 4)) for _ in range(big_m)]
    p_relay = [float(10.0 ** rng.uniform(-1, 1)) for _ in range(big_m)]
    return SystemConfig(
        n_tx=n_tx,
        n_rx=n_rx,
        n_relay=n_relay,
        d=d,
        p_tx_max=[float(10.0 ** rng.uniform(-1, 1)) for _ in range(big_k)],
        p_relay_max=p_relay,
        p_relay_sum_max=float(sum(p_relay)),
        sigma2_relay=[float(10.0 ** rng.uniform(-1, 0.5)) for _ in range(big_m)],
        sigma2_rx=[float(10.0 ** rng.uniform(-1, 0.5)) for _ in range(big_k)],
    )


def random_channels(rng: np.random.Generator, config: SystemConfig) -> ChannelRealization:
    h = [
        [cgauss(rng, config.n_relay[m], config.n_tx[k]) for k in range(config.K)]
        for m in range(config.M)
    ]
    g = [
        [cgauss(rng, config.n_rx[k], config.n_relay[m]) for m in range(config.M)]
        for k in range(config.K)
    ]
    return ChannelRealization(h=h, g=g)


def random_state(rng: np.random.Generator, config: SystemConfig) -> NetworkState:
    f = [cgauss(rng, config.n_tx[k], config.d[k]) for k in range(config.K)]
    u = [cgauss(rng, config.n_relay[m], config.n_relay[m]) for m in range(config.M)]
    w = [cgauss(rng, config.n_rx[k], config.d[k]) for k in range(config.K)]
    v = []
    for k in range(config.K):
        a = cgauss(rng, config.d[k], config.d[k])
        v.append(a @ a.conj().T + 0.1 * np.eye(config.d[k]))
    return NetworkState(f=f, u=u, w=w, v=v)


def scalar_chain() -> tuple[SystemConfig, ChannelRealization, NetworkState]:
    """All-ones single pair, single relay, scalar network (every entry 1)."""
    config = symmetric_config("(1x1,1)^1+1^1", p_tx=1.0, p_relay=2.0, p_relay_sum=2.0)
    one = np.ones((1, 1), dtype=complex)
    ch = ChannelRealization(h=[[one.copy()]], g=[[one.copy()]])
    st = NetworkState(f=[one.copy()], u=[one.copy()], w=[one.copy()], v=[one.copy()])
    return config, ch, st


def stream(trial: int = 0, seed: int = 12345) -> TrialStream:
    return TrialStream(master_seed=seed, trial=trial)


def channels_for(config: SystemConfig, trial: int = 0, seed: int = 12345) -> ChannelRealization:
    return generate_channels(stream(trial, seed), config)
