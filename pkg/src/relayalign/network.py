"""Network state, effective channels, power accounting, and initial points.

Naming of the effective (equivalent) channels, for state F, U, W:

==========  =================  ==============================
attribute   formula            shape
==========  =================  ==============================
hf[m][k]    H_{m,k} F_k        n_relay[m] x d[k]
gu[k][m]    G_{k,m} U_m        n_rx[k] x n_relay[m]
uh[m][k]    U_m H_{m,k}        n_relay[m] x n_tx[k]
wg[k][m]    W_k^* G_{k,m}      d[k] x n_relay[m]
t[k][q]     sum_m gu.hf        n_rx[k] x d[q]
==========  =================  ==============================

``t[k][q]`` is the end-to-end channel from transmitter q to receiver k.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization, TrialStream, complex_gaussian, DOMAIN_INIT
from .config import SystemConfig


@dataclass
class NetworkState:
    """Decision variables: precoders, relay matrices, receivers, MSE weights."""

    f: list[np.ndarray]  # n_tx[k] x d[k]
    u: list[np.ndarray]  # n_relay[m] x n_relay[m]
    w: list[np.ndarray]  # n_rx[k] x d[k]
    v: list[np.ndarray]  # d[k] x d[k], Hermitian PSD; identity unless an MSE run set it

    def copy(self) -> "NetworkState":
        return NetworkState(
            f=[x.copy() for x in self.f],
            u=[x.copy() for x in self.u],
            w=[x.copy() for x in self.w],
            v=[x.copy() for x in self.v],
        )

    def check_dims(self, config: SystemConfig) -> None:
        if (
            len(self.f) != config.K
            or len(self.w) != config.K
            or len(self.v) != config.K
            or len(self.u) != config.M
        ):
            raise ValueError("state lists do not match config")
        for k in range(config.K):
            if self.f[k].shape != (config.n_tx[k], config.d[k]):
                raise ValueError(f"f[{k}] has shape {self.f[k].shape}")
            if self.w[k].shape != (config.n_rx[k], config.d[k]):
                raise ValueError(f"w[{k}] has shape {self.w[k].shape}")
            if self.v[k].shape != (config.d[k], config.d[k]):
                raise ValueError(f"v[{k}] has shape {self.v[k].shape}")
            if np.linalg.norm(self.v[k] - self.v[k].conj().T) > 1e-10 * max(
                1.0, float(np.linalg.norm(self.v[k]))
            ):
                raise ValueError(f"v[{k}] is not Hermitian")
        for m in range(config.M):
            if self.u[m].shape != (config.n_relay[m], config.n_relay[m]):
                raise ValueError(f"u[{m}] has shape {self.u[m].shape}")


@dataclass
class EffectiveChannels:
    hf: list[list[np.ndarray]]
    gu: list[list[np.ndarray]]
    uh: list[list[np.ndarray]]
    wg: list[list[np.ndarray]]
    t: list[list[np.ndarray]]


def effective_channels(ch: ChannelRealization, st: NetworkState) -> EffectiveChannels:
    """Compute all five equivalent-channel families for the current state."""
    big_m = len(st.u)
    big_k = len(st.f)
    hf = [[ch.h[m][k] @ st.f[k] for k in range(big_k)] for m in range(big_m)]
    gu = [[ch.g[k][m] @ st.u[m] for m in range(big_m)] for k in range(big_k)]
    uh = [[st.u[m] @ ch.h[m][k] for k in range(big_k)] for m in range(big_m)]
    wg = [[st.w[k].conj().T @ ch.g[k][m] for m in range(big_m)] for k in range(big_k)]
    t = [
        [
            sum(gu[k][m] @ hf[m][q] for m in range(big_m))
            for q in range(big_k)
        ]
        for k in range(big_k)
    ]
    return EffectiveChannels(hf=hf, gu=gu, uh=uh, wg=wg, t=t)


def transmitter_power(st: NetworkState, k: int) -> float:
    """tr(F_k^* F_k)."""
    return float(np.sum(np.abs(st.f[k]) ** 2))


def relay_power(ch: ChannelRealization, st: NetworkState, config: SystemConfig, m: int) -> float:
    """Transmit power relay m actually uses: forwarded signal plus own noise."""
    u = st.u[m]
    total = config.sigma2_relay[m] * float(np.sum(np.abs(u) ** 2))
    for k in range(config.K):
        total += float(np.sum(np.abs(u @ ch.h[m][k] @ st.f[k]) ** 2))
    return total


def relay_sum_power(ch: ChannelRealization, st: NetworkState, config: SystemConfig) -> float:
    return sum(relay_power(ch, st, config, m) for m in range(config.M))


def _eye_embedding(rows: int, cols: int) -> np.ndarray:
    out = np.zeros((rows, cols), dtype=complex)
    for j in range(cols):
        out[j, j] = 1.0
    return out


def feasible_init(ch: ChannelRealization, config: SystemConfig) -> NetworkState:
    """Closed-form feasible starting point with all equality budgets met.

    Precoders and receivers are scaled identity embeddings; relay matrices are
    a common multiple of the identity, with the multiplier chosen so the relay
    sum power lands exactly on its budget.
    """
    f = [
        np.sqrt(config.p_tx_max[k] / config.d[k])
        * _eye_embedding(config.n_tx[k], config.d[k])
        for k in range(config.K)
    ]
    w = [
        np.sqrt(1.0 / config.d[k]) * _eye_embedding(config.n_rx[k], config.d[k])
        for k in range(config.K)
    ]
    # per-relay received power under these precoders, for U_m = I
    denom = 0.0
    for m in range(config.M):
        term = config.n_relay[m] * config.sigma2_relay[m]
        for k in range(config.K):
            block = ch.h[m][k][:, : config.d[k]]
            term += (config.p_tx_max[k] / config.d[k]) * float(
                np.sum(np.abs(block) ** 2)
            )
        denom += term
    alpha = 1.0 / denom
    u = [
        np.sqrt(alpha * config.p_relay_sum_max) * np.eye(config.n_relay[m], dtype=complex)
        for m in range(config.M)
    ]
    v = [np.eye(config.d[k], dtype=complex) for k in range(config.K)]
    return NetworkState(f=f, u=u, w=w, v=v)


def random_init(
    ch: ChannelRealization,
    stream: TrialStream,
    config: SystemConfig,
    init_index: int = 0,
) -> NetworkState:
    """Random Gaussian precoders and relay matrices scaled onto the budgets.

    Transmit powers hit p_tx_max exactly; relay powers are split across relays
    proportionally to their individual budgets, so the sum budget is met
    exactly whenever it does not exceed the sum of the individual ones, and no
    individual budget is exceeded.  Receivers start from the scaled identity
    embedding and are refreshed by every algorithm before use.
    """
    f = []
    for k in range(config.K):
        raw = complex_gaussian(
            stream.matrix_rng(DOMAIN_INIT, init_index, k), config.n_tx[k], config.d[k]
        )
        norm2 = float(np.sum(np.abs(raw) ** 2))
        f.append(raw * np.sqrt(config.p_tx_max[k] / norm2))
    w = [
        np.sqrt(1.0 / config.d[k]) * _eye_embedding(config.n_rx[k], config.d[k])
        for k in range(config.K)
    ]
    v = [np.eye(config.d[k], dtype=complex) for k in range(config.K)]
    share = min(1.0, config.p_relay_sum_max / sum(config.p_relay_max))
    state = NetworkState(f=f, u=[], w=w, v=v)
    for m in range(config.M):
        raw = complex_gaussian(
            stream.matrix_rng(DOMAIN_INIT, init_index, config.K + m),
            config.n_relay[m],
            config.n_relay[m],
        )
        state.u.append(raw)
        target = config.p_relay_max[m] * share
        current = relay_power(ch, state, config, m)
        state.u[m] = raw * np.sqrt(target / current)
    return state
