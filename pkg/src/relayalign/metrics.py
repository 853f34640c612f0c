"""Rates, MSE matrices, leakage powers, and the weighted-MSE objective.

Everything is computed analytically from covariances; no symbol-level noise is
ever drawn.  Rates are always evaluated with the analytic MMSE receiver, no
matter which receive filter the current algorithm state carries.
"""

from __future__ import annotations

import numpy as np

from .config import SystemConfig
from .linalg import herm
from .network import EffectiveChannels, NetworkState

_LN2 = float(np.log(2.0))


def _logdet2(a: np.ndarray) -> float:
    """log2 det of a Hermitian positive definite matrix."""
    sign, logdet = np.linalg.slogdet(herm(a))
    if sign.real <= 0:
        raise np.linalg.LinAlgError("matrix is not positive definite")
    return float(logdet) / _LN2


def interference_noise_cov(
    eff: EffectiveChannels, config: SystemConfig, k: int
) -> np.ndarray:
    """Covariance of everything receiver k sees except its own signal.

    Cross-pair interference, relay noise forwarded through the second hop, and
    the receiver's own noise floor; the noise floor keeps it positive definite.
    """
    n = config.n_rx[k]
    r = config.sigma2_rx[k] * np.eye(n, dtype=complex)
    for q in range(config.K):
        if q != k:
            tkq = eff.t[k][q]
            r = r + tkq @ tkq.conj().T
    for m in range(config.M):
        gkm = eff.gu[k][m]
        r = r + config.sigma2_relay[m] * (gkm @ gkm.conj().T)
    return herm(r)


def mmse_receiver(eff: EffectiveChannels, config: SystemConfig, k: int) -> np.ndarray:
    """Linear MMSE receive filter for pair k."""
    t = eff.t[k][k]
    r = interference_noise_cov(eff, config, k)
    return np.linalg.solve(herm(t @ t.conj().T + r), t)


def pair_rate(eff: EffectiveChannels, config: SystemConfig, k: int) -> float:
    """Achievable rate of pair k in bits per channel use (one hop use)."""
    t = eff.t[k][k]
    r = interference_noise_cov(eff, config, k)
    d = config.d[k]
    return _logdet2(np.eye(d, dtype=complex) + t.conj().T @ np.linalg.solve(r, t))


def sum_rate(eff: EffectiveChannels, config: SystemConfig) -> float:
    return sum(pair_rate(eff, config, k) for k in range(config.K))


def mse_matrix(
    eff: EffectiveChannels, st: NetworkState, config: SystemConfig, k: int
) -> np.ndarray:
    """Symbol-error covariance at receiver k for the state's own filter W_k."""
    t = eff.t[k][k]
    r = interference_noise_cov(eff, config, k)
    w = st.w[k]
    d = config.d[k]
    wt = w.conj().T @ t
    e = (
        w.conj().T @ (t @ t.conj().T + r) @ w
        - wt
        - wt.conj().T
        + np.eye(d, dtype=complex)
    )
    return herm(e)


def leakage_power(
    eff: EffectiveChannels, st: NetworkState, config: SystemConfig
) -> tuple[float, float]:
    """(interference, relay_noise) power left after the receive filters."""
    interference = 0.0
    relay_noise = 0.0
    for k in range(config.K):
        w = st.w[k]
        for q in range(config.K):
            if q != k:
                interference += float(np.sum(np.abs(w.conj().T @ eff.t[k][q]) ** 2))
        for m in range(config.M):
            relay_noise += config.sigma2_relay[m] * float(
                np.sum(np.abs(w.conj().T @ eff.gu[k][m]) ** 2)
            )
    return interference, relay_noise


def total_leakage(eff: EffectiveChannels, st: NetworkState, config: SystemConfig) -> float:
    interference, relay_noise = leakage_power(eff, st, config)
    return interference + relay_noise


def wmse_sum(eff: EffectiveChannels, st: NetworkState, config: SystemConfig) -> float:
    """Matrix-weighted sum of MSEs: sum_k tr(V_k E_k) - log2 det V_k."""
    total = 0.0
    for k in range(config.K):
        v = st.v[k]
        mineig = float(np.linalg.eigvalsh(herm(v))[0])
        if mineig < -1e-8 * max(1.0, float(np.linalg.norm(v))):
            raise ValueError(f"weight v[{k}] is not positive semidefinite")
        e = mse_matrix(eff, st, config, k)
        total += float(np.real(np.trace(v @ e))) - _logdet2(v)
    return total
