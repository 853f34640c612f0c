"""Comparison strategies: single-hop designs, dedicated DF relaying, AF time sharing.

The single-hop designs (selfish beamforming, alternating leakage minimization,
weighted-MSE sum-rate maximization) run on a plain interference channel.  They
serve three roles: direct transmission without relays, the per-hop strategy of
a dedicated decode-and-forward relay chain, and reference points for the
two-hop designs.  The AF time-sharing baseline reuses the full two-hop
machinery on one pair at a time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelRealization
from .config import StoppingRule, SystemConfig
from .linalg import herm, smallest_eigvecs, unvec, vec
from .metrics import sum_rate
from .network import effective_channels, feasible_init
from .qcqp import QcqpConstraint, QcqpProblem, solve_qcqp_convex_inequality
from .sdp import INEQ
from .wmse import POWER_CONTROL_PER_RELAY, wmse_run


@dataclass
class SingleHopProblem:
    """One-hop interference channel: K pairs, no relays.

    ``channels[k][q]`` carries the signal of transmitter q to receiver k.
    """

    channels: list[list[np.ndarray]]  # channels[k][q]: n_rx[k] x n_tx[q]
    d: list[int]                      # data streams per pair
    p_tx_max: list[float]             # transmit power budget per pair
    sigma2: list[float]               # noise variance per receiver

    def __post_init__(self) -> None:
        k = len(self.channels)
        if k == 0:
            raise ValueError("need at least one pair")
        for name, seq in (("d", self.d), ("p_tx_max", self.p_tx_max), ("sigma2", self.sigma2)):
            if len(seq) != k:
                raise ValueError(f"{name} must have length {k}")
        n_rx = [self.channels[i][i].shape[0] for i in range(k)]
        n_tx = [self.channels[i][i].shape[1] for i in range(k)]
        for i in range(k):
            for q in range(k):
                if self.channels[i][q].shape != (n_rx[i], n_tx[q]):
                    raise ValueError(f"channels[{i}][{q}] has shape {self.channels[i][q].shape}")
        for i in range(k):
            if not 1 <= self.d[i] <= min(n_tx[i], n_rx[i]):
                raise ValueError(f"d[{i}]={self.d[i]} does not fit the antenna counts")
        if any(not (p > 0) for p in list(self.p_tx_max) + list(self.sigma2)):
            raise ValueError("powers and noise variances must be strictly positive")

    @property
    def K(self) -> int:
        return len(self.channels)

    def n_tx(self, k: int) -> int:
        return self.channels[k][k].shape[1]

    def n_rx(self, k: int) -> int:
        return self.channels[k][k].shape[0]


@dataclass
class SingleHopResult:
    """Outcome of a single-hop design."""

    precoders: list[np.ndarray]      # power-scaled transmit precoders
    rx_subspaces: list[np.ndarray]   # receive filters or subspaces, n_rx x d
    rates_bits: list[float]          # per-pair rates with analytic MMSE receivers
    trace: list[float] = field(default_factory=list)  # objective per iteration


def _mmse_pair_rate(prob: SingleHopProblem, precoders: list[np.ndarray], k: int) -> float:
    """Rate of pair k with an MMSE receiver, interference treated as noise."""
    n = prob.n_rx(k)
    cov = prob.sigma2[k] * np.eye(n, dtype=complex)
    for q in range(prob.K):
        if q == k:
            continue
        eff = prob.channels[k][q] @ precoders[q]
        cov += eff @ eff.conj().T
    sig = prob.channels[k][k] @ precoders[k]
    gram = herm(sig.conj().T @ np.linalg.solve(herm(cov), sig))
    sign, logdet = np.linalg.slogdet(np.eye(prob.d[k]) + gram)
    return float(logdet) / np.log(2.0)


def _mmse_rates(prob: SingleHopProblem, precoders: list[np.ndarray]) -> list[float]:
    return [_mmse_pair_rate(prob, precoders, k) for k in range(prob.K)]


def selfish_bf(prob: SingleHopProblem) -> SingleHopResult:
    """Each transmitter beamforms on its own channel, ignoring the others.

    The precoder takes the top right singular vectors of the direct channel
    with equal power per stream; receivers are left to the MMSE rate formula.
    """
    precoders = []
    for k in range(prob.K):
        _, _, vh = np.linalg.svd(prob.channels[k][k])
        basis = vh.conj().T[:, : prob.d[k]]
        precoders.append(np.sqrt(prob.p_tx_max[k] / prob.d[k]) * basis)
    subspaces = []
    for k in range(prob.K):
        u, _, _ = np.linalg.svd(prob.channels[k][k] @ precoders[k])
        subspaces.append(u[:, : prob.d[k]])
    return SingleHopResult(
        precoders=precoders,
        rx_subspaces=subspaces,
        rates_bits=_mmse_rates(prob, precoders),
    )


def _single_hop_leakage(
    prob: SingleHopProblem,
    bases: list[np.ndarray],
    subspaces: list[np.ndarray],
) -> float:
    """Interference power left in the receive subspaces, at full budgets."""
    total = 0.0
    for k in range(prob.K):
        for q in range(prob.K):
            if q == k:
                continue
            scale = prob.p_tx_max[q] / prob.d[q]
            eff = subspaces[k].conj().T @ prob.channels[k][q] @ bases[q]
            total += scale * float(np.linalg.norm(eff) ** 2)
    return total


def _orthonormal_bases(prob: SingleHopProblem, rng: np.random.Generator) -> list[np.ndarray]:
    bases = []
    for k in range(prob.K):
        raw = rng.standard_normal((prob.n_tx(k), prob.d[k])) + 1j * rng.standard_normal(
            (prob.n_tx(k), prob.d[k])
        )
        q, _ = np.linalg.qr(raw)
        bases.append(q[:, : prob.d[k]])
    return bases


def single_hop_leakage_ia(
    prob: SingleHopProblem,
    stop: StoppingRule | None = None,
    rng: np.random.Generator | None = None,
) -> SingleHopResult:
    """Alternating leakage minimization on a one-hop interference channel.

    Both blocks are exact minimizers of the same weighted leakage, so the
    trace never increases: the receive subspace of pair k takes the least
    dominant eigenvectors of the interference covariance it sees, and the
    transmit basis of pair q takes the least dominant eigenvectors of the
    covariance its interference creates across the other receivers.
    """
    stop = stop or StoppingRule()
    rng = rng or np.random.default_rng(0)
    bases = _orthonormal_bases(prob, rng)
    subspaces = [np.eye(prob.n_rx(k), dtype=complex)[:, : prob.d[k]] for k in range(prob.K)]
    trace: list[float] = []
    for _ in range(max(stop.max_iter, 1)):
        for k in range(prob.K):
            cov = np.zeros((prob.n_rx(k), prob.n_rx(k)), dtype=complex)
            for q in range(prob.K):
                if q == k:
                    continue
                eff = prob.channels[k][q] @ bases[q]
                cov += (prob.p_tx_max[q] / prob.d[q]) * (eff @ eff.conj().T)
            subspaces[k] = smallest_eigvecs(herm(cov), prob.d[k])
        for q in range(prob.K):
            cov = np.zeros((prob.n_tx(q), prob.n_tx(q)), dtype=complex)
            for k in range(prob.K):
                if k == q:
                    continue
                eff = subspaces[k].conj().T @ prob.channels[k][q]
                cov += eff.conj().T @ eff
            bases[q] = smallest_eigvecs(herm(cov), prob.d[q])
        trace.append(_single_hop_leakage(prob, bases, subspaces))
        if len(trace) >= 2 and trace[-2] - trace[-1] <= stop.tol * max(1.0, trace[-2]):
            break
    precoders = [
        np.sqrt(prob.p_tx_max[k] / prob.d[k]) * bases[k] for k in range(prob.K)
    ]
    return SingleHopResult(
        precoders=precoders,
        rx_subspaces=subspaces,
        rates_bits=_mmse_rates(prob, precoders),
        trace=trace,
    )


def _wmmse_weight(prob: SingleHopProblem, precoders: list[np.ndarray], k: int) -> np.ndarray:
    """Inverse MSE of pair k at the MMSE receiver, by the direct SNR form."""
    n = prob.n_rx(k)
    cov = prob.sigma2[k] * np.eye(n, dtype=complex)
    for q in range(prob.K):
        if q == k:
            continue
        eff = prob.channels[k][q] @ precoders[q]
        cov += eff @ eff.conj().T
    sig = prob.channels[k][k] @ precoders[k]
    return herm(
        np.eye(prob.d[k], dtype=complex)
        + sig.conj().T @ np.linalg.solve(herm(cov), sig)
    )


def single_hop_wmmse(
    prob: SingleHopProblem,
    stop: StoppingRule | None = None,
    rng: np.random.Generator | None = None,
) -> SingleHopResult:
    """Weighted-MSE sum-rate maximization on a one-hop interference channel.

    Alternates MMSE receivers, inverse-MSE weights, and per-transmitter
    convex precoder subproblems under inequality power budgets.
    """
    stop = stop or StoppingRule()
    rng = rng or np.random.default_rng(0)
    precoders = []
    for k in range(prob.K):
        raw = rng.standard_normal((prob.n_tx(k), prob.d[k])) + 1j * rng.standard_normal(
            (prob.n_tx(k), prob.d[k])
        )
        precoders.append(np.sqrt(prob.p_tx_max[k]) * raw / np.linalg.norm(raw))

    def receivers_and_weights() -> tuple[list[np.ndarray], list[np.ndarray]]:
        filters = []
        weights = []
        for k in range(prob.K):
            n = prob.n_rx(k)
            cov = prob.sigma2[k] * np.eye(n, dtype=complex)
            for q in range(prob.K):
                eff = prob.channels[k][q] @ precoders[q]
                cov += eff @ eff.conj().T
            sig = prob.channels[k][k] @ precoders[k]
            filters.append(np.linalg.solve(herm(cov), sig))
            weights.append(_wmmse_weight(prob, precoders, k))
        return filters, weights

    def objective(filters: list[np.ndarray], weights: list[np.ndarray]) -> float:
        total = 0.0
        for k in range(prob.K):
            d = prob.d[k]
            w = filters[k]
            e = np.eye(d, dtype=complex)
            cov = prob.sigma2[k] * np.eye(prob.n_rx(k), dtype=complex)
            sig = prob.channels[k][k] @ precoders[k]
            e = e - w.conj().T @ sig - sig.conj().T @ w
            for q in range(prob.K):
                eff = prob.channels[k][q] @ precoders[q]
                cov += eff @ eff.conj().T
            e = e + w.conj().T @ cov @ w
            total += float(np.real(np.trace(weights[k] @ e)))
            sign, logdet = np.linalg.slogdet(weights[k])
            total -= float(logdet) / np.log(2.0)
        return total

    filters, weights = receivers_and_weights()
    total = objective(filters, weights)
    trace = [total]
    for _ in range(stop.max_iter):
        for k in range(prob.K):
            n_tx = prob.n_tx(k)
            d = prob.d[k]
            quad = np.zeros((n_tx, n_tx), dtype=complex)
            for q in range(prob.K):
                eff = weights[q] @ filters[q].conj().T @ prob.channels[q][k]
                quad += prob.channels[q][k].conj().T @ filters[q] @ eff
            lin = -vec(prob.channels[k][k].conj().T @ filters[k] @ weights[k])
            problem = QcqpProblem(
                dim=n_tx * d,
                quad_cost=np.kron(np.eye(d), herm(quad)),
                lin_cost=lin,
                constraints=[
                    QcqpConstraint(
                        matrix=np.eye(n_tx * d, dtype=complex),
                        rhs=prob.p_tx_max[k],
                        kind=INEQ,
                    )
                ],
            )
            precoders[k] = unvec(solve_qcqp_convex_inequality(problem).x, n_tx, d)
        filters, weights = receivers_and_weights()
        new_total = objective(filters, weights)
        trace.append(new_total)
        if total - new_total <= stop.tol * max(1.0, abs(total)):
            total = new_total
            break
        total = new_total
    return SingleHopResult(
        precoders=precoders,
        rx_subspaces=filters,
        rates_bits=_mmse_rates(prob, precoders),
        trace=trace,
    )


SINGLE_HOP_STRATEGIES = {
    "sf": lambda prob, stop, rng: selfish_bf(prob),
    "tl": single_hop_leakage_ia,
    "sr": single_hop_wmmse,
}


def first_hop_problem(ch: ChannelRealization, config: SystemConfig) -> SingleHopProblem:
    """Transmitters to their dedicated relays, one relay per pair."""
    return SingleHopProblem(
        channels=[[ch.h[k][q] for q in range(config.K)] for k in range(config.K)],
        d=list(config.d),
        p_tx_max=list(config.p_tx_max),
        sigma2=list(config.sigma2_relay),
    )


def second_hop_problem(ch: ChannelRealization, config: SystemConfig) -> SingleHopProblem:
    """Dedicated relays to their receivers, relay power spent individually."""
    return SingleHopProblem(
        channels=[[ch.g[k][q] for q in range(config.K)] for k in range(config.K)],
        d=list(config.d),
        p_tx_max=list(config.p_relay_max),
        sigma2=list(config.sigma2_rx),
    )


def df_two_hop(
    ch: ChannelRealization,
    config: SystemConfig,
    hop_strategy: str = "tl",
    stop: StoppingRule | None = None,
    rng: np.random.Generator | None = None,
) -> list[float]:
    """End-to-end rates of a dedicated decode-and-forward relay chain.

    One relay serves one pair, so K must equal M.  The chosen single-hop
    strategy runs independently on each hop; with equal time sharing a pair
    achieves half of its weaker hop.
    """
    if config.K != config.M:
        raise ValueError(
            f"dedicated relaying needs one relay per pair, got K={config.K}, M={config.M}"
        )
    if hop_strategy not in SINGLE_HOP_STRATEGIES:
        raise ValueError(f"unknown hop strategy {hop_strategy!r}")
    strategy = SINGLE_HOP_STRATEGIES[hop_strategy]
    rng = rng or np.random.default_rng(0)
    hop1 = strategy(first_hop_problem(ch, config), stop, rng).rates_bits
    hop2 = strategy(second_hop_problem(ch, config), stop, rng).rates_bits
    return [0.5 * min(r1, r2) for r1, r2 in zip(hop1, hop2)]


def _subnetwork(
    ch: ChannelRealization, config: SystemConfig, k: int
) -> tuple[ChannelRealization, SystemConfig]:
    """Pair k alone with every relay, budgets carried over unchanged."""
    sub_config = SystemConfig(
        n_tx=[config.n_tx[k]],
        n_rx=[config.n_rx[k]],
        n_relay=list(config.n_relay),
        d=[config.d[k]],
        p_tx_max=[config.p_tx_max[k]],
        p_relay_max=list(config.p_relay_max),
        p_relay_sum_max=config.p_relay_sum_max,
        sigma2_relay=list(config.sigma2_relay),
        sigma2_rx=[config.sigma2_rx[k]],
    )
    sub_ch = ChannelRealization(
        h=[[ch.h[m][k]] for m in range(config.M)],
        g=[[ch.g[k][m] for m in range(config.M)]],
    )
    return sub_ch, sub_config


def af_tdma(
    ch: ChannelRealization,
    config: SystemConfig,
    stop: StoppingRule | None = None,
) -> list[float]:
    """Time-shared distributed beamforming: all relays serve one pair at a time.

    Each slot is a single-pair network solved by the weighted-MSE design with
    power control and individual relay budgets; time sharing divides every
    pair's solo rate by K.
    """
    rates = []
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
        rates.append(solo / config.K)
    return rates


def df_multiplexing_upper_bound(config: SystemConfig) -> float:
    """Cap on the end-to-end multiplexing gain of dedicated DF relaying.

    Each hop is a K-pair single-hop interference channel, so each hop's
    spatial dimensions bound the one-shot gain, and equal time sharing
    halves the smaller bound.
    """
    if config.K != config.M:
        raise ValueError(
            f"dedicated relaying needs one relay per pair, got K={config.K}, M={config.M}"
        )
    if not config.is_symmetric():
        raise ValueError("the bound is derived for symmetric configurations")
    k = config.K
    n_tx, n_rx, n_relay = config.n_tx[0], config.n_rx[0], config.n_relay[0]
    hop1 = (k * (n_relay + n_tx)) // (k + 1)
    hop2 = (k * (n_rx + n_relay)) // (k + 1)
    return 0.5 * min(hop1, hop2)
