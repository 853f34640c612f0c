"""Alternating minimization of total leakage power.

Leakage is the interference-plus-forwarded-relay-noise power left after the
receive filters.  Receivers are constrained to orthonormal columns and come
from a smallest-eigenvector solve; relay matrices and precoders are updated by
equality-constrained QCQP solves under exact power budgets.  Every update
holds the other variables fixed and solves its block to global optimality, so
the objective is non-increasing along the run.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .channel import ChannelRealization
from .config import StoppingRule, SystemConfig
from .linalg import smallest_eigvecs, unvec, vec
from .metrics import leakage_power
from .network import (
    EffectiveChannels,
    NetworkState,
    effective_channels,
    feasible_init,
    relay_sum_power,
)
from .qcqp import QcqpConstraint, QcqpProblem, SolveStats, solve_qcqp_equality
from .sdp import EQ

logger = logging.getLogger(__name__)

# targets a schedule entry may name
RELAY = "relay"
TRANSMITTER = "transmitter"
RECEIVERS = "receivers"


@dataclass
class TlIterationTrace:
    """One recorded iteration of a total-leakage run."""

    iteration: int            # 0 is the receiver-only feasibility step
    interference_power: float
    relay_noise_power: float
    total: float              # interference_power + relay_noise_power
    updated: str              # "relay:m", "transmitter:k", or "receivers"


def default_schedule(config: SystemConfig) -> list[tuple[str, int]]:
    """Round-robin cycle: every relay, then every transmitter."""
    return [(RELAY, m) for m in range(config.M)] + [
        (TRANSMITTER, k) for k in range(config.K)
    ]


def tl_update_receivers(
    eff: EffectiveChannels, st: NetworkState, config: SystemConfig
) -> list[np.ndarray]:
    """Replace every receive filter by the leakage-minimizing orthonormal one.

    The per-pair objective is tr(W* Z W) over W with orthonormal columns, so
    the optimum is the eigenvectors of the smallest eigenvalues of Z.
    """
    for k in range(config.K):
        n = config.n_rx[k]
        z = np.zeros((n, n), dtype=complex)
        for q in range(config.K):
            if q != k:
                tkq = eff.t[k][q]
                z += tkq @ tkq.conj().T
        for m in range(config.M):
            gkm = eff.gu[k][m]
            z += config.sigma2_relay[m] * (gkm @ gkm.conj().T)
        st.w[k] = smallest_eigvecs(z, config.d[k])
    return st.w


def relay_budget_residual(
    eff: EffectiveChannels, st: NetworkState, config: SystemConfig, m: int
) -> float:
    """Sum relay budget minus the power every relay but m currently uses."""
    residual = config.p_relay_sum_max
    for n in range(config.M):
        if n == m:
            continue
        used = config.sigma2_relay[n] * float(np.sum(np.abs(st.u[n]) ** 2))
        for k in range(config.K):
            used += float(np.sum(np.abs(st.u[n] @ eff.hf[n][k]) ** 2))
        residual -= used
    return residual


def precoder_budget_residual(
    eff: EffectiveChannels, st: NetworkState, config: SystemConfig, k: int
) -> float:
    """Sum relay budget minus the relay power not attributable to pair k."""
    residual = config.p_relay_sum_max
    for m in range(config.M):
        residual -= config.sigma2_relay[m] * float(np.sum(np.abs(st.u[m]) ** 2))
        for q in range(config.K):
            if q != k:
                residual -= float(np.sum(np.abs(eff.uh[m][q] @ st.f[q]) ** 2))
    return residual


def tl_build_relay_subproblem(
    eff: EffectiveChannels, st: NetworkState, config: SystemConfig, m: int
) -> QcqpProblem:
    """Quadratic form of the relay-m leakage in x = vec(U_m).

    Raises ValueError when the power budget left for relay m is not positive.
    """
    eta = relay_budget_residual(eff, st, config, m)
    if eta <= 0:
        raise ValueError(f"no relay power budget left for relay {m}: {eta:.3e}")
    n = config.n_relay[m]
    s2 = config.sigma2_relay[m]
    hf_gram_all = np.zeros((n, n), dtype=complex)
    for q in range(config.K):
        hf_gram_all += eff.hf[m][q] @ eff.hf[m][q].conj().T

    quad = np.zeros((n * n, n * n), dtype=complex)
    for k in range(config.K):
        hfk = eff.hf[m][k]
        left = hf_gram_all - hfk @ hfk.conj().T + s2 * np.eye(n)
        wgk = eff.wg[k][m]
        quad += np.kron(left.T, wgk.conj().T @ wgk)

    cross = np.zeros((n, n), dtype=complex)
    for k in range(config.K):
        for q in range(config.K):
            if q == k:
                continue
            for nn in range(config.M):
                if nn == m:
                    continue
                cross += (
                    eff.wg[k][m].conj().T
                    @ eff.wg[k][nn]
                    @ st.u[nn]
                    @ eff.hf[nn][q]
                    @ eff.hf[m][q].conj().T
                )

    con = np.kron((hf_gram_all + s2 * np.eye(n)).T, np.eye(n, dtype=complex))
    return QcqpProblem(
        dim=n * n,
        quad_cost=quad,
        lin_cost=vec(cross),
        constraints=[QcqpConstraint(con, eta, EQ)],
    )


def tl_build_precoder_subproblem(
    eff: EffectiveChannels, st: NetworkState, config: SystemConfig, k: int
) -> QcqpProblem:
    """Quadratic form of the interference pair k causes, in x = vec(F_k).

    Constraints pin the transmit power and pair k's share of the relay-sum
    budget.  Raises ValueError when that share is not positive.
    """
    eta = precoder_budget_residual(eff, st, config, k)
    if eta <= 0:
        raise ValueError(f"no relay power budget left for pair {k}: {eta:.3e}")
    n, d = config.n_tx[k], config.d[k]
    # second-hop composite from transmitter k to the filtered output of pair q
    comp = [
        sum(eff.wg[q][m] @ eff.uh[m][k] for m in range(config.M))
        for q in range(config.K)
    ]
    inner = np.zeros((n, n), dtype=complex)
    for q in range(config.K):
        if q != k:
            inner += comp[q].conj().T @ comp[q]
    relay_gram = np.zeros((n, n), dtype=complex)
    for m in range(config.M):
        relay_gram += eff.uh[m][k].conj().T @ eff.uh[m][k]
    eye_d = np.eye(d, dtype=complex)
    return QcqpProblem(
        dim=n * d,
        quad_cost=np.kron(eye_d, inner),
        lin_cost=np.zeros(n * d, dtype=complex),
        constraints=[
            QcqpConstraint(np.eye(n * d, dtype=complex), config.p_tx_max[k], EQ),
            QcqpConstraint(np.kron(eye_d, relay_gram), eta, EQ),
        ],
    )


def tl_update_relay(
    eff: EffectiveChannels,
    st: NetworkState,
    config: SystemConfig,
    m: int,
    stats: SolveStats | None = None,
) -> np.ndarray:
    """Globally optimal U_m with everything else fixed.  Does not mutate st."""
    problem = tl_build_relay_subproblem(eff, st, config, m)
    result = solve_qcqp_equality(problem)
    if stats is not None:
        stats.record(result.fallback)
    n = config.n_relay[m]
    return unvec(result.x, n, n)


def tl_update_precoder(
    eff: EffectiveChannels,
    st: NetworkState,
    config: SystemConfig,
    k: int,
    stats: SolveStats | None = None,
) -> np.ndarray:
    """Globally optimal F_k with everything else fixed.  Does not mutate st."""
    problem = tl_build_precoder_subproblem(eff, st, config, k)
    result = solve_qcqp_equality(problem)
    if stats is not None:
        stats.record(result.fallback)
    return unvec(result.x, config.n_tx[k], config.d[k])


def _rescale_relay_sum(
    ch: ChannelRealization, st: NetworkState, config: SystemConfig
) -> None:
    """Uniformly scale the relay matrices back onto the sum power budget."""
    used = relay_sum_power(ch, st, config)
    if used > 0:
        gamma = np.sqrt(config.p_relay_sum_max / used)
        for m in range(config.M):
            st.u[m] = st.u[m] * gamma


def tl_run(
    ch: ChannelRealization,
    config: SystemConfig,
    init: NetworkState,
    schedule: Sequence[tuple[str, int]] | None = None,
    stop: StoppingRule | None = None,
    stats: SolveStats | None = None,
) -> tuple[NetworkState, list[TlIterationTrace]]:
    """Alternating total-leakage minimization from a feasible starting point.

    One relay or transmitter is updated per iteration, receivers are refreshed
    after every update, and each candidate step is kept only if it does not
    increase the objective.  Iteration 0 of the trace is the initial
    receiver-only step that also restores receiver orthonormality.
    """
    if stop is None:
        stop = StoppingRule()
    if schedule is None:
        schedule = default_schedule(config)
    st = init.copy()
    st.check_dims(config)
    trace: list[TlIterationTrace] = []
    if stop.max_iter == 0:
        return st, trace

    eff = effective_channels(ch, st)
    tl_update_receivers(eff, st, config)
    eff = effective_channels(ch, st)
    interference, relay_noise = leakage_power(eff, st, config)
    total = interference + relay_noise
    trace.append(TlIterationTrace(0, interference, relay_noise, total, RECEIVERS))

    sweep = len(schedule)
    totals = [total]
    for it in range(1, stop.max_iter + 1):
        target, index = schedule[(it - 1) % sweep]
        candidate = st.copy()
        if target == RELAY:
            residual = relay_budget_residual(eff, st, config, index)
        elif target == TRANSMITTER:
            residual = precoder_budget_residual(eff, st, config, index)
        else:
            raise ValueError(f"unknown schedule target {target!r}")
        if residual <= 0:
            # can only happen through numerical drift; restore the budget and
            # skip this update rather than building an infeasible subproblem
            logger.warning(
                "iteration %d: %s %d has budget residual %.3e; rescaling relays",
                it,
                target,
                index,
                residual,
            )
            _rescale_relay_sum(ch, candidate, config)
        elif target == RELAY:
            candidate.u[index] = tl_update_relay(eff, st, config, index, stats)
        else:
            candidate.f[index] = tl_update_precoder(eff, st, config, index, stats)

        eff_c = effective_channels(ch, candidate)
        tl_update_receivers(eff_c, candidate, config)
        eff_c = effective_channels(ch, candidate)
        interference_c, relay_noise_c = leakage_power(eff_c, candidate, config)
        if interference_c + relay_noise_c <= total:
            st, eff = candidate, eff_c
            interference, relay_noise = interference_c, relay_noise_c
            total = interference + relay_noise
        trace.append(
            TlIterationTrace(it, interference, relay_noise, total, f"{target}:{index}")
        )
        totals.append(total)
        if len(totals) > sweep:
            prev = totals[-1 - sweep]
            if prev - total <= stop.tol * max(1.0, prev):
                break
    return st, trace


class TotalLeakageMinimizer(BaseEstimator):
    """Estimator wrapper around :func:`tl_run`.

    Parameters mirror the functional interface; fitted attributes carry the
    final state, the per-iteration trace, and the reached objective.
    """

    def __init__(
        self,
        config: SystemConfig,
        schedule: Sequence[tuple[str, int]] | None = None,
        stop: StoppingRule | None = None,
    ):
        self.config = config
        self.schedule = schedule
        self.stop = stop

    def fit(self, ch: ChannelRealization, init: NetworkState | None = None):
        if init is None:
            init = feasible_init(ch, self.config)
        state, trace = tl_run(ch, self.config, init, self.schedule, self.stop)
        self.state_ = state
        self.trace_ = trace
        self.n_iter_ = len(trace)
        self.objective_ = trace[-1].total if trace else None
        return self
