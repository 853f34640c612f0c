"""Alternating minimization of the matrix-weighted sum MSE.

The objective is sum_k tr(V_k E_k) - log2 det V_k.  Each sweep refreshes the
MMSE receivers and the matrix weights, then updates one relay matrix or one
precoder through a QCQP solve.  Power budgets are equalities in the
no-power-control variant and inequalities in the power-control variants; the
relay budget is either a single sum constraint or one constraint per relay.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .channel import ChannelRealization
from .config import StoppingRule, SystemConfig
from .linalg import herm, unvec, vec
from .metrics import interference_noise_cov, mmse_receiver, sum_rate, wmse_sum
from .network import (
    EffectiveChannels,
    NetworkState,
    effective_channels,
    feasible_init,
)
from .qcqp import (
    QcqpConstraint,
    QcqpProblem,
    SolveStats,
    solve_qcqp_convex_inequality,
    solve_qcqp_equality,
)
from .sdp import EQ, INEQ
from .total_leakage import (
    RECEIVERS,
    RELAY,
    TRANSMITTER,
    _rescale_relay_sum,
    default_schedule,
    precoder_budget_residual,
    relay_budget_residual,
)

logger = logging.getLogger(__name__)

EQUALITY = "equality"
INEQUALITY = "inequality"
SUM = "sum"
PER_RELAY = "per-relay"


@dataclass(frozen=True)
class WmseVariant:
    """Which power-constraint family a weighted-MSE run enforces."""

    power_mode: str = EQUALITY     # "equality" or "inequality"
    relay_constraint: str = SUM    # "sum" or "per-relay"

    def __post_init__(self) -> None:
        if self.power_mode not in (EQUALITY, INEQUALITY):
            raise ValueError(f"unknown power mode {self.power_mode!r}")
        if self.relay_constraint not in (SUM, PER_RELAY):
            raise ValueError(f"unknown relay constraint {self.relay_constraint!r}")

    @property
    def kind(self) -> str:
        return EQ if self.power_mode == EQUALITY else INEQ

    def check_supported(self, config: SystemConfig) -> None:
        # the per-relay equality precoder step needs M+1 equality constraints,
        # which exceeds the exactness limit of the lifted solve for M >= 3
        if self.power_mode == EQUALITY and self.relay_constraint == PER_RELAY:
            if config.M >= 3:
                raise ValueError(
                    "per-relay equality constraints are unsupported for M >= 3"
                )


NO_POWER_CONTROL = WmseVariant(EQUALITY, SUM)        # Algorithm 2
POWER_CONTROL = WmseVariant(INEQUALITY, SUM)         # Algorithm 3
POWER_CONTROL_PER_RELAY = WmseVariant(INEQUALITY, PER_RELAY)


@dataclass
class WmseIterationTrace:
    """One recorded iteration of a weighted-MSE run."""

    iteration: int       # 0 is the initial receiver-and-weight refresh
    wmse_total: float
    sum_rate_bits: float  # one-hop sum rate at the analytic MMSE receivers
    updated: str


def wmse_update_receivers(
    eff: EffectiveChannels, st: NetworkState, config: SystemConfig
) -> list[np.ndarray]:
    """Set every receive filter to the linear MMSE solution."""
    for k in range(config.K):
        st.w[k] = mmse_receiver(eff, config, k)
    return st.w


def wmse_update_weights(
    eff: EffectiveChannels, st: NetworkState, config: SystemConfig
) -> list[np.ndarray]:
    """Set every weight to the inverse MSE matrix of the MMSE receiver.

    Computed as I + T* R^{-1} T, which equals that inverse without forming the
    MSE matrix first.  With these weights the written objective still
    descends: the steps since the previous weight update can only have
    decreased phi = sum tr(V E), so with M = E_prev^{-1/2} E E_prev^{-1/2} the
    weight step changes the objective by sum(d - tr M + log2 det M), and
    ln det M <= tr(M) - d turns that into a nonpositive multiple of
    sum(d - tr M).
    """
    for k in range(config.K):
        t = eff.t[k][k]
        r = interference_noise_cov(eff, config, k)
        d = config.d[k]
        st.v[k] = herm(np.eye(d, dtype=complex) + t.conj().T @ np.linalg.solve(r, t))
    return st.v


def wmse_build_relay_subproblem(
    eff: EffectiveChannels,
    st: NetworkState,
    config: SystemConfig,
    m: int,
    variant: WmseVariant,
) -> QcqpProblem:
    """Quadratic form of the weighted MSE in x = vec(U_m), with the power
    constraint family selected by the variant."""
    if variant.relay_constraint == PER_RELAY:
        rhs = config.p_relay_max[m]
    else:
        rhs = relay_budget_residual(eff, st, config, m)
        if variant.power_mode == EQUALITY and rhs <= 0:
            raise ValueError(f"no relay power budget left for relay {m}: {rhs:.3e}")
    n = config.n_relay[m]
    s2 = config.sigma2_relay[m]
    hf_gram_all = np.zeros((n, n), dtype=complex)
    for q in range(config.K):
        hf_gram_all += eff.hf[m][q] @ eff.hf[m][q].conj().T
    left = hf_gram_all + s2 * np.eye(n)

    quad = np.zeros((n * n, n * n), dtype=complex)
    for k in range(config.K):
        wgk = eff.wg[k][m]
        quad += np.kron(left.T, wgk.conj().T @ st.v[k] @ wgk)

    lin = np.zeros((n, n), dtype=complex)
    for k in range(config.K):
        wv = eff.wg[k][m].conj().T @ st.v[k]
        lin -= wv @ eff.hf[m][k].conj().T
        for nn in range(config.M):
            if nn == m:
                continue
            carried = eff.wg[k][nn] @ st.u[nn]
            for q in range(config.K):
                lin += wv @ carried @ eff.hf[nn][q] @ eff.hf[m][q].conj().T

    con = np.kron(left.T, np.eye(n, dtype=complex))
    return QcqpProblem(
        dim=n * n,
        quad_cost=herm(quad),
        lin_cost=vec(lin),
        constraints=[QcqpConstraint(con, rhs, variant.kind)],
    )


def wmse_build_precoder_subproblem(
    eff: EffectiveChannels,
    st: NetworkState,
    config: SystemConfig,
    k: int,
    variant: WmseVariant,
) -> QcqpProblem:
    """Quadratic form of the weighted MSE in x = vec(F_k)."""
    variant.check_supported(config)
    n, d = config.n_tx[k], config.d[k]
    comp = [
        sum(eff.wg[q][m] @ eff.uh[m][k] for m in range(config.M))
        for q in range(config.K)
    ]
    d1 = np.zeros((n, n), dtype=complex)
    for q in range(config.K):
        d1 += comp[q].conj().T @ st.v[q] @ comp[q]
    d2 = comp[k].conj().T @ st.v[k]
    eye_d = np.eye(d, dtype=complex)

    constraints = [
        QcqpConstraint(np.eye(n * d, dtype=complex), config.p_tx_max[k], variant.kind)
    ]
    if variant.relay_constraint == SUM:
        eta = precoder_budget_residual(eff, st, config, k)
        if variant.power_mode == EQUALITY and eta <= 0:
            raise ValueError(f"no relay power budget left for pair {k}: {eta:.3e}")
        d3 = np.zeros((n, n), dtype=complex)
        for m in range(config.M):
            d3 += eff.uh[m][k].conj().T @ eff.uh[m][k]
        constraints.append(QcqpConstraint(np.kron(eye_d, d3), eta, variant.kind))
    else:
        for m in range(config.M):
            eta_m = config.p_relay_max[m] - config.sigma2_relay[m] * float(
                np.sum(np.abs(st.u[m]) ** 2)
            )
            for q in range(config.K):
                if q != k:
                    eta_m -= float(np.sum(np.abs(eff.uh[m][q] @ st.f[q]) ** 2))
            if variant.power_mode == EQUALITY and eta_m <= 0:
                raise ValueError(
                    f"no power budget left at relay {m} for pair {k}: {eta_m:.3e}"
                )
            gram = eff.uh[m][k].conj().T @ eff.uh[m][k]
            constraints.append(
                QcqpConstraint(np.kron(eye_d, gram), eta_m, variant.kind)
            )
    return QcqpProblem(
        dim=n * d,
        quad_cost=np.kron(eye_d, herm(d1)),
        lin_cost=-vec(d2),
        constraints=constraints,
    )


def _solve(
    problem: QcqpProblem, variant: WmseVariant, stats: SolveStats | None = None
) -> np.ndarray:
    if variant.power_mode == EQUALITY:
        result = solve_qcqp_equality(problem)
        if stats is not None:
            stats.record(result.fallback)
        return result.x
    result = solve_qcqp_convex_inequality(problem)
    if stats is not None:
        stats.record(False)
    return result.x


def wmse_update_relay(
    eff: EffectiveChannels,
    st: NetworkState,
    config: SystemConfig,
    m: int,
    variant: WmseVariant,
    stats: SolveStats | None = None,
) -> np.ndarray:
    """Globally optimal U_m for the variant's constraints.  Does not mutate st."""
    problem = wmse_build_relay_subproblem(eff, st, config, m, variant)
    n = config.n_relay[m]
    return unvec(_solve(problem, variant, stats), n, n)


def wmse_update_precoder(
    eff: EffectiveChannels,
    st: NetworkState,
    config: SystemConfig,
    k: int,
    variant: WmseVariant,
    stats: SolveStats | None = None,
) -> np.ndarray:
    """Globally optimal F_k for the variant's constraints.  Does not mutate st."""
    problem = wmse_build_precoder_subproblem(eff, st, config, k, variant)
    return unvec(_solve(problem, variant, stats), config.n_tx[k], config.d[k])


def _refresh(
    ch: ChannelRealization, st: NetworkState, config: SystemConfig
) -> EffectiveChannels:
    """MMSE receivers, then matching weights; returns the updated channels."""
    eff = effective_channels(ch, st)
    wmse_update_receivers(eff, st, config)
    eff = effective_channels(ch, st)
    wmse_update_weights(eff, st, config)
    return eff


def wmse_run(
    ch: ChannelRealization,
    config: SystemConfig,
    init: NetworkState,
    variant: WmseVariant = NO_POWER_CONTROL,
    schedule: Sequence[tuple[str, int]] | None = None,
    stop: StoppingRule | None = None,
    stats: SolveStats | None = None,
) -> tuple[NetworkState, list[WmseIterationTrace]]:
    """Alternating weighted-MSE minimization from a feasible starting point.

    Every iteration refreshes receivers and weights and then updates one relay
    or transmitter, kept only if the objective does not increase.  A final
    refresh leaves the returned state with MMSE receivers and inverse-MSE
    weights, so its sum rate equals sum_k log2 det V_k.
    """
    variant.check_supported(config)
    if stop is None:
        stop = StoppingRule()
    if schedule is None:
        schedule = default_schedule(config)
    st = init.copy()
    st.check_dims(config)
    trace: list[WmseIterationTrace] = []
    if stop.max_iter == 0:
        return st, trace

    eff = _refresh(ch, st, config)
    total = wmse_sum(eff, st, config)
    trace.append(WmseIterationTrace(0, total, sum_rate(eff, config), RECEIVERS))

    sweep = len(schedule)
    totals = [total]
    for it in range(1, stop.max_iter + 1):
        target, index = schedule[(it - 1) % sweep]
        candidate = st.copy()
        skipped = False
        if variant.power_mode == EQUALITY and variant.relay_constraint == SUM:
            if target == RELAY:
                residual = relay_budget_residual(eff, st, config, index)
            else:
                residual = precoder_budget_residual(eff, st, config, index)
            if residual <= 0:
                logger.warning(
                    "iteration %d: %s %d has budget residual %.3e; rescaling relays",
                    it,
                    target,
                    index,
                    residual,
                )
                _rescale_relay_sum(ch, candidate, config)
                skipped = True
        if not skipped:
            if target == RELAY:
                candidate.u[index] = wmse_update_relay(
                    eff, st, config, index, variant, stats
                )
            elif target == TRANSMITTER:
                candidate.f[index] = wmse_update_precoder(
                    eff, st, config, index, variant, stats
                )
            else:
                raise ValueError(f"unknown schedule target {target!r}")

        eff_c = _refresh(ch, candidate, config)
        value = wmse_sum(eff_c, candidate, config)
        if value <= total:
            st, eff, total = candidate, eff_c, value
        trace.append(
            WmseIterationTrace(it, total, sum_rate(eff, config), f"{target}:{index}")
        )
        totals.append(total)
        if len(totals) > sweep:
            prev = totals[-1 - sweep]
            if prev - total <= stop.tol * max(1.0, abs(prev)):
                break

    eff = _refresh(ch, st, config)
    trace.append(
        WmseIterationTrace(
            trace[-1].iteration + 1,
            wmse_sum(eff, st, config),
            sum_rate(eff, config),
            RECEIVERS,
        )
    )
    return st, trace


class WeightedMseMinimizer(BaseEstimator):
    """Estimator wrapper around :func:`wmse_run`."""

    def __init__(
        self,
        config: SystemConfig,
        variant: WmseVariant = NO_POWER_CONTROL,
        schedule: Sequence[tuple[str, int]] | None = None,
        stop: StoppingRule | None = None,
    ):
        self.config = config
        self.variant = variant
        self.schedule = schedule
        self.stop = stop

    def fit(self, ch: ChannelRealization, init: NetworkState | None = None):
        if init is None:
            init = feasible_init(ch, self.config)
        state, trace = wmse_run(
            ch, self.config, init, self.variant, self.schedule, self.stop
        )
        self.state_ = state
        self.trace_ = trace
        self.n_iter_ = len(trace)
        self.objective_ = trace[-1].wmse_total if trace else None
        self.sum_rate_ = trace[-1].sum_rate_bits if trace else None
        return self
