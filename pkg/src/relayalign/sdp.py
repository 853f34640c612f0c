"""Dense Hermitian semidefinite programming by a primal-dual interior-point method.

Solves  min <C, Y>  s.t.  <A_i, Y> = b_i (or <= b_i),  Y >= 0  over complex
Hermitian matrices, with <A, B> = Re tr(A B).  The problems here are tiny
(n below ~20, a handful of constraints), so everything is dense and the
per-iteration cost is irrelevant; what matters is robustness across power
scales and bit-reproducibility.

Inequalities are folded in as nonnegative slack variables occupying extra
diagonal entries of one enlarged Hermitian block; every quantity the iteration
produces stays exactly block-diagonal, so the embedding is invisible outside.

The search direction is the Nesterov-Todd one: with the scaling point W
satisfying W S W = Y, the corrector system is

    sum_j Re tr(A_i W A_j W) dy_j = rp_i - <A_i, sigma*mu*inv(S) - Y - W Rd W>
    dS = Rd - sum_j dy_j A_j
    dY = sigma*mu*inv(S) - Y - W dS W

with an adaptive centering parameter sigma = (mu_aff / mu)^3 from a
predictor pass, and a 0.98 fraction-to-boundary step rule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import herm, is_hermitian

EQ = "eq"
INEQ = "ineq"


@dataclass
class SdpSolution:
    y: np.ndarray                 # primal Hermitian PSD matrix
    primal_objective: float
    duals: np.ndarray             # one real multiplier per constraint
    iterations: int
    status: str                   # optimal | infeasible | max-iterations


def _inner(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.real(np.sum(a.conj() * b)))


def _psd_sqrt_and_inv_sqrt(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    vals, vecs = np.linalg.eigh(herm(a))
    vals = np.maximum(vals, 1e-300)
    root = np.sqrt(vals)
    return (vecs * root) @ vecs.conj().T, (vecs / root) @ vecs.conj().T


def _nt_scaling(y: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Scaling point W with W S W = Y (both arguments Hermitian PD)."""
    s_half, s_inv_half = _psd_sqrt_and_inv_sqrt(s)
    middle, _ = _psd_sqrt_and_inv_sqrt(herm(s_half @ y @ s_half))
    return herm(s_inv_half @ middle @ s_inv_half)


def _max_step(x: np.ndarray, dx: np.ndarray, tau: float) -> float:
    """Largest alpha <= 1 keeping x + alpha*dx positive definite, with margin."""
    try:
        chol = np.linalg.cholesky(herm(x))
    except np.linalg.LinAlgError:
        return 0.0
    inv_chol = np.linalg.inv(chol)
    mapped = herm(inv_chol @ dx @ inv_chol.conj().T)
    lam = float(np.linalg.eigvalsh(mapped)[0])
    if lam >= 0:
        return 1.0
    return min(1.0, -tau / lam)


def solve_sdp(
    cost: np.ndarray,
    constraints: list[tuple[np.ndarray, float, str]],
    tol: float = 1e-10,
    max_iter: int = 100,
) -> SdpSolution:
    """Solve the Hermitian SDP; see the module docstring for the formulation.

    `constraints` entries are (matrix, rhs, kind) with kind "eq" or "ineq"
    (meaning <=).  At least one constraint must bound the trace over the PSD
    cone or the problem is unbounded.
    """
    cost = np.asarray(cost, dtype=complex)
    n = cost.shape[0]
    if cost.shape != (n, n) or not is_hermitian(cost):
        raise ValueError("cost must be Hermitian")
    if not constraints:
        raise ValueError("need at least one constraint")
    mats, rhs, kinds = [], [], []
    for a, b, kind in constraints:
        a = np.asarray(a, dtype=complex)
        if a.shape != (n, n) or not is_hermitian(a):
            raise ValueError("constraint matrices must be Hermitian and match cost")
        if kind not in (EQ, INEQ):
            raise ValueError(f"unknown constraint kind {kind!r}")
        mats.append(a)
        rhs.append(float(b))
        kinds.append(kind)

    # linearly dependent equality rows make the Newton system singular and
    # stall the iteration, so drop consistent duplicates up front (their
    # duals are reported as zero) and catch outright contradictions here;
    # inequality rows each get a private slack later and stay independent
    n_input = len(mats)
    dropped = []
    kept_eq_flats: list[np.ndarray] = []
    kept_eq_idx: list[int] = []
    for i in range(n_input):
        if kinds[i] != EQ:
            continue
        flat = np.concatenate([np.real(mats[i]).ravel(), np.imag(mats[i]).ravel()])
        if kept_eq_flats:
            basis = np.stack(kept_eq_flats)
            coeff = np.linalg.lstsq(basis.T, flat, rcond=None)[0]
            resid = flat - coeff @ basis
            if float(np.linalg.norm(resid)) <= 1e-10 * max(
                1.0, float(np.linalg.norm(flat))
            ):
                combo_rhs = float(coeff @ np.array([rhs[j] for j in kept_eq_idx]))
                if abs(rhs[i] - combo_rhs) > 1e-8 * (1.0 + abs(rhs[i]) + abs(combo_rhs)):
                    return SdpSolution(
                        y=np.zeros((n, n), dtype=complex),
                        primal_objective=float("nan"),
                        duals=np.zeros(n_input),
                        iterations=0,
                        status="infeasible",
                    )
                dropped.append(i)
                continue
        kept_eq_flats.append(flat)
        kept_eq_idx.append(i)
    if dropped:
        keep_mask = [i not in dropped for i in range(n_input)]
        kept_positions = [i for i in range(n_input) if keep_mask[i]]
        mats = [mats[i] for i in kept_positions]
        rhs = [rhs[i] for i in kept_positions]
        kinds = [kinds[i] for i in kept_positions]
    else:
        kept_positions = list(range(n_input))

    p = len(mats)
    ineq_slots = [i for i in range(p) if kinds[i] == INEQ]
    q = len(ineq_slots)
    ntot = n + q

    # row scaling, objective scaling, and a common primal scale keep the
    # iteration well conditioned from 0 dB to 60 dB power budgets
    row_scale = np.array([max(1.0, float(np.linalg.norm(m))) for m in mats])
    obj_scale = max(1.0, float(np.linalg.norm(cost)))
    b_scaled = np.array(rhs) / row_scale
    y_scale = max(1.0, float(np.max(np.abs(b_scaled))))
    b_scaled = b_scaled / y_scale

    a_emb = []
    for i in range(p):
        a = np.zeros((ntot, ntot), dtype=complex)
        a[:n, :n] = mats[i] / row_scale[i]
        if kinds[i] == INEQ:
            a[n + ineq_slots.index(i), n + ineq_slots.index(i)] = 1.0 / row_scale[i]
        a_emb.append(a)
    c_emb = np.zeros((ntot, ntot), dtype=complex)
    c_emb[:n, :n] = cost / obj_scale

    big_y = np.eye(ntot, dtype=complex) * (1.0 + float(np.max(np.abs(b_scaled))))
    big_s = np.eye(ntot, dtype=complex) * (1.0 + float(np.linalg.norm(c_emb)))
    y_dual = np.zeros(p)

    norm_b = 1.0 + float(np.linalg.norm(b_scaled))
    norm_c = 1.0 + float(np.linalg.norm(c_emb))

    def residuals():
        rp = b_scaled - np.array([_inner(a, big_y) for a in a_emb])
        rd = c_emb - big_s - sum(y_dual[i] * a_emb[i] for i in range(p))
        obj = _inner(c_emb, big_y)
        pinf = float(np.linalg.norm(rp)) / norm_b
        dinf = float(np.linalg.norm(rd)) / norm_c
        relgap = abs(_inner(big_y, big_s)) / (1.0 + abs(obj))
        return rp, rd, pinf, dinf, relgap

    iterations = 0
    best_score = np.inf
    best = (big_y.copy(), big_s.copy(), y_dual.copy())
    since_best = 0
    # late iterations can overflow when the iterate degenerates; the loop
    # detects that and falls back to the best iterate, so silence the noise
    def repair_pd(x: np.ndarray) -> np.ndarray:
        # rounding can push the smallest eigenvalue a hair below zero, which
        # would freeze the step-length computation at 0 for good
        lam_min = float(np.linalg.eigvalsh(x)[0])
        floor = 1e-14 * max(float(np.real(np.trace(x))) / ntot, 1e-30)
        if lam_min < floor:
            return x + (floor - lam_min) * np.eye(ntot)
        return x

    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for iterations in range(1, max_iter + 1):
            if not (
                np.all(np.isfinite(big_y))
                and np.all(np.isfinite(big_s))
                and np.all(np.isfinite(y_dual))
            ):
                break
            try:
                big_y = repair_pd(big_y)
                big_s = repair_pd(big_s)
            except np.linalg.LinAlgError:
                break
            rp, rd, pinf, dinf, relgap = residuals()
            score = max(pinf, dinf, relgap)
            if score < best_score:
                best_score = score
                best = (big_y.copy(), big_s.copy(), y_dual.copy())
                since_best = 0
            else:
                since_best += 1
                if since_best >= 10:
                    break
            mu = _inner(big_y, big_s) / ntot
            if pinf <= tol and dinf <= tol and relgap <= tol:
                break

            try:
                w = _nt_scaling(big_y, big_s)
                wa = [w @ a @ w for a in a_emb]
                schur = np.empty((p, p))
                for i in range(p):
                    for j in range(i, p):
                        schur[i, j] = schur[j, i] = _inner(a_emb[i], wa[j])
                s_inv = herm(np.linalg.inv(big_s))
                w_rd_w = herm(w @ rd @ w)

                def direction(sigma_mu: float):
                    base = sigma_mu * s_inv - big_y - w_rd_w
                    rhs_vec = rp - np.array([_inner(a, base) for a in a_emb])
                    try:
                        dy = np.linalg.solve(schur + 1e-14 * np.eye(p), rhs_vec)
                    except np.linalg.LinAlgError:
                        dy = np.linalg.lstsq(schur, rhs_vec, rcond=None)[0]
                    ds = rd - sum(dy[i] * a_emb[i] for i in range(p))
                    dyy = sigma_mu * s_inv - big_y - herm(w @ ds @ w)
                    return herm(dyy), herm(ds), dy

                # predictor: pure Newton step toward the boundary fixes the centering
                dy_aff, ds_aff, _ = direction(0.0)
                ap = _max_step(big_y, dy_aff, 1.0)
                ad = _max_step(big_s, ds_aff, 1.0)
                mu_aff = _inner(big_y + ap * dy_aff, big_s + ad * ds_aff) / ntot
                sigma = float(np.clip((max(mu_aff, 0.0) / mu) ** 3, 1e-10, 1.0))
                infeasible_phase = max(pinf, dinf) > 100.0 * tol
                if infeasible_phase:
                    # complementarity must not outrun feasibility or the
                    # iterate wedges against the cone boundary while the
                    # constraints are still violated
                    sigma = max(sigma, 0.2)

                dyy, ds, dy = direction(sigma * mu)
                ap = _max_step(big_y, dyy, 0.98)
                ad = _max_step(big_s, ds, 0.98)
                if min(ap, ad) < 0.01 and sigma < 0.5:
                    sigma = 0.5
                    dyy, ds, dy = direction(sigma * mu)
                    ap = _max_step(big_y, dyy, 0.98)
                    ad = _max_step(big_s, ds, 0.98)
            except np.linalg.LinAlgError:
                break
            if infeasible_phase:
                # equal steps keep both cones moving together until feasible
                ap = ad = min(ap, ad)
            if ap <= 1e-14 and ad <= 1e-14:
                break
            big_y = herm(big_y + ap * dyy)
            big_s = herm(big_s + ad * ds)
            y_dual = y_dual + ad * dy

    if not (
        np.all(np.isfinite(big_y))
        and np.all(np.isfinite(big_s))
        and np.all(np.isfinite(y_dual))
    ):
        big_y, big_s, y_dual = best
    _, _, pinf, dinf, relgap = residuals()
    if max(pinf, dinf, relgap) > best_score:
        big_y, big_s, y_dual = best
        _, _, pinf, dinf, relgap = residuals()
    if pinf <= 1e-7 and dinf <= 1e-7 and relgap <= 1e-7:
        status = "optimal"
    elif pinf > 1e-5:
        # a stalled or exhausted run with a persistently violated primal
        # system is reported as infeasible rather than raised
        status = "infeasible"
    else:
        status = "max-iterations"

    y_main = herm(big_y[:n, :n]) * y_scale
    duals = np.zeros(n_input)
    duals[kept_positions] = y_dual * obj_scale / row_scale
    objective = _inner(cost, y_main)
    return SdpSolution(
        y=y_main,
        primal_objective=objective,
        duals=duals,
        iterations=iterations,
        status=status,
    )
