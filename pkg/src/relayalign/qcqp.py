"""Complex QCQP solvers for the algorithms' subproblems.

Equality-constrained problems (nonconvex: the feasible set is an intersection
of quadric shells) are lifted to a semidefinite relaxation by appending a
homogenizing entry fixed to 1, solved with the interior-point core, then
driven to a rank-one matrix by eigenvalue modification and factored back into
a vector.  With up to three original constraints the lifted problem carries at
most four, so a rank-one optimum is guaranteed for one or two constraints and
usually reachable for three; whenever the certificates fail, a flagged
fallback (dominant eigenvector, feasibility projection, local polish) is
returned instead of an exception.

Inequality-constrained problems with PSD matrices are convex and solved
directly by a log-barrier Newton method on the real embedding.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import herm, is_hermitian
from .sdp import EQ, INEQ, SdpSolution, solve_sdp

RANK_ONE_TOL = 1e-6          # sigma2/sigma1 at or below this counts as rank one
CERT_TOL = 1e-6              # relative certificate tolerances from the contract


class QcqpInfeasibleError(ValueError):
    """The constraint set is empty or has no usable interior."""


@dataclass
class QcqpConstraint:
    matrix: np.ndarray
    rhs: float
    kind: str  # EQ or INEQ


@dataclass
class QcqpProblem:
    """min x*Qx + 2 Re(lin*x) subject to quadratic constraints on x in C^n."""

    dim: int
    quad_cost: np.ndarray
    lin_cost: np.ndarray
    constraints: list[QcqpConstraint] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.quad_cost = np.asarray(self.quad_cost, dtype=complex)
        self.lin_cost = np.asarray(self.lin_cost, dtype=complex).reshape(self.dim)
        if self.quad_cost.shape != (self.dim, self.dim):
            raise ValueError("quad_cost shape mismatch")
        if not is_hermitian(self.quad_cost):
            raise ValueError("quad_cost must be Hermitian")
        for c in self.constraints:
            c.matrix = np.asarray(c.matrix, dtype=complex)
            if c.matrix.shape != (self.dim, self.dim):
                raise ValueError("constraint shape mismatch")
            if not is_hermitian(c.matrix):
                raise ValueError("constraint matrices must be Hermitian")
            if c.kind not in (EQ, INEQ):
                raise ValueError(f"unknown constraint kind {c.kind!r}")

    def cost(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=complex).reshape(self.dim)
        return float(
            np.real(x.conj() @ self.quad_cost @ x) + 2.0 * np.real(self.lin_cost.conj() @ x)
        )

    def constraint_values(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=complex).reshape(self.dim)
        return np.array(
            [float(np.real(x.conj() @ c.matrix @ x)) for c in self.constraints]
        )

    def feasible(self, x: np.ndarray, tol: float = CERT_TOL) -> bool:
        vals = self.constraint_values(x)
        for c, v in zip(self.constraints, vals):
            slack = tol * (1.0 + abs(c.rhs))
            if c.kind == EQ and abs(v - c.rhs) > slack:
                return False
            if c.kind == INEQ and v > c.rhs + slack:
                return False
        return True


@dataclass
class EqualityResult:
    x: np.ndarray
    objective: float
    sdr_bound: float
    rank_ratio: float  # second-to-first eigenvalue ratio of the relaxation optimum
    fallback: bool
    feasible: bool
    status: str


@dataclass
class SolveStats:
    """Running tally of subproblem solves inside one alternating run."""

    solves: int = 0
    fallbacks: int = 0

    def record(self, fallback: bool) -> None:
        self.solves += 1
        self.fallbacks += int(fallback)


@dataclass
class ConvexResult:
    x: np.ndarray
    objective: float
    multipliers: np.ndarray
    iterations: int


def lift_problem(p: QcqpProblem) -> tuple[np.ndarray, list[tuple[np.ndarray, float, str]]]:
    """Homogenize: append an entry fixed to 1 and lift constraints with it.

    The lifted cost keeps a zero corner, so its value at a lifted point equals
    the original cost exactly and the relaxation optimum is a direct lower
    bound on the recovered point's cost.
    """
    n = p.dim
    cost = np.zeros((n + 1, n + 1), dtype=complex)
    cost[:n, :n] = p.quad_cost
    cost[:n, n] = p.lin_cost
    cost[n, :n] = p.lin_cost.conj()
    lifted = []
    for c in p.constraints:
        a = np.zeros((n + 1, n + 1), dtype=complex)
        a[:n, :n] = c.matrix
        lifted.append((a, c.rhs, EQ))
    corner = np.zeros((n + 1, n + 1), dtype=complex)
    corner[n, n] = 1.0
    lifted.append((corner, 1.0, EQ))
    return cost, lifted


def _null_space_directions(
    basis_mats: list[np.ndarray], r: int
) -> list[np.ndarray]:
    """Hermitian directions Delta with tr(B_i Delta) = 0 for all i."""
    n_params = r * r
    rows = np.zeros((len(basis_mats), n_params))
    for i, b in enumerate(basis_mats):
        row = np.zeros(n_params)
        pos = 0
        for j in range(r):
            row[pos] = float(np.real(b[j, j]))
            pos += 1
        for j in range(r):
            for k in range(j + 1, r):
                row[pos] = 2.0 * float(np.real(b[j, k]))
                row[pos + 1] = 2.0 * float(np.imag(b[j, k]))
                pos += 2
        rows[i] = row
    _, svals, vt = np.linalg.svd(rows)
    cutoff = 1e-10 * max(1.0, svals[0] if len(svals) else 1.0)
    null = [vt[i] for i in range(len(vt)) if i >= len(svals) or svals[i] <= cutoff]

    def unflatten(vec_params: np.ndarray) -> np.ndarray:
        delta = np.zeros((r, r), dtype=complex)
        pos = 0
        for j in range(r):
            delta[j, j] = vec_params[pos]
            pos += 1
        for j in range(r):
            for k in range(j + 1, r):
                delta[j, k] = vec_params[pos] + 1j * vec_params[pos + 1]
                delta[k, j] = vec_params[pos] - 1j * vec_params[pos + 1]
                pos += 2
        return delta

    return [unflatten(v) for v in null]


def rank_reduce(
    sol: SdpSolution | np.ndarray,
    constraints: list[tuple[np.ndarray, float, str]],
    max_stall: int = 50,
) -> tuple[np.ndarray, bool]:
    """Reduce an SDP optimum toward rank one along the optimal face.

    Moves Y -> V (I + t Delta) V* with Delta chosen in the null space of the
    constraints restricted to the range of Y and t pushing one eigenvalue of
    I + t Delta to zero; every constraint value is preserved exactly and the
    objective is preserved automatically at an optimum (the move is feasible
    in both directions, so the objective slope along it must vanish).
    Iterates while rank^2 exceeds the constraint count.
    """
    y = herm(sol.y if isinstance(sol, SdpSolution) else np.asarray(sol, dtype=complex))
    mats = [np.asarray(a, dtype=complex) for a, _, _ in constraints]
    m = len(mats)
    cost_free = True  # objective preservation is checked by the caller's certificate
    stalls = 0
    while True:
        vals, vecs = np.linalg.eigh(y)
        top = float(vals[-1]) if len(vals) else 0.0
        keep = vals > max(top, 0.0) * 1e-12
        if not np.any(keep):
            return y, False
        factor = vecs[:, keep] * np.sqrt(vals[keep])
        r = factor.shape[1]
        if r * r <= m or r <= 1:
            return herm(factor @ factor.conj().T), False
        if stalls >= max_stall:
            return herm(factor @ factor.conj().T), True
        basis = [herm(factor.conj().T @ a @ factor) for a in mats]
        directions = _null_space_directions(basis, r)
        progressed = False
        for delta in directions:
            norm = float(np.linalg.norm(delta))
            if norm <= 1e-12:
                continue
            delta = delta / norm
            dvals, dvecs = np.linalg.eigh(delta)
            idx = int(np.argmax(np.abs(dvals)))
            lam = float(dvals[idx])
            if abs(lam) <= 1e-12:
                continue
            t = -1.0 / lam
            scales = 1.0 + t * dvals
            scales = np.where(scales < 1e-12, 0.0, scales)
            new_factor = (factor @ dvecs) * np.sqrt(scales)
            new_factor = new_factor[:, scales > 0]
            if new_factor.shape[1] < r:
                y = herm(new_factor @ new_factor.conj().T)
                progressed = True
                break
        if not progressed:
            stalls += 1
            if stalls >= max_stall:
                vals, vecs = np.linalg.eigh(y)
                keep = vals > max(float(vals[-1]), 0.0) * 1e-12
                factor = vecs[:, keep] * np.sqrt(np.maximum(vals[keep], 0.0))
                return herm(factor @ factor.conj().T), True


def rank_one_decompose(y: np.ndarray, rank_tol: float = RANK_ONE_TOL) -> np.ndarray:
    """Factor a rank-one lifted matrix into its canonical vector.

    The principal eigenvector is scaled to the top eigenvalue, rotated so the
    homogenizing (last) entry is real positive, and returned with that entry
    stripped.
    """
    y = herm(np.asarray(y, dtype=complex))
    vals, vecs = np.linalg.eigh(y)
    if vals[-1] <= 0:
        raise ValueError("matrix has no positive eigenvalue")
    if len(vals) > 1 and vals[-2] > rank_tol * vals[-1]:
        raise ValueError(
            f"numerical rank exceeds one: ratio {vals[-2] / vals[-1]:.2e}"
        )
    v = np.sqrt(vals[-1]) * vecs[:, -1]
    last = v[-1]
    if abs(last) > 0:
        v = v * (last.conj() / abs(last))
    recon = np.outer(v, v.conj())
    if np.linalg.norm(recon - y) > 1e-6 * max(1.0, float(np.linalg.norm(y))):
        raise ValueError("rank-one reconstruction failed")
    return v[:-1]


def _project_to_equalities(p: QcqpProblem, x: np.ndarray, iters: int = 60) -> np.ndarray:
    """Gauss-Newton projection of x onto the equality constraint shells."""
    x = x.astype(complex).copy()
    targets = np.array([c.rhs for c in p.constraints])
    mats = [c.matrix for c in p.constraints]
    for _ in range(iters):
        vals = p.constraint_values(x)
        res = vals - targets
        if np.max(np.abs(res) / (1.0 + np.abs(targets))) < 1e-12:
            break
        grads = np.array([2.0 * (m @ x) for m in mats])  # Wirtinger gradients
        gram = np.real(grads.conj() @ grads.T) * 2.0
        # least-norm multipliers: dependent constraints make the Gram singular
        lam = np.linalg.lstsq(gram, res, rcond=1e-10)[0]
        x = x - (lam @ grads)
    return x


def _polish_on_manifold(p: QcqpProblem, x: np.ndarray, iters: int = 500) -> np.ndarray:
    """Projected-gradient descent of the cost along the equality manifold.

    The step regrows on every accepted move and halves on every rejected
    one, so the tail converges at the fastest stable rate instead of
    stalling on a monotonically shrinking step.
    """
    x = _project_to_equalities(p, x)
    best = x
    best_cost = p.cost(x)
    step0 = 0.5 / max(1.0, float(np.linalg.norm(p.quad_cost)))
    step = step0
    if not p.feasible(best, tol=1e-8):
        return best
    for _ in range(iters):
        grad = 2.0 * (p.quad_cost @ best + p.lin_cost)
        cand = _project_to_equalities(p, best - step * grad)
        cand_cost = p.cost(cand)
        if cand_cost < best_cost - 1e-15 and p.feasible(cand, tol=1e-8):
            best, best_cost = cand, cand_cost
            step = min(2.0 * step, step0)
        else:
            step *= 0.5
            if step < 1e-13 * step0:
                break
    return best


def _eigen_ratio(y: np.ndarray) -> float:
    vals = np.linalg.eigvalsh(herm(y))
    top = float(max(vals[-1], 0.0))
    if top <= 0.0:
        return 0.0
    second = float(max(vals[-2], 0.0)) if len(vals) > 1 else 0.0
    return second / top


def solve_qcqp_equality(p: QcqpProblem) -> EqualityResult:
    """Global solve of an equality-constrained complex QCQP via the SDR pipeline."""
    if not (1 <= len(p.constraints) <= 3):
        raise ValueError("equality solver supports 1 to 3 constraints")
    for c in p.constraints:
        if c.kind != EQ:
            raise ValueError("all constraints must be equalities")
        if c.rhs < 0:
            raise QcqpInfeasibleError(
                f"equality rhs {c.rhs} is negative but the form is PSD"
            )
    cost_lift, lifted = lift_problem(p)
    sol = solve_sdp(cost_lift, lifted)
    if sol.status == "infeasible":
        raise QcqpInfeasibleError("semidefinite relaxation reported infeasible")
    sdr_bound = sol.primal_objective
    x = None
    reduced, stalled = rank_reduce(sol, lifted)
    ratio = _eigen_ratio(reduced if not stalled else sol.y)
    if not stalled:
        try:
            x = rank_one_decompose(reduced)
        except ValueError:
            x = None
    cert_slack = CERT_TOL * (1.0 + abs(sdr_bound))
    if x is not None and p.feasible(x) and p.cost(x) <= sdr_bound + cert_slack:
        return EqualityResult(
            x=x,
            objective=p.cost(x),
            sdr_bound=sdr_bound,
            rank_ratio=ratio,
            fallback=False,
            feasible=True,
            status=sol.status,
        )
    # escape hatch: a rank-two relaxation optimum keeps its best rank-one
    # points inside the span of its top eigenvectors, so polish a small
    # deterministic family of span combinations and keep the best
    vals, vecs = np.linalg.eigh(herm(sol.y))
    v1 = np.sqrt(max(float(vals[-1]), 0.0)) * vecs[:, -1]
    starts = [v1]
    if len(vals) > 1 and vals[-2] > 1e-10 * max(vals[-1], 1e-30):
        v2 = np.sqrt(float(vals[-2])) * vecs[:, -2]
        for alpha in (np.pi / 8, np.pi / 4, 3 * np.pi / 8):
            for phase in (1.0, 1j, -1.0, -1j):
                starts.append(np.cos(alpha) * v1 + np.sin(alpha) * phase * v2)
    best_x = None
    best_cost = np.inf
    for w in starts:
        x0 = w[:-1] / w[-1] if abs(w[-1]) > 1e-8 else w[:-1]
        cand = _polish_on_manifold(p, x0)
        if p.feasible(cand) and p.cost(cand) < best_cost:
            best_x = cand
            best_cost = p.cost(cand)
    if best_x is None:
        best_x = _polish_on_manifold(p, v1[:-1] / v1[-1] if abs(v1[-1]) > 1e-8 else v1[:-1])
    return EqualityResult(
        x=best_x,
        objective=p.cost(best_x),
        sdr_bound=sdr_bound,
        rank_ratio=ratio,
        fallback=True,
        feasible=p.feasible(best_x),
        status=sol.status,
    )


def _real_embed_matrix(a: np.ndarray) -> np.ndarray:
    re, im = np.real(a), np.imag(a)
    return np.block([[re, -im], [im, re]])


def solve_qcqp_convex_inequality(
    p: QcqpProblem, gap_tol: float = 1e-11
) -> ConvexResult:
    """KKT-accurate solve of the convex inequality QCQP by a log barrier.

    Multipliers come out of the barrier as 1/(t*slack); driving the barrier
    gap below `gap_tol` relative bounds both the stationarity residual and
    complementary slackness at the returned point.
    """
    if not p.constraints:
        raise ValueError("need at least one constraint")
    for c in p.constraints:
        if c.kind != INEQ:
            raise ValueError("all constraints must be inequalities")
        if c.rhs < 0:
            raise QcqpInfeasibleError("negative rhs with a PSD form is infeasible")
    n = p.dim
    q_r = _real_embed_matrix(p.quad_cost)
    lin_r = np.concatenate([np.real(p.lin_cost), np.imag(p.lin_cost)])
    mats_r = [_real_embed_matrix(c.matrix) for c in p.constraints]
    rhs = np.array([c.rhs for c in p.constraints])

    def to_complex(z: np.ndarray) -> np.ndarray:
        return z[:n] + 1j * z[n:]

    def cost_r(z: np.ndarray) -> float:
        return float(z @ q_r @ z + 2.0 * lin_r @ z)

    # a stationary point of the unconstrained cost that happens to be
    # feasible ends the story with zero multipliers
    z_u, *_ = np.linalg.lstsq(q_r, -lin_r, rcond=None)
    grad_u = q_r @ z_u + lin_r
    if float(np.linalg.norm(grad_u)) <= 1e-9 * (1.0 + float(np.linalg.norm(lin_r))):
        vals = np.array([z_u @ m @ z_u for m in mats_r])
        if np.all(vals <= rhs * (1.0 + 1e-12) + 1e-12):
            return ConvexResult(
                x=to_complex(z_u),
                objective=cost_r(z_u),
                multipliers=np.zeros(len(rhs)),
                iterations=0,
            )

    if np.any(rhs <= 0.0):
        raise QcqpInfeasibleError("a zero rhs leaves no interior to start from")
    z = np.zeros(2 * n)
    n_con = len(rhs)
    t = 1.0
    total_newton = 0
    for _outer in range(80):
        for _inner in range(60):
            slacks = rhs - np.array([z @ m @ z for m in mats_r])
            grad = t * (2.0 * q_r @ z + 2.0 * lin_r)
            hess = t * 2.0 * q_r
            for m, s in zip(mats_r, slacks):
                mz = m @ z
                grad = grad + 2.0 * mz / s
                hess = hess + 2.0 * m / s + np.outer(4.0 * mz, mz) / (s * s)
            try:
                step = np.linalg.solve(hess + 1e-13 * np.eye(2 * n), -grad)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(hess, -grad, rcond=None)[0]
            decrement = float(-grad @ step)
            total_newton += 1
            if decrement <= 1e-12 * (1.0 + t):
                break
            alpha = 1.0
            phi0 = t * cost_r(z) - float(np.sum(np.log(slacks)))
            for _ in range(50):
                cand = z + alpha * step
                new_slacks = rhs - np.array([cand @ m @ cand for m in mats_r])
                if np.all(new_slacks > 0):
                    phi1 = t * cost_r(cand) - float(np.sum(np.log(new_slacks)))
                    if phi1 <= phi0 - 0.25 * alpha * decrement:
                        z = cand
                        break
                alpha *= 0.5
            else:
                break
        f_now = abs(cost_r(z))
        if n_con / t <= gap_tol * (1.0 + f_now):
            break
        t *= 20.0
    slacks = rhs - np.array([z @ m @ z for m in mats_r])
    # the on-path estimate 1/(t*slack) drifts when centering stops early, so
    # fit multipliers to the stationarity condition directly, with slack
    # weights pinning inactive constraints to zero
    grad0 = 2.0 * q_r @ z + 2.0 * lin_r
    jac = np.column_stack([2.0 * (m @ z) for m in mats_r])
    weights = np.diag(np.maximum(slacks, 0.0))
    system = np.vstack([jac, weights])
    target = np.concatenate([-grad0, np.zeros(n_con)])
    multipliers, *_ = np.linalg.lstsq(system, target, rcond=None)
    multipliers = np.maximum(multipliers, 0.0)
    return ConvexResult(
        x=to_complex(z),
        objective=cost_r(z),
        multipliers=multipliers,
        iterations=total_newton,
    )
