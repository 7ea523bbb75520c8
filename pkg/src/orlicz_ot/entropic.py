"""Entropy-regularized optimal transport with log-domain Sinkhorn scaling.

The regularized problem is

    min_P  <P, C> - H(P) / lam     over couplings P of (r, c),

with H(P) = -sum P log P in nats. Larger ``lam`` means less smoothing. The
minimizer has the Gibbs form P_ij = exp(f_i + g_j - lam * C_ij) and the
scalings f, g are stored as logs, so costs with lam * C in the thousands
(or +inf, meaning "forbidden") are handled without underflow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .measures import CostMatrix, TransportPlan, make_plan, marginal_violation, shannon_entropy


@dataclass(frozen=True)
class SinkhornConfig:
    lam: float
    max_iters: int = 100_000
    tol: float = 1e-9
    # switch to Newton steps on the dual after this many plain sweeps; None disables
    newton_after: int | None = 50

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"regularization lam must be positive, got {self.lam}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass(frozen=True)
class SinkhornResult:
    plan: TransportPlan
    objective: float
    transport_cost: float
    entropy: float
    converged: bool
    iterations: int
    violation: float
    # certified bracket on the optimal value: the dual value at the final
    # potentials, and the primal value of the plan rounded onto the marginals
    lower_bound: float = -np.inf
    upper_bound: float = np.inf


class SinkhornConvergenceError(RuntimeError):
    def __init__(self, message: str, result: SinkhornResult | None = None):
        super().__init__(message)
        self.result = result


def _lse(x: np.ndarray, axis: int) -> np.ndarray:
    m = x.max(axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.exp(x - m).sum(axis=axis, keepdims=True)) + m
    return np.squeeze(out, axis=axis)


def _as_array(cost) -> np.ndarray:
    if isinstance(cost, CostMatrix):
        cost = cost.entries
    return np.asarray(cost, dtype=float)


def sinkhorn(cost, r, c, cfg: SinkhornConfig) -> SinkhornResult:
    """Solve the regularized problem; ``converged`` is False if the marginal
    violation is still above ``cfg.tol`` after ``cfg.max_iters`` sweeps."""
    C = _as_array(cost)
    r = np.asarray(r, dtype=float)
    c = np.asarray(c, dtype=float)
    if C.shape != (r.shape[0], c.shape[0]):
        raise ValueError(f"cost shape {C.shape} does not match marginals ({r.shape[0]}, {c.shape[0]})")
    if np.isnan(C).any():
        raise ValueError("cost matrix contains NaN")
    if np.any(C < 0):
        raise ValueError("cost matrix must be nonnegative")

    rows = r > 0
    cols = c > 0
    Cs = C[np.ix_(rows, cols)]
    rs, cs = r[rows], c[cols]
    log_r, log_c = np.log(rs), np.log(cs)
    log_k = -cfg.lam * Cs

    f = np.zeros(rs.shape[0])
    g = np.zeros(cs.shape[0])
    it = 0
    # anneal lam upward, warm-starting the potentials, when the kernel is very peaked
    finite = Cs[np.isfinite(Cs)]
    spread = float(finite.max() - finite.min()) if finite.size else 0.0
    lam_stage = cfg.lam
    stages = []
    while lam_stage * spread > _ANNEAL_SPREAD:
        lam_stage /= _ANNEAL_FACTOR
        stages.append(lam_stage)
    for lam_stage in reversed(stages):
        log_k = -lam_stage * Cs
        f, g, _, _, used = _scale(log_k, f, g, rs, cs, 1e-3 * min(rs.min(), cs.min()),
                                  cfg.max_iters - it, cfg.newton_after)
        it += used
        # rescale potentials to the next stage's lam; the additive gauge
        # (f + t, g - t) would grow by the same factor each stage, so
        # balance it to keep f_i + g_j - lam C_ij free of cancellation
        f, g = f * _ANNEAL_FACTOR, g * _ANNEAL_FACTOR
        shift = 0.5 * (f.mean() - g.mean())
        f, g = f - shift, g + shift
    log_k = -cfg.lam * Cs
    f, g, violation, converged, used = _scale(log_k, f, g, rs, cs, cfg.tol,
                                              max(cfg.max_iters - it, 1), cfg.newton_after)
    it += used

    log_p = f[:, None] + g[None, :] + log_k
    P = np.exp(log_p)
    support = P > 0
    transport = float(np.sum(P[support] * Cs[support]))
    entropy = float(-np.sum(P[support] * log_p[support]))

    full = np.zeros_like(C)
    full[np.ix_(rows, cols)] = P
    plan = make_plan(full, r, c)
    if not np.isfinite(violation):
        violation = marginal_violation(plan)
    # weak duality: <f, r> + <g, c> - sum P + 1, over lam, never exceeds the optimum
    lower = float((f @ rs + g @ cs - P.sum() + 1.0) / cfg.lam)
    return SinkhornResult(
        plan=plan,
        objective=transport - entropy / cfg.lam,
        transport_cost=transport,
        entropy=entropy,
        converged=converged,
        iterations=it,
        violation=violation,
        lower_bound=lower if np.isfinite(lower) else -np.inf,
        upper_bound=_primal_value(round_to_marginals(P, rs, cs), Cs, cfg.lam),
    )


def round_to_marginals(P: np.ndarray, r: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Nonnegative matrix with row sums r and column sums c that stays
    within the marginal error of P: rows and columns are scaled down where
    they exceed their targets, and the missing mass is added as a rank-one
    product of the deficits."""
    X = P * np.minimum(r / np.maximum(P.sum(axis=1), 1e-300), 1.0)[:, None]
    X = X * np.minimum(c / np.maximum(X.sum(axis=0), 1e-300), 1.0)[None, :]
    dr = np.maximum(r - X.sum(axis=1), 0.0)
    dc = np.maximum(c - X.sum(axis=0), 0.0)
    missing = dr.sum()
    if missing > 0:
        X = X + np.outer(dr, dc) / missing
    return X


def _primal_value(P: np.ndarray, C: np.ndarray, lam: float) -> float:
    support = P > 0
    p = P[support]
    with np.errstate(invalid="ignore", over="ignore"):
        val = float(p @ C[support] + (p @ np.log(p)) / lam)
    return val if not np.isnan(val) else np.inf


_ANNEAL_SPREAD = 200.0
_ANNEAL_FACTOR = 4.0
# give up when the violation shrinks by less than 1% over this many sweeps
_STALL_WINDOW = 1000
_STALL_RATIO = 0.99


def _scale(log_k, f, g, r, c, tol, max_iters, newton_after):
    """Alternate row/column scalings until the row marginals are within tol.

    Returns (f, g, violation, converged, sweeps).
    """
    log_r, log_c = np.log(r), np.log(c)
    newton_next = newton_after if newton_after is not None else max_iters + 1
    violation = np.inf
    checkpoint = np.inf
    it = 0
    with np.errstate(invalid="ignore", over="ignore"):
        g = log_c - _lse(log_k + f[:, None], axis=0)
        while it < max_iters:
            it += 1
            lse_rows = _lse(log_k + g[None, :], axis=1)
            rows = np.exp(f + lse_rows)
            # columns are exact after the g-update, so only rows can be off
            violation = float(np.max(np.abs(rows - r)))
            if violation <= tol:
                return f, g, violation, True, it
            if it % _STALL_WINDOW == 0:
                # potentials of huge magnitude put a floor under the violation
                if violation > _STALL_RATIO * checkpoint:
                    break
                checkpoint = violation
            if it > newton_next and np.max(np.abs(rows / r - 1)) < 0.5:
                step = _newton_step(log_k, f, g, r, c)
                if step is not None:
                    f = step[0]
                    g = log_c - _lse(log_k + f[:, None], axis=0)
                    continue
                newton_next = it + newton_after
            f = log_r - lse_rows
            g = log_c - _lse(log_k + f[:, None], axis=0)
    return f, g, violation, False, it


def _dual(log_k, f, g, r, c):
    with np.errstate(over="ignore"):
        mass = np.exp(f[:, None] + g[None, :] + log_k)
    return float(f @ r + g @ c - mass.sum()), mass


def _newton_step(log_k, f, g, r, c):
    """One damped Newton ascent step on the concave dual

        D(f, g) = <f, r> + <g, c> - sum_ij exp(f_i + g_j + log_k_ij).

    The last column potential is pinned to remove the additive gauge.
    Returns None when no ascent direction is found.
    """
    d0, P = _dual(log_k, f, g, r, c)
    rows, cols = P.sum(axis=1), P.sum(axis=0)
    grad = np.concatenate([r - rows, (c - cols)[:-1]])
    k = r.shape[0]
    hess = np.empty((grad.shape[0], grad.shape[0]))
    hess[:k, :k] = np.diag(rows)
    hess[:k, k:] = P[:, :-1]
    hess[k:, :k] = P[:, :-1].T
    hess[k:, k:] = np.diag(cols[:-1])
    # Levenberg damping: the support of a peaked plan splits into nearly
    # independent blocks whose gauge directions make the Hessian singular
    hess[np.diag_indices_from(hess)] *= 1 + 1e-10
    hess[np.diag_indices_from(hess)] += 1e-300
    try:
        delta = np.linalg.solve(hess, grad)
    except np.linalg.LinAlgError:
        delta = np.linalg.lstsq(hess, grad, rcond=None)[0]
    slope = float(grad @ delta)
    if not np.all(np.isfinite(delta)) or slope <= 0:
        return None
    df, dg = delta[:k], np.append(delta[k:], 0.0)
    gnorm = float(np.abs(grad).max())
    t = 1.0
    for _ in range(30):
        nf, ng = f + t * df, g + t * dg
        d1, P1 = _dual(log_k, nf, ng, r, c)
        if np.isfinite(d1):
            # near the optimum D is flat to rounding, so also accept a smaller residual
            if d1 >= d0 + 1e-4 * t * slope:
                return nf, ng
            res = max(np.abs(r - P1.sum(axis=1)).max(), np.abs(c - P1.sum(axis=0)).max())
            if res < 0.5 * gnorm:
                return nf, ng
        t *= 0.5
    return None


def regularized_objective(cost, r, c, cfg: SinkhornConfig) -> float:
    """Optimal value of the regularized problem; raises if Sinkhorn stalls."""
    res = sinkhorn(cost, r, c, cfg)
    if not res.converged:
        raise SinkhornConvergenceError(
            f"Sinkhorn did not converge in {res.iterations} iterations "
            f"(violation {res.violation:.3g} > tol {cfg.tol:.3g})",
            res,
        )
    return res.objective


def entropy_bounds(r, c) -> tuple[float, float]:
    """(H(r)+H(c))/2 <= H(P) <= H(r)+H(c) for every coupling P of (r, c)."""
    h = shannon_entropy(r) + shannon_entropy(c)
    return h / 2, h
