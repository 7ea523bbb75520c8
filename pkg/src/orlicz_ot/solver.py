"""Orlicz-Wasserstein distances between discrete measures.

Two routes are provided:

* :func:`solve_entropic_ow` finds the smallest scale ``eta`` at which the
  entropy-regularized transport objective at cost ``phi(M / eta)`` drops
  below one. The objective is nonincreasing in ``eta``, so the root is
  bracketed and refined with a safeguarded regula falsi.
* :func:`solve_exact_ow` does the same for the unregularized problem, with
  an exact LP for the inner minimization. It serves as the reference for
  small instances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq

from .entropic import SinkhornConfig, SinkhornConvergenceError, SinkhornResult, sinkhorn
from .lp import MAX_EXACT_SIZE, SizeLimitError, exact_ot
from .measures import (
    DiscreteMeasure,
    TransportPlan,
    cost_matrix,
    make_plan,
    shannon_entropy,
)
from .orlicz import FLOAT_MAX, Phi, Power

DEFAULT_MAX_ITERS = 200
RELATIVE_EPSILON = 1e-6
# lowest scale tried before declaring the infimum to be zero
SMALLEST_SCALE = 1e-300
# lam * cost beyond which Sinkhorn potentials lose precision
WIDE_COST_RANGE = 1e8

# probe outcomes relative to the level g = 1
ABOVE, BELOW, LEVEL = 1, -1, 0
# a probe whose certified bracket on g is narrower than LEVEL_WIDTH and
# comes within LEVEL_MARGIN of one is taken as the root: no double precision
# evaluation can place it reliably, and the implied error in eta is far
# below any useful tolerance
LEVEL_MARGIN = 1e-9
LEVEL_WIDTH = 1e-7

CONVERGED = "converged"
DEGENERATE_ZERO = "degenerate_zero"
MAX_ITERS = "max_iters"


class BracketState(NamedTuple):
    x_low: float
    x_upp: float
    f_low: float
    f_upp: float

    @property
    def width(self) -> float:
        return self.x_upp - self.x_low


@dataclass
class SolveReport:
    value: float
    plan: TransportPlan
    iterations: int
    status: str
    epsilon: float
    trace: list[BracketState] = field(default_factory=list)
    method: str = "entropic"

    @property
    def converged(self) -> bool:
        return self.status in (CONVERGED, DEGENERATE_ZERO)

    def to_dict(self) -> dict:
        def num(x):
            return None if x is None or not math.isfinite(x) else float(x)

        return {
            "value": float(self.value),
            "status": self.status,
            "method": self.method,
            "iterations": self.iterations,
            "epsilon": float(self.epsilon),
            "trace": [[num(v) for v in state] for state in self.trace],
            "plan": self.plan.matrix.tolist(),
            "row_marginal": self.plan.row_marginal.tolist(),
            "col_marginal": self.plan.col_marginal.tolist(),
        }


class OWSolverError(RuntimeError):
    """Raised when an inner solve fails; carries the partial report."""

    def __init__(self, message: str, report: SolveReport | None = None):
        super().__init__(message)
        self.report = report


def transformed_cost(M: np.ndarray, phi: Phi, eta: float) -> np.ndarray:
    """phi(M / eta), with entries beyond the double range mapped to +inf."""
    with np.errstate(over="ignore", divide="ignore"):
        C = phi(M / eta)
    return np.where(C >= FLOAT_MAX, np.inf, C)


# ------------------------------------------------------------------ entropic


def solve_entropic_ow(
    src: DiscreteMeasure,
    dst: DiscreteMeasure,
    phi: Phi,
    lam: float,
    epsilon: float | None = None,
    *,
    max_iters: int = DEFAULT_MAX_ITERS,
    sinkhorn_tol: float = 1e-9,
    sinkhorn_max_iters: int = 100_000,
) -> SolveReport:
    """Entropy-regularized Orlicz-Wasserstein distance.

    The initial bracket is ``x_upp = max(M) / phi^-1(1)`` and the lower end
    obtained from Jensen's inequality and the entropy bounds of couplings;
    ``g(x_low) > 1 > g(x_upp)`` holds for every recorded trace entry. The
    recorded values are certified bounds (a dual value or a cheap floor on
    the low side, the value of a feasible rounded plan on the high side)
    whenever the inner solve allows it.
    The returned value is the final ``x_upp`` and ``plan`` is the
    regularized plan at that scale.

    ``epsilon`` defaults to ``1e-6 * max(M)``.
    """
    M = cost_matrix(src, dst).entries
    r, c = src.weights, dst.weights
    cfg = SinkhornConfig(lam, max_iters=sinkhorn_max_iters, tol=sinkhorn_tol)
    m = float(M.max())
    if m == 0.0:
        res = _checked(sinkhorn(M, r, c, cfg), None)
        return SolveReport(0.0, res.plan, 0, DEGENERATE_ZERO, epsilon or 0.0)
    eps = RELATIVE_EPSILON * m if epsilon is None else float(epsilon)
    if not eps > 0:
        raise ValueError("epsilon must be positive")

    h_sum = shannon_entropy(r) + shannon_entropy(c)
    solves: dict[float, SinkhornResult] = {}
    trace: list[BracketState] = []

    def partial(status=MAX_ITERS, value=float("nan"), it=0):
        plan = solves[max(solves)].plan if solves else make_plan(np.outer(r, c), r, c)
        return SolveReport(value, plan, it, status, eps, list(trace))

    def solve(C, eta, tol):
        try:
            return _checked(sinkhorn(C, r, c, replace(cfg, tol=tol)), eta)
        except SinkhornConvergenceError as exc:
            raise OWSolverError(str(exc), partial()) from exc

    def g(eta: float) -> tuple[float, int]:
        """Value of the objective at eta and which side of one it lies on.

        ABOVE comes with a lower bound > 1 and BELOW with an upper bound
        < 1, both certified when possible. LEVEL means g(eta) = 1 to within
        the certified accuracy of the inner solve.
        """
        C = transformed_cost(M, phi, eta)
        # cheap certificate: g >= sum_i r_i min_j C_ij - H_max / lam (and the
        # column analogue). It settles probes far below the root, where the
        # cost range is too wide for Sinkhorn's potentials in double precision.
        bound = max(r @ C.min(axis=1), c @ C.min(axis=0)) - h_sum / lam
        if bound > 1:
            return float(bound), ABOVE
        finite = C[np.isfinite(C)]
        if lam * float(finite.max()) > WIDE_COST_RANGE and C.size <= MAX_EXACT_SIZE:
            # sharper certificate from the unregularized optimum
            bound = exact_ot(C, r, c)[0] - h_sum / lam
            if bound > 1:
                return float(bound), ABOVE
        res = solve(C, eta, cfg.tol)
        if res.lower_bound <= 1 + LEVEL_MARGIN and res.upper_bound >= 1 - LEVEL_MARGIN and cfg.tol > 1e-14:
            # one retry at a tighter tolerance narrows the certified bracket
            try:
                res = _checked(sinkhorn(C, r, c, replace(cfg, tol=cfg.tol * 1e-3)), eta)
            except SinkhornConvergenceError:
                pass
        solves[eta] = res
        near = res.lower_bound <= 1 + LEVEL_MARGIN and res.upper_bound >= 1 - LEVEL_MARGIN
        if near and res.upper_bound - res.lower_bound <= LEVEL_WIDTH:
            return 1.0, LEVEL
        if res.lower_bound > 1:
            return res.lower_bound, ABOVE
        if res.upper_bound < 1:
            return res.upper_bound, BELOW
        # no usable certificate (extreme costs): fall back to the estimate
        return res.objective, ABOVE if res.objective > 1 else BELOW

    x_upp = m / phi.inverse(1.0)
    f_upp, side = g(x_upp)
    for _ in range(64):
        if side == BELOW:
            break
        if side == LEVEL:
            # every coupling sits on the level set already (e.g. single atoms)
            return SolveReport(x_upp, solves[x_upp].plan, 0, CONVERGED, eps)
        x_upp *= 2.0
        f_upp, side = g(x_upp)
    else:
        raise OWSolverError("could not find a scale with objective below one", partial())

    s_raw = solve(M, None, cfg.tol).objective
    x_low = (s_raw + h_sum / (2 * lam)) / phi.inverse(1 + h_sum / lam)
    x_low = min(max(x_low, 1e-12 * x_upp), 0.5 * x_upp)
    f_low, side = g(x_low)
    while side != ABOVE:
        if side == LEVEL:
            return SolveReport(x_low, solves[x_low].plan, 0, CONVERGED, eps)
        x_low /= 10.0
        if x_low < SMALLEST_SCALE:
            res = solves[x_upp]
            return SolveReport(0.0, res.plan, 0, DEGENERATE_ZERO, eps, list(trace))
        f_low, side = g(x_low)

    trace.append(BracketState(x_low, x_upp, f_low, f_upp))
    # Illinois-weighted secant values for g - 1; the trace keeps the true ones
    w_low, w_upp = f_low - 1, f_upp - 1
    last_side = 0
    slow_steps = 0
    it = 0
    while x_upp - x_low >= eps:
        if it >= max_iters:
            return SolveReport(x_upp, solves[x_upp].plan, it, MAX_ITERS, eps, trace)
        it += 1
        width = x_upp - x_low
        x_new = (x_low * w_upp - x_upp * w_low) / (w_upp - w_low)
        if not x_low < x_new < x_upp or slow_steps >= 2:
            x_new = 0.5 * (x_low + x_upp)
            slow_steps = 0
        if not x_low < x_new < x_upp:
            break  # bracket is at float resolution
        f_new, side = g(x_new)
        if side == LEVEL:
            # landed on the level set: x_new is the infimum itself. The trace
            # only records strict brackets, so this step is not appended.
            return SolveReport(x_new, solves[x_new].plan, it, CONVERGED, eps, trace)
        if side == BELOW:
            x_upp, f_upp, w_upp = x_new, f_new, f_new - 1
            if last_side == 1:
                w_low *= 0.5
            last_side = 1
        else:
            x_low, f_low, w_low = x_new, f_new, f_new - 1
            if last_side == -1:
                w_upp *= 0.5
            last_side = -1
        slow_steps = slow_steps + 1 if x_upp - x_low > 0.5 * width else 0
        trace.append(BracketState(x_low, x_upp, f_low, f_upp))

    return SolveReport(x_upp, solves[x_upp].plan, it, CONVERGED, eps, trace)


def _checked(res: SinkhornResult, eta) -> SinkhornResult:
    if not res.converged:
        where = "" if eta is None else f" at scale {eta:.6g}"
        raise SinkhornConvergenceError(
            f"Sinkhorn did not converge{where} after {res.iterations} iterations "
            f"(marginal violation {res.violation:.3g})",
            res,
        )
    return res


def entropic_objective(src: DiscreteMeasure, dst: DiscreteMeasure, phi: Phi, lam: float, eta: float) -> float:
    """The regularized objective at cost phi(M / eta) whose level-one crossing
    defines the entropic distance."""
    M = cost_matrix(src, dst).entries
    cfg = SinkhornConfig(lam)
    return _checked(sinkhorn(transformed_cost(M, phi, eta), src.weights, dst.weights, cfg), eta).objective


# --------------------------------------------------------------------- exact


def coupling_scale(q: np.ndarray, M: np.ndarray, phi: Phi) -> float:
    """Smallest eta with sum_ij q_ij phi(M_ij / eta) <= 1 for a fixed coupling."""
    mask = (q > 0) & (M > 0)
    w, d = q[mask], M[mask]
    if d.size == 0:
        return 0.0
    if isinstance(phi, Power):
        return float(np.sum(w * d**phi.p) ** (1.0 / phi.p))
    log_w = np.log(w)

    def excess(eta):
        logs = log_w + phi.log_value(d / eta)
        top = logs.max()
        return top + math.log(np.exp(logs - top).sum())

    unit = phi.inverse(1.0)
    lo = float(w @ d) / unit  # Jensen: the sum is >= 1 here
    hi = float(d.max()) / unit  # every term is <= its weight here
    if excess(lo) <= 0:
        return lo
    if excess(hi) >= 0:
        return hi
    return float(brentq(excess, lo, hi, xtol=1e-15 * hi, rtol=4 * np.finfo(float).eps))


def solve_exact_ow(
    src: DiscreteMeasure,
    dst: DiscreteMeasure,
    phi: Phi,
    epsilon: float | None = None,
    *,
    max_iters: int = 500,
) -> SolveReport:
    """Exact Orlicz-Wasserstein distance for small instances.

    Bisection on the scale ``eta`` with an exact transport LP at cost
    ``phi(M / eta)``. Every LP coupling also yields an upper bound (its own
    level-one scale), which usually closes the bracket after a handful of
    probes.
    """
    M = cost_matrix(src, dst).entries
    r, c = src.weights, dst.weights
    if M.size > MAX_EXACT_SIZE:
        raise SizeLimitError(f"{M.shape[0]}x{M.shape[1]} exceeds the exact-solver limit of {MAX_EXACT_SIZE} cells")
    m = float(M.max())
    eps = RELATIVE_EPSILON * m if epsilon is None else float(epsilon)
    mismatch, q0 = exact_ot((M > 0).astype(float), r, c)
    if m == 0.0 or mismatch <= 1e-12:
        return SolveReport(0.0, make_plan(q0, r, c), 0, DEGENERATE_ZERO, eps, method="exact")
    if not eps > 0:
        raise ValueError("epsilon must be positive")

    unit = phi.inverse(1.0)
    w1, q = exact_ot(M, r, c)
    lower = w1 / unit  # Jensen: below this every coupling has objective > 1
    upper = min(m / unit, coupling_scale(q, M, phi))
    best = q
    f_low = float("nan")
    trace = [BracketState(lower, upper, f_low, 1.0)]
    fresh = True
    descents = 0
    it = 0
    while upper - lower > eps:
        if it >= max_iters:
            return SolveReport(upper, make_plan(best, r, c), it, MAX_ITERS, eps, trace, "exact")
        it += 1
        if fresh and descents < 8:
            probe = max(upper - 0.5 * eps, 0.5 * (lower + upper))
            descents += 1
        else:
            probe = 0.5 * (lower + upper)
            descents = 0
        h, q = exact_ot(transformed_cost(M, phi, probe), r, c)
        eta_q = coupling_scale(q, M, phi)
        fresh = False
        if h > 1:
            lower, f_low = probe, h
        else:
            upper, best = probe, q
        if eta_q < upper:
            upper, best, fresh = eta_q, q, True
        trace.append(BracketState(lower, upper, f_low, 1.0))
    return SolveReport(upper, make_plan(best, r, c), it, CONVERGED, eps, trace, "exact")


def wasserstein_r(src: DiscreteMeasure, dst: DiscreteMeasure, order: float) -> float:
    """Classical order-``order`` Wasserstein distance via the exact LP."""
    if not order >= 1:
        raise ValueError(f"Wasserstein order must be >= 1, got {order}")
    M = cost_matrix(src, dst).entries
    value, _ = exact_ot(M**order, src.weights, dst.weights)
    return max(value, 0.0) ** (1.0 / order)
