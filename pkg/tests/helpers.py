"""Random instances and independent reference solvers shared by the tests.

Nothing here calls the package's Sinkhorn or bracketing code: the entropic
objective is computed from its convex dual with scipy's trust-region
Newton method, and the unregularized one with networkx min-cost flow.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp

from orlicz_ot import new_measure, parse_phi
from orlicz_ot.measures import pairwise_distances

PHIS = ("pow:2", "exp:1.1", "exppow:1.05")


def random_measure(rng: np.random.Generator, k: int | None = None, d: int | None = None, spread: float = 3.0):
    k = int(rng.integers(3, 7)) if k is None else k
    d = int(rng.integers(1, 3)) if d is None else d
    atoms = rng.uniform(-spread, spread, size=(k, d))
    weights = rng.dirichlet(np.ones(k))
    return new_measure(atoms, weights)


def random_pair(rng: np.random.Generator, d: int | None = None):
    d = int(rng.integers(1, 3)) if d is None else d
    return random_measure(rng, d=d), random_measure(rng, d=d)


def relative_eps(a, b) -> float:
    return 1e-6 * float(pairwise_distances(a.atoms, b.atoms).max())


# ------------------------------------------------------------ entropic dual


def entropic_value(C: np.ndarray, r: np.ndarray, c: np.ndarray, lam: float) -> float:
    """min_P <P, C> + (1/lam) sum P log P over couplings, via the dual

        max_{u,v} <u, r> + <v, c> - sum_ij exp(u_i + v_j - lam C_ij - 1),

    divided by lam. The last v is pinned to zero (additive gauge).
    """
    k, kk = C.shape
    A = -lam * np.asarray(C, dtype=float) - 1.0  # -inf for forbidden cells

    def unpack(x):
        return x[:k], np.append(x[k:], 0.0)

    def neg(x):
        u, v = unpack(x)
        z = u[:, None] + v[None, :] + A
        P = np.exp(z)
        val = -(u @ r + v @ c - P.sum())
        rows, cols = P.sum(axis=1), P.sum(axis=0)
        grad = -np.concatenate([r - rows, (c - cols)[:-1]])
        hess = np.zeros((k + kk - 1, k + kk - 1))
        hess[:k, :k] = np.diag(rows)
        hess[:k, k:] = P[:, :-1]
        hess[k:, :k] = P[:, :-1].T
        hess[k:, k:] = np.diag(cols[:-1])
        return val, grad, hess

    # start from a row-normalized point so nothing overflows
    v0 = np.zeros(kk)
    u0 = np.log(r) - logsumexp(v0[None, :] + A, axis=1)
    v0 = np.log(c) - logsumexp(u0[:, None] + A, axis=0)
    v0 = v0 - v0[-1]
    u0 = np.log(r) - logsumexp(v0[None, :] + A, axis=1)
    x0 = np.concatenate([u0, v0[:-1]])
    cache = {}

    def f(x):
        key = x.tobytes()
        if key not in cache:
            cache.clear()
            with np.errstate(over="ignore"):
                cache[key] = neg(x)
        return cache[key]

    res = minimize(lambda x: f(x)[0], x0, jac=lambda x: f(x)[1], hess=lambda x: f(x)[2],
                   method="trust-exact", options={"gtol": 1e-13, "maxiter": 5000})
    return -float(res.fun) / lam


def entropic_g(M, r, c, phi, lam, eta) -> float:
    with np.errstate(over="ignore"):
        C = phi(M / eta)
    C = np.where(C >= np.finfo(float).max, np.inf, C)
    # every coupling pays at least the row (column) minima and has entropy
    # at most H(r) + H(c); far below the root this settles g > 1 directly
    h_max = -(r @ np.log(r)) - (c @ np.log(c))
    floor = max(r @ C.min(axis=1), c @ C.min(axis=0)) - h_max / lam
    if floor > 1:
        return float(floor)
    # sandwich from the unregularized optimum q: OT - H_max/lam <= g <= OT - H(q)/lam.
    # The margin covers the rounding inside the integer flow.
    finite = np.isfinite(C)
    if finite.all() and lam * C.max() > 1e3:
        ot, q = exact_ot_networkx(C, r, c, with_plan=True)
        margin = 1e-5 * float(C.max()) + 1e-3
        if ot - h_max / lam > 1 + margin:
            return float(ot - h_max / lam)
        qp = q[q > 0]
        upper = ot + float(qp @ np.log(qp)) / lam
        if upper < 1 - margin:
            return float(upper)
    return entropic_value(C, r, c, lam)


def grid_entropic_root(a, b, phi_text: str, lam: float, eps: float, points: int = 10_000) -> float:
    """Upper end of a bracket of width < eps/10 around inf{eta : g(eta) <= 1}.

    A geometric grid is located by binary search on the index, then the
    final cell is bisected.
    """
    phi = parse_phi(phi_text)
    M = pairwise_distances(a.atoms, b.atoms)
    r, c = a.weights, b.weights

    def g(eta):
        return entropic_g(M, r, c, phi, lam, eta)

    hi = 2.0 * float(M.max()) / phi.inverse(1.0)
    lo = hi * 1e-3
    while g(lo) <= 1:
        lo /= 10.0
    grid = np.geomspace(lo, hi, points)
    i, j = 0, points - 1  # g(grid[i]) > 1 >= g(grid[j])
    while j - i > 1:
        mid = (i + j) // 2
        if g(grid[mid]) > 1:
            i = mid
        else:
            j = mid
    x_low, x_upp = grid[i], grid[j]
    while x_upp - x_low >= eps / 10:
        mid = 0.5 * (x_low + x_upp)
        if g(mid) > 1:
            x_low = mid
        else:
            x_upp = mid
    return float(x_upp)


# -------------------------------------------------------------- exact, flow


def exact_ot_networkx(C: np.ndarray, r: np.ndarray, c: np.ndarray, scale: int = 10**9, with_plan: bool = False):
    """Transport cost by integer min-cost flow (weights and costs rounded)."""
    import networkx as nx

    k, kk = C.shape
    supply = np.round(np.asarray(r) * scale).astype(np.int64)
    demand = np.round(np.asarray(c) * scale).astype(np.int64)
    demand[np.argmax(demand)] += supply.sum() - demand.sum()
    G = nx.DiGraph()
    for i in range(k):
        G.add_node(("s", i), demand=-int(supply[i]))
    for j in range(kk):
        G.add_node(("t", j), demand=int(demand[j]))
    cost_scale = 10**6 / max(float(C.max()), 1e-300)
    for i in range(k):
        for j in range(kk):
            G.add_edge(("s", i), ("t", j), weight=int(round(C[i, j] * cost_scale)))
    flow = nx.min_cost_flow(G)
    q = np.array([[flow[("s", i)][("t", j)] for j in range(kk)] for i in range(k)], dtype=float) / scale
    total = float(np.sum(q * C))
    return (total, q) if with_plan else total


def exact_ow_grid(a, b, phi_text: str, tol: float) -> float:
    """Exact OW by plain bisection on eta with the networkx transport value."""
    phi = parse_phi(phi_text)
    M = pairwise_distances(a.atoms, b.atoms)
    lo, hi = 0.0, float(M.max()) / phi.inverse(1.0)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        with np.errstate(over="ignore"):
            C = np.minimum(phi(M / mid), 1e30)
        if exact_ot_networkx(C, a.weights, b.weights) > 1:
            lo = mid
        else:
            hi = mid
    return hi


def close(a: float, b: float, tol: float) -> bool:
    return math.isfinite(a) and math.isfinite(b) and abs(a - b) <= tol
