"""Exact discrete optimal transport as a linear program (HiGHS via scipy)."""

from __future__ import annotations

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

MAX_EXACT_SIZE = 10_000


class SizeLimitError(ValueError):
    """Instance too large for the exact LP path."""


def _constraints(k: int, kk: int):
    eye_r = sparse.identity(k, format="csr")
    eye_c = sparse.identity(kk, format="csr")
    rows = sparse.kron(eye_r, np.ones((1, kk)))
    cols = sparse.kron(np.ones((1, k)), eye_c)
    return sparse.vstack([rows, cols]).tocsr()


_CACHE: dict[tuple[int, int], sparse.csr_matrix] = {}


def exact_ot(cost, r, c) -> tuple[float, np.ndarray]:
    """min_q <q, cost> over couplings of (r, c); returns (value, coupling).

    Entries equal to +inf are forbidden cells; if no coupling avoids them
    the value is +inf.
    """
    C = np.asarray(cost, dtype=float)
    r = np.asarray(r, dtype=float)
    c = np.asarray(c, dtype=float)
    k, kk = C.shape
    if k * kk > MAX_EXACT_SIZE:
        raise SizeLimitError(f"{k}x{kk} exceeds the exact-solver limit of {MAX_EXACT_SIZE} cells")
    if k == 1 or kk == 1:
        q = np.outer(r, c)
        with np.errstate(invalid="ignore"):
            return float(np.sum(np.where(q > 0, q * C, 0.0))), q
    a_eq = _CACHE.get((k, kk))
    if a_eq is None:
        a_eq = _CACHE[(k, kk)] = _constraints(k, kk)
    forbidden = ~np.isfinite(C)
    C = np.where(forbidden, 0.0, C)
    bounds = (0, None)
    if forbidden.any():
        bounds = np.column_stack([np.zeros(C.size), np.where(forbidden.ravel(), 0.0, np.inf)])
    # scale so the LP tolerances are relative to the cost range
    scale = float(C.max()) or 1.0
    res = linprog(
        C.ravel() / scale,
        A_eq=a_eq,
        b_eq=np.concatenate([r, c]),
        bounds=bounds,
        method="highs",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if res.status == 2 and forbidden.any():
        return float("inf"), np.outer(r, c)
    if res.status != 0:
        raise RuntimeError(f"transport LP failed: {res.message}")
    q = np.clip(res.x.reshape(k, kk), 0.0, None)
    return float(np.sum(q * C)), q
