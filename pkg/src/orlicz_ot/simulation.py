"""Normal-vs-Laplace mixture experiment comparing entropic W1 and OW plans.

nu1 is sampled from a 3-component normal mixture, nu2 from a 4-component
Laplace mixture whose smallest component (mean 6, weight 0.06) plays the
outlier. Both plans are computed at the same regularization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .entropic import SinkhornConfig, SinkhornResult, sinkhorn
from .measures import DiscreteMeasure, TransportPlan, cost_matrix
from .mixtures import LAPLACE_4, NORMAL_3, OUTLIER_MEAN, nearest_component, sample
from .orlicz import ExpLinear, Phi
from .solver import SolveReport, solve_entropic_ow

DEFAULT_LAMBDA = 0.01
DEFAULT_PHI = ExpLinear(1.1)
DEFAULT_N = 300


@dataclass
class SimulationResult:
    nu1: DiscreteMeasure
    nu2: DiscreteMeasure
    w1: SinkhornResult
    ow: SolveReport
    outlier_columns: np.ndarray
    summary: dict


def sample_seeds(seed: int) -> tuple[int, int]:
    a, b = np.random.SeedSequence(seed).generate_state(2, dtype=np.uint64)
    return int(a), int(b)


def _column_stats(plan: TransportPlan, M: np.ndarray, cols: np.ndarray) -> tuple[float, float]:
    block = plan.matrix[:, cols]
    mass = float(block.sum())
    mean_dist = float((block * M[:, cols]).sum() / mass) if mass > 0 else 0.0
    return mass, mean_dist


def run_simulation(
    seed: int = 0,
    n: int = DEFAULT_N,
    lam: float = DEFAULT_LAMBDA,
    phi: Phi = DEFAULT_PHI,
    epsilon: float | None = None,
) -> SimulationResult:
    s1, s2 = sample_seeds(seed)
    nu1 = sample(NORMAL_3, n, s1)
    nu2 = sample(LAPLACE_4, n, s2)
    M = cost_matrix(nu1, nu2).entries

    w1 = sinkhorn(M, nu1.weights, nu2.weights, SinkhornConfig(lam))
    ow = solve_entropic_ow(nu1, nu2, phi, lam, epsilon)

    outlier_comp = int(np.argmin(np.abs(LAPLACE_4.means[:, 0] - OUTLIER_MEAN)))
    cols = nearest_component(LAPLACE_4, nu2.atoms) == outlier_comp
    w1_mass, w1_dist = _column_stats(w1.plan, M, cols)
    ow_mass, ow_dist = _column_stats(ow.plan, M, cols)
    summary = {
        "seed": seed,
        "n": n,
        "lambda": lam,
        "phi": phi.spec,
        "ow_value": ow.value,
        "ow_status": ow.status,
        "ow_iterations": ow.iterations,
        "w1_converged": w1.converged,
        "outlier_atoms": int(cols.sum()),
        "w1_outlier_mass": w1_mass,
        "ow_outlier_mass": ow_mass,
        "w1_outlier_mean_distance": w1_dist,
        "ow_outlier_mean_distance": ow_dist,
        "w1_plan_entropy": w1.plan.entropy(),
        "ow_plan_entropy": ow.plan.entropy(),
        "w1_plan_max": float(w1.plan.matrix.max()),
        "ow_plan_max": float(ow.plan.matrix.max()),
    }
    return SimulationResult(nu1, nu2, w1, ow, cols, summary)
