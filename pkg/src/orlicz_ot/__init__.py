"""Orlicz-Wasserstein distances between discrete probability measures."""

from .entropic import SinkhornConfig, SinkhornResult, regularized_objective, sinkhorn
from .excess import (
    ExcessMassReport,
    corollary_exp_bound,
    excess_mass_report,
    lemma3_bound,
    outlier_mass,
)
from .measures import (
    CostMatrix,
    DiscreteMeasure,
    TransportPlan,
    cost_matrix,
    dirac,
    marginal_violation,
    new_measure,
)
from .mixtures import MixtureSpec, mixing_measure, sample
from .orlicz import (
    ExpLinear,
    ExpPower,
    Mixture,
    Phi,
    Power,
    Sup,
    check_orlicz_conditions,
    mix_phi,
    parse_phi,
    sup_phi,
)
from .solver import SolveReport, solve_entropic_ow, solve_exact_ow, wasserstein_r

__version__ = "0.1.0"
