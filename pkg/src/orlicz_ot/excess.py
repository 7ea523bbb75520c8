"""Outlier (excess) mass of a mixing measure and its Orlicz-Wasserstein bounds.

If every coupling of G and G0 must move the outlier mass of G over a
distance of at least eta, Markov's inequality applied to phi(dist / W)
gives

    outlier_mass(G, G0, eta) <= 1 / phi(eta / W_phi(G, G0)).

The bound grows with W, so any upper estimate of W keeps it valid.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .measures import DiscreteMeasure, pairwise_distances
from .orlicz import Phi


def _outlier_mask(g: DiscreteMeasure, g0: DiscreteMeasure, eta: float, strict: bool) -> np.ndarray:
    if not eta > 0:
        raise ValueError(f"eta must be positive, got {eta}")
    if g.dim != g0.dim:
        raise ValueError(f"dimension mismatch: {g.dim} vs {g0.dim}")
    nearest = pairwise_distances(g.atoms, g0.atoms).min(axis=1)
    return nearest > eta if strict else nearest >= eta


def outlier_mass(g: DiscreteMeasure, g0: DiscreteMeasure, eta: float, *, strict: bool = False) -> float:
    """Weight of g on atoms at distance >= eta from every atom of g0.

    With ``strict=True`` only atoms strictly farther than eta count. The
    default also counts ties, which is the larger of the two masses; the
    Markov bound above holds for it as well.
    """
    return float(g.weights[_outlier_mask(g, g0, eta, strict)].sum())


def outlier_indices(g: DiscreteMeasure, g0: DiscreteMeasure, eta: float, *, strict: bool = False) -> list[int]:
    return np.flatnonzero(_outlier_mask(g, g0, eta, strict)).tolist()


def lemma3_bound(phi: Phi, eta: float, w: float) -> float:
    """1 / phi(eta / w); +inf when phi(eta / w) == 0, and 0 for w == 0."""
    if w == 0:
        return 0.0
    if not w > 0:
        raise ValueError(f"w must be positive, got {w}")
    val = phi(eta / w)
    return math.inf if val == 0 else 1.0 / val


def corollary_exp_bound(eta: float, w: float) -> float:
    """2 exp(-eta / w), the exponential-tail form of the same bound.

    It only dominates ``lemma3_bound`` for exp(x) - 1 where that bound is
    itself below one, i.e. where phi(eta / w) >= 1.
    """
    if w == 0:
        return 0.0
    if not w > 0:
        raise ValueError(f"w must be positive, got {w}")
    return 2.0 * math.exp(-eta / w)


@dataclass
class ExcessMassReport:
    eta: float
    outlier_mass: float
    lemma3_bound: float
    corollary_bound: float
    w_phi_used: float
    outlier_atom_indices: list[int] = field(default_factory=list)
    w_source: str = "exact"
    violation: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        if math.isinf(d["lemma3_bound"]):
            d["lemma3_bound"] = None
        return d


def excess_mass_report(
    g: DiscreteMeasure,
    g0: DiscreteMeasure,
    phi: Phi,
    eta: float,
    w: float,
    *,
    w_source: str = "exact",
    strict: bool = False,
) -> ExcessMassReport:
    """Outlier mass next to both bounds; ``violation`` is only raised when
    ``w`` is an exact value (an entropic estimate may undershoot W)."""
    mass = outlier_mass(g, g0, eta, strict=strict)
    bound = lemma3_bound(phi, eta, w)
    return ExcessMassReport(
        eta=float(eta),
        outlier_mass=mass,
        lemma3_bound=bound,
        corollary_bound=corollary_exp_bound(eta, w),
        w_phi_used=float(w),
        outlier_atom_indices=outlier_indices(g, g0, eta, strict=strict),
        w_source=w_source,
        violation=w_source == "exact" and mass > bound + 1e-9,
    )
