import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import random_measure
from orlicz_ot import dirac, new_measure, parse_phi, solve_exact_ow
from orlicz_ot.excess import (
    corollary_exp_bound,
    excess_mass_report,
    lemma3_bound,
    outlier_indices,
    outlier_mass,
)


def tight_pair():
    return new_measure([[0.0], [5.0]], [0.9, 0.1]), dirac([0.0])


def test_tight_instance():
    g, g0 = tight_pair()
    phi = parse_phi("exp:1.0")
    w = solve_exact_ow(g, g0, phi).value
    assert outlier_mass(g, g0, 5.0) == pytest.approx(0.1, abs=1e-12)
    assert lemma3_bound(phi, 5.0, w) == pytest.approx(0.1, abs=1e-9)
    assert corollary_exp_bound(5.0, w) == pytest.approx(2 / 11, abs=1e-9)


def test_ties_and_strict_mode():
    g, g0 = tight_pair()
    assert outlier_mass(g, g0, 5.0, strict=True) == 0.0
    assert outlier_indices(g, g0, 5.0) == [1]
    assert outlier_mass(g, g0, 100.0) == 0.0
    assert outlier_mass(g, g0, 1e-9) == pytest.approx(0.1)


def test_bound_edge_cases():
    phi = parse_phi("exp:1.0")
    assert lemma3_bound(phi, 1.0, 0.0) == 0.0
    assert corollary_exp_bound(1.0, 0.0) == 0.0
    # phi(eta / w) underflows to zero only for a vanishing argument
    assert lemma3_bound(parse_phi("pow:2"), 1e-200, 1e200) == math.inf
    with pytest.raises(ValueError):
        lemma3_bound(phi, 1.0, -1.0)
    with pytest.raises(ValueError):
        outlier_mass(*tight_pair(), 0.0)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        outlier_mass(dirac([0.0]), dirac([0.0, 0.0]), 1.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["exp:1.0", "pow:2", "exppow:1.05"]))
def test_markov_bound_holds_on_random_instances(seed, phi_text):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 3))
    g, g0 = random_measure(rng, d=d), random_measure(rng, d=d)
    phi = parse_phi(phi_text)
    w = solve_exact_ow(g, g0, phi).value
    nearest = np.sort(np.linalg.norm(g.atoms[:, None] - g0.atoms[None], axis=2).min(axis=1))
    for eta in nearest:
        assert outlier_mass(g, g0, eta) <= lemma3_bound(phi, eta, w) + 1e-9


def test_report_fields_and_serialization():
    g, g0 = tight_pair()
    phi = parse_phi("exp:1.0")
    w = solve_exact_ow(g, g0, phi).value
    rep = excess_mass_report(g, g0, phi, 5.0, w)
    assert not rep.violation
    d = rep.to_dict()
    assert d["outlier_atom_indices"] == [1] and d["w_source"] == "exact"
    # an understated W flags a violation only when the W is claimed exact
    assert excess_mass_report(g, g0, phi, 5.0, 0.5 * w).violation
    assert not excess_mass_report(g, g0, phi, 5.0, 0.5 * w, w_source="entropic").violation
