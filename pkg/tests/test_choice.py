import numpy as np
import pytest

from osptrade.choice import (HypothesisError, build_bilateral, check_choice_conditions, constant_feasibility_lp,
                             constant_mechanism_slack, find_bilateral, lemma_terms, verify_bilateral)
from osptrade.core import cube_corners
from osptrade.mechanisms import BilateralMechanism
from osptrade.suites import choice_suite
from oracles import uniform_prob_below


def test_s2_conditions(s2):
    d = check_choice_conditions(s2)
    assert d.hypotheses and d.nondegenerate_prefs and not d.identical_performance
    assert d.condition_i and d.support_dimension == 2 and np.allclose(d.c_hat, [1, 1])


def test_identical_and_degenerate(s2):
    assert check_choice_conditions(s2.replace(pi=np.array([[1.0, 2.0], [1.0, 2.0]]))).identical_performance
    flat = s2.replace(pref_hi=s2.pref_lo.copy())
    assert not check_choice_conditions(flat).nondegenerate_prefs


def test_bilateral_s2_direction_and_scale(s2):
    m = build_bilateral(s2, 0, 1)
    g = m.gamma
    assert abs(g @ np.array([1.0, 1.0])) <= 1e-12 and g[0] > 0
    # largest feasible scale is 1; the builder keeps a 0.999 safety factor
    assert np.allclose(g, [0.999, -0.999])


def test_bilateral_none_cases(s2):
    assert build_bilateral(s2.replace(pi=np.array([[1.0, 2.0], [1.0, 2.0]])), 0, 1) is None
    apart = s2.replace(pref_lo=np.array([[1.0, 1.0], [3.0, 3.0]]), pref_hi=np.array([[2.0, 2.0], [4.0, 4.0]]))
    assert build_bilateral(apart, 0, 1) is None
    with pytest.raises(ValueError):
        build_bilateral(s2, 1, 1)


def test_verify_bilateral_s2(s2):
    rep = verify_bilateral(BilateralMechanism(0, 1, np.array([1.0, -1.0])), s2, samples=100_000, seed=1)
    assert all(rep.conditions) and rep.improving
    exact = uniform_prob_below((1, -1), (1, 1), (2, 2))
    assert rep.trade_probabilities == pytest.approx((exact, exact), abs=1e-12)
    assert rep.expected_gain == pytest.approx(-0.5)
    assert rep.expected_cost == pytest.approx(5.5)
    assert rep.mc_probabilities == pytest.approx((0.5, 0.5), abs=0.005)


def test_verify_bilateral_failing_conditions(s2):
    rep = verify_bilateral(BilateralMechanism(0, 1, np.array([3.0, -3.0])), s2)
    assert not rep.conditions[0] and not rep.improving
    rep = verify_bilateral(BilateralMechanism(0, 1, np.array([1.0, 1.0])), s2)
    assert not rep.conditions[2] and not rep.improving


def test_corollary_unit_beta(s2):
    out = constant_mechanism_slack(s2)
    assert out.max_deviation <= 1e-7 and out.inequality_holds


def test_lemma_inequality_with_slack(s2):
    s = s2.replace(beta=np.array([2.0, 2.0]))
    out = constant_mechanism_slack(s)
    assert out.max_deviation > 0 and out.lhs <= out.rhs + 1e-9


def test_lemma_terms_at_status_quo(s2):
    lhs, _ = lemma_terms(s2, s2.sigma)
    assert lhs == 0.0


def test_lemma_holds_at_every_corner_of_random_constant_mechanisms(s2, rng):
    s = s2.replace(beta=np.array([1.5, 2.0]))
    for _ in range(20):
        m = constant_feasibility_lp(s, rng.normal(size=(2, 2)))
        lhs, rhs = lemma_terms(s, m)
        assert lhs <= rhs + 1e-9
        for j in range(2):
            for c in cube_corners(s.pref_lo[j], s.pref_hi[j]):
                assert c @ m[j] <= s.beta[j] * c @ s.sigma[j] + 1e-9


def test_slack_requires_intersecting_supports(s2):
    apart = s2.replace(pref_lo=np.array([[1.0, 1.0], [3.0, 3.0]]), pref_hi=np.array([[2.0, 2.0], [4.0, 4.0]]))
    with pytest.raises(HypothesisError):
        constant_mechanism_slack(apart)


def test_suite_bilateral_rechecks():
    for sc in choice_suite():
        m = find_bilateral(sc.scenario)
        if m is None:
            continue
        rep = verify_bilateral(m, sc.scenario)
        assert all(rep.conditions) and rep.improving and rep.expected_gain < 0
