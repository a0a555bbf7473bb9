import numpy as np
import pytest

from osptrade.choice import build_bilateral
from osptrade.core import decompose_expected, make_scenario, status_quo_cost
from osptrade.mechanisms import (BilateralMechanism, Menu, ProtocolError, TradingProtocol, bilateral_protocol,
                                 build_two_price_binary, canonical_protocol, corner_grids, dump_protocol,
                                 eopr_select, essential_reduction, load_protocol, myopic_strategy,
                                 polarized_protocol, remedial_menu, simulate_draws, simulate_mechanism,
                                 singleton_protocol, tabulate, verify_osp_bruteforce, verify_osp_structural)
from osptrade.suites import eopr_suite
from oracles import two_ray_s2_cost


def test_myopic_examples(s2):
    m = canonical_protocol(s2).menus[0]
    assert np.allclose(m.rays[myopic_strategy(m, (1, 2))], (1, -1))
    assert myopic_strategy(m, (1, 1)) == 0
    assert myopic_strategy(remedial_menu(0, np.array([1.0, 1.0])), (3, 0.1)) == 1


def test_eopr_examples(s2):
    p = canonical_protocol(s2)
    x = eopr_select(p, (0, 0), s2).x
    assert np.allclose(x, s2.sigma)
    x = eopr_select(p, (1, 2), s2).x
    assert np.allclose(x, [[2, 0], [0, 2]]) and float(np.sum(s2.pi * x)) == pytest.approx(4.0)
    x = eopr_select(p, (1, 0), s2).x
    assert np.allclose(x, s2.sigma)


def test_eopr_lottery_reaverages(s2):
    p = canonical_protocol(s2)
    x = eopr_select(p, (1, 2), s2).x
    assert np.max(np.abs(decompose_expected(x, s2.supply).mean() - x)) <= 1e-9


def test_remedial_selection_shrinks_to_box(s2):
    p = TradingProtocol(s2.sigma.copy(), (remedial_menu(0, s2.sigma[0]), remedial_menu(1, s2.sigma[1])))
    x = eopr_select(p, (1, 1), s2).x
    assert np.allclose(x.sum(axis=0), s2.supply)
    assert np.all(x <= s2.sigma + 1e-9)


def test_endowment_must_sit_in_every_set(s2):
    bad = Menu(0, "finite", s2.sigma[0], points=(np.array([[2.0, 0.0]]),))
    with pytest.raises(ProtocolError):
        TradingProtocol(s2.sigma.copy(), (bad, canonical_protocol(s2).menus[1])).validate(s2.supply)


def test_protocol_json_round_trip(s2):
    for p in (canonical_protocol(s2), tabulate(canonical_protocol(s2), s2)):
        assert load_protocol(dump_protocol(p)).same_as(p)
    with pytest.raises(ProtocolError):
        load_protocol('{"endowment": [[1, 1]], "menus": []}')


def test_essential_reduction_bilateral(s2):
    m = BilateralMechanism(0, 1, np.array([1.0, -1.0]))
    p = essential_reduction(bilateral_protocol(s2, m))
    a, b = p.menus
    assert {tuple(v) for pts in a.points for v in pts} == {(1.0, 1.0), (2.0, 0.0)}
    assert {tuple(v) for pts in b.points for v in pts} == {(1.0, 1.0), (0.0, 2.0)}
    again = essential_reduction(p)
    assert again.same_as(p)


def test_essential_reduction_drops_far_points(s2):
    table = tabulate(canonical_protocol(s2), s2)
    red = essential_reduction(table)
    for menu in red.menus:
        for pts in menu.points:
            assert len(pts) <= 2
    with pytest.raises(ProtocolError):
        essential_reduction(canonical_protocol(s2))


def test_structural_examples(s2):
    assert verify_osp_structural(canonical_protocol(s2)).verdict
    bad = polarized_protocol(s2, [[(1, -1), (2, -1)], []])
    v = verify_osp_structural(bad)
    assert not v.verdict and v.agent == 0 and v.clause == "polarization"
    rem = TradingProtocol(s2.sigma.copy(), tuple(remedial_menu(j, s2.sigma[j]) for j in range(2)))
    assert verify_osp_structural(rem).verdict


def test_bruteforce_examples(s2):
    p = bilateral_protocol(s2, BilateralMechanism(0, 1, np.array([1.0, -1.0])))
    assert verify_osp_bruteforce(p, corner_grids(s2)).verdict

    def inverted(c):
        return 1 if np.dot((1, -1), c) > 0 else 0

    v = verify_osp_bruteforce(p, corner_grids(s2), strategies=[inverted, None])
    assert not v.verdict and v.agent == 0 and np.allclose(v.c, (1, 2))
    assert verify_osp_bruteforce(tabulate(singleton_protocol(s2), s2), corner_grids(s2)).verdict


@pytest.mark.parametrize("p1, p2, flag", [(1, 1, True), (2, 1, False), (1, 2, True)])
def test_two_price_binary(s2, p1, p2, flag):
    p, ok = build_two_price_binary(s2, p1, p2)
    assert ok is flag
    assert verify_osp_structural(p).verdict is flag
    assert np.allclose(p.menus[0].rays[1], (1, -p1)) and np.allclose(p.menus[0].rays[2], (-1, p2))


def test_two_price_wrong_dimension():
    s3 = make_scenario([1, 1, 1], np.ones((1, 3)), np.ones((1, 3)), np.ones((1, 3)), np.full((1, 3), 2.0))
    with pytest.raises(ProtocolError):
        build_two_price_binary(s3, 1, 1)


def test_simulation_matches_quadrature(s2):
    rep = simulate_mechanism(s2, canonical_protocol(s2), 100_000, 7, workers=1)
    assert rep.mean_cost == pytest.approx(two_ray_s2_cost(), abs=0.02)
    assert rep.max_participation_violation <= 1e-9
    assert np.allclose(rep.trade_freq, 0.25, atol=0.01)


def test_simulation_singleton_exact(s2):
    rep = simulate_mechanism(s2, singleton_protocol(s2), 1000, 1)
    assert rep.mean_cost == 6.0 and rep.stderr == 0.0


def test_simulation_deterministic(s2):
    a = simulate_mechanism(s2, canonical_protocol(s2), 20_000, 3, workers=2).to_dict()
    b = simulate_mechanism(s2, canonical_protocol(s2), 20_000, 3, workers=2).to_dict()
    assert a == b


def test_simulation_fixed_table_agrees_with_eopr(s2):
    a = simulate_mechanism(s2, canonical_protocol(s2), 5000, 9)
    b = simulate_mechanism(s2, tabulate(canonical_protocol(s2), s2), 5000, 9)
    assert a.mean_cost == pytest.approx(b.mean_cost)


def test_eopr_never_worse_than_status_quo_per_draw():
    for sp in eopr_suite(4):
        s = sp.scenario
        C = s.pref_lo + np.random.default_rng(0).random((300, s.J, s.I)) * (s.pref_hi - s.pref_lo)
        mu, cost = simulate_draws(s, sp.protocol, C)
        assert np.all(cost <= status_quo_cost(s) + 1e-9)
        assert np.all(np.einsum("nji,nji->nj", C, mu) <= np.einsum("nji,ji->nj", C, s.sigma) + 1e-9)


def test_structural_implies_bruteforce_on_tabulated():
    for sp in eopr_suite(6):
        s = sp.scenario
        assert verify_osp_structural(sp.protocol).verdict
        assert verify_osp_bruteforce(tabulate(sp.protocol, s), corner_grids(s)).verdict


def test_bilateral_from_choice_is_feasible(s2):
    m = build_bilateral(s2, 0, 1)
    assert m.feasible(s2)
    assert verify_osp_structural(bilateral_protocol(s2, m)).verdict
