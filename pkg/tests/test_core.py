import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from osptrade.core import (ExpectedAssignment, InfeasibleAssignment, ScenarioError, cube_corners,
                           decompose_expected, load_scenario, make_scenario, prob_linear_negative,
                           s2_scenario, sample_profiles, serialize_scenario, social_cost, status_quo_cost)
from oracles import box_prob_monte_carlo, uniform_prob_below

S2_TEXT = json.dumps({
    "tasks": [{"name": "A", "count": 2}, {"name": "B", "count": 2}],
    "agents": [
        {"name": "1", "pi": [1, 2], "sigma": [1, 1], "pref_lo": [1, 1], "pref_hi": [2, 2],
         "beta": 1, "distribution": {"kind": "uniform"}},
        {"name": "2", "pi": [2, 1], "sigma": [1, 1], "pref_lo": [1, 1], "pref_hi": [2, 2],
         "beta": 1, "distribution": {"kind": "uniform"}},
    ],
})


def _edit(path, value):
    raw = json.loads(S2_TEXT)
    obj = raw
    for key in path[:-1]:
        obj = obj[key]
    obj[path[-1]] = value
    return json.dumps(raw)


def test_load_s2_text():
    s = load_scenario(S2_TEXT)
    assert (s.I, s.J) == (2, 2)
    assert np.array_equal(s.supply, [2, 2])
    assert s == s2_scenario()


def test_status_quo_not_clearing_rejected():
    with pytest.raises(ScenarioError, match="status quo not market-clearing"):
        load_scenario(_edit(["agents", 0, "sigma"], [2, 1]))


def test_zero_cost_rejected():
    with pytest.raises(ScenarioError, match="costs must be strictly positive"):
        load_scenario(_edit(["agents", 0, "pref_lo"], [0, 1]))


@pytest.mark.parametrize("text, fragment", [
    ("{not json", "line 1"),
    (json.dumps({"tasks": []}), "agents"),
    (_edit(["agents", 1, "beta"], 0.5), "beta"),
    (_edit(["agents", 0, "distribution"], {"kind": "grid", "points": [[1, 1]], "weights": [0.7]}), "sum to 1"),
])
def test_malformed_scenarios(text, fragment):
    with pytest.raises(ScenarioError, match=fragment):
        load_scenario(text)


def test_round_trip(s2):
    assert load_scenario(serialize_scenario(s2)) == s2
    grid = s2.replace(distributions=tuple(
        s2.distributions[0].__class__("grid", np.array([[1.0, 1.0], [2.0, 1.5]]), np.array([0.25, 0.75]))
        for _ in range(2)))
    assert load_scenario(serialize_scenario(grid)) == grid


def test_status_quo_cost_examples(s2):
    assert status_quo_cost(s2) == 6.0
    assert status_quo_cost(s2.replace(pi=np.zeros((2, 2)))) == 0.0
    moved = s2.replace(sigma=np.array([[2.0, 0.0], [0.0, 2.0]]))
    assert status_quo_cost(moved) == 1 * 2 + 1 * 2


def test_status_quo_cost_matches_independent_sum(rng):
    for _ in range(20):
        J, I = rng.integers(1, 5, size=2) + 1
        sigma = rng.integers(0, 4, size=(J, I)).astype(float)
        sigma[0] += 1
        pi = rng.uniform(0, 5, size=(J, I))
        s = make_scenario(sigma.sum(axis=0), pi, sigma, np.ones((J, I)), np.full((J, I), 2.0))
        assert status_quo_cost(s) == pytest.approx(sum(pi[j, i] * sigma[j, i] for j in range(J) for i in range(I)))
        assert social_cost(s, sigma) == pytest.approx(status_quo_cost(s))


def test_decompose_integer_is_point_mass():
    lot = decompose_expected(np.array([[2.0, 0.0], [0.0, 2.0]]), [2, 2])
    assert len(lot) == 1 and lot.weights[0] == 1.0


def test_decompose_single_task_coin_flip():
    lot = decompose_expected(np.array([[0.5], [0.5]]), [1])
    assert len(lot) == 2
    assert np.allclose(sorted(lot.weights), [0.5, 0.5])
    assert sorted(tuple(z.ravel()) for z in lot.allocations) == [(0, 1), (1, 0)]


def test_decompose_rejects_non_clearing():
    with pytest.raises(InfeasibleAssignment):
        decompose_expected(np.array([[0.5], [0.4]]), [1])
    with pytest.raises(InfeasibleAssignment):
        ExpectedAssignment(np.array([[1.0, 1.0], [0.5, 1.0]]), True).check(np.array([2.0, 2.0]))


@st.composite
def clearing_assignments(draw):
    J = draw(st.integers(1, 4))
    I = draw(st.integers(1, 4))
    supply = np.array(draw(st.lists(st.integers(1, 4), min_size=I, max_size=I)), dtype=float)
    raw = np.array(draw(st.lists(st.floats(0.01, 1.0), min_size=J * I, max_size=J * I))).reshape(J, I)
    return raw / raw.sum(axis=0) * supply, supply


@given(clearing_assignments())
def test_decompose_mean_identity(case):
    x, supply = case
    lot = decompose_expected(x, supply)
    assert np.all(lot.weights > 0) and abs(lot.weights.sum() - 1) <= 1e-12
    for z in lot.allocations:
        assert np.issubdtype(z.dtype, np.integer) and np.all(z >= 0)
        assert np.array_equal(z.sum(axis=0), supply.astype(int))
    assert np.max(np.abs(lot.mean() - x)) <= 1e-9
    assert len(lot) <= x.size + 1


def test_decompose_random_suite(rng):
    for _ in range(1000):
        J, I = rng.integers(1, 5, size=2)
        supply = rng.integers(1, 5, size=I).astype(float)
        raw = rng.random((J, I)) + 1e-3
        x = raw / raw.sum(axis=0) * supply
        assert np.max(np.abs(decompose_expected(x, supply).mean() - x)) <= 1e-9


def test_sampling_prefix_property(s2):
    a = sample_profiles(s2, 50, np.random.default_rng(3))
    b = sample_profiles(s2, 10, np.random.default_rng(3))
    assert np.array_equal(a[:10], b)
    assert np.all(a >= 1) and np.all(a <= 2)


def test_cube_corners_degenerate_axis():
    assert cube_corners(np.array([1.0, 2.0]), np.array([3.0, 2.0])).tolist() == [[1.0, 2.0], [3.0, 2.0]]


@pytest.mark.parametrize("a", [(1, -1), (0.5, -1), (1, 1), (-1, -1), (1, 0), (2, -3), (-0.3, 1)])
def test_box_probability_two_dims_quadrature(a):
    got = prob_linear_negative(np.array([a], dtype=float), np.array([1.0, 1.0]), np.array([2.0, 2.0]))[0]
    assert got == pytest.approx(uniform_prob_below(a, (1, 1), (2, 2)), abs=1e-9)


def test_box_probability_higher_dims_monte_carlo(rng):
    lo = np.array([0.5, 1.0, 1.2, 0.8])
    hi = np.array([1.5, 3.0, 1.2, 2.0])  # one degenerate axis
    for _ in range(10):
        a = rng.integers(-3, 4, size=4).astype(float)
        got = prob_linear_negative(a[None], lo, hi)[0]
        assert got == pytest.approx(box_prob_monte_carlo(a, lo, hi), abs=4e-3)
