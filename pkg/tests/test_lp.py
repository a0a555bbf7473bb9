import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import linprog

from osptrade.lp import LpProblem, farkas_alternative, solve_lp
from osptrade.mechanisms import eopr_lp


def test_one_variable_bound():
    sol = solve_lp(LpProblem(c=[1.0], A=[[1.0]], senses=[">="], b=[3.0], lb=None))
    assert sol.status == "optimal" and sol.x[0] == pytest.approx(3.0)


def test_contradictory_bounds_infeasible():
    sol = solve_lp(LpProblem(c=[1.0], A=[[1.0]], senses=["<="], b=[-1.0], lb=0.0, sense="max"))
    assert sol.status == "infeasible"


def test_unbounded_detected():
    assert solve_lp(LpProblem(c=[-1.0], lb=0.0)).status == "unbounded"


def test_s2_eopr_lp_objective():
    eta = np.array([[1.0, 1.0], [1.0, 1.0]])
    pi = np.array([[1.0, 2.0], [2.0, 1.0]])
    sets = [("ray", np.array([1.0, -1.0]), 1.0), ("ray", np.array([-1.0, 1.0]), 1.0)]
    mu, cost = eopr_lp(pi, eta, sets)
    assert cost == pytest.approx(4.0)
    assert np.allclose(mu, [[2, 0], [0, 2]])


def test_dimension_errors():
    with pytest.raises(ValueError):
        LpProblem(c=[1.0, 2.0], A=[[1.0]], senses=["<="], b=[1.0])
    with pytest.raises(ValueError):
        LpProblem(c=[1.0], A=[[1.0]], senses=["<"], b=[1.0])
    with pytest.raises(ValueError):
        farkas_alternative([1.0, 2.0], [1.0])


@pytest.mark.parametrize("u, v, alt", [
    ((1, -1), (-1, 1), 2),
    ((1, -1), (-2, 1), 1),
    ((1, 1), (1, 1), 2),
])
def test_farkas_examples(u, v, alt):
    cert = farkas_alternative(u, v)
    assert cert.alternative == alt
    assert cert.verify(np.array(u, float), np.array(v, float))


def test_farkas_example_witnesses():
    assert np.allclose(farkas_alternative((1, -1), (-1, 1)).witness, [1, 1])
    c = farkas_alternative((1, -1), (-2, 1)).witness
    assert np.allclose(c / c[0], [1, 2])
    assert np.allclose(farkas_alternative((1, 1), (1, 1)).witness, [1, 0])


vec = st.lists(st.integers(-4, 4), min_size=2, max_size=5)


@given(vec, vec)
def test_farkas_exactly_one_side_reverifies(u, v):
    n = min(len(u), len(v))
    u, v = np.array(u[:n], float), np.array(v[:n], float)
    cert = farkas_alternative(u, v)
    assert cert.verify(u, v)
    # the other side is impossible: a feasible c contradicts any multipliers
    if cert.alternative == 2:
        yu, yv = cert.witness
        c = np.ones(n)
        assert not (c @ u < 0 and c @ v <= 0 and yu * (c @ u) + yv * (c @ v) >= 0)


def test_strong_duality_random_lps(rng):
    """Primal optimum equals the dual optimum rebuilt from the reported multipliers."""
    checked = 0
    while checked < 500:
        m, n = rng.integers(1, 5), rng.integers(1, 5)
        A = rng.integers(-3, 4, size=(m, n)).astype(float)
        b = rng.integers(0, 6, size=m).astype(float)
        c = rng.integers(0, 5, size=n).astype(float)
        sol = solve_lp(LpProblem(c=c, A=A, senses=["<="] * m, b=b, lb=0.0, sense="max"))
        if sol.status != "optimal":
            continue
        # dual: min b.y s.t. A^T y >= c, y >= 0, solved independently
        dual = linprog(b, A_ub=-A.T, b_ub=-c, bounds=(0, None), method="highs")
        assert dual.status == 0
        assert sol.objective == pytest.approx(dual.fun, abs=1e-6)
        assert float(b @ sol.duals) == pytest.approx(sol.objective, abs=1e-6)
        checked += 1


def test_deterministic_solutions(rng):
    A = rng.random((6, 8))
    p = LpProblem(c=rng.random(8), A=A, senses=[">="] * 6, b=np.ones(6), lb=0.0)
    a, b = solve_lp(p), solve_lp(p)
    assert a.x.tobytes() == b.x.tobytes() and a.duals.tobytes() == b.duals.tobytes()
