import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from osptrade.geometry import (Ray, check_polarized_menu, is_non_monotone, is_polarized_pair,
                               polarized_interval, ray_y_max, separating_direction)
from oracles import lattice_violation


def test_opposite_directions_polarized():
    ok, cert = is_polarized_pair((1, -1), (-1, 1))
    assert ok and np.allclose(cert.weights, [1, 1])
    assert cert.verify(np.array([1.0, -1.0]), np.array([-1.0, 1.0]))


def test_violation_witness():
    ok, cert = is_polarized_pair((1, -1), (-2, 1))
    assert not ok
    assert np.allclose(cert.c / cert.c[0], [1, 2])
    assert cert.verify(np.array([1.0, -1.0]), np.array([-2.0, 1.0]))


def test_singleton_exempt():
    assert is_polarized_pair((1, -1), (0, 0))[0]


def test_endpoint_mismatch_rejected():
    with pytest.raises(ValueError):
        is_polarized_pair(Ray(np.array([1.0, 1.0]), np.array([1.0, -1.0])),
                          Ray(np.array([2.0, 1.0]), np.array([-1.0, 1.0])))


def test_canonical_menu_passes():
    assert check_polarized_menu([(0, 0), (1, -1), (-1, 1)]).verdict


def test_shared_negative_coordinate_fails():
    rep = check_polarized_menu([(1, -1), (2, -1)])
    assert not rep.verdict
    assert not rep.disjoint_negatives and rep.overlapping_pair == (0, 1)


def test_cardinality_clause():
    rep = check_polarized_menu([(1, -1), (-1, 1), (2, -1)])
    assert not rep.verdict and not rep.cardinality_ok
    # in two dimensions a third ray always repeats a sign pattern, so polarization fails too
    assert rep.failed_clause == "polarization"


def test_y_max():
    assert ray_y_max(np.array([1.0, 2.0]), np.array([1.0, -0.5])) == pytest.approx(4.0)
    assert Ray(np.array([1.0, 1.0]), np.array([-1.0, 2.0])).y_max() == pytest.approx(1.0)


@pytest.mark.parametrize("c1, c2, delta, expected", [
    ((1, 2), (2, 1), (-1, 1), (1, -1)),
    ((2, 1), (1, 2), (1, -1), (-1, 1)),
])
def test_separating_direction_examples(c1, c2, delta, expected):
    g = separating_direction(c1, c2, delta)
    assert np.allclose(g, expected)


def test_separating_direction_identical_points():
    assert separating_direction((1, 2), (1, 2), (1, -1)) is None
    with pytest.raises(ValueError):
        separating_direction((1, 2), (2, 1), (0, 0))


nonmono = st.lists(st.integers(-3, 3), min_size=2, max_size=4).filter(
    lambda v: min(v) < 0 < max(v))


@given(nonmono, nonmono)
def test_polarization_symmetric(a, b):
    n = min(len(a), len(b))
    a, b = a[:n], b[:n]
    if not (is_non_monotone(np.array(a)) and is_non_monotone(np.array(b))):
        return
    assert is_polarized_pair(a, b)[0] == is_polarized_pair(b, a)[0]


@given(nonmono, nonmono)
def test_fast_interval_test_matches_farkas(a, b):
    n = min(len(a), len(b))
    a, b = np.array(a[:n], float), np.array(b[:n], float)
    if not (is_non_monotone(a) and is_non_monotone(b)):
        return
    assert bool(polarized_interval(a, b)) == is_polarized_pair(a, b)[0]


@given(st.lists(st.floats(0.1, 5), min_size=3, max_size=3), st.lists(st.floats(0.1, 5), min_size=3, max_size=3),
       st.lists(st.floats(-2, 2), min_size=3, max_size=3))
def test_separating_direction_margins(c1, c2, delta):
    if not np.any(np.abs(delta) > 1e-3):
        return
    g = separating_direction(c1, c2, delta)
    if g is not None:
        assert np.max(np.abs(g)) == pytest.approx(1.0)
        assert -(np.dot(delta, g)) >= 1e-8 and -(np.dot(c1, g)) >= 1e-8 and np.dot(c2, g) >= 1e-8


def test_lattice_oracle_on_sample(rng):
    for _ in range(100):
        I = int(rng.integers(2, 5))
        while True:
            a, b = rng.integers(-3, 4, size=(2, I))
            if is_non_monotone(a) and is_non_monotone(b):
                break
        assert is_polarized_pair(a, b)[0] == (lattice_violation(a, b) is None)


def test_unique_negative_ray(rng):
    """With a polarized menu and a strictly positive cost, at most one ray is strictly cheaper."""
    done = 0
    while done < 1000:
        I = int(rng.integers(2, 5))
        dirs = []
        for _ in range(30):
            d = rng.integers(-3, 4, size=I).astype(float)
            if is_non_monotone(d) and all(polarized_interval(d, e) for e in dirs):
                dirs.append(d)
            if len(dirs) == I:
                break
        c = rng.uniform(0.01, 5, size=I)
        assert np.sum(np.array(dirs) @ c < 0) <= 1
        done += 1
