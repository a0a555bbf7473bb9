"""Seeded scenario and protocol families used by the acceptance experiments."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Distribution, Scenario, make_scenario, s2_scenario
from .geometry import is_non_monotone, is_polarized_pair
from .mechanisms import Menu, TradingProtocol, essential_reduction, polarized_protocol

PROTOCOL_SEED = 20250
EOPR_SEED = 31
CHOICE_SEED = 4242
SANDWICH_SEED = 777


@dataclass
class SuiteProtocol:
    scenario: Scenario
    protocol: TradingProtocol
    label: str


def _random_direction(rng: np.random.Generator, I: int) -> np.ndarray:
    while True:
        d = rng.integers(-3, 4, size=I).astype(float)
        if is_non_monotone(d):
            return d


def _two_agent_scenario(rng: np.random.Generator, I: int, hi: float) -> Scenario:
    sigma = rng.integers(1, 4, size=(2, I)).astype(float)
    return make_scenario(
        supply=sigma.sum(axis=0),
        pi=rng.uniform(1.0, 3.0, size=(2, I)),
        sigma=sigma,
        pref_lo=np.ones((2, I)),
        pref_hi=np.full((2, I), hi),
    )


def _mirror_protocol(s: Scenario, dirs: list[np.ndarray], extra: dict | None = None) -> TradingProtocol:
    """Two-agent fixed-table protocol trading ``t_k d_k`` when both pick set ``k``.

    Agent 1's set ``k`` lies on ray ``d_k``; agent 2's on ``-d_k``. ``extra``
    maps ``(k1, k2)`` with ``k1 != k2`` to an additional trade vector, which
    bends the sets off their rays.
    """
    eta = s.sigma
    table_trades = {}
    for k, d in enumerate(dirs, start=1):
        ymax = min(_ymax(eta[0], d), _ymax(eta[1], -d))
        table_trades[(k, k)] = ymax * d
    table_trades.update(extra or {})
    K = len(dirs) + 1
    table = {}
    for k1 in range(K):
        for k2 in range(K):
            g = table_trades.get((k1, k2), np.zeros(s.I)) if k1 and k2 else np.zeros(s.I)
            x = eta.copy()
            x[0] += g
            x[1] -= g
            table[(k1, k2)] = x
    menus = tuple(Menu(j, "finite", eta[j], points=tuple(
        np.array([table[prof][j] for prof in table if prof[j] == k]) for k in range(K)))
        for j in range(2))
    return essential_reduction(TradingProtocol(eta.copy(), menus, table))


def _ymax(eta, d):
    neg = d < 0
    return float(np.min(eta[neg] / -d[neg])) if np.any(neg) else 1.0


def osp_protocol_suite(count: int = 50, seed: int = PROTOCOL_SEED, hi: float = 3.0) -> list[SuiteProtocol]:
    """Finite two-agent protocols; roughly half polarized, half not.

    Polarized members pair up directions whose ray menus are polarized for
    both agents; the rest use non-polarized direction pairs or bent sets.
    """
    rng = np.random.default_rng(seed)
    out = []
    for n in range(count):
        I = int(rng.choice([2, 3]))
        s = _two_agent_scenario(rng, I, hi)
        want_polarized = n % 2 == 0
        while True:
            dirs = [_random_direction(rng, I) for _ in range(int(rng.integers(1, I + 1)))]
            if len(dirs) < 2 and not want_polarized:
                dirs.append(_random_direction(rng, I))
            pol = all(is_polarized_pair(a, b)[0] and is_polarized_pair(-a, -b)[0]
                      for x, a in enumerate(dirs) for b in dirs[x + 1:])
            if pol == want_polarized or (not want_polarized and n % 4 == 3):
                break
        extra = None
        label = "polarized" if pol else "non-polarized"
        if not want_polarized and n % 4 == 3:
            # bend agent 1's first set with a second, non-collinear trade
            g = dirs[0] + _random_direction(rng, I)
            while not is_non_monotone(g) or abs(np.linalg.det(np.vstack([g, dirs[0]])[:, :2])) < 1e-9:
                g = dirs[0] + _random_direction(rng, I)
            steps = min(_ymax(s.sigma[0], g), _ymax(s.sigma[1], -g))
            other = 2 if len(dirs) > 1 else 0
            if other == 0:
                dirs.append(_random_direction(rng, I))
                other = 2
            extra = {(1, other): steps * g}
            label = "bent"
        out.append(SuiteProtocol(s, _mirror_protocol(s, dirs, extra).validate(s.supply), label))
    return out


def random_polarized_directions(rng: np.random.Generator, I: int, max_rays: int | None = None) -> list[np.ndarray]:
    """Rejection-sample up to ``max_rays`` (default ``I``) pairwise polarized directions."""
    want = int(rng.integers(1, (max_rays or I) + 1))
    dirs: list[np.ndarray] = []
    for _ in range(50 * want):
        if len(dirs) == want:
            break
        d = _random_direction(rng, I)
        if all(is_polarized_pair(d, e)[0] and not np.allclose(d / np.abs(d).max(), e / np.abs(e).max())
               for e in dirs):
            dirs.append(d)
    return dirs


def _random_scenario(rng: np.random.Generator, J: int, I: int, grid_points: int = 0) -> Scenario:
    sigma = rng.integers(1, 4, size=(J, I)).astype(float)
    lo = np.round(rng.uniform(0.5, 1.5, size=(J, I)), 2)
    hi = lo + np.round(rng.uniform(0.5, 2.0, size=(J, I)), 2)
    dists = None
    if grid_points:
        dists = []
        for j in range(J):
            pts = np.round(lo[j] + rng.random((grid_points, I)) * (hi[j] - lo[j]), 3)
            w = rng.integers(1, 5, size=grid_points).astype(float)
            dists.append(Distribution("grid", pts, w / w.sum()))
    return make_scenario(
        supply=sigma.sum(axis=0),
        pi=np.round(rng.uniform(1.0, 3.0, size=(J, I)), 2),
        sigma=sigma,
        pref_lo=lo,
        pref_hi=hi,
        distributions=dists,
    )


def eopr_suite(count: int = 10, seed: int = EOPR_SEED) -> list[SuiteProtocol]:
    """Random scenarios paired with random polarized-ray EOPR protocols."""
    rng = np.random.default_rng(seed)
    out = []
    for n in range(count):
        J, I = int(rng.integers(2, 4)), int(rng.integers(2, 4))
        s = _random_scenario(rng, J, I)
        # alternate agents between a direction set and its mirror so trades can match
        while True:
            base = random_polarized_directions(rng, I)
            if all(is_polarized_pair(-a, -b)[0] for x, a in enumerate(base) for b in base[x + 1:]):
                break
        dirs = [base if j % 2 == 0 else [-d for d in base] for j in range(J)]
        out.append(SuiteProtocol(s, polarized_protocol(s, dirs), f"eopr-{J}x{I}"))
    return out


@dataclass
class SuiteScenario:
    scenario: Scenario
    label: str


def choice_suite(count: int = 20, seed: int = CHOICE_SEED) -> list[SuiteScenario]:
    """Scenarios with a common preference cube and a full-support status quo.

    The mix cycles through generic draws, identical performance, a degenerate
    (single-point) cube, partially identical performance with three agents,
    and proportional performance vectors.
    """
    rng = np.random.default_rng(seed)
    kinds = ("generic", "identical", "degenerate", "partial-identical", "proportional")
    out = []
    for n in range(count):
        kind = kinds[n % len(kinds)]
        J = 3 if kind == "partial-identical" else int(rng.integers(2, 4))
        I = int(rng.integers(2, 4))
        sigma = rng.integers(1, 4, size=(J, I)).astype(float)
        lo = np.round(rng.uniform(0.5, 1.5, size=I), 2)
        hi = lo + np.round(rng.uniform(0.5, 2.0, size=I), 2)
        pi = np.round(rng.uniform(1.0, 3.0, size=(J, I)), 2)
        if kind == "identical":
            pi[:] = pi[0]
        elif kind == "degenerate":
            hi = lo.copy()
        elif kind == "partial-identical":
            pi[1] = pi[0]
        elif kind == "proportional":
            pi = pi[0] * np.round(rng.uniform(0.5, 2.0, size=(J, 1)), 2)
        s = make_scenario(supply=sigma.sum(axis=0), pi=pi, sigma=sigma,
                          pref_lo=np.tile(lo, (J, 1)), pref_hi=np.tile(hi, (J, 1)))
        out.append(SuiteScenario(s, kind))
    return out


def sandwich_suite(count: int = 6, seed: int = SANDWICH_SEED) -> list[SuiteScenario]:
    """The two-agent two-task example plus small scenarios with finite type grids."""
    rng = np.random.default_rng(seed)
    out = [SuiteScenario(s2_scenario(), "s2")]
    for n in range(count):
        J, I = int(rng.integers(2, 4)), 2 if n % 2 == 0 else 3
        out.append(SuiteScenario(_random_scenario(rng, J, I, grid_points=3), f"grid-{J}x{I}"))
    return out


def osp_candidates(s: Scenario, seed: int = 0, random_menus: int = 4) -> dict[str, TradingProtocol]:
    """Structurally OSP protocols worth simulating on ``s``: the status quo, an
    improving bilateral trade when one is found, two-ray menus for two tasks,
    and a few seeded mirrored polarized menus."""
    from .choice import find_bilateral
    from .mechanisms import bilateral_protocol, canonical_protocol, singleton_protocol

    out = {"status-quo": singleton_protocol(s)}
    m = find_bilateral(s, seed)
    if m is not None:
        out["bilateral"] = bilateral_protocol(s, m)
    if s.I == 2:
        out["two-ray"] = canonical_protocol(s)
    rng = np.random.default_rng(seed)
    for k in range(random_menus):
        base = random_polarized_directions(rng, s.I)
        if all(is_polarized_pair(-a, -b)[0] for x, a in enumerate(base) for b in base[x + 1:]):
            out[f"mirrored-{k}"] = polarized_protocol(s, [base if j % 2 == 0 else [-d for d in base]
                                                          for j in range(s.J)])
    return out
