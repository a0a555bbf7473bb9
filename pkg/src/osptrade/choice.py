"""When does letting agents choose beat the status quo?

Scenario-level condition checks, a constructive bilateral improvement and the
geometry of constant (non-choice) mechanisms.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .core import Scenario, cube_corners, prob_linear_negative, sample_types, status_quo_cost
from .geometry import separating_direction
from .lp import LpProblem, NumericalFailure, solve_lp
from .mechanisms import BilateralMechanism

GAMMA_SHRINK = 0.999
PERTURB = 0.25
FALLBACK_ATTEMPTS = 100


class HypothesisError(ValueError):
    """A precondition on the scenario does not hold."""


@dataclass
class ChoiceDiagnostics:
    common_support: bool
    status_quo_full_support: bool
    nondegenerate_prefs: bool
    identical_performance: bool
    support_dimension: int
    c_hat: np.ndarray
    supports_intersect: bool
    unit_beta: bool

    @property
    def hypotheses(self) -> bool:
        """Common bounded support and a full-support status quo."""
        return self.common_support and self.status_quo_full_support

    @property
    def condition_i(self) -> bool:
        return self.nondegenerate_prefs and not self.identical_performance

    @property
    def optimality_hypotheses(self) -> bool:
        return self.hypotheses and self.unit_beta and self.support_dimension == len(self.c_hat)

    def to_dict(self) -> dict:
        return {
            "common_support": self.common_support,
            "status_quo_full_support": self.status_quo_full_support,
            "nondegenerate_prefs": self.nondegenerate_prefs,
            "identical_performance": self.identical_performance,
            "support_dimension": self.support_dimension,
            "c_hat": self.c_hat.tolist(),
            "supports_intersect": self.supports_intersect,
            "hypotheses": self.hypotheses,
            "condition_i": self.condition_i,
        }


def _intersection(s: Scenario, agents) -> tuple[np.ndarray, np.ndarray]:
    return s.pref_lo[list(agents)].max(axis=0), s.pref_hi[list(agents)].min(axis=0)


def _nondegenerate(s: Scenario, j: int) -> bool:
    d = s.distributions[j]
    if d.kind == "grid":
        support = d.points[d.weights > 0]
        return bool(np.any(np.ptp(support, axis=0) > 0))
    return bool(np.any(s.pref_hi[j] > s.pref_lo[j]))


def check_choice_conditions(s: Scenario) -> ChoiceDiagnostics:
    lo, hi = _intersection(s, range(s.J))
    common = bool(np.all(s.pref_lo == s.pref_lo[0]) and np.all(s.pref_hi == s.pref_hi[0]))
    intersects = bool(np.all(lo <= hi))
    return ChoiceDiagnostics(
        common_support=common,
        status_quo_full_support=bool(np.all(s.sigma > 0)),
        nondegenerate_prefs=all(_nondegenerate(s, j) for j in range(s.J)),
        identical_performance=bool(np.all(s.pi == s.pi[0])),
        support_dimension=int(np.sum(hi > lo)) if intersects else 0,
        c_hat=lo,
        supports_intersect=intersects,
        unit_beta=bool(np.all(s.beta == 1)),
    )


# ---------------------------------------------------------------------------
# Bilateral trade


def _pairwise_independent(*vecs, tol: float = 1e-9) -> bool:
    for a, b in itertools.combinations(vecs, 2):
        if np.linalg.matrix_rank(np.vstack([a, b]), tol=tol * (1 + np.abs(np.concatenate([a, b])).max())) < 2:
            return False
    return True


def _candidate_points(lo: np.ndarray, hi: np.ndarray, delta: np.ndarray, seed: int):
    """Deterministic symmetric perturbation of the center first, then seeded draws."""
    center = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    axes = np.argsort(-half, kind="stable")[:2]
    p = np.zeros_like(center)
    p[axes[0]] = PERTURB * half[axes[0]]
    if half[axes[1]] > 0:
        p[axes[1]] = -PERTURB * half[axes[1]]
    yield center + p, center - p
    rng = np.random.default_rng(seed)
    for _ in range(FALLBACK_ATTEMPTS):
        yield lo + rng.random(lo.size) * (hi - lo), lo + rng.random(lo.size) * (hi - lo)


def build_bilateral(s: Scenario, j1: int, j2: int, seed: int = 0) -> BilateralMechanism | None:
    """Construct an improving bilateral trade between ``j1`` and ``j2``, or ``None``.

    ``None`` means the sufficient conditions fail for this pair: equal
    performance, an empty or single-point preference overlap, or a zero
    status-quo entry for either agent.
    """
    if j1 == j2:
        raise ValueError("a bilateral trade needs two distinct agents")
    delta = s.pi[j1] - s.pi[j2]
    lo, hi = _intersection(s, (j1, j2))
    if not np.any(delta) or np.any(lo > hi) or not np.any(hi > lo):
        return None
    if np.any(s.sigma[j1] <= 0) or np.any(s.sigma[j2] <= 0):
        return None
    for c1, c2 in _candidate_points(lo, hi, delta, seed):
        if not _pairwise_independent(c1, c2, delta):
            continue
        for a, b in ((c1, c2), (c2, c1)):
            g = separating_direction(a, b, delta)
            if g is not None:
                return BilateralMechanism(j1, j2, _scale_gamma(g, s.sigma[j1], s.sigma[j2]))
    return None


def _scale_gamma(g: np.ndarray, sig1: np.ndarray, sig2: np.ndarray) -> np.ndarray:
    # j1 receives +g and j2 gives it up; the tightest coordinate fixes the scale
    limits = [sig1[i] / -g[i] for i in range(g.size) if g[i] < 0]
    limits += [sig2[i] / g[i] for i in range(g.size) if g[i] > 0]
    return GAMMA_SHRINK * min(limits) * g


def find_bilateral(s: Scenario, seed: int = 0) -> BilateralMechanism | None:
    """First agent pair admitting an improving bilateral trade."""
    for j1, j2 in itertools.combinations(range(s.J), 2):
        m = build_bilateral(s, j1, j2, seed)
        if m is not None:
            return m
    return None


@dataclass
class BilateralReport:
    feasible: bool
    conditions: tuple[bool, bool, bool, bool]
    improving: bool
    trade_probabilities: tuple[float, float]
    expected_gain: float
    expected_cost: float
    mc_probabilities: tuple[float, float] | None = None
    mc_stderr: tuple[float, float] | None = None

    def to_dict(self) -> dict:
        return {
            "feasible": self.feasible, "conditions": list(self.conditions),
            "improving": self.improving,
            "trade_probabilities": list(self.trade_probabilities),
            "expected_gain": self.expected_gain, "expected_cost": self.expected_cost,
            "mc_probabilities": None if self.mc_probabilities is None else list(self.mc_probabilities),
            "mc_stderr": None if self.mc_stderr is None else list(self.mc_stderr),
        }


def _prob_nonpositive(s: Scenario, j: int, g: np.ndarray) -> float:
    """``P(g . c_j <= 0)``."""
    d = s.distributions[j]
    if d.kind == "grid":
        return float(d.weights[d.points @ g <= 0].sum())
    return float(1.0 - prob_linear_negative(-g, s.pref_lo[j], s.pref_hi[j]))


def verify_bilateral(m: BilateralMechanism, s: Scenario, samples: int | None = None,
                     seed: int = 0) -> BilateralReport:
    """Check the four improvement conditions and price the mechanism.

    Agent ``j1`` opts in when ``gamma . c <= 0``, agent ``j2`` when
    ``gamma . c >= 0``; trade happens when both do. Probabilities are exact;
    with ``samples`` a Monte-Carlo estimate is reported alongside.
    """
    g = np.asarray(m.gamma, dtype=float)
    delta = s.pi[m.j1] - s.pi[m.j2]
    cond_i = m.feasible(s)
    cond_ii = bool(delta @ g < 0)
    lo1, hi1 = s.pref_lo[m.j1], s.pref_hi[m.j1]
    lo2, hi2 = s.pref_lo[m.j2], s.pref_hi[m.j2]
    cond_iii = bool(np.sum(np.minimum(g * lo1, g * hi1)) < 0)
    cond_iv = bool(np.sum(np.maximum(g * lo2, g * hi2)) > 0)
    p1 = _prob_nonpositive(s, m.j1, g)
    p2 = _prob_nonpositive(s, m.j2, -g)
    gain = p1 * p2 * float(delta @ g)
    mc = err = None
    if samples:
        rng = np.random.default_rng(seed)
        a = sample_types(s, m.j1, samples, rng) @ g <= 0
        b = sample_types(s, m.j2, samples, rng) @ g >= 0
        mc = (float(a.mean()), float(b.mean()))
        err = tuple(float(np.sqrt(q * (1 - q) / samples)) for q in mc)
    improving = cond_i and cond_ii and cond_iii and cond_iv
    return BilateralReport(cond_i, (cond_i, cond_ii, cond_iii, cond_iv), improving,
                           (p1, p2), gain, status_quo_cost(s) + gain, mc, err)


# ---------------------------------------------------------------------------
# Constant mechanisms


@dataclass
class ConstantSlack:
    lhs: float
    rhs: float
    max_deviation: float
    maximizer: np.ndarray
    inequality_holds: bool

    def to_dict(self) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "max_deviation": self.max_deviation,
                "maximizer": self.maximizer.tolist(), "inequality_holds": self.inequality_holds}


def lemma_terms(s: Scenario, m: np.ndarray) -> tuple[float, float]:
    """Both sides of the necessary inequality for a constant mechanism ``m``."""
    c_hat = s.pref_lo.max(axis=0)
    excess = np.maximum(m - s.beta[:, None] * s.sigma, 0.0)
    lhs = float(np.sum((s.pref_hi - c_hat) * excess))
    rhs = float(np.sum(c_hat * (s.beta[:, None] - 1.0) * s.sigma))
    return lhs, rhs


def constant_feasibility_lp(s: Scenario, objective: np.ndarray, sense: str = "max") -> np.ndarray | None:
    """Optimize a linear objective over constant mechanisms meeting SQ and MC.

    SQ is imposed at every corner of each agent's cube, which is exact
    because workloads are linear in the cost vector.
    """
    J, I = s.J, s.I
    rows, senses, rhs = [], [], []
    for i in range(I):
        r = np.zeros((J, I))
        r[:, i] = 1.0
        rows.append(r.ravel())
        senses.append("=")
        rhs.append(s.supply[i])
    for j in range(J):
        for c in cube_corners(s.pref_lo[j], s.pref_hi[j]):
            r = np.zeros((J, I))
            r[j] = c
            rows.append(r.ravel())
            senses.append("<=")
            rhs.append(s.beta[j] * c @ s.sigma[j])
    sol = solve_lp(LpProblem(c=objective.ravel(), A=np.array(rows), senses=senses, b=rhs,
                             lb=0.0, sense=sense))
    if sol.status != "optimal":
        raise NumericalFailure(f"constant-mechanism LP returned {sol.status}")
    return sol.x.reshape(J, I)


def constant_mechanism_slack(s: Scenario, tol: float = 1e-7) -> ConstantSlack:
    """Largest departure from the status quo among constant feasible mechanisms.

    Maximizing an L1 distance is not a linear program, so each coordinate is
    pushed up and down separately (``2 J I`` LPs); the feasible set is convex
    and contains the status quo, so the result is zero exactly when the status
    quo is the only constant feasible mechanism. The reported deviation is the
    L1 distance at the best coordinate optimizer.
    """
    if not check_choice_conditions(s).supports_intersect:
        raise HypothesisError("preference supports do not intersect")
    best, best_m = 0.0, s.sigma.copy()
    all_hold = True
    for j, i, sign in itertools.product(range(s.J), range(s.I), (1.0, -1.0)):
        obj = np.zeros((s.J, s.I))
        obj[j, i] = sign
        m = constant_feasibility_lp(s, obj)
        lhs, rhs = lemma_terms(s, m)
        all_hold &= lhs <= rhs + tol
        dev = float(np.abs(m - s.sigma).sum())
        if dev > best:
            best, best_m = dev, m
    lhs, rhs = lemma_terms(s, best_m)
    return ConstantSlack(lhs, rhs, best if best > tol else 0.0, best_m, bool(all_hold))


@dataclass
class ChoiceReport:
    conditions: ChoiceDiagnostics
    bilateral: BilateralMechanism | None
    bilateral_report: BilateralReport | None
    slack: ConstantSlack | None

    def to_dict(self) -> dict:
        bil = None
        if self.bilateral is not None:
            bil = {"j1": self.bilateral.j1, "j2": self.bilateral.j2,
                   "gamma": self.bilateral.gamma.tolist(),
                   "gain": self.bilateral_report.expected_gain,
                   "verification": self.bilateral_report.to_dict()}
        return {"conditions": self.conditions.to_dict(), "bilateral": bil,
                "corollary1_deviation": None if self.slack is None else self.slack.max_deviation,
                "constant_slack": None if self.slack is None else self.slack.to_dict()}


def choice_report(s: Scenario, seed: int = 0, samples: int | None = None) -> ChoiceReport:
    diag = check_choice_conditions(s)
    m = find_bilateral(s, seed)
    rep = verify_bilateral(m, s, samples, seed) if m is not None else None
    slack = constant_mechanism_slack(s) if diag.supports_intersect else None
    return ChoiceReport(diag, m, rep, slack)
