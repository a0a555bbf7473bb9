"""Exact Bayesian incentive-compatible benchmark on finite type grids.

The designer's full program (status-quo participation, interim incentive
compatibility and ex-post market clearing) becomes a finite LP once each
agent has finitely many types. Continuous cubes are discretized at their
corners (plus the center by default), so the value for such scenarios is a
grid proxy rather than the continuous optimum.
"""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .core import Scenario, cube_corners, status_quo_cost
from .lp import LpProblem, NumericalFailure, solve_lp

MAX_VARIABLES = 100_000
FEAS_TOL = 1e-7


@dataclass(frozen=True, eq=False)
class FiniteTypeModel:
    """Per-agent finite type lists with probabilities."""

    types: tuple[np.ndarray, ...]
    probs: tuple[np.ndarray, ...]
    label: str = "grid"

    def __post_init__(self):
        for t, p in zip(self.types, self.probs):
            if len(t) != len(p) or np.any(p <= 0) or abs(p.sum() - 1) > 1e-9:
                raise ValueError("type probabilities must be positive and sum to one")

    @property
    def counts(self) -> tuple[int, ...]:
        return tuple(len(t) for t in self.types)

    @property
    def n_profiles(self) -> int:
        return int(np.prod(self.counts))

    def profiles(self) -> np.ndarray:
        """Type-index tuples in lexicographic order, shape ``(P, J)``."""
        return np.array(list(itertools.product(*(range(n) for n in self.counts))), dtype=int).reshape(-1, len(self.counts))

    def profile_probs(self) -> np.ndarray:
        idx = self.profiles()
        return np.prod([self.probs[j][idx[:, j]] for j in range(len(self.counts))], axis=0)


def type_grid(s: Scenario, grid: str = "corners+center") -> FiniteTypeModel:
    """Finite types for each agent: its own grid distribution, or cube points."""
    types, probs = [], []
    continuous = False
    for j, d in enumerate(s.distributions):
        if d.kind == "grid":
            types.append(np.asarray(d.points, dtype=float))
            probs.append(np.asarray(d.weights, dtype=float))
            continue
        continuous = True
        pts = cube_corners(s.pref_lo[j], s.pref_hi[j])
        if grid == "corners+center":
            center = 0.5 * (s.pref_lo[j] + s.pref_hi[j])
            if not np.any(np.all(pts == center, axis=1)):
                pts = np.vstack([pts, center])
        elif grid != "corners":
            raise ValueError(f"unknown grid {grid!r}")
        types.append(pts)
        probs.append(np.full(len(pts), 1.0 / len(pts)))
    label = "grid lower-fidelity proxy" if continuous else "exact"
    return FiniteTypeModel(tuple(types), tuple(probs), label)


@dataclass
class BicSolution:
    value: float
    table: np.ndarray  # (P, J, I)
    model: FiniteTypeModel
    binding_sq: list = field(default_factory=list)
    binding_ic: list = field(default_factory=list)

    def is_constant(self, tol: float = 1e-7) -> bool:
        return bool(np.all(np.abs(self.table - self.table[0]) <= tol))

    def to_dict(self) -> dict:
        return {"value": self.value, "binding_sq": self.binding_sq, "binding_ic": self.binding_ic,
                "profiles": self.model.n_profiles, "label": self.model.label}


class _Index:
    def __init__(self, model: FiniteTypeModel, I: int):
        self.model = model
        self.J = len(model.counts)
        self.I = I
        self.prof = model.profiles()
        self.pp = model.profile_probs()

    def var(self, p, j, i):
        return (p * self.J + j) * self.I + i

    def interim(self, j: int, t: int):
        """Profiles with agent ``j`` at type ``t`` and their conditional weights."""
        rows = np.flatnonzero(self.prof[:, j] == t)
        return rows, self.pp[rows] / self.model.probs[j][t]


def _interim_row(ix: _Index, j: int, t: int, c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column indices and coefficients of ``c . E_-j[m_j(.|t, .)]``."""
    rows, w = ix.interim(j, t)
    cols = np.array([ix.var(p, j, i) for p in rows for i in range(ix.I)])
    vals = np.array([wp * c[i] for wp in w for i in range(ix.I)])
    return cols, vals


def build_bic_lp(s: Scenario, model: FiniteTypeModel, sq_domain: str = "types") -> tuple[LpProblem, list]:
    """Assemble the LP; ``sq_domain="cube"`` also imposes participation at every
    cube corner for each reported type's interim bundle (exact when an agent
    has a single type, conservative otherwise)."""
    J, I = s.J, s.I
    if sq_domain not in ("types", "cube"):
        raise ValueError(f"unknown sq_domain {sq_domain!r}")
    if len(model.counts) != J:
        raise ValueError("type model must list types for every agent")
    for j, t in enumerate(model.types):
        if np.any(t < s.pref_lo[j] - 1e-12) or np.any(t > s.pref_hi[j] + 1e-12):
            raise ValueError(f"agent {j}: grid types leave the preference cube")
    ix = _Index(model, I)
    P = model.n_profiles
    n_var = P * J * I
    if n_var > MAX_VARIABLES:
        raise ValueError(f"type grid too large: {n_var} variables exceed {MAX_VARIABLES}")
    obj = (ix.pp[:, None, None] * s.pi[None, :, :]).ravel()
    r_idx, c_idx, vals, senses, rhs, tags = [], [], [], [], [], []

    def add(cols, coefs, sense, b, tag):
        row = len(rhs)
        r_idx.extend([row] * len(cols))
        c_idx.extend(cols)
        vals.extend(coefs)
        senses.append(sense)
        rhs.append(b)
        tags.append(tag)

    for j in range(J):
        types = model.types[j]
        for t, c in enumerate(types):
            cols, coefs = _interim_row(ix, j, t, c)
            add(cols, coefs, "<=", s.beta[j] * c @ s.sigma[j], ("SQ", j, t))
            if sq_domain == "cube":
                for corner in cube_corners(s.pref_lo[j], s.pref_hi[j]):
                    ccols, ccoefs = _interim_row(ix, j, t, corner)
                    add(ccols, ccoefs, "<=", s.beta[j] * corner @ s.sigma[j], ("SQC", j, t))
            for t2 in range(len(types)):
                if t2 == t:
                    continue
                cols2, coefs2 = _interim_row(ix, j, t2, c)
                add(np.concatenate([cols, cols2]), np.concatenate([coefs, -coefs2]), "<=", 0.0, ("IC", j, t, t2))
    for p in range(P):
        for i in range(I):
            add([ix.var(p, j, i) for j in range(J)], [1.0] * J, "=", s.supply[i], ("MC", p, i))
    A = sp.csr_matrix((vals, (r_idx, c_idx)), shape=(len(rhs), n_var))
    return LpProblem(c=obj, A=A, senses=senses, b=np.array(rhs), lb=0.0), tags


def solve_bic_lp(s: Scenario, model: FiniteTypeModel | None = None,
                 sq_domain: str = "types") -> BicSolution:
    """Optimal BIC mechanism on the finite type model (default corners+center)."""
    model = type_grid(s) if model is None else model
    lp, tags = build_bic_lp(s, model, sq_domain)
    sol = solve_lp(lp)
    if sol.status != "optimal":
        # the status quo is always feasible, so anything else is a solver fault
        raise NumericalFailure(f"BIC LP returned {sol.status}")
    table = sol.x.reshape(model.n_profiles, s.J, s.I)
    slack = lp.b - lp.A @ sol.x
    binding_sq = [list(t[1:]) for t, sl in zip(tags, slack) if t[0] == "SQ" and abs(sl) <= FEAS_TOL]
    binding_ic = [list(t[1:]) for t, sl in zip(tags, slack) if t[0] == "IC" and abs(sl) <= FEAS_TOL]
    out = BicSolution(float(sol.objective), table, model, binding_sq, binding_ic)
    violations = check_bic_table(s, out)
    if violations:
        raise NumericalFailure(f"BIC solution fails re-substitution: {violations[:3]}")
    return out


def check_bic_table(s: Scenario, sol: BicSolution, tol: float = FEAS_TOL) -> list[str]:
    """Re-check SQ, IC and MC by direct substitution; returns violation messages."""
    model = sol.model
    prof = model.profiles()
    pp = model.profile_probs()
    out = []
    if np.any(sol.table < -tol):
        out.append("negative assignment")
    mc = np.abs(sol.table.sum(axis=1) - s.supply[None, :])
    if np.any(mc > tol):
        out.append(f"MC residual {mc.max():.2e}")
    for j in range(s.J):
        # interim expected bundle for each reported type
        interim = np.zeros((model.counts[j], s.I))
        for t in range(model.counts[j]):
            rows = prof[:, j] == t
            interim[t] = (pp[rows, None] * sol.table[rows, j]).sum(axis=0) / model.probs[j][t]
        for t, c in enumerate(model.types[j]):
            load = interim @ c
            scale = 1.0 + abs(load[t])
            if load[t] > s.beta[j] * c @ s.sigma[j] + tol * scale:
                out.append(f"SQ agent {j} type {t}")
            if np.any(load[t] > load + tol * scale):
                out.append(f"IC agent {j} type {t}")
    return out


def full_information_lp(s: Scenario) -> float:
    """Cost-minimizing market-clearing allocation with known types (no SQ or IC)."""
    J, I = s.J, s.I
    A = np.zeros((I, J * I))
    for i in range(I):
        A[i, i::I] = 1.0
    sol = solve_lp(LpProblem(c=s.pi.ravel(), A=A, senses=["="] * I, b=s.supply, lb=0.0))
    if sol.status != "optimal":
        raise NumericalFailure(f"full-information LP returned {sol.status}")
    return float(sol.objective)


@dataclass
class ChoiceValueReport:
    bic_value: float
    sq_cost: float
    choice_improves: bool
    label: str
    solution: BicSolution

    def to_dict(self) -> dict:
        return {"bic_value": self.bic_value, "sq_cost": self.sq_cost,
                "choice_improves": self.choice_improves, "label": self.label,
                "binding_sq": self.solution.binding_sq, "binding_ic": self.solution.binding_ic}


def choice_value_report(s: Scenario, model: FiniteTypeModel | None = None,
                        tol: float = 1e-7, sq_domain: str = "types") -> ChoiceValueReport:
    sol = solve_bic_lp(s, model, sq_domain)
    sq = status_quo_cost(s)
    improves = sol.value < sq - tol and not sol.is_constant(tol)
    return ChoiceValueReport(sol.value, sq, bool(improves), sol.model.label, sol)


def table_csv(sol: BicSolution) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["profile", "agent", "task", "value"])
    P, J, I = sol.table.shape
    for p in range(P):
        for j in range(J):
            for i in range(I):
                w.writerow([p, j, i, repr(float(sol.table[p, j, i]))])
    return buf.getvalue()
