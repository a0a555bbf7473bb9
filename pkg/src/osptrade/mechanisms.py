"""Trading protocols, myopic strategies, the EOPR selection rule and OSP checks."""

from __future__ import annotations

import itertools
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import ExpectedAssignment, Scenario, cube_corners, sample_profiles, status_quo_cost
from .geometry import check_polarized_menu, is_non_monotone, ray_y_max
from .lp import LpProblem, NumericalFailure, solve_lp

log = logging.getLogger(__name__)

NEG_TOL = 1e-12

KINDS = ("polarized-rays", "remedial", "singleton", "finite")


class ProtocolError(ValueError):
    """Malformed protocol or an operation that needs a different selection kind."""


@dataclass(frozen=True, eq=False)
class Menu:
    """One agent's trading sets.

    ``polarized-rays``: action ``k`` is the ray along ``rays[k]``; ``rays[0]``
    is the zero direction (the singleton ``{eta}``).
    ``remedial``: action 0 is ``{eta}``, action 1 is ``{x : 0 <= x <= eta}``.
    ``singleton``: one action, ``{eta}``.
    ``finite``: action ``k`` is the finite point set ``points[k]``.
    """

    agent: int
    kind: str
    endpoint: np.ndarray
    rays: tuple[np.ndarray, ...] = ()
    points: tuple[np.ndarray, ...] = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ProtocolError(f"unknown menu kind {self.kind!r}")
        if self.kind == "polarized-rays" and (not self.rays or np.any(self.rays[0])):
            raise ProtocolError("a polarized-rays menu starts with the zero ray")

    @property
    def n_actions(self) -> int:
        if self.kind == "polarized-rays":
            return len(self.rays)
        if self.kind == "remedial":
            return 2
        if self.kind == "singleton":
            return 1
        return len(self.points)

    def y_max(self, k: int) -> float:
        return ray_y_max(self.endpoint, self.rays[k])

    def contains(self, k: int, x: np.ndarray, tol: float = 1e-9) -> bool:
        """Is ``x`` in trading set ``k``?"""
        eta = self.endpoint
        if np.any(x < -tol):
            return False
        if self.kind == "singleton" or (self.kind in ("remedial", "polarized-rays") and k == 0):
            return bool(np.all(np.abs(x - eta) <= tol))
        if self.kind == "remedial":
            return bool(np.all(x <= eta + tol))
        if self.kind == "polarized-rays":
            kappa = self.rays[k]
            d = x - eta
            y = float(d @ kappa) / float(kappa @ kappa)
            return y >= -tol and bool(np.all(np.abs(d - y * kappa) <= tol * (1 + abs(y))))
        return bool(np.any(np.all(np.abs(self.points[k] - x) <= tol, axis=1)))

    def to_dict(self) -> dict:
        out = {"agent": self.agent, "kind": self.kind}
        if self.kind == "polarized-rays":
            out["rays"] = [r.tolist() for r in self.rays]
        if self.kind == "finite":
            out["points"] = [p.tolist() for p in self.points]
        return out

    def same_as(self, other: "Menu") -> bool:
        if (self.agent, self.kind) != (other.agent, other.kind):
            return False
        if not np.array_equal(self.endpoint, other.endpoint):
            return False
        pairs = [(self.rays, other.rays), (self.points, other.points)]
        return all(len(a) == len(b) and all(np.array_equal(u, v) for u, v in zip(a, b))
                   for a, b in pairs)


def ray_menu(agent: int, eta, directions: Sequence) -> Menu:
    """Polarized-rays menu with the singleton prepended."""
    eta = np.asarray(eta, dtype=float)
    rays = [np.zeros_like(eta)] + [np.asarray(d, dtype=float) for d in directions]
    return Menu(agent, "polarized-rays", eta, tuple(rays))


def remedial_menu(agent: int, eta) -> Menu:
    return Menu(agent, "remedial", np.asarray(eta, dtype=float))


def singleton_menu(agent: int, eta) -> Menu:
    return Menu(agent, "singleton", np.asarray(eta, dtype=float))


@dataclass(frozen=True, eq=False)
class TradingProtocol:
    """Endowment, one menu per agent and a selection rule.

    ``selection`` is ``"eopr"`` or a fixed table mapping action profiles
    (tuples of per-agent action indices) to ``(J, I)`` expected assignments.
    """

    endowment: np.ndarray
    menus: tuple[Menu, ...]
    selection: str | dict = "eopr"

    @property
    def is_eopr(self) -> bool:
        return isinstance(self.selection, str) and self.selection == "eopr"

    def action_profiles(self):
        return itertools.product(*(range(m.n_actions) for m in self.menus))

    def validate(self, supply: np.ndarray | None = None, tol: float = 1e-9) -> "TradingProtocol":
        if len(self.menus) != self.endowment.shape[0]:
            raise ProtocolError("one menu per agent is required")
        for j, m in enumerate(self.menus):
            if m.agent != j:
                raise ProtocolError(f"menu {j} is labelled for agent {m.agent}")
            if not np.allclose(m.endpoint, self.endowment[j], atol=tol):
                raise ProtocolError(f"agent {j}: menu endpoint differs from endowment")
            for k in range(m.n_actions):
                if not m.contains(k, self.endowment[j], tol):
                    raise ProtocolError(f"agent {j}: endowment missing from trading set {k}")
        if supply is not None and np.any(np.abs(self.endowment.sum(axis=0) - supply) > tol):
            raise ProtocolError("endowment is not market-clearing")
        if not self.is_eopr:
            for prof in self.action_profiles():
                if prof not in self.selection:
                    raise ProtocolError(f"selection table has no entry for profile {prof}")
                x = self.selection[prof]
                if supply is not None and np.any(np.abs(x.sum(axis=0) - supply) > tol):
                    raise ProtocolError(f"table entry {prof} is not market-clearing")
                for j, m in enumerate(self.menus):
                    if not m.contains(prof[j], x[j], 1e-7):
                        raise ProtocolError(f"table entry {prof} leaves agent {j}'s chosen set")
        return self

    def same_as(self, other: "TradingProtocol") -> bool:
        if not np.array_equal(self.endowment, other.endowment) or len(self.menus) != len(other.menus):
            return False
        if not all(a.same_as(b) for a, b in zip(self.menus, other.menus)):
            return False
        if self.is_eopr or other.is_eopr:
            return self.is_eopr and other.is_eopr
        return (self.selection.keys() == other.selection.keys()
                and all(np.array_equal(self.selection[k], other.selection[k]) for k in self.selection))

    def to_dict(self) -> dict:
        sel = "eopr" if self.is_eopr else {
            "table": [{"actions": list(k), "allocation": v.tolist()}
                      for k, v in sorted(self.selection.items())]
        }
        return {"endowment": self.endowment.tolist(),
                "menus": [m.to_dict() for m in self.menus],
                "selection": sel}


def protocol_from_dict(raw: dict) -> TradingProtocol:
    try:
        eta = np.asarray(raw["endowment"], dtype=float)
        menus = []
        for spec in raw["menus"]:
            j = int(spec["agent"])
            kind = spec["kind"]
            if kind == "polarized-rays":
                rays = [np.asarray(r, dtype=float) for r in spec["rays"]]
                if rays and np.any(rays[0]):
                    rays = [np.zeros_like(eta[j])] + rays
                menus.append(Menu(j, kind, eta[j], tuple(rays)))
            elif kind == "finite":
                pts = tuple(np.atleast_2d(np.asarray(p, dtype=float)) for p in spec["points"])
                menus.append(Menu(j, kind, eta[j], points=pts))
            else:
                menus.append(Menu(j, kind, eta[j]))
        sel = raw.get("selection", "eopr")
        if not (isinstance(sel, str) and sel == "eopr"):
            sel = {tuple(int(a) for a in e["actions"]): np.asarray(e["allocation"], dtype=float)
                   for e in sel["table"]}
    except (KeyError, TypeError, IndexError) as exc:
        raise ProtocolError(f"malformed protocol: {exc!r}") from None
    return TradingProtocol(eta, tuple(menus), sel).validate()


def load_protocol(text: str) -> TradingProtocol:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"parse error at line {exc.lineno}: {exc.msg}") from None
    return protocol_from_dict(raw)


def dump_protocol(p: TradingProtocol) -> str:
    return json.dumps(p.to_dict(), indent=2)


def polarized_protocol(s: Scenario, directions: Sequence[Sequence], eta=None) -> TradingProtocol:
    """EOPR protocol giving agent ``j`` rays ``directions[j]`` from ``eta`` (default σ)."""
    eta = s.sigma.copy() if eta is None else np.asarray(eta, dtype=float)
    menus = tuple(ray_menu(j, eta[j], directions[j]) if len(directions[j]) else singleton_menu(j, eta[j])
                  for j in range(s.J))
    return TradingProtocol(eta, menus).validate(s.supply)


def singleton_protocol(s: Scenario) -> TradingProtocol:
    return TradingProtocol(s.sigma.copy(), tuple(singleton_menu(j, s.sigma[j]) for j in range(s.J)))


def canonical_protocol(s: Scenario) -> TradingProtocol:
    """Two-task menus ``{0, (1,-1), (-1,1)}`` for every agent."""
    if s.I != 2:
        raise ProtocolError("the canonical two-ray menu needs two tasks")
    return polarized_protocol(s, [[(1.0, -1.0), (-1.0, 1.0)]] * s.J)


# ---------------------------------------------------------------------------
# Strategies


def myopic_strategy(menu: Menu, c) -> int:
    """Myopically optimal action; ties resolve toward the singleton (index 0)."""
    return int(myopic_actions(menu, np.asarray(c, dtype=float)[None, :])[0])


def myopic_actions(menu: Menu, C: np.ndarray) -> np.ndarray:
    """Vectorized :func:`myopic_strategy` over rows of ``C``."""
    C = np.atleast_2d(C)
    if menu.kind == "singleton":
        return np.zeros(len(C), dtype=int)
    if menu.kind == "remedial":
        return np.ones(len(C), dtype=int)
    if menu.kind == "polarized-rays":
        K = np.stack(menu.rays)
        dots = C @ K.T
        ymax = np.array([menu.y_max(k) if np.any(K[k] < 0) else 0.0 for k in range(len(K))])
        gain = np.where(dots < -NEG_TOL, dots * ymax, 0.0)
    else:
        base = C @ menu.endpoint
        gain = np.stack([np.min(C @ pts.T, axis=1) for pts in menu.points], axis=1) - base[:, None]
        gain = np.where(gain < -NEG_TOL, gain, 0.0)
    # argmin returns the first minimizer, so zero-gain ties pick index 0
    return np.argmin(gain, axis=1)


# ---------------------------------------------------------------------------
# Selection


def eopr_lp(pi: np.ndarray, eta: np.ndarray, sets: Sequence[tuple], weights=None) -> tuple[np.ndarray, float]:
    """Cost-minimizing market-clearing selection from chosen sets.

    ``sets[a]`` is ``("point",)``, ``("ray", kappa, y_max)`` or ``("box",)`` for
    participant ``a`` with endowment ``eta[a]``. Clearing is
    ``sum_a w_a (mu_a - eta_a) = 0``. Returns ``(mu, cost)`` where ``cost``
    is ``sum_a w_a pi_a . mu_a``.
    """
    A_, I = eta.shape
    w = np.ones(A_) if weights is None else np.asarray(weights, dtype=float)
    cols, obj, lb, ub, owners = [], [], [], [], []
    for a, st in enumerate(sets):
        if st[0] == "ray":
            kappa, ymax = st[1], st[2]
            if ymax <= 0 or not np.any(kappa):
                continue
            cols.append(w[a] * kappa)
            obj.append(w[a] * pi[a] @ kappa)
            lb.append(0.0)
            ub.append(ymax)
            owners.append((a, "ray", kappa))
        elif st[0] == "box":
            for i in range(I):
                if eta[a, i] <= 0:
                    continue
                e = np.zeros(I)
                e[i] = w[a]
                # variable is the reduction eta - mu in coordinate i
                cols.append(-e)
                obj.append(-w[a] * pi[a, i])
                lb.append(0.0)
                ub.append(eta[a, i])
                owners.append((a, "box", i))
    mu = eta.copy()
    base = float(np.sum(w[:, None] * pi * eta))
    if not cols:
        return mu, base
    A = np.column_stack(cols)
    sol = solve_lp(LpProblem(c=np.array(obj), A=A, senses=["="] * I, b=np.zeros(I), lb=lb, ub=ub))
    if sol.status != "optimal":
        raise NumericalFailure(f"EOPR LP returned {sol.status}")
    for val, (a, kind, arg) in zip(sol.x, owners):
        if kind == "ray":
            mu[a] = mu[a] + val * arg
        else:
            mu[a, arg] -= val
    mu = np.where(np.abs(mu) < 1e-12, 0.0, mu)
    return mu, float(np.sum(w[:, None] * pi * mu))


def _chosen_set(menu: Menu, k: int) -> tuple:
    if menu.kind == "singleton" or k == 0 and menu.kind != "finite":
        return ("point",)
    if menu.kind == "remedial":
        return ("box",)
    if menu.kind == "polarized-rays":
        return ("ray", menu.rays[k], menu.y_max(k))
    raise ProtocolError("finite menus need a fixed-table selection")


def eopr_select(p: TradingProtocol, a: Sequence[int], s: Scenario) -> ExpectedAssignment:
    """Ex-post optimal selection for action profile ``a``."""
    if not p.is_eopr:
        raise ProtocolError("protocol does not use the EOPR selection rule")
    a = tuple(int(k) for k in a)
    for j, (m, k) in enumerate(zip(p.menus, a)):
        if not 0 <= k < m.n_actions:
            raise ProtocolError(f"agent {j}: action {k} out of range")
    sets = [_chosen_set(m, k) for m, k in zip(p.menus, a)]
    mu, _ = eopr_lp(s.pi, p.endowment, sets)
    return ExpectedAssignment(mu, market_clearing=True)


def select(p: TradingProtocol, a: Sequence[int], s: Scenario) -> np.ndarray:
    if p.is_eopr:
        return eopr_select(p, a, s).x
    return p.selection[tuple(int(k) for k in a)]


def tabulate(p: TradingProtocol, s: Scenario) -> TradingProtocol:
    """Fixed-table version of an EOPR protocol (every action profile solved)."""
    if not p.is_eopr:
        return p
    table = {prof: eopr_select(p, prof, s).x for prof in p.action_profiles()}
    return TradingProtocol(p.endowment, p.menus, table)


def _unique_rows(x: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    out: list[np.ndarray] = []
    for row in x:
        if not any(np.all(np.abs(row - r) <= tol) for r in out):
            out.append(row)
    return np.array(out)


def essential_reduction(p: TradingProtocol) -> TradingProtocol:
    """Shrink each trading set to the values the selection table attains."""
    if p.is_eopr:
        raise ProtocolError("essential reduction is defined for fixed-table protocols only")
    menus = []
    for j, m in enumerate(p.menus):
        pts = []
        for k in range(m.n_actions):
            vals = np.array([x[j] for prof, x in p.selection.items() if prof[j] == k])
            pts.append(_unique_rows(vals))
        reduced = Menu(j, "finite", m.endpoint, points=tuple(pts))
        if m.kind == "finite" and reduced.same_as(m):
            reduced = m
        menus.append(reduced)
    return TradingProtocol(p.endowment, tuple(menus), p.selection)


# ---------------------------------------------------------------------------
# OSP verification


@dataclass
class StructuralVerdict:
    verdict: bool
    agent: int | None = None
    clause: str | None = None
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "agent": self.agent, "clause": self.clause,
                "details": self.details}


def classify_set(points: np.ndarray, eta: np.ndarray, tol: float = 1e-9):
    """Shape of a finite trading set relative to its endpoint.

    Returns ``("singleton",)``, ``("remedial",)``, ``("redundant",)``,
    ``("ray", kappa)`` or ``("general",)``.
    """
    d = points - eta
    d = d[np.any(np.abs(d) > tol, axis=1)]
    if len(d) == 0:
        return ("singleton",)
    if np.all(d <= tol):
        return ("remedial",)
    if np.all(d >= -tol):
        return ("redundant",)
    kappa = d[np.argmax(np.linalg.norm(d, axis=1))]
    t = d @ kappa / (kappa @ kappa)
    if np.all(t > 0) and np.all(np.abs(d - t[:, None] * kappa) <= 1e-7 * (1 + np.abs(t[:, None]))):
        if is_non_monotone(kappa):
            return ("ray", kappa / np.max(np.abs(kappa)))
    return ("general",)


def verify_osp_structural(p: TradingProtocol) -> StructuralVerdict:
    """Sufficient check: every agent has a remedial, singleton or polarized-ray menu.

    Finite menus are classified set by set; they pass when their sets lie on
    polarized rays (redundant sets allowed) or are all remedial/redundant.
    """
    for j, m in enumerate(p.menus):
        if m.kind in ("remedial", "singleton"):
            continue
        if m.kind == "polarized-rays":
            rep = check_polarized_menu(list(m.rays))
            if not rep.verdict:
                return StructuralVerdict(False, j, rep.failed_clause, rep.to_dict())
            continue
        shapes = [classify_set(pts, m.endpoint) for pts in m.points]
        kinds = [sh[0] for sh in shapes]
        if "general" in kinds:
            return StructuralVerdict(False, j, "set not contained in a ray",
                                     {"set": kinds.index("general")})
        rays = [sh[1] for sh in shapes if sh[0] == "ray"]
        if rays and "remedial" in kinds:
            return StructuralVerdict(False, j, "remedial set mixed with rays", {"kinds": kinds})
        if rays:
            rep = check_polarized_menu(rays)
            if not rep.verdict:
                return StructuralVerdict(False, j, rep.failed_clause, rep.to_dict())
    return StructuralVerdict(True)


@dataclass
class BruteForceVerdict:
    verdict: bool
    agent: int | None = None
    c: np.ndarray | None = None
    action: int | None = None
    alternative: int | None = None
    others_sup: tuple | None = None
    others_inf: tuple | None = None
    sup: float | None = None
    inf: float | None = None

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "agent": self.agent,
                "c": None if self.c is None else self.c.tolist(),
                "action": self.action, "alternative": self.alternative,
                "others_sup": self.others_sup, "others_inf": self.others_inf,
                "sup": self.sup, "inf": self.inf}


def default_strategy(p: TradingProtocol, j: int) -> Callable[[np.ndarray], int]:
    """Myopic strategy measured on the values the table attains."""
    vals = [np.array([x[j] for prof, x in p.selection.items() if prof[j] == k])
            for k in range(p.menus[j].n_actions)]
    eta = p.endowment[j]

    def strategy(c: np.ndarray) -> int:
        gains = [float(np.min(v @ c) - c @ eta) for v in vals]
        gains = [g if g < -NEG_TOL else 0.0 for g in gains]
        return int(np.argmin(gains))

    return strategy


def corner_grids(s: Scenario) -> list[np.ndarray]:
    return [cube_corners(s.pref_lo[j], s.pref_hi[j]) for j in range(s.J)]


def verify_osp_bruteforce(p: TradingProtocol, type_grid: Sequence[np.ndarray],
                          strategies: Sequence[Callable | None] | None = None,
                          tol: float = 1e-9) -> BruteForceVerdict:
    """Exact obvious-dominance check of prescribed actions on a finite type grid.

    For every agent, grid type ``c`` and alternative ``k'``, requires
    ``sup_{k_-j} c.P_j(s(c), k_-j) <= inf_{k_-j} c.P_j(k', k_-j)``.
    """
    if p.is_eopr:
        raise ProtocolError("brute-force verification needs a fixed-table protocol")
    J = len(p.menus)
    for j in range(J):
        strat = strategies[j] if strategies is not None and strategies[j] is not None \
            else default_strategy(p, j)
        n_k = p.menus[j].n_actions
        if n_k == 1:
            continue
        by_action = [[(prof[:j] + prof[j + 1:], x[j]) for prof, x in p.selection.items() if prof[j] == k]
                     for k in range(n_k)]
        for c in np.atleast_2d(type_grid[j]):
            k = strat(c)
            loads = [np.array([v @ c for _, v in entries]) for entries in by_action]
            sup_idx = int(np.argmax(loads[k]))
            for k2 in range(n_k):
                if k2 == k:
                    continue
                inf_idx = int(np.argmin(loads[k2]))
                if loads[k][sup_idx] > loads[k2][inf_idx] + tol:
                    return BruteForceVerdict(
                        False, j, np.asarray(c, dtype=float), k, k2,
                        by_action[k][sup_idx][0], by_action[k2][inf_idx][0],
                        float(loads[k][sup_idx]), float(loads[k2][inf_idx]))
    return BruteForceVerdict(True)


# ---------------------------------------------------------------------------
# Bilateral and two-price protocols


@dataclass(frozen=True, eq=False)
class BilateralMechanism:
    j1: int
    j2: int
    gamma: np.ndarray

    def feasible(self, s: Scenario, tol: float = 1e-12) -> bool:
        return bool(np.all(s.sigma[self.j1] + self.gamma >= -tol)
                    and np.all(s.sigma[self.j2] - self.gamma >= -tol))


def bilateral_protocol(s: Scenario, m: BilateralMechanism) -> TradingProtocol:
    """Fixed-table protocol: trade ``sigma_j1 + gamma``, ``sigma_j2 - gamma`` iff both opt in."""
    eta = s.sigma.copy()
    menus = []
    for j in range(s.J):
        if j == m.j1:
            menus.append(ray_menu(j, eta[j], [m.gamma]))
        elif j == m.j2:
            menus.append(ray_menu(j, eta[j], [-m.gamma]))
        else:
            menus.append(singleton_menu(j, eta[j]))
    base = TradingProtocol(eta, tuple(menus))
    table = {}
    for prof in base.action_profiles():
        x = eta.copy()
        if prof[m.j1] == 1 and prof[m.j2] == 1:
            x[m.j1] += m.gamma
            x[m.j2] -= m.gamma
        table[prof] = x
    return TradingProtocol(eta, tuple(menus), table).validate(s.supply)


def build_two_price_binary(s: Scenario, p1, p2) -> tuple[TradingProtocol, bool]:
    """Two-price binary-classification protocol and whether it is structurally OSP.

    Agent ``j`` may trade along ``(1, -p1_j)`` or ``(-1, p2_j)``; the menu is
    polarized iff ``p1_j <= p2_j``.
    """
    if s.I != 2:
        raise ProtocolError("two-price mechanisms need exactly two task classes")
    p1 = np.broadcast_to(np.asarray(p1, dtype=float), (s.J,))
    p2 = np.broadcast_to(np.asarray(p2, dtype=float), (s.J,))
    if np.any(p1 <= 0) or np.any(p2 <= 0):
        raise ProtocolError("prices must be positive")
    proto = polarized_protocol(s, [[(1.0, -p1[j]), (-1.0, p2[j])] for j in range(s.J)])
    return proto, bool(np.all(p1 <= p2))


# ---------------------------------------------------------------------------
# Simulation


@dataclass
class SimulationReport:
    samples: int
    seed: int
    workers: int
    mean_cost: float
    stderr: float
    sq_cost: float
    trade_freq: np.ndarray
    choice_freq: list
    mean_workload: np.ndarray
    sq_workload: np.ndarray
    max_participation_violation: float
    structural_osp: bool

    def to_dict(self) -> dict:
        return {
            "seed": self.seed, "samples": self.samples, "workers": self.workers,
            "mean_cost": self.mean_cost, "stderr": self.stderr, "sq_cost": self.sq_cost,
            "trade_freq": self.trade_freq.tolist(),
            "choice_freq": [list(map(float, f)) for f in self.choice_freq],
            "mean_workload": self.mean_workload.tolist(),
            "sq_workload": self.sq_workload.tolist(),
            "max_participation_violation": self.max_participation_violation,
            "structural_osp": self.structural_osp,
        }


def _draw_chunk(s: Scenario, p: TradingProtocol, size: int, seed_seq: np.random.SeedSequence):
    rng = np.random.default_rng(seed_seq)
    C = sample_profiles(s, size, rng)
    if p.is_eopr:
        acts = np.stack([myopic_actions(p.menus[j], C[:, j]) for j in range(s.J)], axis=1)
    else:
        strats = [default_strategy(p, j) for j in range(s.J)]
        acts = np.array([[strats[j](C[n, j]) for j in range(s.J)] for n in range(size)], dtype=int)
    return C, acts


def simulate_mechanism(s: Scenario, p: TradingProtocol, samples: int, seed: int,
                       workers: int = 1) -> SimulationReport:
    """Monte-Carlo social cost of a protocol under myopic play.

    Draws are split into ``workers`` chunks, each with its own stream spawned
    from ``seed``; the EOPR selection is solved once per distinct action
    profile, so results depend only on ``(seed, workers)``.
    """
    structural = verify_osp_structural(p).verdict
    if not structural:
        log.warning("protocol is not structurally OSP; simulating anyway")
    workers = max(1, int(workers))
    sizes = [samples // workers + (1 if w < samples % workers else 0) for w in range(workers)]
    streams = np.random.SeedSequence(seed).spawn(workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        chunks = list(pool.map(lambda a: _draw_chunk(s, p, *a), zip(sizes, streams)))
    C = np.concatenate([c for c, _ in chunks])
    acts = np.concatenate([a for _, a in chunks])
    profiles, inverse = np.unique(acts, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    outcomes = np.stack([select(p, tuple(prof), s) for prof in profiles])
    costs = np.einsum("pji,ji->p", outcomes, s.pi)[inverse]
    mean = math.fsum(costs) / samples
    var = math.fsum((costs - mean) ** 2) / max(samples - 1, 1)
    mu = outcomes[inverse]
    loads = np.einsum("nji,nji->nj", C, mu)
    sq_loads = np.einsum("nji,ji->nj", C, s.sigma)
    traded = np.any(np.abs(outcomes - p.endowment) > 1e-9, axis=2)[inverse]
    choice = [np.bincount(acts[:, j], minlength=p.menus[j].n_actions) / samples for j in range(s.J)]
    return SimulationReport(
        samples=samples, seed=seed, workers=workers,
        mean_cost=mean, stderr=math.sqrt(var / samples), sq_cost=status_quo_cost(s),
        trade_freq=traded.mean(axis=0), choice_freq=choice,
        mean_workload=loads.mean(axis=0), sq_workload=sq_loads.mean(axis=0),
        max_participation_violation=float(np.max(loads - sq_loads)),
        structural_osp=structural,
    )


def simulate_draws(s: Scenario, p: TradingProtocol, C: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Outcome and cost for given profiles ``C`` of shape ``(n, J, I)``."""
    acts = np.stack([myopic_actions(p.menus[j], C[:, j]) for j in range(s.J)], axis=1)
    profiles, inverse = np.unique(acts, axis=0, return_inverse=True)
    outcomes = np.stack([select(p, tuple(prof), s) for prof in profiles])
    mu = outcomes[inverse.reshape(-1)]
    return mu, np.einsum("nji,ji->n", mu, s.pi)
