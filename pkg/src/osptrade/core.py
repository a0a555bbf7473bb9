"""Domain model: scenarios, expected assignments, lotteries and type distributions."""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

ATOL = 1e-9


class ScenarioError(ValueError):
    """Raised when a scenario file cannot be parsed or violates an invariant."""


class InfeasibleAssignment(ValueError):
    """Raised when an expected assignment does not clear the market."""


@dataclass(frozen=True, eq=False)
class Distribution:
    """Type distribution for one agent.

    ``kind`` is ``"uniform"`` (uniform on the agent's cube) or ``"grid"``
    (finitely many points with weights).
    """

    kind: str = "uniform"
    points: np.ndarray | None = None
    weights: np.ndarray | None = None

    def to_dict(self) -> dict:
        if self.kind == "uniform":
            return {"kind": "uniform"}
        return {
            "kind": "grid",
            "points": self.points.tolist(),
            "weights": self.weights.tolist(),
        }

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Distribution) or self.kind != other.kind:
            return False
        if self.kind == "uniform":
            return True
        return (np.array_equal(self.points, other.points)
                and np.array_equal(self.weights, other.weights))


@dataclass(frozen=True, eq=False)
class Scenario:
    """An allocation problem with a status quo.

    Matrices are indexed ``[agent, task]``: ``pi[j, i]`` is the social cost of
    agent ``j`` doing one unit of task ``i`` and ``sigma[j, i]`` is the status
    quo expected assignment. ``pref_lo``/``pref_hi`` bound each agent's private
    cost vector coordinatewise.
    """

    supply: np.ndarray
    pi: np.ndarray
    sigma: np.ndarray
    pref_lo: np.ndarray
    pref_hi: np.ndarray
    beta: np.ndarray
    distributions: tuple[Distribution, ...]
    task_names: tuple[str, ...] = ()
    agent_names: tuple[str, ...] = ()

    @property
    def task_count(self) -> int:
        return self.pi.shape[1]

    @property
    def agent_count(self) -> int:
        return self.pi.shape[0]

    # short aliases used throughout the numerical code
    @property
    def I(self) -> int:  # noqa: E743
        return self.task_count

    @property
    def J(self) -> int:
        return self.agent_count

    def validate(self, tol: float = ATOL) -> "Scenario":
        J, I = self.pi.shape
        for name in ("sigma", "pref_lo", "pref_hi"):
            if getattr(self, name).shape != (J, I):
                raise ScenarioError(f"{name} must have shape ({J}, {I})")
        if I < 2:
            raise ScenarioError("at least two tasks are required")
        if self.supply.shape != (I,) or np.any(self.supply <= 0):
            raise ScenarioError("supply must be a vector of positive integers")
        if np.any(self.supply != np.round(self.supply)):
            raise ScenarioError("supply must be a vector of positive integers")
        if not np.all(np.isfinite(self.pi)):
            raise ScenarioError("performance must be finite")
        if np.any(self.sigma < 0):
            raise ScenarioError("status quo must be non-negative")
        if np.any(np.abs(self.sigma.sum(axis=0) - self.supply) > tol):
            raise ScenarioError("status quo not market-clearing")
        if np.any(self.pref_lo <= 0):
            raise ScenarioError("costs must be strictly positive")
        if np.any(self.pref_lo > self.pref_hi):
            raise ScenarioError("pref_lo must not exceed pref_hi")
        if self.beta.shape != (J,) or np.any(self.beta < 1):
            raise ScenarioError("beta must be a vector of reals >= 1")
        if len(self.distributions) != J:
            raise ScenarioError("one distribution per agent is required")
        for j, d in enumerate(self.distributions):
            if d.kind == "uniform":
                continue
            if d.kind != "grid":
                raise ScenarioError(f"agent {j}: unknown distribution kind {d.kind!r}")
            if d.points.ndim != 2 or d.points.shape[1] != I or len(d.weights) != len(d.points):
                raise ScenarioError(f"agent {j}: grid points/weights malformed")
            if np.any(d.weights <= 0) or abs(d.weights.sum() - 1.0) > 1e-12:
                raise ScenarioError(f"agent {j}: grid weights must be positive and sum to 1")
            inside = (d.points >= self.pref_lo[j] - tol) & (d.points <= self.pref_hi[j] + tol)
            if not inside.all():
                raise ScenarioError(f"agent {j}: grid points must lie in the preference cube")
        return self

    def replace(self, **changes: Any) -> "Scenario":
        """Return a validated copy with some fields replaced."""
        fields = {
            "supply": self.supply, "pi": self.pi, "sigma": self.sigma,
            "pref_lo": self.pref_lo, "pref_hi": self.pref_hi, "beta": self.beta,
            "distributions": self.distributions, "task_names": self.task_names,
            "agent_names": self.agent_names,
        }
        fields.update(changes)
        return make_scenario(**fields)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Scenario):
            return NotImplemented
        arrays = ("supply", "pi", "sigma", "pref_lo", "pref_hi", "beta")
        return (all(np.array_equal(getattr(self, a), getattr(other, a)) for a in arrays)
                and self.distributions == other.distributions
                and self.task_names == other.task_names
                and self.agent_names == other.agent_names)


def make_scenario(supply, pi, sigma, pref_lo, pref_hi, beta=None, distributions=None,
                  task_names=(), agent_names=()) -> Scenario:
    """Build and validate a :class:`Scenario` from array-likes."""
    pi = np.atleast_2d(np.asarray(pi, dtype=float))
    J, I = pi.shape
    if beta is None:
        beta = np.ones(J)
    if distributions is None:
        distributions = tuple(Distribution() for _ in range(J))
    task_names = tuple(task_names) or tuple(f"task{i + 1}" for i in range(I))
    agent_names = tuple(agent_names) or tuple(f"agent{j + 1}" for j in range(J))
    s = Scenario(
        supply=np.asarray(supply, dtype=float),
        pi=pi,
        sigma=np.atleast_2d(np.asarray(sigma, dtype=float)),
        pref_lo=np.atleast_2d(np.asarray(pref_lo, dtype=float)),
        pref_hi=np.atleast_2d(np.asarray(pref_hi, dtype=float)),
        beta=np.asarray(beta, dtype=float).reshape(-1),
        distributions=tuple(distributions),
        task_names=task_names,
        agent_names=agent_names,
    )
    return s.validate()


def _field(obj: dict, key: str, where: str):
    if key not in obj:
        raise ScenarioError(f"{where}: missing field {key!r}")
    return obj[key]


def load_scenario(text: str) -> Scenario:
    """Parse a scenario from its JSON text and validate every invariant."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"parse error at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ScenarioError("scenario must be a JSON object")
    tasks = _field(raw, "tasks", "scenario")
    agents = _field(raw, "agents", "scenario")
    if not tasks or not agents:
        raise ScenarioError("scenario needs at least one task and one agent")
    supply = [_field(t, "count", f"tasks[{i}]") for i, t in enumerate(tasks)]
    cols: dict[str, list] = {k: [] for k in ("pi", "sigma", "pref_lo", "pref_hi")}
    beta, dists = [], []
    for j, a in enumerate(agents):
        where = f"agents[{j}]"
        for k in cols:
            row = _field(a, k, where)
            if len(row) != len(tasks):
                raise ScenarioError(f"{where}.{k}: expected {len(tasks)} entries, got {len(row)}")
            cols[k].append(row)
        beta.append(a.get("beta", 1.0))
        d = a.get("distribution", {"kind": "uniform"})
        kind = _field(d, "kind", f"{where}.distribution")
        if kind == "uniform":
            dists.append(Distribution())
        elif kind == "grid":
            pts = np.asarray(_field(d, "points", f"{where}.distribution"), dtype=float)
            w = np.asarray(_field(d, "weights", f"{where}.distribution"), dtype=float)
            dists.append(Distribution("grid", pts, w))
        else:
            raise ScenarioError(f"{where}.distribution: unknown kind {kind!r}")
    try:
        return make_scenario(
            supply, cols["pi"], cols["sigma"], cols["pref_lo"], cols["pref_hi"], beta, dists,
            task_names=[str(t.get("name", f"task{i + 1}")) for i, t in enumerate(tasks)],
            agent_names=[str(a.get("name", f"agent{j + 1}")) for j, a in enumerate(agents)],
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(f"malformed numeric field: {exc}") from None


def scenario_to_dict(s: Scenario) -> dict:
    return {
        "tasks": [{"name": n, "count": int(c)} for n, c in zip(s.task_names, s.supply)],
        "agents": [
            {
                "name": s.agent_names[j],
                "pi": s.pi[j].tolist(),
                "sigma": s.sigma[j].tolist(),
                "pref_lo": s.pref_lo[j].tolist(),
                "pref_hi": s.pref_hi[j].tolist(),
                "beta": float(s.beta[j]),
                "distribution": s.distributions[j].to_dict(),
            }
            for j in range(s.J)
        ],
    }


def serialize_scenario(s: Scenario) -> str:
    return json.dumps(scenario_to_dict(s), indent=2)


def s2_scenario() -> Scenario:
    """The canonical two-task, two-agent fixture."""
    return make_scenario(
        supply=[2, 2],
        pi=[[1, 2], [2, 1]],
        sigma=[[1, 1], [1, 1]],
        pref_lo=[[1, 1], [1, 1]],
        pref_hi=[[2, 2], [2, 2]],
        task_names=("A", "B"),
        agent_names=("1", "2"),
    )


def status_quo_cost(s: Scenario) -> float:
    return float(np.sum(s.pi * s.sigma))


def social_cost(s: Scenario, x: np.ndarray) -> float:
    return float(np.sum(s.pi * x))


# ---------------------------------------------------------------------------
# Expected assignments and lotteries


@dataclass(frozen=True, eq=False)
class ExpectedAssignment:
    x: np.ndarray
    market_clearing: bool = False

    def check(self, supply: np.ndarray | None = None, tol: float = ATOL) -> "ExpectedAssignment":
        if np.any(self.x < -tol):
            raise InfeasibleAssignment("expected assignment has negative entries")
        if self.market_clearing and supply is not None:
            if np.any(np.abs(self.x.sum(axis=0) - supply) > tol):
                raise InfeasibleAssignment("expected assignment is not market-clearing")
        return self


@dataclass(frozen=True, eq=False)
class Lottery:
    """Finite distribution over integer allocations ``Z[agent, task]``."""

    allocations: tuple[np.ndarray, ...]
    weights: np.ndarray

    def mean(self) -> np.ndarray:
        return np.tensordot(self.weights, np.stack(self.allocations), axes=1)

    def __len__(self) -> int:
        return len(self.allocations)


def _peel_column(x: np.ndarray, tol: float) -> list[tuple[np.ndarray, float]]:
    """Split one task column into integer columns with weights.

    The fractional part lies in a scaled hypersimplex; each step assigns the
    extra units to the agents with the largest remaining fractional mass.
    """
    base = np.floor(x + tol)
    frac = np.clip(x - base, 0.0, None)
    extra = int(round(frac.sum()))
    out: list[tuple[np.ndarray, float]] = []
    remaining = 1.0
    while remaining > tol:
        order = np.argsort(-frac, kind="stable")
        chosen, rest = order[:extra], order[extra:]
        step = remaining
        if extra:
            step = min(step, float(frac[chosen].min()))
        if len(rest):
            step = min(step, remaining - float(frac[rest].max()))
        if step <= tol:
            # numerical residue: fold it into the last lottery entry
            break
        z = base.copy()
        z[chosen] += 1
        out.append((z, step))
        frac[chosen] -= step
        remaining -= step
    total = sum(w for _, w in out)
    return [(z, w / total) for z, w in out]


def decompose_expected(x: np.ndarray | ExpectedAssignment, supply: Sequence[float],
                       tol: float = ATOL) -> Lottery:
    """Write a market-clearing expected assignment as a lottery over allocations.

    Each task column is decomposed on its own; columns are then coupled
    comonotonically along cumulative weight, which keeps the support at most
    ``I * J + 1``.
    """
    if isinstance(x, ExpectedAssignment):
        x = x.x
    x = np.asarray(x, dtype=float)
    supply = np.asarray(supply, dtype=float)
    if x.ndim != 2 or x.shape[1] != supply.shape[0]:
        raise InfeasibleAssignment("assignment shape does not match supply")
    if np.any(x < -tol) or np.any(np.abs(x.sum(axis=0) - supply) > tol):
        raise InfeasibleAssignment("expected assignment is not market-clearing")
    x = np.clip(x, 0.0, None)
    columns = [_peel_column(x[:, i], tol) for i in range(x.shape[1])]
    # comonotone coupling over breakpoints of the cumulative weights
    cuts = sorted({round(c, 15) for col in columns
                   for c in np.cumsum([w for _, w in col])[:-1]} | {1.0})
    allocations, weights = [], []
    prev = 0.0
    for cut in cuts:
        mid = 0.5 * (prev + cut)
        z = np.empty_like(x)
        for i, col in enumerate(columns):
            cum = np.cumsum([w for _, w in col])
            k = min(int(np.searchsorted(cum, mid)), len(col) - 1)
            z[:, i] = col[k][0]
        allocations.append(z.astype(int))
        weights.append(cut - prev)
        prev = cut
    w = np.asarray(weights)
    return Lottery(tuple(allocations), w / w.sum())


# ---------------------------------------------------------------------------
# Preference profiles and type distributions


@dataclass(frozen=True, eq=False)
class PreferenceProfile:
    c: np.ndarray


def sample_types(s: Scenario, j: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``size`` cost vectors for agent ``j``."""
    d = s.distributions[j]
    if d.kind == "uniform":
        u = rng.random((size, s.I))
        return s.pref_lo[j] + u * (s.pref_hi[j] - s.pref_lo[j])
    idx = rng.choice(len(d.weights), size=size, p=d.weights)
    return d.points[idx]


def sample_profiles(s: Scenario, size: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``size`` preference profiles, shape ``(size, J, I)``.

    Uniform agents are filled from one block of uniforms so a longer draw with
    the same generator state extends a shorter one.
    """
    if all(d.kind == "uniform" for d in s.distributions):
        u = rng.random((size, s.J, s.I))
        return s.pref_lo + u * (s.pref_hi - s.pref_lo)
    return np.stack([sample_types(s, j, size, rng) for j in range(s.J)], axis=1)


def cube_corners(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Distinct corners of the box ``[lo, hi]`` in lexicographic order."""
    axes = [sorted({float(a), float(b)}) for a, b in zip(lo, hi)]
    return np.array(list(itertools.product(*axes)))


def prob_linear_negative(a: np.ndarray, lo: np.ndarray, hi: np.ndarray,
                         rel_zero: float = 1e-9) -> np.ndarray:
    """``P(a . c < 0)`` for ``c`` uniform on the box ``[lo, hi]``.

    Exact for any dimension: the linear form is a shifted sum of independent
    uniforms whose CDF is a signed sum of truncated powers over vertex subsets.
    ``a`` may be a batch ``(..., I)``.
    """
    a = np.asarray(a, dtype=float)
    lo = np.broadcast_to(np.asarray(lo, dtype=float), a.shape)
    hi = np.broadcast_to(np.asarray(hi, dtype=float), a.shape)
    b = a * (hi - lo)
    t = -np.sum(a * lo, axis=-1)
    scale = np.max(np.abs(b), axis=-1, keepdims=True)
    scale = np.where(scale > 0, scale, 1.0)
    small = np.abs(b) <= rel_zero * scale
    # near-zero widths act as constants at their midpoints
    t = t - np.sum(np.where(small, 0.5 * b, 0.0), axis=-1)
    b = np.where(small, 0.0, b)
    # reflect negative widths so every width is positive
    t = t - np.sum(np.where(b < 0, b, 0.0), axis=-1)
    b = np.abs(b)
    flat_b = b.reshape(-1, b.shape[-1])
    flat_t = t.reshape(-1)
    out = np.empty(flat_t.shape[0])
    active = flat_b > 0
    if np.all(active):
        return _sum_uniform_cdf(flat_b, flat_t).reshape(t.shape)
    # rows sharing the same set of nonzero widths are evaluated together
    patterns, inverse = np.unique(active, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    for g, pat in enumerate(patterns):
        rows = inverse == g
        out[rows] = _sum_uniform_cdf(flat_b[rows][:, pat], flat_t[rows])
    return out.reshape(t.shape)


def _sum_uniform_cdf(widths: np.ndarray, t: np.ndarray) -> np.ndarray:
    """``P(sum_i w_i U_i < t)`` per row, ``U_i`` iid uniform on [0, 1] and ``w_i > 0``."""
    widths = np.atleast_2d(widths)
    t = np.asarray(t, dtype=float).reshape(-1)
    n = widths.shape[1]
    if n == 0:
        return (t > 0).astype(float)
    total = widths.sum(axis=1)
    # use the shorter tail for accuracy
    flip = t > 0.5 * total
    tt = np.where(flip, total - t, t)
    masks = np.array(list(itertools.product((0, 1), repeat=n)), dtype=float)
    signs = (-1.0) ** masks.sum(axis=1)
    r = tt[:, None] - widths @ masks.T
    acc = np.sum(signs * np.where(r > 0, r, 0.0) ** n, axis=1)
    val = acc / (math.factorial(n) * np.prod(widths, axis=1))
    val = np.clip(val, 0.0, 1.0)
    val = np.where(flip, 1.0 - val, val)
    val = np.where(t <= 0, 0.0, val)
    return np.where(t >= total, 1.0, val)
