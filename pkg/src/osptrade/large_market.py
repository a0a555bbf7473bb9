"""Large-market relaxation: support functions, dual ascent, primal recovery, replicas.

Market clearing is relaxed to hold in expectation, which separates the design
problem across agents. Each agent's achievable expected bundles form a convex
set that is only ever queried through its support function; the support
function is evaluated by searching over menus of polarized rays.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import Scenario, prob_linear_negative, sample_profiles
from .geometry import check_polarized_menu, polarized_interval
from .lp import LpProblem, NumericalFailure, solve_lp
from .mechanisms import Menu, TradingProtocol, eopr_lp, myopic_actions, ray_menu, remedial_menu, singleton_menu

log = logging.getLogger(__name__)


class PoolError(RuntimeError):
    """The maximizer pool cannot reproduce a market-clearing allocation."""


@dataclass
class SearchConfig:
    restarts: int = 64
    max_rays: int | None = None
    step0: float = 0.5
    step_min: float = 1e-6
    max_sweeps: int = 200
    seed: int = 0
    pool_tol: float = 1e-4


# ---------------------------------------------------------------------------
# Single-agent pieces


def remedial_value(w, eta) -> float:
    """Maximum of ``w . x`` over the box ``0 <= x <= eta``."""
    w = np.asarray(w, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if np.any(eta < 0):
        raise ValueError("endowment must be non-negative")
    return float(np.maximum(w, 0.0) @ eta)


def remedial_point(w, eta) -> np.ndarray:
    return np.where(np.asarray(w) > 0, eta, 0.0).astype(float)


def ray_steps(eta: np.ndarray, K: np.ndarray) -> np.ndarray:
    """Largest feasible step along each direction in ``K`` (batched over leading axes)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(K < 0, eta / -K, np.inf)
    return np.min(ratio, axis=-1)


class ChoiceModel:
    """Exact ``P(c . kappa < 0)`` for one agent's type distribution."""

    def __init__(self, s: Scenario, j: int):
        d = s.distributions[j]
        self.grid = d.kind == "grid"
        if self.grid:
            self.points, self.weights = d.points, d.weights
        self.lo, self.hi = s.pref_lo[j], s.pref_hi[j]

    def prob_negative(self, K: np.ndarray) -> np.ndarray:
        K = np.asarray(K, dtype=float)
        if self.grid:
            return (np.einsum("...i,ni->...n", K, self.points) < 0) @ self.weights
        return prob_linear_negative(K, self.lo, self.hi)


def ray_gain(w: np.ndarray, eta: np.ndarray, K: np.ndarray, model: ChoiceModel) -> np.ndarray:
    """Expected contribution of rays ``K``: ``P(choose) * y_max * max(w . kappa, 0)``."""
    wk = K @ w
    out = np.zeros(K.shape[:-1])
    live = wk > 0
    if np.any(live):
        Kl = K[live]
        out[live] = model.prob_negative(Kl) * ray_steps(eta, Kl) * wk[live]
    return out


def menu_point(w, eta, dirs: np.ndarray, model: ChoiceModel) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Expected bundle of a ray menu under the designer's best individual selection.

    Returns ``(x, probabilities, steps)``.
    """
    dirs = np.atleast_2d(dirs)
    probs = model.prob_negative(dirs)
    steps = np.where(dirs @ w > 0, ray_steps(eta, dirs), 0.0)
    return eta + (probs * steps) @ dirs, probs, steps


@dataclass
class SupportEval:
    w: np.ndarray
    value: float
    x: np.ndarray
    kind: str  # "rays", "remedial" or "singleton"
    directions: np.ndarray
    probabilities: np.ndarray
    steps: np.ndarray
    search_tol: float = 0.0
    quality: str = "converged"
    pool: list = field(default_factory=list)

    def menu(self, j: int, eta) -> Menu:
        if self.kind == "remedial":
            return remedial_menu(j, eta)
        if self.kind == "singleton" or len(self.directions) == 0:
            return singleton_menu(j, eta)
        return ray_menu(j, eta, list(self.directions))

    def to_dict(self) -> dict:
        return {"w": self.w.tolist(), "value": self.value, "x": self.x.tolist(), "kind": self.kind,
                "directions": self.directions.tolist(), "probabilities": self.probabilities.tolist(),
                "steps": self.steps.tolist(), "search_tol": self.search_tol, "quality": self.quality}


def _random_sphere(rng: np.random.Generator, shape: tuple, I: int) -> np.ndarray:
    """Uniform draws on the sup-norm unit sphere."""
    x = rng.uniform(-1.0, 1.0, size=shape + (I,))
    face = rng.integers(0, I, size=shape)
    sign = rng.choice([-1.0, 1.0], size=shape)
    np.put_along_axis(x, face[..., None], sign[..., None], axis=-1)
    return x


def _valid_menus(D: np.ndarray) -> np.ndarray:
    """Which menus in ``D`` (shape ``(R, m, I)``) are non-monotone and pairwise polarized."""
    ok = np.all(np.any(D > 0, axis=-1) & np.any(D < 0, axis=-1), axis=1)
    m = D.shape[1]
    for a in range(m):
        for b in range(a + 1, m):
            ok &= polarized_interval(D[:, a], D[:, b])
    return ok


def _normalize(D: np.ndarray) -> np.ndarray:
    scale = np.max(np.abs(D), axis=-1, keepdims=True)
    return D / np.where(scale > 0, scale, 1.0)


def _coordinate_search(w, eta, D, model, cfg) -> tuple[np.ndarray, np.ndarray]:
    """Coordinate ascent over every ray coordinate, batched over restarts.

    Each sweep evaluates all single-coordinate moves of size ``step`` at once
    and takes the best improving one per restart; the step halves when no
    move helps.
    """
    R, m, I = D.shape
    val = ray_gain(w, eta, D, model).sum(axis=1)
    step = np.full(R, cfg.step0)
    moves = [(k, i, sgn) for k in range(m) for i in range(I) for sgn in (1.0, -1.0)]
    M = len(moves)
    for _ in range(cfg.max_sweeps):
        active = np.flatnonzero(step >= cfg.step_min)
        if not len(active):
            break
        prop = np.repeat(D[active][:, None], M, axis=1)  # (A, M, m, I)
        for q, (k, i, sgn) in enumerate(moves):
            prop[:, q, k, i] = np.clip(prop[:, q, k, i] + sgn * step[active], -1.0, 1.0)
        prop = _normalize(prop)
        flat = prop.reshape(-1, m, I)
        ok = _valid_menus(flat)
        pv = np.full(len(flat), -np.inf)
        if np.any(ok):
            pv[ok] = ray_gain(w, eta, flat[ok], model).sum(axis=1)
        pv = pv.reshape(len(active), M)
        best = np.argmax(pv, axis=1)
        bv = pv[np.arange(len(active)), best]
        better = bv > val[active] + 1e-15
        idx = active[better]
        D[idx] = prop[better, best[better]]
        val[idx] = bv[better]
        step[active[~better]] *= 0.5
    return D, val


def _initial_menus(rng, R: int, I: int, max_rays: int, warm: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Random valid menus per ray count, with warm starts merged into their group."""
    groups = {}
    for m in range(1, max_rays + 1):
        n = max(1, R // max_rays)
        D = _random_sphere(rng, (n * 8, m), I)
        groups[m] = D[_valid_menus(D)][:n]
    for W in warm:
        W = np.atleast_2d(W)
        if len(W):
            groups[len(W)] = np.concatenate([groups.get(len(W), np.zeros((0, len(W), I))), W[None]])
    return [g for g in groups.values() if len(g)]


def support_function(s: Scenario, j: int, w, cfg: SearchConfig | None = None,
                     warm: Sequence[np.ndarray] = (), eta=None) -> SupportEval:
    """Largest ``w . x`` over expected bundles an OSP menu can deliver to agent ``j``.

    Compares the singleton, the remedial box and a seeded search over menus
    of polarized rays. ``search_tol`` is the disagreement between the best
    results of two independent halves of the restarts; ``warm`` directions
    (from earlier calls) are added as extra starts.
    """
    cfg = cfg or SearchConfig()
    w = np.asarray(w, dtype=float)
    eta = s.sigma[j] if eta is None else np.asarray(eta, dtype=float)
    I = w.size
    model = ChoiceModel(s, j)
    max_rays = min(cfg.max_rays or I, I)
    single = float(w @ eta)
    rem = remedial_value(w, eta)
    best = SupportEval(w, single, eta.copy(), "singleton", np.zeros((0, I)), np.zeros(0), np.zeros(0))
    if rem > best.value:
        best = SupportEval(w, rem, remedial_point(w, eta), "remedial", np.zeros((0, I)), np.zeros(0), np.zeros(0))
    pool = [best.x]
    if not np.any(w > 0):
        best.pool = pool
        return best
    rng = np.random.default_rng([cfg.seed, j])
    results = []  # (value, directions, half)
    for g, D in enumerate(_initial_menus(rng, cfg.restarts, I, max_rays, warm)):
        D, vals = _coordinate_search(w, eta, D.copy(), model, cfg)
        for r in range(len(D)):
            results.append((float(vals[r]), D[r], r % 2))
    tol = cfg.pool_tol * (1.0 + abs(best.value))
    top = max(v for v, _, _ in results)
    halves = [max((v for v, _, h in results if h == b), default=-np.inf) for b in (0, 1)]
    search_tol = float(abs(halves[0] - halves[1])) if all(np.isfinite(halves)) else np.inf
    for v, D, _ in results:
        if single + v >= top + single - tol:
            pool.append(menu_point(w, eta, D, model)[0])
    v, D, _ = max(results, key=lambda r: r[0])
    ray_val = single + v
    if ray_val > best.value:
        keep = D @ w > 0
        D = D[keep]
        x, probs, steps = menu_point(w, eta, D, model)
        best = SupportEval(w, float(w @ x), x, "rays", D, probs, steps)
    best.search_tol = search_tol
    best.quality = "converged" if search_tol <= 1e-6 * (1 + abs(best.value)) else "under-searched"
    best.pool = _dedupe(pool)
    return best


def _dedupe(points: list[np.ndarray], tol: float = 1e-10) -> list[np.ndarray]:
    out: list[np.ndarray] = []
    for p in points:
        if not any(np.max(np.abs(p - q)) <= tol for q in out):
            out.append(p)
    return out


# ---------------------------------------------------------------------------
# Dual of the outer program


@dataclass
class DualState:
    lam: np.ndarray
    value: float
    history: list
    pools: list  # per agent, list of bundles
    menus: list  # per agent, SupportEval at the best multiplier
    iterations: int

    def to_dict(self) -> dict:
        return {"lambda": self.lam.tolist(), "dual_value": self.value, "iterations": self.iterations,
                "per_agent_menus": [m.to_dict() for m in self.menus]}


@dataclass
class DualConfig:
    iterations: int = 500
    search: SearchConfig = field(default_factory=SearchConfig)
    inner_restarts: int = 8
    polish_rounds: int = 30
    polish_tol: float = 1e-6
    workers: int = 1


def _pool_value(lam, s, pools, j) -> float:
    w = lam - s.pi[j]
    return max(float(w @ x) for x in pools[j])


def _evaluate(s, lam, cfg: SearchConfig, warm, pools, pool_exec):
    """Searched support values at ``lam``, folded together with the pools."""
    def one(j):
        return support_function(s, j, lam - s.pi[j], cfg, warm[j])
    evals = list(pool_exec.map(one, range(s.J)))
    total = 0.0
    for j, ev in enumerate(evals):
        pools[j].extend(ev.pool)
        if ev.kind == "rays":
            warm[j] = [ev.directions] + warm[j][:3]
        total += max(ev.value, _pool_value(lam, s, pools, j))
    return evals, total


def solve_dual(s: Scenario, cfg: DualConfig | None = None) -> DualState:
    """Maximize ``g(lam) = lam . n - sum_j S_j(lam - pi_j)``.

    Supergradient ascent with steps ``a / sqrt(t)`` on the relative clearing
    residual, ``a = max(n)``, starting from the status-quo-weighted average of
    performance; the best iterate is kept. Afterwards, cutting-plane rounds
    re-solve the master LP over the accumulated maximizer pools and query the
    support functions at its multipliers until the two bounds meet. Every
    support value is taken as the larger of the search result and the pool
    maximum, so the reported value never exceeds the pool-restricted primal.
    """
    cfg = cfg or DualConfig()
    n = s.supply
    a = float(np.max(n))
    lam = (s.sigma * s.pi).sum(axis=0) / n
    pools = [[s.sigma[j].copy()] for j in range(s.J)]
    warm: list[list] = [[] for _ in range(s.J)]
    inner = SearchConfig(**{**cfg.search.__dict__, "restarts": cfg.inner_restarts})
    history = []
    best_val, best_lam = -np.inf, lam.copy()
    with ThreadPoolExecutor(max_workers=max(1, cfg.workers)) as ex:
        for t in range(1, cfg.iterations + 1):
            inner.seed = cfg.search.seed + t
            evals, total = _evaluate(s, lam, inner, warm, pools, ex)
            g = float(lam @ n - total)
            history.append(g)
            if g > best_val:
                best_val, best_lam = g, lam.copy()
            resid = n - sum(ev.x for ev in evals)
            lam = lam + (a / math.sqrt(t)) * resid / a
        lam = best_lam
        for r in range(cfg.polish_rounds):
            master, lam_m = _master(s, pools)
            inner.seed = cfg.search.seed + cfg.iterations + r + 1
            _, total = _evaluate(s, lam_m, inner, warm, pools, ex)
            g = float(lam_m @ n - total)
            history.append(g)
            if g > best_val:
                best_val, best_lam = g, lam_m.copy()
            if master - best_val <= cfg.polish_tol * (1 + abs(master)):
                break
        lam = best_lam
        full = SearchConfig(**{**cfg.search.__dict__, "seed": cfg.search.seed})
        evals, total = _evaluate(s, lam, full, warm, pools, ex)
    value = min(best_val, float(lam @ n - total))
    return DualState(lam, value, history, [_dedupe(p) for p in pools], evals, len(history))


def _master(s: Scenario, pools) -> tuple[float, np.ndarray]:
    """Pool-restricted outer program; returns its value and clearing multipliers."""
    res = _pool_lp(s, pools)
    return res[0], res[2]


def _pool_lp(s: Scenario, pools):
    cols, owners, obj = [], [], []
    for j, pool in enumerate(pools):
        for x in pool:
            cols.append(np.concatenate([x, np.eye(s.J)[j]]))
            obj.append(float(s.pi[j] @ x))
            owners.append(j)
    A = np.column_stack(cols)
    b = np.concatenate([s.supply, np.ones(s.J)])
    sol = solve_lp(LpProblem(c=obj, A=A, senses=["="] * len(b), b=b, lb=0.0))
    if sol.status != "optimal":
        raise PoolError("maximizer pools cannot clear the market; enrich the pool or increase restarts")
    return sol.objective, sol.x, sol.duals[: s.I], owners


@dataclass
class PrimalRecovery:
    x: np.ndarray
    objective: float
    clearing_residual: float
    gap: float

    def to_dict(self) -> dict:
        return {"x": self.x.tolist(), "primal_value": self.objective,
                "clearing_residual": self.clearing_residual, "gap": self.gap}


def recover_primal(d: DualState, s: Scenario) -> PrimalRecovery:
    """Convex combination of pooled maximizers that clears the market at least cost."""
    if any(len(p) == 0 for p in d.pools):
        raise PoolError("empty maximizer pool; enrich the pool or increase restarts")
    obj, weights, _, owners = _pool_lp(s, d.pools)
    x = np.zeros((s.J, s.I))
    flat = [p for pool in d.pools for p in pool]
    for wgt, j, p in zip(weights, owners, flat):
        x[j] += wgt * p
    resid = float(np.max(np.abs(x.sum(axis=0) - s.supply)))
    if resid > 1e-7:
        raise PoolError(f"clearing residual {resid:.2e}; enrich the pool or increase restarts")
    return PrimalRecovery(x, float(obj), resid, abs(float(obj) - d.value))


# ---------------------------------------------------------------------------
# Fixed menus: large-market value and replica economies


def _cells(s: Scenario, menus: Sequence[Menu]):
    """Per (agent, action) choice probability, direction and maximal step."""
    cells = []
    for j, m in enumerate(menus):
        if m.kind != "polarized-rays":
            if m.kind == "singleton":
                continue
            raise ValueError("fixed-menu large-market values need ray or singleton menus")
        dirs = np.stack(m.rays[1:])
        probs = ChoiceModel(s, j).prob_negative(dirs)
        for k, (d, p) in enumerate(zip(dirs, probs), start=1):
            cells.append((j, k, d, float(p), m.y_max(k)))
    return cells


def _cell_lp(s: Scenario, eta: np.ndarray, cells, rho) -> tuple[float, np.ndarray]:
    """min sum rho pi_j.(eta_j + alpha y kappa) s.t. sum eta + sum rho alpha y kappa = n."""
    base = float(np.sum(s.pi * eta))
    if not cells:
        return base, np.zeros(0)
    A = np.column_stack([r * y * d for (j, k, d, _, y), r in zip(cells, rho)])
    obj = np.array([r * y * float(s.pi[j] @ d) for (j, k, d, _, y), r in zip(cells, rho)])
    sol = solve_lp(LpProblem(c=obj, A=A, senses=["="] * s.I, b=s.supply - eta.sum(axis=0),
                             lb=0.0, ub=1.0))
    if sol.status != "optimal":
        raise NumericalFailure(f"cell LP returned {sol.status}")
    return base + float(sol.objective), sol.x


def large_market_value(s: Scenario, menus: Sequence[Menu], eta=None) -> tuple[float, np.ndarray]:
    """Large-market cost of fixed menus with exact choice probabilities.

    Returns the value and the optimal per-cell step fractions.
    """
    eta = s.sigma if eta is None else np.asarray(eta, dtype=float)
    cells = _cells(s, menus)
    return _cell_lp(s, eta, cells, [c[3] for c in cells])


@dataclass
class ReplicaRun:
    N: int
    seed: int
    counts: dict
    rho: dict
    alpha: np.ndarray
    v_full: float
    v_restricted: float
    rho_dev: float
    damping: float = 1.0

    def to_dict(self) -> dict:
        return {"N": self.N, "seed": self.seed, "v_full": self.v_full,
                "v_restricted": self.v_restricted, "rho_dev": self.rho_dev,
                "damping": self.damping,
                "counts": {",".join(map(str, key)): v for key, v in self.counts.items()},
                "rho": {",".join(map(str, key)): v for key, v in self.rho.items()}}


def _assign_menus(N: int, options) -> list:
    """Menu per copy: ``floor(eps N)`` copies per option, leftovers to the heaviest."""
    counts = [int(math.floor(e * N)) for e, _ in options]
    heavy = int(np.argmax([e for e, _ in options]))
    counts[heavy] += N - sum(counts)
    out = []
    for c, (_, m) in zip(counts, options):
        out.extend([m] * c)
    return out


def _normalize_options(m_star) -> list:
    out = []
    for entry in m_star:
        opts = [(1.0, entry)] if isinstance(entry, Menu) else [(float(e), m) for e, m in entry]
        if abs(sum(e for e, _ in opts) - 1.0) > 1e-9:
            raise ValueError("randomization weights must sum to one")
        out.append(opts)
    return out


def replica_run(s: Scenario, m_star, N: int, seed: int) -> ReplicaRun:
    """One ``N``-replica economy under fixed large-market menus.

    ``m_star`` lists, per agent, a :class:`Menu` or ``[(weight, Menu), ...]``.
    Solves both the per-copy EOPR selection and the restricted program that
    gives every copy in a (group, menu, action) cell the same bundle.
    """
    if N < 1:
        raise ValueError("N must be positive")
    options = _normalize_options(m_star)
    rng = np.random.default_rng(seed)
    C = sample_profiles(s, N, rng)  # (N, J, I); prefix-consistent across N
    eta_rows, pi_rows, sets, cell_of = [], [], [], []
    cell_index: dict = {}
    cell_list = []
    for j, opts in enumerate(options):
        assigned = _assign_menus(N, opts)
        for copy, menu in enumerate(assigned):
            o = next(i for i, (_, m) in enumerate(opts) if m is menu)
            k = int(myopic_actions(menu, C[copy, j])[0])
            eta_rows.append(s.sigma[j])
            pi_rows.append(s.pi[j])
            if k == 0 or menu.kind == "singleton":
                sets.append(("point",))
            elif menu.kind == "remedial":
                sets.append(("box",))
            else:
                sets.append(("ray", menu.rays[k], menu.y_max(k)))
            key = (j, o, k)
            if key not in cell_index:
                cell_index[key] = len(cell_list)
                cell_list.append((key, menu))
            cell_of.append(cell_index[key])
    eta = np.array(eta_rows)
    pi = np.array(pi_rows)
    _, full_cost = eopr_lp(pi, eta, sets)
    counts = np.bincount(cell_of, minlength=len(cell_list))
    cells, rho = [], []
    for (key, menu), cnt in zip(cell_list, counts):
        j, o, k = key
        if k == 0 or menu.kind != "polarized-rays":
            continue
        cells.append((j, k, menu.rays[k], 0.0, menu.y_max(k)))
        rho.append(cnt / N)
    v_restricted, alpha = _cell_lp(s, s.sigma, cells, rho)
    # deviation of realized choice fractions from theoretical choice probabilities
    dev = []
    count_map = {}
    for (key, menu), cnt in zip(cell_list, counts):
        count_map[key] = int(cnt)
    for j, opts in enumerate(options):
        for o, (eps, menu) in enumerate(opts):
            if menu.kind != "polarized-rays":
                continue
            probs = ChoiceModel(s, j).prob_negative(np.stack(menu.rays[1:]))
            for k, p in enumerate(probs, start=1):
                dev.append(count_map.get((j, o, k), 0) / N - eps * p)
    rho_dev = float(np.sqrt(np.mean(np.square(dev)))) if dev else 0.0
    return ReplicaRun(N, seed, count_map, {key: c / N for key, c in count_map.items()}, alpha,
                      full_cost / N, v_restricted, rho_dev)


@dataclass
class ReplicaTable:
    runs: list
    rows: list  # per N: dict with mean, stderr, mean_abs_err, rho_rms
    slope: float | None
    v_inf: float

    def to_dict(self) -> dict:
        return {"v_inf": self.v_inf, "rho_slope": self.slope, "rows": self.rows}


def replica_sweep(s: Scenario, m_star, N_list: Sequence[int], seeds: Sequence[int],
                  workers: int = 1) -> ReplicaTable:
    """Batched replica runs with per-``N`` summaries and the CLT-rate slope of ``rho``."""
    options = _normalize_options(m_star)
    menus = [opts[0][1] for opts in options]
    v_inf = large_market_value(s, menus)[0] if all(len(o) == 1 for o in options) else float("nan")
    jobs = [(N, sd) for N in N_list for sd in seeds]
    with ThreadPoolExecutor(max_workers=max(1, workers)) as ex:
        runs = list(ex.map(lambda a: replica_run(s, m_star, *a), jobs))
    rows = []
    for N in N_list:
        rs = [r for r in runs if r.N == N]
        vr = np.array([r.v_restricted for r in rs])
        vf = np.array([r.v_full for r in rs])
        rows.append({
            "N": N,
            "mean_restricted": float(vr.mean()),
            "mean_full": float(vf.mean()),
            "stderr_restricted": float(vr.std(ddof=1) / np.sqrt(len(vr))) if len(vr) > 1 else 0.0,
            "mean_abs_err": float(np.mean(np.abs(vr - v_inf))),
            "mean_abs_err_full": float(np.mean(np.abs(vf - v_inf))),
            "rho_rms": float(np.sqrt(np.mean([r.rho_dev ** 2 for r in rs]))),
        })
    slope = None
    pts = [(r["N"], r["rho_rms"]) for r in rows if r["rho_rms"] > 0]
    if len(pts) >= 2:
        x = np.log([p[0] for p in pts])
        y = np.log([p[1] for p in pts])
        slope = float(np.polyfit(x, y, 1)[0])
    return ReplicaTable(runs, rows, slope, v_inf)


def canonical_menus(s: Scenario) -> list[Menu]:
    return [ray_menu(j, s.sigma[j], [(1.0, -1.0), (-1.0, 1.0)]) for j in range(s.J)]


def dual_protocol(s: Scenario, d: DualState) -> TradingProtocol:
    """EOPR protocol offering each agent its support-maximizing menu at the dual optimum."""
    menus = tuple(ev.menu(j, s.sigma[j]) for j, ev in enumerate(d.menus))
    for m in menus:
        if m.kind == "polarized-rays" and not check_polarized_menu(list(m.rays)).verdict:
            raise NumericalFailure("search returned a non-polarized menu")
    return TradingProtocol(s.sigma.copy(), menus)

