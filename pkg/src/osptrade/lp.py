"""Linear programming with certified solutions and Farkas alternatives.

Solves are delegated to HiGHS through :func:`scipy.optimize.linprog`; every
optimal answer is re-checked for primal feasibility and complementary
slackness before it is returned, and Farkas witnesses are re-substituted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

FEAS_TOL = 1e-9
OPT_TOL = 1e-7
STRICT_EPS = 1e-6


class NumericalFailure(RuntimeError):
    """The solver answer could not be certified within tolerance."""


@dataclass
class LpProblem:
    """``min/max c.x`` subject to ``A x (<=|=|>=) b`` and ``lb <= x <= ub``.

    ``senses`` holds one of ``"<="``, ``"="``, ``">="`` per row. ``A`` may be
    dense or scipy-sparse.
    """

    c: np.ndarray
    A: np.ndarray | sp.spmatrix | None = None
    senses: list[str] | None = None
    b: np.ndarray | None = None
    lb: np.ndarray | float | None = 0.0
    ub: np.ndarray | float | None = None
    sense: str = "min"

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        n = self.c.size
        if not np.all(np.isfinite(self.c)):
            raise ValueError("objective coefficients must be finite")
        if self.A is None:
            self.A = sp.csr_matrix((0, n))
            self.senses = []
            self.b = np.zeros(0)
        if not sp.issparse(self.A):
            self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        if self.A.shape[1] != n or self.A.shape[0] != self.b.size or len(self.senses) != self.b.size:
            raise ValueError("inconsistent LP dimensions")
        bad = set(self.senses) - {"<=", "=", ">="}
        if bad:
            raise ValueError(f"unknown row senses {sorted(bad)}")
        self.lb = _bound_vector(self.lb, n, -np.inf)
        self.ub = _bound_vector(self.ub, n, np.inf)
        if self.sense not in ("min", "max"):
            raise ValueError("sense must be 'min' or 'max'")

    @property
    def n_vars(self) -> int:
        return self.c.size


def _bound_vector(v, n, default):
    if v is None:
        return np.full(n, default)
    v = np.asarray(v, dtype=float)
    if v.ndim == 0:
        return np.full(n, float(v))
    return v.reshape(-1)


@dataclass
class LpSolution:
    status: str
    x: np.ndarray | None = None
    duals: np.ndarray | None = None
    objective: float | None = None
    reduced_costs: np.ndarray | None = None


def solve_lp(p: LpProblem, feas_tol: float = FEAS_TOL, opt_tol: float = OPT_TOL) -> LpSolution:
    """Solve ``p``; ``duals`` are the sensitivities d(objective)/d(b) per row."""
    senses = np.asarray(p.senses)
    A = sp.csr_matrix(p.A) if sp.issparse(p.A) else p.A
    le, eq, ge = senses == "<=", senses == "=", senses == ">="
    ub_rows = np.flatnonzero(le | ge)
    eq_rows = np.flatnonzero(eq)
    sign = np.where(ge[ub_rows], -1.0, 1.0)
    A_ub = A[ub_rows] if len(ub_rows) else None
    if A_ub is not None:
        A_ub = (sp.diags(sign) @ A_ub) if sp.issparse(A_ub) else sign[:, None] * A_ub
    b_ub = sign * p.b[ub_rows] if len(ub_rows) else None
    A_eq = A[eq_rows] if len(eq_rows) else None
    b_eq = p.b[eq_rows] if len(eq_rows) else None
    flip = -1.0 if p.sense == "max" else 1.0
    bounds = list(zip(np.where(np.isinf(p.lb), None, p.lb), np.where(np.isinf(p.ub), None, p.ub)))
    res = linprog(flip * p.c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                  bounds=bounds, method="highs",
                  options={"primal_feasibility_tolerance": 1e-10,
                           "dual_feasibility_tolerance": 1e-10})
    if res.status == 2:
        return LpSolution("infeasible")
    if res.status == 3:
        return LpSolution("unbounded")
    if res.status != 0:
        raise NumericalFailure(f"LP solver stopped with status {res.status}: {res.message}")
    x = np.asarray(res.x)
    duals = np.zeros(p.b.size)
    if len(ub_rows):
        duals[ub_rows] = sign * res.ineqlin.marginals
    if len(eq_rows):
        duals[eq_rows] = res.eqlin.marginals
    duals *= flip
    sol = LpSolution("optimal", x, duals, float(p.c @ x))
    _certify(p, sol, feas_tol, opt_tol)
    return sol


def _certify(p: LpProblem, sol: LpSolution, feas_tol: float, opt_tol: float) -> None:
    x = sol.x
    Ax = p.A @ x
    scale = 1.0 + np.abs(p.b)
    senses = np.asarray(p.senses)
    viol = np.zeros_like(Ax)
    viol = np.where(senses == "<=", Ax - p.b, viol)
    viol = np.where(senses == ">=", p.b - Ax, viol)
    viol = np.where(senses == "=", np.abs(Ax - p.b), viol)
    # solver tolerances are relative to row scale
    if np.any(viol > 1e3 * feas_tol * scale) or np.any(x < p.lb - 1e3 * feas_tol * (1 + np.abs(p.lb))) \
            or np.any(x > p.ub + 1e3 * feas_tol * (1 + np.abs(p.ub))):
        raise NumericalFailure("solver returned a primal point outside the feasible set")
    slack = np.where(senses == "=", 0.0, np.abs(Ax - p.b))
    if np.any(np.abs(sol.duals) * slack > opt_tol * (1 + abs(sol.objective))):
        raise NumericalFailure("complementary slackness violated")


# ---------------------------------------------------------------------------
# Farkas alternatives


@dataclass
class FarkasCertificate:
    """Witness for one side of the alternative decided by :func:`farkas_alternative`.

    ``kind == "feasible-witness"``: ``witness`` is ``c >= 0`` with ``c.u < 0``
    and ``c.v <= 0``.
    ``kind == "infeasibility-multipliers"``: ``witness`` is ``(y_u, y_v)``
    with ``y_u > 0``, ``y_v >= 0`` and ``y_u u + y_v v >= 0``.
    """

    kind: str
    witness: np.ndarray

    @property
    def alternative(self) -> int:
        return 1 if self.kind == "feasible-witness" else 2

    def verify(self, u: np.ndarray, v: np.ndarray, tol: float = FEAS_TOL) -> bool:
        w = self.witness
        if self.kind == "feasible-witness":
            return bool(np.all(w >= -tol) and w @ u < -tol and w @ v <= tol)
        yu, yv = w
        return bool(yu > tol and yv >= -tol and np.all(yu * u + yv * v >= -tol))


def farkas_alternative(u, v, eps: float = STRICT_EPS) -> FarkasCertificate:
    """Decide ``exists c >= 0: c.u < 0, c.v <= 0`` against its Farkas alternative.

    Exactly one holds: either such a ``c`` exists, or there are ``y_u > 0``,
    ``y_v >= 0`` with ``y_u u + y_v v >= 0``. The returned witness is
    re-verified by substitution.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape or u.ndim != 1:
        raise ValueError("u and v must be vectors of equal dimension")
    n = u.size
    # min c.u over the unit box subject to c.v <= 0
    sol = solve_lp(LpProblem(c=u, A=v[None, :], senses=["<="], b=[0.0], lb=0.0, ub=1.0))
    if sol.status == "optimal" and sol.objective < -eps:
        c = np.clip(sol.x, 0.0, None)
        c = c / np.max(c)
        cert = FarkasCertificate("feasible-witness", c)
        if cert.verify(u, v):
            return cert
    # alternative: u + y v >= 0 with y >= 0, smallest y
    sol = solve_lp(LpProblem(c=[1.0], A=v[:, None], senses=[">="] * n, b=-u, lb=0.0))
    if sol.status == "optimal":
        cert = FarkasCertificate("infeasibility-multipliers", np.array([1.0, sol.x[0]]))
        if cert.verify(u, v):
            return cert
    raise NumericalFailure("neither Farkas alternative could be certified")
