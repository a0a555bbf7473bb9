"""Ray and cone computations: polarization tests and separating directions."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lp import STRICT_EPS, FarkasCertificate, LpProblem, farkas_alternative, solve_lp


@dataclass(frozen=True, eq=False)
class Ray:
    """Trading set ``{eta + y * kappa : y >= 0}``; ``kappa == 0`` is the singleton ``{eta}``."""

    eta: np.ndarray
    kappa: np.ndarray

    @property
    def is_singleton(self) -> bool:
        return not np.any(self.kappa)

    @property
    def is_non_monotone(self) -> bool:
        return bool(np.any(self.kappa > 0) and np.any(self.kappa < 0))

    def y_max(self) -> float:
        """Largest step keeping ``eta + y * kappa`` non-negative."""
        return ray_y_max(self.eta, self.kappa)


def ray_y_max(eta: np.ndarray, kappa: np.ndarray) -> float:
    neg = kappa < 0
    if not np.any(neg):
        return np.inf
    return float(np.min(eta[neg] / -kappa[neg]))


def is_non_monotone(kappa: np.ndarray) -> bool:
    return bool(np.any(kappa > 0) and np.any(kappa < 0))


@dataclass
class PairCertificate:
    """Outcome of a pairwise polarization test.

    ``kind`` is ``"weights"`` (``y1 k1 + y2 k2 >= 0``), ``"violation"`` (``c >= 0``
    with ``c.k_strict < 0`` and ``c.k_weak <= 0``; ``strict`` names which ray
    has the strict inequality) or ``"exempt"`` (a singleton is involved).
    """

    kind: str
    weights: np.ndarray | None = None
    c: np.ndarray | None = None
    strict: int | None = None

    def verify(self, k1: np.ndarray, k2: np.ndarray, tol: float = 1e-9) -> bool:
        if self.kind == "exempt":
            return not np.any(k1) or not np.any(k2)
        if self.kind == "weights":
            y1, y2 = self.weights
            return bool(min(y1, y2) >= -tol and max(y1, y2) > tol
                        and np.all(y1 * k1 + y2 * k2 >= -tol))
        strict, weak = (k1, k2) if self.strict == 0 else (k2, k1)
        return bool(np.all(self.c >= -tol) and self.c @ strict < -tol and self.c @ weak <= tol)


def _check_endpoints(k1, k2):
    if isinstance(k1, Ray) and isinstance(k2, Ray) and not np.allclose(k1.eta, k2.eta, atol=1e-12):
        raise ValueError("rays must share the same endpoint")


def _direction(k) -> np.ndarray:
    return np.asarray(k.kappa if isinstance(k, Ray) else k, dtype=float)


def is_polarized_pair(k1, k2) -> tuple[bool, PairCertificate]:
    """Polarization of two rays from a common endpoint.

    Accepts :class:`Ray` objects or bare direction vectors. Singletons are
    exempt. Otherwise both orderings are run through the Farkas alternative; a
    violating cost vector is returned when one exists.
    """
    _check_endpoints(k1, k2)
    a, b = _direction(k1), _direction(k2)
    if a.shape != b.shape:
        raise ValueError("directions must have equal dimension")
    if not np.any(a) or not np.any(b):
        return True, PairCertificate("exempt")
    first = farkas_alternative(a, b)
    if first.alternative == 1:
        return False, PairCertificate("violation", c=first.witness, strict=0)
    second = farkas_alternative(b, a)
    if second.alternative == 1:
        return False, PairCertificate("violation", c=second.witness, strict=1)
    y1, y2 = first.witness
    return True, PairCertificate("weights", weights=np.array([y1, y2]))


def polarized_interval(a: np.ndarray, b: np.ndarray, tol: float = 0.0) -> bool:
    """Fast exact test: is ``(1 - t) a + t b >= 0`` for some ``t`` in ``[0, 1]``?

    Works on batches: ``a`` and ``b`` of shape ``(..., I)``; singletons (zero
    rows) count as polarized.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = b - a
    lo = np.zeros(a.shape[:-1])
    hi = np.ones(a.shape[:-1])
    with np.errstate(divide="ignore", invalid="ignore"):
        bound = -a / d
    pos, neg = d > 0, d < 0
    lo = np.maximum(lo, np.max(np.where(pos, bound, -np.inf), axis=-1))
    hi = np.minimum(hi, np.min(np.where(neg, bound, np.inf), axis=-1))
    # coordinates with d == 0 need a >= 0
    flat_ok = np.all(np.where(d == 0, a >= -tol, True), axis=-1)
    ok = (lo <= hi + tol) & flat_ok
    zero = ~np.any(a != 0, axis=-1) | ~np.any(b != 0, axis=-1)
    return ok | zero


@dataclass
class PolarizationReport:
    verdict: bool
    pair_certificates: dict = field(default_factory=dict)
    violating_pair: tuple[int, int] | None = None
    cardinality_ok: bool = True
    disjoint_negatives: bool = True
    overlapping_pair: tuple[int, int] | None = None
    monotone_rays: list[int] = field(default_factory=list)
    failed_clause: str | None = None

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "failed_clause": self.failed_clause,
            "violating_pair": self.violating_pair,
            "cardinality_ok": self.cardinality_ok,
            "disjoint_negatives": self.disjoint_negatives,
            "overlapping_pair": self.overlapping_pair,
            "monotone_rays": self.monotone_rays,
            "certificates": {
                f"{i},{k}": {
                    "kind": c.kind,
                    "weights": None if c.weights is None else c.weights.tolist(),
                    "c": None if c.c is None else c.c.tolist(),
                }
                for (i, k), c in self.pair_certificates.items()
            },
        }


def check_polarized_menu(rays) -> PolarizationReport:
    """Validate a menu of rays from a common endpoint.

    The verdict requires every non-singleton ray to be non-monotone, every
    non-singleton pair to be polarized and at most ``I`` non-singleton rays.
    Disjointness of negative coordinates is reported separately.
    """
    dirs = [_direction(r) for r in rays]
    if isinstance(rays[0], Ray) if len(rays) else False:
        for r in rays[1:]:
            _check_endpoints(rays[0], r)
    report = PolarizationReport(True)
    active = [k for k, d in enumerate(dirs) if np.any(d)]
    if not active:
        return report
    dim = dirs[active[0]].size
    report.monotone_rays = [k for k in active if not is_non_monotone(dirs[k])]
    for x, k1 in enumerate(active):
        for k2 in active[x + 1:]:
            ok, cert = is_polarized_pair(dirs[k1], dirs[k2])
            report.pair_certificates[(k1, k2)] = cert
            if not ok and report.violating_pair is None:
                report.violating_pair = (k1, k2)
            if report.disjoint_negatives and np.any((dirs[k1] < 0) & (dirs[k2] < 0)):
                report.disjoint_negatives = False
                report.overlapping_pair = (k1, k2)
    report.cardinality_ok = len(active) <= dim
    if report.monotone_rays:
        report.failed_clause = "monotone ray"
    elif report.violating_pair is not None:
        report.failed_clause = "polarization"
    elif not report.cardinality_ok:
        report.failed_clause = "cardinality"
    report.verdict = report.failed_clause is None
    return report


def separating_direction(c1, c2, delta, eps: float = STRICT_EPS) -> np.ndarray | None:
    """Max-margin ``g`` with ``delta.g < 0``, ``c1.g < 0`` and ``c2.g > 0``.

    Solves ``max t`` s.t. ``delta.g <= -t``, ``c1.g <= -t``, ``c2.g >= t``,
    ``-1 <= g <= 1``; returns ``None`` when the optimal margin is at most
    ``eps``. The result is scaled to unit sup-norm.
    """
    c1, c2, delta = (np.asarray(v, dtype=float) for v in (c1, c2, delta))
    if not np.any(delta):
        raise ValueError("delta must be nonzero")
    n = delta.size
    # variables (g_1..g_n, t)
    A = np.vstack([
        np.append(delta, 1.0),
        np.append(c1, 1.0),
        np.append(-c2, 1.0),
    ])
    lb = np.append(-np.ones(n), 0.0)
    ub = np.append(np.ones(n), np.inf)
    c = np.zeros(n + 1)
    c[-1] = 1.0
    sol = solve_lp(LpProblem(c=c, A=A, senses=["<="] * 3, b=np.zeros(3), lb=lb, ub=ub, sense="max"))
    if sol.status != "optimal" or sol.objective <= eps:
        return None
    g = sol.x[:n]
    g = g / np.max(np.abs(g))
    margin = min(-(delta @ g), -(c1 @ g), c2 @ g)
    if margin < 1e-8:
        return None
    return g


__all__ = [
    "Ray", "PairCertificate", "PolarizationReport", "FarkasCertificate",
    "is_polarized_pair", "polarized_interval", "check_polarized_menu",
    "separating_direction", "ray_y_max", "is_non_monotone",
]
