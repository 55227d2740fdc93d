"""Closed-form bounds, their numeric verification, and threshold search.

The threshold for a depth ``d`` is the largest ``p`` at which honest mining
is still a best response, i.e. where ``g*(p) - p`` first exceeds a small
deviation tolerance.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import solve_banded
from scipy.optimize import brentq
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .core import ActionKind, GameParams, Model
from .errors import NonMonotoneError
from .immediate import DEFAULT_TOL, SolveReport, solve, winning_probability
from .strategic import solve_strategic

log = logging.getLogger(__name__)

DEFAULT_BRACKETS = {Model.IMMEDIATE: (0.30, 0.60), Model.STRATEGIC: (0.25, 0.45)}
TABLE_DEPTHS = (2, 3, 5, 10, 15, 50)


def r_infinity(p: float, a: int, b: int) -> float:
    """Win probability when Miner 1 never capitulates: ``(p / (1 - p)) ** (1 + b - a)``."""
    if not (0 <= p < 0.5):
        raise ValueError(f"p out of range: {p!r} (the never-capitulate race needs p < 1/2)")
    deficit = 1 + b - a
    if deficit < 0:
        raise ValueError(f"state {(a, b)} is past the winning diagonal")
    if deficit == 0:
        return 1.0
    return min(1.0, max(0.0, (p / (1 - p)) ** deficit))


def r_absorbing_chain(p: float, deficits, n_max: int = 200) -> np.ndarray:
    """Absorption probabilities of a biased walk on ``0..n_max`` by linear solve.

    The walk steps toward 0 with probability ``p``; 0 is the target and
    ``n_max`` is treated as lost. Used as an oracle for :func:`r_infinity`.
    """
    deficits = np.atleast_1d(np.asarray(deficits, dtype=int))
    if deficits.max() >= n_max:
        raise ValueError("n_max must exceed every deficit")
    # unknowns x_1..x_{n_max-1}: x_l - p x_{l-1} - (1 - p) x_{l+1} = 0, x_0 = 1, x_n = 0
    n = n_max - 1
    ab = np.zeros((3, n))
    ab[0, 1:] = -(1 - p)
    ab[1, :] = 1.0
    ab[2, :-1] = -p
    rhs = np.zeros(n)
    rhs[0] = p
    x = np.concatenate(([1.0], solve_banded((1, 1), ab, rhs), [0.0]))
    return x[deficits]


def _h0_lower_poly(p):
    return 2 * p * p - (1 - p) ** 3


def _strategic_poly(p):
    return p**3 - 6 * p * p + 5 * p - 1


def _golden_poly(p):
    return p * p - 3 * p + 1


def h0_lower_radical() -> float:
    cube = (1 + 3 * math.sqrt(57)) ** (1 / 3)
    return (1 - 8 / cube + cube) / 3


_POLYS = {
    "h0_lower": (_h0_lower_poly, (0.0, 1.0)),
    "strategic_lower": (_strategic_poly, (0.0, 0.5)),
    "golden": (_golden_poly, (0.0, 1.0)),
}


@lru_cache(maxsize=None)
def polynomial_threshold(kind: str) -> float:
    """Root of the polynomial behind a named bound.

    ``h0_upper_witness`` is the fixed power 0.455 used by the deviating
    strategy at depth 3.
    """
    if kind == "h0_upper_witness":
        return 0.455
    if kind not in _POLYS:
        raise ValueError(f"unknown bound {kind!r}; choose from {sorted(_POLYS) + ['h0_upper_witness']}")
    f, (lo, hi) = _POLYS[kind]
    root = brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    if abs(f(root)) >= 1e-10:
        raise ArithmeticError(f"root certificate failed for {kind}: |poly| = {abs(f(root))}")
    if kind == "h0_lower" and abs(root - h0_lower_radical()) > 1e-10:
        raise ArithmeticError("bisection root and radical form disagree")
    return root


@dataclass(frozen=True)
class BoundCatalog:
    h0_lower: float
    golden: float
    h0_upper_witness: float
    strategic_lower: float


def bound_catalog() -> BoundCatalog:
    return BoundCatalog(
        h0_lower=polynomial_threshold("h0_lower"),
        golden=polynomial_threshold("golden"),
        h0_upper_witness=polynomial_threshold("h0_upper_witness"),
        strategic_lower=polynomial_threshold("strategic_lower"),
    )


def fixed_strategy_gain_d3(p: float) -> float:
    """Gain of mining on {(0,0),(0,1),(1,1),(1,2),(2,2)} and landing at (0,1), depth 3."""
    den = 1 - p * p + 2 * p**3 - p**4
    if den <= 0:
        raise ValueError(f"denominator vanishes at p={p!r}")
    return p * p * (2 + 2 * p - 5 * p * p + 2 * p**3) / den


DEVIATOR_D3_MINING = ((0, 0), (0, 1), (1, 1), (1, 2), (2, 2))
DEVIATOR_D3_LANDING = 1


@dataclass
class LemmaCheck:
    name: str
    status: str  # "pass", "fail" or "skipped"
    margin: float | None = None
    state: tuple | None = None
    detail: str = ""

    def line(self) -> str:
        m = "" if self.margin is None else f" margin={self.margin:.6g}"
        return f"[{self.status.upper():>7}] {self.name}{m} {self.detail}".rstrip()


def verify_lemma_bounds(report: SolveReport, tol: float = 1e-9) -> list[LemmaCheck]:
    """Compare the solved potential and policy with the analytic lemmas.

    Checks that only hold below a power threshold are reported as skipped
    above it.
    """
    params = report.params
    if params.model is not Model.IMMEDIATE:
        raise ValueError("lemma bounds concern the immediate model")
    p, g, d = params.p, report.g_star, params.d
    phi = report.phi
    pol = report.policy
    cat = bound_catalog()
    checks = []

    def mining_gap(a, b):
        # capitulation value minus mining value at (a, b), b < d
        cap = report.potential[:b, 0].max()
        mine = p * phi(a + 1, b) + (1 - p) * phi(a, b + 1) - (1 - p) * g
        return cap - mine

    bound = (2 * p * p - p) / (1 - p) ** 2 + g / (1 - p)
    m = bound - phi(1, 2)
    checks.append(LemmaCheck("phi(1,2) upper bound", "pass" if m >= -tol else "fail", m, (1, 2)))

    if p < 0.5:
        m = p / (1 - p) - phi(1, 1)
        checks.append(LemmaCheck("phi(1,1) <= p/(1-p)", "pass" if m >= -tol else "fail", m, (1, 1)))
    else:
        checks.append(LemmaCheck("phi(1,1) <= p/(1-p)", "skipped", detail="needs p < 1/2"))

    name = "(0,2) is not a mining state"
    if p < cat.h0_lower and d > 2:
        ok = pol.kind[2, 0] != ActionKind.MINE
        checks.append(LemmaCheck(name, "pass" if ok else "fail", mining_gap(0, 2), (0, 2)))
    else:
        checks.append(LemmaCheck(name, "skipped", detail=f"needs p < {cat.h0_lower:.6f} and d > 2"))

    name = "mining at (0,1) implies mining at (0,2)"
    if p < cat.golden and d > 2:
        if pol.kind[1, 0] != ActionKind.MINE:
            checks.append(LemmaCheck(name, "pass", mining_gap(0, 1), (0, 1), "vacuous: (0,1) capitulates"))
        else:
            rhs = (1 - p) * phi(0, 2) - p * (1 - 3 * p + p * p) / (1 - p)
            m = rhs - phi(0, 1)
            ok = pol.kind[2, 0] == ActionKind.MINE and m >= -tol
            checks.append(LemmaCheck(name, "pass" if ok else "fail", m, (0, 1)))
    else:
        checks.append(LemmaCheck(name, "skipped", detail=f"needs p < {cat.golden:.6f} and d > 2"))
    return checks


def potential_property_checks(report: SolveReport, corollary_c=(1, 2, 3), tol: float = 1e-8) -> list[LemmaCheck]:
    """Structural properties of a solved immediate potential."""
    params = report.params
    p, g, d = params.p, report.g_star, params.d
    phi = report.potential
    checks = []
    vals = phi[~np.isnan(phi)]
    m = float(vals.min())
    checks.append(LemmaCheck("potential non-negative", "pass" if m >= -1e-10 else "fail", m))

    worst = np.inf
    for b in range(d + 1):
        diffs = np.diff(phi[b, : b + 2])
        worst = min(worst, float(diffs.min()))
    checks.append(LemmaCheck("potential non-decreasing in a", "pass" if worst >= -tol else "fail", worst))

    gap = phi[1, 0] - phi[0, 0]
    err = abs(gap - (g - p) / (1 - p))
    checks.append(LemmaCheck("phi(0,1)-phi(0,0) = (g*-p)/(1-p)", "pass" if err <= 1e-9 else "fail", -err))

    win_ok = max(abs(phi[b, b + 1] - (b + 1 - g)) for b in range(d + 1))
    checks.append(LemmaCheck("phi = a - g* on winning states", "pass" if win_ok <= 1e-9 else "fail", -win_ok))

    r = winning_probability(params, report.policy).r
    worst, where = np.inf, None
    for c in corollary_c:
        for b in range(d + 1 - c):
            for a in range(b + 2):
                m = phi[b, a] - (phi[b + c, a + c] - c * r[b + c, a + c])
                if m < worst:
                    worst, where = m, (a, b, c)
    checks.append(LemmaCheck("corollary phi(a,b) >= phi(a+c,b+c) - c r(a+c,b+c)", "pass" if worst >= -tol else "fail", worst, where))

    if p < 0.5:
        worst, where = np.inf, None
        for b in range(d + 1):
            for a in range(b + 2):
                m = r_infinity(p, a, b) - r[b, a]
                if m < worst:
                    worst, where = m, (a, b)
        checks.append(LemmaCheck("r <= r_infinity", "pass" if worst >= -tol else "fail", worst, where))
    else:
        checks.append(LemmaCheck("r <= r_infinity", "skipped", detail="needs p < 1/2"))
    return checks


def rinf_checks(ps=(0.1, 0.2, 0.3, 0.4), deficits=range(21), n_max: int = 200, tol: float = 1e-12) -> list[LemmaCheck]:
    out = []
    deficits = np.asarray(list(deficits))
    for p in ps:
        chain = r_absorbing_chain(p, deficits, n_max)
        closed = np.array([r_infinity(p, 0, int(l) - 1) for l in deficits])
        err = float(np.max(np.abs(chain - closed)))
        out.append(LemmaCheck(f"r_infinity vs absorbing chain p={p:g}", "pass" if err <= tol else "fail", -err))
    return out


@dataclass
class ThresholdResult:
    model: Model
    d: int
    p_hat: float
    bracket: tuple[float, float]
    gap_at_bracket: float
    deviation_eps: float
    scan: list = field(default_factory=list)
    a_max: int | None = None


def deviation_gap(model, p: float, d: int, a_max=None, tol: float = DEFAULT_TOL) -> float:
    """``g*(p) - p`` for the given game."""
    model = Model(model)
    if model is Model.IMMEDIATE:
        return solve(GameParams(model, p, d), tol=tol).g_star - p
    return solve_strategic(GameParams(model, p, d, a_max), tol=tol, sensitivity=False).g_star - p


def find_threshold(
    model,
    d: int,
    p_tol: float = 1e-5,
    deviation_eps: float = 1e-7,
    bracket=None,
    scan_step: float = 0.01,
    a_max=None,
    tol: float = DEFAULT_TOL,
    n_jobs: int = 1,
) -> ThresholdResult:
    """Locate the power where deviating from honest mining starts to pay.

    A coarse scan over ``bracket`` must show the predicate
    ``g*(p) - p > deviation_eps`` switching from false to true exactly once;
    bisection then refines the crossing cell to width ``p_tol``.
    """
    model = Model(model)
    if d < 2:
        raise ValueError("d must be >= 2")
    if p_tol < 1e-5:
        raise ValueError("p_tol must be >= 1e-5")
    lo, hi = bracket or DEFAULT_BRACKETS[model]
    n = int(round((hi - lo) / scan_step))
    grid = [round(lo + i * scan_step, 12) for i in range(n)] + [hi]

    def gap(p):
        return deviation_gap(model, p, d, a_max, tol)

    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            gaps = list(pool.map(gap, grid))
    else:
        gaps = [gap(p) for p in grid]
    flags = [g > deviation_eps for g in gaps]
    scan = list(zip(grid, gaps))
    if flags[0]:
        raise NonMonotoneError(f"deviation already profitable at the lower end p={grid[0]}", [grid[0]])
    if not flags[-1]:
        raise NonMonotoneError(f"deviation not profitable at the upper end p={grid[-1]}", [grid[-1]])
    first = flags.index(True)
    offending = [p for p, f in zip(grid[first:], flags[first:]) if not f]
    if offending:
        raise NonMonotoneError(f"predicate is not monotone over the scan; false again at {offending}", offending)

    p_lo, p_hi = grid[first - 1], grid[first]
    g_hi = gaps[first]
    while p_hi - p_lo > p_tol:
        mid = 0.5 * (p_lo + p_hi)
        g_mid = gap(mid)
        if g_mid > deviation_eps:
            p_hi, g_hi = mid, g_mid
        else:
            p_lo = mid
    log.info("threshold %s d=%d: %.6f in [%.6f, %.6f]", model.value, d, 0.5 * (p_lo + p_hi), p_lo, p_hi)
    return ThresholdResult(
        model=model,
        d=d,
        p_hat=0.5 * (p_lo + p_hi),
        bracket=(p_lo, p_hi),
        gap_at_bracket=g_hi,
        deviation_eps=deviation_eps,
        scan=scan,
        a_max=a_max,
    )


def reproduce_table(d_list=TABLE_DEPTHS, model=Model.IMMEDIATE, n_jobs: int = 1, **kwargs) -> list[ThresholdResult]:
    """One threshold per depth, in the order given."""
    d_list = list(d_list)
    if any(d < 2 for d in d_list):
        raise ValueError("every d must be >= 2")
    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            return list(pool.map(lambda d: find_threshold(model, d, **kwargs), d_list))
    return [find_threshold(model, d, **kwargs) for d in d_list]


class ThresholdSearch(BaseEstimator):
    """Estimator wrapper around :func:`find_threshold`."""

    def __init__(self, model="immediate", d=10, p_tol=1e-5, deviation_eps=1e-7, a_max=None, n_jobs=1):
        self.model = model
        self.d = d
        self.p_tol = p_tol
        self.deviation_eps = deviation_eps
        self.a_max = a_max
        self.n_jobs = n_jobs

    def fit(self, X=None, y=None):
        res = find_threshold(
            self.model, self.d, p_tol=self.p_tol, deviation_eps=self.deviation_eps, a_max=self.a_max, n_jobs=self.n_jobs
        )
        self.result_ = res
        self.threshold_ = res.p_hat
        self.bracket_ = res.bracket
        return self

    def predict(self, X):
        """1 where deviating pays at the given powers, judged by the fitted threshold."""
        check_is_fitted(self, "result_")
        p = np.asarray(X, dtype=float).ravel()
        return (p > self.threshold_).astype(np.int64)


def catalog_checks() -> list[LemmaCheck]:
    """Root certificates for every catalog constant."""
    out = []
    for kind, (f, _) in _POLYS.items():
        root = polynomial_threshold(kind)
        res = abs(f(root))
        out.append(LemmaCheck(f"root certificate {kind}={root:.12f}", "pass" if res < 1e-10 else "fail", -res))
    diff = abs(polynomial_threshold("h0_lower") - h0_lower_radical())
    out.append(LemmaCheck("h0_lower radical form agrees", "pass" if diff <= 1e-10 else "fail", -diff))
    return out


def fixed_strategy_checks(ps=(0.40, 0.42, 0.44, 0.46, 0.48, 0.50), tol: float = 1e-9) -> list[LemmaCheck]:
    """Closed-form depth-3 deviator gain against renewal-reward evaluation."""
    from .core import Policy
    from .immediate import evaluate_policy

    out = []
    for p in ps:
        params = GameParams(Model.IMMEDIATE, p, 3)
        policy = Policy.from_mining_set(params, DEVIATOR_D3_MINING, DEVIATOR_D3_LANDING)
        err = abs(evaluate_policy(params, policy) - fixed_strategy_gain_d3(p))
        out.append(LemmaCheck(f"depth-3 deviator closed form p={p:g}", "pass" if err <= tol else "fail", -err))
    return out


def threshold_depth_sensitivity(d: int = 50, d_ref: int = 80, **kwargs) -> tuple[ThresholdResult, ThresholdResult, float]:
    """Thresholds at ``d`` and ``d_ref`` and their absolute difference."""
    a = find_threshold(Model.IMMEDIATE, d, **kwargs)
    b = find_threshold(Model.IMMEDIATE, d_ref, **kwargs)
    return a, b, abs(a.p_hat - b.p_hat)
