"""Strategic-release game: Miner 1 may also withhold blocks and release them
later, overriding the honest branch.

Alongside the solver this module evaluates the closed-form candidate
potential that extends the immediate-game potential to states where Miner 1
is two or more blocks ahead, and checks that it satisfies the strategic
recurrence.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import _kernels
from ._validation import check_states, check_tolerance
from .core import NO_ACTION, ActionKind, GameParams, GameState, Model, Policy
from .errors import ConvergenceError, InvalidStateError
from .immediate import DEFAULT_MAX_ITERS, DEFAULT_TOL, TIE_TOL, SolveReport, solve

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class StrategicSolveReport:
    params: GameParams
    g_star: float
    potential: np.ndarray
    policy: Policy
    iterations: int
    residual: float
    g_delta: float
    frontier_is_best_response: bool
    tol: float
    # |g*(a_max) - g*(a_half)|, None when not computed
    truncation_sensitivity: float | None = None
    sensitivity_a_max: int | None = None

    @property
    def majority_flag(self) -> bool:
        return self.params.majority

    def psi(self, a: int, b: int) -> float:
        return float(self.potential[b, a])


def _require_strategic(params: GameParams):
    if params.model is not Model.STRATEGIC:
        raise ValueError(f"expected the strategic model, got {params.model.value}")


def greedy_policy(params: GameParams, psi: np.ndarray, g: float) -> Policy:
    """Argmax policy with ties broken Capitulate, then Release, then Mine.

    At ``a = a_max`` the policy always releases.
    """
    _require_strategic(params)
    p, d, a_max = params.p, params.d, params.a_max
    kind = np.full(params.shape, NO_ACTION, dtype=np.int8)
    landing = np.full(params.shape, -1, dtype=np.int64)
    for b in range(d + 1):
        if b >= 1:
            col = psi[:b, 0]
            best_cap = col.max()
            s = int(np.argmax(col >= best_cap - TIE_TOL))
        else:
            best_cap = -np.inf
        for a in range(a_max + 1):
            release = psi[0, a - b - 1] + b + 1 - g if a >= b + 1 else -np.inf
            if a < a_max and b < d:
                mine = p * psi[b, a + 1] + (1 - p) * psi[b + 1, a] - (1 - p) * g
            else:
                mine = -np.inf
            if a == a_max:
                kind[b, a] = ActionKind.RELEASE
            elif b >= 1 and best_cap >= max(release, mine) - TIE_TOL:
                kind[b, a], landing[b, a] = ActionKind.CAPITULATE, s
            elif release >= mine - TIE_TOL:
                kind[b, a] = ActionKind.RELEASE
            else:
                kind[b, a] = ActionKind.MINE
    return Policy(params.model, d, a_max, kind, landing)


def _iterate(params, tol, max_iters):
    g, h, iters, g_delta, residual, ok = _kernels.relative_value_iteration(
        True, params.p, params.d, params.a_max, tol, int(max_iters)
    )
    if not ok:
        raise ConvergenceError(
            f"strategic solve did not converge in {iters} iterations "
            f"(p={params.p}, d={params.d}, a_max={params.a_max}, residual={residual:.3e})",
            residual=max(residual, g_delta),
            iterations=iters,
        )
    return float(g), np.array(h), int(iters), float(g_delta), float(residual)


def solve_strategic(
    params: GameParams,
    tol: float = DEFAULT_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
    sensitivity: bool = True,
) -> StrategicSolveReport:
    """Optimal gain per level, potential and policy of the strategic game.

    At ``a = a_max`` Miner 1 must release. With ``sensitivity`` the game is
    re-solved at ``max(d + 2, a_max // 2)`` to measure the effect of the cap.
    """
    _require_strategic(params)
    check_tolerance(tol, max_iters)
    g, h, iters, g_delta, residual = _iterate(params, tol, max_iters)
    h.setflags(write=False)
    sens = a_half = None
    if sensitivity:
        a_half = max(params.d + 2, params.a_max // 2)
        if a_half < params.a_max:
            g_half = _iterate(GameParams(Model.STRATEGIC, params.p, params.d, a_half), tol, max_iters)[0]
            sens = abs(g - g_half)
        else:
            sens = 0.0
    log.debug("strategic solve p=%g d=%d a_max=%d: g*=%.15g", params.p, params.d, params.a_max, g)
    return StrategicSolveReport(
        params=params,
        g_star=g,
        potential=h,
        policy=greedy_policy(params, h, g),
        iterations=iters,
        residual=residual,
        g_delta=g_delta,
        frontier_is_best_response=bool(abs(g - params.p) <= tol),
        tol=tol,
        truncation_sensitivity=sens,
        sensitivity_a_max=a_half,
    )


def strategic_layers(params: GameParams, n_layers: int) -> Iterator[np.ndarray]:
    """Yield the raw (unshifted) layers ``g_1, g_2, ...`` of the recurrence."""
    _require_strategic(params)
    prev = np.zeros(params.shape)
    cur = np.zeros(params.shape)
    for _ in range(n_layers):
        _kernels.strategic_layer(params.p, params.d, params.a_max, prev, cur)
        yield cur.copy()
        prev, cur = cur, prev


@dataclass(frozen=True)
class SolParams:
    lam: float
    mu: float
    c: float

    @classmethod
    def from_p(cls, p: float) -> "SolParams":
        if not (0 <= p < 0.5):
            raise ValueError(f"p out of range for the closed-form potential: {p!r} (need p < 1/2)")
        den = 1 - 2 * p
        return cls((1 - p) ** 2 / den, p * p / den, p * (1 - p) / den)

    def linear(self, a, b):
        return a * self.lam - b * self.mu - self.c


def _phi_table(phi) -> np.ndarray:
    if isinstance(phi, SolveReport):
        return phi.potential
    return np.asarray(phi, dtype=float)


def sol_value(p: float, state, phi) -> float:
    """Candidate potential: the immediate potential for ``a <= b + 1`` and a
    linear extension beyond."""
    sp = SolParams.from_p(p)
    a, b = state
    if a < 0 or b < 0:
        raise InvalidStateError(f"negative state {tuple(state)}")
    if a > b + 1:
        return float(sp.linear(a, b))
    table = _phi_table(phi)
    if b >= table.shape[0]:
        raise ValueError(f"potential table stops at b={table.shape[0] - 1}, need b={b}")
    return float(table[b, a])


def certificate_margin(p: float, b: int) -> float:
    """Slack of the sufficient condition for releasing at ``(b + 1, b)``."""
    return b * (1 - 2 * p) ** 2 + 1 - 5 * p + 6 * p * p - p**3


@dataclass
class SolVerification:
    p: float
    passed: bool
    first_violation: GameState | None
    margin: float
    claim: str | None = None
    checked: int = 0
    # sol_R - sol_M at each (b + 1, b) using the computed potential
    direct_margins: dict = field(default_factory=dict)

    def summary(self) -> str:
        if self.passed:
            return f"sol recurrence p={self.p:g}: pass ({self.checked} states, min margin {self.margin:.6g})"
        return (
            f"sol recurrence p={self.p:g}: FAIL at {tuple(self.first_violation)} "
            f"[{self.claim}] margin {self.margin:.6g}"
        )


def verify_sol_recurrence(p: float, a_range=range(51), b_range=range(51), phi=None, tol: float = 1e-9) -> SolVerification:
    """Check that the candidate potential solves the strategic recurrence with gain ``p``.

    States are visited ``b`` ascending then ``a`` ascending; the first failure
    is reported. At ``a = b + 1`` the release-dominates-mining step is judged
    by its sufficient polynomial condition, whose value is the reported margin.
    Without ``phi`` the immediate game is solved at ``d = max(b) + 2``.
    """
    sp = SolParams.from_p(p)
    a_vals = sorted(set(int(a) for a in a_range))
    b_vals = sorted(set(int(b) for b in b_range))
    if phi is None:
        report = solve(GameParams(Model.IMMEDIATE, p, max(b_vals) + 2))
        if not report.frontier_is_best_response:
            raise ValueError(f"honest play is not a best response in the immediate game at p={p}")
        table = report.potential
    else:
        table = _phi_table(phi)
    if max(b_vals) + 1 > table.shape[0] - 1:
        raise ValueError(f"potential table too shallow: need rows up to b={max(b_vals) + 2}")

    def sol(a, b):
        return sp.linear(a, b) if a > b + 1 else table[b, a]

    def sol_mine(a, b):
        return p * sol(a + 1, b) + (1 - p) * sol(a, b + 1) - p * (1 - p)

    def sol_release(a, b):
        return sol(a - b - 1, 0) + b + 1 - p

    out = SolVerification(p=p, passed=True, first_violation=None, margin=np.inf)

    def fail(state, claim, margin):
        if out.passed:
            out.passed = False
            out.first_violation = GameState(*state)
            out.claim = claim
            out.margin = float(margin)

    for b in b_vals:
        cap = table[:b, 0].max() if b >= 1 else -np.inf
        for a in a_vals:
            out.checked += 1
            value = sol(a, b)
            if a < b + 1:
                expected = max(sol_mine(a, b), cap)
                err = abs(value - expected)
                if err > tol:
                    fail((a, b), "behind", -err)
            elif a > b + 1:
                err = abs(value - sol_mine(a, b))
                slack = min(sol_mine(a, b) - sol_release(a, b), sol_release(a, b))
                if err > tol:
                    fail((a, b), "ahead-identity", -err)
                elif slack < -tol:
                    fail((a, b), "ahead-dominance", slack)
            else:
                release = sol_release(a, b)
                out.direct_margins[b] = float(release - sol_mine(a, b))
                cert = certificate_margin(p, b)
                if abs(value - release) > tol:
                    fail((a, b), "release-identity", -abs(value - release))
                elif cert < -tol:
                    fail((a, b), "release-certificate", cert)
                elif out.passed:
                    out.margin = min(out.margin, cert)
    return out


class StrategicReleaseSolver(BaseEstimator):
    """Estimator wrapper around :func:`solve_strategic`."""

    def __init__(self, p=0.25, d=20, a_max=None, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITERS, sensitivity=True):
        self.p = p
        self.d = d
        self.a_max = a_max
        self.tol = tol
        self.max_iter = max_iter
        self.sensitivity = sensitivity

    def fit(self, X=None, y=None):
        params = GameParams(Model.STRATEGIC, self.p, self.d, self.a_max)
        report = solve_strategic(params, tol=self.tol, max_iters=self.max_iter, sensitivity=self.sensitivity)
        self.params_ = params
        self.report_ = report
        self.g_star_ = report.g_star
        self.potential_ = report.potential
        self.policy_ = report.policy
        self.n_iter_ = report.iterations
        self.residual_ = report.residual
        self.truncation_sensitivity_ = report.truncation_sensitivity
        self.frontier_is_best_response_ = report.frontier_is_best_response
        return self

    def predict(self, X):
        check_is_fitted(self, "report_")
        X = check_states(X, self.params_)
        return self.policy_.kind[X[:, 1], X[:, 0]].astype(np.int64)

    def transform(self, X):
        check_is_fitted(self, "report_")
        X = check_states(X, self.params_)
        return self.potential_[X[:, 1], X[:, 0]].reshape(-1, 1)
