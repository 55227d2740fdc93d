"""Immediate-release game: Miner 1 publishes every block at once and only
chooses where to mine.

:func:`solve` runs relative value iteration on the layered gain recurrence
and reads off the gain per level, the potential table and a greedy policy.
:func:`evaluate_policy` is an independent exact evaluator for a fixed policy
based on renewal-reward over excursions from (0, 0).
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from itertools import product
from typing import Iterator

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import _kernels
from ._validation import check_states, check_tolerance
from .core import (
    NO_ACTION,
    ActionKind,
    GameParams,
    GameState,
    Model,
    Policy,
    StateClass,
    classify,
    iter_states,
)
from .errors import ConvergenceError, IllegalActionError, InconsistencyError, NotRecurrentError

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITERS = 1_000_000
# decision values closer than this count as ties
TIE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class SolveReport:
    params: GameParams
    g_star: float
    potential: np.ndarray
    policy: Policy
    iterations: int
    residual: float
    g_delta: float
    frontier_is_best_response: bool
    tol: float

    @property
    def majority_flag(self) -> bool:
        """Set when ``p >= 1/2``: the result is only meaningful for the truncated game."""
        return self.params.majority

    def phi(self, a: int, b: int) -> float:
        return float(self.potential[b, a])


@dataclass(frozen=True, eq=False)
class WinProbTable:
    params: GameParams
    r: np.ndarray

    def __call__(self, a: int, b: int) -> float:
        return float(self.r[b, a])


def _require_immediate(params: GameParams):
    if params.model is not Model.IMMEDIATE:
        raise ValueError(f"expected the immediate model, got {params.model.value}")


def greedy_policy(params: GameParams, phi: np.ndarray, g: float) -> Policy:
    """Per-state argmax of the potential recurrence.

    Ties go to capitulation, and among capitulation targets to the smallest
    landing ``s``.
    """
    _require_immediate(params)
    p, d = params.p, params.d
    kind = np.full(params.shape, NO_ACTION, dtype=np.int8)
    landing = np.full(params.shape, -1, dtype=np.int64)
    for b in range(d + 1):
        if b >= 1:
            col = phi[:b, 0]
            best_cap = col.max()
            s = int(np.argmax(col >= best_cap - TIE_TOL))
        for a in range(b + 1):
            if b == d:
                kind[b, a], landing[b, a] = ActionKind.CAPITULATE, s
                continue
            mine = p * phi[b, a + 1] + (1 - p) * phi[b + 1, a] - (1 - p) * g
            if b >= 1 and best_cap >= mine - TIE_TOL:
                kind[b, a], landing[b, a] = ActionKind.CAPITULATE, s
            else:
                kind[b, a] = ActionKind.MINE
    return Policy(params.model, d, None, kind, landing)


def solve(params: GameParams, tol: float = DEFAULT_TOL, max_iters: int = DEFAULT_MAX_ITERS) -> SolveReport:
    """Optimal gain per level, potential and policy of the immediate game."""
    _require_immediate(params)
    check_tolerance(tol, max_iters)
    if params.majority:
        log.info("p=%g >= 1/2: solving the truncated game only", params.p)
    g, h, iters, g_delta, residual, ok = _kernels.relative_value_iteration(
        False, params.p, params.d, 0, tol, int(max_iters)
    )
    if not ok:
        raise ConvergenceError(
            f"immediate solve did not converge in {iters} iterations (p={params.p}, d={params.d}, residual={residual:.3e})",
            residual=max(residual, g_delta),
            iterations=iters,
        )
    h = np.array(h)
    h.setflags(write=False)
    policy = greedy_policy(params, h, g)
    log.debug("immediate solve p=%g d=%d: g*=%.15g after %d iterations", params.p, params.d, g, iters)
    return SolveReport(
        params=params,
        g_star=float(g),
        potential=h,
        policy=policy,
        iterations=int(iters),
        residual=float(residual),
        g_delta=float(g_delta),
        frontier_is_best_response=bool(abs(g - params.p) <= tol),
        tol=tol,
    )


def _excursion_totals(params: GameParams, policy: Policy) -> tuple[float, float]:
    states = policy.reachable_states(params.p)
    index = {st: i for i, st in enumerate(states)}
    n = len(states)
    paid = np.zeros(n)
    levels = np.zeros(n)
    rows, cols, vals = [], [], []
    preds: list[list[int]] = [[] for _ in range(n)]
    for i, st in enumerate(states):
        for prob, tr in policy.successors(st, params.p):
            paid[i] += prob * tr.miner1_paid
            levels[i] += prob * tr.levels_advanced
            j = index[tr.next]
            preds[j].append(i)
            # transitions into (0, 0) close the excursion
            if j != 0:
                rows.append(i)
                cols.append(j)
                vals.append(prob)

    back = {0}
    queue = deque([0])
    while queue:
        for i in preds[queue.popleft()]:
            if i not in back:
                back.add(i)
                queue.append(i)
    if len(back) != n:
        stuck = sorted(tuple(states[i]) for i in set(range(n)) - back)
        raise NotRecurrentError(f"(0, 0) is not recurrent: unreachable from {stuck[:5]}")

    q = sp.csc_matrix((vals, (rows, cols)), shape=(n, n))
    lu = splu(sp.identity(n, format="csc") - q)
    return float(lu.solve(paid)[0]), float(lu.solve(levels)[0])


def evaluate_policy(params: GameParams, policy: Policy) -> float:
    """Exact gain per level of a fixed policy (either model).

    Expected payment ``R`` and expected levels ``L`` of one excursion from
    (0, 0) back to (0, 0) solve ``(I - Q) x = r`` with ``Q`` the transitions
    that avoid (0, 0); the gain is ``R / L``.
    """
    if not policy.matches(params):
        raise ValueError("policy was built for a different game shape")
    policy.validate(params.p)
    paid, levels = _excursion_totals(params, policy)
    if levels <= 0:
        raise NotRecurrentError("excursions from (0, 0) advance no levels")
    return paid / levels


def winning_probability(params: GameParams, policy: Policy) -> WinProbTable:
    """Probability of reaching a winning state before a capitulation state."""
    _require_immediate(params)
    if not policy.matches(params):
        raise ValueError("policy was built for a different game shape")
    p, d = params.p, params.d
    r = np.full(params.shape, np.nan)
    for b in range(d, -1, -1):
        r[b, b + 1] = 1.0
        for a in range(b, -1, -1):
            code = policy.kind[b, a]
            if code == ActionKind.MINE:
                if b == d:
                    raise IllegalActionError(f"policy mines at truncated state {(a, b)}")
                r[b, a] = p * r[b, a + 1] + (1 - p) * r[b + 1, a]
            else:
                r[b, a] = 0.0
    r.setflags(write=False)
    return WinProbTable(params, r)


def check_frontier_condition(report: SolveReport, tol: float = 1e-9) -> float:
    """Return ``phi(0, 1) - phi(0, 0)`` after checking it equals ``(g* - p) / (1 - p)``."""
    _require_immediate(report.params)
    p, g = report.params.p, report.g_star
    gap = report.phi(0, 1) - report.phi(0, 0)
    expected = (g - p) / (1 - p)
    if abs(gap - expected) > tol:
        raise InconsistencyError(f"phi(0,1) - phi(0,0) = {gap!r} but (g* - p)/(1 - p) = {expected!r}")
    return gap


def iter_compact_policies(params: GameParams) -> Iterator[tuple[frozenset, int]]:
    """Every legal ``(M, s)`` pair: ``M`` contains (0, 0) plus any subset of
    the other choice states, and ``s`` is below every capitulating ``b``."""
    _require_immediate(params)
    origin = GameState(0, 0)
    free = [st for st in iter_states(params) if st != origin and classify(st, params) is StateClass.CHOICE]
    forced = [st for st in iter_states(params) if classify(st, params) is StateClass.FORCED_CAPITULATION]
    for bits in product((False, True), repeat=len(free)):
        mining = frozenset([origin] + [st for st, on in zip(free, bits) if on])
        min_b = min(st.b for st in forced + [st for st, on in zip(free, bits) if not on])
        for s in range(min_b):
            yield mining, s


def brute_force_gain(params: GameParams) -> tuple[float, frozenset, int]:
    """Best gain over all compact policies, by exhaustive evaluation."""
    best = (-np.inf, frozenset(), 0)
    for mining, s in iter_compact_policies(params):
        policy = Policy.from_mining_set(params, mining, s)
        try:
            gain = evaluate_policy(params, policy)
        except NotRecurrentError:
            continue
        if gain > best[0]:
            best = (gain, mining, s)
    return best


def depth_sensitivity(p: float, d: int = 50, extra: int = 10, tol: float = DEFAULT_TOL) -> tuple[float, float]:
    """Gain at depth ``d`` and its change when the depth grows by ``extra``.

    A large finite ``d`` stands in for the untruncated game.
    """
    g = solve(GameParams(Model.IMMEDIATE, p, d), tol=tol).g_star
    g_more = solve(GameParams(Model.IMMEDIATE, p, d + extra), tol=tol).g_star
    return g, abs(g_more - g)


class ImmediateReleaseSolver(BaseEstimator):
    """Estimator wrapper around :func:`solve`.

    ``fit`` takes no data; ``predict`` maps ``(a, b)`` rows to action codes
    (``-1`` on winning states) and ``transform`` maps them to potentials.
    """

    def __init__(self, p=0.3, d=50, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITERS):
        self.p = p
        self.d = d
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X=None, y=None):
        params = GameParams(Model.IMMEDIATE, self.p, self.d)
        report = solve(params, tol=self.tol, max_iters=self.max_iter)
        self.params_ = params
        self.report_ = report
        self.g_star_ = report.g_star
        self.potential_ = report.potential
        self.policy_ = report.policy
        self.n_iter_ = report.iterations
        self.residual_ = report.residual
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

    def win_probabilities(self, X=None):
        check_is_fitted(self, "report_")
        table = winning_probability(self.params_, self.policy_)
        if X is None:
            return table.r
        X = check_states(X, self.params_)
        return table.r[X[:, 1], X[:, 0]]
