"""Monte Carlo phase simulator.

Each trial plays the game one phase at a time under a fixed policy until the
frontier has advanced ``target_levels`` times. Trials draw from independent
streams keyed by ``(seed, trial)``, so results do not depend on how trials
are scheduled.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import _kernels
from .bounds import DEVIATOR_D3_LANDING, DEVIATOR_D3_MINING
from .core import GameParams, Model, Policy, frontier_policy, never_capitulate_policy
from .errors import IllegalActionError

log = logging.getLogger(__name__)

MIN_TARGET_LEVELS = 10_000
CHUNK = 1 << 20
HORIZON_CONVENTION = "forced-capitulation"
BUILTINS = ("frontier", "deviator-d3", "never-capitulate")


def load_builtin(name: str, params: GameParams) -> Policy:
    """Named policy for the game shape in ``params``.

    ``deviator-d3`` mines on {(0,0),(0,1),(1,1),(1,2),(2,2)} and capitulates
    to (0, 1) everywhere else, including every state with ``b >= 3``.
    """
    if name == "frontier":
        return frontier_policy(params)
    if name == "deviator-d3":
        if params.model is not Model.IMMEDIATE or params.d < 3:
            raise ValueError("deviator-d3 is defined for the immediate model with d >= 3")
        return Policy.from_mining_set(params, DEVIATOR_D3_MINING, DEVIATOR_D3_LANDING)
    if name == "never-capitulate":
        if params.model is not Model.IMMEDIATE:
            raise ValueError("never-capitulate is defined for the immediate model")
        return never_capitulate_policy(params)
    raise ValueError(f"unknown builtin policy {name!r}; choose from {', '.join(BUILTINS)}")


def resolve_policy(policy, params: GameParams) -> Policy:
    """Accept a :class:`Policy`, a builtin name, or ``"optimal"`` (solves first)."""
    if isinstance(policy, Policy):
        return policy
    if policy == "optimal":
        if params.model is Model.IMMEDIATE:
            from .immediate import solve

            return solve(params).policy
        from .strategic import solve_strategic

        return solve_strategic(params, sensitivity=False).policy
    return load_builtin(policy, params)


@dataclass(frozen=True)
class SimConfig:
    params: GameParams
    policy: Policy | str = "frontier"
    target_levels: int = 1_000_000
    trials: int = 32
    seed: int = 0

    def __post_init__(self):
        if int(self.target_levels) != self.target_levels or self.target_levels < MIN_TARGET_LEVELS:
            raise ValueError(f"target_levels must be an integer >= {MIN_TARGET_LEVELS}, got {self.target_levels!r}")
        if int(self.trials) != self.trials or self.trials < 1:
            raise ValueError(f"trials must be a positive integer, got {self.trials!r}")
        if int(self.seed) != self.seed or not (0 <= self.seed < 2**64):
            raise ValueError(f"seed must be an integer in [0, 2**64), got {self.seed!r}")


@dataclass(frozen=True)
class TrialResult:
    gain: float
    levels: int
    miner1_paid: int
    miner2_paid: int
    phases: int
    max_lead: int
    max_b: int


@dataclass
class SimReport:
    empirical_gain: float
    stderr: float | None
    ci95: tuple[float, float] | None
    per_trial: list[float]
    phases_run: int
    trials: list[TrialResult] = field(default_factory=list)
    horizon_convention: str = HORIZON_CONVENTION

    def within(self, expected: float, k: float = 3.0) -> bool:
        """Whether ``expected`` lies within ``k`` standard errors."""
        if self.stderr is None:
            raise ValueError("a single trial has no standard error")
        return abs(self.empirical_gain - expected) <= k * self.stderr


def _trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(trial,)))


def _run_trial(policy: Policy, p: float, strategic: bool, target: int, seed: int, trial: int) -> TrialResult:
    rng = _trial_rng(seed, trial)
    state = np.zeros(2, dtype=np.int64)
    counters = np.zeros(6, dtype=np.int64)
    while counters[0] < target:
        wins = rng.random(CHUNK) < p
        _kernels.simulate_chunk(policy.kind, policy.landing, strategic, wins, state, counters, target)
    # a race still open at the horizon is settled by capitulating to (0, 0)
    counters[2] += state[1]
    levels, paid1, paid2, phases, max_lead, max_b = (int(x) for x in counters)
    return TrialResult(paid1 / levels, levels, paid1, paid2, phases, max_lead, max_b)


def simulate(config: SimConfig, n_jobs: int = 1) -> SimReport:
    """Run every trial and aggregate in trial order."""
    params = config.params
    policy = resolve_policy(config.policy, params)
    if not policy.matches(params):
        raise ValueError(
            f"policy is for ({policy.model.value}, d={policy.d}, a_max={policy.a_max}) "
            f"but the game is ({params.model.value}, d={params.d}, a_max={params.a_max})"
        )
    policy.validate(params.p)
    strategic = params.model is Model.STRATEGIC
    target = int(config.target_levels)

    def run(t):
        return _run_trial(policy, params.p, strategic, target, int(config.seed), t)

    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            trials = list(pool.map(run, range(config.trials)))
    else:
        trials = [run(t) for t in range(config.trials)]

    for t in trials:
        if t.miner1_paid + t.miner2_paid != t.levels:
            raise IllegalActionError(f"payment accounting broke: {t}")
        if not strategic and t.max_lead > 1:
            raise IllegalActionError(f"immediate trial visited a state with a > b + 1: {t}")
    gains = np.array([t.gain for t in trials])
    mean = float(gains.mean())
    if len(gains) > 1:
        stderr = float(gains.std(ddof=1) / np.sqrt(len(gains)))
        ci = (mean - 1.96 * stderr, mean + 1.96 * stderr)
    else:
        stderr, ci = None, None
    log.info("simulated %d trials: gain %.6f +/- %s", len(trials), mean, stderr)
    return SimReport(
        empirical_gain=mean,
        stderr=stderr,
        ci95=ci,
        per_trial=[float(g) for g in gains],
        phases_run=sum(t.phases for t in trials),
        trials=trials,
    )


class PhaseSimulator(BaseEstimator):
    """Estimator wrapper around :func:`simulate`."""

    def __init__(self, model="immediate", p=0.3, d=10, a_max=None, policy="frontier",
                 target_levels=1_000_000, trials=32, seed=0, n_jobs=1):
        self.model = model
        self.p = p
        self.d = d
        self.a_max = a_max
        self.policy = policy
        self.target_levels = target_levels
        self.trials = trials
        self.seed = seed
        self.n_jobs = n_jobs

    def fit(self, X=None, y=None):
        params = GameParams(Model(self.model), self.p, self.d, self.a_max)
        config = SimConfig(params, self.policy, self.target_levels, self.trials, self.seed)
        self.report_ = simulate(config, n_jobs=self.n_jobs)
        self.empirical_gain_ = self.report_.empirical_gain
        self.stderr_ = self.report_.stderr
        return self

    def score(self, X=None, y=None):
        """Empirical gain per level."""
        check_is_fitted(self, "report_")
        return self.empirical_gain_
