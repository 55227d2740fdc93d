"""Solvers, bound checks and a phase simulator for two-miner block races."""

__version__ = "0.1.0"

from .bounds import (
    BoundCatalog,
    LemmaCheck,
    ThresholdResult,
    ThresholdSearch,
    bound_catalog,
    find_threshold,
    fixed_strategy_gain_d3,
    polynomial_threshold,
    r_absorbing_chain,
    r_infinity,
    reproduce_table,
    verify_lemma_bounds,
)
from .core import (
    Action,
    ActionKind,
    GameParams,
    GameState,
    Model,
    Policy,
    StateClass,
    Transition,
    Winner,
    classify,
    frontier_policy,
    legal_actions,
    step,
)
from .errors import (
    ConvergenceError,
    IllegalActionError,
    InconsistencyError,
    InvalidStateError,
    MineGameError,
    NonMonotoneError,
    NotRecurrentError,
)
from .immediate import (
    ImmediateReleaseSolver,
    SolveReport,
    check_frontier_condition,
    evaluate_policy,
    solve,
    winning_probability,
)
from .simulate import PhaseSimulator, SimConfig, SimReport, load_builtin, simulate
from .strategic import (
    StrategicReleaseSolver,
    StrategicSolveReport,
    sol_value,
    solve_strategic,
    verify_sol_recurrence,
)
