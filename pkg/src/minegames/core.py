"""State space, actions and transition rules shared by both mining games.

Miner 1 is the strategic player with relative power ``p``; Miner 2 stands in
for every honest miner and always mines on the deepest released block. A
state ``(a, b)`` holds the branch lengths of Miner 1 and of the honest miner
measured from their last common block.

Tables indexed by state are dense ``(d + 1, n_a)`` arrays laid out row-major
by ``b`` then ``a``; cells outside the model's state space hold ``NaN``
(float tables) or ``-1`` (integer tables).
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple

import numpy as np

from .errors import IllegalActionError, InvalidStateError


class Model(str, enum.Enum):
    IMMEDIATE = "immediate"
    STRATEGIC = "strategic"


class StateClass(str, enum.Enum):
    WINNING = "winning"
    FORCED_CAPITULATION = "forced_capitulation"
    CHOICE = "choice"


class ActionKind(enum.IntEnum):
    MINE = 0
    CAPITULATE = 1
    RELEASE = 2


# integer code used in policy tables for states without a decision
NO_ACTION = -1


class Winner(enum.IntEnum):
    MINER1 = 1
    MINER2 = 2


class Action(NamedTuple):
    kind: ActionKind
    s: int | None = None

    @classmethod
    def capitulate(cls, s: int) -> "Action":
        return cls(ActionKind.CAPITULATE, int(s))

    def __str__(self):
        if self.kind == ActionKind.CAPITULATE:
            return f"capitulate({self.s})"
        return self.kind.name.lower()


MINE = Action(ActionKind.MINE)
RELEASE = Action(ActionKind.RELEASE)


class GameState(NamedTuple):
    a: int
    b: int


class Transition(NamedTuple):
    next: GameState
    levels_advanced: int
    miner1_paid: int
    miner2_paid: int


@dataclass(frozen=True)
class GameParams:
    """Parameters of one two-miner game.

    ``a_max`` caps Miner 1's branch in the strategic model and defaults to
    ``2 * d + 2`` there; it must stay ``None`` for the immediate model.
    ``p = 0`` is accepted as a degenerate game in which Miner 1 never wins.
    """

    model: Model = Model.IMMEDIATE
    p: float = 0.3
    d: int = 10
    a_max: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "model", Model(self.model))
        p = float(self.p)
        if not (0.0 <= p < 1.0) or np.isnan(p):
            raise ValueError(f"p out of range: {self.p!r} (need 0 <= p < 1)")
        object.__setattr__(self, "p", p)
        if int(self.d) != self.d or self.d < 2:
            raise ValueError(f"d must be an integer >= 2, got {self.d!r}")
        object.__setattr__(self, "d", int(self.d))
        if self.model is Model.IMMEDIATE:
            if self.a_max is not None:
                raise ValueError("a_max applies to the strategic model only")
        else:
            a_max = 2 * self.d + 2 if self.a_max is None else self.a_max
            if int(a_max) != a_max or a_max < self.d + 2:
                raise ValueError(f"a_max must be an integer >= d + 2 = {self.d + 2}, got {a_max!r}")
            object.__setattr__(self, "a_max", int(a_max))

    @property
    def n_a(self) -> int:
        """Number of ``a`` columns in a state table."""
        if self.model is Model.IMMEDIATE:
            return self.d + 2
        return self.a_max + 1

    @property
    def shape(self) -> tuple[int, int]:
        return (self.d + 1, self.n_a)

    @property
    def majority(self) -> bool:
        """True when ``p >= 1/2``; only the truncated game is meaningful then."""
        return self.p >= 0.5

    def with_p(self, p: float) -> "GameParams":
        return GameParams(self.model, p, self.d, self.a_max)


def is_valid_state(state, params: GameParams) -> bool:
    a, b = state
    if a < 0 or b < 0 or b > params.d:
        return False
    if params.model is Model.IMMEDIATE:
        return a <= b + 1
    return a <= params.a_max


def validate_state(state, params: GameParams) -> GameState:
    try:
        a, b = (int(v) for v in state)
    except (TypeError, ValueError):
        raise InvalidStateError(f"not an (a, b) pair: {state!r}") from None
    if not is_valid_state((a, b), params):
        raise InvalidStateError(f"state {(a, b)} is outside the {params.model.value} state space (d={params.d})")
    return GameState(a, b)


def valid_mask(params: GameParams) -> np.ndarray:
    """Boolean ``(d + 1, n_a)`` mask of the model's state space."""
    mask = np.ones(params.shape, dtype=bool)
    if params.model is Model.IMMEDIATE:
        a = np.arange(params.n_a)[None, :]
        b = np.arange(params.d + 1)[:, None]
        mask = a <= b + 1
    return mask


def iter_states(params: GameParams) -> Iterator[GameState]:
    for b in range(params.d + 1):
        for a in range(params.n_a):
            if is_valid_state((a, b), params):
                yield GameState(a, b)


def classify(state, params: GameParams) -> StateClass:
    a, b = validate_state(state, params)
    if params.model is Model.IMMEDIATE and a == b + 1:
        return StateClass.WINNING
    if b == params.d:
        return StateClass.FORCED_CAPITULATION
    return StateClass.CHOICE


def legal_actions(state, params: GameParams) -> list[Action]:
    """Legal actions at ``state``. In the strategic model a state with
    ``b = d`` forbids mining but still allows releasing when ``a >= b + 1``,
    and the cap ``a = a_max`` allows nothing but releasing."""
    cls = classify(state, params)
    a, b = state
    if cls is StateClass.WINNING:
        return []
    if params.model is Model.STRATEGIC and a == params.a_max:
        return [RELEASE]
    actions = [Action.capitulate(s) for s in range(b)]
    if params.model is Model.STRATEGIC and a >= b + 1:
        actions.append(RELEASE)
    can_mine = cls is StateClass.CHOICE
    if params.model is Model.STRATEGIC and a == params.a_max:
        can_mine = False
    if can_mine:
        actions.append(MINE)
    return actions


def is_legal(state, action: Action, params: GameParams) -> bool:
    return Action(ActionKind(action.kind), action.s) in legal_actions(state, params)


def step(state, action: Action, winner: Winner | None, params: GameParams) -> Transition:
    """Apply one action. ``winner`` is consulted only for ``Mine``.

    Mining into ``a = b + 1`` in the immediate model resolves the win at once:
    the honest miner abandons its branch, Miner 1 is paid ``a + 1`` and the
    frontier advances one level.
    """
    a, b = validate_state(state, params)
    action = Action(ActionKind(action.kind), action.s)
    if not is_legal((a, b), action, params):
        raise IllegalActionError(f"{action} is not legal at {(a, b)} ({params.model.value}, d={params.d})")
    if action.kind == ActionKind.CAPITULATE:
        return Transition(GameState(0, action.s), 0, 0, b - action.s)
    if action.kind == ActionKind.RELEASE:
        return Transition(GameState(a - b - 1, 0), 1, b + 1, 0)
    winner = Winner(winner)
    if winner is Winner.MINER2:
        return Transition(GameState(a, b + 1), 1, 0, 0)
    if params.model is Model.IMMEDIATE and a == b:
        return Transition(GameState(0, 0), 1, a + 1, 0)
    return Transition(GameState(a + 1, b), 0, 0, 0)


class Policy:
    """Deterministic Miner 1 policy stored as two integer tables.

    ``kind[b, a]`` holds an :class:`ActionKind` code (``-1`` where no decision
    is taken) and ``landing[b, a]`` the capitulation target ``s`` (``-1``
    otherwise). Instances are immutable.
    """

    def __init__(self, model, d, a_max, kind, landing):
        self.model = Model(model)
        self.d = int(d)
        self.a_max = None if a_max is None else int(a_max)
        self.kind = np.array(kind, dtype=np.int8)
        self.landing = np.array(landing, dtype=np.int64)
        if self.kind.shape != self.shape or self.landing.shape != self.shape:
            raise ValueError(f"policy tables must have shape {self.shape}")
        self.kind.setflags(write=False)
        self.landing.setflags(write=False)

    @property
    def params(self) -> GameParams:
        """Game shape of this policy (``p`` is a placeholder)."""
        return GameParams(self.model, 0.0, self.d, self.a_max)

    @property
    def shape(self):
        n_a = self.d + 2 if self.model is Model.IMMEDIATE else self.a_max + 1
        return (self.d + 1, n_a)

    def action(self, state) -> Action | None:
        a, b = state
        code = int(self.kind[b, a])
        if code == NO_ACTION:
            return None
        if code == ActionKind.CAPITULATE:
            return Action.capitulate(int(self.landing[b, a]))
        return Action(ActionKind(code))

    def __getitem__(self, state):
        return self.action(state)

    def matches(self, params: GameParams) -> bool:
        return (self.model, self.d, self.a_max) == (params.model, params.d, params.a_max)

    def __eq__(self, other):
        if not isinstance(other, Policy):
            return NotImplemented
        return (
            (self.model, self.d, self.a_max) == (other.model, other.d, other.a_max)
            and np.array_equal(self.kind, other.kind)
            and np.array_equal(self.landing, other.landing)
        )

    def __hash__(self):
        return hash((self.model, self.d, self.a_max, self.kind.tobytes(), self.landing.tobytes()))

    def __repr__(self):
        return f"Policy(model={self.model.value!r}, d={self.d}, a_max={self.a_max}, mining={len(self.mining_states())} states)"

    def mining_states(self) -> set[GameState]:
        bs, as_ = np.nonzero(self.kind == ActionKind.MINE)
        return {GameState(int(a), int(b)) for a, b in zip(as_, bs)}

    def successors(self, state, p: float) -> list[tuple[float, Transition]]:
        """Transitions with positive probability from a decision state."""
        params = self.params.with_p(p)
        act = self.action(state)
        if act is None:
            raise IllegalActionError(f"policy has no action at {tuple(state)}")
        if act.kind != ActionKind.MINE:
            return [(1.0, step(state, act, None, params))]
        out = []
        if p > 0:
            out.append((p, step(state, act, Winner.MINER1, params)))
        out.append((1.0 - p, step(state, act, Winner.MINER2, params)))
        return out

    def reachable_states(self, p: float = 0.5) -> list[GameState]:
        """Decision states reachable from (0, 0), in breadth-first order."""
        start = GameState(0, 0)
        seen = {start}
        order = [start]
        queue = deque([start])
        while queue:
            st = queue.popleft()
            for _, tr in self.successors(st, p):
                if tr.next not in seen:
                    seen.add(tr.next)
                    order.append(tr.next)
                    queue.append(tr.next)
        return order

    def validate(self, p: float = 0.5) -> "Policy":
        """Check that every reachable state carries a legal action."""
        params = self.params.with_p(p)
        start = GameState(0, 0)
        seen = {start}
        queue = deque([start])
        while queue:
            st = queue.popleft()
            act = self.action(st)
            if act is None or not is_legal(st, act, params):
                raise IllegalActionError(f"policy action {act} at reachable state {tuple(st)} is not legal")
            for _, tr in self.successors(st, p):
                if tr.next not in seen:
                    seen.add(tr.next)
                    queue.append(tr.next)
        return self

    @classmethod
    def from_actions(cls, params: GameParams, actions) -> "Policy":
        """Build from a mapping or callable ``(a, b) -> Action``.

        Winning states are skipped; every other state must be covered.
        """
        lookup = actions if callable(actions) else actions.__getitem__
        kind = np.full(params.shape, NO_ACTION, dtype=np.int8)
        landing = np.full(params.shape, -1, dtype=np.int64)
        for st in iter_states(params):
            if classify(st, params) is StateClass.WINNING:
                continue
            act = lookup(st)
            kind[st.b, st.a] = int(act.kind)
            if act.kind == ActionKind.CAPITULATE:
                landing[st.b, st.a] = act.s
        return cls(params.model, params.d, params.a_max, kind, landing)

    @classmethod
    def from_mining_set(cls, params: GameParams, mining: Iterable, s: int) -> "Policy":
        """Compact ``(M, s)`` form: mine on ``M``, elsewhere capitulate to ``(0, s)``.

        In the strategic model states with ``a >= b + 1`` outside ``M``
        release instead.
        """
        mining = {GameState(*st) for st in mining}

        def pick(st):
            if st in mining and MINE in legal_actions(st, params):
                return MINE
            if params.model is Model.STRATEGIC and st.a >= st.b + 1:
                return RELEASE
            if st.b == 0:
                return MINE
            return Action.capitulate(s)

        return cls.from_actions(params, pick)


def frontier_policy(params: GameParams) -> Policy:
    """The honest strategy: mine at (0, 0), capitulate to (0, 0) whenever
    behind and, in the strategic model, release every block at once."""
    return Policy.from_mining_set(params, [(0, 0)], 0)


def never_capitulate_policy(params: GameParams) -> Policy:
    """Mine everywhere truncation allows (immediate model)."""
    return Policy.from_mining_set(params, iter_states(params), 0)
