"""Partially observable Markov game engine shared by every substrate.

The engine owns the pieces all four grid worlds have in common: player
poses, the eight atomic actions, simultaneous movement with index-ordered
conflict resolution, egocentric observation windows and the step counter.
Substrate specific rules (resources and duels, or the kitchen) plug in
through :class:`Substrate`.
"""

from __future__ import annotations

import copy
import hashlib
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Sequence

from .layout import Layout, Pos
from .perception import StructuredObservation

DEFAULT_MAX_STEPS = 1200

ORIENTATIONS = ("N", "E", "S", "W")
DIRECTIONS: dict[str, Pos] = {"N": (0, -1), "E": (1, 0), "S": (0, 1), "W": (-1, 0)}


class ContractViolation(RuntimeError):
    """A caller broke an operation's precondition."""


class AtomicAction(str, Enum):
    STEP_FORWARD = "step_forward"
    STEP_BACKWARD = "step_backward"
    STEP_LEFT = "step_left"
    STEP_RIGHT = "step_right"
    TURN_LEFT = "turn_left"
    TURN_RIGHT = "turn_right"
    FIRE_BEAM = "fire_beam"
    NOOP = "noop"


MOVES = (
    AtomicAction.STEP_FORWARD,
    AtomicAction.STEP_BACKWARD,
    AtomicAction.STEP_LEFT,
    AtomicAction.STEP_RIGHT,
)

JointAction = Sequence[AtomicAction]


def turn_right(orientation: str) -> str:
    return ORIENTATIONS[(ORIENTATIONS.index(orientation) + 1) % 4]


def turn_left(orientation: str) -> str:
    return ORIENTATIONS[(ORIENTATIONS.index(orientation) - 1) % 4]


def add(a: Pos, b: Pos) -> Pos:
    return (a[0] + b[0], a[1] + b[1])


def manhattan(a: Pos, b: Pos) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


def move_delta(orientation: str, action: AtomicAction) -> Pos:
    if action is AtomicAction.STEP_FORWARD:
        return DIRECTIONS[orientation]
    if action is AtomicAction.STEP_BACKWARD:
        dx, dy = DIRECTIONS[orientation]
        return (-dx, -dy)
    if action is AtomicAction.STEP_LEFT:
        return DIRECTIONS[turn_left(orientation)]
    if action is AtomicAction.STEP_RIGHT:
        return DIRECTIONS[turn_right(orientation)]
    raise ValueError(f"{action} is not a movement")


def move_action_for(orientation: str, delta: Pos) -> AtomicAction:
    """Atomic action that moves one cell by ``delta`` without turning."""
    for action in MOVES:
        if move_delta(orientation, action) == delta:
            return action
    raise ValueError(f"{delta} is not a unit move")


def derive_seed(seed: int, *labels: object) -> int:
    """Stable 64-bit sub-seed, independent of PYTHONHASHSEED."""
    text = ":".join([str(seed), *map(str, labels)])
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "big")


@dataclass(frozen=True)
class Window:
    """Egocentric view: cells ahead, behind and to each side of the player."""

    ahead: int
    behind: int
    side: int

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ahead + self.behind + 1, 2 * self.side + 1)

    def offsets(self) -> list[tuple[int, int]]:
        """(forward, right) offsets, far rows first, left to right."""
        return [
            (f, r)
            for f in range(self.ahead, -self.behind - 1, -1)
            for r in range(-self.side, self.side + 1)
        ]

    def cell(self, pos: Pos, orientation: str, forward: int, right: int) -> Pos:
        fx, fy = DIRECTIONS[orientation]
        rx, ry = DIRECTIONS[turn_right(orientation)]
        return (pos[0] + forward * fx + right * rx, pos[1] + forward * fy + right * ry)


@dataclass
class PlayerState:
    index: int
    pos: Pos | None
    orientation: str
    inventory: list[int] | None = None
    held: str | None = None
    respawn_timer: int = 0

    @property
    def active(self) -> bool:
        return self.pos is not None


@dataclass
class ResourceCell:
    kind: str
    present: bool = True
    regrow_timer: int = 0


@dataclass
class Pot:
    tomatoes: int = 0
    timer: int = 0
    cooked: bool = False


@dataclass(frozen=True)
class GameEvent:
    kind: str
    step: int
    players: tuple[int, ...]
    data: dict[str, Any] = field(default_factory=dict)

    def to_record(self) -> dict[str, Any]:
        return {"kind": self.kind, "step": self.step, "players": list(self.players), **self.data}


@dataclass(frozen=True)
class StepResult:
    rewards: tuple[float, ...]
    events: tuple[GameEvent, ...]
    done: bool


@dataclass(frozen=True)
class EpisodeConfig:
    substrate: str
    scenario: int = 0
    seed: int = 0
    max_steps: int = DEFAULT_MAX_STEPS
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.max_steps <= 0:
            raise ContractViolation("max_steps must be positive")


@dataclass
class WorldState:
    rules: "Substrate"
    layout: Layout
    players: list[PlayerState]
    rng: random.Random
    max_steps: int
    step_count: int = 0
    resources: dict[Pos, ResourceCell] = field(default_factory=dict)
    pots: dict[Pos, Pot] = field(default_factory=dict)
    counters: dict[Pos, str | None] = field(default_factory=dict)

    @property
    def substrate(self) -> str:
        return self.rules.name

    @property
    def done(self) -> bool:
        return self.step_count >= self.max_steps

    def clone(self) -> "WorldState":
        memo = {id(self.rules): self.rules, id(self.layout): self.layout}
        return copy.deepcopy(self, memo)

    def occupant(self, pos: Pos) -> int | None:
        for p in self.players:
            if p.pos == pos:
                return p.index
        return None


class Substrate:
    """Rules of one grid world. Subclasses fill in the transition."""

    name = "abstract"
    n_players = 2
    window = Window(3, 1, 2)
    entity_kinds: tuple[str, ...] = ()

    def __init__(self, layout: Layout, **params: Any) -> None:
        self.layout = layout
        self.params = params

    def initial_state(self, config: EpisodeConfig) -> WorldState:
        raise NotImplementedError

    def transition(
        self, state: WorldState, joint: list[AtomicAction]
    ) -> tuple[list[float], list[GameEvent]]:
        raise NotImplementedError

    def passable(self, state: WorldState, pos: Pos) -> bool:
        return not self.layout.blocked(pos)

    def entities_at(self, state: WorldState, pos: Pos) -> list[str]:
        """Entity kinds (keys of ``entity_kinds``) visible at ``pos``."""
        return []

    def view_char(self, state: WorldState, pos: Pos) -> str:
        if not self.layout.in_bounds(pos) or pos in self.layout.walls:
            return "#"
        return "."

    def spawn_players(self, rng: random.Random) -> list[PlayerState]:
        spawns = self.layout.spawns
        if len(spawns) < self.n_players:
            raise ContractViolation(f"{self.layout.name} has fewer spawns than players")
        return [PlayerState(i, spawns[i], "N") for i in range(self.n_players)]


def apply_movement(state: WorldState, joint: Sequence[AtomicAction]) -> list[int]:
    """Turns and moves; lower index wins contested cells. Returns movers."""
    occupied = {p.pos for p in state.players if p.pos is not None}
    moved = []
    for p in state.players:
        if p.pos is None:
            continue
        action = joint[p.index]
        if action is AtomicAction.TURN_LEFT:
            p.orientation = turn_left(p.orientation)
        elif action is AtomicAction.TURN_RIGHT:
            p.orientation = turn_right(p.orientation)
        elif action in MOVES:
            target = add(p.pos, move_delta(p.orientation, action))
            if target in occupied or not state.rules.passable(state, target):
                continue
            occupied.discard(p.pos)
            occupied.add(target)
            p.pos = target
            moved.append(p.index)
    return moved


def step(state: WorldState, joint: JointAction) -> tuple[WorldState, StepResult]:
    """Advance ``state`` in place by one tick and return it with the result."""
    if state.done:
        raise ContractViolation("episode already finished")
    if len(joint) != len(state.players):
        raise ContractViolation(
            f"joint action has {len(joint)} entries for {len(state.players)} players"
        )
    actions = [AtomicAction(a) for a in joint]
    rewards, events = state.rules.transition(state, actions)
    state.step_count += 1
    return state, StepResult(tuple(rewards), tuple(events), state.done)


def observe(state: WorldState, player: int, full: bool = False) -> StructuredObservation:
    """Egocentric observation; ``full=True`` reveals the whole map."""
    rules = state.rules
    p = state.players[player]
    kinds = rules.entity_kinds
    inventory = tuple(p.inventory) if p.inventory is not None else None
    if p.pos is None:
        return StructuredObservation(
            player=player,
            position=None,
            orientation=p.orientation,
            entities={k: () for k in kinds},
            inventory=inventory,
            held=p.held,
            step=state.step_count,
        )

    view: list[str] = []
    if full:
        visible = {(x, y) for x in range(state.layout.width) for y in range(state.layout.height)}
    else:
        visible = set()
        w = rules.window
        row: list[str] = []
        for f, r in w.offsets():
            c = w.cell(p.pos, p.orientation, f, r)
            if state.layout.in_bounds(c):
                visible.add(c)
            if f == 0 and r == 0:
                row.append("@")
            elif state.occupant(c) is not None:
                row.append("A")
            else:
                row.append(rules.view_char(state, c))
            if len(row) == w.shape[1]:
                view.append("".join(row))
                row = []

    found: dict[str, list[Pos]] = {k: [] for k in kinds}
    for c in sorted(visible):
        for kind in rules.entities_at(state, c):
            found[kind].append(c)
    others = tuple(
        (q.index, q.pos, q.orientation)
        for q in state.players
        if q.index != player and q.pos is not None and q.pos in visible
    )
    return StructuredObservation(
        player=player,
        position=p.pos,
        orientation=p.orientation,
        entities={k: tuple(v) for k, v in found.items()},
        others=others,
        inventory=inventory,
        held=p.held,
        step=state.step_count,
        visible=frozenset(visible),
        view=tuple(view),
    )


_SUBSTRATES: dict[str, type[Substrate]] = {}


def register_substrate(cls: type[Substrate]) -> type[Substrate]:
    _SUBSTRATES[cls.name] = cls
    return cls


def substrate_names() -> list[str]:
    _load_builtin()
    return sorted(_SUBSTRATES)


def get_substrate(name: str, **params: Any) -> Substrate:
    _load_builtin()
    try:
        cls = _SUBSTRATES[name]
    except KeyError:
        raise ContractViolation(f"unknown substrate {name!r}") from None
    return cls.create(**params)  # type: ignore[attr-defined]


def make_world(config: EpisodeConfig) -> WorldState:
    rules = get_substrate(config.substrate, **config.params)
    return rules.initial_state(config)


def _load_builtin() -> None:
    from . import cooking, matrix  # noqa: F401  (registration side effect)
