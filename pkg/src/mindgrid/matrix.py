"""Grid worlds where duels are scored by a matrix game over inventories.

Three substrates share these rules: rock-paper-scissors with two players
(``rws_repeated``), with eight players (``rws_arena``) and the prisoner's
dilemma (``pd_repeated``). Players walk over resource cells to collect them,
then fire a short beam; a hit on an eligible player resolves a duel whose
payoffs come from the normalised inventories.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Sequence

from .core import (
    AtomicAction,
    ContractViolation,
    DIRECTIONS,
    EpisodeConfig,
    GameEvent,
    PlayerState,
    ResourceCell,
    Substrate,
    Window,
    WorldState,
    add,
    apply_movement,
    register_substrate,
)
from .layout import RESOURCE_CHARS, Layout, Pos, load_layout

_RESOURCE_CHAR = {kind: ch for ch, kind in RESOURCE_CHARS.items()}

ROCK, PAPER, SCISSORS = "rock", "paper", "scissors"
RWS_PLAYS = (ROCK, PAPER, SCISSORS)
COOPERATE, DEFECT = "cooperate", "defect"
PD_PLAYS = (COOPERATE, DEFECT)

_COUNTER = {ROCK: PAPER, PAPER: SCISSORS, SCISSORS: ROCK}


def counter(play: str) -> str:
    """The rock-paper-scissors play that beats ``play``."""
    return _COUNTER[play]


@dataclass(frozen=True)
class PayoffMatrix:
    """Row player's payoffs; the column player reads the same matrix."""

    entries: tuple[tuple[int, ...], ...]

    @property
    def size(self) -> int:
        return len(self.entries)


RWS_PAYOFF = PayoffMatrix(((0, -10, 10), (10, 0, -10), (-10, 10, 0)))
PD_PAYOFF = PayoffMatrix(((3, 0), (5, 1)))


def _normalise(inv: Sequence[int], size: int) -> list[Fraction]:
    if len(inv) != size:
        raise ContractViolation(f"inventory {tuple(inv)} does not have {size} entries")
    if any(c < 0 for c in inv):
        raise ContractViolation(f"inventory {tuple(inv)} has a negative count")
    total = sum(inv)
    if total <= 0:
        raise ContractViolation("inventory total must be positive")
    return [Fraction(c, total) for c in inv]


def _bilinear(a: list[Fraction], m: PayoffMatrix, b: list[Fraction]) -> Fraction:
    return sum(
        (a[i] * m.entries[i][j] * b[j] for i in range(m.size) for j in range(m.size)),
        Fraction(0),
    )


def resolve_interaction_exact(
    inv_row: Sequence[int], inv_col: Sequence[int], payoff: PayoffMatrix
) -> tuple[Fraction, Fraction]:
    v_row = _normalise(inv_row, payoff.size)
    v_col = _normalise(inv_col, payoff.size)
    return _bilinear(v_row, payoff, v_col), _bilinear(v_col, payoff, v_row)


def resolve_interaction(
    inv_row: Sequence[int], inv_col: Sequence[int], payoff: PayoffMatrix
) -> tuple[float, float]:
    """Duel payoffs ``(v_row^T A v_col, v_col^T A v_row)`` with L1-normalised inventories.

    Computed with exact fractions, so the antisymmetric rock-paper-scissors
    matrix gives ``r_col == -r_row`` exactly.
    """
    r_row, r_col = resolve_interaction_exact(inv_row, inv_col, payoff)
    return float(r_row), float(r_col)


def dominant_play(inventory: Sequence[int], plays: Sequence[str]) -> str:
    """Kind with the largest count; ties go to the earliest kind."""
    best = max(range(len(inventory)), key=lambda i: (inventory[i], -i))
    return plays[best]


def pure_inventory(play: str, plays: Sequence[str], count: int) -> tuple[int, ...]:
    """All-ones inventory with ``count`` of ``play``."""
    return tuple(count if p == play else 1 for p in plays)


class MatrixSubstrate(Substrate):
    """Shared rules of the three matrix-game grid worlds."""

    map_name = ""
    plays: tuple[str, ...] = ()
    resource_kinds: tuple[str, ...] = ()  # layout kinds, in inventory order
    box_kinds: tuple[str, ...] = ()  # observation kinds, in inventory order
    entity_kinds: tuple[str, ...] = ()  # observation kinds, in display order
    payoff = RWS_PAYOFF

    def __init__(
        self,
        layout: Layout,
        beam_length: int = 3,
        respawn_delay: int = 5,
        regrow_delay: int = 10,
        min_eligible: int = 2,
        **params: Any,
    ) -> None:
        super().__init__(layout, **params)
        if beam_length < 1 or respawn_delay < 1 or regrow_delay < 1:
            raise ContractViolation("beam length and delays must be positive")
        self.beam_length = beam_length
        self.respawn_delay = respawn_delay
        self.regrow_delay = regrow_delay
        self.min_eligible = min_eligible
        unknown = set(layout.resources.values()) - set(self.resource_kinds)
        if unknown:
            raise ContractViolation(f"{layout.name} has foreign resources {sorted(unknown)}")

    @classmethod
    def create(cls, **params: Any) -> "MatrixSubstrate":
        layout = params.pop("layout", None) or load_layout(cls.map_name)
        return cls(layout, **params)

    def settings(self) -> dict[str, Any]:
        return {
            "beam_length": self.beam_length,
            "respawn_delay": self.respawn_delay,
            "regrow_delay": self.regrow_delay,
            "min_eligible": self.min_eligible,
        }

    # -- state ---------------------------------------------------------------

    def _facing_center(self, pos: Pos) -> str:
        return "S" if pos[1] < self.layout.height // 2 else "N"

    def initial_state(self, config: EpisodeConfig) -> WorldState:
        rng = random.Random(config.seed)
        spawns = self.layout.spawns
        if len(spawns) < self.n_players:
            raise ContractViolation(f"{self.layout.name} has fewer spawns than players")
        players = [
            PlayerState(i, spawns[i], self._facing_center(spawns[i]), [1] * len(self.plays))
            for i in range(self.n_players)
        ]
        resources = {pos: ResourceCell(kind) for pos, kind in self.layout.resources.items()}
        return WorldState(
            rules=self,
            layout=self.layout,
            players=players,
            rng=rng,
            max_steps=config.max_steps,
            resources=resources,
        )

    def kind_index(self, resource_kind: str) -> int:
        return self.resource_kinds.index(resource_kind)

    def box_for_play(self, play: str) -> str:
        return self.box_kinds[self.plays.index(play)]

    def play_for_box(self, box: str) -> str:
        return self.plays[self.box_kinds.index(box)]

    def entities_at(self, state: WorldState, pos: Pos) -> list[str]:
        cell = state.resources.get(pos)
        if cell is None or not cell.present:
            return []
        return [self.box_kinds[self.kind_index(cell.kind)]]

    def view_char(self, state: WorldState, pos: Pos) -> str:
        cell = state.resources.get(pos)
        if cell is not None and cell.present:
            return _RESOURCE_CHAR[cell.kind]
        return super().view_char(state, pos)

    def eligible(self, inventory: Sequence[int]) -> bool:
        return max(inventory) >= self.min_eligible

    # -- transition ----------------------------------------------------------

    def transition(
        self, state: WorldState, joint: list[AtomicAction]
    ) -> tuple[list[float], list[GameEvent]]:
        rewards = [0.0] * len(state.players)
        events: list[GameEvent] = []
        # only timers already running at the start of the step count down, so a
        # removal lasts exactly its delay in steps
        absent = {p.index for p in state.players if p.pos is None}
        empty = {pos for pos, cell in state.resources.items() if not cell.present}
        for i in apply_movement(state, joint):
            events.extend(collect(state, i))
        for p in state.players:
            if joint[p.index] is AtomicAction.FIRE_BEAM and p.active:
                for ev in fire_interaction(state, p.index):
                    events.append(ev)
                    for idx, r in zip(ev.players, ev.data["rewards"]):
                        rewards[idx] += r
        events.extend(self._tick(state, absent, empty))
        return rewards, events

    def _tick(self, state: WorldState, absent: set[int], empty: set[Pos]) -> list[GameEvent]:
        events = []
        occupied = {p.pos for p in state.players if p.pos is not None}
        for pos, cell in state.resources.items():
            if cell.present or pos not in empty:
                continue
            if cell.regrow_timer > 0:
                cell.regrow_timer -= 1
            if cell.regrow_timer == 0 and pos not in occupied:
                cell.present = True
        for p in state.players:
            if p.pos is not None or p.index not in absent:
                continue
            p.respawn_timer -= 1
            if p.respawn_timer > 0:
                continue
            free = [s for s in self.layout.spawns if s not in occupied]
            if not free:
                p.respawn_timer = 1
                continue
            p.pos = state.rng.choice(free)
            p.orientation = self._facing_center(p.pos)
            occupied.add(p.pos)
            events.append(GameEvent("respawn", state.step_count, (p.index,), {"pos": list(p.pos)}))
        return events

    def beam_cells(self, state: WorldState, shooter: int) -> list[Pos]:
        """Cells the shooter's beam reaches, stopping at the first wall."""
        p = state.players[shooter]
        cells: list[Pos] = []
        if p.pos is None:
            return cells
        pos = p.pos
        for _ in range(self.beam_length):
            pos = add(pos, DIRECTIONS[p.orientation])
            if self.layout.blocked(pos):
                break
            cells.append(pos)
        return cells


def collect(state: WorldState, player: int) -> list[GameEvent]:
    """Pick up the resource under ``player`` if it is present."""
    rules: MatrixSubstrate = state.rules  # type: ignore[assignment]
    p = state.players[player]
    cell = state.resources.get(p.pos) if p.pos is not None else None
    if cell is None or not cell.present or p.inventory is None:
        return []
    idx = rules.kind_index(cell.kind)
    p.inventory[idx] += 1
    cell.present = False
    cell.regrow_timer = rules.regrow_delay
    return [
        GameEvent(
            "collect",
            state.step_count,
            (player,),
            {"resource": rules.plays[idx], "pos": list(p.pos)},  # type: ignore[arg-type]
        )
    ]


def fire_interaction(state: WorldState, shooter: int) -> list[GameEvent]:
    """Fire the shooter's beam; a hit on an eligible player resolves a duel."""
    rules: MatrixSubstrate = state.rules  # type: ignore[assignment]
    p = state.players[shooter]
    if p.pos is None or p.inventory is None:
        return []
    for cell in rules.beam_cells(state, shooter):
        target = state.occupant(cell)
        if target is None:
            continue
        q = state.players[target]
        assert q.inventory is not None
        if not (rules.eligible(p.inventory) and rules.eligible(q.inventory)):
            return []
        r_row, r_col = resolve_interaction(p.inventory, q.inventory, rules.payoff)
        event = GameEvent(
            "interaction",
            state.step_count,
            (shooter, target),
            {
                "inventories": [list(p.inventory), list(q.inventory)],
                "plays": [
                    dominant_play(p.inventory, rules.plays),
                    dominant_play(q.inventory, rules.plays),
                ],
                "rewards": [r_row, r_col],
            },
        )
        for who in (p, q):
            who.inventory = [1] * len(rules.plays)
            who.pos = None
            who.respawn_timer = rules.respawn_delay
        return [event]
    return []


@register_substrate
class RwsRepeated(MatrixSubstrate):
    name = "rws_repeated"
    map_name = "rws_repeated"
    n_players = 2
    window = Window(3, 1, 2)
    plays = RWS_PLAYS
    resource_kinds = ("rock_yellow", "paper_purple", "scissors_blue")
    box_kinds = ("yellow_box", "purple_box", "blue_box")
    entity_kinds = ("yellow_box", "blue_box", "purple_box")
    payoff = RWS_PAYOFF


@register_substrate
class RwsArena(RwsRepeated):
    name = "rws_arena"
    map_name = "rws_arena"
    n_players = 8
    window = Window(9, 1, 5)


@register_substrate
class PdRepeated(MatrixSubstrate):
    name = "pd_repeated"
    map_name = "pd_repeated"
    n_players = 2
    window = Window(3, 1, 2)
    plays = PD_PLAYS
    resource_kinds = ("cooperate_green", "defect_red")
    box_kinds = ("green_box", "red_box")
    entity_kinds = ("green_box", "red_box")
    payoff = PD_PAYOFF
