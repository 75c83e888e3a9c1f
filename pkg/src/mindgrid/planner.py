"""Compile subgoal calls into atomic actions.

``move_to`` is an A* search over grid cells. Resource cells are soft
obstacles tried in three tiers: first avoid every resource except the
destination, then allow resources of the destination's kind, then allow
anything. Moves are strafes, so a path of ``n`` cells costs ``n`` actions
whatever the player's orientation.

``fire_at``, ``interact`` and ``wait`` depend on what happens while they
run, so they compile to :class:`Routine` objects that pick one action per
step from the current :class:`Situation`.
"""

from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .core import (
    DIRECTIONS,
    ORIENTATIONS,
    AtomicAction,
    add,
    manhattan,
    move_action_for,
    turn_left,
    turn_right,
)
from .layout import Layout, Pos
from .parsing import SubgoalCall, fire_at, interact, wait

log = logging.getLogger(__name__)

TIERS = ("avoid_all_other_resources", "allow_same_kind_as_target", "allow_any")
FIRE_BUDGET = 100
FIRE_VICINITY = 2
WAIT_BUDGET = 50
STUCK_LIMIT = 4

_NEIGHBOURS = ((0, -1), (1, 0), (0, 1), (-1, 0))


class Unreachable(Exception):
    """No path to the destination under any obstacle tier."""


class InvalidTarget(ValueError):
    """A subgoal names a coordinate that cannot be used for that call."""


@dataclass(frozen=True)
class PathPlan:
    cells: tuple[Pos, ...]  # excludes the start cell
    tier: str

    def actions(self, src: Pos, orientation: str) -> list[AtomicAction]:
        out, here = [], src
        for cell in self.cells:
            out.append(move_action_for(orientation, (cell[0] - here[0], cell[1] - here[1])))
            here = cell
        return out


def astar(
    layout: Layout, src: Pos, dst: Pos, obstacles: Iterable[Pos] = ()
) -> list[Pos] | None:
    """Shortest 4-connected path from ``src`` to ``dst`` (excluding ``src``).

    Ties are broken by heuristic then coordinates so results are stable.
    """
    if src == dst:
        return []
    blocked = set(obstacles)
    if layout.blocked(dst) or dst in blocked:
        return None
    open_heap: list[tuple[int, int, Pos]] = [(manhattan(src, dst), 0, src)]
    parent: dict[Pos, Pos] = {}
    best = {src: 0}
    while open_heap:
        _, g, cell = heapq.heappop(open_heap)
        if cell == dst:
            path = [cell]
            while path[-1] in parent and parent[path[-1]] != src:
                path.append(parent[path[-1]])
            return path[::-1]
        if g > best[cell]:
            continue
        for dx, dy in _NEIGHBOURS:
            nxt = (cell[0] + dx, cell[1] + dy)
            if layout.blocked(nxt) or nxt in blocked:
                continue
            ng = g + 1
            if ng < best.get(nxt, 1 << 30):
                best[nxt] = ng
                parent[nxt] = cell
                heapq.heappush(open_heap, (ng + manhattan(nxt, dst), ng, nxt))
    return None


def tier_obstacles(resources: Mapping[Pos, str], dst: Pos, tier: str) -> set[Pos]:
    if tier == "allow_any":
        return set()
    target_kind = resources.get(dst)
    if tier == "avoid_all_other_resources":
        return {p for p in resources if p != dst}
    return {p for p, k in resources.items() if k != target_kind and p != dst}


def plan_path(
    layout: Layout,
    src: Pos,
    dst: Pos,
    resources: Mapping[Pos, str] | None = None,
    avoid: Iterable[Pos] = (),
) -> PathPlan:
    """Least permissive feasible tier; ``avoid`` cells are hard obstacles."""
    resources = resources or {}
    hard = set(avoid) - {dst}
    tried: set[frozenset[Pos]] = set()
    for tier in TIERS:
        obstacles = tier_obstacles(resources, dst, tier) | hard
        key = frozenset(obstacles)
        if key in tried:
            continue
        tried.add(key)
        path = astar(layout, src, dst, obstacles)
        if path is not None:
            if tier == "allow_any" and any(p in resources for p in path[:-1]):
                log.debug("move_to %s -> %s crosses resources (allow_any)", src, dst)
            return PathPlan(tuple(path), tier)
    raise Unreachable(f"{dst} is unreachable from {src}")


def compile_move_to(
    layout: Layout,
    src: Pos,
    dst: Pos,
    orientation: str = "N",
    resources: Mapping[Pos, str] | None = None,
) -> list[AtomicAction]:
    """Atomic actions that walk from ``src`` to ``dst``; empty when already there."""
    if not layout.in_bounds(dst):
        raise Unreachable(f"{dst} is outside the map")
    return plan_path(layout, src, dst, resources).actions(src, orientation)


def direction_to(src: Pos, dst: Pos) -> str | None:
    """Orientation pointing from ``src`` straight at ``dst`` (same row or column)."""
    dx, dy = dst[0] - src[0], dst[1] - src[1]
    if dx and dy or (dx == 0 and dy == 0):
        return None
    unit = ((dx > 0) - (dx < 0), (dy > 0) - (dy < 0))
    for name, vec in DIRECTIONS.items():
        if vec == unit:
            return name
    return None


def turn_towards(orientation: str, wanted: str) -> AtomicAction | None:
    """Single turn toward ``wanted``; a reversal turns right first."""
    if orientation == wanted:
        return None
    if turn_left(orientation) == wanted:
        return AtomicAction.TURN_LEFT
    return AtomicAction.TURN_RIGHT


def line_clear(layout: Layout, src: Pos, dst: Pos) -> bool:
    d = direction_to(src, dst)
    if d is None:
        return False
    cell = src
    while cell != dst:
        cell = add(cell, DIRECTIONS[d])
        if layout.blocked(cell):
            return False
    return True


@dataclass
class Situation:
    """What a routine may look at when choosing the next action.

    ``resources`` are believed resource cells (pos -> kind), ``opponents``
    currently visible players and ``pots`` believed pot kinds by cell.
    """

    layout: Layout
    pos: Pos | None
    orientation: str
    step: int = 0
    resources: Mapping[Pos, str] = field(default_factory=dict)
    opponents: Mapping[int, Pos] = field(default_factory=dict)
    beam_length: int = 3
    pots: Mapping[Pos, str] = field(default_factory=dict)
    fixtures: Mapping[Pos, str] = field(default_factory=dict)
    held: str | None = None
    interacted: bool = False
    last_result: str | None = None
    side: int | None = None
    barrier_x: int | None = None


class Routine:
    """One compiled subgoal. ``next_action`` returns None once finished."""

    def __init__(self, call: SubgoalCall) -> None:
        self.call = call
        self.status = "running"
        self.steps = 0
        self.note = ""

    def next_action(self, sit: Situation) -> AtomicAction | None:
        if self.status != "running":
            return None
        action = self._next(sit)
        if action is None:
            if self.status == "running":
                self.status = "done"
        else:
            self.steps += 1
        return action

    def _next(self, sit: Situation) -> AtomicAction | None:
        raise NotImplementedError

    def fail(self, note: str) -> None:
        self.status = "failed"
        self.note = note


class _Walker:
    """Follows a cached path, re-planning when the player drifts or stalls."""

    def __init__(self) -> None:
        self.path: list[Pos] = []
        self.dst: Pos | None = None
        self.last_pos: Pos | None = None
        self.stalled = 0

    def step_towards(
        self, sit: Situation, dst: Pos, avoid: Iterable[Pos] = (), use_resources: bool = True
    ) -> AtomicAction | None:
        assert sit.pos is not None
        if sit.pos == dst:
            return None
        resources = sit.resources if use_resources else {}
        if sit.pos == self.last_pos:
            self.stalled += 1
        else:
            self.stalled = 0
        avoid = set(avoid)
        if self.stalled >= 2:
            avoid |= set(sit.opponents.values())
        stale = (
            self.dst != dst
            or not self.path
            or self.path[0] != sit.pos
            or self.stalled >= 2
            or any(p in resources for p in self.path[1:-1])
        )
        if stale:
            plan = plan_path(sit.layout, sit.pos, dst, resources, avoid)
            self.path = [sit.pos, *plan.cells]
            self.dst = dst
            if self.stalled >= 2:
                self.stalled = 0
        nxt = self.path[1]
        self.path = self.path[1:]
        self.last_pos = sit.pos
        return move_action_for(sit.orientation, (nxt[0] - sit.pos[0], nxt[1] - sit.pos[1]))


class MoveTo(Routine):
    def __init__(self, call: SubgoalCall) -> None:
        super().__init__(call)
        self.walker = _Walker()
        self.stuck = 0

    def _next(self, sit: Situation) -> AtomicAction | None:
        if sit.pos is None:
            self.fail("not on the map")
            return None
        dst = self.call.target
        if sit.pos == dst:
            return None
        before = self.walker.last_pos
        self.stuck = self.stuck + 1 if before == sit.pos else 0
        if self.stuck > STUCK_LIMIT:
            self.fail(f"stuck at {sit.pos}")
            return None
        try:
            return self.walker.step_towards(sit, dst)
        except Unreachable as exc:
            self.fail(str(exc))
            return None


class FireAt(Routine):
    """Go near ``target`` and fire at the first opponent that lines up.

    Without a visible opponent the routine scans by turning clockwise and,
    after each full turn, shifts to another cell around ``target``.
    """

    def __init__(
        self,
        call: SubgoalCall,
        budget: int = FIRE_BUDGET,
        vicinity: int = FIRE_VICINITY,
        preferred: Iterable[int] = (),
    ) -> None:
        super().__init__(call)
        self.budget = budget
        self.vicinity = vicinity
        self.preferred = list(preferred)
        self.walker = _Walker()
        self.turns = 0
        self.anchor_index = 0
        self.anchor: Pos | None = None
        self.fired = False

    def _pick_opponent(self, sit: Situation) -> tuple[int, Pos] | None:
        if not sit.opponents or sit.pos is None:
            return None
        pos = sit.pos
        ranked = sorted(
            sit.opponents.items(),
            key=lambda kv: (kv[0] not in self.preferred, manhattan(pos, kv[1]), kv[0]),
        )
        return ranked[0]

    def _anchors(self, sit: Situation) -> list[Pos]:
        tx, ty = self.call.target
        cells = [
            (tx + dx, ty + dy)
            for dx in range(-self.vicinity, self.vicinity + 1)
            for dy in range(-self.vicinity, self.vicinity + 1)
            if abs(dx) + abs(dy) <= self.vicinity
        ]
        return sorted(
            (c for c in cells if not sit.layout.blocked(c) and c not in sit.resources),
            key=lambda c: (manhattan(c, (tx, ty)), c),
        )

    def _next(self, sit: Situation) -> AtomicAction | None:
        if sit.interacted:
            self.note = "interaction"
            return None
        if self.steps >= self.budget:
            self.note = "budget exhausted"
            return None
        if sit.pos is None:
            return AtomicAction.NOOP
        pos = sit.pos

        for idx, opp in sorted(sit.opponents.items(), key=lambda kv: manhattan(pos, kv[1])):
            d = direction_to(pos, opp)
            if (
                d is not None
                and manhattan(pos, opp) <= sit.beam_length
                and line_clear(sit.layout, pos, opp)
            ):
                turn = turn_towards(sit.orientation, d)
                if turn is None:
                    self.fired = True
                    return AtomicAction.FIRE_BEAM
                return turn

        try:
            chosen = self._pick_opponent(sit)
            if chosen is not None:
                return self._approach(sit, chosen[1])
            if manhattan(pos, self.call.target) > self.vicinity:
                anchors = self._anchors(sit)
                goal = anchors[0] if anchors else self.call.target
                step = self.walker.step_towards(sit, goal)
                if step is not None:
                    return step
            if self.turns < 4:
                self.turns += 1
                return AtomicAction.TURN_RIGHT
            self.turns = 0
            anchors = [a for a in self._anchors(sit) if a != pos]
            if anchors:
                self.anchor_index = (self.anchor_index + 1) % len(anchors)
                self.anchor = anchors[self.anchor_index]
            if self.anchor is not None and self.anchor != pos:
                step = self.walker.step_towards(sit, self.anchor)
                if step is not None:
                    return step
            return AtomicAction.TURN_RIGHT
        except Unreachable:
            return AtomicAction.TURN_RIGHT

    def _approach(self, sit: Situation, opp: Pos) -> AtomicAction:
        """Walk to the nearest cell that shares a row or column with ``opp``."""
        assert sit.pos is not None
        goals = []
        for d in ORIENTATIONS:
            cell = opp
            for dist in range(1, sit.beam_length + 1):
                cell = add(cell, DIRECTIONS[d])
                if sit.layout.blocked(cell):
                    break
                goals.append((manhattan(sit.pos, cell), dist, cell))
        goals.sort()
        occupied = set(sit.opponents.values())
        for _, _, goal in goals:
            if goal in occupied or goal in sit.resources:
                continue
            step = self.walker.step_towards(sit, goal, avoid=occupied)
            if step is not None:
                return step
            break
        return AtomicAction.TURN_RIGHT


def adjacent_cells(layout: Layout, target: Pos) -> list[Pos]:
    return [
        (target[0] + dx, target[1] + dy)
        for dx, dy in _NEIGHBOURS
        if not layout.blocked((target[0] + dx, target[1] + dy))
    ]


class Interact(Routine):
    """Walk next to a fixture, face it and use it once."""

    def __init__(self, call: SubgoalCall) -> None:
        super().__init__(call)
        self.walker = _Walker()
        self.used = False
        self.stand: Pos | None = None
        self.stuck = 0

    def _next(self, sit: Situation) -> AtomicAction | None:
        target = self.call.target
        if self.used:
            if sit.last_result == "blocked":
                self.fail("interaction had no effect")
            return None
        if target not in sit.fixtures:
            self.fail(f"no fixture at {target}")
            return None
        if sit.pos is None:
            return AtomicAction.NOOP
        if manhattan(sit.pos, target) == 1 and _same_side(sit, sit.pos, target):
            turn = turn_towards(sit.orientation, direction_to(sit.pos, target) or sit.orientation)
            if turn is not None:
                return turn
            self.used = True
            return AtomicAction.FIRE_BEAM
        if self.stand is None:
            options = [c for c in adjacent_cells(sit.layout, target) if _same_side(sit, c, target)]
            reachable = []
            for c in options:
                try:
                    plan = plan_path(sit.layout, sit.pos, c)
                except Unreachable:
                    continue
                reachable.append((len(plan.cells), c))
            if not reachable:
                self.fail(f"{target} is not reachable from this side")
                return None
            self.stand = min(reachable)[1]
        before = self.walker.last_pos
        self.stuck = self.stuck + 1 if before == sit.pos else 0
        if self.stuck > STUCK_LIMIT:
            self.fail(f"stuck at {sit.pos}")
            return None
        try:
            return self.walker.step_towards(sit, self.stand)
        except Unreachable as exc:
            self.fail(str(exc))
            return None


def _same_side(sit: Situation, cell: Pos, target: Pos) -> bool:
    if sit.barrier_x is None or sit.pos is None:
        return True
    mine = 0 if sit.pos[0] < sit.barrier_x else 1
    cell_side = 0 if cell[0] < sit.barrier_x else 1
    return cell_side == mine and cell[0] != sit.barrier_x


class Wait(Routine):
    """Stands next to the pot at ``target`` and no-ops until it is cooked.

    Walking there first keeps the pot in view, so the cooked state is seen
    as soon as it happens. The budget counts every step of the routine.
    """

    def __init__(self, call: SubgoalCall, budget: int = WAIT_BUDGET) -> None:
        super().__init__(call)
        self.budget = budget
        self.walker = _Walker()
        self.stand: Pos | None = None

    def _next(self, sit: Situation) -> AtomicAction | None:
        target = self.call.target
        if sit.fixtures.get(target) != "pot":
            self.fail(f"no pot at {target}")
            return None
        if sit.pots.get(target) == "cooked_pot":
            return None
        if self.steps >= self.budget:
            self.note = "budget exhausted"
            return None
        if sit.pos is None or manhattan(sit.pos, target) <= 1:
            return AtomicAction.NOOP
        if self.stand is None:
            options = [c for c in adjacent_cells(sit.layout, target) if _same_side(sit, c, target)]
            options.sort(key=lambda c: (manhattan(sit.pos, c), c))  # type: ignore[arg-type]
            if not options:
                return AtomicAction.NOOP
            self.stand = options[0]
        try:
            step = self.walker.step_towards(sit, self.stand)
        except Unreachable:
            return AtomicAction.NOOP
        return step if step is not None else AtomicAction.NOOP


def compile_call(call: SubgoalCall, **options: object) -> Routine:
    if call.name == "move_to":
        return MoveTo(call)
    if call.name == "fire_at":
        return FireAt(call, **options)  # type: ignore[arg-type]
    if call.name == "interact":
        return Interact(call)
    return Wait(call)


def compile_fire_at(target: Pos, **options: object) -> FireAt:
    return FireAt(fire_at(target), **options)  # type: ignore[arg-type]


def compile_interact(target: Pos) -> Interact:
    return Interact(interact(target))


def compile_wait(target: Pos, budget: int = WAIT_BUDGET) -> Wait:
    return Wait(wait(target), budget)
