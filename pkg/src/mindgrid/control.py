"""Controller interface shared by scripted bots and reasoning agents."""

from __future__ import annotations

from typing import Any, Sequence

from .core import AtomicAction, GameEvent, WorldState


class Controller:
    """Chooses one atomic action per step for one player.

    ``act`` receives the full world state and the events of the previous
    step. Scripted bots may read the whole state; agents restrict themselves
    to :func:`mindgrid.core.observe` for their own player.
    """

    label = "controller"

    def __init__(self) -> None:
        self.player = -1
        self.seed = 0

    def reset(self, player: int, world: WorldState, seed: int) -> None:
        self.player = player
        self.seed = seed

    def act(self, world: WorldState, events: Sequence[GameEvent]) -> AtomicAction:
        raise NotImplementedError

    def describe(self) -> dict[str, Any]:
        return {"label": self.label}


class NoopController(Controller):
    label = "noop"

    def act(self, world: WorldState, events: Sequence[GameEvent]) -> AtomicAction:
        return AtomicAction.NOOP


class ScriptedController(Controller):
    """Replays a fixed action list, then no-ops."""

    label = "scripted"

    def __init__(self, actions: Sequence[AtomicAction | str]) -> None:
        super().__init__()
        self.actions = [AtomicAction(a) for a in actions]
        self.cursor = 0

    def reset(self, player: int, world: WorldState, seed: int) -> None:
        super().reset(player, world, seed)
        self.cursor = 0

    def act(self, world: WorldState, events: Sequence[GameEvent]) -> AtomicAction:
        if self.cursor >= len(self.actions):
            return AtomicAction.NOOP
        self.cursor += 1
        return self.actions[self.cursor - 1]
