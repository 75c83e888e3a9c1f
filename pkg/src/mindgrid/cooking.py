"""Two-player kitchen split by a barrier: tomatoes go into pots, soup gets delivered.

Interaction reuses ``fire_beam``: it acts on the fixture the player faces.
Pots sit on the barrier column so both sides can reach them; every other
fixture belongs to exactly one side.
"""

from __future__ import annotations

import random
from typing import Any

from .core import (
    AtomicAction,
    ContractViolation,
    DIRECTIONS,
    EpisodeConfig,
    GameEvent,
    PlayerState,
    Pot,
    Substrate,
    Window,
    WorldState,
    add,
    apply_movement,
    manhattan,
    register_substrate,
)
from .layout import Layout, Pos, load_layout

TOMATO, DISH, SOUP = "tomato", "dish", "soup_in_dish"
POT_CAPACITY = 3
DELIVERY_REWARD = 20.0

COOKING_EVENTS = (
    "picked_tomato",
    "put_tomato_in_pot",
    "picked_dish",
    "put_down_item",
    "plated_soup",
    "delivered_soup",
    "blocked",
)

# Phrases used when describing a teammate's behavior in prompts.
TEAMMATE_PHRASES = {
    "picked_tomato": "Teammate picked up a tomato",
    "put_tomato_in_pot": "Teammate put a tomato in a pot",
    "picked_dish": "Teammate picked up a dish",
    "put_down_item": "Teammate put down a {item}",
    "plated_soup": "Teammate picked up cooked soup in dish",
    "delivered_soup": "Teammate delivered cooked soup",
}

_ITEM_WORDS = {TOMATO: "tomato", DISH: "dish", SOUP: "soup"}


def teammate_phrase(event: GameEvent) -> str | None:
    template = TEAMMATE_PHRASES.get(event.kind)
    if template is None:
        return None
    return template.format(item=_ITEM_WORDS.get(event.data.get("item", ""), "item"))


def pot_kind(pot: Pot) -> str:
    if pot.cooked:
        return "cooked_pot"
    if pot.tomatoes >= POT_CAPACITY:
        return "cooking_pot"
    if pot.tomatoes == 0:
        return "empty_pot"
    if pot.tomatoes == 1:
        return "pot_with_1_tomato"
    return f"pot_with_{pot.tomatoes}_tomatoes"


def counter_kind(item: str | None) -> str:
    if item is None:
        return "empty_counter"
    return f"counter_with_{_ITEM_WORDS[item]}"


@register_substrate
class KitchenSubstrate(Substrate):
    name = "cooking_asymmetric"
    map_name = "cooking_asymmetric"
    n_players = 2
    window = Window(2, 2, 2)
    entity_kinds = (
        "tomato_dispenser",
        "dish_dispenser",
        "delivery_location",
        "empty_counter",
        "counter_with_tomato",
        "counter_with_dish",
        "counter_with_soup",
        "empty_pot",
        "pot_with_1_tomato",
        "pot_with_2_tomatoes",
        "cooking_pot",
        "cooked_pot",
    )

    def __init__(self, layout: Layout, cook_time: int = 20, **params: Any) -> None:
        super().__init__(layout, **params)
        if cook_time < 1:
            raise ContractViolation("cook_time must be positive")
        if not layout.barrier:
            raise ContractViolation(f"{layout.name} has no barrier")
        xs = {x for x, _ in layout.barrier}
        if len(xs) != 1:
            raise ContractViolation("barrier must be a single column")
        self.cook_time = cook_time
        self.barrier_x = xs.pop()

    @classmethod
    def create(cls, **params: Any) -> "KitchenSubstrate":
        layout = params.pop("layout", None) or load_layout(cls.map_name)
        return cls(layout, **params)

    def settings(self) -> dict[str, Any]:
        return {"cook_time": self.cook_time}

    def initial_state(self, config: EpisodeConfig) -> WorldState:
        spawns = self.layout.spawns
        if len(spawns) < self.n_players:
            raise ContractViolation(f"{self.layout.name} has fewer spawns than players")
        players = [PlayerState(i, spawns[i], "N") for i in range(self.n_players)]
        fixtures = self.layout.fixtures
        return WorldState(
            rules=self,
            layout=self.layout,
            players=players,
            rng=random.Random(config.seed),
            max_steps=config.max_steps,
            pots={pos: Pot() for pos, kind in fixtures.items() if kind == "pot"},
            counters={pos: None for pos, kind in fixtures.items() if kind == "counter"},
        )

    # -- geometry --------------------------------------------------------------

    def side_of(self, pos: Pos) -> int | None:
        """0 left of the barrier, 1 right of it, None on the barrier column."""
        if pos[0] == self.barrier_x:
            return None
        return 0 if pos[0] < self.barrier_x else 1

    def on_side(self, player_pos: Pos, target: Pos) -> bool:
        side = self.side_of(target)
        return side is None or side == self.side_of(player_pos)

    def fixtures_of(self, kind: str, side: int | None = None) -> list[Pos]:
        """Fixture cells of ``kind``, optionally restricted to one side."""
        cells = sorted(p for p, k in self.layout.fixtures.items() if k == kind)
        if side is None:
            return cells
        return [p for p in cells if self.side_of(p) in (None, side)]

    # -- observation -----------------------------------------------------------

    def entities_at(self, state: WorldState, pos: Pos) -> list[str]:
        kind = self.layout.fixtures.get(pos)
        if kind is None:
            return []
        if kind == "pot":
            return [pot_kind(state.pots[pos])]
        if kind == "counter":
            return [counter_kind(state.counters[pos])]
        if kind == "delivery":
            return ["delivery_location"]
        return [kind]

    def view_char(self, state: WorldState, pos: Pos) -> str:
        if pos in self.layout.barrier:
            return "|"
        kind = self.layout.fixtures.get(pos)
        if kind is not None:
            return {"tomato_dispenser": "T", "dish_dispenser": "D", "pot": "O",
                    "delivery": "S", "counter": "C"}[kind]
        return super().view_char(state, pos)

    # -- transition --------------------------------------------------------------

    def transition(
        self, state: WorldState, joint: list[AtomicAction]
    ) -> tuple[list[float], list[GameEvent]]:
        rewards = [0.0] * len(state.players)
        events: list[GameEvent] = []
        apply_movement(state, joint)
        for p in state.players:
            if joint[p.index] is not AtomicAction.FIRE_BEAM or p.pos is None:
                continue
            target = add(p.pos, DIRECTIONS[p.orientation])
            event = interact_with(state, p.index, target)
            events.append(event)
            if event.kind == "delivered_soup":
                rewards = [r + DELIVERY_REWARD for r in rewards]
        tick_pots(state)
        return rewards, events


def interact_with(state: WorldState, player: int, target: Pos) -> GameEvent:
    """Apply one interaction of ``player`` with the fixture at ``target``.

    Anything that is not a defined transition yields a ``blocked`` event and
    leaves the state untouched.
    """
    rules: KitchenSubstrate = state.rules  # type: ignore[assignment]
    p = state.players[player]
    step = state.step_count

    def event(kind: str, **data: Any) -> GameEvent:
        return GameEvent(kind, step, (player,), {"target": list(target), **data})

    def blocked(reason: str) -> GameEvent:
        return event("blocked", reason=reason, held=p.held)

    if p.pos is None or manhattan(p.pos, target) != 1:
        return blocked("not adjacent")
    if not rules.on_side(p.pos, target):
        return blocked("other side of the barrier")
    kind = state.layout.fixtures.get(target)
    if kind is None:
        return blocked("nothing to interact with")

    if kind == "tomato_dispenser":
        if p.held is not None:
            return blocked("hands full")
        p.held = TOMATO
        return event("picked_tomato")
    if kind == "dish_dispenser":
        if p.held is not None:
            return blocked("hands full")
        p.held = DISH
        return event("picked_dish")
    if kind == "pot":
        pot = state.pots[target]
        if p.held == TOMATO and pot.tomatoes < POT_CAPACITY and not pot.cooked:
            pot.tomatoes += 1
            if pot.tomatoes == POT_CAPACITY:
                pot.timer = rules.cook_time
            p.held = None
            return event("put_tomato_in_pot", tomatoes=pot.tomatoes)
        if p.held == DISH and pot.cooked:
            state.pots[target] = type(pot)()
            p.held = SOUP
            return event("plated_soup")
        return blocked("pot not ready for this item")
    if kind == "delivery":
        if p.held != SOUP:
            return blocked("nothing to deliver")
        p.held = None
        return event("delivered_soup", reward=DELIVERY_REWARD)
    if kind == "counter":
        item = state.counters[target]
        if p.held is not None and item is None:
            state.counters[target] = p.held
            placed, p.held = p.held, None
            return event("put_down_item", item=placed)
        if p.held is None and item is not None:
            state.counters[target] = None
            p.held = item
            label = {TOMATO: "picked_tomato", DISH: "picked_dish", SOUP: "plated_soup"}[item]
            return event(label, source="counter")
        return blocked("counter occupied" if item else "counter empty")
    return blocked(f"cannot interact with {kind}")


def tick_pots(state: WorldState) -> WorldState:
    """Advance every full pot's cook timer by one step."""
    for pot in state.pots.values():
        if pot.tomatoes >= POT_CAPACITY and not pot.cooked:
            pot.timer = max(pot.timer - 1, 0)
            if pot.timer == 0:
                pot.cooked = True
    return state


def causal_chain_ok(events: list[GameEvent]) -> bool:
    """Every delivery is preceded by three pot inserts, a dish and a plating.

    Counter pick-ups (``source == 'counter'``) move items around without
    creating them, so they are not counted.
    """
    tomatoes = dishes = plated = 0
    delivered = 0
    for ev in events:
        if ev.data.get("source") == "counter":
            continue
        if ev.kind == "put_tomato_in_pot":
            tomatoes += 1
        elif ev.kind == "picked_dish":
            dishes += 1
        elif ev.kind == "plated_soup":
            plated += 1
            if plated > min(dishes, tomatoes // POT_CAPACITY):
                return False
        elif ev.kind == "delivered_soup":
            delivered += 1
            if delivered > plated:
                return False
    return True
