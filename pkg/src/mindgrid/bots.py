"""Scripted background players for every scenario.

Each bot is a :class:`BotSpec` (what it does) plus a :class:`BotState`
(what it has seen). The decision functions ``rws_next_target``,
``pd_next_play`` and ``cooking_partner_policy`` are small and pure apart
from draws on the bot's own RNG; :class:`MatrixBot` and :class:`KitchenBot`
embody them on the grid.

Bots read the true world state: they know where every resource and player
is. Only the focal agent is restricted to its own observation window.
"""

from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Any, Mapping, Sequence

import yaml

from .control import Controller
from .core import (
    AtomicAction,
    ContractViolation,
    GameEvent,
    WorldState,
    derive_seed,
    manhattan,
    move_action_for,
    observe,
)
from .layout import Pos, data_text
from .matrix import COOPERATE, DEFECT, RWS_PLAYS, counter
from .parsing import fire_at, move_to
from .perception import StructuredObservation
from .planner import (
    FireAt,
    MoveTo,
    Situation,
    Unreachable,
    adjacent_cells,
    direction_to,
    plan_path,
    turn_towards,
)

RWS_VARIANTS = ("pure", "best_response", "flip", "gullible")
PD_VARIANTS = ("cooperator", "defector", "grim", "tit_for_tat", "cooperate_then_defect", "corrigible")
COOKING_VARIANTS = ("skilled", "semi_skilled", "unhelpful")
VARIANTS = {
    "rws_repeated": RWS_VARIANTS,
    "rws_arena": RWS_VARIANTS,
    "pd_repeated": PD_VARIANTS,
    "cooking_asymmetric": COOKING_VARIANTS,
}
COMMITMENTS = (1, 3, 5)
SCENARIO_COUNTS = {"rws_repeated": 9, "rws_arena": 8, "pd_repeated": 10, "cooking_asymmetric": 3}


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class BotSpec:
    substrate: str
    variant: str
    commitment: int = 5
    params: Mapping[str, Any] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.substrate not in VARIANTS:
            raise ContractViolation(f"unknown substrate {self.substrate!r}")
        if self.variant not in VARIANTS[self.substrate]:
            raise ContractViolation(f"{self.variant!r} is not a {self.substrate} bot")
        if self.commitment not in COMMITMENTS:
            raise ContractViolation(f"commitment must be one of {COMMITMENTS}")
        p = self.params
        if self.variant in ("pure", "flip") and p.get("kind") not in (*RWS_PLAYS, "random"):
            raise ContractViolation(f"{self.variant} bot needs a kind, got {p.get('kind')!r}")
        if self.variant == "flip":
            if int(p.get("flip_after", 0)) < 1:
                raise ContractViolation("flip_after must be at least 1")
            if p.get("commitment_after", self.commitment) not in COMMITMENTS:
                raise ContractViolation("commitment_after must be 1, 3 or 5")
        if self.variant == "grim" and int(p.get("threshold", 0)) < 1:
            raise ContractViolation("grim threshold must be at least 1")
        if self.variant == "corrigible" and int(p.get("trigger", 0)) < 1:
            raise ContractViolation("corrigible trigger must be at least 1")
        if self.variant == "cooperate_then_defect" and int(p.get("switch_at", 0)) < 1:
            raise ContractViolation("switch_at must be at least 1")
        for key in ("noise", "error"):
            if not 0.0 <= float(p.get(key, 0.0)) <= 1.0:
                raise ContractViolation(f"{key} must be a probability")

    def to_record(self) -> dict[str, Any]:
        return {
            "substrate": self.substrate,
            "variant": self.variant,
            "commitment": self.commitment,
            "params": dict(self.params),
            "seed": self.seed,
        }


@dataclass
class BotState:
    rng: random.Random = field(default_factory=random.Random)
    interactions: int = 0
    own_plays: list[str] = field(default_factory=list)
    opponent_plays: list[str] = field(default_factory=list)
    opponent_defections: int = 0
    grim_fired: bool = False
    persuaded: bool = False
    initial_kind: str | None = None
    target: str | None = None
    commitment: int = 5

    def record(self, own_play: str, opponent_play: str) -> None:
        """Log one finished interaction."""
        self.interactions += 1
        self.own_plays.append(own_play)
        self.opponent_plays.append(opponent_play)
        if opponent_play == DEFECT:
            self.opponent_defections += 1


# -- decision rules ------------------------------------------------------------------


def _initial_kind(spec: BotSpec, st: BotState) -> str:
    if st.initial_kind is None:
        kind = spec.params.get("kind", "random")
        st.initial_kind = st.rng.choice(RWS_PLAYS) if kind == "random" else kind
    return st.initial_kind


def rws_next_target(spec: BotSpec, st: BotState) -> tuple[str, int]:
    """Resource kind and commitment for the bot's next interaction."""
    v = spec.variant
    if v == "pure":
        return _initial_kind(spec, st), spec.commitment
    if v == "best_response":
        if not st.opponent_plays:
            return st.rng.choice(RWS_PLAYS), spec.commitment
        return counter(st.opponent_plays[-1]), spec.commitment
    if v == "flip":
        initial = _initial_kind(spec, st)
        if st.interactions < int(spec.params["flip_after"]):
            return initial, spec.commitment
        after = int(spec.params.get("commitment_after", spec.commitment))
        return counter(counter(initial)), after
    if v == "gullible":
        counts = Counter(st.opponent_plays)
        if not counts:
            return st.rng.choice(RWS_PLAYS), spec.commitment
        top = max(counts.values())
        tied = [k for k in RWS_PLAYS if counts.get(k) == top]
        guess = tied[0] if len(tied) == 1 else st.rng.choice(tied)
        return counter(guess), spec.commitment
    raise ContractViolation(f"{v!r} is not a rock-paper-scissors bot")


def _tit_for_tat(st: BotState, noise: float) -> str:
    play = st.opponent_plays[-1] if st.opponent_plays else COOPERATE
    if noise > 0 and play == COOPERATE and st.rng.random() < noise:
        return DEFECT
    return play


def pd_next_play(spec: BotSpec, st: BotState) -> str:
    """Cooperate or defect in the bot's next interaction."""
    v, p = spec.variant, spec.params
    if v == "cooperator":
        return COOPERATE
    if v == "defector":
        return DEFECT
    if v == "grim":
        if st.opponent_defections >= int(p["threshold"]):
            st.grim_fired = True
        return DEFECT if st.grim_fired else COOPERATE
    if v == "tit_for_tat":
        return _tit_for_tat(st, float(p.get("noise", 0.0)))
    if v == "cooperate_then_defect":
        return COOPERATE if st.interactions < int(p["switch_at"]) else DEFECT
    if v == "corrigible":
        if st.opponent_defections >= int(p["trigger"]):
            st.persuaded = True
        if not st.persuaded:
            return DEFECT
        return _tit_for_tat(st, float(p.get("noise", 0.0)))
    raise ContractViolation(f"{v!r} is not a prisoner's dilemma bot")


def next_target(spec: BotSpec, st: BotState) -> tuple[str, int]:
    if spec.substrate == "pd_repeated":
        return pd_next_play(spec, st), spec.commitment
    return rws_next_target(spec, st)


# -- scenario catalog ----------------------------------------------------------------


@lru_cache(maxsize=1)
def scenario_catalog() -> dict[str, dict[int, dict[str, Any]]]:
    raw = yaml.safe_load(data_text("scenarios.yaml"))
    return {sub: {int(k): v for k, v in entries.items()} for sub, entries in raw.items()}


def scenario_ids(substrate: str) -> list[int]:
    try:
        return sorted(scenario_catalog()[substrate])
    except KeyError:
        raise ScenarioError(f"unknown substrate {substrate!r}") from None


def describe_scenario(substrate: str, scenario: int) -> str:
    return _scenario_entry(substrate, scenario)["description"]


def _scenario_entry(substrate: str, scenario: int) -> dict[str, Any]:
    entries = scenario_catalog().get(substrate)
    if entries is None:
        raise ScenarioError(f"unknown substrate {substrate!r}")
    if scenario not in entries:
        raise ScenarioError(f"{substrate} has no scenario {scenario}")
    return entries[scenario]


def mixture_probabilities(substrate: str, scenario: int) -> list[tuple[Fraction, dict[str, Any]]]:
    """Exact probability of every option of a scenario's mixture."""
    options = _scenario_entry(substrate, scenario)["mixture"]
    total = sum(Fraction(o["weight"]) for o in options)
    return [(Fraction(o["weight"]) / total, o) for o in options]


def build_scenario(substrate: str, scenario_id: int, seed: int) -> list[BotSpec]:
    """Draw the background bots of one scenario for one seed."""
    entry = _scenario_entry(substrate, scenario_id)
    options = entry["mixture"]
    weights = [float(Fraction(o["weight"])) for o in options]
    specs = []
    for i in range(int(entry["bots"])):
        rng = random.Random(derive_seed(seed, "scenario", substrate, scenario_id, i))
        option = rng.choices(options, weights=weights)[0]
        params = {k: v for k, v in option.items() if k not in ("weight", "variant", "commitment")}
        if params.get("kind") == "random":
            params["kind"] = rng.choice(RWS_PLAYS)
        commitment = option.get("commitment", 5)
        if isinstance(commitment, list):
            commitment = rng.choice(commitment)
        specs.append(
            BotSpec(
                substrate,
                option["variant"],
                int(commitment),
                params,
                derive_seed(seed, "bot", substrate, scenario_id, i),
            )
        )
    return specs


# -- embodiment: matrix games -----------------------------------------------------------


def _interaction_plays(event: GameEvent, player: int) -> tuple[str, str, int]:
    """(own play, opponent play, opponent index) for ``player`` in ``event``."""
    a, b = event.players
    plays = event.data["plays"]
    if player == a:
        return plays[0], plays[1], b
    return plays[1], plays[0], a


class MatrixBot(Controller):
    """Collect the target kind up to the commitment, then hunt the nearest player."""

    label = "bot"

    def __init__(self, spec: BotSpec) -> None:
        super().__init__()
        self.spec = spec
        self.state = BotState()
        self.routine: MoveTo | FireAt | None = None
        self.goal: Pos | None = None

    def reset(self, player: int, world: WorldState, seed: int) -> None:
        super().reset(player, world, seed)
        self.state = BotState(rng=random.Random(self.spec.seed))
        self.state.target, self.state.commitment = next_target(self.spec, self.state)
        self.routine = None
        self.goal = None

    def describe(self) -> dict[str, Any]:
        return {"label": self.label, **self.spec.to_record()}

    def act(self, world: WorldState, events: Sequence[GameEvent]) -> AtomicAction:
        interacted = False
        for ev in events:
            if ev.kind == "interaction" and self.player in ev.players:
                own, other, _ = _interaction_plays(ev, self.player)
                self.state.record(own, other)
                self.state.target, self.state.commitment = next_target(self.spec, self.state)
                self.routine, self.goal, interacted = None, None, True
        me = world.players[self.player]
        if me.pos is None or me.inventory is None:
            return AtomicAction.NOOP
        rules = world.rules
        plays = rules.plays  # type: ignore[attr-defined]
        resources = {
            pos: plays[rules.kind_index(cell.kind)]  # type: ignore[attr-defined]
            for pos, cell in world.resources.items()
            if cell.present
        }
        opponents = {q.index: q.pos for q in world.players if q.index != self.player and q.pos}
        sit = Situation(
            layout=world.layout,
            pos=me.pos,
            orientation=me.orientation,
            step=world.step_count,
            resources=resources,
            opponents=opponents,  # type: ignore[arg-type]
            beam_length=rules.beam_length,  # type: ignore[attr-defined]
            interacted=interacted,
        )
        target = self.state.target
        assert target is not None
        have = me.inventory[plays.index(target)]
        if have < 1 + self.state.commitment:
            action = self._collect(sit, target, resources)
            if action is not None:
                return action
            if max(me.inventory) < 2:
                return AtomicAction.NOOP
        return self._hunt(sit)

    def _collect(
        self, sit: Situation, target: str, resources: dict[Pos, str]
    ) -> AtomicAction | None:
        assert sit.pos is not None
        here = sit.pos
        if isinstance(self.routine, FireAt):
            self.routine = None
        if self.goal is None or resources.get(self.goal) != target or self.routine is None:
            cells = [p for p, k in resources.items() if k == target]
            if not cells:
                return None
            self.goal = min(cells, key=lambda c: (manhattan(here, c), c))
            self.routine = MoveTo(move_to(here, self.goal))
        action = self.routine.next_action(sit)
        if action is None:
            self.routine, self.goal = None, None
            return AtomicAction.NOOP
        return action

    def _hunt(self, sit: Situation) -> AtomicAction:
        assert sit.pos is not None
        here = sit.pos
        if not isinstance(self.routine, FireAt) or self.routine.status != "running":
            if not sit.opponents:
                return AtomicAction.NOOP
            nearest = min(sit.opponents.values(), key=lambda c: (manhattan(here, c), c))
            self.routine = FireAt(fire_at(nearest))
            self.goal = None
        action = self.routine.next_action(sit)
        if action is None:
            self.routine = None
            return AtomicAction.NOOP
        return action


# -- embodiment: kitchen ---------------------------------------------------------------


TOMATO_ROLE, DISH_ROLE = "tomatoes", "dishes"


@dataclass
class KitchenBotState:
    rng: random.Random
    layout: Any
    barrier_x: int
    side: int
    role: str
    stand: Pos | None = None
    path: list[Pos] = field(default_factory=list)


def side_role(layout: Any, barrier_x: int, side: int) -> str:
    """Role that suits one side: whichever of tomato or delivery is nearer the pots."""

    def on_side(p: Pos) -> bool:
        return (p[0] < barrier_x) == (side == 0) and p[0] != barrier_x

    pots = [p for p, k in layout.fixtures.items() if k == "pot"]
    tomato = [p for p, k in layout.fixtures.items() if k == "tomato_dispenser" and on_side(p)]
    delivery = [p for p, k in layout.fixtures.items() if k == "delivery" and on_side(p)]
    if not pots or not tomato or not delivery:
        return TOMATO_ROLE if tomato else DISH_ROLE

    def reach(cells: list[Pos]) -> int:
        return min(manhattan(a, b) for a in cells for b in pots)

    return TOMATO_ROLE if reach(tomato) <= reach(delivery) else DISH_ROLE


def _visible(obs: StructuredObservation, *kinds: str) -> list[Pos]:
    out: list[Pos] = []
    for k in kinds:
        out.extend(obs.entities.get(k, ()))
    return sorted(out)


def _use(st: KitchenBotState, obs: StructuredObservation, target: Pos, ready: bool) -> AtomicAction:
    """Walk next to ``target``, face it, and fire once ``ready``."""
    pos = obs.position
    assert pos is not None
    if manhattan(pos, target) == 1:
        turn = turn_towards(obs.orientation, direction_to(pos, target) or obs.orientation)
        if turn is not None:
            return turn
        return AtomicAction.FIRE_BEAM if ready else AtomicAction.NOOP
    stands = [
        c
        for c in adjacent_cells(st.layout, target)
        if c[0] != st.barrier_x and (c[0] < st.barrier_x) == (st.side == 0)
    ]
    best: tuple[int, Pos, list[Pos]] | None = None
    for c in stands:
        try:
            cells = list(plan_path(st.layout, pos, c).cells)
        except Unreachable:
            continue
        if best is None or (len(cells), c) < (best[0], best[1]):
            best = (len(cells), c, cells)
    if best is None:
        return AtomicAction.NOOP
    nxt = best[2][0]
    return move_action_for(obs.orientation, (nxt[0] - pos[0], nxt[1] - pos[1]))


def _mine(st: KitchenBotState, cells: list[Pos]) -> list[Pos]:
    return [c for c in cells if c[0] == st.barrier_x or (c[0] < st.barrier_x) == (st.side == 0)]


def cooking_partner_policy(
    spec: BotSpec, obs: StructuredObservation, st: KitchenBotState
) -> AtomicAction:
    """One step of the kitchen partner; ``obs`` should cover the whole kitchen."""
    if spec.variant == "unhelpful" or obs.position is None:
        return AtomicAction.NOOP
    pos = obs.position
    held = obs.held

    def nearest(cells: list[Pos]) -> Pos | None:
        cells = _mine(st, cells)
        return min(cells, key=lambda c: (manhattan(pos, c), c)) if cells else None

    open_pots = sorted(
        _mine(st, _visible(obs, "pot_with_2_tomatoes"))
        + _mine(st, _visible(obs, "pot_with_1_tomato"))
        + _mine(st, _visible(obs, "empty_pot")),
        key=lambda c: (0 if c in obs.entities.get("pot_with_2_tomatoes", ()) else
                       1 if c in obs.entities.get("pot_with_1_tomato", ()) else 2,
                       manhattan(pos, c), c),
    )
    cooked = nearest(_visible(obs, "cooked_pot"))
    cooking = nearest(_visible(obs, "cooking_pot"))
    target: Pos | None = None
    ready = True
    if held == "tomato":
        target = open_pots[0] if open_pots else None
    elif held == "soup_in_dish":
        target = nearest(_visible(obs, "delivery_location"))
    elif held == "dish":
        if cooked is not None:
            target = cooked
        elif cooking is not None:
            target, ready = cooking, False
        elif st.role == TOMATO_ROLE:
            target = nearest(_visible(obs, "empty_counter"))
    elif st.role == TOMATO_ROLE:
        target = nearest(_visible(obs, "tomato_dispenser"))
    else:
        target = nearest(_visible(obs, "dish_dispenser"))
    action = AtomicAction.NOOP if target is None else _use(st, obs, target, ready)
    if spec.variant == "semi_skilled" and st.rng.random() < float(spec.params.get("error", 0.3)):
        return AtomicAction.NOOP
    return action


class KitchenBot(Controller):
    label = "bot"

    def __init__(self, spec: BotSpec) -> None:
        super().__init__()
        self.spec = spec
        self.state: KitchenBotState | None = None

    def describe(self) -> dict[str, Any]:
        return {"label": self.label, **self.spec.to_record()}

    def reset(self, player: int, world: WorldState, seed: int) -> None:
        super().reset(player, world, seed)
        rules = world.rules
        pos = world.players[player].pos
        assert pos is not None
        barrier_x = rules.barrier_x  # type: ignore[attr-defined]
        side = 0 if pos[0] < barrier_x else 1
        self.state = KitchenBotState(
            rng=random.Random(self.spec.seed),
            layout=world.layout,
            barrier_x=barrier_x,
            side=side,
            role=self.spec.params.get("role") or side_role(world.layout, barrier_x, side),
        )

    def act(self, world: WorldState, events: Sequence[GameEvent]) -> AtomicAction:
        assert self.state is not None
        if self.spec.variant == "unhelpful":
            return AtomicAction.NOOP
        return cooking_partner_policy(self.spec, observe(world, self.player, full=True), self.state)


def make_bot(spec: BotSpec) -> Controller:
    if spec.substrate == "cooking_asymmetric":
        return KitchenBot(spec)
    return MatrixBot(spec)
