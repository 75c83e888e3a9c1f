"""Reasoning agents: the modelling agent and the ReAct, Reflexion and PlanReAct baselines.

All variants share memory, prompts, the subgoal planner and the action
compiler. They differ only in where the high-level plan comes from:

* ``tom``: the hypothesis engine in :mod:`mindgrid.tom` (``tom=False``
  turns it off, which is exactly ``planreact``);
* ``planreact``: a plain high-level plan request after each trigger;
* ``react``: no high-level plan, one request that reasons and acts;
* ``reflexion``: ``react`` plus a plan evaluator whose reflections are
  fed into later prompts.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Any, Sequence

from .control import Controller
from .cooking import DELIVERY_REWARD, KitchenSubstrate, teammate_phrase
from .core import AtomicAction, GameEvent, WorldState, observe
from .layout import Pos
from .matrix import MatrixSubstrate
from .parsing import SubgoalCall, format_literal
from .perception import (
    EntityMemory,
    InteractionRecord,
    StructuredObservation,
    render_memory,
    serialize_observation,
)
from .planner import Routine, Situation, compile_call
from .reasoner.base import Reasoner, SamplingConfig
from .reasoner.prompts import render_named
from .reasoner.session import ReasonerParseError, Session
from .subgoals import SubgoalContext, plan_subgoals
from .tom import (
    HighLevelPlan,
    MatrixGame,
    MatrixToM,
    TeammateToM,
    ValueParams,
    inventory_expect,
    text_expect,
)

VARIANTS = ("tom", "planreact", "react", "reflexion")
POT_KINDS = (
    "empty_pot", "pot_with_1_tomato", "pot_with_2_tomatoes", "cooking_pot", "cooked_pot",
)
KITCHEN_FIXTURES = {
    "tomato_dispenser": "tomato_dispenser",
    "dish_dispenser": "dish_dispenser",
    "delivery": "delivery_location",
    "counter": "counter",
    "pot": "pot",
}
UNKNOWN_TEAMMATE = "unknown"


@dataclass
class AgentConfig:
    """Variant and flags of a reasoning agent."""

    variant: str = "tom"
    tom: bool = True
    prompting: str = "modular"  # modular | single
    evaluation: str = "intrinsic"  # intrinsic | counterfactual
    reflection: bool = True  # plan reflection in the kitchen (tom variant)
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    value: ValueParams | None = None
    max_replans: int = 3
    reflection_memory: int = 3
    recent_rewards: int = 5

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown agent variant {self.variant!r}; choose from {VARIANTS}")
        if self.prompting not in ("modular", "single"):
            raise ValueError("prompting must be 'modular' or 'single'")
        if self.evaluation not in ("intrinsic", "counterfactual"):
            raise ValueError("evaluation must be 'intrinsic' or 'counterfactual'")
        if self.max_replans < 1:
            raise ValueError("max_replans must be at least 1")

    @property
    def models_others(self) -> bool:
        return self.variant == "tom" and self.tom

    @property
    def plans_high_level(self) -> bool:
        return self.variant in ("tom", "planreact")

    @property
    def reflects(self) -> bool:
        return self.variant == "reflexion"

    @property
    def tom_mode(self) -> str:
        if self.evaluation == "counterfactual":
            return "counterfactual"
        return self.prompting

    def to_record(self) -> dict[str, Any]:
        return {
            "variant": self.variant,
            "tom": self.tom,
            "prompting": self.prompting,
            "evaluation": self.evaluation,
            "reflection": self.reflection,
            "sampling": self.sampling.to_record(),
            "value": (self.value or ValueParams()).to_record(),
            "max_replans": self.max_replans,
            "reflection_memory": self.reflection_memory,
        }


@dataclass
class ReflectionRecord:
    plan: list[str]
    before: str
    after: str
    verdict: str
    reflection: str

    def to_record(self) -> dict[str, Any]:
        return {
            "plan": list(self.plan), "before": self.before, "after": self.after,
            "verdict": self.verdict, "reflection": self.reflection,
        }


def reflect_on_plan(
    session: Session, plan: Sequence[SubgoalCall], before: str, after: str, reward: float
) -> ReflectionRecord:
    """Evaluate a finished plan; an unchanged state selects the 'failed' prompt."""
    verdict = "failed" if before == after else "checked"
    fields = {
        "verdict_intro": render_named(f"verdict_{verdict}", {}).strip(),
        "plan": format_literal([str(c) for c in plan]),
        "before": before,
        "after": after,
        "reward": format_literal(round(reward, 3)),
    }
    try:
        text = session.ask("evaluate_plan", fields, text_expect("reflection"))
    except ReasonerParseError as exc:
        text = f"(no usable reflection: {exc})"
    return ReflectionRecord([str(c) for c in plan], before, after, verdict, text)


class ReasoningAgent(Controller):
    """One focal player driven by a reasoner."""

    def __init__(self, reasoner: Reasoner, config: AgentConfig | None = None) -> None:
        super().__init__()
        self.reasoner = reasoner
        self.config = config or AgentConfig()
        self.label = self.config.variant

    # -- setup ------------------------------------------------------------------------

    def reset(self, player: int, world: WorldState, seed: int) -> None:
        super().reset(player, world, seed)
        cfg = self.config
        self.rules = world.rules
        self.layout = world.layout
        self.kitchen = isinstance(world.rules, KitchenSubstrate)
        size = f"{world.layout.width}x{world.layout.height}"
        system = render_named(f"system_{world.substrate}", {"player_id": player, "map_size": size})
        self.session = Session(self.reasoner, system, cfg.sampling)
        self.memory = EntityMemory(world.rules.entity_kinds)
        self.valid_cells = world.layout.floor_cells()
        self.plan: HighLevelPlan | None = None
        self.needs_plan = cfg.plans_high_level
        self.queue: list[SubgoalCall] = []
        self.current_plan: list[SubgoalCall] = []
        self.routine: Routine | None = None
        self.outcomes: list[str] = []
        self.last_outcomes: list[str] = []
        self.errors: list[str] = []
        self.rewards: deque[float] = deque(maxlen=cfg.recent_rewards)
        self.reflections: deque[str] = deque(maxlen=cfg.reflection_memory)
        self.reflection_log: list[ReflectionRecord] = []
        self.plan_before: str | None = None
        self.plan_reward = 0.0
        self.idle = 0
        self.last_result: str | None = None
        self.interacted = False
        self.records: list[InteractionRecord] = []
        self.interactions: list[dict[str, Any]] = []
        self.snapshots: list[dict[str, Any]] = []
        self.diagnostics: list[dict[str, Any]] = []
        self.teammate_actions: list[str] = []
        self.tom: MatrixToM | TeammateToM | None = None
        self.game: MatrixGame | None = None
        if self.kitchen:
            self.teammate = 1 - player
            if cfg.models_others:
                self.tom = TeammateToM(self.session, self.teammate, cfg.value)
        else:
            rules: MatrixSubstrate = world.rules  # type: ignore[assignment]
            order = tuple(
                f"{p}/{b.split('_')[0]}" for p, b in zip(rules.plays, rules.box_kinds)
            )
            self.game = MatrixGame(
                tuple(rules.plays), order, rules.payoff, arena=len(world.players) > 2
            )
            if cfg.models_others:
                self.tom = MatrixToM(self.game, self.session, cfg.value, cfg.tom_mode)

    def describe(self) -> dict[str, Any]:
        return {"label": self.label, **self.config.to_record(), "reasoner": getattr(self.reasoner, "name", "?")}

    # -- per step -----------------------------------------------------------------------

    def act(self, world: WorldState, events: Sequence[GameEvent]) -> AtomicAction:
        obs = observe(world, self.player)
        self.memory.update(obs)
        self.step = world.step_count
        self._absorb(world, events)
        if self.needs_plan:
            self.needs_plan = False
            self._initial_plan(obs)
        if obs.position is None:
            self._drop_plan()
            return AtomicAction.NOOP
        if self.idle > 0:
            self.idle -= 1
            return AtomicAction.NOOP
        sit = self._situation(world, obs)
        for _ in range(self.config.max_replans):
            if self.routine is None:
                if not self.queue:
                    self._finish_plan(obs)
                    self._plan_subgoals(obs)
                    if not self.queue:
                        self.idle = 1
                        return AtomicAction.NOOP
                self.routine = compile_call(self.queue.pop(0), **self._routine_options())
            action = self.routine.next_action(sit)
            if action is not None:
                return action
            self._close_routine()
        return AtomicAction.NOOP

    # -- events and triggers ------------------------------------------------------------

    def _absorb(self, world: WorldState, events: Sequence[GameEvent]) -> None:
        self.interacted = False
        self.last_result = None
        for ev in events:
            if self.kitchen:
                self._kitchen_event(ev)
            elif ev.kind == "interaction" and self.player in ev.players:
                self._interaction_event(world, ev)

    def _interaction_event(self, world: WorldState, ev: GameEvent) -> None:
        assert self.game is not None
        idx = ev.players.index(self.player)
        opponent = ev.players[1 - idx]
        own_inv = tuple(ev.data["inventories"][idx])
        reward = float(ev.data["rewards"][idx])
        own_play = ev.data["plays"][idx]
        self.interacted = True
        self.rewards.append(reward)
        self.plan_reward += reward
        self.memory.forget_player(opponent)
        self.records.append(InteractionRecord(ev.step, opponent, own_inv, reward))
        validated = False
        active = None
        if isinstance(self.tom, MatrixToM):
            plan = self.tom.on_interaction(opponent, own_inv, reward, ev.step)
            self.snapshots.append({"step": ev.step, **self.tom.snapshot()})
            validated = self.tom.bank.validated(opponent) is not None
            try:
                active = self.tom.bank.select_active(opponent).text
            except LookupError:
                active = None
            self._diagnose(self.tom.log)
        elif self.config.plans_high_level:
            plan = self._ask_high_level(own_inv)
        else:
            plan = None
        self.interactions.append({
            "index": len(self.interactions),
            "step": ev.step,
            "opponent": opponent,
            "own_inventory": list(own_inv),
            "own_play": own_play,
            "opponent_play": ev.data["plays"][1 - idx],
            "reward": reward,
            "validated": validated,
            "active_hypothesis": active,
            "target": dict(self.plan.target) if self.plan and self.plan.target else None,
        })
        self._adopt(plan)

    def _kitchen_event(self, ev: GameEvent) -> None:
        if self.player in ev.players:
            self.last_result = ev.kind
        elif self.teammate in ev.players:
            phrase = teammate_phrase(ev)
            if phrase is not None:
                self.teammate_actions.append(phrase)
                if isinstance(self.tom, TeammateToM):
                    self.tom.observe(phrase)
        if ev.kind != "delivered_soup":
            return
        self.rewards.append(DELIVERY_REWARD)
        self.plan_reward += DELIVERY_REWARD
        plan = None
        if isinstance(self.tom, TeammateToM):
            plan = self.tom.on_delivery(ev.step)
            self.snapshots.append({"step": ev.step, **self.tom.snapshot()})
            self._diagnose(self.tom.log)
        elif self.config.plans_high_level:
            plan = self._ask_strategy(UNKNOWN_TEAMMATE)
        self._adopt(plan)

    def _diagnose(self, log: list[dict[str, Any]]) -> None:
        if log:
            self.diagnostics.extend(log)
            log.clear()

    def _adopt(self, plan: HighLevelPlan | None) -> None:
        if plan is None:
            return
        changed = self.plan is None or plan.to_record() != self.plan.to_record()
        self.plan = plan
        if changed:
            self._drop_plan()

    def _drop_plan(self) -> None:
        if self.routine is not None or self.queue:
            self.outcomes.append("plan abandoned")
        self.routine = None
        self.queue = []

    # -- high-level plans -------------------------------------------------------------------

    def _initial_plan(self, obs: StructuredObservation) -> None:
        if self.kitchen:
            plan = self._ask_strategy(UNKNOWN_TEAMMATE)
        else:
            plan = self._ask_high_level(tuple(obs.inventory or ()))
        self._adopt(plan)

    def _history_literal(self) -> str:
        assert self.game is not None
        return format_literal([
            {
                "step": r.step,
                "my_inventory": self.game.as_map(r.own_inventory),
                "reward": round(r.reward, 3),
            }
            for r in self.records
        ])

    def _ask_high_level(self, own_inv: Sequence[int]) -> HighLevelPlan | None:
        assert self.game is not None
        fields = {
            "step": self.step,
            **self.game.fields(),
            "own_inventory": format_literal(self.game.as_map(own_inv or [1] * len(self.game.order))),
            "history": self._history_literal(),
            "previous": "[]",
        }
        text_of = text_expect("strategy")
        plan_of = inventory_expect("my_next_inventory", self.game.order)
        try:
            text, target = self.session.ask(
                "high_level_plan", fields, lambda v: (text_of(v), plan_of(v))
            )
        except ReasonerParseError as exc:
            self.diagnostics.append({"step": self.step, "stage": "high_level_plan", "error": str(exc)})
            return None
        return HighLevelPlan(text, target)

    def _ask_strategy(self, teammate_strategy: str) -> HighLevelPlan | None:
        fields = {"step": self.step, "teammate_strategy": format_literal(teammate_strategy)}
        try:
            text = self.session.ask("cooking_strategy", fields, text_expect("my_strategy"))
        except ReasonerParseError as exc:
            self.diagnostics.append({"step": self.step, "stage": "cooking_strategy", "error": str(exc)})
            return None
        return HighLevelPlan(text, strategy=text)

    # -- subgoals ----------------------------------------------------------------------------

    def _template(self) -> str:
        kind = "cooking" if self.kitchen else "matrix"
        base = "subgoals" if self.config.plans_high_level else "react"
        return f"{base}_{kind}"

    def _pot_states(self) -> dict[Pos, str]:
        if not self.kitchen:
            return {}
        rules: KitchenSubstrate = self.rules  # type: ignore[assignment]
        out = {}
        for pot in rules.fixtures_of("pot"):
            seen = [(self.memory.entries.get(k, {}).get(pot), k) for k in POT_KINDS]
            seen = [(s, k) for s, k in seen if s is not None]
            out[pot] = max(seen)[1] if seen else "unknown"
        return out

    def _salient(self, obs: StructuredObservation) -> str:
        if self.kitchen:
            pots = sorted(self._pot_states().items())
            return f"Held Item: {obs.held or 'nothing'}; Pots: {format_literal([(p, k) for p, k in pots])}"
        return f"Inventory: {list(obs.inventory) if obs.inventory is not None else []}"

    def _context(self, obs: StructuredObservation) -> SubgoalContext:
        extra: dict[str, Any] = {}
        if self.kitchen:
            rules: KitchenSubstrate = self.rules  # type: ignore[assignment]
            side = rules.side_of(obs.position) if obs.position else None
            extra["kitchen"] = format_literal({
                label: rules.fixtures_of(kind, side) for kind, label in KITCHEN_FIXTURES.items()
            })
            extra["pots"] = format_literal(sorted(self._pot_states().items()))
            extra["teammate_actions"] = format_literal(self.teammate_actions[-10:])
        else:
            assert self.game is not None
            extra.update(self.game.fields())
            extra["history"] = self._history_literal()
        return SubgoalContext(
            step=self.step,
            observation=serialize_observation(obs),
            memory=render_memory(self.memory, obs.position),
            plan=self.plan,
            valid_cells=self.valid_cells,
            map_size=(self.layout.width, self.layout.height),
            inventory=obs.inventory,
            held=obs.held,
            outcomes=self.last_outcomes,
            rewards=list(self.rewards),
            errors=self.errors,
            reflections=list(self.reflections),
            extra=extra,
        )

    def _plan_subgoals(self, obs: StructuredObservation) -> None:
        result = plan_subgoals(self._context(obs), self.session, self._template())
        self.errors = [] if result.diagnostic is None else [result.diagnostic]
        if result.diagnostic is not None:
            self.diagnostics.append({"step": self.step, "stage": "subgoals", "error": result.diagnostic})
        self.queue = list(result.calls)
        self.current_plan = list(result.calls)
        self.last_outcomes, self.outcomes = self.outcomes, []
        self.plan_before = self._salient(obs) if self.current_plan else None
        self.plan_reward = 0.0

    def _finish_plan(self, obs: StructuredObservation) -> None:
        """Reflect on the plan that just ran out, when the variant does that."""
        wants = self.config.reflects or (
            # kitchen self-reflection belongs to the modelling agent, so tom=False
            # stays exactly planreact
            self.kitchen and self.config.models_others and self.config.reflection
        )
        if not wants or not self.current_plan or self.plan_before is None:
            return
        record = reflect_on_plan(
            self.session, self.current_plan, self.plan_before, self._salient(obs), self.plan_reward
        )
        self.reflection_log.append(record)
        self.reflections.append(record.reflection)
        self.current_plan = []

    def _routine_options(self) -> dict[str, Any]:
        if self.plan is None or not self.plan.seek:
            return {}
        preferred = []
        for name in self.plan.seek:
            try:
                preferred.append(int(name.rsplit("_", 1)[1]))
            except (IndexError, ValueError):
                continue
        return {"preferred": preferred}

    def _close_routine(self) -> None:
        assert self.routine is not None
        r = self.routine
        note = f" ({r.note})" if r.note else ""
        self.outcomes.append(f"{r.call}: {r.status}{note}")
        if r.status == "failed":
            self.queue = []
        self.routine = None

    def _situation(self, world: WorldState, obs: StructuredObservation) -> Situation:
        assert obs.position is not None
        rules = world.rules
        if self.kitchen:
            kr: KitchenSubstrate = rules  # type: ignore[assignment]
            return Situation(
                layout=world.layout,
                pos=obs.position,
                orientation=obs.orientation,
                step=world.step_count,
                pots=self._pot_states(),
                fixtures=world.layout.fixtures,
                held=obs.held,
                last_result=self.last_result,
                side=kr.side_of(obs.position),
                barrier_x=kr.barrier_x,
            )
        mr: MatrixSubstrate = rules  # type: ignore[assignment]
        resources: dict[Pos, str] = {}
        for box in mr.box_kinds:
            for pos in self.memory.get(box):
                resources[pos] = mr.play_for_box(box)
        return Situation(
            layout=world.layout,
            pos=obs.position,
            orientation=obs.orientation,
            step=world.step_count,
            resources=resources,
            opponents=obs.other_positions(),
            beam_length=mr.beam_length,
            interacted=self.interacted,
        )

    # -- reporting ----------------------------------------------------------------------------

    def report(self) -> dict[str, Any]:
        return {
            "interactions": self.interactions,
            "snapshots": self.snapshots,
            "reflections": [r.to_record() for r in self.reflection_log],
            "diagnostics": self.diagnostics,
            "calls": self.session.calls,
        }

