"""Turn a high-level plan plus what the agent sees into a list of subgoal calls."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence

from .layout import Pos
from .parsing import PlanError, SubgoalCall, format_literal, parse_action_plan, plan_from_text
from .reasoner.session import ReasonerParseError, Session
from .tom import HighLevelPlan


@dataclass
class SubgoalContext:
    """Everything the subgoal prompt shows; all of it comes from the current episode."""

    step: int
    observation: str
    memory: str
    plan: HighLevelPlan | None
    valid_cells: Sequence[Pos]
    map_size: tuple[int, int]
    inventory: Sequence[int] | None = None
    held: str | None = None
    outcomes: Sequence[str] = ()
    rewards: Sequence[float] = ()
    errors: Sequence[str] = ()
    reflections: Sequence[str] = ()
    extra: dict[str, Any] = field(default_factory=dict)

    def fields(self) -> dict[str, Any]:
        plan = self.plan
        out = {
            "step": self.step,
            "map_size": format_literal(tuple(self.map_size)),
            "valid_cells": format_literal([tuple(c) for c in self.valid_cells]),
            "observation": self.observation,
            "inventory": format_literal(list(self.inventory) if self.inventory is not None else []),
            "held": self.held or "nothing",
            "memory": self.memory,
            "strategy": format_literal(plan.text if plan else "none yet"),
            "target_inventory": format_literal(plan.target if plan and plan.target else {}),
            "seek": format_literal(list(plan.seek) if plan else []),
            "outcomes": format_literal(list(self.outcomes)),
            "errors": format_literal(list(self.errors)),
            "rewards": format_literal([round(r, 3) for r in self.rewards]),
            "reflections": format_literal(list(self.reflections)),
        }
        out.update(self.extra)
        return out


@dataclass
class SubgoalResult:
    calls: list[SubgoalCall]
    diagnostic: str | None = None


def _plan_expect(valid: set[Pos]) -> Any:
    def expect(value: Any) -> list[SubgoalCall]:
        calls = parse_action_plan(value)
        if not calls:
            raise PlanError("'action_plan' is empty")
        for call in calls:
            if call.name == "move_to" and valid and call.target not in valid:
                raise PlanError(f"{call}: destination {call.target} is not a valid cell")
        return calls

    return expect


def plan_subgoals(ctx: SubgoalContext, session: Session, template: str) -> SubgoalResult:
    """Ask for an action plan; one retry with the error, then give up with a diagnostic.

    An empty ``calls`` list means the caller should idle until the next
    re-plan.
    """
    expect = _plan_expect({tuple(c) for c in ctx.valid_cells})
    try:
        calls = session.ask(
            template, ctx.fields(), expect,
            text_parser=lambda text: {"action_plan": [str(c) for c in plan_from_text(text)]},
        )
    except ReasonerParseError as exc:
        return SubgoalResult([], f"subgoal plan unusable after retry: {exc}")
    return SubgoalResult(calls)
