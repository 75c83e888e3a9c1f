"""Opponent and teammate modelling with hypothesis banks.

Each modelled player gets its own stream of natural-language hypotheses.
A hypothesis earns a value from how well its predictions match what the
player actually did, updated with the delta rule ``V <- V + alpha (r - V)``.
A value at or above the threshold marks the hypothesis as validated; the
agent then keeps using it until it stops predicting well.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Hashable, Sequence

from .matrix import PayoffMatrix, dominant_play
from .parsing import format_literal
from .perception import InteractionRecord
from .reasoner.oracle import HYP_UNKNOWN, NEUTRAL_BAND, pure_hypothesis
from .reasoner.session import ReasonerParseError, Session

OpponentId = Hashable
OUTCOME_SIGN = {"positive": 1.0, "neutral": 0.0, "negative": -1.0}


@dataclass(frozen=True)
class ValueParams:
    alpha: float = 0.3
    c: float = 1.0
    threshold: float = 0.7
    top_k: int = 5

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")
        if self.c <= 0 or self.top_k < 1:
            raise ValueError("c and top_k must be positive")

    @classmethod
    def counterfactual(cls) -> "ValueParams":
        """Settings for evaluation from extrinsic and counterfactual reward."""
        return cls(alpha=0.3, c=3.0, threshold=3.0, top_k=5)

    def to_record(self) -> dict[str, float]:
        return {"alpha": self.alpha, "c": self.c, "threshold": self.threshold, "top_k": self.top_k}


def rw_update(value: float, reward: float, alpha: float) -> float:
    """One delta-rule step toward ``reward``."""
    return value + alpha * (reward - value)


@dataclass
class Hypothesis:
    id: int
    text: str
    value: float = 0.0
    created_at: int = 0
    predictions: list[tuple[int, str, str, bool]] = field(default_factory=list)
    pending: str | None = None
    plan: dict[str, int] | None = None  # strategy hypotheses carry the inventory they imply

    def validated(self, threshold: float) -> bool:
        return self.value >= threshold

    def to_record(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "text": self.text,
            "value": self.value,
            "created_at": self.created_at,
            "predictions": [list(p) for p in self.predictions],
        }


class EmptyBank(LookupError):
    """No hypothesis exists yet for this player; generate one first."""


class HypothesisBank:
    """Per-player hypothesis streams sharing one set of value parameters."""

    def __init__(self, params: ValueParams | None = None) -> None:
        self.params = params or ValueParams()
        self.streams: dict[OpponentId, list[Hypothesis]] = {}
        self.latest: dict[OpponentId, int] = {}
        self._next_id = 0

    def hypotheses(self, opponent: OpponentId) -> list[Hypothesis]:
        return list(self.streams.get(opponent, []))

    def get(self, opponent: OpponentId, hid: int) -> Hypothesis:
        for h in self.streams.get(opponent, []):
            if h.id == hid:
                return h
        raise KeyError(hid)

    def add(
        self, opponent: OpponentId, text: str, created_at: int, value: float = 0.0,
        plan: dict[str, int] | None = None,
    ) -> Hypothesis:
        """Store a new hypothesis, or re-point ``latest`` at an identical one."""
        stream = self.streams.setdefault(opponent, [])
        for h in stream:
            if h.text == text:
                self.latest[opponent] = h.id
                if plan is not None:
                    h.plan = plan
                return h
        h = Hypothesis(self._next_id, text, value, created_at, plan=plan)
        self._next_id += 1
        stream.append(h)
        self.latest[opponent] = h.id
        return h

    def latest_of(self, opponent: OpponentId) -> Hypothesis | None:
        hid = self.latest.get(opponent)
        return None if hid is None else self.get(opponent, hid)

    def _rank(self, h: Hypothesis) -> tuple[float, int]:
        # higher value first; ties go to the more recent hypothesis
        return (-h.value, -h.id)

    def top_k(self, opponent: OpponentId) -> list[Hypothesis]:
        return sorted(self.streams.get(opponent, []), key=self._rank)[: self.params.top_k]

    def validated(self, opponent: OpponentId) -> Hypothesis | None:
        passing = [h for h in self.streams.get(opponent, []) if h.validated(self.params.threshold)]
        return min(passing, key=self._rank) if passing else None

    def select_active(self, opponent: OpponentId) -> Hypothesis:
        if not self.streams.get(opponent):
            raise EmptyBank(f"no hypotheses for {opponent!r}")
        best = self.validated(opponent)
        if best is not None:
            return best
        latest = self.latest_of(opponent)
        assert latest is not None
        return latest

    def predictors(self, opponent: OpponentId) -> list[Hypothesis]:
        """Hypotheses that should predict the next round."""
        best = self.validated(opponent)
        if best is not None:
            return [best]
        out = self.top_k(opponent)
        latest = self.latest_of(opponent)
        if latest is not None and latest not in out:
            out.append(latest)
        return out

    def refinement_context(self, opponent: OpponentId) -> list[Hypothesis]:
        return [h for h in self.top_k(opponent) if h.value > 0]

    def reward(self, h: Hypothesis, r: float) -> None:
        h.value = rw_update(h.value, r, self.params.alpha)

    def evaluate(self, opponent: OpponentId, actual: str, round_: int) -> list[tuple[int, float]]:
        """Score every pending prediction for ``opponent`` against ``actual``."""
        c = self.params.c
        out = []
        for h in self.streams.get(opponent, []):
            if h.pending is None:
                continue
            correct = h.pending == actual
            r = c if correct else -c
            self.reward(h, r)
            h.predictions.append((round_, h.pending, actual, correct))
            h.pending = None
            out.append((h.id, r))
        return out

    def clear_pending(self, opponent: OpponentId) -> None:
        for h in self.streams.get(opponent, []):
            h.pending = None

    def snapshot(self) -> dict[str, Any]:
        streams = {}
        for opp, stream in self.streams.items():
            active = self.select_active(opp) if stream else None
            streams[str(opp)] = {
                "hypotheses": [h.to_record() for h in stream],
                "active": active.id if active else None,
                "validated": self.validated(opp) is not None,
            }
        return {"params": self.params.to_record(), "streams": streams}


def evaluate(bank: HypothesisBank, opponent: OpponentId, actual: str, round_: int = 0) -> HypothesisBank:
    bank.evaluate(opponent, actual, round_)
    return bank


def select_active(bank: HypothesisBank, opponent: OpponentId) -> Hypothesis:
    return bank.select_active(opponent)


@dataclass
class HighLevelPlan:
    """Strategy handed to the subgoal planner."""

    text: str
    target: dict[str, int] | None = None
    seek: tuple[str, ...] = ()
    strategy: str | None = None

    def __post_init__(self) -> None:
        if self.target is not None:
            if any(v < 0 for v in self.target.values()) or sum(self.target.values()) <= 0:
                raise ValueError("target inventory needs a positive total")

    def to_record(self) -> dict[str, Any]:
        return {"text": self.text, "target": self.target, "seek": list(self.seek), "strategy": self.strategy}


# -- reply shape checks -------------------------------------------------------------


def inventory_expect(key: str, order: Sequence[str]) -> Any:
    def expect(value: Any) -> dict[str, int]:
        if not isinstance(value, dict) or key not in value:
            raise ValueError(f"missing key {key!r}")
        inv = value[key]
        if not isinstance(inv, dict) or set(inv) != set(order):
            raise ValueError(f"{key!r} must map exactly {list(order)} to counts")
        if any(not isinstance(v, int) or isinstance(v, bool) or v < 0 for v in inv.values()):
            raise ValueError(f"{key!r} counts must be non-negative integers")
        if sum(inv.values()) <= 0:
            raise ValueError(f"{key!r} needs a positive total")
        return {name: inv[name] for name in order}

    return expect


def text_expect(key: str) -> Any:
    def expect(value: Any) -> str:
        if not isinstance(value, dict) or not isinstance(value.get(key), str) or not value[key].strip():
            raise ValueError(f"missing text under {key!r}")
        return value[key].strip()

    return expect


def bool_expect(key: str) -> Any:
    def expect(value: Any) -> bool:
        if not isinstance(value, dict) or not isinstance(value.get(key), bool):
            raise ValueError(f"{key!r} must be True or False")
        return value[key]

    return expect


def outcome_expect(value: Any) -> str:
    if not isinstance(value, dict) or value.get("counterfactual_outcome") not in OUTCOME_SIGN:
        raise ValueError("'counterfactual_outcome' must be positive, neutral or negative")
    return value["counterfactual_outcome"]


def plan_expect(order: Sequence[str], seek: bool) -> Any:
    inv = inventory_expect("my_next_inventory", order)

    def expect(value: Any) -> tuple[dict[str, int], tuple[str, ...]]:
        target = inv(value)
        names: tuple[str, ...] = ()
        if seek:
            raw = value.get("opponents_to_seekout", [])
            if not isinstance(raw, list) or not all(isinstance(x, str) for x in raw):
                raise ValueError("'opponents_to_seekout' must be a list of player names")
            names = tuple(raw)
        return target, names

    return expect


# -- matrix-game engine -----------------------------------------------------------------


def opponent_label(index: int) -> str:
    return f"player_{index}"


@dataclass
class MatrixGame:
    """What the engine needs to know about the matrix game being played."""

    plays: tuple[str, ...]
    order: tuple[str, ...]  # prompt names such as 'rock/yellow'
    payoff: PayoffMatrix
    arena: bool = False

    def as_map(self, inventory: Sequence[int]) -> dict[str, int]:
        return dict(zip(self.order, (int(v) for v in inventory)))

    def from_map(self, inv: dict[str, int]) -> tuple[int, ...]:
        return tuple(inv[name] for name in self.order)

    def feature(self, inv: dict[str, int]) -> str:
        return dominant_play(self.from_map(inv), self.plays)

    def fields(self) -> dict[str, str]:
        return {
            "resource_names": format_literal(list(self.order)),
            "payoff": format_literal([list(r) for r in self.payoff.entries]),
            "example_inventory": format_literal(self.as_map([1] * len(self.order))),
            "example_seek": format_literal(["player_1"]),
        }


class MatrixToM:
    """Runs the modelling pipeline after each duel.

    ``mode`` is ``"modular"`` (one request per step, with evaluation and
    refinement), ``"single"`` (one merged request, no evaluation) or
    ``"counterfactual"`` (strategies as hypotheses scored from realised
    and counterfactual reward).
    """

    def __init__(
        self, game: MatrixGame, session: Session, params: ValueParams | None = None,
        mode: str = "modular",
    ) -> None:
        if mode not in ("modular", "single", "counterfactual"):
            raise ValueError(f"unknown modelling mode {mode!r}")
        if params is None:
            params = ValueParams.counterfactual() if mode == "counterfactual" else ValueParams()
        self.game = game
        self.session = session
        self.mode = mode
        self.bank = HypothesisBank(params)
        self.history: dict[OpponentId, list[InteractionRecord]] = {}
        self.rounds = 0
        self.plan: HighLevelPlan | None = None
        self.log: list[dict[str, Any]] = []
        self.executed: int | None = None  # strategy hypothesis behind the current plan

    # prompt material

    def history_literal(self, opponent: OpponentId, estimates: bool = True) -> str:
        entries = []
        for rec in self.history.get(opponent, []):
            entry: dict[str, Any] = {
                "step": rec.step,
                "my_inventory": self.game.as_map(rec.own_inventory),
                "my_play": dominant_play(rec.own_inventory, self.game.plays),
                "reward": round(rec.reward, 3),
            }
            if estimates:
                entry["opponent_inventory"] = (
                    self.game.as_map(rec.opponent_inventory) if rec.opponent_inventory else None
                )
                entry["opponent_play"] = rec.feature
            entries.append(entry)
        return format_literal(entries)

    def _top_literal(self, opponent: OpponentId) -> str:
        return format_literal(
            [{"hypothesis": h.text, "value": round(h.value, 3)} for h in self.bank.refinement_context(opponent)]
        )

    def _fields(self, opponent: OpponentId, step: int, **extra: Any) -> dict[str, Any]:
        return {"step": step, "opponent": opponent_label(opponent), **self.game.fields(), **extra}

    # pipeline steps

    def record_behavior(
        self, opponent: OpponentId, own_inv: Sequence[int], reward: float, step: int
    ) -> str | None:
        """Estimate the opponent's inventory for the duel that just happened."""
        fields = self._fields(
            opponent, step,
            own_inventory=format_literal(self.game.as_map(own_inv)),
            reward=format_literal(round(float(reward), 3)),
            history=self.history_literal(opponent),
        )
        opp: tuple[int, ...] | None = None
        feature = None
        try:
            inv = self.session.ask(
                "opponent_inventory", fields, inventory_expect("opponent_inventory", self.game.order)
            )
            opp = self.game.from_map(inv)
            feature = self.game.feature(inv)
        except ReasonerParseError as exc:
            self.log.append({"step": step, "stage": "record_behavior", "error": str(exc)})
        self.history.setdefault(opponent, []).append(
            InteractionRecord(step, int(opponent), tuple(own_inv), float(reward), opp, feature)  # type: ignore[call-overload]
        )
        return feature

    def generate_or_refine(self, opponent: OpponentId, step: int) -> Hypothesis:
        fields = self._fields(
            opponent, step, history=self.history_literal(opponent), top_hypotheses=self._top_literal(opponent)
        )
        try:
            text = self.session.ask("hypothesis", fields, text_expect("Opponent_strategy"))
        except ReasonerParseError as exc:
            self.log.append({"step": step, "stage": "hypothesis", "error": str(exc)})
            last = next((r.feature for r in reversed(self.history.get(opponent, [])) if r.feature), None)
            text = pure_hypothesis(last) if last else HYP_UNKNOWN
        return self.bank.add(opponent, text, self.rounds)

    def predict(self, opponent: OpponentId, h: Hypothesis, step: int) -> str | None:
        fields = self._fields(
            opponent, step, hypothesis=format_literal(h.text), history=self.history_literal(opponent)
        )
        try:
            inv = self.session.ask(
                "predict", fields, inventory_expect("predicted_opponent_next_inventory", self.game.order)
            )
        except ReasonerParseError as exc:
            self.log.append({"step": step, "stage": "predict", "error": str(exc)})
            return None
        h.pending = self.game.feature(inv)
        return h.pending

    def predict_and_counter(self, opponent: OpponentId, step: int) -> HighLevelPlan | None:
        """Predict with every current predictor, then plan against the active one."""
        for h in self.bank.predictors(opponent):
            self.predict(opponent, h, step)
        active = self.bank.select_active(opponent)
        predicted = active.pending
        predictions = []
        if self.game.arena:
            for opp in sorted(self.bank.streams, key=str):
                a = self.bank.select_active(opp)
                if a.pending is None:
                    continue
                predictions.append({
                    "opponent": opponent_label(opp),  # type: ignore[arg-type]
                    "play": a.pending,
                    "value": round(a.value, 3),
                    "validated": a.validated(self.bank.params.threshold),
                })
        predicted_inv = (
            self.game.as_map([5 if p == predicted else 1 for p in self.game.plays])
            if predicted else None
        )
        fields = self._fields(
            opponent, step,
            hypothesis=format_literal(active.text),
            predicted_inventory=format_literal(predicted_inv),
            predictions=format_literal(predictions),
        )
        try:
            target, seek = self.session.ask(
                "counter_plan", fields, plan_expect(self.game.order, self.game.arena)
            )
        except ReasonerParseError as exc:
            self.log.append({"step": step, "stage": "counter_plan", "error": str(exc)})
            return self.plan
        self.plan = HighLevelPlan(active.text, target, seek)
        return self.plan

    def merged(self, opponent: OpponentId, step: int) -> HighLevelPlan | None:
        fields = self._fields(
            opponent, step, history=self.history_literal(opponent), top_hypotheses=self._top_literal(opponent)
        )
        text_of = text_expect("Opponent_strategy")
        pred_of = inventory_expect("predicted_opponent_next_inventory", self.game.order)
        plan_of = inventory_expect("my_next_inventory", self.game.order)
        try:
            text, pred, target = self.session.ask(
                "merged_tom", fields, lambda v: (text_of(v), pred_of(v), plan_of(v))
            )
        except ReasonerParseError as exc:
            self.log.append({"step": step, "stage": "merged_tom", "error": str(exc)})
            return self.plan
        h = self.bank.add(opponent, text, self.rounds)
        h.pending = self.game.feature(pred)
        self.plan = HighLevelPlan(text, target)
        return self.plan

    def counterfactual_evaluate(
        self, opponent: OpponentId, reward: float, step: int
    ) -> list[tuple[int, float]]:
        """Score strategy hypotheses: the executed one from ``reward``, the rest by counterfactual."""
        c = self.bank.params.c
        out = []
        last = self.history.get(opponent, [])[-1] if self.history.get(opponent) else None
        for h in self.bank.hypotheses(opponent):
            if h.id == self.executed:
                sign = 0.0 if abs(reward) < NEUTRAL_BAND else math.copysign(1.0, reward)
                r = sign * c
            else:
                if h.plan is None or last is None or last.opponent_inventory is None:
                    continue
                fields = self._fields(
                    opponent, step,
                    hypothesis=format_literal(h.text),
                    plan_inventory=format_literal(h.plan),
                    opponent_inventory=format_literal(self.game.as_map(last.opponent_inventory)),
                )
                try:
                    outcome = self.session.ask("counterfactual", fields, outcome_expect)
                except ReasonerParseError as exc:
                    self.log.append({"step": step, "stage": "counterfactual", "error": str(exc)})
                    continue
                r = OUTCOME_SIGN[outcome] * c
            self.bank.reward(h, r)
            h.predictions.append((self.rounds, "plan", f"{r:+g}", r > 0))
            out.append((h.id, r))
        return out

    def strategy_plan(self, opponent: OpponentId, step: int, own_inv: Sequence[int]) -> HighLevelPlan | None:
        """High-level strategy request; the reply becomes a strategy hypothesis."""
        fields = self._fields(
            opponent, step,
            own_inventory=format_literal(self.game.as_map(own_inv)),
            history=self.history_literal(opponent, estimates=False),
            previous=self._top_literal(opponent),
        )
        text_of = text_expect("strategy")
        plan_of = inventory_expect("my_next_inventory", self.game.order)
        try:
            text, target = self.session.ask("high_level_plan", fields, lambda v: (text_of(v), plan_of(v)))
        except ReasonerParseError as exc:
            self.log.append({"step": step, "stage": "high_level_plan", "error": str(exc)})
            return None
        self.bank.add(opponent, text, self.rounds, plan=target)
        return HighLevelPlan(text, target)

    # trigger

    def on_interaction(
        self, opponent: OpponentId, own_inv: Sequence[int], reward: float, step: int
    ) -> HighLevelPlan | None:
        """Full update after a duel with ``opponent``; returns the new plan."""
        self.rounds += 1
        feature = self.record_behavior(opponent, own_inv, reward, step)
        if self.mode == "single":
            self.bank.clear_pending(opponent)
            return self.merged(opponent, step)
        if self.mode == "counterfactual":
            self.counterfactual_evaluate(opponent, reward, step)
            if self.bank.validated(opponent) is None:
                self.strategy_plan(opponent, step, own_inv)
            active = self.bank.select_active(opponent)
            self.executed = active.id
            if active.plan is not None:
                self.plan = HighLevelPlan(active.text, active.plan)
            return self.plan
        if feature is not None:
            self.bank.evaluate(opponent, feature, self.rounds)
        else:
            self.bank.clear_pending(opponent)
        if self.bank.validated(opponent) is None:
            self.generate_or_refine(opponent, step)
        return self.predict_and_counter(opponent, step)

    def snapshot(self) -> dict[str, Any]:
        return {"round": self.rounds, "mode": self.mode, **self.bank.snapshot()}


# -- kitchen engine ------------------------------------------------------------------------


class TeammateToM:
    """Models the kitchen partner; triggered by every delivery."""

    def __init__(self, session: Session, teammate: int, params: ValueParams | None = None) -> None:
        self.session = session
        self.teammate = teammate
        self.bank = HypothesisBank(params)
        self.actions: list[str] = []  # every observed teammate action so far
        self.since_trigger: list[str] = []
        self.rounds = 0
        self.plan: HighLevelPlan | None = None
        self.log: list[dict[str, Any]] = []

    def observe(self, phrase: str) -> None:
        self.actions.append(phrase)
        self.since_trigger.append(phrase)

    def _fields(self, step: int, **extra: Any) -> dict[str, Any]:
        return {"step": step, "teammate": opponent_label(self.teammate), **extra}

    def evaluate(self, step: int) -> list[tuple[int, float]]:
        c = self.bank.params.c
        out = []
        observed = format_literal(list(self.since_trigger))
        for h in self.bank.hypotheses(self.teammate):
            if h.pending is None:
                continue
            fields = self._fields(step, predicted=format_literal(h.pending), observed=observed)
            try:
                ok = self.session.ask(
                    "evaluate_behavior", fields, bool_expect("evaluate_predicted_behavior")
                )
            except ReasonerParseError as exc:
                self.log.append({"step": step, "stage": "evaluate_behavior", "error": str(exc)})
                h.pending = None
                continue
            r = c if ok else -c
            self.bank.reward(h, r)
            h.predictions.append((self.rounds, h.pending, "; ".join(self.since_trigger), ok))
            h.pending = None
            out.append((h.id, r))
        return out

    def generate_or_refine(self, step: int) -> Hypothesis:
        top = [{"hypothesis": h.text, "value": round(h.value, 3)} for h in self.bank.refinement_context(self.teammate)]
        fields = self._fields(
            step, teammate_actions=format_literal(list(self.actions)), top_hypotheses=format_literal(top)
        )
        try:
            text = self.session.ask("teammate_hypothesis", fields, text_expect("teammate_strategy"))
        except ReasonerParseError as exc:
            self.log.append({"step": step, "stage": "teammate_hypothesis", "error": str(exc)})
            text = "My teammate's habits are unclear so far."
        return self.bank.add(self.teammate, text, self.rounds)

    def predict(self, h: Hypothesis, step: int) -> str | None:
        fields = self._fields(step, hypothesis=format_literal(h.text))
        try:
            h.pending = self.session.ask("predict_behavior", fields, text_expect("predicted_next_behavior"))
        except ReasonerParseError as exc:
            self.log.append({"step": step, "stage": "predict_behavior", "error": str(exc)})
            h.pending = None
        return h.pending

    def strategy(self, teammate_strategy: str, step: int) -> HighLevelPlan | None:
        fields = {"step": step, "teammate_strategy": format_literal(teammate_strategy)}
        try:
            text = self.session.ask("cooking_strategy", fields, text_expect("my_strategy"))
        except ReasonerParseError as exc:
            self.log.append({"step": step, "stage": "cooking_strategy", "error": str(exc)})
            return self.plan
        self.plan = HighLevelPlan(text, strategy=text)
        return self.plan

    def on_delivery(self, step: int) -> HighLevelPlan | None:
        self.rounds += 1
        self.evaluate(step)
        if self.bank.validated(self.teammate) is None:
            self.generate_or_refine(step)
        for h in self.bank.predictors(self.teammate):
            self.predict(h, step)
        self.since_trigger = []
        active = self.bank.select_active(self.teammate)
        return self.strategy(active.text, step)

    def snapshot(self) -> dict[str, Any]:
        return {"round": self.rounds, "mode": "teammate", **self.bank.snapshot()}
