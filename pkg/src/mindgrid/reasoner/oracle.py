"""Deterministic rule-based reasoner used for tests and desk-scale runs.

The oracle reads the ``[task: ...]`` tag and the ``Label: value`` data lines
of the prompt, applies a fixed rule for that task, and replies in the same
shape a language model would: a short thought followed by a fenced literal
block. Replies go through the normal parser, so the full parse path is
exercised. The reply is a pure function of the prompt text.
"""

from __future__ import annotations

import re
from typing import Any, Callable, Sequence

from ..layout import Pos
from ..matrix import PayoffMatrix, counter, resolve_interaction
from ..parsing import LiteralSyntaxError, format_literal, parse_literal
from ..perception import StructuredObservation, manhattan, parse_observation
from .base import Completion, PromptExchange
from .prompts import task_of

PREDICT_COUNT = 5  # gathered count in a predicted opponent inventory
TARGET_COUNT = 6  # count of the chosen kind in the agent's own target inventory
MAX_MOVES = 5
CANDIDATE_COUNTS = range(1, 10)
NEUTRAL_BAND = 1.0

# -- hypothesis phrasing (shared with the ToM engine's fallback) -------------------

HYP_PURE = "The opponent plays pure {play}: it gathers {play} resources before every duel."
HYP_BEST_RESPONSE = (
    "The opponent best-responds to my last play: it picks whatever beats what I "
    "played in the previous duel."
)
HYP_MIRROR = "The opponent mirrors my last play (tit-for-tat), starting with cooperate."
HYP_GRIM = "The opponent cooperates until I have defected {n} time(s), then defects for good."
HYP_FLIP = "The opponent starts with {a} and switches to {b} after {n} duel(s)."
HYP_UNDETERMINED = "The opponent's rule is unclear; it will probably repeat its last play ({play})."
HYP_UNKNOWN = "The opponent's rule is unclear so far."

_RE_PURE = re.compile(r"plays pure (\w+)")
_RE_FLIP = re.compile(r"starts with (\w+) and switches to (\w+) after (\d+)")
_RE_GRIM = re.compile(r"until I have defected (\d+)")
_RE_REPEAT = re.compile(r"repeat its last play \((\w+)\)")

SOLO, TOMATO_ROLE, DISH_ROLE = "solo", "tomatoes", "dishes"
STRATEGY_TEXT = {
    SOLO: "I will run the whole recipe myself: tomatoes into a pot, then a dish, plate and deliver.",
    TOMATO_ROLE: "I will keep the pots supplied with tomatoes and leave plating and delivery to my teammate.",
    DISH_ROLE: "I will fetch dishes, plate cooked soup and deliver it while my teammate brings tomatoes.",
}
TEAMMATE_TEXT = {
    DISH_ROLE: "My teammate specialises in dishes: it plates cooked soup and delivers it.",
    TOMATO_ROLE: "My teammate specialises in tomatoes: it keeps putting tomatoes into the pots.",
    "both": "My teammate works on both tomatoes and dishes.",
    "idle": "My teammate is idle and does not help.",
}
BEHAVIOR_LABEL = {
    DISH_ROLE: "picking up a dish and delivering soup",
    TOMATO_ROLE: "placing tomatoes into pot",
    "both": "placing tomatoes into pot",
    "idle": "doing nothing",
}


def pure_hypothesis(play: str) -> str:
    return HYP_PURE.format(play=play)


# -- prompt reading -------------------------------------------------------------

_LINE = re.compile(r"^([A-Z][A-Za-z ]*?): (.*)$", re.MULTILINE)


class _Fields:
    """``Label: value`` lines of a prompt, parsed lazily as literals."""

    def __init__(self, text: str) -> None:
        self.raw: dict[str, str] = {}
        for m in _LINE.finditer(text):
            self.raw.setdefault(m.group(1), m.group(2).strip())
        self.text = text

    def get(self, label: str, default: Any = None) -> Any:
        if label not in self.raw:
            return default
        try:
            return parse_literal(self.raw[label])
        except LiteralSyntaxError:
            return self.raw[label]

    def observation(self) -> StructuredObservation | None:
        for line in self.text.splitlines():
            if line.startswith("Player Position: "):
                return parse_observation(line.strip())
        return None


def _plays(order: Sequence[str]) -> list[str]:
    return [name.split("/")[0] for name in order]


def _box(name: str) -> str:
    return name.split("/")[-1] + "_box"


def _inventory(order: Sequence[str], play: str, count: int) -> dict[str, int]:
    return {name: (count if name.split("/")[0] == play else 1) for name in order}


def _dominant(inv: dict[str, int]) -> str:
    names = list(inv)
    best = max(range(len(names)), key=lambda i: (inv[names[i]], -i))
    return names[best].split("/")[0]


def _reply(thought: str, value: Any) -> str:
    return f"{thought}\n```python\n{format_literal(value)}\n```"


# -- opponent modelling rules ------------------------------------------------------


def invert_payoff(
    own: Sequence[int], reward: float, payoff: PayoffMatrix
) -> tuple[int, ...]:
    """Single-kind opponent inventory whose payoff best explains ``reward``.

    Candidates are all-ones inventories with one kind raised to 1..9. Ties
    prefer a count of 5, then the earlier kind.
    """
    size = payoff.size
    best: tuple[float, int, int, tuple[int, ...]] | None = None
    for j in range(size):
        for n in CANDIDATE_COUNTS:
            cand = tuple(n if i == j else 1 for i in range(size))
            predicted, _ = resolve_interaction(own, cand, payoff)
            key = (round(abs(predicted - reward), 9), abs(n - 5), j, cand)
            if best is None or key < best:
                best = key
    assert best is not None
    return best[3]


def fit_hypothesis(mine: Sequence[str], theirs: Sequence[str], plays: Sequence[str]) -> str:
    """Template hypothesis for the opponent's plays, tried in a fixed order."""
    if not theirs:
        return HYP_UNKNOWN
    if len(set(theirs)) == 1:
        return HYP_PURE.format(play=theirs[0])
    pairs = list(zip(mine, theirs))
    pd = "cooperate" in plays
    if len(theirs) >= 2:
        if pd:
            if theirs[0] == "cooperate" and all(
                theirs[t] == mine[t - 1] for t in range(1, len(pairs))
            ):
                return HYP_MIRROR
        elif all(theirs[t] == counter(mine[t - 1]) for t in range(1, len(pairs))):
            return HYP_BEST_RESPONSE
    switch = next((t for t in range(1, len(theirs)) if theirs[t] != theirs[0]), None)
    if switch is not None and len(set(theirs[switch:])) == 1:
        a, b = theirs[0], theirs[switch]
        if pd and a == "cooperate" and b == "defect" and mine[switch - 1] == "defect":
            n = sum(1 for p in mine[:switch] if p == "defect")
            return HYP_GRIM.format(n=n)
        return HYP_FLIP.format(a=a, b=b, n=switch)
    return HYP_UNDETERMINED.format(play=theirs[-1])


def predict_play(
    hypothesis: str, mine: Sequence[str], theirs: Sequence[str], plays: Sequence[str]
) -> str:
    """Next opponent play implied by a hypothesis text."""
    if m := _RE_PURE.search(hypothesis):
        if m.group(1) in plays:
            return m.group(1)
    if "best-responds to my last" in hypothesis and mine:
        return counter(mine[-1])
    if "mirrors my last" in hypothesis:
        return mine[-1] if mine else "cooperate"
    if m := _RE_GRIM.search(hypothesis):
        defections = sum(1 for p in mine if p == "defect")
        return "defect" if defections >= int(m.group(1)) else "cooperate"
    if m := _RE_FLIP.search(hypothesis):
        a, b, n = m.group(1), m.group(2), int(m.group(3))
        return b if len(theirs) >= n else a
    if m := _RE_REPEAT.search(hypothesis):
        if m.group(1) in plays:
            return m.group(1)
    mentioned = [p for p in plays if re.search(rf"\b{p}\b", hypothesis)]
    if len(mentioned) == 1:
        return mentioned[0]
    return theirs[-1] if theirs else plays[0]


def counter_play(hypothesis: str, predicted: str, plays: Sequence[str]) -> str:
    """Own play against a predicted opponent play."""
    if "cooperate" in plays:
        reactive = any(w in hypothesis for w in ("mirrors", "cooperates until", "unclear"))
        return "cooperate" if reactive else "defect"
    return counter(predicted)


def _history_plays(history: Any) -> tuple[list[str], list[str]]:
    mine, theirs = [], []
    for entry in history or []:
        if not isinstance(entry, dict):
            continue
        if entry.get("opponent_play") is None or entry.get("my_play") is None:
            continue
        mine.append(str(entry["my_play"]))
        theirs.append(str(entry["opponent_play"]))
    return mine, theirs


def _payoff(fields: _Fields) -> PayoffMatrix:
    rows = fields.get("Payoff Matrix")
    return PayoffMatrix(tuple(tuple(r) for r in rows))


def _last_inferred_play(fields: _Fields) -> str | None:
    """Opponent play behind the most recent duel, from own inventory and reward."""
    order = fields.get("Resource Order")
    history = fields.get("Interaction History") or []
    if not history:
        return None
    last = history[-1]
    own = [last["my_inventory"][name] for name in order]
    opp = invert_payoff(own, float(last["reward"]), _payoff(fields))
    return _plays(order)[max(range(len(opp)), key=lambda i: (opp[i], -i))]


# -- spatial planning rules -----------------------------------------------------------


def _known_cells(fields: _Fields, obs: StructuredObservation, kind: str) -> list[Pos]:
    cells = set(obs.entities.get(kind, ()))
    memory = fields.get("Memory") or {}
    for entry in memory.get(kind, []) if isinstance(memory, dict) else []:
        cells.add(tuple(entry[0]))
    return sorted(cells)


def _snap(point: Pos, valid: Sequence[Pos]) -> Pos:
    return min(valid, key=lambda c: (manhattan(c, point), c)) if valid else point


def _explore(here: Pos, step: int, size: tuple[int, int], valid: Sequence[Pos]) -> Pos:
    w, h = size
    center = _snap((w // 2, h // 2), valid)
    if manhattan(here, center) > 4:
        return center
    corners = [(w // 4, h // 4), (3 * w // 4, h // 4), (3 * w // 4, 3 * h // 4), (w // 4, 3 * h // 4)]
    return _snap(corners[(step // 50) % 4], valid)


def _seek_target(fields: _Fields, obs: StructuredObservation, here: Pos) -> Pos | None:
    """Opponent position to hunt: sought players first, most recently seen first."""
    seek = {str(s) for s in fields.get("Opponents To Seek") or []}
    known: dict[str, tuple[Pos, int]] = {}
    memory = fields.get("Memory") or {}
    if isinstance(memory, dict):
        for key, entries in memory.items():
            if key.startswith("player_") and entries:
                known[key] = (tuple(entries[0][0]), int(entries[0][1]))
    for i, pos, _ in obs.others:
        known[f"player_{i}"] = (pos, 1 << 30)
    if not known:
        return None
    pool = {k: v for k, v in known.items() if k in seek} or known
    key = min(pool, key=lambda k: (-pool[k][1], manhattan(here, pool[k][0]), k))
    return pool[key][0]


def matrix_subgoals(fields: _Fields, target: dict[str, int]) -> tuple[str, list[str]]:
    """Greedy plan: walk over the nearest cells of the target kind, else duel or explore."""
    obs = fields.observation()
    if obs is None or obs.position is None:
        return "I am respawning, so I wait.", []
    here = obs.position
    step = int(fields.get("Step", 0))
    valid = [tuple(c) for c in fields.get("Valid Move Cells") or []]
    valid_set = set(valid)
    size = tuple(fields.get("Map Size") or (0, 0))
    inventory = list(fields.get("Inventory") or [])
    order = list(target)
    kind = _dominant(target)
    idx = [n.split("/")[0] for n in order].index(kind)
    need = target[order[idx]] - (inventory[idx] if idx < len(inventory) else 0)
    calls: list[str] = []
    if need > 0:
        box = _box(order[idx])
        remaining = [c for c in _known_cells(fields, obs, box) if c in valid_set or not valid_set]
        cur = here
        for _ in range(min(need, MAX_MOVES)):
            if not remaining:
                break
            nxt = min(remaining, key=lambda c: (manhattan(cur, c), c))
            remaining.remove(nxt)
            calls.append(f"move_to({cur}, {nxt})")
            cur = nxt
        if calls:
            return f"I need {need} more {kind}; heading for the nearest {box} cells.", calls
        dest = _explore(here, step, size, valid)  # type: ignore[arg-type]
        if dest == here:
            dest = _snap((size[0] // 2, size[1] // 2), [c for c in valid if c != here])
        return f"No {box} known; exploring.", [f"move_to({here}, {dest})"]
    opp = _seek_target(fields, obs, here)
    if opp is None:
        opp = _snap((size[0] // 2, size[1] // 2), valid)
    return "Target inventory reached; looking for a duel.", [f"fire_at({opp})"]


# -- kitchen rules ----------------------------------------------------------------------


def _role_of(strategy: str) -> str:
    s = strategy.lower()
    if "whole recipe" in s or "myself" in s:
        return SOLO
    tomatoes, dishes = "tomato" in s, "dish" in s
    if "supplied with tomatoes" in s or (tomatoes and not dishes):
        return TOMATO_ROLE
    if "fetch dishes" in s or (dishes and not tomatoes):
        return DISH_ROLE
    return SOLO


def cooking_subgoals(fields: _Fields, role: str) -> tuple[str, list[str]]:
    obs = fields.observation()
    if obs is None or obs.position is None:
        return "I cannot see myself; waiting.", []
    here = obs.position
    held = fields.get("Held Item", "nothing")
    kitchen = fields.get("Kitchen Layout") or {}
    pots = {tuple(p): k for p, k in fields.get("Pot States") or []}

    def nearest(kind: str) -> Pos | None:
        cells = [tuple(c) for c in kitchen.get(kind, [])]
        return min(cells, key=lambda c: (manhattan(here, c), c)) if cells else None

    def tomatoes(kind: str) -> int:
        if kind in ("cooking_pot", "cooked_pot"):
            return 3
        m = re.search(r"(\d+)", kind)
        return int(m.group(1)) if m else 0

    cooked = sorted(p for p, k in pots.items() if k == "cooked_pot")
    cooking = sorted(p for p, k in pots.items() if k == "cooking_pot")
    open_pots = sorted((p for p in pots if tomatoes(pots[p]) < 3), key=lambda p: (-tomatoes(pots[p]), p))
    delivery, dish, tomato = nearest("delivery_location"), nearest("dish_dispenser"), nearest("tomato_dispenser")
    counters = [tuple(c) for c in kitchen.get("counter", [])]
    memory = fields.get("Memory")
    memory = memory if isinstance(memory, dict) else {}

    def stored(kind: str) -> list[Pos]:
        # what is in view now, plus what memory says about cells out of view
        cells = {tuple(c) for c in obs.entities.get(kind, ())}
        cells |= {tuple(entry[0]) for entry in memory.get(kind, ())}
        return sorted(cells, key=lambda c: (manhattan(here, c), c))

    taken = {c for kind in ("counter_with_tomato", "counter_with_dish", "counter_with_soup") for c in stored(kind)}
    free_counter = next((c for c in counters if c not in taken), None)
    spare_dish = next(iter(c for c in stored("counter_with_dish") if c in counters), None)
    spare_tomato = next(iter(c for c in stored("counter_with_tomato") if c in counters), None)
    if spare_dish is not None:
        dish = spare_dish
    if spare_tomato is not None:
        tomato = spare_tomato
    busy_pot = (cooking or open_pots or sorted(pots) or [None])[0]

    def call(name: str, pos: Pos | None) -> list[str]:
        return [f"{name}({pos})"] if pos is not None else []

    if held == "soup_in_dish":
        return "I hold soup; delivering it.", call("interact", delivery)
    if held == "dish":
        if cooked:
            return "Soup is ready; plating it.", call("interact", cooked[0]) + call("interact", delivery)
        if cooking:
            return "A pot is cooking; waiting to plate.", call("wait", cooking[0]) + call("interact", cooking[0])
        if role == DISH_ROLE and open_pots:
            return "Waiting with a dish for the pot to fill.", call("wait", open_pots[0])
        if free_counter is None:
            return "No free counter; holding the dish by a pot.", call("wait", busy_pot)
        return "Nothing to plate yet; setting the dish aside.", call("interact", free_counter)
    if held == "tomato":
        if open_pots:
            return "Adding my tomato to the fullest open pot.", call("interact", open_pots[0])
        if free_counter is None:
            return "No free counter; holding the tomato by a pot.", call("wait", busy_pot)
        return "All pots are busy; setting the tomato aside.", call("interact", free_counter)
    # empty hands
    if role != TOMATO_ROLE and (cooked or cooking) and dish is not None:
        pot = (cooked or cooking)[0]
        plan = call("interact", dish)
        if not cooked:
            plan += call("wait", pot)
        return "A pot is (nearly) done; fetching a dish.", plan + call("interact", pot) + call("interact", delivery)
    if role == DISH_ROLE:
        pot = (open_pots or sorted(pots) or [None])[0]
        return "Waiting for my teammate to fill a pot.", call("wait", pot)
    if open_pots and tomato is not None:
        return "Bringing a tomato to the fullest open pot.", call("interact", tomato) + call("interact", open_pots[0])
    pot = (cooking or sorted(pots) or [None])[0]
    return "Pots are full; waiting.", call("wait", pot)


def _phrase_group(text: str) -> str | None:
    t = text.lower()
    if "dish" in t or "soup" in t or "deliver" in t:
        return DISH_ROLE
    if "tomato" in t:
        return TOMATO_ROLE
    if "nothing" in t or "idle" in t:
        return "idle"
    return None


def teammate_profile(actions: Sequence[str]) -> str:
    groups = {_phrase_group(a) for a in actions} - {None, "idle"}
    if not groups:
        return "idle"
    if groups == {DISH_ROLE}:
        return DISH_ROLE
    if groups == {TOMATO_ROLE}:
        return TOMATO_ROLE
    counts = {g: sum(1 for a in actions if _phrase_group(a) == g) for g in groups}
    if counts[DISH_ROLE] >= 2 * counts[TOMATO_ROLE]:
        return DISH_ROLE
    if counts[TOMATO_ROLE] >= 2 * counts[DISH_ROLE]:
        return TOMATO_ROLE
    return "both"


def _teammate_key(text: str) -> str:
    for key, value in TEAMMATE_TEXT.items():
        if value == text:
            return key
    g = _phrase_group(text)
    return g if g is not None else "both"


# -- the backend --------------------------------------------------------------------------


class OracleReasoner:
    """Rule-based stand-in for a language model."""

    name = "oracle"

    def __init__(self) -> None:
        self.handlers: dict[str, Callable[[_Fields], str]] = {
            "opponent_inventory": self.opponent_inventory,
            "hypothesis": self.hypothesis,
            "predict": self.predict,
            "counter_plan": self.counter_plan,
            "merged_tom": self.merged_tom,
            "counterfactual": self.counterfactual,
            "high_level_plan": self.high_level_plan,
            "subgoals_matrix": self.subgoals_matrix,
            "subgoals_cooking": self.subgoals_cooking,
            "react_matrix": self.react_matrix,
            "react_cooking": self.react_cooking,
            "teammate_hypothesis": self.teammate_hypothesis,
            "predict_behavior": self.predict_behavior,
            "evaluate_behavior": self.evaluate_behavior,
            "cooking_strategy": self.cooking_strategy,
            "evaluate_plan": self.evaluate_plan,
        }

    def complete(self, exchange: PromptExchange) -> Completion:
        prompt = next(
            (m.content for m in exchange.messages if m.role == "user" and task_of(m.content)), None
        )
        if prompt is None:
            return Completion("I do not know what is being asked.")
        task = task_of(prompt)
        handler = self.handlers.get(task or "")
        if handler is None:
            return Completion(f"Unsupported request {task!r}.")
        return Completion(handler(_Fields(prompt)))

    # matrix games

    def opponent_inventory(self, f: _Fields) -> str:
        order = f.get("Resource Order")
        own_map = f.get("My Inventory")
        own = [own_map[name] for name in order]
        reward = float(f.get("My Reward"))
        opp = invert_payoff(own, reward, _payoff(f))
        value = {"opponent_inventory": dict(zip(order, opp))}
        return _reply(f"A reward of {reward} with my inventory fits this opponent inventory best.", value)

    def hypothesis(self, f: _Fields) -> str:
        plays = _infer_plays(f)
        mine, theirs = _history_plays(f.get("Interaction History"))
        text = fit_hypothesis(mine, theirs, plays)
        return _reply("Looking at the plays so far.", {"Opponent_strategy": text})

    def predict(self, f: _Fields) -> str:
        plays = _infer_plays(f)
        order = _order_for(plays)
        mine, theirs = _history_plays(f.get("Interaction History"))
        play = predict_play(str(f.get("Hypothesis", "")), mine, theirs, plays)
        value = {"predicted_opponent_next_inventory": _inventory(order, play, PREDICT_COUNT)}
        return _reply(f"Under this hypothesis the opponent brings {play} next.", value)

    def counter_plan(self, f: _Fields) -> str:
        order = f.get("Resource Order")
        plays = _plays(order)
        hypothesis = str(f.get("Active Hypothesis", ""))
        predictions = f.get("Opponent Predictions") or []
        predicted = f.get("Predicted Opponent Inventory")
        scores: dict[str, float] = {}
        for p in predictions:
            scores[p["play"]] = scores.get(p["play"], 0.0) + max(float(p["value"]), 0.0)
        seek: list[str] = []
        if scores and max(scores.values()) > 0:
            target_play = min(scores, key=lambda k: (-scores[k], plays.index(k)))
            ranked = sorted(
                (p for p in predictions if p["play"] == target_play),
                key=lambda p: (-float(p["value"]), p["opponent"]),
            )
            seek = [p["opponent"] for p in ranked]
        elif isinstance(predicted, dict):
            target_play = _dominant(predicted)
        else:
            target_play = plays[0]
        mine = counter_play(hypothesis, target_play, plays)
        value: dict[str, Any] = {"my_next_inventory": _inventory(order, mine, TARGET_COUNT)}
        if predictions:
            value["opponents_to_seekout"] = seek
        return _reply(f"Countering an expected {target_play} with {mine}.", value)

    def merged_tom(self, f: _Fields) -> str:
        order = f.get("Resource Order")
        plays = _plays(order)
        mine, theirs = _history_plays(f.get("Interaction History"))
        text = fit_hypothesis(mine, theirs, plays)
        play = predict_play(text, mine, theirs, plays)
        own = counter_play(text, play, plays)
        value = {
            "Opponent_strategy": text,
            "predicted_opponent_next_inventory": _inventory(order, play, PREDICT_COUNT),
            "my_next_inventory": _inventory(order, own, TARGET_COUNT),
        }
        return _reply("Strategy, prediction and counter in one go.", value)

    def counterfactual(self, f: _Fields) -> str:
        order = f.get("Resource Order")
        plan = f.get("Hypothesis Plan Inventory")
        opp = f.get("Observed Opponent Inventory")
        reward, _ = resolve_interaction(
            [plan[n] for n in order], [opp[n] for n in order], _payoff(f)
        )
        outcome = "positive" if reward >= NEUTRAL_BAND else "negative" if reward <= -NEUTRAL_BAND else "neutral"
        return _reply(f"That inventory would have scored {reward:.3f}.", {"counterfactual_outcome": outcome})

    def high_level_plan(self, f: _Fields) -> str:
        order = f.get("Resource Order")
        plays = _plays(order)
        last = _last_inferred_play(f)
        if last is None:
            mine = plays[0]
        elif "cooperate" in plays:
            mine = last
        else:
            mine = counter(last)
        value = {
            "strategy": f"Gather {mine} to answer the last observed play ({last or 'none'}).",
            "my_next_inventory": _inventory(order, mine, TARGET_COUNT),
        }
        return _reply("Planning from the most recent duel.", value)

    def subgoals_matrix(self, f: _Fields) -> str:
        target = f.get("Target Inventory")
        thought, calls = matrix_subgoals(f, target)
        return _reply(thought, {"action_plan": calls})

    def react_matrix(self, f: _Fields) -> str:
        order = f.get("Resource Order")
        plays = _plays(order)
        last = _last_inferred_play(f)
        if last is None:
            mine = plays[0]
        elif "cooperate" in plays:
            mine = last
        else:
            mine = counter(last)
        thought, calls = matrix_subgoals(f, _inventory(order, mine, TARGET_COUNT))
        return _reply(f"Thought: aiming for {mine}. {thought}\nAct:", {"action_plan": calls})

    # kitchen

    def subgoals_cooking(self, f: _Fields) -> str:
        role = _role_of(str(f.get("Strategy", "")))
        thought, calls = cooking_subgoals(f, role)
        return _reply(thought, {"action_plan": calls})

    def react_cooking(self, f: _Fields) -> str:
        thought, calls = cooking_subgoals(f, SOLO)
        return _reply(f"Thought: {thought}\nAct:", {"action_plan": calls})

    def teammate_hypothesis(self, f: _Fields) -> str:
        actions = [str(a) for a in f.get("Teammate Actions") or []]
        text = TEAMMATE_TEXT[teammate_profile(actions)]
        return _reply("Summarising what my teammate did.", {"teammate_strategy": text})

    def predict_behavior(self, f: _Fields) -> str:
        label = BEHAVIOR_LABEL[_teammate_key(str(f.get("Hypothesis", "")))]
        return _reply("Following the hypothesis.", {"predicted_next_behavior": label})

    def evaluate_behavior(self, f: _Fields) -> str:
        predicted = _phrase_group(str(f.get("Predicted Behavior", ""))) or "idle"
        observed = [str(a) for a in f.get("Observed Behavior") or []]
        groups = {_phrase_group(a) for a in observed} - {None}
        ok = (not groups) if predicted == "idle" else predicted in groups
        return _reply("Comparing the prediction with what happened.", {"evaluate_predicted_behavior": ok})

    def cooking_strategy(self, f: _Fields) -> str:
        profile = _teammate_key(str(f.get("Teammate Strategy", "")))
        role = {DISH_ROLE: TOMATO_ROLE, TOMATO_ROLE: DISH_ROLE}.get(profile, SOLO)
        return _reply("Fitting around my teammate.", {"my_strategy": STRATEGY_TEXT[role]})

    def evaluate_plan(self, f: _Fields) -> str:
        plan = f.get("Plan")
        before, after = f.raw.get("State Before"), f.raw.get("State After")
        if before == after:
            value = {
                "evaluation": "failure",
                "reflection": (
                    f"The plan {plan} left the kitchen unchanged. Check the held item before each "
                    "interact and only target fixtures that accept it."
                ),
            }
        else:
            value = {
                "evaluation": "success",
                "reflection": f"The plan {plan} changed the kitchen state; the same pattern can be reused.",
            }
        return _reply("Reviewing the last plan.", value)


def _infer_plays(f: _Fields) -> list[str]:
    order = f.get("Resource Order")
    if isinstance(order, list) and order:
        return _plays(order)
    text = f.text
    if "cooperate" in text and "defect" in text:
        return ["cooperate", "defect"]
    return ["rock", "paper", "scissors"]


def _order_for(plays: Sequence[str]) -> list[str]:
    colours = {"rock": "yellow", "paper": "purple", "scissors": "blue", "cooperate": "green", "defect": "red"}
    return [f"{p}/{colours[p]}" for p in plays]
