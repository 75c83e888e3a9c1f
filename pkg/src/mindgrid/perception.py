"""Textual observations and the agent-side memory of previously seen entities."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .parsing import LiteralSyntaxError, format_literal, parse_literal

Pos = tuple[int, int]


def display_name(kind: str) -> str:
    """``'yellow_box'`` -> ``'Yellow Box'``; ``'pot_with_1_tomato'`` -> ``'Pot With 1 Tomato'``."""
    return " ".join(w.capitalize() for w in kind.split("_"))


def kind_key(display: str) -> str:
    return display.strip().lower().replace(" ", "_")


@dataclass(frozen=True)
class StructuredObservation:
    """What one player perceives on one step.

    ``entities`` maps entity kinds to the sorted coordinates visible this
    step; ``others`` lists visible players as ``(index, pos, orientation)``.
    ``position`` is ``None`` while the player waits to respawn.
    """

    player: int
    position: Pos | None
    orientation: str
    entities: Mapping[str, tuple[Pos, ...]] = field(default_factory=dict)
    others: tuple[tuple[int, Pos, str], ...] = ()
    inventory: tuple[int, ...] | None = None
    held: str | None = None
    step: int = 0
    visible: frozenset[Pos] = field(default=frozenset(), compare=False)
    view: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        # normalise to plain dicts of tuples so equality is structural
        object.__setattr__(
            self, "entities", {k: tuple(map(tuple, v)) for k, v in self.entities.items()}
        )

    def player_label(self) -> str:
        return f"player_{self.player}-{self.orientation}"

    def other_positions(self) -> dict[int, Pos]:
        return {i: pos for i, pos, _ in self.others}


def _coords(points: Iterable[Pos]) -> str:
    return "[" + ", ".join(f"({x}, {y})" for x, y in points) + "]"


def serialize_observation(obs: StructuredObservation) -> str:
    """Prompt-visible text for the spatial part of an observation."""
    players = [f"'{obs.player_label()}': " + _coords([obs.position] if obs.position else [])]
    for i, pos, orientation in obs.others:
        players.append(f"'player_{i}-{orientation}': " + _coords([pos]))
    parts = ["Player Position: {" + ", ".join(players) + "}"]
    for kind, points in obs.entities.items():
        parts.append(f"Observable {display_name(kind)} Locations: {_coords(points)}")
    return ", ".join(parts)


def serialize_status(obs: StructuredObservation) -> str:
    """Inventory / held item / step lines that accompany the spatial text."""
    lines = [f"Step: {obs.step}"]
    if obs.inventory is not None:
        lines.append(f"Inventory: {list(obs.inventory)}")
    if obs.held is not None or obs.inventory is None:
        lines.append(f"Held Item: {obs.held or 'nothing'}")
    return "\n".join(lines)


_PLAYER_KEY = re.compile(r"player_(\d+)-([NESW])$")
_SECTION = re.compile(r", Observable ([A-Za-z0-9 ]+?) Locations: ")


def parse_observation(
    text: str,
    *,
    step: int = 0,
    inventory: tuple[int, ...] | None = None,
    held: str | None = None,
) -> StructuredObservation:
    """Inverse of :func:`serialize_observation`.

    The status fields are not part of the spatial text and are passed in.
    """
    prefix = "Player Position: "
    if not text.startswith(prefix):
        raise ValueError("observation text must start with 'Player Position: '")
    headers = list(_SECTION.finditer(text))
    end = headers[0].start() if headers else len(text)
    try:
        players = parse_literal(text[len(prefix) : end])
        entities = {}
        for n, m in enumerate(headers):
            stop = headers[n + 1].start() if n + 1 < len(headers) else len(text)
            points = parse_literal(text[m.end() : stop])
            if not isinstance(points, list):
                raise ValueError(f"{m.group(1)} locations must be a list")
            entities[kind_key(m.group(1))] = tuple(tuple(p) for p in points)
    except LiteralSyntaxError as exc:
        raise ValueError(f"malformed observation text: {exc}") from None
    if not isinstance(players, dict) or not players:
        raise ValueError("player position must be a non-empty map")

    labels = []
    for key, points in players.items():
        m = _PLAYER_KEY.match(key)
        if not m or not isinstance(points, list):
            raise ValueError(f"bad player entry {key!r}")
        labels.append((int(m.group(1)), m.group(2), [tuple(p) for p in points]))
    me, orientation, own = labels[0]
    others = tuple((i, pts[0], o) for i, o, pts in labels[1:] if pts)
    return StructuredObservation(
        player=me,
        position=own[0] if own else None,
        orientation=orientation,
        entities=entities,
        others=others,
        inventory=inventory,
        held=held,
        step=step,
    )


def manhattan(a: Pos, b: Pos) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


def locations_with_distance(points: Iterable[Pos], origin: Pos | None) -> str:
    if origin is None:
        return _coords(points)
    return "[" + ", ".join(f"(({x}, {y}), {manhattan((x, y), origin)})" for x, y in points) + "]"


class EntityMemory:
    """Last-seen step for every (kind, coordinate) the agent has observed.

    Players are stored under ``player_<i>`` with at most one coordinate each.
    An entry is only dropped when the cell is back in view and the entity is
    not there any more.
    """

    def __init__(self, kinds: Iterable[str] = ()) -> None:
        self.kinds = list(kinds)
        self.entries: dict[str, dict[Pos, int]] = {k: {} for k in self.kinds}

    def update(self, obs: StructuredObservation) -> "EntityMemory":
        visible = obs.visible
        for kind, points in obs.entities.items():
            seen = set(points)
            bucket = self.entries.setdefault(kind, {})
            if kind not in self.kinds:
                self.kinds.append(kind)
            for pos in [p for p in bucket if p in visible and p not in seen]:
                del bucket[pos]
            for pos in points:
                bucket[pos] = obs.step
        present = {f"player_{i}": pos for i, pos, _ in obs.others}
        for key, bucket in self.entries.items():
            if not key.startswith("player_") or key in present:
                continue
            for pos in [p for p in bucket if p in visible]:
                del bucket[pos]
        for key, pos in present.items():
            self.entries[key] = {pos: obs.step}
        return self

    def get(self, kind: str) -> dict[Pos, int]:
        return dict(self.entries.get(kind, {}))

    def players(self) -> dict[int, tuple[Pos, int]]:
        out = {}
        for key, bucket in self.entries.items():
            if key.startswith("player_") and bucket:
                (pos, seen), = bucket.items()
                out[int(key.split("_")[1])] = (pos, seen)
        return out

    def forget_player(self, index: int) -> None:
        self.entries.pop(f"player_{index}", None)

    def ordered_kinds(self) -> list[str]:
        players = sorted(
            (k for k in self.entries if k.startswith("player_") and k not in self.kinds),
            key=lambda k: int(k.split("_")[1]),
        )
        return [k for k in self.kinds if k in self.entries] + players

    def __len__(self) -> int:
        return sum(len(b) for b in self.entries.values())


def update_memory(mem: EntityMemory, obs: StructuredObservation) -> EntityMemory:
    """Fold ``obs`` into ``mem`` in place and return it."""
    return mem.update(obs)


def render_memory(mem: EntityMemory, pose: Pos | None) -> str:
    """``{'yellow_box': [((13, 3), 1087, 2), ...]}`` with Manhattan distances."""
    parts = []
    for kind in mem.ordered_kinds():
        bucket = mem.entries[kind]
        if not bucket:
            continue
        items = []
        for pos in sorted(bucket):
            entry = (pos, bucket[pos]) if pose is None else (pos, bucket[pos], manhattan(pos, pose))
            items.append(format_literal(entry))
        parts.append(f"'{kind}': [" + ", ".join(items) + "]")
    return "{" + ", ".join(parts) + "}"


@dataclass
class InteractionRecord:
    """One duel from the focal player's point of view."""

    step: int
    opponent: int
    own_inventory: tuple[int, ...]
    reward: float
    opponent_inventory: tuple[int, ...] | None = None
    feature: str | None = None

    def __post_init__(self) -> None:
        if not math.isfinite(self.reward):
            raise ValueError("interaction reward must be finite")

    def to_record(self) -> dict:
        return {
            "step": self.step,
            "opponent": self.opponent,
            "own_inventory": list(self.own_inventory),
            "reward": self.reward,
            "opponent_inventory": (
                list(self.opponent_inventory) if self.opponent_inventory is not None else None
            ),
            "feature": self.feature,
        }
