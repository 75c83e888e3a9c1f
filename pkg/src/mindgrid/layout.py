"""Text map layouts shipped with the package.

A map file starts with a header line ``MINDGRID-MAP v1 <name>`` followed by
one row of characters per grid row (row 0 is the top, ``y`` grows downward).

Legend::

    #   wall                    .   floor
    P   spawn point (floor)     |   impassable barrier
    y   rock / yellow resource  p   paper / purple resource
    b   scissors / blue         g   cooperate / green
    r   defect / red            T   tomato dispenser
    D   dish dispenser          O   cooking pot
    S   delivery location       C   counter
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources

Pos = tuple[int, int]

MAP_HEADER = "MINDGRID-MAP"
MAP_VERSION = "v1"

RESOURCE_CHARS = {
    "y": "rock_yellow",
    "p": "paper_purple",
    "b": "scissors_blue",
    "g": "cooperate_green",
    "r": "defect_red",
}
FIXTURE_CHARS = {
    "T": "tomato_dispenser",
    "D": "dish_dispenser",
    "O": "pot",
    "S": "delivery",
    "C": "counter",
}


class LayoutError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Layout:
    name: str
    width: int
    height: int
    walls: frozenset[Pos]
    spawns: tuple[Pos, ...]
    resources: dict[Pos, str] = field(default_factory=dict)
    fixtures: dict[Pos, str] = field(default_factory=dict)
    barrier: frozenset[Pos] = frozenset()

    def in_bounds(self, pos: Pos) -> bool:
        x, y = pos
        return 0 <= x < self.width and 0 <= y < self.height

    def blocked(self, pos: Pos) -> bool:
        """True for cells no player may ever stand on."""
        return (
            not self.in_bounds(pos)
            or pos in self.walls
            or pos in self.barrier
            or pos in self.fixtures
        )

    def floor_cells(self) -> list[Pos]:
        return [
            (x, y)
            for y in range(self.height)
            for x in range(self.width)
            if not self.blocked((x, y))
        ]

    @property
    def center(self) -> Pos:
        return (self.width // 2, self.height // 2)


def parse_layout(text: str) -> Layout:
    lines = text.splitlines()
    if not lines:
        raise LayoutError("empty map file")
    header = lines[0].split()
    if len(header) != 3 or header[0] != MAP_HEADER:
        raise LayoutError(f"bad map header: {lines[0]!r}")
    if header[1] != MAP_VERSION:
        raise LayoutError(f"unsupported map version {header[1]!r}")
    rows = [line for line in lines[1:] if line.strip()]
    if not rows:
        raise LayoutError("map has no rows")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise LayoutError("map rows have unequal length")

    walls, barrier, spawns = set(), set(), []
    res: dict[Pos, str] = {}
    fixtures: dict[Pos, str] = {}
    for y, row in enumerate(rows):
        for x, ch in enumerate(row):
            pos = (x, y)
            if ch == "#":
                walls.add(pos)
            elif ch == "|":
                barrier.add(pos)
            elif ch == "P":
                spawns.append(pos)
            elif ch in RESOURCE_CHARS:
                res[pos] = RESOURCE_CHARS[ch]
            elif ch in FIXTURE_CHARS:
                fixtures[pos] = FIXTURE_CHARS[ch]
            elif ch != ".":
                raise LayoutError(f"unknown map character {ch!r} at {pos}")
    return Layout(
        name=header[2],
        width=width,
        height=len(rows),
        walls=frozenset(walls),
        spawns=tuple(spawns),
        resources=res,
        fixtures=fixtures,
        barrier=frozenset(barrier),
    )


def load_layout(name: str) -> Layout:
    return parse_layout(data_text("maps", f"{name}.txt"))


def data_text(*parts: str) -> str:
    """Read a text file bundled under ``mindgrid/data``."""
    node = resources.files("mindgrid").joinpath("data")
    for part in parts:
        node = node.joinpath(part)
    return node.read_text(encoding="utf-8")
